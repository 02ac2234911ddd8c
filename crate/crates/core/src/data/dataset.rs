use alloc::format;
use alloc::vec::Vec;

use super::schema::AttributeSchema;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// One observation: features plus the generalized attribute vector
/// `(class, domain_1, .., domain_m)`, all 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Tensor,
    pub attrs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: AttributeSchema,
    pub item_shape: Vec<usize>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(schema: AttributeSchema, item_shape: Vec<usize>, samples: Vec<Sample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.x.shape() != item_shape.as_slice() {
                return Err(Error::Dimension(format!("sample {i} has shape {:?}, expected {item_shape:?}", s.x.shape())));
            }
            if !s.x.all_finite() {
                return Err(Error::NonFinite(format!("features of sample {i}")));
            }
            schema.check(&s.attrs)?;
        }
        Ok(Self { schema, item_shape, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Stacks the features of `indices` into a batch tensor.
    pub fn features(&self, indices: &[usize]) -> Result<Tensor> {
        let rows: Vec<&[f32]> = indices.iter().map(|&i| self.samples[i].x.data()).collect();
        Tensor::stack(&rows, &self.item_shape)
    }

    /// Zero-based values of attribute `j` for `indices`.
    pub fn labels(&self, j: usize, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.samples[i].attrs[j] - 1).collect()
    }

    pub fn attrs(&self, i: usize) -> &[usize] {
        &self.samples[i].attrs
    }
}
