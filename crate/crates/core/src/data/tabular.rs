//! Synthetic tabular corpus: Gaussian class clusters shifted by per-domain offsets.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::{Dataset, Sample};
use super::schema::AttributeSchema;
use super::split::{carve_validation, GcdrSplit, Role, SplitEntry};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rng::{self, purpose};

/// Probability that a caused attribute follows its cause.
pub const CAUSAL_STRENGTH: f64 = 0.7;

/// Directed dependence `cause → effect` between 1-based attribute positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CausalEdge {
    pub cause: usize,
    pub effect: usize,
}

impl CausalEdge {
    pub fn new(cause: usize, effect: usize) -> Self {
        Self { cause, effect }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularOptions {
    pub dim: usize,
    pub center_scale: f32,
    pub offset_scale: f32,
    pub noise: f32,
    pub causal_edge: Option<CausalEdge>,
    pub seed: u64,
}

impl TabularOptions {
    pub fn new(seed: u64) -> Self {
        Self { dim: 16, center_scale: 1.5, offset_scale: 1.0, noise: 0.5, causal_edge: None, seed }
    }
}

fn normal<R: Rng>(rng: &mut R) -> f32 {
    StandardNormal.sample(rng)
}

/// Draws `n` samples. Attributes are independent and uniform unless an edge
/// is set, in which case the effect copies a fixed function of the cause with
/// probability [`CAUSAL_STRENGTH`] and is uniform otherwise.
pub fn generate_tabular(n: usize, schema: &AttributeSchema, opts: &TabularOptions) -> Result<Dataset> {
    let combos: usize = schema.cardinalities().iter().product();
    if n < combos {
        return Err(Error::Size(format!("{n} samples cannot cover {combos} attribute combinations")));
    }
    if opts.dim == 0 {
        return Err(Error::Value("feature dimension must be positive".into()));
    }
    let width = schema.width();
    if let Some(e) = opts.causal_edge {
        if e.cause == e.effect || !(1..=width).contains(&e.cause) || !(1..=width).contains(&e.effect) {
            return Err(Error::Range(format!("causal edge {}→{} outside 1..={width}", e.cause, e.effect)));
        }
    }

    let mut rng = rng::stream(opts.seed, purpose::TABULAR);
    let d = opts.dim;
    // offsets[j][v] is the shift for value v+1 of attribute j; attribute 0 holds the class centers.
    let offsets: Vec<Vec<Vec<f32>>> = (0..width)
        .map(|j| {
            let scale = if j == 0 { opts.center_scale } else { opts.offset_scale };
            (0..schema.k(j)).map(|_| (0..d).map(|_| scale * normal(&mut rng)).collect()).collect()
        })
        .collect();

    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let mut attrs = vec![0usize; width];
        for (j, a) in attrs.iter_mut().enumerate() {
            *a = rng.random_range(1..=schema.k(j));
        }
        if let Some(e) = opts.causal_edge {
            let (c, t) = (e.cause - 1, e.effect - 1);
            if rng.random_bool(CAUSAL_STRENGTH) {
                attrs[t] = (attrs[c] - 1) % schema.k(t) + 1;
            }
        }
        let mut x = vec![0.0f32; d];
        for (j, &a) in attrs.iter().enumerate() {
            for (xi, o) in x.iter_mut().zip(&offsets[j][a - 1]) {
                *xi += o;
            }
        }
        for xi in &mut x {
            *xi += opts.noise * normal(&mut rng);
        }
        samples.push(Sample { x: Tensor::new(&[d], x)?, attrs });
    }
    Dataset::new(schema.clone(), vec![d], samples)
}

/// Cross-domain split over a tabular corpus. Classes are partitioned into
/// contiguous groups, one per value of the grouping attribute; training keeps
/// each class only under its own group's domain and testing keeps the rest.
/// All other domain attributes must be class-sharing.
pub fn build_grouped_split(
    data: &Dataset,
    grouping: usize,
    validation_fraction: f64,
    seed: u64,
) -> Result<GcdrSplit> {
    let schema = &data.schema;
    if grouping == 0 || grouping >= schema.width() {
        return Err(Error::Range(format!("grouping attribute {grouping} must be a domain attribute")));
    }
    if let Some(j) = (1..schema.width()).find(|&j| j != grouping && !schema.is_class_sharing(j)) {
        return Err(Error::Construction(format!(
            "attribute `{}` must be class-sharing for a grouped split",
            schema.name(j)
        )));
    }
    let (k1, kg) = (schema.k(0), schema.k(grouping));
    if kg > k1 {
        return Err(Error::Construction(format!("{kg} domains cannot each own a class among {k1}")));
    }
    let home = |class: usize| (class - 1) * kg / k1 + 1;
    let entries = data
        .samples
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let role = if s.attrs[grouping] == home(s.attrs[0]) { Role::Train } else { Role::Test };
            SplitEntry { index, role, attrs: s.attrs.clone() }
        })
        .collect();
    let mut split = GcdrSplit::new(entries);
    carve_validation(&mut split, schema, validation_fraction, &mut rng::stream(seed, purpose::SPLIT));
    Ok(split)
}
