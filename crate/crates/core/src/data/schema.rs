use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Names and cardinalities of the class attribute (index 0) and the `m`
/// domain attributes that follow it. Values are 1-based: `a_j ∈ 1..=k_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSchema {
    names: Vec<String>,
    cardinalities: Vec<usize>,
    class_sharing: Vec<bool>,
}

impl AttributeSchema {
    /// `class_sharing[j]` marks domain attributes whose domains may share classes in training.
    pub fn new(names: &[&str], cardinalities: &[usize], class_sharing: &[bool]) -> Result<Self> {
        if names.len() < 2 || names.len() != cardinalities.len() || names.len() != class_sharing.len() {
            return Err(Error::Schema(format!(
                "need a class and at least one domain attribute with matching lengths, got {} names / {} cardinalities / {} flags",
                names.len(),
                cardinalities.len(),
                class_sharing.len()
            )));
        }
        if let Some((j, k)) = cardinalities.iter().enumerate().find(|(_, &k)| k < 2) {
            return Err(Error::Schema(format!("attribute `{}` has cardinality {k} < 2", names[j])));
        }
        if class_sharing[0] {
            return Err(Error::Schema("the class attribute cannot be class-sharing".into()));
        }
        Ok(Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            cardinalities: cardinalities.to_vec(),
            class_sharing: class_sharing.to_vec(),
        })
    }

    /// Digit, background color and foreground color; the foreground may share digits.
    pub fn cmnist() -> Self {
        Self::new(&["digit", "bg", "fg"], &[10, 10, 10], &[false, false, true]).expect("valid")
    }

    /// Number of domain-difference types.
    pub fn m(&self) -> usize {
        self.cardinalities.len() - 1
    }

    /// Number of attributes including the class (`m + 1`).
    pub fn width(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn k(&self, j: usize) -> usize {
        self.cardinalities[j]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_class_sharing(&self, j: usize) -> bool {
        self.class_sharing[j]
    }

    pub fn class_sharing(&self) -> &[bool] {
        &self.class_sharing
    }

    pub fn check(&self, attrs: &[usize]) -> Result<()> {
        if attrs.len() != self.width() {
            return Err(Error::Schema(format!("attribute vector of length {}, expected {}", attrs.len(), self.width())));
        }
        for (j, &a) in attrs.iter().enumerate() {
            if a < 1 || a > self.cardinalities[j] {
                return Err(Error::Range(format!("{} = {a} outside 1..={}", self.names[j], self.cardinalities[j])));
            }
        }
        Ok(())
    }
}
