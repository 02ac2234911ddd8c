use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::CausalEdge;
use crate::error::{Error, Result};

/// Loss weights: `w` for attribute learning, `w_tilde[j][j2]` for the
/// discriminator grid, `w_prime` for recognition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub w: Vec<f32>,
    pub w_tilde: Vec<Vec<f32>>,
    pub w_prime: Vec<f32>,
}

impl WeightTable {
    /// Class terms weigh 1 (including every branch's class discriminator), everything else 0.1.
    pub fn standard(width: usize) -> Self {
        let main = |j: usize| if j == 0 { 1.0 } else { 0.1 };
        Self {
            w: (0..width).map(main).collect(),
            w_tilde: (0..width).map(|_| (0..width).map(main).collect()).collect(),
            w_prime: (0..width).map(main).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.w.len()
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        let square = self.w_tilde.len() == width && self.w_tilde.iter().all(|r| r.len() == width);
        if self.w.len() != width || self.w_prime.len() != width || !square {
            return Err(Error::Config(format!("weight tables must be sized for {width} attributes")));
        }
        let all = self.w.iter().chain(self.w_tilde.iter().flatten()).chain(&self.w_prime);
        if let Some(bad) = all.copied().find(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!("weight {bad} must be finite and >= 0")));
        }
        Ok(())
    }
}

/// 0/1 prior Λ and the pruned recombination sets S_j it induces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalPrior {
    lambda: Vec<Vec<u8>>,
    s: Vec<Vec<usize>>,
}

impl CausalPrior {
    pub fn identity(width: usize) -> Self {
        Self::from_lambda(vec![vec![1; width]; width])
    }

    fn from_lambda(lambda: Vec<Vec<u8>>) -> Self {
        let width = lambda.len();
        // j causes j2 exactly when lambda[j2][j] == 0; such j2 leave S_j.
        let s = (0..width).map(|j| (0..width).filter(|&j2| j2 != j && lambda[j2][j] == 1).collect()).collect();
        Self { lambda, s }
    }

    /// Λ[j][j2] = 0 iff attribute j2 causes attribute j. Edges use 1-based attribute positions.
    pub fn from_edges(width: usize, edges: &[CausalEdge]) -> Result<Self> {
        let mut lambda = vec![vec![1u8; width]; width];
        for e in edges {
            if e.cause == e.effect || !(1..=width).contains(&e.cause) || !(1..=width).contains(&e.effect) {
                return Err(Error::Range(format!("causal edge {}→{} outside 1..={width}", e.cause, e.effect)));
            }
            lambda[e.effect - 1][e.cause - 1] = 0;
        }
        Ok(Self::from_lambda(lambda))
    }

    /// Prior from a stored 0/1 matrix.
    pub fn from_matrix(lambda: Vec<Vec<u8>>) -> Result<Self> {
        let width = lambda.len();
        if lambda.iter().any(|r| r.len() != width) {
            return Err(Error::Dimension("prior matrix must be square".into()));
        }
        if let Some(v) = lambda.iter().flatten().find(|&&v| v > 1) {
            return Err(Error::Value(format!("prior entry {v} is not 0 or 1")));
        }
        Ok(Self::from_lambda(lambda))
    }

    pub fn width(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self, j: usize, j2: usize) -> u8 {
        self.lambda[j][j2]
    }

    pub fn matrix(&self) -> &[Vec<u8>] {
        &self.lambda
    }

    /// Branches whose transforms receive branch `j`'s loss on unseen combinations.
    pub fn s(&self, j: usize) -> &[usize] {
        &self.s[j]
    }

    pub fn edges(&self) -> Vec<CausalEdge> {
        let mut out = Vec::new();
        for (j, row) in self.lambda.iter().enumerate() {
            for (j2, &v) in row.iter().enumerate() {
                if j != j2 && v == 0 {
                    out.push(CausalEdge::new(j2 + 1, j + 1));
                }
            }
        }
        out.sort();
        out
    }
}

/// Discriminator weights after masking off-diagonal terms by Λ.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveWeights {
    pub w_tilde: Vec<Vec<f32>>,
}

/// Validates a 0/1 prior matrix and derives the masked weights and S_j sets.
pub fn apply_causal_prior(lambda: &[Vec<f32>], weights: &WeightTable) -> Result<(EffectiveWeights, CausalPrior)> {
    let width = weights.width();
    if lambda.len() != width || lambda.iter().any(|r| r.len() != width) {
        return Err(Error::Dimension(format!("prior must be {width}×{width}")));
    }
    let mut m = vec![vec![1u8; width]; width];
    for (j, row) in lambda.iter().enumerate() {
        for (j2, &v) in row.iter().enumerate() {
            m[j][j2] = match v {
                0.0 => 0,
                1.0 => 1,
                other => return Err(Error::Value(format!("prior entry ({}, {}) is {other}, not 0 or 1", j + 1, j2 + 1))),
            };
        }
    }
    for (j, row) in m.iter_mut().enumerate() {
        row[j] = 1;
    }
    let prior = CausalPrior::from_lambda(m);
    Ok((prior.effective(weights), prior))
}

impl CausalPrior {
    pub fn effective(&self, weights: &WeightTable) -> EffectiveWeights {
        let w_tilde = weights
            .w_tilde
            .iter()
            .enumerate()
            .map(|(j, row)| {
                row.iter().enumerate().map(|(j2, &w)| if j == j2 { w } else { w * self.lambda[j][j2] as f32 }).collect()
            })
            .collect();
        EffectiveWeights { w_tilde }
    }
}
