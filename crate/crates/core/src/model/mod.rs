pub mod checkpoint;
pub mod graph;
pub mod prior;

pub use checkpoint::{decode_checkpoint, encode_checkpoint};
pub use graph::{AdditiveOutputs, Architecture, BranchOutputs, InputKind, Mlp, ModelGraph, Stack};
pub use prior::{apply_causal_prior, CausalPrior, EffectiveWeights, WeightTable};
