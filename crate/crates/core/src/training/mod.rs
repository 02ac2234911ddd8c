pub mod config;
pub mod eval;
pub mod run;
pub mod stage1;
pub mod stage2;

pub use config::{Routing, TrainConfig, Variant};
pub use eval::{class_scores, Evaluator};
pub use run::{build_graph, train, train_with_curve, AugmentStats, CurvePoint, EpochRecord, StageResult, TrainOutcome};
pub use stage1::{stage1_step, term_gradients, Batch, Stage1Losses, Stage1Plan, Term};
pub use stage2::{make_augmented, routed_set, stage2_gradients, stage2_step, Augmented, AugmentedBatch, DonorTable};
