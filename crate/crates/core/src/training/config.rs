use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::CausalEdge;
use crate::error::{Error, Result};
use crate::model::{Architecture, WeightTable};
use crate::numerics::AdamConfig;

/// Training recipe. `Full` is the complete two-stage method; the rest are ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Full,
    Stage1Only,
    SingleBranch,
    SharedD,
    NoAdvStage1,
    NoAdvAtAll,
    Direct,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Full,
        Variant::Stage1Only,
        Variant::SingleBranch,
        Variant::SharedD,
        Variant::NoAdvStage1,
        Variant::NoAdvAtAll,
        Variant::Direct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Stage1Only => "stage1-only",
            Variant::SingleBranch => "single-branch",
            Variant::SharedD => "shared-d",
            Variant::NoAdvStage1 => "no-adv-stage1",
            Variant::NoAdvAtAll => "no-adv-at-all",
            Variant::Direct => "direct",
        }
    }

    /// Whether stage 1 includes the discriminator and adversarial terms.
    pub fn adversarial_stage1(self) -> bool {
        matches!(self, Variant::Full | Variant::Stage1Only | Variant::SingleBranch | Variant::SharedD)
    }

    pub fn single_branch(self) -> bool {
        matches!(self, Variant::SingleBranch | Variant::Direct)
    }

    pub fn stage2(self) -> Option<Routing> {
        match self {
            Variant::Full | Variant::SharedD | Variant::NoAdvStage1 => Some(Routing::Additive),
            Variant::NoAdvAtAll => Some(Routing::Everything),
            Variant::Stage1Only | Variant::SingleBranch | Variant::Direct => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// How stage-2 recognition losses reach the transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Routing {
    /// Seen items train {R_j, T_j}; unseen items train {R_j} ∪ T_{S_j}.
    Additive,
    /// Every loss trains every transform and recognition head.
    Everything,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    /// Adversarial-phase steps per discriminator-phase step.
    pub ratio: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub variant: Variant,
    /// Screening threshold on donor confidence.
    pub tau: f32,
    /// Augmented items per training sample.
    pub augment_factor: usize,
    pub weights: Option<WeightTable>,
    pub causal_edges: Vec<CausalEdge>,
    pub arch: Option<Architecture>,
    /// Domain attribute used for the equality-of-odds gap; defaults to the first non-sharing one.
    pub eo_attribute: Option<usize>,
    pub eval_chunk: usize,
}

impl TrainConfig {
    pub fn new(seed: u64, variant: Variant) -> Self {
        Self {
            batch_size: 64,
            stage1_epochs: 30,
            stage2_epochs: 10,
            ratio: 5,
            adam: AdamConfig::default(),
            seed,
            variant,
            tau: 0.9,
            augment_factor: 4,
            weights: None,
            causal_edges: Vec::new(),
            arch: None,
            eo_attribute: None,
            eval_chunk: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.batch_size < 1 {
            return fail(format!("batch size {} must be at least 1", self.batch_size));
        }
        if self.ratio < 1 {
            return fail(format!("step ratio {} must be at least 1", self.ratio));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return fail(format!("screening threshold {} outside [0, 1]", self.tau));
        }
        if !(self.adam.lr.is_finite() && self.adam.lr > 0.0) {
            return fail(format!("learning rate {} must be positive", self.adam.lr));
        }
        if self.stage1_epochs < 1 {
            return fail("stage 1 needs at least one epoch".into());
        }
        if self.variant.stage2().is_some() && (self.stage2_epochs < 1 || self.augment_factor < 1) {
            return fail("stage 2 needs at least one epoch and a positive augmentation factor".into());
        }
        if self.eval_chunk < 1 {
            return fail("evaluation chunk must be positive".into());
        }
        Ok(())
    }
}
