use alloc::format;
use alloc::vec::Vec;

use super::config::{Routing, TrainConfig, Variant};
use super::eval::Evaluator;
use super::stage1::{stage1_step, Batch, Stage1Losses, Stage1Plan};
use super::stage2::{make_augmented, stage2_step, DonorTable};
use crate::data::{batches, batches_for, validate_gcdr, Dataset, GcdrSplit};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::model::{Architecture, CausalPrior, InputKind, ModelGraph, Stack, WeightTable};
use crate::numerics::ParamSet;
use crate::rng::purpose;

/// One row group of the per-epoch log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub stage: u8,
    pub epoch: usize,
    pub split: &'static str,
    pub metrics: Vec<(&'static str, f64)>,
}

/// Validation and test metrics of the checkpoint selected for a stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    pub best_epoch: usize,
    pub val: MetricsReport,
    pub test: MetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentStats {
    pub requested: usize,
    pub kept: usize,
    pub seen: usize,
    pub unseen: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub graph: ModelGraph,
    pub records: Vec<EpochRecord>,
    pub stage1: StageResult,
    pub stage2: Option<StageResult>,
    pub augmentation: Option<AugmentStats>,
}

impl TrainOutcome {
    /// Result of the last stage the variant runs.
    pub fn final_stage(&self) -> &StageResult {
        self.stage2.as_ref().unwrap_or(&self.stage1)
    }
}

/// Test aAUC of the stage-1 stack at a stage-1 epoch and of the stage-2 stack after stage 2 from there.
/// `after` is `None` when screening left no recombined item to train on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub epoch: usize,
    pub before: f64,
    pub after: Option<f64>,
}

impl CurvePoint {
    pub fn gain(&self) -> Option<f64> {
        self.after.map(|a| a - self.before)
    }
}

fn input_kind(item_shape: &[usize]) -> Result<InputKind> {
    match *item_shape {
        [channels, height, width] => Ok(InputKind::Image { channels, height, width }),
        [dim] => Ok(InputKind::Vector { dim }),
        _ => Err(Error::Dimension(format!("unsupported item shape {item_shape:?}"))),
    }
}

/// Freshly initialized graph for a dataset and configuration.
pub fn build_graph(data: &Dataset, cfg: &TrainConfig) -> Result<ModelGraph> {
    let width = data.schema.width();
    let mut arch = match &cfg.arch {
        Some(a) => a.clone(),
        None => Architecture::for_input(input_kind(&data.item_shape)?),
    };
    arch.shared_d = cfg.variant == Variant::SharedD;
    let weights = cfg.weights.clone().unwrap_or_else(|| WeightTable::standard(width));
    let prior = CausalPrior::from_edges(width, &cfg.causal_edges)?;
    ModelGraph::new(data.schema.clone(), arch, weights, prior, cfg.seed)
}

fn eo_attribute(data: &Dataset, cfg: &TrainConfig) -> Result<usize> {
    match cfg.eo_attribute {
        Some(j) => Ok(j),
        None => (1..data.schema.width())
            .find(|&j| !data.schema.is_class_sharing(j))
            .ok_or_else(|| Error::Config("no non-sharing domain attribute for the equality-of-odds gap".into())),
    }
}

fn loss_record(epoch: usize, l: &Stage1Losses, plan: &Stage1Plan) -> EpochRecord {
    let mut metrics = alloc::vec![("loss_attribute", l.attribute)];
    if plan.adversarial {
        metrics.extend([("loss_discriminate", l.discriminate), ("loss_reinforce", l.reinforce), ("loss_eliminate", l.eliminate)]);
    }
    EpochRecord { stage: 1, epoch, split: "train", metrics }
}

struct Best {
    auc: f64,
    epoch: usize,
    params: ParamSet,
}

fn keep_best(best: &mut Option<Best>, auc: f64, epoch: usize, params: &ParamSet) {
    if best.as_ref().is_none_or(|b| auc > b.auc) {
        *best = Some(Best { auc, epoch, params: params.clone() });
    }
}

/// Runs every stage the variant calls for and returns the selected checkpoint.
pub fn train(data: &Dataset, split: &GcdrSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    Ok(train_with_curve(data, split, cfg, &[])?.0)
}

/// Like [`train`], additionally branching a stage-2 run off the stage-1 state at each epoch in `marks`.
pub fn train_with_curve(data: &Dataset, split: &GcdrSplit, cfg: &TrainConfig, marks: &[usize]) -> Result<(TrainOutcome, Vec<CurvePoint>)> {
    cfg.validate()?;
    let report = validate_gcdr(split, &data.schema);
    if !report.passed() {
        return Err(Error::Construction(format!("split violates cross-domain constraints: {report}")));
    }
    if let Some(&bad) = marks.iter().find(|&&m| m < 1 || m > cfg.stage1_epochs) {
        return Err(Error::Config(format!("curve mark {bad} outside 1..={}", cfg.stage1_epochs)));
    }
    let curve_routing = match (marks.is_empty(), cfg.variant.stage2()) {
        (true, r) => r,
        (false, Some(r)) => Some(r),
        (false, None) => return Err(Error::Config(format!("variant `{}` has no stage 2 to measure", cfg.variant))),
    };
    let train_idx = split.train();
    if train_idx.is_empty() {
        return Err(Error::Empty("training split is empty".into()));
    }
    let eval = Evaluator::new(data, split, eo_attribute(data, cfg)?, cfg.eval_chunk)?;
    let mut graph = build_graph(data, cfg)?;
    let plan = if cfg.variant.single_branch() {
        Stage1Plan { branches: alloc::vec![0], adversarial: cfg.variant.adversarial_stage1() }
    } else {
        Stage1Plan::all(graph.width(), cfg.variant.adversarial_stage1())
    };

    let mut records = Vec::new();
    let mut curve = Vec::new();
    let mut best: Option<Best> = None;
    for epoch in 1..=cfg.stage1_epochs {
        let mut sum = Stage1Losses::default();
        let groups = batches(&train_idx, cfg.batch_size, cfg.seed, epoch as u64, true)?;
        for idx in &groups {
            let l = stage1_step(&mut graph, &Batch::from_dataset(data, idx)?, &plan, cfg.ratio, &cfg.adam)?;
            sum.attribute += l.attribute;
            sum.discriminate += l.discriminate;
            sum.reinforce += l.reinforce;
            sum.eliminate += l.eliminate;
        }
        let n = groups.len() as f64;
        let mean = Stage1Losses {
            attribute: sum.attribute / n,
            discriminate: sum.discriminate / n,
            reinforce: sum.reinforce / n,
            eliminate: sum.eliminate / n,
        };
        records.push(loss_record(epoch, &mean, &plan));
        let val = eval.validation(&graph, Stack::Stage1)?;
        keep_best(&mut best, val.auc, epoch, &graph.params);
        records.push(EpochRecord { stage: 1, epoch, split: "val", metrics: val.entries() });

        if marks.contains(&epoch) {
            let routing = curve_routing.expect("checked above");
            let before = eval.test_auc(&graph, Stack::Stage1)?;
            let mut branch = graph.clone();
            let after = match run_stage2(&mut branch, data, split, cfg, routing, &eval, &mut Vec::new()) {
                Ok((result, _)) => Some(result.test.auc),
                Err(Error::Empty(_)) => None,
                Err(e) => return Err(e),
            };
            curve.push(CurvePoint { epoch, before, after });
        }
    }
    let best = best.expect("at least one epoch");
    graph.params = best.params;
    let (val, test) = eval.validation_and_test(&graph, Stack::Stage1)?;
    let stage1 = StageResult { best_epoch: best.epoch, val, test };
    records.push(EpochRecord { stage: 1, epoch: best.epoch, split: "test", metrics: stage1.test.entries() });

    let (stage2, augmentation) = match cfg.variant.stage2() {
        Some(routing) => {
            let (result, stats) = run_stage2(&mut graph, data, split, cfg, routing, &eval, &mut records)?;
            records.push(EpochRecord { stage: 2, epoch: result.best_epoch, split: "test", metrics: result.test.entries() });
            (Some(result), Some(stats))
        }
        None => (None, None),
    };
    curve.sort_by_key(|p| p.epoch);
    Ok((TrainOutcome { graph, records, stage1, stage2, augmentation }, curve))
}

fn run_stage2(
    graph: &mut ModelGraph,
    data: &Dataset,
    split: &GcdrSplit,
    cfg: &TrainConfig,
    routing: Routing,
    eval: &Evaluator<'_>,
    records: &mut Vec<EpochRecord>,
) -> Result<(StageResult, AugmentStats)> {
    let train_idx = split.train();
    let table = DonorTable::build(graph, data, &train_idx, cfg.eval_chunk)?;
    let requested = cfg.augment_factor * train_idx.len();
    let aug = make_augmented(&table, &split.train_combinations(), requested, cfg.seed, cfg.tau)?;
    let stats = AugmentStats { requested, kept: aug.len(), seen: aug.seen_count(), unseen: aug.len() - aug.seen_count() };
    let items: Vec<usize> = (0..aug.len()).collect();
    let mut best: Option<Best> = None;
    for epoch in 1..=cfg.stage2_epochs {
        let mut total = 0.0;
        let groups = batches_for(purpose::STAGE2_BATCHES, &items, cfg.batch_size, cfg.seed, epoch as u64, true)?;
        for idx in &groups {
            total += stage2_step(graph, &aug.batch(&table, idx)?, routing, &cfg.adam)?;
        }
        records.push(EpochRecord { stage: 2, epoch, split: "train", metrics: alloc::vec![("loss_recognition", total / groups.len() as f64)] });
        let val = eval.validation(graph, Stack::Stage2)?;
        keep_best(&mut best, val.auc, epoch, &graph.params);
        records.push(EpochRecord { stage: 2, epoch, split: "val", metrics: val.entries() });
    }
    let best = best.expect("at least one epoch");
    graph.params = best.params;
    let (val, test) = eval.validation_and_test(graph, Stack::Stage2)?;
    Ok((StageResult { best_epoch: best.epoch, val, test }, stats))
}
