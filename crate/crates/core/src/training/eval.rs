use alloc::format;
use alloc::vec::Vec;

use crate::data::{Dataset, GcdrSplit};
use crate::error::{Error, Result};
use crate::metrics::{eo_gap, select_thresholds, MetricsReport, Thresholds};
use crate::model::{ModelGraph, Stack};
use crate::numerics::Tensor;

/// Class scores for `indices`, computed in chunks.
pub fn class_scores(graph: &ModelGraph, stack: Stack, data: &Dataset, indices: &[usize], chunk: usize) -> Result<Tensor> {
    let k = graph.schema.k(0);
    let mut out = Vec::with_capacity(indices.len() * k);
    for part in indices.chunks(chunk.max(1)) {
        out.extend_from_slice(graph.infer(stack, &data.features(part)?)?.data());
    }
    Tensor::new(&[indices.len(), k], out)
}

/// Scores a stack on validation and held-out test data. Thresholds come from
/// validation. The equality-of-odds gap pools the evaluated items with the
/// training items, since within the test side each class meets only the
/// domains it was never trained with.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    data: &'a Dataset,
    val: Vec<usize>,
    test: Vec<usize>,
    train: Vec<usize>,
    eo_attribute: usize,
    chunk: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(data: &'a Dataset, split: &GcdrSplit, eo_attribute: usize, chunk: usize) -> Result<Self> {
        let val = split.validation();
        if val.is_empty() {
            return Err(Error::Empty("validation split is empty".into()));
        }
        if eo_attribute == 0 || eo_attribute >= data.schema.width() {
            return Err(Error::Range(format!("equality-of-odds attribute {eo_attribute} is not a domain attribute")));
        }
        Ok(Self { data, val, test: split.held_out(), train: split.train(), eo_attribute, chunk })
    }

    fn report(&self, graph: &ModelGraph, stack: Stack, items: &[usize], thresholds: &Thresholds, train_pred: &[usize]) -> Result<MetricsReport> {
        let scores = class_scores(graph, stack, self.data, items, self.chunk)?;
        let labels = self.data.labels(0, items);
        let mut report = MetricsReport::compute(&scores, &labels, &thresholds.values)?;
        let mut pred = scores.argmax_rows();
        pred.extend_from_slice(train_pred);
        let pooled: Vec<usize> = items.iter().chain(&self.train).copied().collect();
        let domains: Vec<usize> = pooled.iter().map(|&i| self.data.attrs(i)[self.eo_attribute]).collect();
        report.eo_gap = eo_gap(&pred, &self.data.labels(0, &pooled), &domains).ok().map(|g| g.value);
        Ok(report)
    }

    fn thresholds(&self, graph: &ModelGraph, stack: Stack) -> Result<Thresholds> {
        let scores = class_scores(graph, stack, self.data, &self.val, self.chunk)?;
        select_thresholds(&scores, &self.data.labels(0, &self.val))
    }

    fn train_predictions(&self, graph: &ModelGraph, stack: Stack) -> Result<Vec<usize>> {
        Ok(class_scores(graph, stack, self.data, &self.train, self.chunk)?.argmax_rows())
    }

    pub fn validation(&self, graph: &ModelGraph, stack: Stack) -> Result<MetricsReport> {
        let t = self.thresholds(graph, stack)?;
        self.report(graph, stack, &self.val, &t, &self.train_predictions(graph, stack)?)
    }

    /// Validation and test reports for one parameter state.
    pub fn validation_and_test(&self, graph: &ModelGraph, stack: Stack) -> Result<(MetricsReport, MetricsReport)> {
        let t = self.thresholds(graph, stack)?;
        let train_pred = self.train_predictions(graph, stack)?;
        let test = if self.test.is_empty() { &self.val } else { &self.test };
        Ok((self.report(graph, stack, &self.val, &t, &train_pred)?, self.report(graph, stack, test, &t, &train_pred)?))
    }

    pub fn test_auc(&self, graph: &ModelGraph, stack: Stack) -> Result<f64> {
        Ok(self.validation_and_test(graph, stack)?.1.auc)
    }
}
