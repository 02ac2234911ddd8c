//! Macro-averaged ROC-AUC, FAR/FRR, top-1 accuracy and an equality-of-odds gap.
//! Class ids are 0-based.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

fn check_scores(scores: &Tensor, labels: &[usize]) -> Result<usize> {
    if scores.rank() != 2 || scores.rows() != labels.len() {
        return Err(Error::Dimension(format!("{:?} scores for {} labels", scores.shape(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::Empty("no samples to score".into()));
    }
    let k = scores.shape()[1];
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Range(format!("label {bad} outside {k} classes")));
    }
    Ok(k)
}

/// P(score⁺ > score⁻) + ½·P(tie), from mid-ranks.
pub fn roc_auc(scores: &[f32], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Dimension(format!("{} scores for {} labels", scores.len(), positive.len())));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("ROC-AUC needs both positives and negatives".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&o| positive[o]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// A macro average together with the classes left out of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Averaged {
    pub value: f64,
    pub skipped: Vec<usize>,
}

fn present_classes(labels: &[usize], k: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let seen: BTreeSet<usize> = labels.iter().copied().collect();
    if seen.len() < 2 {
        return Err(Error::UndefinedMetric(format!("{} class(es) present, need at least 2", seen.len())));
    }
    let skipped = (0..k).filter(|c| !seen.contains(c)).collect();
    Ok((seen.into_iter().collect(), skipped))
}

/// Unweighted mean of one-vs-rest ROC-AUC over classes present in `labels`.
pub fn a_auc(scores: &Tensor, labels: &[usize]) -> Result<Averaged> {
    let k = check_scores(scores, labels)?;
    let (present, skipped) = present_classes(labels, k)?;
    let mut total = 0.0;
    for &c in &present {
        let col: Vec<f32> = (0..labels.len()).map(|i| scores.row(i)[c]).collect();
        let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        total += roc_auc(&col, &pos)?;
    }
    Ok(Averaged { value: total / present.len() as f64, skipped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarFrr {
    pub far: f64,
    pub frr: f64,
    pub skipped: Vec<usize>,
}

fn class_rates(scores: &Tensor, labels: &[usize], c: usize, threshold: f32) -> (f64, f64) {
    let (mut acc_neg, mut neg, mut rej_pos, mut pos) = (0usize, 0usize, 0usize, 0usize);
    for (i, &l) in labels.iter().enumerate() {
        let accept = scores.row(i)[c] >= threshold;
        if l == c {
            pos += 1;
            rej_pos += usize::from(!accept);
        } else {
            neg += 1;
            acc_neg += usize::from(accept);
        }
    }
    (acc_neg as f64 / neg as f64, rej_pos as f64 / pos as f64)
}

/// Per class, accept iff score ≥ threshold; FAR and FRR are macro-averaged over present classes.
pub fn far_frr(scores: &Tensor, labels: &[usize], thresholds: &[f32]) -> Result<FarFrr> {
    let k = check_scores(scores, labels)?;
    if thresholds.len() != k {
        return Err(Error::Dimension(format!("{} thresholds for {k} classes", thresholds.len())));
    }
    let (present, skipped) = present_classes(labels, k)?;
    let (mut far, mut frr) = (0.0, 0.0);
    for &c in &present {
        let (a, r) = class_rates(scores, labels, c, thresholds[c]);
        far += a;
        frr += r;
    }
    let n = present.len() as f64;
    Ok(FarFrr { far: far / n, frr: frr / n, skipped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub values: Vec<f32>,
    /// Classes absent from the selection data, given threshold 1/k.
    pub fallback: Vec<usize>,
}

/// Per class, the observed score minimizing FAR + FRR; ties go to the lowest score.
pub fn select_thresholds(scores: &Tensor, labels: &[usize]) -> Result<Thresholds> {
    let k = check_scores(scores, labels)?;
    let mut values = vec![1.0 / k as f32; k];
    let mut fallback = Vec::new();
    let n = labels.len();
    for (c, value) in values.iter_mut().enumerate() {
        let pos = labels.iter().filter(|&&l| l == c).count();
        let neg = n - pos;
        if pos == 0 || neg == 0 {
            fallback.push(c);
            continue;
        }
        let mut items: Vec<(f32, bool)> = (0..n).map(|i| (scores.row(i)[c], labels[i] == c)).collect();
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Sweep ascending: at candidate t, everything strictly below t is rejected.
        let (mut pos_below, mut neg_below) = (0usize, 0usize);
        let mut best = f64::INFINITY;
        let mut i = 0;
        while i < n {
            let t = items[i].0;
            let far = (neg - neg_below) as f64 / neg as f64;
            let frr = pos_below as f64 / pos as f64;
            if far + frr < best {
                best = far + frr;
                *value = t;
            }
            while i < n && items[i].0 == t {
                if items[i].1 {
                    pos_below += 1;
                } else {
                    neg_below += 1;
                }
                i += 1;
            }
        }
    }
    Ok(Thresholds { values, fallback })
}

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
pub fn acc_at_1(scores: &Tensor, labels: &[usize]) -> Result<f64> {
    check_scores(scores, labels)?;
    let hits = scores.argmax_rows().iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EoGap {
    pub value: f64,
    /// (label, domain) cells without samples.
    pub skipped: Vec<(usize, usize)>,
}

/// Mean over labels and unordered domain pairs of the total-variation distance
/// between the prediction histograms of the two (label, domain) cells.
pub fn eo_gap(predictions: &[usize], labels: &[usize], domains: &[usize]) -> Result<EoGap> {
    if predictions.len() != labels.len() || labels.len() != domains.len() {
        return Err(Error::Dimension("predictions, labels and domains differ in length".into()));
    }
    let all_domains: BTreeSet<usize> = domains.iter().copied().collect();
    if all_domains.len() < 2 {
        return Err(Error::UndefinedMetric(format!("{} domain(s) present, need at least 2", all_domains.len())));
    }
    let mut cells: BTreeMap<(usize, usize), BTreeMap<usize, usize>> = BTreeMap::new();
    for i in 0..labels.len() {
        *cells.entry((labels[i], domains[i])).or_default().entry(predictions[i]).or_default() += 1;
    }
    let all_labels: BTreeSet<usize> = labels.iter().copied().collect();
    let mut skipped = Vec::new();
    let (mut total, mut pairs) = (0.0, 0usize);
    for &y in &all_labels {
        let supported: Vec<usize> = all_domains.iter().copied().filter(|&z| cells.contains_key(&(y, z))).collect();
        skipped.extend(all_domains.iter().filter(|z| !supported.contains(z)).map(|&z| (y, z)));
        for (a, &z) in supported.iter().enumerate() {
            for &z2 in &supported[a + 1..] {
                total += tv(&cells[&(y, z)], &cells[&(y, z2)]);
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::UndefinedMetric("no label is observed under two domains".into()));
    }
    Ok(EoGap { value: total / pairs as f64, skipped })
}

fn tv(a: &BTreeMap<usize, usize>, b: &BTreeMap<usize, usize>) -> f64 {
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    let keys: BTreeSet<usize> = a.keys().chain(b.keys()).copied().collect();
    0.5 * keys
        .iter()
        .map(|k| {
            let pa = a.get(k).copied().unwrap_or(0) as f64 / na as f64;
            let pb = b.get(k).copied().unwrap_or(0) as f64 / nb as f64;
            (pa - pb).abs()
        })
        .sum::<f64>()
}

/// Evaluation summary for one stack on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub auc: f64,
    pub far: f64,
    pub frr: f64,
    pub combined: f64,
    pub acc1: f64,
    pub eo_gap: Option<f64>,
}

impl MetricsReport {
    pub fn compute(scores: &Tensor, labels: &[usize], thresholds: &[f32]) -> Result<Self> {
        let auc = a_auc(scores, labels)?.value;
        let rates = far_frr(scores, labels, thresholds)?;
        Ok(Self {
            auc,
            far: rates.far,
            frr: rates.frr,
            combined: (rates.far + rates.frr) / 2.0,
            acc1: acc_at_1(scores, labels)?,
            eo_gap: None,
        })
    }

    /// Metric names and values in reporting order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("aauc", self.auc),
            ("afar", self.far),
            ("afrr", self.frr),
            ("combined", self.combined),
            ("acc1", self.acc1),
        ];
        if let Some(eo) = self.eo_gap {
            out.push(("eo_gap", eo));
        }
        out
    }
}
