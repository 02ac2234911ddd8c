//! Feature recombination and additive adversarial learning.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::config::Routing;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelGraph;
use crate::numerics::{optimizer_step, AdamConfig, Gradients, LossSpec, Tape, Tensor, Trainable, Var};
use crate::rng::{self, purpose};

/// Branch features and own-attribute confidences of every training sample.
#[derive(Debug, Clone)]
pub struct DonorTable {
    /// `features[j]`: one row per training sample.
    pub features: Vec<Tensor>,
    /// `attrs[i]`: 1-based attribute tuple of training sample `i`.
    pub attrs: Vec<Vec<usize>>,
    /// `confidence[j][i]`: D_jj's probability of sample `i`'s true value of attribute `j`.
    pub confidence: Vec<Vec<f32>>,
}

impl DonorTable {
    pub fn build(graph: &ModelGraph, data: &Dataset, train: &[usize], chunk: usize) -> Result<Self> {
        let width = graph.width();
        let mut rows: Vec<Vec<f32>> = vec![Vec::new(); width];
        let mut confidence: Vec<Vec<f32>> = vec![Vec::with_capacity(train.len()); width];
        for part in train.chunks(chunk.max(1)) {
            let (f, conf) = graph.donor_outputs(&data.features(part)?)?;
            for j in 0..width {
                rows[j].extend_from_slice(f[j].data());
                for (r, &i) in part.iter().enumerate() {
                    confidence[j].push(conf[j].row(r)[data.attrs(i)[j] - 1]);
                }
            }
        }
        let g_out = graph.arch.g_out;
        let features = rows.into_iter().map(|r| Tensor::new(&[train.len(), g_out], r)).collect::<Result<_>>()?;
        let attrs = train.iter().map(|&i| data.attrs(i).to_vec()).collect();
        Ok(Self { features, attrs, confidence })
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }
}

/// Recombined items: item `n` takes attribute `j`'s feature from donor `donors[n][j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Augmented {
    pub donors: Vec<Vec<usize>>,
    /// 1-based attribute tuples.
    pub attrs: Vec<Vec<usize>>,
    pub seen: Vec<bool>,
    pub screened_out: usize,
}

impl Augmented {
    pub fn len(&self) -> usize {
        self.donors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.donors.is_empty()
    }

    pub fn seen_count(&self) -> usize {
        self.seen.iter().filter(|&&s| s).count()
    }

    /// Gathers a batch of items.
    pub fn batch(&self, table: &DonorTable, items: &[usize]) -> Result<AugmentedBatch> {
        let width = table.features.len();
        let features = (0..width)
            .map(|j| table.features[j].select_rows(&items.iter().map(|&n| self.donors[n][j]).collect::<Vec<_>>()))
            .collect::<Result<_>>()?;
        Ok(AugmentedBatch {
            features,
            labels: (0..width).map(|j| items.iter().map(|&n| self.attrs[n][j] - 1).collect()).collect(),
            seen: items.iter().map(|&n| self.seen[n]).collect(),
        })
    }
}

/// Draws `n_r` items with an independent donor per attribute, drops items
/// where any donor's own-attribute confidence is below `tau`, and flags items
/// whose tuple occurs among `train_combinations`.
pub fn make_augmented(
    table: &DonorTable,
    train_combinations: &BTreeSet<Vec<usize>>,
    n_r: usize,
    seed: u64,
    tau: f32,
) -> Result<Augmented> {
    if table.is_empty() {
        return Err(Error::Empty("no training samples to recombine".into()));
    }
    let width = table.features.len();
    let mut rng = rng::stream(seed, purpose::AUGMENT);
    let mut out = Augmented { donors: Vec::new(), attrs: Vec::new(), seen: Vec::new(), screened_out: 0 };
    for _ in 0..n_r {
        let donors: Vec<usize> = (0..width).map(|_| rng.random_range(0..table.len())).collect();
        if donors.iter().enumerate().any(|(j, &l)| table.confidence[j][l] < tau) {
            out.screened_out += 1;
            continue;
        }
        let attrs: Vec<usize> = donors.iter().enumerate().map(|(j, &l)| table.attrs[l][j]).collect();
        out.seen.push(train_combinations.contains(&attrs));
        out.attrs.push(attrs);
        out.donors.push(donors);
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("all {n_r} recombined items were screened out; lower the threshold {tau}")));
    }
    Ok(out)
}

/// Donor features (constants) with 0-based labels and seen flags.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedBatch {
    pub features: Vec<Tensor>,
    pub labels: Vec<Vec<usize>>,
    pub seen: Vec<bool>,
}

impl AugmentedBatch {
    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    fn subset(&self, rows: &[usize]) -> Result<AugmentedBatch> {
        Ok(AugmentedBatch {
            features: self.features.iter().map(|f| f.select_rows(rows)).collect::<Result<_>>()?,
            labels: self.labels.iter().map(|l| rows.iter().map(|&r| l[r]).collect()).collect(),
            seen: rows.iter().map(|&r| self.seen[r]).collect(),
        })
    }
}

/// Parameters that head `j`'s loss may update.
pub fn routed_set(graph: &ModelGraph, routing: Routing, j: usize, seen: bool) -> Trainable {
    let mut set = graph.r_ids(j);
    match routing {
        Routing::Everything => {
            for b in 0..graph.width() {
                set.extend(graph.t_ids(b));
                set.extend(graph.r_ids(b));
            }
        }
        Routing::Additive if seen => set.extend(graph.t_ids(j)),
        Routing::Additive => {
            for &b in graph.prior.s(j) {
                set.extend(graph.t_ids(b));
            }
        }
    }
    set
}

/// Recognition-loss gradients for the given heads. Seen and unseen items form
/// separate passes, each weighted by its share of the batch.
pub fn stage2_gradients(graph: &ModelGraph, batch: &AugmentedBatch, routing: Routing, heads: &[usize]) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(Error::Empty("empty stage-2 batch".into()));
    }
    let mut grads = Gradients::empty(graph.params.len());
    let mut total = 0.0;
    for seen in [true, false] {
        let rows: Vec<usize> = (0..batch.len()).filter(|&r| batch.seen[r] == seen).collect();
        if rows.is_empty() {
            continue;
        }
        let part = batch.subset(&rows)?;
        let share = rows.len() as f32 / batch.len() as f32;
        let mut tape = Tape::new(&graph.params);
        let mut s = Vec::new();
        for (j, f) in part.features.iter().enumerate() {
            let fi = tape.input(f.clone());
            s.push(graph.tape_t(&mut tape, fi, j)?);
        }
        let u = tape.add_all(&s)?;
        let sets: Vec<Trainable> = heads.iter().map(|&j| routed_set(graph, routing, j, seen)).collect();
        let mut losses: Vec<Var> = Vec::new();
        for &j in heads {
            let r = graph.tape_r(&mut tape, u, j)?;
            let target = Tensor::one_hot(&part.labels[j], graph.schema.k(j))?;
            let spec = LossSpec::cross_entropy(target, graph.weights.w_prime[j] * share)?;
            let kind = if seen { "seen" } else { "unseen" };
            let l = tape.loss(r, spec).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("recognition loss {} ({kind}): {m}", j + 1)),
                other => other,
            })?;
            total += tape.scalar(l);
            losses.push(l);
        }
        let objectives: Vec<(Var, &Trainable)> = losses.iter().copied().zip(sets.iter()).collect();
        grads.merge(tape.backward_many(&objectives)?);
    }
    Ok((grads, total))
}

/// One optimizer step over all recognition heads.
pub fn stage2_step(graph: &mut ModelGraph, batch: &AugmentedBatch, routing: Routing, adam: &AdamConfig) -> Result<f64> {
    let heads: Vec<usize> = (0..graph.width()).collect();
    let (grads, loss) = stage2_gradients(graph, batch, routing, &heads)?;
    optimizer_step(&mut graph.params, &grads, adam)?;
    Ok(loss)
}
