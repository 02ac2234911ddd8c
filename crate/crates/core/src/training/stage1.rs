//! One-versus-rest disentangle learning.

use alloc::format;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelGraph;
use crate::numerics::{optimizer_step, AdamConfig, Gradients, LossSpec, Tape, Tensor, Trainable, Var};

/// A real mini-batch with 0-based labels per attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Tensor,
    pub labels: Vec<Vec<usize>>,
}

impl Batch {
    pub fn from_dataset(data: &Dataset, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            x: data.features(indices)?,
            labels: (0..data.schema.width()).map(|j| data.labels(j, indices)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Stage-1 objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    /// Cross-entropy of each branch's own attribute; trains P, G_j, D_jj.
    Attribute,
    /// Off-diagonal discriminators learn the other attributes; trains D_jj'.
    Discriminate,
    /// Diagonal heads' targets pushed back into P; trains P.
    Reinforce,
    /// Branches pushed toward the complement of the other attributes; trains P and G.
    Eliminate,
}

/// Which branches and terms a stage-1 unit uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage1Plan {
    pub branches: Vec<usize>,
    pub adversarial: bool,
}

impl Stage1Plan {
    pub fn all(width: usize, adversarial: bool) -> Self {
        Self { branches: (0..width).collect(), adversarial }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stage1Losses {
    pub attribute: f64,
    pub discriminate: f64,
    pub reinforce: f64,
    pub eliminate: f64,
}

fn named<T>(r: Result<T>, what: &str) -> Result<T> {
    r.map_err(|e| match e {
        Error::NonFinite(m) => Error::NonFinite(format!("{what}: {m}")),
        other => other,
    })
}

/// Gradients of the requested terms on one batch, each restricted to its own trainable set.
pub fn term_gradients(graph: &ModelGraph, batch: &Batch, branches: &[usize], terms: &[Term]) -> Result<(Gradients, Stage1Losses)> {
    let width = graph.width();
    let eff = graph.prior.effective(&graph.weights);
    let targets: Vec<Tensor> =
        (0..width).map(|j| Tensor::one_hot(&batch.labels[j], graph.schema.k(j))).collect::<Result<_>>()?;
    let complements: Vec<Tensor> = targets
        .iter()
        .map(|t| {
            let data = t.data().iter().map(|v| 1.0 - v).collect();
            Tensor::new(t.shape(), data)
        })
        .collect::<Result<_>>()?;
    let wants = |t: Term| terms.contains(&t);

    let mut tape = Tape::new(&graph.params);
    let x = tape.input(batch.x.clone());
    let fc = graph.tape_p(&mut tape, x)?;
    let (mut att, mut dis, mut rei, mut eli): (Vec<Var>, Vec<Var>, Vec<Var>, Vec<Var>) = Default::default();
    let (mut att_set, mut dis_set, mut eli_set) = (graph.p_ids(), Trainable::new(), graph.p_ids());
    for &j in branches {
        let fj = graph.tape_g(&mut tape, fc, j)?;
        att_set.extend(graph.g_ids(j));
        att_set.extend(graph.d_ids(j, j));
        eli_set.extend(graph.g_ids(j));
        if wants(Term::Attribute) || wants(Term::Reinforce) {
            let djj = graph.tape_d(&mut tape, fj, j, j)?;
            if wants(Term::Attribute) {
                let spec = LossSpec::cross_entropy(targets[j].clone(), graph.weights.w[j])?;
                att.push(named(tape.loss(djj, spec), &format!("attribute loss, branch {}", j + 1))?);
            }
            if wants(Term::Reinforce) && graph.weights.w_tilde[j][j] > 0.0 {
                let spec = LossSpec::mse(targets[j].clone(), graph.weights.w_tilde[j][j])?;
                rei.push(named(tape.loss(djj, spec), &format!("reinforce loss, branch {}", j + 1))?);
            }
        }
        for j2 in (0..width).filter(|&j2| j2 != j) {
            let w = eff.w_tilde[j][j2];
            if w == 0.0 || !(wants(Term::Discriminate) || wants(Term::Eliminate)) {
                continue;
            }
            dis_set.extend(graph.d_ids(j, j2));
            let d = graph.tape_d(&mut tape, fj, j, j2)?;
            let pair = format!("branch {}, attribute {}", j + 1, j2 + 1);
            if wants(Term::Discriminate) {
                dis.push(named(tape.loss(d, LossSpec::mse(targets[j2].clone(), w)?), &format!("discriminate loss, {pair}"))?);
            }
            if wants(Term::Eliminate) {
                let spec = LossSpec::mse(complements[j2].clone(), w)?;
                eli.push(named(tape.loss(d, spec), &format!("eliminate loss, {pair}"))?);
            }
        }
    }
    let p_set = graph.p_ids();
    let mut losses = Stage1Losses::default();
    let mut objectives: Vec<(Var, &Trainable)> = Vec::new();
    for (terms, set, slot) in [
        (&att, &att_set, &mut losses.attribute),
        (&dis, &dis_set, &mut losses.discriminate),
        (&rei, &p_set, &mut losses.reinforce),
        (&eli, &eli_set, &mut losses.eliminate),
    ] {
        if !terms.is_empty() {
            let total = tape.sum(terms)?;
            *slot = tape.scalar(total);
            objectives.push((total, set));
        }
    }
    let grads = tape.backward_many(&objectives)?;
    Ok((grads, losses))
}

/// One scheduling unit: a discriminator-phase step, then `ratio` adversarial-phase steps
/// (none when the plan is not adversarial). Attribute and discriminate losses come from
/// the first step; reinforce and eliminate losses are averaged over the adversarial steps.
pub fn stage1_step(graph: &mut ModelGraph, batch: &Batch, plan: &Stage1Plan, ratio: usize, adam: &AdamConfig) -> Result<Stage1Losses> {
    let first: &[Term] = if plan.adversarial { &[Term::Attribute, Term::Discriminate] } else { &[Term::Attribute] };
    let (grads, mut losses) = term_gradients(graph, batch, &plan.branches, first)?;
    optimizer_step(&mut graph.params, &grads, adam)?;
    if plan.adversarial {
        let (mut rei, mut eli) = (0.0, 0.0);
        for _ in 0..ratio {
            let (grads, l) = term_gradients(graph, batch, &plan.branches, &[Term::Reinforce, Term::Eliminate])?;
            optimizer_step(&mut graph.params, &grads, adam)?;
            rei += l.reinforce;
            eli += l.eliminate;
        }
        losses.reinforce = rei / ratio as f64;
        losses.eliminate = eli / ratio as f64;
    }
    Ok(losses)
}
