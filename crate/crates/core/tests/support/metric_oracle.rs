//! Brute-force metric references and a random-instance generator.

use aal_core::metrics;
use aal_core::numerics::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOLERANCE: f64 = 1e-9;

pub fn pairwise_auc(scores: &[f32], positive: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if positive[i] && !positive[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn column(scores: &Tensor, c: usize) -> Vec<f32> {
    (0..scores.rows()).map(|i| scores.row(i)[c]).collect()
}

fn present(labels: &[usize], k: usize) -> Vec<usize> {
    (0..k).filter(|c| labels.contains(c)).collect()
}

pub fn mean_auc(scores: &Tensor, labels: &[usize]) -> f64 {
    let k = scores.shape()[1];
    let classes = present(labels, k);
    let total: f64 = classes
        .iter()
        .map(|&c| pairwise_auc(&column(scores, c), &labels.iter().map(|&l| l == c).collect::<Vec<_>>()))
        .sum();
    total / classes.len() as f64
}

/// (FAR_c, FRR_c) from a full confusion count.
fn confusion(scores: &Tensor, labels: &[usize], c: usize, t: f32) -> (f64, f64) {
    let (mut tp, mut fn_, mut fp, mut tn) = (0.0, 0.0, 0.0, 0.0);
    for (i, &l) in labels.iter().enumerate() {
        match (l == c, scores.row(i)[c] >= t) {
            (true, true) => tp += 1.0,
            (true, false) => fn_ += 1.0,
            (false, true) => fp += 1.0,
            (false, false) => tn += 1.0,
        }
    }
    (fp / (fp + tn), fn_ / (tp + fn_))
}

pub fn far_frr(scores: &Tensor, labels: &[usize], thresholds: &[f32]) -> (f64, f64) {
    let classes = present(labels, scores.shape()[1]);
    let (mut far, mut frr) = (0.0, 0.0);
    for &c in &classes {
        let (a, r) = confusion(scores, labels, c, thresholds[c]);
        far += a;
        frr += r;
    }
    (far / classes.len() as f64, frr / classes.len() as f64)
}

pub fn thresholds(scores: &Tensor, labels: &[usize]) -> Vec<f32> {
    let k = scores.shape()[1];
    (0..k)
        .map(|c| {
            if !labels.contains(&c) || labels.iter().all(|&l| l == c) {
                return 1.0 / k as f32;
            }
            let mut best = (f64::INFINITY, f32::INFINITY);
            for t in column(scores, c) {
                let (a, r) = confusion(scores, labels, c, t);
                let cand = (a + r, t);
                if cand.0 < best.0 || (cand.0 == best.0 && t < best.1) {
                    best = cand;
                }
            }
            best.1
        })
        .collect()
}

pub fn accuracy(scores: &Tensor, labels: &[usize]) -> f64 {
    let mut hits = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        let row = scores.row(i);
        let mut arg = 0;
        for c in 1..row.len() {
            if row[c] > row[arg] {
                arg = c;
            }
        }
        if arg == l {
            hits += 1.0;
        }
    }
    hits / labels.len() as f64
}

pub fn eo_gap(pred: &[usize], labels: &[usize], domains: &[usize], k: usize, n_domains: usize) -> f64 {
    // counts[y][z][p]
    let mut counts = vec![vec![vec![0.0f64; k]; n_domains]; k];
    for i in 0..pred.len() {
        counts[labels[i]][domains[i]][pred[i]] += 1.0;
    }
    let (mut total, mut pairs) = (0.0, 0.0);
    for by_domain in &counts {
        for z in 0..n_domains {
            for z2 in z + 1..n_domains {
                let (na, nb): (f64, f64) = (by_domain[z].iter().sum(), by_domain[z2].iter().sum());
                if na == 0.0 || nb == 0.0 {
                    continue;
                }
                total += 0.5 * (0..k).map(|p| (by_domain[z][p] / na - by_domain[z2][p] / nb).abs()).sum::<f64>();
                pairs += 1.0;
            }
        }
    }
    total / pairs
}

pub struct Instance {
    pub scores: Tensor,
    pub labels: Vec<usize>,
    pub domains: Vec<usize>,
    pub k: usize,
    pub n_domains: usize,
}

/// Random case with n ≤ 50, at least two classes and coarse scores so ties occur.
pub fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(2..=50);
        let k = rng.random_range(2..=5);
        let coarse = rng.random_bool(0.5);
        let data: Vec<f32> = (0..n * k)
            .map(|_| if coarse { rng.random_range(0..=10) as f32 / 10.0 } else { rng.random() })
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let n_domains = rng.random_range(2..=3);
        let domains: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_domains)).collect();
        if labels.iter().any(|&l| l != labels[0]) && domains.iter().any(|&d| d != domains[0]) {
            return Instance { scores: Tensor::new(&[n, k], data).unwrap(), labels, domains, k, n_domains };
        }
    }
}

/// Largest deviation between library metrics and oracles over `cases` random instances.
pub fn worst_deviation(cases: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for seed in 0..cases {
        let c = instance(seed);
        let err = |e: aal_core::Error| format!("case {seed}: {e}");
        let auc = metrics::a_auc(&c.scores, &c.labels).map_err(err)?.value;
        worst = worst.max((auc - mean_auc(&c.scores, &c.labels)).abs());

        let t = metrics::select_thresholds(&c.scores, &c.labels).map_err(err)?;
        let t_ref = thresholds(&c.scores, &c.labels);
        if t.values != t_ref {
            return Err(format!("case {seed}: thresholds {:?} vs {:?}", t.values, t_ref));
        }
        let r = metrics::far_frr(&c.scores, &c.labels, &t.values).map_err(err)?;
        let (far, frr) = far_frr(&c.scores, &c.labels, &t.values);
        worst = worst.max((r.far - far).abs()).max((r.frr - frr).abs());

        let acc = metrics::acc_at_1(&c.scores, &c.labels).map_err(err)?;
        worst = worst.max((acc - accuracy(&c.scores, &c.labels)).abs());

        let pred = c.scores.argmax_rows();
        if let Ok(eo) = metrics::eo_gap(&pred, &c.labels, &c.domains) {
            worst = worst.max((eo.value - eo_gap(&pred, &c.labels, &c.domains, c.k, c.n_domains)).abs());
        }
    }
    Ok(worst)
}
