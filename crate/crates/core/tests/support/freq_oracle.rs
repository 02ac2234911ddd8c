//! Plug-in estimates from empirical frequencies.

use std::collections::BTreeMap;

/// Mutual information (nats) between two discrete columns.
pub fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut pa: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pb: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pab: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *pa.entry(x).or_default() += 1.0 / n;
        *pb.entry(y).or_default() += 1.0 / n;
        *pab.entry((x, y)).or_default() += 1.0 / n;
    }
    pab.iter().map(|(&(x, y), &p)| p * (p / (pa[&x] * pb[&y])).ln()).sum()
}

/// Largest total-variation distance between P(a | b = v) and P(a) over values v of b.
pub fn max_conditional_tv(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut marginal: BTreeMap<usize, f64> = BTreeMap::new();
    for &x in a {
        *marginal.entry(x).or_default() += 1.0 / n;
    }
    let mut by_b: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        by_b.entry(y).or_default().push(x);
    }
    by_b.values()
        .map(|xs| {
            let m = xs.len() as f64;
            let mut cond: BTreeMap<usize, f64> = BTreeMap::new();
            for &x in xs {
                *cond.entry(x).or_default() += 1.0 / m;
            }
            0.5 * marginal.iter().map(|(x, &p)| (cond.get(x).copied().unwrap_or(0.0) - p).abs()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}
