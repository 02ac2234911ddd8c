//! Comparative checks over finished runs.

use std::collections::BTreeMap;
use std::fmt;

use aal_core::training::{CurvePoint, TrainOutcome, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn failures(checks: &[Check]) -> usize {
    checks.iter().filter(|c| !c.passed).count()
}

fn pts(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Accuracy gap, absolute aAUC levels and the equality-of-odds ratio between the full method and direct training.
pub fn headline_checks(full: &TrainOutcome, direct: &TrainOutcome) -> Vec<Check> {
    let (f, d) = (&full.final_stage().test, &direct.final_stage().test);
    let gap = f.acc1 - d.acc1;
    let mut out = vec![
        Check::new(
            "accuracy-gap",
            gap >= 0.30 && f.acc1 >= 0.65,
            format!("full ACC@1 {} vs direct {} (gap {} pts; need >= 30 and full >= 65)", pts(f.acc1), pts(d.acc1), pts(gap)),
        ),
        Check::new(
            "auc-levels",
            f.auc >= 0.93 && d.auc <= 0.87,
            format!("full aAUC {} (need >= 93), direct aAUC {} (need <= 87)", pts(f.auc), pts(d.auc)),
        ),
    ];
    let eo = match (f.eo_gap, d.eo_gap) {
        (Some(a), Some(b)) => Check::new("eo-gap", a <= 0.8 * b, format!("full {a:.4} vs direct {b:.4} (need full <= 0.8 x direct)")),
        _ => Check::new("eo-gap", false, "equality-of-odds gap undefined".into()),
    };
    out.push(eo);
    out
}

/// Ordering of aAUC across variants. Stage 1 refers to the full method's stage-1 checkpoint.
pub fn ablation_checks(runs: &BTreeMap<Variant, TrainOutcome>) -> Vec<Check> {
    let need = [Variant::Full, Variant::NoAdvStage1, Variant::SharedD, Variant::SingleBranch, Variant::Direct];
    if let Some(v) = need.iter().find(|v| !runs.contains_key(v)) {
        return vec![Check::new("ablation-ordering", false, format!("variant `{v}` was not run"))];
    }
    let auc = |v: Variant| runs[&v].final_stage().test.auc;
    let s12 = auc(Variant::Full);
    let s1 = runs[&Variant::Full].stage1.test.auc;
    let (noadv, shared, single, direct) =
        (auc(Variant::NoAdvStage1), auc(Variant::SharedD), auc(Variant::SingleBranch), auc(Variant::Direct));
    vec![
        Check::new("stage2-gain", s12 >= s1 + 0.03, format!("stage 1+2 {} vs stage 1 {} (need +3)", pts(s12), pts(s1))),
        Check::new(
            "stage1-ordering",
            s1 > noadv && noadv >= shared,
            format!("stage 1 {} > no-adv-stage1 {} >= shared-d {}", pts(s1), pts(noadv), pts(shared)),
        ),
        Check::new(
            "single-branch-vs-direct",
            (single - direct).abs() <= 0.05 && single <= s1 - 0.10 && direct <= s1 - 0.10,
            format!("single-branch {} and direct {} within 5 pts, both <= stage 1 {} - 10", pts(single), pts(direct), pts(s1)),
        ),
    ]
}

/// Stage-2 gain at the earliest and latest marks.
pub fn curve_checks(curve: &[CurvePoint]) -> Vec<Check> {
    let (Some(first), Some(last)) = (curve.first(), curve.last()) else {
        return vec![Check::new("curve", false, "empty curve".into())];
    };
    let after = |p: &CurvePoint| p.after.map(pts).unwrap_or_else(|| "none (everything screened out)".into());
    vec![
        Check::new(
            "curve-early-gain",
            first.gain().is_some_and(|g| g >= 0.10),
            format!("epoch {}: {} -> {} (need +10)", first.epoch, pts(first.before), after(first)),
        ),
        Check::new(
            "curve-late-gain",
            last.gain().is_some_and(|g| g >= -0.01),
            format!("epoch {}: {} -> {} (need >= -1)", last.epoch, pts(last.before), after(last)),
        ),
    ]
}
