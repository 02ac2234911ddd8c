//! Cross-domain split model and its constraint validator.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use super::schema::AttributeSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Train,
    /// Held-out part of the test set used for model selection.
    Validation,
    Test,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Validation => "val",
            Role::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Role::Train),
            "val" => Some(Role::Validation),
            "test" => Some(Role::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitEntry {
    pub index: usize,
    pub role: Role,
    /// 1-based attribute tuple of the sample.
    pub attrs: Vec<usize>,
}

/// Train / validation / test assignment with the attribute tuples needed to
/// audit it. Validation entries belong to the test side.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GcdrSplit {
    pub entries: Vec<SplitEntry>,
}

impl GcdrSplit {
    pub fn new(entries: Vec<SplitEntry>) -> Self {
        Self { entries }
    }

    fn indices_where(&self, keep: impl Fn(Role) -> bool) -> Vec<usize> {
        self.entries.iter().filter(|e| keep(e.role)).map(|e| e.index).collect()
    }

    /// Ω.
    pub fn train(&self) -> Vec<usize> {
        self.indices_where(|r| r == Role::Train)
    }

    /// Ω̄, including the validation carve-out.
    pub fn test(&self) -> Vec<usize> {
        self.indices_where(|r| r != Role::Train)
    }

    pub fn validation(&self) -> Vec<usize> {
        self.indices_where(|r| r == Role::Validation)
    }

    /// Test indices not used for validation.
    pub fn held_out(&self) -> Vec<usize> {
        self.indices_where(|r| r == Role::Test)
    }

    /// C_Ω.
    pub fn train_combinations(&self) -> BTreeSet<Vec<usize>> {
        self.entries.iter().filter(|e| e.role == Role::Train).map(|e| e.attrs.clone()).collect()
    }

    /// C_Ω̄.
    pub fn test_combinations(&self) -> BTreeSet<Vec<usize>> {
        self.entries.iter().filter(|e| e.role != Role::Train).map(|e| e.attrs.clone()).collect()
    }

    /// G_j^r: classes seen in training under each domain value `r` of attribute `j`.
    pub fn class_groups(&self, j: usize) -> BTreeMap<usize, BTreeSet<usize>> {
        let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.role == Role::Train) {
            groups.entry(e.attrs[j]).or_default().insert(e.attrs[0]);
        }
        groups
    }

    /// Sorted by index; useful for stable serialization.
    pub fn sorted(mut self) -> Self {
        self.entries.sort_by_key(|e| e.index);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    IndexOverlap { index: usize },
    CombinationOverlap { tuple: Vec<usize> },
    ClassGroupOverlap { attribute: String, class: usize, domains: (usize, usize) },
    AttributeRange { index: usize, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexOverlap { index } => write!(f, "index {index} appears more than once"),
            Violation::CombinationOverlap { tuple } => write!(f, "combination {tuple:?} is in both train and test"),
            Violation::ClassGroupOverlap { attribute, class, domains } => write!(
                f,
                "class {class} appears under {attribute} domains {} and {} in train",
                domains.0, domains.1
            ),
            Violation::AttributeRange { index, detail } => write!(f, "sample {index}: {detail}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub violations: Vec<Violation>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.checks.iter().flat_map(|c| c.violations.iter())
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{:<24} {}", c.name, if c.passed() { "PASS" } else { "FAIL" })?;
            for v in &c.violations {
                writeln!(f, "  - {v}")?;
            }
        }
        Ok(())
    }
}

pub const CHECK_ATTRIBUTES: &str = "attribute-range";
pub const CHECK_INDICES: &str = "index-disjointness";
pub const CHECK_COMBINATIONS: &str = "combination-disjointness";
pub const CHECK_CLASS_GROUPS: &str = "class-group-disjointness";

/// Audits a split against the cross-domain constraints. Violations are
/// reported, never raised.
pub fn validate_gcdr(split: &GcdrSplit, schema: &AttributeSchema) -> ValidationReport {
    let mut range = Vec::new();
    for e in &split.entries {
        if let Err(err) = schema.check(&e.attrs) {
            range.push(Violation::AttributeRange { index: e.index, detail: format!("{err}") });
        }
    }

    let mut seen = BTreeSet::new();
    let mut dup = BTreeSet::new();
    for e in &split.entries {
        if !seen.insert(e.index) {
            dup.insert(e.index);
        }
    }
    let indices = dup.into_iter().map(|index| Violation::IndexOverlap { index }).collect();

    let combos = split
        .train_combinations()
        .intersection(&split.test_combinations())
        .cloned()
        .map(|tuple| Violation::CombinationOverlap { tuple })
        .collect();

    let mut groups = Vec::new();
    if range.is_empty() {
        for j in 1..schema.width() {
            if schema.is_class_sharing(j) {
                continue;
            }
            let g = split.class_groups(j);
            let domains: Vec<_> = g.keys().copied().collect();
            for (a, &r) in domains.iter().enumerate() {
                for &r2 in &domains[a + 1..] {
                    for &class in g[&r].intersection(&g[&r2]) {
                        groups.push(Violation::ClassGroupOverlap {
                            attribute: schema.name(j).into(),
                            class,
                            domains: (r, r2),
                        });
                    }
                }
            }
        }
    }

    ValidationReport {
        checks: alloc::vec![
            CheckResult { name: CHECK_ATTRIBUTES, violations: range },
            CheckResult { name: CHECK_INDICES, violations: indices },
            CheckResult { name: CHECK_COMBINATIONS, violations: combos },
            CheckResult { name: CHECK_CLASS_GROUPS, violations: groups },
        ],
    }
}

/// Moves a seeded fraction of the test entries to validation, stratified by
/// the tuple projected onto the class and the non-sharing domain attributes.
pub fn carve_validation<R: Rng>(split: &mut GcdrSplit, schema: &AttributeSchema, fraction: f64, rng: &mut R) {
    let mut strata: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (pos, e) in split.entries.iter().enumerate() {
        if e.role == Role::Train {
            continue;
        }
        let key = (0..schema.width()).filter(|&j| !schema.is_class_sharing(j)).map(|j| e.attrs[j]).collect();
        strata.entry(key).or_default().push(pos);
    }
    for (_, mut members) in strata {
        members.shuffle(rng);
        let take = libm::round(members.len() as f64 * fraction) as usize;
        for &pos in &members[..take] {
            split.entries[pos].role = Role::Validation;
        }
        for &pos in &members[take..] {
            split.entries[pos].role = Role::Test;
        }
    }
}
