//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use aal_core::data::CausalEdge;
use aal_core::model::WeightTable;
use aal_core::training::{TrainConfig, Variant};

use crate::error::{io_err, CliError, Result};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "AAL_OUT_DIR";

pub struct KeyDoc {
    pub key: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

/// Every accepted key. An empty default means "unset".
pub const KEYS: &[KeyDoc] = &[
    KeyDoc { key: "seed", default: "", doc: "master seed (required)" },
    KeyDoc { key: "run_id", default: "run", doc: "label for CSV rows and the run directory" },
    KeyDoc { key: "out_dir", default: "", doc: "output root; falls back to $AAL_OUT_DIR, then ./aal-out" },
    KeyDoc { key: "dataset", default: "cmnist", doc: "cmnist | tabular" },
    KeyDoc { key: "samples", default: "", doc: "sample file; defaults to <out_dir>/samples.bin" },
    KeyDoc { key: "split", default: "", doc: "split manifest; defaults to <out_dir>/split.tsv" },
    KeyDoc { key: "idx_train_images", default: "", doc: "MNIST IDX training images (builtin glyphs when unset)" },
    KeyDoc { key: "idx_train_labels", default: "", doc: "MNIST IDX training labels" },
    KeyDoc { key: "idx_test_images", default: "", doc: "MNIST IDX test images" },
    KeyDoc { key: "idx_test_labels", default: "", doc: "MNIST IDX test labels" },
    KeyDoc { key: "glyph_train", default: "60000", doc: "builtin glyph training pool size" },
    KeyDoc { key: "glyph_test", default: "10000", doc: "builtin glyph test pool size" },
    KeyDoc { key: "bg_a", default: "2", doc: "background color of digits 0-4 in training (1-based)" },
    KeyDoc { key: "bg_b", default: "5", doc: "background color of digits 5-9 in training (1-based)" },
    KeyDoc { key: "validation_fraction", default: "0.1", doc: "share of the test side moved to validation" },
    KeyDoc { key: "tabular_n", default: "3000", doc: "tabular sample count" },
    KeyDoc { key: "tabular_dim", default: "16", doc: "tabular feature dimension" },
    KeyDoc { key: "tabular_classes", default: "6", doc: "tabular class count" },
    KeyDoc { key: "tabular_domains", default: "2", doc: "values of the grouping domain attribute" },
    KeyDoc { key: "tabular_shared", default: "3", doc: "values of a class-sharing domain attribute; 0 drops it" },
    KeyDoc { key: "tabular_noise", default: "0.5", doc: "tabular noise scale" },
    KeyDoc { key: "causal_edges", default: "", doc: "comma-separated cause->effect pairs over 1-based attributes" },
    KeyDoc { key: "variant", default: "full", doc: "variant for train and curve" },
    KeyDoc {
        key: "variants",
        default: "full,stage1-only,single-branch,shared-d,no-adv-stage1,no-adv-at-all,direct",
        doc: "variants for ablate",
    },
    KeyDoc { key: "batch_size", default: "64", doc: "minibatch size" },
    KeyDoc { key: "stage1_epochs", default: "30", doc: "stage-1 epochs" },
    KeyDoc { key: "stage2_epochs", default: "10", doc: "stage-2 epochs" },
    KeyDoc { key: "ratio", default: "5", doc: "adversarial-phase steps per discriminator-phase step" },
    KeyDoc { key: "lr", default: "0.001", doc: "Adam learning rate" },
    KeyDoc { key: "tau", default: "0.9", doc: "donor screening threshold" },
    KeyDoc { key: "augment_factor", default: "4", doc: "recombined items per training sample" },
    KeyDoc { key: "eval_chunk", default: "256", doc: "inference chunk size" },
    KeyDoc { key: "eo_attribute", default: "", doc: "1-based domain attribute for the equality-of-odds gap" },
    KeyDoc { key: "w", default: "", doc: "attribute weights, comma-separated" },
    KeyDoc { key: "w_tilde", default: "", doc: "pair weights, rows separated by ';'" },
    KeyDoc { key: "w_prime", default: "", doc: "recognition weights, comma-separated" },
    KeyDoc { key: "marks", default: "1,10,30", doc: "stage-1 epochs at which curve branches off stage 2" },
    KeyDoc { key: "require_checks", default: "false", doc: "exit nonzero when ablate/curve checks fail" },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed(pub u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunId(String);

impl RunId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for RunId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(CliError::Config(format!("run_id `{s}` must be non-empty [A-Za-z0-9._-]")));
        }
        Ok(Self(s.to_string()))
    }
}

impl fmt::Display for RunId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn doc(key: &str) -> Option<&'static KeyDoc> {
    KEYS.iter().find(|k| k.key == key)
}

/// Explicitly set values; defaults are filled in on read.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Syntax { line: n + 1, message: format!("expected `key = value`, got `{line}`") })?;
            let key = k.trim();
            if cfg.values.contains_key(key) {
                return Err(CliError::Syntax { line: n + 1, message: format!("duplicate key `{key}`") });
            }
            cfg.insert(key, v.trim()).map_err(|e| CliError::Syntax { line: n + 1, message: e.to_string() })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    fn insert(&mut self, key: &str, value: &str) -> Result<()> {
        if doc(key).is_none() {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
        self.insert(k.trim(), v.trim())
    }

    pub fn with(mut self, key: &str, value: &str) -> Result<Self> {
        self.insert(key, value)?;
        Ok(self)
    }

    /// Explicit value or documented default; `None` when unset and without default.
    pub fn raw(&self, key: &str) -> Option<&str> {
        let d = doc(key).unwrap_or_else(|| panic!("undocumented key `{key}`"));
        let v = self.values.get(key).map(String::as_str).unwrap_or(d.default);
        (!v.is_empty()).then_some(v)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Config(format!("`{key} = {v}`: {e}"))))
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?.ok_or_else(|| CliError::Config(format!("`{key}` is required")))
    }

    pub fn seed(&self) -> Result<Seed> {
        Ok(Seed(self.require("seed")?))
    }

    pub fn run_id(&self) -> Result<RunId> {
        self.require("run_id")
    }

    pub fn out_dir(&self) -> PathBuf {
        match self.raw("out_dir") {
            Some(d) => PathBuf::from(d),
            None => std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("aal-out")),
        }
    }

    pub fn samples_path(&self) -> PathBuf {
        self.raw("samples").map(PathBuf::from).unwrap_or_else(|| self.out_dir().join("samples.bin"))
    }

    pub fn split_path(&self) -> PathBuf {
        self.raw("split").map(PathBuf::from).unwrap_or_else(|| self.out_dir().join("split.tsv"))
    }

    pub fn run_dir(&self) -> Result<PathBuf> {
        Ok(self.out_dir().join(self.run_id()?.as_str()))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(Vec::new()) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| CliError::Config(format!("`{key}` item `{s}`: {e}"))))
            .collect()
    }

    pub fn causal_edges(&self) -> Result<Vec<CausalEdge>> {
        let Some(v) = self.raw("causal_edges") else { return Ok(Vec::new()) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                let bad = || CliError::Config(format!("causal edge `{s}` is not cause->effect"));
                let (c, e) = s.split_once("->").ok_or_else(bad)?;
                Ok(CausalEdge::new(c.trim().parse().map_err(|_| bad())?, e.trim().parse().map_err(|_| bad())?))
            })
            .collect()
    }

    fn weights(&self, width: usize) -> Result<Option<WeightTable>> {
        let w: Vec<f32> = self.list("w")?;
        let w_prime: Vec<f32> = self.list("w_prime")?;
        let w_tilde = match self.raw("w_tilde") {
            Some(v) => v
                .split(';')
                .map(|row| {
                    row.split(',')
                        .map(|s| s.trim().parse::<f32>().map_err(|e| CliError::Config(format!("`w_tilde` item `{s}`: {e}"))))
                        .collect::<Result<Vec<f32>>>()
                })
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        if w.is_empty() && w_prime.is_empty() && w_tilde.is_empty() {
            return Ok(None);
        }
        let std = WeightTable::standard(width);
        let table = WeightTable {
            w: if w.is_empty() { std.w } else { w },
            w_tilde: if w_tilde.is_empty() { std.w_tilde } else { w_tilde },
            w_prime: if w_prime.is_empty() { std.w_prime } else { w_prime },
        };
        table.validate(width)?;
        Ok(Some(table))
    }

    /// Training recipe for one variant over a dataset with `width` attributes.
    pub fn train_config(&self, variant: Variant, width: usize) -> Result<TrainConfig> {
        let mut c = TrainConfig::new(self.seed()?.0, variant);
        c.batch_size = self.require("batch_size")?;
        c.stage1_epochs = self.require("stage1_epochs")?;
        c.stage2_epochs = self.require("stage2_epochs")?;
        c.ratio = self.require("ratio")?;
        c.adam.lr = self.require("lr")?;
        c.tau = self.require("tau")?;
        c.augment_factor = self.require("augment_factor")?;
        c.eval_chunk = self.require("eval_chunk")?;
        c.eo_attribute = self.get::<usize>("eo_attribute")?.map(|j| j.saturating_sub(1));
        c.weights = self.weights(width)?;
        c.causal_edges = self.causal_edges()?;
        c.validate()?;
        Ok(c)
    }

    pub fn require_checks(&self) -> Result<bool> {
        self.require("require_checks")
    }

    /// Every key with its effective value, one `key = value` line each.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let v = match k.key {
                "out_dir" => self.out_dir().display().to_string(),
                "samples" => self.samples_path().display().to_string(),
                "split" => self.split_path().display().to_string(),
                key => self.raw(key).unwrap_or("").to_string(),
            };
            out.push_str(&format!("{} = {}\n", k.key, v));
        }
        out
    }
}
