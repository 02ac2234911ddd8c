//! The `generate`, `validate`, `train`, `ablate` and `curve` commands.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use aal_core::data::{
    build_grouped_split, cmnist_corpus, generate_tabular, parse_idx, validate_gcdr, AttributeSchema,
    CmnistOptions, Dataset, GcdrSplit, GlyphDigits, IdxData, IdxDigits, TabularOptions, ValidationReport,
};
use aal_core::metrics::MetricsReport;
use aal_core::numerics::Tensor;
use aal_core::training::{train_with_curve, CurvePoint, TrainOutcome, Variant};

use crate::checks::{ablation_checks, curve_checks, failures, Check};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::files::{self, CSV_HEADER};

/// Builds the configured corpus and its split in memory.
pub fn build_corpus(cfg: &RunConfig) -> Result<(Dataset, GcdrSplit)> {
    let seed = cfg.seed()?.0;
    let validation_fraction: f64 = cfg.require("validation_fraction")?;
    match cfg.require::<String>("dataset")?.as_str() {
        "cmnist" => {
            let opts = CmnistOptions { bg_a: cfg.require("bg_a")?, bg_b: cfg.require("bg_b")?, validation_fraction, seed };
            let keys = ["idx_train_images", "idx_train_labels", "idx_test_images", "idx_test_labels"];
            let paths: Vec<Option<&str>> = keys.iter().map(|k| cfg.raw(k)).collect();
            if paths.iter().all(Option::is_none) {
                let source = GlyphDigits { seed, n_train: cfg.require("glyph_train")?, n_test: cfg.require("glyph_test")? };
                return Ok(cmnist_corpus(&source, &opts)?);
            }
            let [ti, tl, si, sl] = [0, 1, 2, 3].map(|i| {
                paths[i].map(Path::new).ok_or_else(|| CliError::Config(format!("`{}` is required with the other IDX paths", keys[i])))
            });
            let source = IdxDigits::new(idx_images(ti?)?, idx_labels(tl?)?, idx_images(si?)?, idx_labels(sl?)?)?;
            Ok(cmnist_corpus(&source, &opts)?)
        }
        "tabular" => {
            let shared: usize = cfg.require("tabular_shared")?;
            let mut names = vec!["y", "d"];
            let mut ks = vec![cfg.require("tabular_classes")?, cfg.require("tabular_domains")?];
            let mut sharing = vec![false, false];
            if shared > 0 {
                names.push("s");
                ks.push(shared);
                sharing.push(true);
            }
            let schema = AttributeSchema::new(&names, &ks, &sharing)?;
            let edges = cfg.causal_edges()?;
            if edges.len() > 1 {
                return Err(CliError::Config("the tabular generator plants at most one causal edge".into()));
            }
            let mut opts = TabularOptions::new(seed);
            opts.dim = cfg.require("tabular_dim")?;
            opts.noise = cfg.require("tabular_noise")?;
            opts.causal_edge = edges.first().copied();
            let data = generate_tabular(cfg.require("tabular_n")?, &schema, &opts)?;
            let split = build_grouped_split(&data, 1, validation_fraction, seed)?;
            Ok((data, split))
        }
        other => Err(CliError::Config(format!("unknown dataset `{other}` (cmnist | tabular)"))),
    }
}

fn idx_images(path: &Path) -> Result<Tensor> {
    match parse_idx(&files::read(path)?)? {
        IdxData::Images(t) => Ok(t),
        IdxData::Labels(_) => Err(CliError::Parse { path: path.to_path_buf(), message: "expected an image file".into() }),
    }
}

fn idx_labels(path: &Path) -> Result<Vec<u8>> {
    match parse_idx(&files::read(path)?)? {
        IdxData::Labels(l) => Ok(l),
        IdxData::Images(_) => Err(CliError::Parse { path: path.to_path_buf(), message: "expected a label file".into() }),
    }
}

pub struct GenerateSummary {
    pub samples: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub manifest_sha256: String,
    pub report: ValidationReport,
}

/// Writes the sample file and split manifest, then audits the split.
pub fn generate(cfg: &RunConfig) -> Result<GenerateSummary> {
    let (data, split) = build_corpus(cfg)?;
    let manifest = files::encode_manifest(&split, &data.schema, &cfg.causal_edges()?);
    files::write(&cfg.samples_path(), &files::encode_samples(&data))?;
    files::write(&cfg.split_path(), manifest.as_bytes())?;
    let report = validate_gcdr(&split, &data.schema);
    let summary = GenerateSummary {
        samples: data.len(),
        train: split.train().len(),
        validation: split.validation().len(),
        test: split.held_out().len(),
        manifest_sha256: files::sha256_hex(manifest.as_bytes()),
        report,
    };
    if !summary.report.passed() {
        return Err(CliError::Validation(summary.report.to_string()));
    }
    Ok(summary)
}

/// Loads samples and manifest and checks they belong together and satisfy the split constraints.
pub fn load_inputs(cfg: &RunConfig) -> Result<(Dataset, GcdrSplit, ValidationReport)> {
    let data = files::load_samples(&cfg.samples_path())?;
    let manifest = files::load_manifest(&cfg.split_path())?;
    let mismatches = files::manifest_mismatches(&manifest, &data);
    if !mismatches.is_empty() {
        return Err(CliError::Validation(mismatches.join("\n")));
    }
    let report = validate_gcdr(&manifest.split, &data.schema);
    if !report.passed() {
        return Err(CliError::Validation(report.to_string()));
    }
    Ok((data, manifest.split, report))
}

pub fn validate(cfg: &RunConfig) -> Result<ValidationReport> {
    Ok(load_inputs(cfg)?.2)
}

pub struct TrainRun {
    pub variant: Variant,
    pub outcome: TrainOutcome,
    pub curve: Vec<CurvePoint>,
    pub csv: String,
    pub seconds: f64,
}

/// Trains one variant in memory. Metric rows carry no header.
pub fn run_variant(cfg: &RunConfig, data: &Dataset, split: &GcdrSplit, variant: Variant, marks: &[usize]) -> Result<TrainRun> {
    let tc = cfg.train_config(variant, data.schema.width())?;
    let start = Instant::now();
    let (outcome, curve) = train_with_curve(data, split, &tc, marks)?;
    let csv = files::csv_rows(&cfg.run_id()?, variant, &outcome.records);
    Ok(TrainRun { variant, outcome, curve, csv, seconds: start.elapsed().as_secs_f64() })
}

fn echo_config(cfg: &RunConfig) -> Result<()> {
    files::write(&cfg.run_dir()?.join("config.txt"), cfg.render().as_bytes())
}

/// Trains the configured variant, writing `metrics.csv`, a checkpoint and the resolved config.
pub fn train(cfg: &RunConfig) -> Result<TrainRun> {
    let (data, split, _) = load_inputs(cfg)?;
    let variant: Variant = cfg.require::<String>("variant")?.parse()?;
    let run = run_variant(cfg, &data, &split, variant, &[])?;
    let dir = cfg.run_dir()?;
    echo_config(cfg)?;
    files::write(&dir.join("metrics.csv"), format!("{CSV_HEADER}\n{}", run.csv).as_bytes())?;
    files::save_checkpoint(&dir.join(format!("{variant}.ckpt")), &run.outcome.graph)?;
    Ok(run)
}

pub struct Ablation {
    pub runs: Vec<TrainRun>,
    pub checks: Vec<Check>,
}

impl Ablation {
    pub fn summary(&self) -> String {
        let mut out = String::from("variant,stage,aauc,afar,afrr,combined,acc1,eo_gap\n");
        for run in &self.runs {
            let mut rows: Vec<(u8, &MetricsReport)> = vec![(1, &run.outcome.stage1.test)];
            if let Some(s2) = &run.outcome.stage2 {
                rows.push((2, &s2.test));
            }
            for (stage, r) in rows {
                let eo = r.eo_gap.map(|v| format!("{v:.6}")).unwrap_or_default();
                out.push_str(&format!(
                    "{},{stage},{:.6},{:.6},{:.6},{:.6},{:.6},{eo}\n",
                    run.variant, r.auc, r.far, r.frr, r.combined, r.acc1
                ));
            }
        }
        out
    }
}

/// Trains every listed variant on one split and seed.
pub fn ablate(cfg: &RunConfig) -> Result<Ablation> {
    let (data, split, _) = load_inputs(cfg)?;
    let variants: Vec<Variant> = cfg.list("variants")?;
    if variants.is_empty() {
        return Err(CliError::Config("`variants` is empty".into()));
    }
    let mut runs = Vec::new();
    for v in variants {
        runs.push(run_variant(cfg, &data, &split, v, &[])?);
    }
    let by_variant: BTreeMap<Variant, TrainOutcome> = runs.iter().map(|r| (r.variant, r.outcome.clone())).collect();
    let ablation = Ablation { checks: ablation_checks(&by_variant), runs };
    let dir = cfg.run_dir()?;
    echo_config(cfg)?;
    let mut csv = format!("{CSV_HEADER}\n");
    for r in &ablation.runs {
        csv.push_str(&r.csv);
    }
    files::write(&dir.join("ablation.csv"), csv.as_bytes())?;
    files::write(&dir.join("ablation_summary.csv"), ablation.summary().as_bytes())?;
    Ok(ablation)
}

pub fn curve_csv(run: &TrainRun) -> String {
    let mut out = String::from("epoch,aauc_before,aauc_after,gain\n");
    for p in &run.curve {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        out.push_str(&format!("{},{:.6},{},{}\n", p.epoch, p.before, opt(p.after), opt(p.gain())));
    }
    out
}

/// Branches stage 2 off the configured stage-1 marks.
pub fn curve(cfg: &RunConfig) -> Result<(TrainRun, Vec<Check>)> {
    let (data, split, _) = load_inputs(cfg)?;
    let variant: Variant = cfg.require::<String>("variant")?.parse()?;
    let marks: Vec<usize> = cfg.list("marks")?;
    if marks.is_empty() {
        return Err(CliError::Config("`marks` is empty".into()));
    }
    let run = run_variant(cfg, &data, &split, variant, &marks)?;
    echo_config(cfg)?;
    files::write(&cfg.run_dir()?.join("curve.csv"), curve_csv(&run).as_bytes())?;
    let checks = curve_checks(&run.curve);
    Ok((run, checks))
}

/// Error when checks failed and the config asks for enforcement.
pub fn enforce(cfg: &RunConfig, checks: &[Check]) -> Result<()> {
    let n = failures(checks);
    if n > 0 && cfg.require_checks()? {
        return Err(CliError::Checks(n));
    }
    Ok(())
}

