use std::path::PathBuf;
use std::process::ExitCode;

use aal_cli::commands;
use aal_cli::{CliError, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aal", version, about = "Cross-domain recognition by disentangled attribute learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` config file
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set stage1_epochs=5`
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a corpus and split manifest
    Generate(Common),
    /// Re-audit a sample file and split manifest
    Validate(Common),
    /// Train one variant
    Train(Common),
    /// Train a list of variants and compare them
    Ablate(Common),
    /// Measure the stage-2 gain at several stage-1 epochs
    Curve(Common),
    /// List configuration keys
    Keys,
}

fn load(common: &Common) -> aal_cli::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for s in &common.sets {
        cfg.set(s)?;
    }
    cfg.seed()?;
    Ok(cfg)
}

fn print_report(label: &str, r: &aal_core::metrics::MetricsReport) {
    print!("{label}:");
    for (name, v) in r.entries() {
        print!(" {name}={v:.4}");
    }
    println!();
}

fn run(cli: Cli) -> aal_cli::Result<()> {
    match cli.command {
        Command::Keys => {
            for k in aal_cli::config::KEYS {
                println!("{:<20} {:<12} {}", k.key, if k.default.is_empty() { "-" } else { k.default }, k.doc);
            }
        }
        Command::Generate(c) => {
            let cfg = load(&c)?;
            let s = commands::generate(&cfg)?;
            println!("{} samples: {} train, {} validation, {} test", s.samples, s.train, s.validation, s.test);
            println!("manifest sha256 {}", s.manifest_sha256);
            print!("{}", s.report);
        }
        Command::Validate(c) => {
            let cfg = load(&c)?;
            print!("{}", commands::validate(&cfg)?);
        }
        Command::Train(c) => {
            let cfg = load(&c)?;
            let run = commands::train(&cfg)?;
            println!("{} trained in {:.1}s; outputs in {}", run.variant, run.seconds, cfg.run_dir()?.display());
            print_report("stage 1 test", &run.outcome.stage1.test);
            if let Some(s2) = &run.outcome.stage2 {
                print_report("stage 2 test", &s2.test);
            }
        }
        Command::Ablate(c) => {
            let cfg = load(&c)?;
            let a = commands::ablate(&cfg)?;
            print!("{}", a.summary());
            for check in &a.checks {
                println!("{check}");
            }
            commands::enforce(&cfg, &a.checks)?;
        }
        Command::Curve(c) => {
            let cfg = load(&c)?;
            let (run, checks) = commands::curve(&cfg)?;
            print!("{}", commands::curve_csv(&run));
            for check in &checks {
                println!("{check}");
            }
            commands::enforce(&cfg, &checks)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Validation(_) | CliError::Checks(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
