use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use limitshape::harness::{emit_report, run, ExperimentConfig, Mode, Thresholds};

#[derive(Parser)]
#[command(name = "limitshape", version, about = "Random convex lattice lines with a prescribed limit shape")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tilt table, calibration residuals and moment reports.
    Calibrate(Common),
    /// Limit-shape study under the multiplicative measure.
    Sample(Common),
    /// Limit-shape study under endpoint conditioning.
    Condition(Common),
    /// Per-replicate path distances.
    Verify(Common),
    /// Exact moment sums and the local-CLT study.
    Profile(Common),
    /// Sampler against exhaustive enumeration on capped instances.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides the config).
    #[arg(long)]
    workers: Option<usize>,
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    let (mode, args) = match cli.command {
        Command::Calibrate(a) => (Mode::Calibrate, a),
        Command::Sample(a) => (Mode::Sample, a),
        Command::Condition(a) => (Mode::Condition, a),
        Command::Verify(a) => (Mode::Verify, a),
        Command::Profile(a) => (Mode::Profile, a),
        Command::Oracle(a) => (Mode::Oracle, a),
    };
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.out = o;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    let report = run(&cfg, mode, &Thresholds::pinned()).with_context(|| format!("{} run failed", mode.name()))?;
    let files = emit_report(&report, &cfg.out)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {} files to {}", files.len(), cfg.out.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
