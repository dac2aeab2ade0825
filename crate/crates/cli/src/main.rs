//! Command-line driver: runs the convergence-rate study and the inequality
//! suites from a flat key-value config, writing CSV outputs and a manifest.
//! Exit code 0 when every selected check passes (negative controls count as
//! passing when they fail as documented), 1 on a failed check, 2 on bad
//! input.

use clap::{Args, Parser, Subcommand};
use heatavg::par::ExecMode;
use heatavg::runner::{self, SuiteSelection};
use heatavg::study::RateVerdict;
use heatavg::StudyConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "heatavg",
    version,
    about = "Averaging studies for the stochastically forced heat equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Study configuration file (defaults to the built-in study).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV files and the manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the base seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 or absent: library default). Without the
    /// `parallel` feature this is ignored.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Coupled epsilon sweep with Monte Carlo replication and rate fitting.
    Rate(CommonOpts),
    /// Integral-estimate checks and negative controls.
    Lemmas(CommonOpts),
    /// Besov embedding ratios and the modulus interpolation probe.
    Besov(CommonOpts),
    /// Everything above.
    All(CommonOpts),
}

fn load_config(opts: &CommonOpts) -> Result<StudyConfig, String> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            StudyConfig::parse(&text).map_err(|e| format!("{e}"))?
        }
        None => StudyConfig::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.base_seed = seed;
    }
    cfg.validate().map_err(|e| format!("{e}"))?;
    Ok(cfg)
}

fn execute(
    cfg: &StudyConfig,
    selection: SuiteSelection,
    opts: &CommonOpts,
) -> Result<bool, String> {
    let run = || -> Result<bool, String> {
        let output = runner::run(cfg, selection, &opts.out, ExecMode::Parallel)
            .map_err(|e| format!("{e}"))?;
        if let Some(rate) = &output.rate {
            let medians = rate
                .median_slope
                .map(|m| format!("{m:.4}"))
                .unwrap_or_else(|| "-".into());
            println!(
                "rate: {} (median slope {medians}, bound {:.4}, uniformity {})",
                rate.verdict.label(),
                rate.gamma_bound,
                rate.probe_uniformity_ratio()
                    .map(|r| format!("{r:.2}"))
                    .unwrap_or_else(|| "-".into())
            );
            if rate.verdict == RateVerdict::Fail {
                println!("rate: FAILED");
            }
        }
        if let Some(lemmas) = &output.lemmas {
            for c in lemmas {
                println!(
                    "lemma check {:<34} [{}] {}",
                    c.id,
                    c.case,
                    if c.passes() { "pass" } else { "FAIL" }
                );
            }
        }
        if let Some(besov) = &output.besov {
            for c in &besov.checks {
                println!(
                    "besov check {:<34} value={:.4} bound={:.4} {}",
                    c.id,
                    c.value,
                    c.bound,
                    if c.passes() { "pass" } else { "FAIL" }
                );
            }
        }
        let ok = output.all_pass();
        let lemma_total = output.lemmas.as_ref().map(|l| l.len()).unwrap_or(0);
        let lemma_pass = output
            .lemmas
            .as_ref()
            .map(|l| l.iter().filter(|c| c.passes()).count())
            .unwrap_or(0);
        if lemma_total > 0 {
            println!("lemma suite: {lemma_pass}/{lemma_total} checks pass");
        }
        println!(
            "outputs written to {} -- overall: {}",
            opts.out.display(),
            if ok { "PASS" } else { "FAIL" }
        );
        Ok(ok)
    };

    #[cfg(feature = "parallel")]
    if let Some(jobs) = opts.jobs {
        if jobs > 0 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| format!("thread pool: {e}"))?;
            return pool.install(run);
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = opts.jobs;
    run()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (selection, opts) = match &cli.command {
        Command::Rate(o) => (SuiteSelection::Rate, o),
        Command::Lemmas(o) => (SuiteSelection::Lemmas, o),
        Command::Besov(o) => (SuiteSelection::Besov, o),
        Command::All(o) => (SuiteSelection::All, o),
    };
    let cfg = match load_config(opts) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cfg, selection, opts) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
