//! Suite orchestration: runs the selected studies, writes their CSV outputs
//! and the study manifest, and aggregates pass/fail.

use crate::checks::{self, BesovSuite, CheckOutcome};
use crate::config::StudyConfig;
use crate::error::Result;
use crate::par::ExecMode;
use crate::study::{self, RateReport};
use std::io::{BufWriter, Write};
use std::path::Path;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteSelection {
    Rate,
    Lemmas,
    Besov,
    All,
}

impl SuiteSelection {
    pub fn runs_rate(self) -> bool {
        matches!(self, SuiteSelection::Rate | SuiteSelection::All)
    }
    pub fn runs_lemmas(self) -> bool {
        matches!(self, SuiteSelection::Lemmas | SuiteSelection::All)
    }
    pub fn runs_besov(self) -> bool {
        matches!(self, SuiteSelection::Besov | SuiteSelection::All)
    }
}

pub struct RunOutput {
    pub rate: Option<RateReport>,
    pub lemmas: Option<Vec<CheckOutcome>>,
    pub besov: Option<BesovSuite>,
}

impl RunOutput {
    pub fn all_pass(&self) -> bool {
        let rate_ok = self.rate.as_ref().map(|r| r.passes()).unwrap_or(true);
        let lemma_ok = self
            .lemmas
            .as_ref()
            .map(|l| checks::all_pass(l))
            .unwrap_or(true);
        let besov_ok = self
            .besov
            .as_ref()
            .map(|b| checks::all_pass(&b.checks))
            .unwrap_or(true);
        rate_ok && lemma_ok && besov_ok
    }
}

/// Runs the selected suites and writes `rate_report.csv`, `lemma_suite.csv`,
/// `besov_ratios.csv`, and `study_manifest` under `out_dir`. Outputs are
/// byte-deterministic functions of the configuration.
pub fn run(
    cfg: &StudyConfig,
    selection: SuiteSelection,
    out_dir: &Path,
    exec: ExecMode,
) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;

    let rate = if selection.runs_rate() {
        let report = study::run_convergence_study(cfg, exec)?;
        study::write_rate_csv(&report, &out_dir.join("rate_report.csv"))?;
        study::emit_plot_data(&report, &out_dir.join("rate_plot.csv"))?;
        Some(report)
    } else {
        None
    };

    let lemmas = if selection.runs_lemmas() {
        let outcomes = checks::run_lemma_suite(cfg, exec)?;
        checks::write_lemma_csv(&outcomes, &out_dir.join("lemma_suite.csv"))?;
        Some(outcomes)
    } else {
        None
    };

    let besov = if selection.runs_besov() {
        let suite = checks::run_besov_suite(cfg)?;
        checks::write_besov_csv(&suite, &out_dir.join("besov_ratios.csv"))?;
        Some(suite)
    } else {
        None
    };

    let output = RunOutput {
        rate,
        lemmas,
        besov,
    };
    write_manifest(cfg, &output, &out_dir.join("study_manifest"))?;
    Ok(output)
}

/// Config echo, library version, per-replication realization checksums, and
/// suite verdicts. Carries no timestamps so repeated runs are byte-identical.
fn write_manifest(cfg: &StudyConfig, output: &RunOutput, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    writeln!(w, "heatavg study manifest")?;
    writeln!(w, "version {VERSION}")?;
    writeln!(w, "[config]")?;
    writeln!(w, "{}", cfg.echo())?;
    if let Some(rate) = &output.rate {
        writeln!(w, "[realizations]")?;
        for r in &rate.replications {
            writeln!(
                w,
                "replication {} seed {} checksum {:016x}{}",
                r.index,
                r.seed,
                r.checksum,
                if r.flagged.is_some() { " flagged" } else { "" }
            )?;
        }
    }
    writeln!(w, "[verdicts]")?;
    if let Some(rate) = &output.rate {
        writeln!(w, "rate {}", rate.verdict.label())?;
    }
    if let Some(lemmas) = &output.lemmas {
        writeln!(
            w,
            "lemmas {} ({} checks)",
            if checks::all_pass(lemmas) {
                "pass"
            } else {
                "fail"
            },
            lemmas.len()
        )?;
    }
    if let Some(besov) = &output.besov {
        writeln!(
            w,
            "besov {}",
            if checks::all_pass(&besov.checks) {
                "pass"
            } else {
                "fail"
            }
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::SigmaFamily;

    fn tiny_config() -> StudyConfig {
        StudyConfig {
            sigma_family: SigmaFamily::ShiftedCos,
            domain_j_min: -2,
            domain_j_max: 2,
            grid_radius: 1,
            grid_depth: 5,
            horizon: 0.5,
            time_steps: 8,
            epsilons: vec![0.25, 0.0625, 0.015625],
            replications: 2,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn rate_only_run_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(
            &tiny_config(),
            SuiteSelection::Rate,
            dir.path(),
            ExecMode::Sequential,
        )
        .unwrap();
        assert!(out.rate.is_some());
        assert!(out.lemmas.is_none());
        assert!(dir.path().join("rate_report.csv").exists());
        assert!(dir.path().join("rate_plot.csv").exists());
        assert!(dir.path().join("study_manifest").exists());
        assert!(!dir.path().join("lemma_suite.csv").exists());
    }

    #[test]
    fn repeated_runs_are_byte_identical() {
        let cfg = tiny_config();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run(&cfg, SuiteSelection::Rate, d1.path(), ExecMode::Parallel).unwrap();
        run(&cfg, SuiteSelection::Rate, d2.path(), ExecMode::Parallel).unwrap();
        for name in ["rate_report.csv", "rate_plot.csv", "study_manifest"] {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
    }
}
