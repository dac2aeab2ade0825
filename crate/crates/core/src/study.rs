//! End-to-end convergence studies: coupled solves over an epsilon sweep,
//! Monte Carlo replication with independent seed streams, and log-log rate
//! fitting against the theoretical exponent.

use crate::config::StudyConfig;
use crate::error::{Error, Result};
use crate::grid::SolveMode;
use crate::par::{self, ExecMode};
use crate::sm::realize;
use crate::solver::Solver;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Convergence-rate exponent bound as a function of the spatial Hoelder
/// exponent of the noise coefficient; increasing, with limits 0 and 1/4.
pub fn rate_exponent(beta: f64) -> f64 {
    0.5 * (1.0 - 1.0 / (2.0 * beta))
}

/// Margin (in space units) stripped from each side of the grid when taking
/// sup errors, so the truncation boundary does not enter rate measurements.
pub const SUP_ERROR_MARGIN: f64 = 2.0;

/// Verdict tolerance on the fitted slope: the theorem lower-bounds the decay
/// order, so only `median slope >= bound - 0.05` is required.
pub const SLOPE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitOutcome {
    Slope(f64),
    Degenerate,
}

/// Least-squares slope of `log(error)` against `log(eps)`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> FitOutcome {
    match fit_line(pairs) {
        Some((slope, _)) => FitOutcome::Slope(slope),
        None => FitOutcome::Degenerate,
    }
}

/// Slope and intercept of the log-log least-squares line, or None when the
/// data is unusable (fewer than 3 pairs, or a nonpositive error).
pub fn fit_line(pairs: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pairs.len() < 3 {
        return None;
    }
    if pairs.iter().any(|&(e, v)| e <= 0.0 || v <= 0.0) {
        return None;
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - xm) * (y - ym);
        den += (x - xm) * (x - xm);
    }
    Some((num / den, ym - num / den * xm))
}

#[derive(Debug, Clone)]
pub struct ReplicationResult {
    pub index: usize,
    pub seed: u64,
    pub checksum: u64,
    /// (eps, sup error over the margin-stripped band), one per epsilon.
    pub errors: Vec<(f64, f64)>,
    pub slope: Option<f64>,
    /// max over eps of `eps^{-0.9 gamma} * error`: this replication's probe
    /// of the rescaled-error sup. Comparable across replications when the
    /// path constant of the bound is stable.
    pub probe_max: f64,
    /// max/min over eps of the same rescaled errors within the replication
    /// (reported for transparency; large values mean the error decays
    /// faster than the rescaling exponent).
    pub probe_ratio: f64,
    pub flagged: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateVerdict {
    Pass,
    Fail,
    DegenerateExactAveraging,
}

impl RateVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            RateVerdict::Pass => "pass",
            RateVerdict::Fail => "fail",
            RateVerdict::DegenerateExactAveraging => "degenerate: exact averaging",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub replications: Vec<ReplicationResult>,
    pub median_slope: Option<f64>,
    pub gamma_bound: f64,
    pub verdict: RateVerdict,
}

impl RateReport {
    pub fn passes(&self) -> bool {
        matches!(
            self.verdict,
            RateVerdict::Pass | RateVerdict::DegenerateExactAveraging
        )
    }

    /// Spread of the per-replication rescaled-error suprema across
    /// replications: max / min of `probe_max` over unflagged replications.
    /// Near one means the path constant of the rate bound is stable.
    pub fn probe_uniformity_ratio(&self) -> Option<f64> {
        let maxima: Vec<f64> = self
            .replications
            .iter()
            .filter(|r| r.flagged.is_none())
            .map(|r| r.probe_max)
            .collect();
        if maxima.is_empty() {
            return None;
        }
        let mx = maxima.iter().fold(0.0f64, |a, &b| a.max(b));
        let mn = maxima.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if mn > 0.0 {
            Some(mx / mn)
        } else {
            None
        }
    }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

/// Runs the coupled epsilon sweep over all replications. Every epsilon and
/// the averaged equation are solved on the same realization per replication;
/// replications use seeds `base_seed + index` and run concurrently.
pub fn run_convergence_study(cfg: &StudyConfig, exec: ExecMode) -> Result<RateReport> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let domain = cfg.domain()?;
    let coeffs = cfg.coefficients()?;
    let kind = cfg.sm_kind()?;
    let solver = Solver::new(grid, domain, coeffs, cfg.solve_settings(), exec)?;
    let mut tables = Vec::with_capacity(cfg.epsilons.len());
    for &eps in &cfg.epsilons {
        tables.push(solver.prepare(eps)?);
    }
    let gamma = rate_exponent(cfg.sigma_beta);
    let probe_exp = 0.9 * gamma;
    let degenerate_floor = 2.0 * cfg.picard_tol;

    let results: Vec<ReplicationResult> = par::map_range(exec, cfg.replications, |m| {
        let seed = cfg.base_seed + m as u64;
        let run = || -> Result<(u64, Vec<(f64, f64)>)> {
            let sm = realize(kind, domain, seed)?;
            let checksum = sm.checksum();
            let averaged = solver.solve(&sm, SolveMode::Averaged, None)?;
            let mut errors = Vec::with_capacity(cfg.epsilons.len());
            for (eps, tbl) in cfg.epsilons.iter().zip(&tables) {
                let forced = solver.solve(&sm, SolveMode::Epsilon(*eps), Some(tbl))?;
                let err = forced.sup_distance_within(&averaged, SUP_ERROR_MARGIN)?;
                errors.push((*eps, err));
            }
            Ok((checksum, errors))
        };
        match run() {
            Ok((checksum, errors)) => {
                let probe: Vec<f64> = errors
                    .iter()
                    .map(|&(e, v)| v * e.powf(-probe_exp))
                    .collect();
                let pmax = probe.iter().fold(0.0f64, |a, &b| a.max(b));
                let pmin = probe.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                let probe_ratio = if pmin > 0.0 {
                    pmax / pmin
                } else {
                    f64::INFINITY
                };
                ReplicationResult {
                    index: m,
                    seed,
                    checksum,
                    errors,
                    slope: None,
                    probe_max: pmax,
                    probe_ratio,
                    flagged: None,
                }
            }
            Err(e) => ReplicationResult {
                index: m,
                seed,
                checksum: 0,
                errors: Vec::new(),
                slope: None,
                probe_max: f64::INFINITY,
                probe_ratio: f64::INFINITY,
                flagged: Some(format!("{e}")),
            },
        }
    });

    let flagged = results.iter().filter(|r| r.flagged.is_some()).count();
    if flagged * 10 > cfg.replications {
        return Err(Error::Study(format!(
            "{flagged} of {} replications failed to solve",
            cfg.replications
        )));
    }

    let ok: Vec<&ReplicationResult> = results.iter().filter(|r| r.flagged.is_none()).collect();
    let max_err = ok
        .iter()
        .flat_map(|r| r.errors.iter().map(|&(_, v)| v))
        .fold(0.0f64, f64::max);
    if max_err <= degenerate_floor {
        return Ok(RateReport {
            replications: results,
            median_slope: None,
            gamma_bound: gamma,
            verdict: RateVerdict::DegenerateExactAveraging,
        });
    }

    let mut results = results;
    for r in results.iter_mut().filter(|r| r.flagged.is_none()) {
        r.slope = match fit_rate(&r.errors) {
            FitOutcome::Slope(s) => Some(s),
            FitOutcome::Degenerate => None,
        };
    }
    let slopes: Vec<f64> = results.iter().filter_map(|r| r.slope).collect();
    let median_slope = median(slopes);
    let verdict = match median_slope {
        Some(s) if s >= gamma - SLOPE_TOLERANCE => RateVerdict::Pass,
        _ => RateVerdict::Fail,
    };
    Ok(RateReport {
        replications: results,
        median_slope,
        gamma_bound: gamma,
        verdict,
    })
}

/// Writes the rate report: per-(replication, eps) error rows, per-replication
/// slope and probe rows, and summary rows. Layout documented in the README.
pub fn write_rate_csv(report: &RateReport, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    writeln!(w, "kind,replication,seed,eps,value")?;
    for r in &report.replications {
        if let Some(reason) = &r.flagged {
            writeln!(w, "flagged,{},{},,{}", r.index, r.seed, reason)?;
            continue;
        }
        for (eps, err) in &r.errors {
            writeln!(w, "error,{},{},{eps:.16e},{err:.16e}", r.index, r.seed)?;
        }
        if let Some(s) = r.slope {
            writeln!(w, "slope,{},{},,{s:.16e}", r.index, r.seed)?;
        }
        writeln!(w, "probe_max,{},{},,{:.16e}", r.index, r.seed, r.probe_max)?;
        writeln!(
            w,
            "probe_ratio,{},{},,{:.16e}",
            r.index, r.seed, r.probe_ratio
        )?;
    }
    if let Some(m) = report.median_slope {
        writeln!(w, "median,,,,{m:.16e}")?;
    }
    writeln!(w, "gamma,,,,{:.16e}", report.gamma_bound)?;
    writeln!(w, "verdict,,,,{}", report.verdict.label())?;
    Ok(())
}

/// Plot-ready data: `(eps, error)` rows per replication plus one fitted-line
/// row (slope and intercept of the log-log fit) per replication.
pub fn emit_plot_data(report: &RateReport, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    if matches!(report.verdict, RateVerdict::DegenerateExactAveraging) {
        writeln!(w, "kind,replication,eps,error,slope,intercept")?;
        writeln!(w, "# verdict: {}", report.verdict.label())?;
        return Ok(());
    }
    writeln!(w, "kind,replication,eps,error,slope,intercept")?;
    for r in &report.replications {
        if r.flagged.is_some() {
            continue;
        }
        for (eps, err) in &r.errors {
            writeln!(w, "data,{},{eps:.16e},{err:.16e},,", r.index)?;
        }
        if let Some((slope, intercept)) = fit_line(&r.errors) {
            writeln!(w, "fit,{},,,{slope:.16e},{intercept:.16e}", r.index)?;
        }
    }
    Ok(())
}

/// Parses a plot-data file back into (replication, eps, error) triples and
/// stored slopes; the refit oracle for the round-trip check.
pub fn parse_plot_data(text: &str) -> Result<(Vec<(usize, f64, f64)>, Vec<(usize, f64)>)> {
    let mut data = Vec::new();
    let mut fits = Vec::new();
    for line in text.lines().skip(1) {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("bad float '{s}'")))
        };
        match cols[0] {
            "data" => data.push((
                cols[1]
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidInput(format!("bad replication '{}'", cols[1])))?,
                parse(cols[2])?,
                parse(cols[3])?,
            )),
            "fit" => fits.push((
                cols[1]
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidInput(format!("bad replication '{}'", cols[1])))?,
                parse(cols[4])?,
            )),
            _ => {}
        }
    }
    Ok((data, fits))
}
