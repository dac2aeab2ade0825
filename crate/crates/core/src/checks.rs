//! Inequality suites: every supporting estimate of the averaging argument
//! realized as a pass/fail check on simulated data, plus the documented
//! negative controls (which are expected to fail and count as passing when
//! they do).

use crate::besov::{self, SampledFunction};
use crate::coeffs::{self, SigmaFamily, SigmaSpec};
use crate::config::StudyConfig;
use crate::dyadic::DyadicDomain;
use crate::error::Result;
use crate::kernel::{self, KernelParams};
use crate::par::{self, ExecMode};
use crate::sm::{self, IntegrandFamily, SmKind, Weight};
use crate::solver;
use std::io::{BufWriter, Write};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: String,
    pub case: String,
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
    pub expected_fail: bool,
}

impl CheckOutcome {
    /// A check passes when it holds, unless it is a negative control, which
    /// passes exactly when it fails.
    pub fn passes(&self) -> bool {
        self.holds != self.expected_fail
    }
}

pub fn all_pass(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|c| c.passes())
}

fn push(
    out: &mut Vec<CheckOutcome>,
    id: &str,
    case: String,
    value: f64,
    bound: f64,
    holds: bool,
    expected_fail: bool,
) {
    out.push(CheckOutcome {
        id: id.to_string(),
        case,
        value,
        bound,
        holds,
        expected_fail,
    });
}

/// Squared-integral partial sums stabilize for the heavy-tail-weighted
/// indicator family (tail exponent 3 = rho/2 > 5/2), one check per seed.
fn series_checks(cfg: &StudyConfig, out: &mut Vec<CheckOutcome>) -> Result<()> {
    let domain = DyadicDomain::new(-8, 8, cfg.grid_depth.min(8))?;
    let family = IntegrandFamily::weighted_unit_indicators(6.0, &domain);
    for s in 0..8u64 {
        let seed = cfg.base_seed + s;
        let smr = sm::realize(
            SmKind::Wiener {
                weight: Weight::Gauss,
            },
            domain,
            seed,
        )?;
        let sums = sm::squared_integral_series(&smr, &family, family.len())?;
        let mut worst = 0.0f64;
        for i in sums.len() - 4..sums.len() {
            let rel = (sums[i] - sums[i - 1]).abs() / sums[i].max(1e-300);
            worst = worst.max(rel);
        }
        push(
            out,
            "series_tail_stabilization",
            format!("rho=6 seed={seed}"),
            worst,
            1e-3,
            worst < 1e-3,
            false,
        );
    }
    Ok(())
}

/// The telescoped-integral bound over a grid of sampled functions, seeds, and
/// exponents; exact inequality, so 100% must hold.
fn dyadic_integral_checks(cfg: &StudyConfig, out: &mut Vec<CheckOutcome>) -> Result<()> {
    let depth = 8u32;
    let domain = DyadicDomain::new(0, 1, depth)?;
    let qs: Vec<(&str, Box<dyn Fn(f64) -> f64>)> = vec![
        ("linear", Box::new(|y: f64| y)),
        ("kink", Box::new(|y: f64| y.abs().powf(0.75))),
        (
            "wave",
            Box::new(|y: f64| (2.0 * std::f64::consts::PI * y).sin()),
        ),
        (
            "halfstep",
            Box::new(|y: f64| if y >= 0.5 { 1.0 } else { 0.0 }),
        ),
        ("const", Box::new(|_| 1.5)),
        (
            "bump",
            Box::new(|y: f64| (-(y - 0.5) * (y - 0.5) * 8.0).exp()),
        ),
    ];
    for (name, q) in &qs {
        let samples = SampledFunction::from_fn(0.0, 1.0, (1usize << depth) + 1, q)?;
        for s in 0..8u64 {
            let seed = cfg.base_seed ^ (0xD1A * (s + 1));
            let smr = sm::realize(
                SmKind::Wiener {
                    weight: Weight::One,
                },
                domain,
                seed,
            )?;
            for beta in [0.2, 0.5] {
                let c = besov::dyadic_integral_check(&samples, &smr, 0, beta)?;
                push(
                    out,
                    "dyadic_integral_bound",
                    format!("q={name} seed={seed} beta={beta}"),
                    c.value.abs(),
                    c.bound,
                    c.holds,
                    false,
                );
            }
        }
    }
    Ok(())
}

/// Ratio of the dyadic difference sum to the Besov norm stays stable as the
/// sample depth grows (the embedding constant is finite).
fn besov_ratio_rows(alpha: f64) -> Result<Vec<(u32, f64, f64, f64)>> {
    let beta = 2.0 * alpha - 1.0;
    let mut rows = Vec::new();
    for depth in [8u32, 10, 12] {
        let q = SampledFunction::from_fn(0.0, 1.0, (1usize << depth) + 1, |y| y.abs().powf(0.75))?;
        let ds = besov::dyadic_difference_sum(&q, beta, depth)?;
        let norm = besov::besov_norm(&q, alpha)?.norm;
        rows.push((depth, ds, norm, ds / norm));
    }
    Ok(rows)
}

fn besov_ratio_check(out: &mut Vec<CheckOutcome>) -> Result<()> {
    let rows = besov_ratio_rows(0.6)?;
    let rmax = rows.iter().map(|r| r.3).fold(0.0f64, f64::max);
    let rmin = rows.iter().map(|r| r.3).fold(f64::INFINITY, f64::min);
    push(
        out,
        "besov_ratio_stability",
        "q=|y|^0.75 alpha=0.6 depths=8,10,12".into(),
        rmax / rmin,
        1.5,
        rmax / rmin <= 1.5,
        false,
    );
    Ok(())
}

/// The rescaled oscillation integral stays uniformly bounded over the sweep;
/// its maximum at the smallest scale must not exceed twice the maximum at the
/// largest scale.
fn oscillation_checks(
    sigma: &SigmaSpec,
    exec: ExecMode,
    out: &mut Vec<CheckOutcome>,
) -> Result<()> {
    let eps_grid = [1e-1, 1e-2, 1e-3, 1e-4];
    let d_grid = [1e-3, 1e-2, 1e-1, 1.0, 10.0];
    let t_grid = [0.1, 0.5, 1.0];
    let y_grid = [-2.0, 0.0, 2.0];
    let mut cells = Vec::new();
    for &eps in &eps_grid {
        for &d in &d_grid {
            for &t in &t_grid {
                for &y in &y_grid {
                    cells.push((eps, d, t, y));
                }
            }
        }
    }
    let values = par::map_range(exec, cells.len(), |i| {
        let (eps, d, t, y) = cells[i];
        coeffs::oscillation_integral(sigma, eps, d, t, y).map(|v| v.abs())
    });
    let per_cell = cells.len() / eps_grid.len();
    let mut per_eps = Vec::new();
    for (k, &eps) in eps_grid.iter().enumerate() {
        let mut m = 0.0f64;
        for v in &values[k * per_cell..(k + 1) * per_cell] {
            match v {
                Ok(v) => m = m.max(*v),
                Err(e) => {
                    return Err(crate::error::Error::Study(format!(
                        "oscillation sweep: {e}"
                    )));
                }
            }
        }
        per_eps.push(m);
        push(
            out,
            "oscillation_sweep_max",
            format!("eps={eps:.0e}"),
            m,
            f64::INFINITY,
            m.is_finite(),
            false,
        );
    }
    let first = per_eps[0];
    let last = *per_eps.last().unwrap();
    let holds = if first == 0.0 && last == 0.0 {
        true
    } else {
        last <= 2.0 * first
    };
    push(
        out,
        "oscillation_eps_ratio",
        format!("max@{:.0e} vs 2*max@{:.0e}", eps_grid[3], eps_grid[0]),
        last,
        2.0 * first,
        holds,
        false,
    );
    Ok(())
}

/// Kernel-gradient envelope over the full (t, x) sweep with the configured
/// constants, plus the documented negative control with an over-aggressive
/// decay rate.
fn kernel_gradient_checks(cfg: &StudyConfig, out: &mut Vec<CheckOutcome>) -> Result<()> {
    let horizon = cfg.horizon;
    let params = KernelParams::new(cfg.kernel_c_dx, cfg.kernel_lambda_dx, horizon)?;
    let mut worst = 0.0f64;
    let mut all_hold = true;
    let mut t = 1e-3;
    while t <= horizon + 1e-12 {
        let mut x = -10.0;
        while x <= 10.0 {
            let c = kernel::gradient_bound_check(t, x, &params)?;
            all_hold &= c.holds;
            if c.rhs > 0.0 {
                worst = worst.max(c.lhs / c.rhs);
            }
            x += 0.05;
        }
        t *= 10.0f64.powf(0.125);
    }
    push(
        out,
        "kernel_gradient_envelope",
        "t in [1e-3, T], x in [-10, 10]".into(),
        worst,
        1.0 + 1e-9,
        all_hold,
        false,
    );
    let aggressive = KernelParams::new(params.c_dx, 10.0, horizon)?;
    let c = kernel::gradient_bound_check(0.1, 2.0, &aggressive)?;
    push(
        out,
        "kernel_gradient_negative_control",
        "lambda=10 at (t,x)=(0.1,2)".into(),
        c.lhs,
        c.rhs,
        c.holds,
        true,
    );
    Ok(())
}

/// Logarithmic tail envelope of the singular time integral over a log sweep.
fn log_tail_checks(horizon: f64, out: &mut Vec<CheckOutcome>) -> Result<()> {
    let mut all_hold = true;
    let mut margin = f64::INFINITY;
    let mut b = 1e-4;
    while b <= 1e2 + 1e-9 {
        let c = kernel::log_tail_bound(b, horizon, horizon)?;
        all_hold &= c.holds;
        margin = margin.min(c.rhs - c.lhs);
        b *= 10.0f64.powf(0.15);
    }
    push(
        out,
        "log_tail_envelope",
        "b in [1e-4, 1e2], t = T".into(),
        margin,
        0.0,
        all_hold,
        false,
    );
    Ok(())
}

/// Boundedness of the centered drift integral for the periodic families, and
/// the quasiperiodic negative control whose declared-period average is wrong.
fn drift_integral_checks(beta: f64, out: &mut Vec<CheckOutcome>) -> Result<()> {
    for family in [SigmaFamily::ShiftedCos, SigmaFamily::Sin] {
        let spec = SigmaSpec::new(family, beta)?;
        let cap = 2.0 * spec.period * spec.bound;
        let mut worst = 0.0f64;
        let mut r = 0.0;
        while r <= 100.0 * spec.period {
            for &y in &[-2.0, 0.0, 2.0] {
                worst = worst.max(coeffs::centered_drift_integral(&spec, r, y)?.abs());
            }
            r += spec.period / 3.0 + 0.721;
        }
        push(
            out,
            "drift_integral_bounded",
            format!("family={}", family.tag()),
            worst,
            cap,
            worst <= cap,
            false,
        );
    }
    let spec = SigmaSpec::new(SigmaFamily::Quasiperiodic, beta)?;
    let cap = 2.0 * spec.period * spec.bound;
    let mut worst = 0.0f64;
    let mut r = 0.0;
    while r <= 100.0 * spec.period {
        worst = worst.max(coeffs::centered_drift_integral(&spec, r, 0.0)?.abs());
        r += spec.period / 3.0 + 0.721;
    }
    push(
        out,
        "drift_integral_negative_control",
        "family=quasiperiodic (declared-period average)".into(),
        worst,
        cap,
        worst <= cap,
        true,
    );
    Ok(())
}

/// Heavy-tail integrability probe with the decaying weight, plus the flat
/// weight negative control.
fn tau_checks(cfg: &StudyConfig, out: &mut Vec<CheckOutcome>) -> Result<()> {
    let depth = cfg.grid_depth.min(8);
    let rep = sm::check_tau_integrability(
        SmKind::Wiener {
            weight: Weight::Gauss,
        },
        3.0,
        &[2, 4, 6, 8],
        depth,
        cfg.base_seed,
        1e-3,
    )?;
    let last_rel = {
        let n = rep.partials.len();
        (rep.partials[n - 1].1 - rep.partials[n - 2].1).abs()
            / rep.partials[n - 1].1.abs().max(1e-12)
    };
    push(
        out,
        "tau_integrability",
        "tau=3 weight=gauss".into(),
        last_rel,
        1e-3,
        rep.stabilized,
        false,
    );
    let rep = sm::check_tau_integrability(
        SmKind::Wiener {
            weight: Weight::One,
        },
        3.0,
        &[2, 4, 6, 8],
        depth,
        cfg.base_seed,
        1e-3,
    )?;
    let last_rel = {
        let n = rep.partials.len();
        (rep.partials[n - 1].1 - rep.partials[n - 2].1).abs()
            / rep.partials[n - 1].1.abs().max(1e-12)
    };
    push(
        out,
        "tau_negative_control",
        "tau=3 weight=one".into(),
        last_rel,
        1e-3,
        rep.stabilized,
        true,
    );
    Ok(())
}

/// Runs the full estimate suite for a configuration.
pub fn run_lemma_suite(cfg: &StudyConfig, exec: ExecMode) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    series_checks(cfg, &mut out)?;
    dyadic_integral_checks(cfg, &mut out)?;
    besov_ratio_check(&mut out)?;
    oscillation_checks(&cfg.sigma()?, exec, &mut out)?;
    kernel_gradient_checks(cfg, &mut out)?;
    log_tail_checks(cfg.horizon, &mut out)?;
    drift_integral_checks(cfg.sigma_beta, &mut out)?;
    tau_checks(cfg, &mut out)?;
    Ok(out)
}

pub fn write_lemma_csv(outcomes: &[CheckOutcome], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    writeln!(w, "id,case,value,bound,holds,expected_fail,passes")?;
    for c in outcomes {
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{},{},{}",
            c.id,
            c.case.replace(',', ";"),
            c.value,
            c.bound,
            c.holds,
            c.expected_fail,
            c.passes()
        )?;
    }
    Ok(())
}

/// Besov suite output: the embedding-ratio rows across depths, the fitted
/// interpolation constants across scales, and their stability checks.
pub struct BesovSuite {
    pub ratio_rows: Vec<(u32, f64, f64, f64)>,
    pub interp_rows: Vec<(f64, f64)>,
    pub checks: Vec<CheckOutcome>,
}

/// Fitted constant of `w2(g, r)^2 <= C min(r^{2 beta}, eps)` over a log grid
/// of r for the centered kernel-time field at one scale.
fn interpolation_constant(sigma: &SigmaSpec, eps: f64) -> Result<f64> {
    let count = 1 << 10;
    let g = solver::oscillation_gap_samples(sigma, eps, 1.0, 0.0, 0.0, 1.0, count + 1)?;
    let samples = SampledFunction::new(0.0, 1.0 / count as f64, g)?;
    let delta = samples.step();
    let two_beta = 2.0 * sigma.beta;
    let mut c_fit = 0.0f64;
    let n = 64;
    for i in 0..=n {
        let r = delta * (1.0 / delta).powf(i as f64 / n as f64);
        let w2 = besov::w2_modulus(&samples, r.min(1.0))?;
        let envelope = r.powf(two_beta).min(eps);
        c_fit = c_fit.max(w2 * w2 / envelope);
    }
    Ok(c_fit)
}

pub fn run_besov_suite(cfg: &StudyConfig) -> Result<BesovSuite> {
    let ratio_rows = besov_ratio_rows(0.6)?;
    let mut checks = Vec::new();
    let rmax = ratio_rows.iter().map(|r| r.3).fold(0.0f64, f64::max);
    let rmin = ratio_rows.iter().map(|r| r.3).fold(f64::INFINITY, f64::min);
    push(
        &mut checks,
        "besov_ratio_stability",
        "q=|y|^0.75 alpha=0.6 depths=8,10,12".into(),
        rmax / rmin,
        1.5,
        rmax / rmin <= 1.5,
        false,
    );

    // interpolation probe at beta = 3/4 regardless of the study's family:
    // fit C once over the sweep and require the fitted per-scale constants
    // not to grow as the scale shrinks (growth would falsify the envelope;
    // shrinkage just means the field beats the bound, which the concrete
    // field does: its squared modulus decays faster than the envelope)
    let sigma = SigmaSpec::new(SigmaFamily::ShiftedCos, 0.75)?;
    let mut interp_rows = Vec::new();
    for &eps in &[1e-1, 1e-3] {
        interp_rows.push((eps, interpolation_constant(&sigma, eps)?));
    }
    let c_coarse = interp_rows[0].1;
    let c_fine = interp_rows[1].1;
    push(
        &mut checks,
        "interpolation_no_growth",
        "w2^2 <= C min(r^1.5, eps): C at eps=1e-3 vs 3x C at eps=1e-1".into(),
        c_fine,
        3.0 * c_coarse,
        c_fine <= 3.0 * c_coarse,
        false,
    );
    // the once-fitted constant is finite (the bound is satisfiable at all)
    push(
        &mut checks,
        "interpolation_constant_finite",
        "single C over the full (r, eps) sweep".into(),
        c_coarse.max(c_fine),
        f64::INFINITY,
        c_coarse.max(c_fine).is_finite() && c_coarse.max(c_fine) > 0.0,
        false,
    );
    let _ = cfg;
    Ok(BesovSuite {
        ratio_rows,
        interp_rows,
        checks,
    })
}

pub fn write_besov_csv(suite: &BesovSuite, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    writeln!(w, "section,key,difference_sum,besov_norm,ratio")?;
    for (depth, ds, norm, ratio) in &suite.ratio_rows {
        writeln!(w, "ratio,{depth},{ds:.16e},{norm:.16e},{ratio:.16e}")?;
    }
    for (eps, c) in &suite.interp_rows {
        writeln!(w, "interp,{eps:.16e},,,{c:.16e}")?;
    }
    for c in &suite.checks {
        writeln!(
            w,
            "check,{},{:.16e},{:.16e},{}",
            c.id,
            c.value,
            c.bound,
            c.passes()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lemma_suite_passes() {
        let cfg = StudyConfig::default();
        let outcomes = run_lemma_suite(&cfg, ExecMode::Sequential).unwrap();
        for c in &outcomes {
            assert!(
                c.passes(),
                "{} [{}]: value={}, bound={}, holds={}, expected_fail={}",
                c.id,
                c.case,
                c.value,
                c.bound,
                c.holds,
                c.expected_fail
            );
        }
        // the promised grid size: at least 48 exact-inequality combinations
        let n_exact = outcomes
            .iter()
            .filter(|c| c.id == "dyadic_integral_bound")
            .count();
        assert!(n_exact >= 48, "only {n_exact} combinations");
        // negative controls are present and did fail
        for id in [
            "kernel_gradient_negative_control",
            "drift_integral_negative_control",
            "tau_negative_control",
        ] {
            let c = outcomes.iter().find(|c| c.id == id).unwrap();
            assert!(!c.holds && c.passes());
        }
    }

    #[test]
    fn besov_suite_passes() {
        let cfg = StudyConfig::default();
        let suite = run_besov_suite(&cfg).unwrap();
        assert_eq!(suite.ratio_rows.len(), 3);
        assert_eq!(suite.interp_rows.len(), 2);
        for c in &suite.checks {
            assert!(c.passes(), "{}: value={} bound={}", c.id, c.value, c.bound);
        }
    }

    #[test]
    fn aggressive_configured_envelope_fails_the_main_check() {
        let cfg = StudyConfig {
            kernel_lambda_dx: 10.0,
            ..StudyConfig::default()
        };
        let outcomes = run_lemma_suite(&cfg, ExecMode::Sequential).unwrap();
        let c = outcomes
            .iter()
            .find(|c| c.id == "kernel_gradient_envelope")
            .unwrap();
        assert!(!c.holds && !c.passes());
    }

    #[test]
    fn expected_fail_semantics() {
        let c = CheckOutcome {
            id: "x".into(),
            case: String::new(),
            value: 1.0,
            bound: 0.5,
            holds: false,
            expected_fail: true,
        };
        assert!(c.passes());
        let c2 = CheckOutcome {
            holds: true,
            ..c.clone()
        };
        assert!(!c2.passes());
    }
}
