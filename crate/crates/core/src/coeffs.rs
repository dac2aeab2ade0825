//! Coefficient families for the forced heat equation: the multiplicative
//! noise coefficient sigma(s, y) with its time average, the reaction term
//! f(y, z), and the initial condition u0(y).
//!
//! Every shipped sigma is a separable product `m(s) * a(y)` of a fast time
//! modulation and a Hoelder spatial profile. The modulation is stored as a
//! mean level plus a finite list of trigonometric harmonics; that exact
//! decomposition is what the solver's noise quadrature consumes.

use crate::error::{Error, Result};
use crate::quad;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::PI;

/// One zero-mean trigonometric component `cos_amp cos(freq s) + sin_amp sin(freq s)`.
/// `freq == 0` encodes a constant offset (used by the quasiperiodic control).
#[derive(Debug, Clone, Copy)]
pub struct Harmonic {
    pub freq: f64,
    pub cos_amp: f64,
    pub sin_amp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaFamily {
    /// m(s) = 2 + cos s; period 2 pi, mean 2.
    ShiftedCos,
    /// m(s) = sin s; period 2 pi, mean 0.
    Sin,
    /// m(s) = 1; time-constant coefficient, sigma equals its own average.
    Constant,
    /// m(s) = sin s + sin(sqrt(2) s). Not periodic: the declared 2 pi period
    /// average differs from the long-time mean, so the centered drift
    /// integral grows without bound. Shipped as a negative control.
    Quasiperiodic,
}

impl SigmaFamily {
    pub fn tag(self) -> &'static str {
        match self {
            SigmaFamily::ShiftedCos => "shifted_cos",
            SigmaFamily::Sin => "sin",
            SigmaFamily::Constant => "constant",
            SigmaFamily::Quasiperiodic => "quasiperiodic",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        match s {
            "shifted_cos" => Ok(SigmaFamily::ShiftedCos),
            "sin" => Ok(SigmaFamily::Sin),
            "constant" => Ok(SigmaFamily::Constant),
            "quasiperiodic" => Ok(SigmaFamily::Quasiperiodic),
            _ => Err(Error::Config(format!("unknown sigma family '{s}'"))),
        }
    }

    /// Whether the declared-period average really is the long-time mean.
    pub fn drift_integral_bounded(self) -> bool {
        !matches!(self, SigmaFamily::Quasiperiodic)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SigmaSpec {
    pub family: SigmaFamily,
    /// Hoelder exponent of the spatial profile; 1 selects the smooth profile.
    pub beta: f64,
    /// Declared Hoelder constant of sigma(s, .) uniform in s.
    pub holder_const: f64,
    /// Declared bound sup |sigma|.
    pub bound: f64,
    /// Declared period of the fast modulation.
    pub period: f64,
}

impl SigmaSpec {
    pub fn new(family: SigmaFamily, beta: f64) -> Result<Self> {
        if !(beta > 0.5 && beta <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "spatial Hoelder exponent must lie in (1/2, 1], got {beta}"
            )));
        }
        // measured profile constants with margin (see tests)
        let (l_a, sup_a) = if beta < 1.0 { (1.1, 1.9) } else { (0.35, 1.0) };
        let m_max = match family {
            SigmaFamily::ShiftedCos => 3.0,
            SigmaFamily::Sin => 1.0,
            SigmaFamily::Constant => 1.0,
            SigmaFamily::Quasiperiodic => 2.0,
        };
        Ok(Self {
            family,
            beta,
            holder_const: m_max * l_a,
            bound: m_max * sup_a,
            period: 2.0 * PI,
        })
    }

    /// Spatial profile a(y): `(1 + |y|^beta) exp(-y^2/8)`, or the smooth
    /// `exp(-y^2/8)` when beta = 1.
    pub fn profile(&self, y: f64) -> f64 {
        let env = (-y * y / 8.0).exp();
        if self.beta < 1.0 {
            (1.0 + y.abs().powf(self.beta)) * env
        } else {
            env
        }
    }

    /// Fast time modulation m(s).
    pub fn modulation(&self, s: f64) -> f64 {
        match self.family {
            SigmaFamily::ShiftedCos => 2.0 + s.cos(),
            SigmaFamily::Sin => s.sin(),
            SigmaFamily::Constant => 1.0,
            SigmaFamily::Quasiperiodic => s.sin() + (std::f64::consts::SQRT_2 * s).sin(),
        }
    }

    pub fn eval(&self, s: f64, y: f64) -> f64 {
        self.modulation(s) * self.profile(y)
    }

    /// Average of m over the declared period (closed forms).
    pub fn mean_level(&self) -> f64 {
        match self.family {
            SigmaFamily::ShiftedCos => 2.0,
            SigmaFamily::Sin => 0.0,
            SigmaFamily::Constant => 1.0,
            SigmaFamily::Quasiperiodic => {
                let p = self.period;
                let r = std::f64::consts::SQRT_2;
                (1.0 - (r * p).cos()) / (r * p)
            }
        }
    }

    /// The averaged coefficient: `mean_level * a(y)`.
    pub fn averaged(&self, y: f64) -> f64 {
        self.mean_level() * self.profile(y)
    }

    /// Exact decomposition `m(s) - mean_level = sum of harmonics`.
    pub fn harmonics(&self) -> Vec<Harmonic> {
        match self.family {
            SigmaFamily::ShiftedCos => vec![Harmonic {
                freq: 1.0,
                cos_amp: 1.0,
                sin_amp: 0.0,
            }],
            SigmaFamily::Sin => vec![Harmonic {
                freq: 1.0,
                cos_amp: 0.0,
                sin_amp: 1.0,
            }],
            SigmaFamily::Constant => Vec::new(),
            SigmaFamily::Quasiperiodic => vec![
                Harmonic {
                    freq: 0.0,
                    cos_amp: -self.mean_level(),
                    sin_amp: 0.0,
                },
                Harmonic {
                    freq: 1.0,
                    cos_amp: 0.0,
                    sin_amp: 1.0,
                },
                Harmonic {
                    freq: std::f64::consts::SQRT_2,
                    cos_amp: 0.0,
                    sin_amp: 1.0,
                },
            ],
        }
    }

    /// Fastest harmonic frequency, 0 for a constant modulation.
    pub fn max_freq(&self) -> f64 {
        self.harmonics().iter().map(|h| h.freq).fold(0.0, f64::max)
    }
}

/// Centered drift integral `int_0^r (sigma(s, y) - averaged(y)) ds` by
/// Simpson quadrature (matches the closed forms for the periodic families).
pub fn centered_drift_integral(spec: &SigmaSpec, r: f64, y: f64) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::InvalidInput(
            "drift horizon must be nonnegative".into(),
        ));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let f_max = spec.max_freq().max(1.0);
    let n = ((64.0 * r * f_max / PI).ceil() as usize).clamp(256, 1 << 20);
    let avg = spec.averaged(y);
    Ok(quad::simpson(|s| spec.eval(s, y) - avg, 0.0, r, n))
}

/// Empirical Hoelder constant: max of |f(y1)-f(y2)| / |y1-y2|^exponent over
/// structured near pairs and seeded random pairs.
pub fn holder_estimate<F: Fn(f64) -> f64>(
    f: F,
    exponent: f64,
    interval: (f64, f64),
    n_pairs: usize,
) -> Result<f64> {
    let (lo, hi) = interval;
    if !(hi > lo) {
        return Err(Error::InvalidInput("degenerate interval".into()));
    }
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "Hoelder exponent must lie in (0, 1], got {exponent}"
        )));
    }
    if n_pairs < 100 {
        return Err(Error::InvalidInput("need at least 100 sample pairs".into()));
    }
    let mut best: f64 = 0.0;
    // small separations along a uniform grid catch kinks
    let g = 512usize;
    let step = (hi - lo) / g as f64;
    for mult in [1usize, 2, 8, 32] {
        for i in 0..=(g - mult) {
            let y1 = lo + i as f64 * step;
            let y2 = y1 + mult as f64 * step;
            let r = (f(y1) - f(y2)).abs() / (y2 - y1).powf(exponent);
            best = best.max(r);
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(0xC0FFEE);
    for _ in 0..n_pairs {
        let y1 = lo + rng.gen::<f64>() * (hi - lo);
        let y2 = lo + rng.gen::<f64>() * (hi - lo);
        if y1 == y2 {
            continue;
        }
        let r = (f(y1) - f(y2)).abs() / (y1 - y2).abs().powf(exponent);
        best = best.max(r);
    }
    Ok(best)
}

/// The rescaled oscillation integral
/// `(1 / sqrt(eps)) int_0^t (t-s)^{-1/2} exp(-d/(t-s)) (sigma(s/eps, y) - averaged(y)) ds`,
/// evaluated after the substitution `u = sqrt(t-s)` (which removes the
/// endpoint singularity) with step doubling until two refinements agree to
/// 1e-6 relative.
pub fn oscillation_integral(spec: &SigmaSpec, eps: f64, d: f64, t: f64, y: f64) -> Result<f64> {
    if eps <= 0.0 || d <= 0.0 || t <= 0.0 {
        return Err(Error::InvalidInput(
            "oscillation integral needs positive eps, decay, and time".into(),
        ));
    }
    let avg_m = spec.mean_level();
    let a_y = spec.profile(y);
    let f_max = spec.max_freq();
    let integrand = |u: f64| {
        if u == 0.0 {
            return 0.0; // exp(-d/u^2) -> 0 for d > 0
        }
        (-d / (u * u)).exp() * (spec.modulation((t - u * u) / eps) - avg_m)
    };
    let n0 = if f_max > 0.0 {
        ((t.sqrt() * 32.0 * f_max / (2.0 * PI * eps)).ceil() as usize).clamp(128, 1 << 22)
    } else {
        128
    };
    let v = quad::refine_trapezoid(integrand, 0.0, t.sqrt(), n0, 1e-6, 18);
    Ok(2.0 / eps.sqrt() * v * a_y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftSpec {
    Zero,
    /// f(y, z) = z / (2 (1 + z^2)); bounded by 1/4, Lipschitz 1/2.
    BoundedFraction,
    /// f(y, z) = clamp(z, -1, 1); bounded by 1, Lipschitz 1.
    Clamp,
}

impl DriftSpec {
    pub fn eval(self, _y: f64, z: f64) -> f64 {
        match self {
            DriftSpec::Zero => 0.0,
            DriftSpec::BoundedFraction => 0.5 * z / (1.0 + z * z),
            DriftSpec::Clamp => z.clamp(-1.0, 1.0),
        }
    }

    pub fn lipschitz(self) -> f64 {
        match self {
            DriftSpec::Zero => 0.0,
            DriftSpec::BoundedFraction => 0.5,
            DriftSpec::Clamp => 1.0,
        }
    }

    pub fn bound(self) -> f64 {
        match self {
            DriftSpec::Zero => 0.0,
            DriftSpec::BoundedFraction => 0.25,
            DriftSpec::Clamp => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            DriftSpec::Zero => "zero",
            DriftSpec::BoundedFraction => "bounded_fraction",
            DriftSpec::Clamp => "clamp",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(DriftSpec::Zero),
            "bounded_fraction" => Ok(DriftSpec::BoundedFraction),
            "clamp" => Ok(DriftSpec::Clamp),
            _ => Err(Error::Config(format!("unknown drift kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialSpec {
    Zero,
    /// u0(y) = exp(-y^2/4).
    Gaussian,
}

impl InitialSpec {
    pub fn eval(self, y: f64) -> f64 {
        match self {
            InitialSpec::Zero => 0.0,
            InitialSpec::Gaussian => (-y * y / 4.0).exp(),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            InitialSpec::Zero => "zero",
            InitialSpec::Gaussian => "gaussian",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(InitialSpec::Zero),
            "gaussian" => Ok(InitialSpec::Gaussian),
            _ => Err(Error::Config(format!("unknown initial kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CoefficientSet {
    pub sigma: SigmaSpec,
    pub drift: DriftSpec,
    pub initial: InitialSpec,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: SigmaFamily) -> SigmaSpec {
        SigmaSpec::new(family, 0.75).unwrap()
    }

    #[test]
    fn averages_match_quadrature_oracle() {
        // one-period quadrature against the closed-form averages
        for family in [
            SigmaFamily::ShiftedCos,
            SigmaFamily::Sin,
            SigmaFamily::Constant,
            SigmaFamily::Quasiperiodic,
        ] {
            let s = spec(family);
            for &y in &[-1.0, 0.0, 2.0] {
                let quad_avg = quad::simpson(|t| s.eval(t, y), 0.0, s.period, 4096) / s.period;
                assert!(
                    (quad_avg - s.averaged(y)).abs() < 1e-10,
                    "{family:?} at y={y}: {quad_avg} vs {}",
                    s.averaged(y)
                );
            }
        }
    }

    #[test]
    fn sin_family_average_is_zero() {
        let s = spec(SigmaFamily::Sin);
        assert_eq!(s.mean_level(), 0.0);
        assert_eq!(s.averaged(1.3), 0.0);
    }

    #[test]
    fn constant_family_average_is_profile() {
        let s = spec(SigmaFamily::Constant);
        for &y in &[-2.0, 0.0, 0.7] {
            assert_eq!(s.averaged(y), s.profile(y));
            assert_eq!(s.eval(5.0, y), s.profile(y));
        }
    }

    #[test]
    fn harmonics_reconstruct_modulation() {
        for family in [
            SigmaFamily::ShiftedCos,
            SigmaFamily::Sin,
            SigmaFamily::Constant,
            SigmaFamily::Quasiperiodic,
        ] {
            let sp = spec(family);
            for i in 0..100 {
                let s = i as f64 * 0.37;
                let mut v = sp.mean_level();
                for h in sp.harmonics() {
                    v += h.cos_amp * (h.freq * s).cos() + h.sin_amp * (h.freq * s).sin();
                }
                assert!((v - sp.modulation(s)).abs() < 1e-14, "{family:?} at s={s}");
            }
        }
    }

    #[test]
    fn drift_integral_values() {
        // sin family: G(r, y) = (1 - cos r) a(y)
        let s = spec(SigmaFamily::Sin);
        let got = centered_drift_integral(&s, PI, 1.0).unwrap();
        let want = 2.0 * s.profile(1.0);
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        assert_eq!(centered_drift_integral(&s, 0.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn drift_integral_bounded_for_periodic_families() {
        for family in [SigmaFamily::ShiftedCos, SigmaFamily::Sin] {
            let s = spec(family);
            let cap = 2.0 * s.period * s.bound;
            let mut r = 0.0;
            while r <= 100.0 * s.period {
                for &y in &[-2.0, 0.0, 2.0] {
                    let g = centered_drift_integral(&s, r, y).unwrap();
                    assert!(g.abs() <= cap, "{family:?} r={r} y={y}: |G|={}", g.abs());
                }
                r += 7.3 * s.period / 3.0;
            }
        }
    }

    #[test]
    fn quasiperiodic_drift_integral_grows() {
        // the declared-period average is not the long-time mean, so the
        // centered integral drifts linearly: the negative control
        let s = spec(SigmaFamily::Quasiperiodic);
        let early = centered_drift_integral(&s, 10.0 * s.period, 0.0)
            .unwrap()
            .abs();
        let late = centered_drift_integral(&s, 100.0 * s.period, 0.0)
            .unwrap()
            .abs();
        assert!(late > 4.0 * early.max(1.0), "early={early}, late={late}");
        let cap = 2.0 * s.period * s.bound;
        assert!(late > cap, "|G|={late} stayed under the periodic cap {cap}");
    }

    #[test]
    fn holder_estimates() {
        // constant function
        let e = holder_estimate(|_| 3.0, 0.5, (-1.0, 1.0), 500).unwrap();
        assert_eq!(e, 0.0);
        // |y|^0.75 has Hoelder constant exactly 1 at exponent 0.75
        let e = holder_estimate(|y: f64| y.abs().powf(0.75), 0.75, (-1.0, 1.0), 2000).unwrap();
        assert!(e <= 1.05, "estimate {e}");
        assert!(e > 0.9, "estimate {e}");
        // linear function at exponent 1 has constant 1
        let e = holder_estimate(|y| y, 1.0, (0.0, 1.0), 500).unwrap();
        assert!((e - 1.0).abs() < 1e-9, "estimate {e}");
    }

    #[test]
    fn averaged_coefficient_inherits_holder_bound() {
        for family in [
            SigmaFamily::ShiftedCos,
            SigmaFamily::Sin,
            SigmaFamily::Constant,
            SigmaFamily::Quasiperiodic,
        ] {
            for beta in [0.55, 0.75, 1.0] {
                let s = SigmaSpec::new(family, beta).unwrap();
                let e = holder_estimate(|y| s.averaged(y), s.beta, (-8.0, 8.0), 4000).unwrap();
                assert!(
                    e <= s.holder_const * 1.05,
                    "{family:?} beta={beta}: estimate {e} vs declared {}",
                    s.holder_const
                );
            }
        }
    }

    #[test]
    fn centered_modulation_is_bounded() {
        for family in [
            SigmaFamily::ShiftedCos,
            SigmaFamily::Sin,
            SigmaFamily::Constant,
            SigmaFamily::Quasiperiodic,
        ] {
            let s = spec(family);
            for i in 0..2000 {
                let r = i as f64 * 0.173;
                for &y in &[-2.0, 0.0, 2.0] {
                    let h = s.eval(r, y) - s.averaged(y);
                    assert!(h.abs() <= 2.0 * s.bound, "{family:?}: |H|={}", h.abs());
                }
            }
        }
    }

    #[test]
    fn oscillation_integral_constant_family_is_zero() {
        let s = spec(SigmaFamily::Constant);
        let v = oscillation_integral(&s, 1e-2, 0.01, 1.0, 0.3).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn oscillation_integral_no_growth_as_eps_shrinks() {
        // fine-step quadrature oracle at each eps; values stay under one cap
        let s = spec(SigmaFamily::Sin);
        let mut vals = Vec::new();
        for &eps in &[1e-1, 1e-2, 1e-3] {
            let v = oscillation_integral(&s, eps, 0.01, 1.0, 0.0).unwrap().abs();
            vals.push(v);
        }
        let cap = vals[0].max(1.0) * 3.0;
        for (i, v) in vals.iter().enumerate() {
            assert!(*v <= cap, "eps index {i}: {v} vs cap {cap}");
        }
    }

    #[test]
    fn oscillation_integral_uniform_in_decay() {
        let s = spec(SigmaFamily::Sin);
        let mut vals = Vec::new();
        for &d in &[1e-3, 1e-1, 10.0] {
            vals.push(oscillation_integral(&s, 1e-2, d, 1.0, 0.0).unwrap().abs());
        }
        let cap = vals.iter().fold(1.0f64, |a, &b| a.max(b));
        assert!(cap.is_finite());
        assert!(vals.iter().all(|v| *v <= cap + 1e-12));
    }

    #[test]
    fn oscillation_integral_validates() {
        let s = spec(SigmaFamily::Sin);
        assert!(oscillation_integral(&s, 0.0, 0.1, 1.0, 0.0).is_err());
        assert!(oscillation_integral(&s, 0.1, -1.0, 1.0, 0.0).is_err());
        assert!(oscillation_integral(&s, 0.1, 0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn beta_validation() {
        assert!(SigmaSpec::new(SigmaFamily::Sin, 0.5).is_err());
        assert!(SigmaSpec::new(SigmaFamily::Sin, 1.01).is_err());
        assert!(SigmaSpec::new(SigmaFamily::Sin, 0.75).is_ok());
    }

    #[test]
    fn drift_properties() {
        let f = DriftSpec::BoundedFraction;
        // bound 1/4 at z = 1, Lipschitz 1/2 via sampled difference quotients
        assert!((f.eval(0.0, 1.0) - 0.25).abs() < 1e-15);
        let mut max_slope: f64 = 0.0;
        for i in -400..400 {
            let z = i as f64 * 0.01;
            let slope = (f.eval(0.0, z + 1e-6) - f.eval(0.0, z)) / 1e-6;
            max_slope = max_slope.max(slope.abs());
            assert!(f.eval(0.0, z).abs() <= f.bound() + 1e-12);
        }
        assert!(max_slope <= f.lipschitz() + 1e-5);
    }
}
