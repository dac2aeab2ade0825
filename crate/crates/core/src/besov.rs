//! Discrete Besov-space machinery: the second-order modulus of continuity,
//! the B^alpha_22 norm at sample resolution, dyadic difference sums, and the
//! telescoped stochastic integral with its discrete Cauchy–Schwarz bound.

use crate::error::{Error, Result};
use crate::sm::SmRealization;

/// Uniform samples of a function on `[start, start + step * (len - 1)]`.
#[derive(Debug, Clone)]
pub struct SampledFunction {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput("need at least two samples".into()));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidInput("sample step must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sampled function".into()));
        }
        Ok(Self {
            start,
            step,
            values,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(start: f64, end: f64, count: usize, f: F) -> Result<Self> {
        if count < 2 || !(end > start) {
            return Err(Error::InvalidInput("bad sampling request".into()));
        }
        let step = (end - start) / (count - 1) as f64;
        let values = (0..count).map(|i| f(start + i as f64 * step)).collect();
        Self::new(start, step, values)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn interval_len(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Discrete L2 norm with trapezoid weights.
    pub fn l2_norm(&self) -> f64 {
        let n = self.values.len();
        let mut acc = 0.5 * (self.values[0].powi(2) + self.values[n - 1].powi(2));
        for v in &self.values[1..n - 1] {
            acc += v * v;
        }
        (acc * self.step).sqrt()
    }
}

/// Modulus of continuity in L2: the max over sampled shifts `h <= r` of
/// `(sum_y |g(y+h) - g(y)|^2 step)^{1/2}`.
pub fn w2_modulus(g: &SampledFunction, r: f64) -> Result<f64> {
    if r < 0.0 || r > g.interval_len() + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "shift bound {r} outside [0, {}]",
            g.interval_len()
        )));
    }
    let max_shift = ((r / g.step) + 1e-9).floor() as usize;
    let v = g.values();
    let mut best: f64 = 0.0;
    for h in 0..=max_shift.min(v.len() - 1) {
        let mut acc = 0.0;
        for y in 0..v.len() - h {
            let d = v[y + h] - v[y];
            acc += d * d;
        }
        best = best.max(acc * g.step);
    }
    Ok(best.sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct BesovReport {
    pub l2_part: f64,
    pub modulus_integral: f64,
    pub norm: f64,
    pub alpha: f64,
}

/// Besov norm at sample resolution: the L2 part plus the square root of
/// `int w2(g, r)^2 r^{-2 alpha - 1} dr` taken over `[step, interval]` on a
/// log-spaced grid. The lower cutoff at the sample step is the finest scale
/// the data can express.
pub fn besov_norm(g: &SampledFunction, alpha: f64) -> Result<BesovReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "Besov exponent must lie in (0, 1), got {alpha}"
        )));
    }
    let lo = g.step;
    let hi = g.interval_len();
    let octaves = (hi / lo).log2();
    let n = ((octaves * 32.0).ceil() as usize).max(8);
    let lr_lo = lo.ln();
    let lr_hi = hi.ln();
    let dl = (lr_hi - lr_lo) / n as f64;
    // trapezoid in log r of w2(r)^2 r^{-2 alpha - 1} * r
    let mut acc = 0.0;
    for i in 0..=n {
        let r = (lr_lo + i as f64 * dl).exp();
        let w2 = w2_modulus(g, r.min(hi))?;
        let f = w2 * w2 * r.powf(-2.0 * alpha - 1.0) * r;
        acc += if i == 0 || i == n { 0.5 * f } else { f };
    }
    let modulus_integral = acc * dl;
    let l2 = g.l2_norm();
    Ok(BesovReport {
        l2_part: l2,
        modulus_integral,
        norm: l2 + modulus_integral.sqrt(),
        alpha,
    })
}

fn check_unit_interval_depth(q: &SampledFunction, depth: u32) -> Result<()> {
    let want = (1usize << depth) + 1;
    if q.len() != want {
        return Err(Error::InvalidInput(format!(
            "need {want} samples for depth {depth}, got {}",
            q.len()
        )));
    }
    if (q.interval_len() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(
            "dyadic difference sums are defined on a unit interval".into(),
        ));
    }
    Ok(())
}

/// `(sum_{n=1..depth} 2^{n beta} sum_k |q(d_kn) - q(d_{(k-1)n})|^2)^{1/2}`
/// for `q` sampled at every dyadic endpoint of a unit interval.
pub fn dyadic_difference_sum(q: &SampledFunction, beta: f64, depth: u32) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(
            "difference-sum exponent must be positive".into(),
        ));
    }
    check_unit_interval_depth(q, depth)?;
    let v = q.values();
    let mut total = 0.0;
    for n in 1..=depth {
        let stride = 1usize << (depth - n);
        let mut level = 0.0;
        for k in 1..=(1usize << n) {
            let d = v[k * stride] - v[(k - 1) * stride];
            level += d * d;
        }
        total += 2.0f64.powf(n as f64 * beta) * level;
    }
    Ok(total.sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct DyadicIntegralCheck {
    /// The telescoped integral value.
    pub value: f64,
    /// `|q(j) mu((j, j+1])| + dyadic_difference_sum(q) * weighted measure sum`.
    pub bound: f64,
    pub holds: bool,
}

/// Builds the stochastic integral of `q` over `(j, j+1]` by the telescoping
/// construction (left-endpoint step approximations level by level) and checks
/// it against the discrete Cauchy–Schwarz bound. The inequality is exact at
/// the sample level; only 1e-12 accumulation slack is allowed.
pub fn dyadic_integral_check(
    q: &SampledFunction,
    sm: &SmRealization,
    j: i32,
    beta: f64,
) -> Result<DyadicIntegralCheck> {
    let depth = sm.domain().depth();
    check_unit_interval_depth(q, depth)?;
    if (q.start() - j as f64).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "samples start at {}, expected {j}",
            q.start()
        )));
    }
    let atoms = sm.unit_atoms(j)?;
    let v = q.values();

    // level-n integral of the left-endpoint step approximation
    let level_integral = |n: u32| -> f64 {
        let stride = 1usize << (depth - n);
        let mut acc = 0.0;
        for k in 1..=(1usize << n) {
            let mu: f64 = atoms[(k - 1) * stride..k * stride].iter().sum();
            acc += v[(k - 1) * stride] * mu;
        }
        acc
    };

    let unit_measure: f64 = atoms.iter().sum();
    let mut value = v[0] * unit_measure; // level-0 step is q(j) everywhere
    let mut prev = value;
    for n in 1..=depth {
        let cur = level_integral(n);
        value += cur - prev;
        prev = cur;
    }

    // weighted measure factor: (sum_n 2^{-n beta} sum_k mu(Delta_kn)^2)^{1/2}
    let mut measure_factor = 0.0;
    for n in 1..=depth {
        let stride = 1usize << (depth - n);
        let mut level = 0.0;
        for k in 1..=(1usize << n) {
            let mu: f64 = atoms[(k - 1) * stride..k * stride].iter().sum();
            level += mu * mu;
        }
        measure_factor += 2.0f64.powf(-(n as f64) * beta) * level;
    }
    let bound = (v[0] * unit_measure).abs()
        + dyadic_difference_sum(q, beta, depth)? * measure_factor.sqrt();
    let slack = 1e-12 * bound.abs().max(1.0);
    Ok(DyadicIntegralCheck {
        value,
        bound,
        holds: value.abs() <= bound + slack,
    })
}
