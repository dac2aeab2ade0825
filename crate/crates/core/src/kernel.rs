//! Gaussian heat kernel, its grid convolution, and two analytic envelope
//! estimates realized as checkable inequalities.

use crate::error::{Error, Result};
use crate::quad;
use std::f64::consts::PI;

/// Shipped constant of the spatial-derivative envelope; the envelope is tight
/// at |x| = 2 sqrt(t) with this value.
pub const SHIPPED_C_DX: f64 = 0.171099140156108; // e^{-1/2} / (2 sqrt(pi))
pub const SHIPPED_LAMBDA_DX: f64 = 0.125;

/// Kernel evaluations are cut off beyond this many standard deviations
/// (std = sqrt(2t)); the discarded mass is below 1e-12.
pub const TRUNCATION_STDS: f64 = 8.0;

#[derive(Debug, Clone, Copy)]
pub struct KernelParams {
    pub c_dx: f64,
    pub lambda_dx: f64,
    pub horizon: f64,
}

impl KernelParams {
    pub fn new(c_dx: f64, lambda_dx: f64, horizon: f64) -> Result<Self> {
        if c_dx <= 0.0 || lambda_dx <= 0.0 || horizon <= 0.0 {
            return Err(Error::InvalidInput(
                "kernel params must be strictly positive".into(),
            ));
        }
        Ok(Self {
            c_dx,
            lambda_dx,
            horizon,
        })
    }

    pub fn shipped(horizon: f64) -> Self {
        Self {
            c_dx: SHIPPED_C_DX,
            lambda_dx: SHIPPED_LAMBDA_DX,
            horizon,
        }
    }
}

/// `p(t, x) = (2 sqrt(pi t))^{-1} exp(-x^2 / (4t))`, `t > 0`.
pub fn heat_kernel(t: f64, x: f64) -> Result<f64> {
    if t <= 0.0 || !t.is_finite() {
        return Err(Error::InvalidInput(format!(
            "kernel time must be positive, got {t}"
        )));
    }
    Ok(heat_kernel_unchecked(t, x))
}

#[inline]
pub(crate) fn heat_kernel_unchecked(t: f64, x: f64) -> f64 {
    (-x * x / (4.0 * t)).exp() / (2.0 * (PI * t).sqrt())
}

/// Half-width of the truncated kernel support at time `t`.
pub fn truncation_halfwidth(t: f64) -> f64 {
    TRUNCATION_STDS * (2.0 * t).sqrt()
}

/// Quadrature of the kernel mass over the truncated support.
pub fn kernel_mass(t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::InvalidInput("kernel time must be positive".into()));
    }
    let w = truncation_halfwidth(t);
    Ok(quad::trapezoid(
        |x| heat_kernel_unchecked(t, x),
        -w,
        w,
        4096,
    ))
}

/// Applies the heat semigroup to uniform samples: a trapezoid-rule
/// approximation of `int p(t, x - y) field(y) dy` with the kernel cut off at
/// the truncation width. Outside the sampled interval the field is extended
/// by its edge values, which preserves mass: convolving the constant one
/// field returns one up to the truncation defect.
pub fn kernel_convolve(field: &[f64], dx: f64, t: f64) -> Result<Vec<f64>> {
    if t <= 0.0 {
        return Err(Error::InvalidInput(
            "convolution time must be positive".into(),
        ));
    }
    if field.len() < 2 {
        return Err(Error::InvalidInput(
            "field must carry at least two samples".into(),
        ));
    }
    if dx <= 0.0 {
        return Err(Error::InvalidInput("grid step must be positive".into()));
    }
    let half = ((truncation_halfwidth(t) / dx).ceil() as usize + 2).max(2);
    let weights: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let d = (i as f64 - half as f64) * dx;
            let w = if i == 0 || i == 2 * half { 0.5 } else { 1.0 };
            w * heat_kernel_unchecked(t, d) * dx
        })
        .collect();
    let n = field.len();
    let at = |idx: isize| -> f64 {
        if idx < 0 {
            field[0]
        } else if idx as usize >= n {
            field[n - 1]
        } else {
            field[idx as usize]
        }
    };
    let out = (0..n)
        .map(|j| {
            let mut acc = 0.0;
            for (i, w) in weights.iter().enumerate() {
                acc += w * at(j as isize + i as isize - half as isize);
            }
            acc
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares the exact kernel derivative `|x|/(2t) p(t,x)` against the
/// envelope `(C/t) exp(-lambda x^2 / t)`. A 1e-9 relative slack absorbs
/// rounding at the tangency point |x| = 2 sqrt(t).
pub fn gradient_bound_check(t: f64, x: f64, params: &KernelParams) -> Result<BoundCheck> {
    if t <= 0.0 {
        return Err(Error::InvalidInput("time must be positive".into()));
    }
    let lhs = x.abs() / (2.0 * t) * heat_kernel_unchecked(t, x);
    let rhs = params.c_dx / t * (-params.lambda_dx * x * x / t).exp();
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-9),
    })
}

/// Checks `int_0^t v^{-1} e^{-b/v} dv <= |ln(T/b)| + 1` by evaluating the
/// left side in the substituted form `int_{b/t}^inf e^{-z}/z dz` with
/// adaptive quadrature (absolute tolerance 1e-9).
pub fn log_tail_bound(b: f64, t: f64, horizon: f64) -> Result<BoundCheck> {
    if b <= 0.0 || t <= 0.0 || horizon <= 0.0 || t > horizon {
        return Err(Error::InvalidInput(format!(
            "log-tail check needs 0 < t <= T and b > 0, got b={b}, t={t}, T={horizon}"
        )));
    }
    let lo = b / t;
    // e^{-z}/z is negligible beyond lo + 60
    let hi = lo + 60.0;
    let lhs = quad::adaptive_simpson(|z| (-z).exp() / z, lo, hi, 1e-10);
    let rhs = (horizon / b).ln().abs() + 1.0;
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}
