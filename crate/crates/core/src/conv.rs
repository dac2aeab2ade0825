//! FFT-backed linear convolution used by the solver hot paths.
//!
//! All sequences are zero-padded to a shared power-of-two length, so the
//! circular product equals the linear convolution whenever the operand
//! supports fit inside the padding. Results agree with the direct sums to
//! roundoff and are validated against them in tests.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

#[derive(Clone)]
pub struct Plans {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Plans {
    pub fn new(len: usize) -> Self {
        debug_assert!(len.is_power_of_two());
        let mut planner = FftPlanner::new();
        Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Transform of `real`, zero-padded to the plan length.
    pub fn forward_real(&self, real: &[f64]) -> Vec<Complex64> {
        debug_assert!(real.len() <= self.len);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (b, &r) in buf.iter_mut().zip(real) {
            *b = Complex64::new(r, 0.0);
        }
        self.fwd.process(&mut buf);
        buf
    }

    /// Inverse transform; returns the real parts scaled by 1/len.
    pub fn inverse_real(&self, mut freq: Vec<Complex64>) -> Vec<f64> {
        debug_assert_eq!(freq.len(), self.len);
        self.inv.process(&mut freq);
        let scale = 1.0 / self.len as f64;
        freq.into_iter().map(|c| c.re * scale).collect()
    }
}

/// `acc += w * a * b`, pointwise.
pub fn multiply_accumulate(acc: &mut [Complex64], a: &[Complex64], b: &[Complex64], w: f64) {
    for ((acc, &x), &y) in acc.iter_mut().zip(a).zip(b) {
        *acc += x * y * w;
    }
}

/// Full linear convolution `out[m] = sum_k a[k] b[m-k]`, length a+b-1.
pub fn convolve_full(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let plans = Plans::new(next_pow2(out_len));
    let fa = plans.forward_real(a);
    let fb = plans.forward_real(b);
    let mut prod = vec![Complex64::new(0.0, 0.0); plans.len()];
    multiply_accumulate(&mut prod, &fa, &fb, 1.0);
    let mut out = plans.inverse_real(prod);
    out.truncate(out_len);
    out
}
