//! Exact sampling of fractional Gaussian noise.
//!
//! Increments of fractional Brownian motion over a uniform grid of step `l`
//! form a stationary Gaussian sequence with autocovariance
//!
//! ```text
//! gamma(k) = l^{2H} / 2 * (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H})
//! ```
//!
//! The sampler draws the sequence through the Durbin–Levinson recursion,
//! i.e. an exact O(N^2) factorization of the Toeplitz covariance: each
//! increment is drawn from its exact conditional law given all previous ones.

use rand::Rng;
use rand_distr::StandardNormal;

/// Autocovariance of fractional Gaussian noise at lag `k` for step `l`.
pub fn fgn_cov(hurst: f64, step: f64, k: usize) -> f64 {
    let two_h = 2.0 * hurst;
    let k = k as f64;
    0.5 * step.powf(two_h)
        * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

/// Draws `n` fractional Gaussian noise increments with Hurst index `hurst`
/// over atoms of length `step`.
pub fn sample_fgn<R: Rng + ?Sized>(hurst: f64, step: f64, n: usize, rng: &mut R) -> Vec<f64> {
    debug_assert!(hurst > 0.0 && hurst < 1.0);
    if n == 0 {
        return Vec::new();
    }
    let gamma: Vec<f64> = (0..n).map(|k| fgn_cov(hurst, step, k)).collect();

    let mut out = Vec::with_capacity(n);
    let z0: f64 = rng.sample(StandardNormal);
    out.push(z0 * gamma[0].sqrt());

    // phi holds the current prediction coefficients, v the innovation variance
    let mut phi = vec![0.0f64; n];
    let mut tmp = vec![0.0f64; n];
    let mut v = gamma[0];
    for m in 1..n {
        let mut num = gamma[m];
        for k in 1..m {
            num -= phi[k - 1] * gamma[m - k];
        }
        let refl = num / v;
        tmp[..m - 1].copy_from_slice(&phi[..m - 1]);
        for k in 1..m {
            phi[k - 1] = tmp[k - 1] - refl * tmp[m - 1 - k];
        }
        phi[m - 1] = refl;
        v *= 1.0 - refl * refl;

        let mut mean = 0.0;
        for k in 1..=m {
            mean += phi[k - 1] * out[m - k];
        }
        let z: f64 = rng.sample(StandardNormal);
        out.push(mean + z * v.sqrt());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn sample_cov(paths: &[Vec<f64>], lag: usize) -> f64 {
        let mut acc = 0.0;
        let mut cnt = 0usize;
        for p in paths {
            for i in 0..p.len() - lag {
                acc += p[i] * p[i + lag];
                cnt += 1;
            }
        }
        acc / cnt as f64
    }

    #[test]
    fn covariance_matches_theory() {
        let h = 0.75;
        let n = 128;
        let m = 3000;
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        let paths: Vec<Vec<f64>> = (0..m).map(|_| sample_fgn(h, 1.0, n, &mut rng)).collect();
        for lag in 0..4usize {
            let emp = sample_cov(&paths, lag);
            let theory = fgn_cov(h, 1.0, lag);
            assert!(
                (emp - theory).abs() < 0.03,
                "lag {lag}: emp={emp}, theory={theory}"
            );
        }
    }

    #[test]
    fn step_scaling() {
        // var of one increment over length l is l^{2H}
        let h = 0.6;
        let l = 0.25_f64;
        assert!((fgn_cov(h, l, 0) - l.powf(1.2)).abs() < 1e-15);
    }
}
