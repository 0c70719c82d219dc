//! Partial sums of `Σ (nπ)^{-4σ}`, the square-summability test for the
//! sine-basis noise factor of order σ.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;

/// Relative tail threshold for the convergence verdict.
pub const CONVERGENCE_RTOL: f64 = 1e-4;
pub const DEFAULT_N_MAX: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSeries {
    pub sigma: f64,
    pub n_max: usize,
    /// `(k, S_k)` at `k = n_max/4, n_max/2, n_max`.
    pub partial_sums: Vec<(usize, f64)>,
    /// `S_{n_max} - S_{n_max/2}`
    pub doubling_tail: f64,
    pub converged: bool,
}

pub fn gamma_series_diagnostic(sigma: f64, n_max: usize) -> Result<GammaSeries> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::arg(format!("sigma must be positive, got {sigma}")));
    }
    if n_max < 4 {
        return Err(Error::arg(format!("n_max must be at least 4, got {n_max}")));
    }
    let terms: Vec<f64> = (1..=n_max)
        .map(|n| (n as f64 * PI).powf(-4.0 * sigma))
        .collect();
    let ks = [n_max / 4, n_max / 2, n_max];
    let partial_sums: Vec<(usize, f64)> =
        ks.iter().map(|&k| (k, pairwise_sum(&terms[..k]))).collect();
    let doubling_tail = pairwise_sum(&terms[n_max / 2..]);
    let total = partial_sums[2].1;
    Ok(GammaSeries {
        sigma,
        n_max,
        partial_sums,
        doubling_tail,
        converged: doubling_tail < CONVERGENCE_RTOL * total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_are_nondecreasing() {
        let s = gamma_series_diagnostic(0.4, 1000).unwrap();
        assert!(s.partial_sums.windows(2).all(|w| w[1].1 >= w[0].1));
        assert_eq!(s.partial_sums[0].0, 250);
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        assert!(gamma_series_diagnostic(0.0, 100).is_err());
        assert!(gamma_series_diagnostic(-1.0, 100).is_err());
    }
}
