//! Gaussian convolution and its derivatives along the kernel space.
//!
//! With `ψ(x) = E f(x + R ξ)` and `ξ ~ N(0, I_r)`:
//! `Dψ(x) = E[f ξ]` and `D²ψ(x) = E[f ξ ξᵀ] - ψ(x) I`, both in the
//! orthonormal kernel-space coordinates of the state.

use nalgebra::{DMatrix, DVector};

use crate::gaussian::{CubatureRule, GaussianState};
use crate::linalg::pairwise_sum;

/// `E f`, `E[f ξ]` and optionally `E[f ξ ξᵀ] - E[f] I` under a rule.
///
/// Values are centered at the first node before weighting, so constant
/// functions give exactly zero derivatives and an exact mean.
#[derive(Debug, Clone)]
pub struct Moments {
    pub mean: f64,
    pub first: DVector<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

/// Moments of `f(x + R ξ)` over the rule's nodes.
pub fn moments(
    g: &GaussianState,
    f: impl Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
    rule: &CubatureRule,
    with_second: bool,
) -> Moments {
    moments_of_values(&sample_values(g, f, x, rule), rule, with_second)
}

/// `f(x + R ξ_k)` for every node.
pub fn sample_values(
    g: &GaussianState,
    f: impl Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
    rule: &CubatureRule,
) -> Vec<f64> {
    assert_eq!(
        rule.dim(),
        g.rank(),
        "cubature dimension must equal the covariance rank"
    );
    let shifts = g.factor() * rule.points();
    (0..rule.len())
        .map(|k| f(&(x + shifts.column(k))))
        .collect()
}

/// Moments from precomputed node values.
pub fn moments_of_values(values: &[f64], rule: &CubatureRule, with_second: bool) -> Moments {
    let w = rule.weights();
    let pts = rule.points();
    let r = rule.dim();
    let pivot = values.first().copied().unwrap_or(0.0);
    let weighted: Vec<f64> = values.iter().zip(w).map(|(v, w)| (v - pivot) * w).collect();
    let centered_mean = pairwise_sum(&weighted);
    let mut buf = vec![0.0; weighted.len()];
    let first = DVector::from_fn(r, |d, _| {
        for (k, b) in buf.iter_mut().enumerate() {
            *b = weighted[k] * pts[(d, k)];
        }
        pairwise_sum(&buf)
    });
    let hessian = with_second.then(|| {
        let mut m = DMatrix::zeros(r, r);
        for a in 0..r {
            for b in a..r {
                for (k, slot) in buf.iter_mut().enumerate() {
                    *slot = weighted[k] * pts[(a, k)] * pts[(b, k)];
                }
                let mut v = pairwise_sum(&buf);
                if a == b {
                    v -= centered_mean;
                }
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        m
    });
    Moments {
        mean: pivot + centered_mean,
        first,
        hessian,
    }
}

/// `ψ(x) = E f(x + R ξ)`.
pub fn smooth_convolve(
    g: &GaussianState,
    f: impl Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
    rule: &CubatureRule,
) -> f64 {
    moments(g, f, x, rule, false).mean
}

/// Kernel-space gradient of `ψ`, in the coordinates of `g.factor()`.
pub fn smooth_gradient(
    g: &GaussianState,
    f: impl Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
    rule: &CubatureRule,
) -> DVector<f64> {
    moments(g, f, x, rule, false).first
}

/// Kernel-space Hessian of `ψ`, symmetric, rank × rank.
pub fn smooth_hessian(
    g: &GaussianState,
    f: impl Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
    rule: &CubatureRule,
) -> DMatrix<f64> {
    moments(g, f, x, rule, true)
        .hessian
        .expect("second moments requested")
}

/// Maps kernel-space coordinates of a gradient to an ambient covector: `R⁺ᵀ c`.
pub fn coords_to_covector(g: &GaussianState, coords: &DVector<f64>) -> DVector<f64> {
    g.factor_pinv().transpose() * coords
}

/// `max |f|` over the sampled nodes, a lower bound for the sup norm.
pub fn sup_estimate(
    g: &GaussianState,
    f: impl Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
    rule: &CubatureRule,
) -> f64 {
    sample_values(g, f, x, rule)
        .into_iter()
        .fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Cubature;
    use crate::linalg::max_abs;

    fn state() -> GaussianState {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.3, 0.8, 0.1, -0.2, 0.0, 0.5]);
        GaussianState::new(&a * a.transpose()).unwrap()
    }

    #[test]
    fn constants_are_reproduced_exactly() {
        let g = state();
        let rule = Cubature::default().rule(g.rank()).unwrap();
        let x = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        assert_eq!(smooth_convolve(&g, |_| 2.5, &x, &rule), 2.5);
        assert!(smooth_gradient(&g, |_| 2.5, &x, &rule).amax() < 1e-15);
        assert!(max_abs(&smooth_hessian(&g, |_| 2.5, &x, &rule)) < 1e-14);
    }

    #[test]
    fn second_moment_is_trace() {
        let g = state();
        let rule = Cubature::default().rule(g.rank()).unwrap();
        let got = smooth_convolve(&g, |z| z.norm_squared(), &DVector::zeros(3), &rule);
        assert!((got - g.covariance().trace()).abs() < 1e-13);
    }

    #[test]
    fn rank_zero_returns_point_value() {
        let g = GaussianState::zero(2);
        let rule = Cubature::default().rule(0).unwrap();
        let x = DVector::from_vec(vec![1.0, -1.0]);
        assert_eq!(smooth_convolve(&g, |z| z[0] * 3.0 + z[1], &x, &rule), 2.0);
    }
}
