use std::f64::consts::{LN_2, PI};

use mildhjb::gaussian::{
    gamma_series_diagnostic, inclusion_constant, smooth_convolve, smooth_gradient, smooth_hessian,
    Cubature, GaussianState,
};
use mildhjb::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn gh() -> Cubature {
    Cubature::GaussHermiteTensor { nodes_per_dim: 9 }
}

/// `B Bᵀ` for a square `B` drawn from the given entries.
fn psd(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let b = DMatrix::from_column_slice(n, n, &entries[..n * n]);
    &b * b.transpose()
}

fn matrix_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=3).prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0f64..1.0, n * n)))
}

/// Covariance with spectrum bounded away from zero, so GH stays accurate.
fn well_conditioned(n: usize, entries: &[f64]) -> DMatrix<f64> {
    psd(n, entries) * 0.1 + DMatrix::identity(n, n) * 0.05
}

#[test]
fn convolution_oracles() {
    let q = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.2]);
    let g = GaussianState::new(q.clone()).unwrap();
    let rule = gh().rule(g.rank()).unwrap();
    let x = DVector::zeros(2);
    assert_eq!(smooth_convolve(&g, |_| 2.5, &x, &rule), 2.5);
    let second = smooth_convolve(&g, |z| z.dot(z), &x, &rule);
    assert!((second - q.trace()).abs() < 1e-14);
    let u = DVector::from_vec(vec![1.3, -0.7]);
    let cf = smooth_convolve(&g, |z| u.dot(z).cos(), &x, &rule);
    let want = (-0.5 * u.dot(&(&q * &u))).exp();
    assert!((cf - want).abs() < 1e-10, "{cf} vs {want}");
}

#[test]
fn gradient_and_hessian_oracles() {
    let q = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.2]);
    let g = GaussianState::new(q).unwrap();
    let rule = gh().rule(g.rank()).unwrap();
    let x = DVector::from_vec(vec![0.3, -0.1]);
    assert!(smooth_gradient(&g, |_| 4.0, &x, &rule)
        .iter()
        .all(|&v| v == 0.0));
    assert!(smooth_hessian(&g, |_| 4.0, &x, &rule)
        .iter()
        .all(|&v| v == 0.0));
    // f = φ(h): gradient coordinates are those of h
    let h = g.from_coords(DVector::from_vec(vec![0.4, -1.1]));
    let grad = smooth_gradient(&g, |z| g.phi(&h, &(z - &x)), &x, &rule);
    assert!((grad - &h.coords).norm() < 1e-13);
}

#[test]
fn degenerate_shift_density_is_one() {
    let g = GaussianState::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
    let h = g.from_coords(DVector::zeros(1));
    assert_eq!(g.density(&h, &DVector::from_vec(vec![5.0, 3.0])), 1.0);
    assert!(matches!(
        g.embed(&DVector::from_vec(vec![0.0, 1.0])),
        Err(Error::OutsideRange { .. })
    ));
}

#[test]
fn series_verdicts() {
    let half = gamma_series_diagnostic(0.5, 100_000).unwrap();
    assert!(half.converged);

    let quarter = gamma_series_diagnostic(0.25, 100_000).unwrap();
    assert!(!quarter.converged);
    let want = LN_2 / PI;
    assert!((quarter.doubling_tail - want).abs() <= 0.2 * want);

    // Σ (nπ)^{-4} = ζ(4)/π⁴ = 1/90
    let one = gamma_series_diagnostic(1.0, 100_000).unwrap();
    assert!(one.converged);
    assert!((one.partial_sums[2].1 - 1.0 / 90.0).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moderate_shifts_have_unit_mean_and_shift_moments((n, m) in matrix_strategy(),
                                                      dir in prop::collection::vec(-1.0f64..1.0, 3),
                                                      len in 0.0f64..1.5,
                                                      u in prop::collection::vec(-2.0f64..2.0, 3)) {
        let g = GaussianState::new(psd(n, &m)).unwrap();
        let r = g.rank();
        prop_assume!(r > 0);
        let d = DVector::from_column_slice(&dir[..r]);
        prop_assume!(d.norm() > 1e-3);
        let h = g.from_coords(d.normalize() * len);
        let rule = gh().rule(r).unwrap();
        let x = DVector::zeros(n);
        let mean = smooth_convolve(&g, |z| g.density(&h, z), &x, &rule);
        prop_assert!((mean - 1.0).abs() <= 1e-6, "mean {}", mean);
        // E[<u,z>² ρ_h] = <u,h>² + uᵀQu
        let u = DVector::from_column_slice(&u[..n]);
        let got = smooth_convolve(&g, |z| u.dot(z).powi(2) * g.density(&h, z), &x, &rule);
        let want = u.dot(&h.ambient).powi(2) + u.dot(&(g.covariance() * &u));
        prop_assert!((got - want).abs() <= 1e-6 * (1.0 + want), "{} vs {}", got, want);
    }


    #[test]
    fn phi_is_linear((n, m) in matrix_strategy(), c1 in prop::collection::vec(-2.0f64..2.0, 3),
                     c2 in prop::collection::vec(-2.0f64..2.0, 3), z in prop::collection::vec(-3.0f64..3.0, 3),
                     a in -3.0f64..3.0) {
        let g = GaussianState::new(psd(n, &m)).unwrap();
        let r = g.rank();
        prop_assume!(r > 0);
        let h1 = g.embed(&(g.factor() * DVector::from_column_slice(&c1[..r]))).unwrap();
        let h2 = g.embed(&(g.factor() * DVector::from_column_slice(&c2[..r]))).unwrap();
        let z = DVector::from_column_slice(&z[..n]);
        let lhs = g.phi(&h1.axpy(a, &h2), &z);
        let rhs = a * g.phi(&h1, &z) + g.phi(&h2, &z);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
    }

    #[test]
    fn cameron_martin_density_has_unit_mean((n, m) in matrix_strategy(),
                                            dir in prop::collection::vec(-1.0f64..1.0, 3),
                                            len in 0.0f64..2.0) {
        let g = GaussianState::new(psd(n, &m)).unwrap();
        let r = g.rank();
        prop_assume!(r > 0);
        let d = DVector::from_column_slice(&dir[..r]);
        prop_assume!(d.norm() > 1e-3);
        let h = g.from_coords(d.normalize() * len);
        let rule = gh().rule(r).unwrap();
        let mean = smooth_convolve(&g, |z| g.density(&h, z), &DVector::zeros(n), &rule);
        prop_assert!((mean - 1.0).abs() <= 1e-5, "mean {}", mean);
    }

    #[test]
    fn gradient_matches_finite_differences((n, m) in matrix_strategy(),
                                           x in prop::collection::vec(-1.0f64..1.0, 3),
                                           y in prop::collection::vec(-1.0f64..1.0, 3)) {
        let g = GaussianState::new(well_conditioned(n, &m)).unwrap();
        let rule = gh().rule(g.rank()).unwrap();
        let f = |z: &DVector<f64>| (z.iter().enumerate().map(|(k, v)| (1.0 + 0.5 * k as f64) * v).sum::<f64>()).sin()
            + (-z.norm_squared()).exp();
        let x = DVector::from_column_slice(&x[..n]);
        let cy = DVector::from_column_slice(&y[..g.rank()]);
        prop_assume!(cy.norm() > 1e-2);
        let dir = g.factor() * &cy;
        let grad = smooth_gradient(&g, f, &x, &rule);
        let analytic = grad.dot(&cy);
        let eps = 1e-4;
        let fd = (smooth_convolve(&g, f, &(&x + &dir * eps), &rule)
            - smooth_convolve(&g, f, &(&x - &dir * eps), &rule)) / (2.0 * eps);
        let scale = grad.norm() * cy.norm();
        prop_assert!((analytic - fd).abs() <= 1e-3 * scale.max(1e-3), "{} vs {}", analytic, fd);
    }

    #[test]
    fn hessian_is_symmetric_and_bounded((n, m) in matrix_strategy(),
                                        x in prop::collection::vec(-1.0f64..1.0, 3),
                                        u in prop::collection::vec(-2.0f64..2.0, 3), b in 0.0f64..6.3) {
        let g = GaussianState::new(well_conditioned(n, &m)).unwrap();
        let rule = gh().rule(g.rank()).unwrap();
        let u = DVector::from_column_slice(&u[..n]);
        let x = DVector::from_column_slice(&x[..n]);
        // |f|₀ = 1
        let f = |z: &DVector<f64>| (u.dot(z) + b).sin();
        let h = smooth_hessian(&g, f, &x, &rule);
        prop_assert!((&h - h.transpose()).amax() <= 1e-10);
        let tol = 1e-6;
        prop_assert!(h.norm() <= 2f64.sqrt() + tol, "HS {}", h.norm());
        let op = h.symmetric_eigen().eigenvalues.amax();
        prop_assert!(op <= 2.0 + tol);
        prop_assert!(smooth_gradient(&g, f, &x, &rule).norm() <= 1.0 + tol);
    }

    #[test]
    fn dominated_covariances_embed((n, m) in matrix_strategy(), c in prop::collection::vec(-1.0f64..1.0, 9),
                                   y in prop::collection::vec(-1.0f64..1.0, 3)) {
        let qt = GaussianState::new(psd(n, &m)).unwrap();
        let r = qt.rank();
        prop_assume!(r > 0);
        let cm = DMatrix::from_column_slice(r, r, &c[..r * r]);
        let q = qt.factor() * &cm * cm.transpose() * qt.factor().transpose();
        let q = GaussianState::new(mildhjb::linalg::symmetrize(&q)).unwrap();
        let k = inclusion_constant(&q, &qt);
        prop_assert!(k.is_some());
        let k = k.unwrap();
        let y = DVector::from_column_slice(&y[..n]);
        let v = q.covariance() * &y;
        if v.norm() > 1e-8 * q.covariance().norm().max(1e-300) && q.rank() > 0 {
            prop_assert!(qt.embed(&v).is_ok());
        }
        // witness: along the top direction of Q̃^{+1/2} Q Q̃^{+1/2} the ratio reaches K
        let m = qt.factor_pinv() * q.covariance() * qt.factor_pinv().transpose();
        let eig = m.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let w = qt.factor_pinv().transpose() * eig.eigenvectors.column(top);
        let ratio = w.dot(&(q.covariance() * &w)) / w.dot(&(qt.covariance() * &w));
        prop_assert!(ratio <= k * (1.0 + 1e-6) + 1e-12);
        prop_assert!(ratio >= k * (1.0 - 1e-6) - 1e-12);
    }
}

#[test]
fn inclusion_fails_for_a_witnessed_violation() {
    let qt = GaussianState::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
    let q = GaussianState::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-3])).unwrap();
    // x* = e2: ⟨Q x, x⟩ = 1e-3 > K ⟨Q̃ x, x⟩ = 0 for every K
    assert!(inclusion_constant(&q, &qt).is_none());
    assert!(qt.embed(&DVector::from_vec(vec![0.0, 1e-3])).is_err());
    let q = GaussianState::new(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0])).unwrap();
    let k = inclusion_constant(&q, &qt).unwrap();
    assert!((k - 3.0).abs() < 1e-12);
    // x* = e1 witnesses ⟨Q x, x⟩ = 3 > 2 ⟨Q̃ x, x⟩, so K = 2 is not enough
    assert!(k > 2.0);
}
