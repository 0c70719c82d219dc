//! Fractional powers of the generator and the parabolic smoothing probe.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::evolution::{CoefficientField, GalerkinAssembler, Propagator};
use crate::fit::{loglog_fit, LogLogFit};
use crate::linalg::{asymmetry, max_abs, sorted_symmetric_eigen, spectral_norm};
use crate::quadrature::gauss_legendre;

const PROBE_MIN_PAIRS: usize = 4;
const PROBE_MIN_DECADES: f64 = 1.5;

/// `M^θ` for a matrix whose spectrum lies in the open right half plane, θ ∈ [0, 1].
///
/// Symmetric input goes through the eigendecomposition. Otherwise the
/// Balakrishnan representation
/// `M^θ = sin(πθ)/π ∫ λ^{θ-1} M (λ + M)^{-1} dλ`
/// is integrated in `u = ln λ` with Gauss-Legendre and first-order tails.
pub fn fractional_power(m: &DMatrix<f64>, theta: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::arg(format!(
            "fractional power {theta} outside [0, 1]"
        )));
    }
    if theta == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    if theta == 1.0 || n == 0 {
        return Ok(m.clone());
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    if asymmetry(m) <= 1e-13 * scale {
        let (vals, vecs) = sorted_symmetric_eigen(m);
        if let Some(bad) = vals.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::arg(format!(
                "fractional power of a matrix with eigenvalue {bad}"
            )));
        }
        let d = DMatrix::from_diagonal(&vals.map(|v| v.powf(theta)));
        return Ok(&vecs * d * vecs.transpose());
    }

    let sv = m.clone().singular_values();
    let (smin, smax) = (sv.min(), sv.max());
    if !(smin > 0.0) {
        return Err(Error::arg("fractional power of a singular matrix"));
    }
    let margin = 40.0 / theta.min(1.0 - theta);
    let (u_lo, u_hi) = (smin.ln() - margin, smax.ln() + margin);
    let ident = DMatrix::<f64>::identity(n, n);
    let (nodes, weights) = gauss_legendre(8);
    let elements = ((u_hi - u_lo) / 0.5).ceil() as usize;
    let width = (u_hi - u_lo) / elements as f64;
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for e in 0..elements {
        let a = u_lo + e as f64 * width;
        for (x, w) in nodes.iter().zip(&weights) {
            let u = a + 0.5 * width * (x + 1.0);
            let lam = u.exp();
            let shifted = &ident * lam + m;
            let resolvent = shifted
                .lu()
                .solve(m)
                .ok_or_else(|| Error::arg("resolvent is singular on the positive axis"))?;
            acc += resolvent * (0.5 * width * w * (theta * u).exp());
        }
    }
    // λ → 0: M (λ + M)^{-1} → I; λ → ∞: M (λ + M)^{-1} → M / λ
    acc += &ident * ((theta * u_lo).exp() / theta);
    acc += m * (((theta - 1.0) * u_hi).exp() / (1.0 - theta));
    Ok(acc * ((std::f64::consts::PI * theta).sin() / std::f64::consts::PI))
}

/// Result of a smoothing-exponent probe.
#[derive(Debug, Clone)]
pub struct ExponentProbe {
    pub theta: f64,
    pub windows: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: LogLogFit,
}

/// Fit the exponent of `‖(A(t) + w)^θ S(t,s)‖₂` against `t - s`.
pub fn smoothing_exponent_probe(
    coeffs: &CoefficientField,
    assembler: &GalerkinAssembler,
    prop: &Propagator,
    theta: f64,
    pairs: &[(f64, f64)],
) -> Result<ExponentProbe> {
    if pairs.len() < PROBE_MIN_PAIRS {
        return Err(Error::arg(format!(
            "smoothing probe needs at least {PROBE_MIN_PAIRS} pairs, got {}",
            pairs.len()
        )));
    }
    let grid = prop.grid();
    let mut windows = Vec::with_capacity(pairs.len());
    let mut norms = Vec::with_capacity(pairs.len());
    for &(s, t) in pairs {
        let (i, j) = (grid.snap(s)?, grid.snap(t)?);
        if j <= i {
            return Err(Error::DegenerateWindow { s, t });
        }
        let tj = grid.time(j);
        let shift = DMatrix::<f64>::identity(prop.dim(), prop.dim()) * coeffs.sector_shift;
        let power = fractional_power(&(assembler.assemble_operator(coeffs, tj)? + shift), theta)?;
        windows.push(tj - grid.time(i));
        norms.push(spectral_norm(&(power * prop.at(i, j))));
    }
    let fit = loglog_fit(&windows, &norms, PROBE_MIN_PAIRS, PROBE_MIN_DECADES)?;
    Ok(ExponentProbe {
        theta,
        windows,
        norms,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{LpExample, SpectralBasis, TimeGrid};

    #[test]
    fn balakrishnan_matches_eigen_route() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 9.0, 2.0, 0.0, 2.0, 30.0]);
        let direct = fractional_power(&m, 0.3).unwrap();
        let mut skew = m.clone();
        skew[(0, 2)] += 1e-9;
        let integral = fractional_power(&skew, 0.3).unwrap();
        assert!(max_abs(&(direct - integral)) < 1e-7);
    }

    #[test]
    fn square_root_squares_back_for_nonsymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[10.0, 3.0, -1.0, 40.0]);
        let r = fractional_power(&m, 0.5).unwrap();
        assert!(max_abs(&(&r * &r - &m)) < 1e-8 * max_abs(&m));
    }

    #[test]
    fn endpoints_are_identity_and_the_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        assert_eq!(fractional_power(&m, 0.0).unwrap(), DMatrix::identity(2, 2));
        assert_eq!(fractional_power(&m, 1.0).unwrap(), m);
    }

    #[test]
    fn probe_refuses_short_pair_lists() {
        let asm = GalerkinAssembler::new(SpectralBasis::new(2).unwrap());
        let field = CoefficientField::lp_example(&LpExample::default(), 1.0).unwrap();
        let prop = Propagator::build(&field, &asm, TimeGrid::uniform(1.0, 4).unwrap(), 1).unwrap();
        let err =
            smoothing_exponent_probe(&field, &asm, &prop, 0.5, &[(0.0, 0.25); 3]).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }
}
