//! Centered Gaussian measures in finite dimension and their reproducing kernel spaces.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, max_abs, sorted_symmetric_eigen, spectral_norm};

pub const DEFAULT_PINV_TOL: f64 = 1e-10;

/// Centered Gaussian measure with covariance `Q = R Rᵀ`.
///
/// `R = U_r Λ_r^{1/2}` keeps only the eigenpairs above `pinv_tol · λ_max`, so the
/// columns of `R` form an orthonormal basis of the kernel space in which all
/// coordinates below are expressed.
#[derive(Debug, Clone)]
pub struct GaussianState {
    covariance: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    rank: usize,
    pinv_tol: f64,
    factor: DMatrix<f64>,
    factor_pinv: DMatrix<f64>,
}

/// An element of the kernel space together with its coordinates `c`, `h = R c`.
#[derive(Debug, Clone, PartialEq)]
pub struct RkhsVector {
    pub ambient: DVector<f64>,
    pub coords: DVector<f64>,
    pub norm: f64,
}

impl RkhsVector {
    /// `alpha · self + other`, for vectors embedded in the same state.
    pub fn axpy(&self, alpha: f64, other: &RkhsVector) -> RkhsVector {
        let coords = &self.coords * alpha + &other.coords;
        RkhsVector {
            ambient: &self.ambient * alpha + &other.ambient,
            norm: coords.norm(),
            coords,
        }
    }
}

impl GaussianState {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        Self::with_tol(covariance, DEFAULT_PINV_TOL)
    }

    pub fn with_tol(covariance: DMatrix<f64>, pinv_tol: f64) -> Result<Self> {
        let dim = covariance.nrows();
        if covariance.ncols() != dim {
            return Err(Error::arg("covariance must be square"));
        }
        if !(pinv_tol > 0.0 && pinv_tol < 1.0) {
            return Err(Error::arg(format!("pinv_tol {pinv_tol} outside (0, 1)")));
        }
        let asym = asymmetry(&covariance);
        if asym > 1e-12 * max_abs(&covariance).max(1.0) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let (eigenvalues, eigenvectors) = sorted_symmetric_eigen(&covariance);
        let top = eigenvalues.iter().cloned().fold(0.0, f64::max);
        let bottom = eigenvalues.iter().cloned().fold(0.0, f64::min);
        if bottom < -1e-10 * top.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: bottom,
            });
        }
        let cutoff = pinv_tol * top;
        let rank = if top > 0.0 {
            eigenvalues.iter().take_while(|&&l| l > cutoff).count()
        } else {
            0
        };
        let ur = eigenvectors.columns(0, rank).into_owned();
        let sqrt = eigenvalues.rows(0, rank).map(f64::sqrt);
        let factor = &ur * DMatrix::from_diagonal(&sqrt);
        let factor_pinv = DMatrix::from_diagonal(&sqrt.map(|s| 1.0 / s)) * ur.transpose();
        Ok(GaussianState {
            covariance,
            eigenvalues,
            eigenvectors,
            rank,
            pinv_tol,
            factor,
            factor_pinv,
        })
    }

    /// The Dirac measure at the origin.
    pub fn zero(dim: usize) -> Self {
        Self::new(DMatrix::zeros(dim, dim)).expect("zero covariance is valid")
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.dim()
    }

    pub fn pinv_tol(&self) -> f64 {
        self.pinv_tol
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// All eigenvalues, descending.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `R` (dim × rank).
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `R⁺` (rank × dim).
    pub fn factor_pinv(&self) -> &DMatrix<f64> {
        &self.factor_pinv
    }

    /// Distance from `x` to `range(Q)`.
    pub fn range_residual(&self, x: &DVector<f64>) -> f64 {
        (&self.factor * (&self.factor_pinv * x) - x).norm()
    }

    /// Minimal-norm coordinates of `x`, or `OutsideRange` if `x ∉ range(Q)`.
    pub fn embed(&self, x: &DVector<f64>) -> Result<RkhsVector> {
        if x.len() != self.dim() {
            return Err(Error::arg(format!(
                "vector of length {} for dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let coords = &self.factor_pinv * x;
        let residual = (&self.factor * &coords - x).norm();
        if residual > self.pinv_tol * x.norm() {
            return Err(Error::OutsideRange { residual });
        }
        Ok(RkhsVector {
            ambient: x.clone(),
            norm: coords.norm(),
            coords,
        })
    }

    /// The kernel-space element with the given coordinates.
    pub fn from_coords(&self, coords: DVector<f64>) -> RkhsVector {
        assert_eq!(coords.len(), self.rank);
        RkhsVector {
            ambient: &self.factor * &coords,
            norm: coords.norm(),
            coords,
        }
    }

    /// The isometry `φ(h)` evaluated at a state `z`: `⟨c, R⁺ z⟩`.
    pub fn phi(&self, h: &RkhsVector, z: &DVector<f64>) -> f64 {
        h.coords.dot(&(&self.factor_pinv * z))
    }

    /// Cameron-Martin density `exp(φ(h)(z) - |h|²/2)` of the shifted measure.
    pub fn density(&self, h: &RkhsVector, z: &DVector<f64>) -> f64 {
        if h.norm == 0.0 {
            return 1.0;
        }
        (self.phi(h, z) - 0.5 * h.norm * h.norm).exp()
    }

    /// A sample-point map `ξ ↦ x + R ξ` for standard normal coordinates.
    pub fn shift_point(&self, x: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
        x + &self.factor * xi
    }
}

/// Smallest `K` with `Q ⪯ K Q̃`, or `None` when `range(Q) ⊄ range(Q̃)`.
pub fn inclusion_constant(q: &GaussianState, q_tilde: &GaussianState) -> Option<f64> {
    assert_eq!(q.dim(), q_tilde.dim());
    if q.rank() == 0 {
        return Some(0.0);
    }
    let r = q.factor();
    let scale = spectral_norm(r);
    let residual = spectral_norm(&(q_tilde.factor() * (q_tilde.factor_pinv() * r) - r));
    if residual > q_tilde.pinv_tol().max(q.pinv_tol()) * scale * 1e2 {
        return None;
    }
    Some(spectral_norm(&(q_tilde.factor_pinv() * r)).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_covariance_norm_is_euclidean() {
        let g = GaussianState::new(DMatrix::identity(3, 3)).unwrap();
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let h = g.embed(&x).unwrap();
        assert_relative_eq!(h.norm, x.norm(), max_relative = 1e-14);
        let z = DVector::from_vec(vec![0.3, 0.1, -4.0]);
        assert_relative_eq!(g.phi(&h, &z), x.dot(&z), max_relative = 1e-14);
    }

    #[test]
    fn degenerate_covariance_embeds_range_only() {
        let g =
            GaussianState::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0]))).unwrap();
        assert_eq!(g.rank(), 1);
        let h = g.embed(&DVector::from_vec(vec![2.0, 0.0])).unwrap();
        assert_relative_eq!(h.norm, 1.0, max_relative = 1e-14);
        assert_relative_eq!(h.coords[0].abs(), 1.0, max_relative = 1e-14);
        assert!(matches!(
            g.embed(&DVector::from_vec(vec![0.0, 1.0])),
            Err(Error::OutsideRange { .. })
        ));
    }

    #[test]
    fn rejects_invalid_covariances() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            GaussianState::new(asym),
            Err(Error::NotSymmetric { .. })
        ));
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            GaussianState::new(indef),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn zero_measure_has_rank_zero() {
        let g = GaussianState::zero(3);
        assert_eq!(g.rank(), 0);
        let h = g.embed(&DVector::zeros(3)).unwrap();
        assert_eq!(g.density(&h, &DVector::from_vec(vec![1.0, 2.0, 3.0])), 1.0);
    }

    #[test]
    fn inclusion_constant_matches_diagonal_ratio() {
        let q =
            GaussianState::new(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).unwrap();
        let qt =
            GaussianState::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 6.0]))).unwrap();
        assert_relative_eq!(
            inclusion_constant(&q, &qt).unwrap(),
            2.0,
            max_relative = 1e-12
        );
        let thin =
            GaussianState::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).unwrap();
        assert!(inclusion_constant(&q, &thin).is_none());
        assert_relative_eq!(
            inclusion_constant(&thin, &q).unwrap(),
            0.5,
            max_relative = 1e-12
        );
    }
}
