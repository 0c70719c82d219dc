//! Transition operators, minimal-energy maps and kernel-space diagnostics.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evolution::{CoefficientField, GalerkinAssembler, Propagator, SpectralBasis, TimeGrid};
use crate::fit::{decades, loglog_fit, LogLogFit};
use crate::gaussian::{
    moments, sample_values, Cubature, CubatureRule, GaussianState, Moments, DEFAULT_PINV_TOL,
};
use crate::linalg::{expm, spectral_norm};
use crate::ou::GramianTable;
use crate::quadrature::gauss_legendre;

pub const ALPHA_MIN_PAIRS: usize = 6;
pub const ALPHA_MIN_DECADES: f64 = 1.5;

/// Evolution family, Gramians and the range tolerance for one configuration.
#[derive(Debug, Clone)]
pub struct OuModel {
    coeffs: CoefficientField,
    assembler: GalerkinAssembler,
    prop: Propagator,
    grams: GramianTable,
    pinv_tol: f64,
}

/// `Σ(t,s) = R⁺ S(t,s)`, mapping states into kernel-space coordinates of `Q_{t,s}`.
#[derive(Debug, Clone)]
pub struct SigmaMap {
    pub s: f64,
    pub t: f64,
    pub matrix: DMatrix<f64>,
    pub op_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum SigmaFailure {
    Degenerate {
        s: f64,
        t: f64,
    },
    Uncontrollable {
        s: f64,
        t: f64,
        column: usize,
        residual: f64,
    },
}

impl From<SigmaFailure> for Error {
    fn from(f: SigmaFailure) -> Self {
        match f {
            SigmaFailure::Degenerate { s, t } => Error::DegenerateWindow { s, t },
            SigmaFailure::Uncontrollable {
                s,
                t,
                column,
                residual,
            } => Error::NullControllability {
                s,
                t,
                column,
                residual,
            },
        }
    }
}

/// The transition operator between grid times `s = t_i <= t = t_j`:
/// `f ↦ E f(S(t,s) x + Z)`, `Z ~ N(0, Q_{t,s})`.
#[derive(Debug, Clone)]
pub struct Transition {
    pub i: usize,
    pub j: usize,
    pub s: f64,
    pub t: f64,
    propagator: DMatrix<f64>,
    state: GaussianState,
    sigma: std::result::Result<SigmaMap, SigmaFailure>,
}

#[derive(Debug, Clone)]
pub struct AlphaFit {
    pub alpha_hat: f64,
    pub fit: LogLogFit,
    pub windows: Vec<f64>,
    pub norms: Vec<f64>,
}

impl OuModel {
    pub fn new(
        coeffs: CoefficientField,
        modes: usize,
        grid: TimeGrid,
        substeps: usize,
    ) -> Result<Self> {
        let assembler = GalerkinAssembler::new(SpectralBasis::new(modes)?);
        let prop = Propagator::build(&coeffs, &assembler, grid, substeps)?;
        Self::from_parts(coeffs, assembler, prop, DEFAULT_PINV_TOL)
    }

    pub fn from_parts(
        coeffs: CoefficientField,
        assembler: GalerkinAssembler,
        prop: Propagator,
        pinv_tol: f64,
    ) -> Result<Self> {
        let grams = GramianTable::build(&coeffs, &assembler, &prop)?;
        Ok(OuModel {
            coeffs,
            assembler,
            prop,
            grams,
            pinv_tol,
        })
    }

    pub fn coefficients(&self) -> &CoefficientField {
        &self.coeffs
    }

    pub fn assembler(&self) -> &GalerkinAssembler {
        &self.assembler
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }

    pub fn gramians(&self) -> &GramianTable {
        &self.grams
    }

    pub fn grid(&self) -> &TimeGrid {
        self.prop.grid()
    }

    pub fn dim(&self) -> usize {
        self.prop.dim()
    }

    pub fn pinv_tol(&self) -> f64 {
        self.pinv_tol
    }

    /// Gaussian increment law on `[t_i, t_j]`.
    pub fn gaussian(&self, i: usize, j: usize) -> Result<GaussianState> {
        self.check_order(i, j)?;
        self.grams.state(i, j, self.pinv_tol)
    }

    fn check_order(&self, i: usize, j: usize) -> Result<()> {
        let n = self.grid().len();
        if i > j || j >= n {
            return Err(Error::arg(format!(
                "grid indices ({i}, {j}) must satisfy i <= j < {n}"
            )));
        }
        Ok(())
    }

    fn sigma_from(
        &self,
        i: usize,
        j: usize,
        state: &GaussianState,
    ) -> std::result::Result<SigmaMap, SigmaFailure> {
        let (s, t) = (self.grid().time(i), self.grid().time(j));
        if i == j {
            return Err(SigmaFailure::Degenerate { s, t });
        }
        let prop = self.prop.at(i, j);
        for (column, col) in prop.column_iter().enumerate() {
            let col = col.into_owned();
            let residual = state.range_residual(&col);
            if residual > self.pinv_tol * col.norm() {
                return Err(SigmaFailure::Uncontrollable {
                    s,
                    t,
                    column,
                    residual,
                });
            }
        }
        let matrix = state.factor_pinv() * prop;
        let op_norm = spectral_norm(&matrix);
        Ok(SigmaMap {
            s,
            t,
            matrix,
            op_norm,
        })
    }

    /// Minimal-energy map on `[t_i, t_j]`, checking null controllability.
    pub fn sigma_map(&self, i: usize, j: usize) -> Result<SigmaMap> {
        let state = self.gaussian(i, j)?;
        Ok(self.sigma_from(i, j, &state)?)
    }

    pub fn transition(&self, i: usize, j: usize) -> Result<Transition> {
        let state = self.gaussian(i, j)?;
        let sigma = self.sigma_from(i, j, &state);
        Ok(Transition {
            i,
            j,
            s: self.grid().time(i),
            t: self.grid().time(j),
            propagator: self.prop.at(i, j).clone(),
            state,
            sigma,
        })
    }

    /// Largest singular value of `R_{t,s}⁺ S(t,r) R_{r,s}` for `s = t_i < r = t_k < t = t_j`.
    pub fn embedding_norm(&self, i: usize, k: usize, j: usize) -> Result<f64> {
        if !(i < k && k < j && j < self.grid().len()) {
            return Err(Error::arg(format!(
                "embedding triple ({i}, {k}, {j}) must be strictly increasing"
            )));
        }
        let outer = self.gaussian(i, j)?;
        let inner = self.gaussian(i, k)?;
        for (side, g) in [("t,s", &outer), ("r,s", &inner)] {
            if !g.is_full_rank() {
                return Err(Error::RankDeficient {
                    side,
                    rank: g.rank(),
                    dim: g.dim(),
                });
            }
        }
        Ok(spectral_norm(
            &(outer.factor_pinv() * self.prop.at(k, j) * inner.factor()),
        ))
    }

    /// `(t-s)^{-1} (∫_s^t ‖G(r)^{-1} S(r,s)‖² dr)^{1/2}`, the energy bound of the
    /// control `u(r) = (t-s)^{-1} G(r)^{-1} S(r,s) x`, with the same frozen data
    /// as the Gramian.
    pub fn constructive_sigma_bound(&self, i: usize, j: usize) -> Result<f64> {
        self.check_order(i, j)?;
        if i == j {
            return Err(Error::DegenerateWindow {
                s: self.grid().time(i),
                t: self.grid().time(j),
            });
        }
        let (nodes, weights) = gauss_legendre(8);
        let mut integral = 0.0;
        for c in i..j {
            let mut start = self.prop.at(i, c).clone();
            for sub in self.prop.cell_substeps(c) {
                let g = self.assembler.noise_matrix(&self.coeffs, sub.midpoint());
                let g_inv = g.clone().try_inverse().ok_or_else(|| {
                    Error::arg(format!("noise matrix singular at t = {}", sub.midpoint()))
                })?;
                for (x, w) in nodes.iter().zip(&weights) {
                    let tau = 0.5 * sub.width * (x + 1.0);
                    let s_r = expm(&(&sub.generator * -tau)) * &start;
                    integral += 0.5 * sub.width * w * spectral_norm(&(&g_inv * s_r)).powi(2);
                }
                start = &sub.step * start;
            }
        }
        let window = self.grid().time(j) - self.grid().time(i);
        Ok(integral.sqrt() / window)
    }

    /// Fit `‖Σ(t,s)‖ ~ (t-s)^{-α̂}` over the given index pairs.
    pub fn smoothing_alpha_fit(&self, pairs: &[(usize, usize)]) -> Result<AlphaFit> {
        let mut windows = Vec::with_capacity(pairs.len());
        let mut norms = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            let sigma = self.sigma_map(i, j)?;
            windows.push(sigma.t - sigma.s);
            norms.push(sigma.op_norm);
        }
        let fit = loglog_fit(&windows, &norms, ALPHA_MIN_PAIRS, ALPHA_MIN_DECADES)?;
        Ok(AlphaFit {
            alpha_hat: -fit.slope,
            fit,
            windows,
            norms,
        })
    }

    /// `max ‖Σ(t,s)‖ (t-s)^α` over the given pairs.
    pub fn sigma_constant(&self, pairs: &[(usize, usize)], alpha: f64) -> Result<f64> {
        let mut c: f64 = 0.0;
        for &(i, j) in pairs {
            let sigma = self.sigma_map(i, j)?;
            c = c.max(sigma.op_norm * (sigma.t - sigma.s).powf(alpha));
        }
        Ok(c)
    }
}

/// Windows ending at the horizon, shortest first: at least six, extended until
/// they span 1.5 decades or the grid runs out.
pub fn default_alpha_pairs(grid: &TimeGrid) -> Vec<(usize, usize)> {
    let m = grid.cells();
    let mut pairs = Vec::new();
    for i in (0..m).rev() {
        pairs.push((i, m));
        let widths: Vec<f64> = pairs
            .iter()
            .map(|&(a, b)| grid.time(b) - grid.time(a))
            .collect();
        if pairs.len() >= ALPHA_MIN_PAIRS && decades(&widths) >= ALPHA_MIN_DECADES {
            break;
        }
    }
    pairs
}

/// Distinct strictly increasing index triples, reproducible from `seed`.
pub fn sample_triples(
    grid_len: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<(usize, usize, usize)>> {
    if grid_len < 3 {
        return Err(Error::arg("need at least three grid points for triples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let mut idx = sample(&mut rng, grid_len, 3).into_vec();
            idx.sort_unstable();
            (idx[0], idx[1], idx[2])
        })
        .collect())
}

impl Transition {
    pub fn propagator(&self) -> &DMatrix<f64> {
        &self.propagator
    }

    pub fn state(&self) -> &GaussianState {
        &self.state
    }

    pub fn sigma(&self) -> Result<&SigmaMap> {
        self.sigma.as_ref().map_err(|f| f.clone().into())
    }

    /// A cubature rule of matching dimension.
    pub fn rule(&self, cub: &Cubature) -> Result<CubatureRule> {
        cub.rule(self.state.rank())
    }

    fn center(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.propagator * x
    }

    pub fn apply(
        &self,
        f: impl Fn(&DVector<f64>) -> f64,
        x: &DVector<f64>,
        rule: &CubatureRule,
    ) -> f64 {
        moments(&self.state, f, &self.center(x), rule, false).mean
    }

    /// Node values `f(S x + R ξ_k)`.
    pub fn sample(
        &self,
        f: impl Fn(&DVector<f64>) -> f64,
        x: &DVector<f64>,
        rule: &CubatureRule,
    ) -> Vec<f64> {
        sample_values(&self.state, f, &self.center(x), rule)
    }

    /// Value and gradient covector, `p = Σᵀ E[f ξ]`.
    pub fn apply_with_gradient(
        &self,
        f: impl Fn(&DVector<f64>) -> f64,
        x: &DVector<f64>,
        rule: &CubatureRule,
    ) -> Result<(f64, DVector<f64>)> {
        let sigma = self.sigma()?;
        let m = moments(&self.state, f, &self.center(x), rule, false);
        Ok((m.mean, sigma.matrix.transpose() * m.first))
    }

    pub fn gradient(
        &self,
        f: impl Fn(&DVector<f64>) -> f64,
        x: &DVector<f64>,
        rule: &CubatureRule,
    ) -> Result<DVector<f64>> {
        Ok(self.apply_with_gradient(f, x, rule)?.1)
    }

    /// `Σᵀ (E[f ξ ξᵀ] - E f · I) Σ`.
    pub fn hessian(
        &self,
        f: impl Fn(&DVector<f64>) -> f64,
        x: &DVector<f64>,
        rule: &CubatureRule,
    ) -> Result<DMatrix<f64>> {
        let sigma = self.sigma()?;
        let m: Moments = moments(&self.state, f, &self.center(x), rule, true);
        let h =
            sigma.matrix.transpose() * m.hessian.expect("second moments requested") * &sigma.matrix;
        Ok((&h + h.transpose()) * 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pairs_reach_span_on_graded_grids() {
        let grid = TimeGrid::graded(1.0, 16, 3.0).unwrap();
        let pairs = default_alpha_pairs(&grid);
        assert!(pairs.len() >= ALPHA_MIN_PAIRS);
        let widths: Vec<f64> = pairs
            .iter()
            .map(|&(i, j)| grid.time(j) - grid.time(i))
            .collect();
        assert!(decades(&widths) >= ALPHA_MIN_DECADES);
        assert!(pairs.iter().all(|&(_, j)| j == 16));
    }

    #[test]
    fn coarse_grid_cannot_supply_pairs() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        assert_eq!(default_alpha_pairs(&grid).len(), 2);
    }

    #[test]
    fn triples_are_increasing_and_seeded() {
        let a = sample_triples(17, 50, 3).unwrap();
        assert!(a.iter().all(|&(i, k, j)| i < k && k < j && j < 17));
        assert_eq!(a, sample_triples(17, 50, 3).unwrap());
    }

    #[test]
    fn same_time_transition_is_identity() {
        let coeffs = CoefficientField::constant(1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let model = OuModel::new(coeffs, 2, TimeGrid::uniform(1.0, 4).unwrap(), 1).unwrap();
        let tr = model.transition(2, 2).unwrap();
        let rule = tr.rule(&Cubature::default()).unwrap();
        let x = DVector::from_vec(vec![0.3, -0.2]);
        assert_eq!(tr.apply(|z| z[0] * z[1], &x, &rule), x[0] * x[1]);
        assert!(matches!(
            tr.gradient(|z| z[0], &x, &rule),
            Err(Error::DegenerateWindow { .. })
        ));
    }
}
