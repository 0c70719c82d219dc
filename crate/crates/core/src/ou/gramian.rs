//! Covariance Gramians `Q_{t,s}` on the propagator grid.
//!
//! On each substep the generator and the noise factor are frozen at the
//! substep midpoint and the covariance increment of that frozen system is
//! computed exactly with the Van Loan block exponential. Cell increments are
//! then chained with the cached cell propagators, so
//! `Q_{t,s} = Q_{t,r} + S(t,r) Q_{r,s} S(t,r)ᵀ` holds to round-off.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::evolution::{CoefficientField, GalerkinAssembler, Propagator};
use crate::gaussian::GaussianState;
use crate::linalg::{expm, one_norm, symmetrize};

/// `∫_0^h e^{-A(h-τ)} B e^{-Aᵀ(h-τ)} dτ` for constant `A` and symmetric `B`.
///
/// The interval is halved until `‖A‖₁ δ ≤ 1`, the block exponential is taken
/// on the short interval and the result doubled back up, which keeps the
/// growing block `e^{Aᵀδ}` bounded for stiff generators.
pub fn frozen_gramian(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let halvings = (one_norm(a) * h).log2().ceil().max(0.0) as i32;
    let delta = h / 2f64.powi(halvings);
    let mut block = DMatrix::<f64>::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(a * -delta));
    block.view_mut((0, n), (n, n)).copy_from(&(b * delta));
    block
        .view_mut((n, n), (n, n))
        .copy_from(&(a.transpose() * delta));
    let f = expm(&block);
    let mut e = f.view((0, 0), (n, n)).into_owned();
    let mut w = f.view((0, n), (n, n)) * e.transpose();
    for _ in 0..halvings {
        w = &e * &w * e.transpose() + &w;
        e = &e * &e;
    }
    symmetrize(&w)
}

#[derive(Debug, Clone)]
pub struct GramianTable {
    dim: usize,
    cells: Vec<DMatrix<f64>>,
    /// Q(t_j, t_i) for i <= j at j (j + 1) / 2 + i
    table: Vec<DMatrix<f64>>,
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

impl GramianTable {
    pub fn build(
        coeffs: &CoefficientField,
        assembler: &GalerkinAssembler,
        prop: &Propagator,
    ) -> Result<Self> {
        let dim = prop.dim();
        let grid = prop.grid();
        let mut cells = Vec::with_capacity(grid.cells());
        for c in 0..grid.cells() {
            let mut q = DMatrix::<f64>::zeros(dim, dim);
            for sub in prop.cell_substeps(c) {
                let g = assembler.noise_matrix(coeffs, sub.midpoint());
                let ggt = &g * g.transpose();
                let w = frozen_gramian(&sub.generator, &ggt, sub.width);
                q = &sub.step * q * sub.step.transpose() + w;
            }
            cells.push(symmetrize(&q));
        }
        let n = grid.len();
        let mut table: Vec<DMatrix<f64>> = Vec::with_capacity(n * (n + 1) / 2);
        for j in 0..n {
            for i in 0..=j {
                let q = if i == j {
                    DMatrix::zeros(dim, dim)
                } else {
                    let step = prop.at(j - 1, j);
                    symmetrize(&(step * &table[tri(i, j - 1)] * step.transpose() + &cells[j - 1]))
                };
                table.push(q);
            }
        }
        Ok(GramianTable { dim, cells, table })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Covariance increment of grid cell `c`.
    pub fn cell(&self, c: usize) -> &DMatrix<f64> {
        &self.cells[c]
    }

    /// `Q_{t_j, t_i}` for grid indices `i <= j`.
    pub fn covariance(&self, i: usize, j: usize) -> &DMatrix<f64> {
        assert!(i <= j, "gramian indices ({i}, {j}) out of order");
        &self.table[tri(i, j)]
    }

    pub fn state(&self, i: usize, j: usize, pinv_tol: f64) -> Result<GaussianState> {
        GaussianState::with_tol(self.covariance(i, j).clone(), pinv_tol)
    }
}
