//! Evolution family on a nested time grid.
//!
//! Each grid cell is split into `substeps_per_cell` equal substeps; on every
//! substep the generator is frozen at the substep midpoint, so
//! `S <- exp(-h A(r + h/2)) S`. All grid-to-grid propagators are products of
//! the same cell matrices, which makes `S(t,s) = S(t,r) S(r,s)` hold to
//! round-off for grid-aligned times.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::evolution::{CoefficientField, GalerkinAssembler};
use crate::linalg::expm;

/// Strictly increasing time points `0 = t_0 < ... < t_M = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

const SNAP_TOL: f64 = 1e-12;

impl TimeGrid {
    pub fn uniform(horizon: f64, cells: usize) -> Result<Self> {
        Self::graded(horizon, cells, 1.0)
    }

    /// Grid clustered toward the horizon: `t_j = T (1 - (1 - j/M)^power)`.
    pub fn graded(horizon: f64, cells: usize, power: f64) -> Result<Self> {
        if cells == 0 {
            return Err(Error::arg("a time grid needs at least one cell"));
        }
        if !(horizon > 0.0) || !(power >= 1.0) {
            return Err(Error::arg(format!(
                "invalid grid: horizon {horizon}, grading power {power} (needs >= 1)"
            )));
        }
        let m = cells as f64;
        let mut points: Vec<f64> = (0..=cells)
            .map(|j| horizon * (1.0 - (1.0 - j as f64 / m).powf(power)))
            .collect();
        points[0] = 0.0;
        points[cells] = horizon;
        Self::from_points(points)
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || points[0] != 0.0 {
            return Err(Error::arg(
                "a time grid starts at 0 and has at least two points",
            ));
        }
        if !points.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::arg("time grid points must be strictly increasing"));
        }
        Ok(TimeGrid { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn cells(&self) -> usize {
        self.points.len() - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// Nearest grid index; off-grid requests are snapped with a warning.
    pub fn snap(&self, t: f64) -> Result<usize> {
        let horizon = self.horizon();
        let tol = SNAP_TOL * horizon.max(1.0);
        if !(t >= -tol && t <= horizon + tol) {
            return Err(Error::arg(format!("time {t} outside [0, {horizon}]")));
        }
        let k = self.points.partition_point(|&p| p < t);
        let idx = if k == 0 {
            0
        } else if k >= self.points.len() {
            self.points.len() - 1
        } else if (self.points[k] - t) <= (t - self.points[k - 1]) {
            k
        } else {
            k - 1
        };
        if (self.points[idx] - t).abs() > tol {
            log::warn!("time {t} is off the grid; snapped to {}", self.points[idx]);
        }
        Ok(idx)
    }
}

/// A substep with its generator frozen at the midpoint.
#[derive(Debug, Clone)]
pub struct Substep {
    pub start: f64,
    pub width: f64,
    /// A(start + width/2)
    pub generator: DMatrix<f64>,
    /// exp(-width * generator)
    pub step: DMatrix<f64>,
}

impl Substep {
    pub fn midpoint(&self) -> f64 {
        self.start + 0.5 * self.width
    }
}

#[derive(Debug, Clone)]
pub struct Propagator {
    grid: TimeGrid,
    substeps_per_cell: usize,
    dim: usize,
    substeps: Vec<Substep>,
    /// S(t_j, t_i) for i <= j, stored at j (j + 1) / 2 + i
    cache: Vec<DMatrix<f64>>,
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

impl Propagator {
    pub fn build(
        coeffs: &CoefficientField,
        assembler: &GalerkinAssembler,
        grid: TimeGrid,
        substeps_per_cell: usize,
    ) -> Result<Self> {
        if substeps_per_cell == 0 {
            return Err(Error::arg("substeps_per_cell must be positive"));
        }
        if (grid.horizon() - coeffs.horizon).abs() > SNAP_TOL * coeffs.horizon.max(1.0) {
            return Err(Error::arg(format!(
                "grid horizon {} differs from coefficient horizon {}",
                grid.horizon(),
                coeffs.horizon
            )));
        }
        let dim = assembler.dim();
        let mut substeps = Vec::with_capacity(grid.cells() * substeps_per_cell);
        let mut cell_steps = Vec::with_capacity(grid.cells());
        for c in 0..grid.cells() {
            let (lo, hi) = (grid.time(c), grid.time(c + 1));
            let h = (hi - lo) / substeps_per_cell as f64;
            let mut cell = DMatrix::identity(dim, dim);
            for k in 0..substeps_per_cell {
                let start = lo + k as f64 * h;
                let generator = assembler.assemble_operator(coeffs, start + 0.5 * h)?;
                let step = expm(&(&generator * -h));
                cell = &step * cell;
                substeps.push(Substep {
                    start,
                    width: h,
                    generator,
                    step,
                });
            }
            cell_steps.push(cell);
        }
        let n = grid.len();
        let mut cache: Vec<DMatrix<f64>> = Vec::with_capacity(n * (n + 1) / 2);
        for j in 0..n {
            for i in 0..=j {
                let m = if i == j {
                    DMatrix::identity(dim, dim)
                } else {
                    &cell_steps[j - 1] * &cache[tri(i, j - 1)]
                };
                cache.push(m);
            }
        }
        Ok(Propagator {
            grid,
            substeps_per_cell,
            dim,
            substeps,
            cache,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn substeps_per_cell(&self) -> usize {
        self.substeps_per_cell
    }

    /// Substeps of grid cell `c` = [t_c, t_{c+1}].
    pub fn cell_substeps(&self, c: usize) -> &[Substep] {
        let k = self.substeps_per_cell;
        &self.substeps[c * k..(c + 1) * k]
    }

    /// S(t_j, t_i) for grid indices i <= j.
    pub fn at(&self, i: usize, j: usize) -> &DMatrix<f64> {
        assert!(
            i <= j && j < self.grid.len(),
            "propagator indices ({i}, {j}) out of order"
        );
        &self.cache[tri(i, j)]
    }

    /// S(t, s) for grid times s <= t (off-grid times snap).
    pub fn propagate(&self, s: f64, t: f64) -> Result<DMatrix<f64>> {
        if s > t {
            return Err(Error::arg(format!(
                "propagate needs s <= t, got s={s}, t={t}"
            )));
        }
        let i = self.grid.snap(s)?;
        let j = self.grid.snap(t)?;
        Ok(self.at(i, j).clone())
    }

    /// S(r, t_i) for an arbitrary r in [t_i, T], stepping inside the frozen substep
    /// that contains r.
    pub fn propagate_from(&self, i: usize, r: f64) -> Result<DMatrix<f64>> {
        let t_i = self.grid.time(i);
        if r < t_i || r > self.grid.horizon() * (1.0 + SNAP_TOL) {
            return Err(Error::arg(format!(
                "r={r} outside [{t_i}, {}]",
                self.grid.horizon()
            )));
        }
        let c =
            (self.grid.points().partition_point(|&p| p <= r).max(1) - 1).min(self.grid.cells() - 1);
        if c < i {
            return Ok(DMatrix::identity(self.dim, self.dim));
        }
        let mut s = self.at(i, c).clone();
        for sub in self.cell_substeps(c) {
            if r >= sub.start + sub.width {
                s = &sub.step * s;
            } else {
                let partial = r - sub.start;
                if partial > 0.0 {
                    s = expm(&(&sub.generator * -partial)) * s;
                }
                break;
            }
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{LinearInTime, SpectralBasis};
    use crate::linalg::{max_abs, spectral_norm};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn heat(modes: usize, grid: TimeGrid, substeps: usize) -> Propagator {
        let asm = GalerkinAssembler::new(SpectralBasis::new(modes).unwrap());
        let field = CoefficientField::constant(1.0, 0.0, 0.0, 1.0, grid.horizon()).unwrap();
        Propagator::build(&field, &asm, grid, substeps).unwrap()
    }

    #[test]
    fn grids_are_nested_and_graded_toward_horizon() {
        let g = TimeGrid::graded(1.0, 8, 2.0).unwrap();
        let widths: Vec<f64> = g.points().windows(2).map(|w| w[1] - w[0]).collect();
        assert!(widths.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(g.points()[8], 1.0);
        assert!(TimeGrid::from_points(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::graded(1.0, 0, 1.0).is_err());
    }

    #[test]
    fn snapping_picks_nearest_point() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.snap(0.5).unwrap(), 2);
        assert_eq!(g.snap(0.6).unwrap(), 2);
        assert_eq!(g.snap(0.63).unwrap(), 3);
        assert_eq!(g.snap(1.0).unwrap(), 4);
        assert!(g.snap(1.5).is_err());
    }

    #[test]
    fn identity_on_the_diagonal() {
        let p = heat(3, TimeGrid::uniform(1.0, 8).unwrap(), 2);
        for i in 0..=8 {
            assert_eq!(max_abs(&(p.at(i, i) - DMatrix::identity(3, 3))), 0.0);
        }
        assert_eq!(p.propagate(0.25, 0.25).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn rejects_reversed_times() {
        let p = heat(2, TimeGrid::uniform(1.0, 4).unwrap(), 1);
        assert!(matches!(
            p.propagate(0.75, 0.25),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn heat_semigroup_is_diagonal_exponential() {
        let p = heat(3, TimeGrid::graded(1.0, 16, 2.0).unwrap(), 3);
        let pts = p.grid().points().to_vec();
        for (i, j) in [(0, 16), (3, 9), (10, 11), (0, 1)] {
            let s = p.at(i, j);
            let tau = pts[j] - pts[i];
            for n in 0..3 {
                let lam = ((n + 1) as f64 * PI).powi(2);
                let want = (-lam * tau).exp();
                assert!((s[(n, n)] - want).abs() <= 1e-10, "({i},{j},{n})");
            }
            assert!(max_abs(&(s.clone() - DMatrix::from_diagonal(&s.diagonal()))) <= 1e-10);
        }
    }

    #[test]
    fn linear_in_time_single_mode_closed_form() {
        let asm = GalerkinAssembler::new(SpectralBasis::new(1).unwrap());
        let field = CoefficientField::linear_in_time(&LinearInTime::default(), 1.0).unwrap();
        let p = Propagator::build(&field, &asm, TimeGrid::uniform(1.0, 10).unwrap(), 2).unwrap();
        for j in 0..=10 {
            let t = p.grid().time(j);
            let want = (-PI * PI * (t + 0.5 * t * t)).exp();
            assert!(
                (p.at(0, j)[(0, 0)] - want).abs() < 1e-12 * want.max(1e-300),
                "t={t}"
            );
        }
    }

    #[test]
    fn composition_holds_to_round_off() {
        let asm = GalerkinAssembler::new(SpectralBasis::new(3).unwrap());
        let field = CoefficientField::lp_example(&Default::default(), 1.0).unwrap();
        let p =
            Propagator::build(&field, &asm, TimeGrid::graded(1.0, 12, 2.0).unwrap(), 3).unwrap();
        for i in 0..=12 {
            for j in i..=12 {
                for k in j..=12 {
                    let lhs = p.at(i, k);
                    let rhs = p.at(j, k) * p.at(i, j);
                    assert!(spectral_norm(&(lhs - rhs)) <= 1e-12 * spectral_norm(lhs));
                }
            }
        }
    }

    #[test]
    fn propagate_from_interpolates_inside_cells() {
        let p = heat(2, TimeGrid::uniform(1.0, 4).unwrap(), 2);
        let r = 0.6;
        let s = p.propagate_from(1, r).unwrap();
        for n in 0..2 {
            let lam = ((n + 1) as f64 * PI).powi(2);
            assert!((s[(n, n)] - (-lam * (r - 0.25)).exp()).abs() < 1e-12);
        }
        let end = p.propagate_from(1, 1.0).unwrap();
        assert!(max_abs(&(end - p.at(1, 4))) < 1e-14);
    }

    #[test]
    fn substep_refinement_is_second_order() {
        let asm = GalerkinAssembler::new(SpectralBasis::new(3).unwrap());
        let field = CoefficientField::new(
            "smooth",
            1.0,
            Arc::new(|t, xi| 1.0 + 0.3 * (2.0 * PI * t).sin() * (1.0 + xi)),
            Arc::new(|t, xi| 0.8 * (3.0 * t).cos() * (1.0 - xi)),
            Arc::new(|t, _| 1.0 + t * t),
            Arc::new(|_, _| 1.0),
        )
        .unwrap();
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let s: Vec<DMatrix<f64>> = [4usize, 8, 16, 32]
            .iter()
            .map(|&k| {
                Propagator::build(&field, &asm, grid.clone(), k)
                    .unwrap()
                    .at(0, 4)
                    .clone()
            })
            .collect();
        let d1 = spectral_norm(&(&s[1] - &s[0]));
        let d2 = spectral_norm(&(&s[2] - &s[1]));
        let d3 = spectral_norm(&(&s[3] - &s[2]));
        for ratio in [d1 / d2, d2 / d3] {
            assert!(
                (3.0..=5.0).contains(&ratio),
                "ratio {ratio} (d = {d1:e}, {d2:e}, {d3:e})"
            );
        }
    }
}
