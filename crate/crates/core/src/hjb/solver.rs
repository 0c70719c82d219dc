//! The mild-form map `γ` and its Picard iteration.
//!
//! `γ(v)(t_i, x) = P(t_i, T)φ(x) + ∫_{t_i}^T P(t_i, s) H(s, ·, D v(s, ·))(x) ds`
//! on the propagator grid. The value integral uses the trapezoid rule on the
//! grid nodes except on the first cell, where the integrand is frozen at its
//! right end so that values and gradients see the same quadrature. The gradient integrand `D_x P(t_i, s) H_s` carries a
//! `(s - t_i)^{-α}` singularity, so it is written as `(s - t_i)^{-α} k(s)` and
//! integrated with exact moments of the kernel against a piecewise-linear `k`.
//! On the first cell `k` is not available at `s = t_i`; there the integrand
//! itself is frozen at the right end, as in the value rule.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{moments_of_values, Cubature, CubatureRule};
use crate::hjb::{
    log_weighted_norm, ratio_from_logs, schedule_beta, weighted_norm, BetaSchedule, Hamiltonian,
    StateLattice, TerminalFunction, ValueIterate,
};
use crate::ou::OuModel;

pub const DEFAULT_LATTICE_NODES: usize = 9;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 50;
/// Box half-width in units of the largest marginal standard deviation of `Q_{T,0}`.
pub const DEFAULT_BOX_SIGMAS: f64 = 3.0;
const NON_CONTRACTION_STREAK: usize = 3;
const LIPSCHITZ_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct HjbSettings {
    pub alpha: f64,
    pub lattice_nodes: usize,
    pub x_max: Option<f64>,
    pub cubature: Cubature,
    pub tol: f64,
    pub max_iter: usize,
    /// Overrides the scheduled weight.
    pub beta: Option<f64>,
    /// Constant fed to the schedule; defaults to the Hamiltonian's Lipschitz constant.
    pub contraction_constant: Option<f64>,
}

impl HjbSettings {
    pub fn new(alpha: f64) -> Self {
        HjbSettings {
            alpha,
            lattice_nodes: DEFAULT_LATTICE_NODES,
            x_max: None,
            cubature: Cubature::default(),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            beta: None,
            contraction_constant: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖v_{k+1} - v_k‖_β`, possibly underflowing to zero for large `β`.
    pub residuals: Vec<f64>,
    pub log_residuals: Vec<f64>,
    /// Residuals at `β = 0`, which bound the weighted ones from above.
    pub unweighted_residuals: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    pub beta: f64,
    pub schedule: Option<BetaSchedule>,
    pub alpha: f64,
    pub tol: f64,
    pub converged: bool,
    pub clamped_queries: usize,
    pub lipschitz_declared: f64,
    pub lipschitz_observed: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GammaStats {
    /// Gradient interpolation queries that left the box.
    pub clamped: usize,
    pub queries: usize,
}

struct PairCache {
    rule: Arc<CubatureRule>,
    propagator: DMatrix<f64>,
    /// `R ξ_k` as columns
    shifts: DMatrix<f64>,
    /// `Σᵀ`, dim × rank
    sigma_t: DMatrix<f64>,
}

pub struct HjbSolver<'m> {
    model: &'m OuModel,
    hamiltonian: Hamiltonian,
    terminal: TerminalFunction,
    settings: HjbSettings,
    lattice: StateLattice,
    times: Vec<f64>,
    pairs: Vec<Option<PairCache>>,
    value_weights: Vec<Vec<f64>>,
    gradient_weights: Vec<Vec<f64>>,
    sweep: ValueIterate,
    schedule: Option<BetaSchedule>,
    beta: f64,
    lipschitz_observed: f64,
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

/// Weights on `t_i..t_M`, indexed by `j - i`: right rectangle on the first
/// cell, trapezoid on the rest. The weight of `t_i` itself is always zero.
fn value_rule_weights(times: &[f64], i: usize) -> Vec<f64> {
    let m = times.len() - 1;
    let mut w = vec![0.0; m - i + 1];
    if i < m {
        w[1] = times[i + 1] - times[i];
    }
    for j in i + 1..m {
        let half = 0.5 * (times[j + 1] - times[j]);
        w[j - i] += half;
        w[j + 1 - i] += half;
    }
    w
}

/// Weights `c_j` with `∫_{t_i}^T (s - t_i)^{-α} k(s) ds ≈ Σ c_j k(t_j)`, `k`
/// linear on every cell but the first, indexed by `j - i`. On the first cell
/// `(s - t_i)^{-α} k(s)` is taken constant.
fn singular_weights(times: &[f64], i: usize, alpha: f64) -> Vec<f64> {
    let m = times.len() - 1;
    let mut c = vec![0.0; m - i + 1];
    if i == m {
        return c;
    }
    let e1 = 1.0 - alpha;
    let e2 = 2.0 - alpha;
    let b0 = times[i + 1] - times[i];
    c[1] += b0.powf(e1);
    for j in i + 1..m {
        let a = times[j] - times[i];
        let b = times[j + 1] - times[i];
        let width = b - a;
        let m0 = (b.powf(e1) - a.powf(e1)) / e1;
        let m1 = (b.powf(e2) - a.powf(e2)) / e2;
        c[j - i] += (b * m0 - m1) / width;
        c[j + 1 - i] += (m1 - a * m0) / width;
    }
    c
}

impl<'m> HjbSolver<'m> {
    pub fn new(
        model: &'m OuModel,
        hamiltonian: Hamiltonian,
        terminal: TerminalFunction,
        settings: HjbSettings,
    ) -> Result<Self> {
        let alpha = settings.alpha;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::ExponentOutOfRange { alpha });
        }
        let dim = model.dim();
        if let Some(hd) = hamiltonian.dim() {
            if hd != dim {
                return Err(Error::arg(format!(
                    "Hamiltonian drifts have dimension {hd}, state has {dim}"
                )));
            }
        }
        if let TerminalFunction::CosLinear { u } = &terminal {
            if u.len() != dim {
                return Err(Error::arg(format!(
                    "terminal direction has length {}, state has {dim}",
                    u.len()
                )));
            }
        }
        if !(settings.tol > 0.0) || settings.max_iter == 0 {
            return Err(Error::arg(
                "tolerance and iteration budget must be positive",
            ));
        }
        let grid = model.grid();
        let times = grid.points().to_vec();
        let m = grid.cells();
        let horizon = grid.horizon();
        let lipschitz_observed = hamiltonian.check_lipschitz(dim, horizon, LIPSCHITZ_SAMPLES, 0)?;

        let x_max = match settings.x_max {
            Some(x) => x,
            None => {
                let q = model.gramians().covariance(0, m);
                DEFAULT_BOX_SIGMAS * q.diagonal().max().max(0.0).sqrt()
            }
        };
        let lattice = StateLattice::new(dim, settings.lattice_nodes, x_max)?;

        let mut rules: BTreeMap<usize, Arc<CubatureRule>> = BTreeMap::new();
        let mut pairs: Vec<Option<PairCache>> = Vec::with_capacity((m + 1) * (m + 2) / 2);
        for j in 0..=m {
            for i in 0..=j {
                if i == j {
                    pairs.push(None);
                    continue;
                }
                let tr = model.transition(i, j)?;
                let sigma = tr.sigma()?;
                let rank = tr.state().rank();
                let rule = match rules.get(&rank) {
                    Some(r) => r.clone(),
                    None => {
                        let r = Arc::new(settings.cubature.rule(rank)?);
                        rules.insert(rank, r.clone());
                        r
                    }
                };
                pairs.push(Some(PairCache {
                    shifts: tr.state().factor() * rule.points(),
                    propagator: tr.propagator().clone(),
                    sigma_t: sigma.matrix.transpose(),
                    rule,
                }));
            }
        }
        let value_weights = (0..=m).map(|i| value_rule_weights(&times, i)).collect();
        let gradient_weights = (0..=m)
            .map(|i| {
                let mut c = singular_weights(&times, i, alpha);
                for (k, ck) in c.iter_mut().enumerate().skip(1) {
                    *ck *= (times[i + k] - times[i]).powf(alpha);
                }
                c
            })
            .collect();

        let schedule = match settings.beta {
            Some(_) => None,
            None => {
                let c = settings
                    .contraction_constant
                    .unwrap_or_else(|| hamiltonian.lipschitz());
                Some(schedule_beta(c, alpha, horizon)?)
            }
        };
        let beta = settings
            .beta
            .unwrap_or_else(|| schedule.map(|s| s.beta).unwrap_or(0.0));
        if !(beta >= 0.0) {
            return Err(Error::arg(format!("beta must be non-negative, got {beta}")));
        }

        let mut solver = HjbSolver {
            model,
            sweep: ValueIterate::zeros(times.clone(), lattice.clone(), alpha),
            hamiltonian,
            terminal,
            settings,
            lattice,
            times,
            pairs,
            value_weights,
            gradient_weights,
            schedule,
            beta,
            lipschitz_observed,
        };
        solver.sweep = solver.terminal_sweep();
        Ok(solver)
    }

    fn pair(&self, i: usize, j: usize) -> &PairCache {
        self.pairs[tri(i, j)]
            .as_ref()
            .expect("pair cache exists for i < j")
    }

    pub fn model(&self) -> &OuModel {
        self.model
    }

    pub fn lattice(&self) -> &StateLattice {
        &self.lattice
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn schedule(&self) -> Option<&BetaSchedule> {
        self.schedule.as_ref()
    }

    pub fn settings(&self) -> &HjbSettings {
        &self.settings
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn terminal(&self) -> &TerminalFunction {
        &self.terminal
    }

    /// `P(t, T)φ` and its smoothing-formula gradient on every slice.
    pub fn terminal_sweep(&self) -> ValueIterate {
        let m = self.times.len() - 1;
        let d = self.lattice.dim();
        let mut v = ValueIterate::zeros(
            self.times.clone(),
            self.lattice.clone(),
            self.settings.alpha,
        );
        for i in 0..=m {
            let slice: Vec<(f64, Vec<f64>)> = (0..self.lattice.len())
                .into_par_iter()
                .map(|node| {
                    let x = self.lattice.point(node);
                    if i == m {
                        return (self.terminal.value(&x), self.terminal.gradient(&x));
                    }
                    let pc = self.pair(i, m);
                    let center = &pc.propagator * DVector::from_column_slice(&x);
                    let mut y = vec![0.0; d];
                    let values: Vec<f64> = (0..pc.rule.len())
                        .map(|k| {
                            for (a, yd) in y.iter_mut().enumerate() {
                                *yd = center[a] + pc.shifts[(a, k)];
                            }
                            self.terminal.value(&y)
                        })
                        .collect();
                    let mo = moments_of_values(&values, &pc.rule, false);
                    (mo.mean, (&pc.sigma_t * mo.first).as_slice().to_vec())
                })
                .collect();
            for (node, (val, grad)) in slice.into_iter().enumerate() {
                v.values[i][node] = val;
                v.gradients[i][node * d..(node + 1) * d].copy_from_slice(&grad);
            }
        }
        v
    }

    fn check_iterate(&self, v: &ValueIterate) -> Result<()> {
        if v.times != self.times || v.lattice != self.lattice || v.alpha != self.settings.alpha {
            return Err(Error::GridMismatch(
                "iterate does not live on the solver grid".into(),
            ));
        }
        Ok(())
    }

    fn node_update(
        &self,
        v: &ValueIterate,
        i: usize,
        node: usize,
    ) -> (f64, Vec<f64>, usize, usize) {
        let m = self.times.len() - 1;
        let d = self.lattice.dim();
        let x = self.lattice.point(node);
        let mut value = self.sweep.values[i][node];
        let mut grad = self.sweep.gradient(i, node).to_vec();
        if self.hamiltonian.is_zero() {
            return (value, grad, 0, 0);
        }
        let (mut clamped, mut queries) = (0, 0);
        let vw = &self.value_weights[i];
        let gw = &self.gradient_weights[i];
        let xv = DVector::from_column_slice(&x);
        let mut y = vec![0.0; d];
        let mut p = vec![0.0; d];
        for j in i + 1..=m {
            let pc = self.pair(i, j);
            let center = &pc.propagator * &xv;
            let tj = self.times[j];
            let hv: Vec<f64> = (0..pc.rule.len())
                .map(|k| {
                    for (a, yd) in y.iter_mut().enumerate() {
                        *yd = center[a] + pc.shifts[(a, k)];
                    }
                    if j == m {
                        self.terminal.gradient_into(&y, &mut p);
                    } else {
                        queries += 1;
                        if self
                            .lattice
                            .interpolate_into(&v.gradients[j], d, &y, &mut p)
                        {
                            clamped += 1;
                        }
                    }
                    self.hamiltonian.eval(tj, &y, &p)
                })
                .collect();
            let mo = moments_of_values(&hv, &pc.rule, false);
            value += vw[j - i] * mo.mean;
            let k = &pc.sigma_t * mo.first;
            for (g, kk) in grad.iter_mut().zip(k.iter()) {
                *g += gw[j - i] * kk;
            }
        }
        (value, grad, clamped, queries)
    }

    /// One application of the mild-form map.
    pub fn gamma_map(&self, v: &ValueIterate) -> Result<(ValueIterate, GammaStats)> {
        self.check_iterate(v)?;
        let m = self.times.len() - 1;
        let d = self.lattice.dim();
        let mut out = v.clone();
        let mut stats = GammaStats::default();
        for i in 0..=m {
            if i == m {
                out.values[m].clone_from(&self.sweep.values[m]);
                out.gradients[m].clone_from(&self.sweep.gradients[m]);
                continue;
            }
            let slice: Vec<(f64, Vec<f64>, usize, usize)> = (0..self.lattice.len())
                .into_par_iter()
                .map(|node| self.node_update(v, i, node))
                .collect();
            for (node, (val, grad, c, q)) in slice.into_iter().enumerate() {
                out.values[i][node] = val;
                out.gradients[i][node * d..(node + 1) * d].copy_from_slice(&grad);
                stats.clamped += c;
                stats.queries += q;
            }
        }
        Ok((out, stats))
    }

    /// `‖γ(v₁) - γ(v₂)‖_β / ‖v₁ - v₂‖_β`.
    pub fn contraction_probe(
        &self,
        v1: &ValueIterate,
        v2: &ValueIterate,
        beta: f64,
    ) -> Result<f64> {
        let den = log_weighted_norm(v1, v2, beta)?;
        if den == f64::NEG_INFINITY {
            return Err(Error::arg("contraction probe needs distinct iterates"));
        }
        let (g1, _) = self.gamma_map(v1)?;
        let (g2, _) = self.gamma_map(v2)?;
        Ok(ratio_from_logs(log_weighted_norm(&g1, &g2, beta)?, den))
    }

    /// The terminal sweep with seeded uniform perturbations of size `amplitude`
    /// on every slice before the horizon (gradients scaled by `(T-t)^{-α}`).
    pub fn perturbed_iterate(&self, amplitude: f64, seed: u64) -> ValueIterate {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = self.sweep.clone();
        let horizon = v.horizon();
        let m = self.times.len() - 1;
        for i in 0..m {
            let scale = amplitude * (horizon - self.times[i]).powf(-self.settings.alpha);
            v.values[i]
                .iter_mut()
                .for_each(|x| *x += amplitude * rng.random_range(-1.0..1.0));
            v.gradients[i]
                .iter_mut()
                .for_each(|g| *g += scale * rng.random_range(-1.0..1.0));
        }
        v
    }

    pub fn initial_iterate(&self) -> ValueIterate {
        self.sweep.clone()
    }

    /// Picard iteration from the terminal sweep until the unweighted residual
    /// (an upper bound for the weighted one) drops below the tolerance.
    pub fn picard_solve(&self) -> Result<(ValueIterate, SolveReport)> {
        let mut report = SolveReport {
            iterations: 0,
            residuals: Vec::new(),
            log_residuals: Vec::new(),
            unweighted_residuals: Vec::new(),
            contraction_ratios: Vec::new(),
            beta: self.beta,
            schedule: self.schedule,
            alpha: self.settings.alpha,
            tol: self.settings.tol,
            converged: false,
            clamped_queries: 0,
            lipschitz_declared: self.hamiltonian.lipschitz(),
            lipschitz_observed: self.lipschitz_observed,
        };
        let mut v = self.sweep.clone();
        let mut streak = 0;
        for _ in 0..self.settings.max_iter {
            let (next, stats) = self.gamma_map(&v)?;
            report.iterations += 1;
            report.clamped_queries += stats.clamped;
            let log_res = log_weighted_norm(&next, &v, self.beta)?;
            let plain = weighted_norm(&next, &v, 0.0)?;
            if let Some(&prev) = report.log_residuals.last() {
                let ratio = ratio_from_logs(log_res, prev);
                report.contraction_ratios.push(ratio);
                streak = if ratio > 1.0 { streak + 1 } else { 0 };
            }
            report.log_residuals.push(log_res);
            report.residuals.push(log_res.exp());
            report.unweighted_residuals.push(plain);
            v = next;
            log::debug!(
                "picard iteration {}: residual {plain:e} (log weighted {log_res})",
                report.iterations
            );
            if streak >= NON_CONTRACTION_STREAK {
                return Err(Error::NonContraction {
                    report: Box::new(report),
                });
            }
            if plain < self.settings.tol {
                report.converged = true;
                break;
            }
        }
        Ok((v, report))
    }
}
