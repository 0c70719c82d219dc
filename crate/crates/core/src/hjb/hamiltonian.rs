//! Hamiltonians and terminal data.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type HamiltonianFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;
pub type StateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type StateGradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// `H(t, x, p)`, Lipschitz in the covector `p`.
#[derive(Clone)]
pub enum Hamiltonian {
    Zero,
    /// `min_u ⟨F_u, p⟩ + h_u` over a finite control set; ties go to the lowest index.
    FiniteControl {
        drifts: Vec<Vec<f64>>,
        costs: Vec<f64>,
    },
    Custom {
        name: String,
        eval: HamiltonianFn,
        lipschitz: f64,
    },
}

impl fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hamiltonian::Zero => write!(f, "Hamiltonian::Zero"),
            Hamiltonian::FiniteControl { drifts, costs } => f
                .debug_struct("Hamiltonian::FiniteControl")
                .field("drifts", drifts)
                .field("costs", costs)
                .finish(),
            Hamiltonian::Custom {
                name, lipschitz, ..
            } => f
                .debug_struct("Hamiltonian::Custom")
                .field("name", name)
                .field("lipschitz", lipschitz)
                .finish(),
        }
    }
}

impl Hamiltonian {
    pub fn finite_control(drifts: Vec<Vec<f64>>, costs: Vec<f64>) -> Result<Self> {
        if drifts.is_empty() || drifts.len() != costs.len() {
            return Err(Error::arg(format!(
                "finite control needs matching non-empty drift ({}) and cost ({}) lists",
                drifts.len(),
                costs.len()
            )));
        }
        let dim = drifts[0].len();
        if drifts.iter().any(|d| d.len() != dim) {
            return Err(Error::arg(
                "all control drifts must have the same dimension",
            ));
        }
        if drifts
            .iter()
            .flatten()
            .chain(&costs)
            .any(|v| !v.is_finite())
        {
            return Err(Error::arg("control drifts and costs must be finite"));
        }
        Ok(Hamiltonian::FiniteControl { drifts, costs })
    }

    /// `⟨q, p⟩ + c`.
    pub fn linear(q: Vec<f64>, c: f64) -> Self {
        let lipschitz = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        Hamiltonian::Custom {
            name: "linear".into(),
            eval: Arc::new(move |_, _, p| c + q.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()),
            lipschitz,
        }
    }

    pub fn constant(c: f64) -> Self {
        Hamiltonian::Custom {
            name: "constant".into(),
            eval: Arc::new(move |_, _, _| c),
            lipschitz: 0.0,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Hamiltonian::Zero => "zero",
            Hamiltonian::FiniteControl { .. } => "finite_control",
            Hamiltonian::Custom { .. } => "custom",
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Hamiltonian::Zero)
    }

    /// State dimension the Hamiltonian was built for, if it fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Hamiltonian::FiniteControl { drifts, .. } => Some(drifts[0].len()),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64], p: &[f64]) -> f64 {
        match self {
            Hamiltonian::Zero => 0.0,
            Hamiltonian::FiniteControl { drifts, costs } => {
                let mut best = f64::INFINITY;
                for (d, c) in drifts.iter().zip(costs) {
                    let v = c + d.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
                    if v < best {
                        best = v;
                    }
                }
                best
            }
            Hamiltonian::Custom { eval, .. } => eval(t, x, p),
        }
    }

    /// Index of the minimizing control (finite control only).
    pub fn minimizer(&self, p: &[f64]) -> Option<usize> {
        match self {
            Hamiltonian::FiniteControl { drifts, costs } => {
                let mut best = (f64::INFINITY, 0);
                for (u, (d, c)) in drifts.iter().zip(costs).enumerate() {
                    let v = c + d.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
                    if v < best.0 {
                        best = (v, u);
                    }
                }
                Some(best.1)
            }
            _ => None,
        }
    }

    /// Declared Lipschitz constant in `p`: `max_u |F_u|` for finite control.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Hamiltonian::Zero => 0.0,
            Hamiltonian::FiniteControl { drifts, .. } => drifts
                .iter()
                .map(|d| d.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
            Hamiltonian::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// Largest observed difference quotient over random `(t, x, p, q)`; errors
    /// if it exceeds the declared constant or a value is not finite.
    pub fn check_lipschitz(
        &self,
        dim: usize,
        horizon: f64,
        samples: usize,
        seed: u64,
    ) -> Result<f64> {
        let declared = self.lipschitz();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut observed: f64 = 0.0;
        for _ in 0..samples {
            let t = rng.random_range(0.0..=horizon);
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (hp, hq) = (self.eval(t, &x, &p), self.eval(t, &x, &q));
            if !hp.is_finite() || !hq.is_finite() {
                return Err(Error::arg(format!("Hamiltonian is not finite at t = {t}")));
            }
            let dist = p
                .iter()
                .zip(&q)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if dist > 0.0 {
                observed = observed.max((hp - hq).abs() / dist);
            }
        }
        if observed > declared * (1.0 + 1e-12) + 1e-14 {
            return Err(Error::arg(format!(
                "Hamiltonian difference quotient {observed} exceeds its Lipschitz constant {declared}"
            )));
        }
        Ok(observed)
    }
}

/// Terminal data `φ` with its gradient.
#[derive(Clone)]
pub enum TerminalFunction {
    /// `cos(⟨u, x⟩)`
    CosLinear {
        u: Vec<f64>,
    },
    /// `min(|x|², cap)`
    BoundedQuadratic {
        cap: f64,
    },
    Constant(f64),
    Custom {
        name: String,
        value: StateFn,
        gradient: StateGradFn,
    },
}

impl fmt::Debug for TerminalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalFunction::CosLinear { u } => write!(f, "CosLinear {{ u: {u:?} }}"),
            TerminalFunction::BoundedQuadratic { cap } => {
                write!(f, "BoundedQuadratic {{ cap: {cap} }}")
            }
            TerminalFunction::Constant(c) => write!(f, "Constant({c})"),
            TerminalFunction::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl TerminalFunction {
    pub fn name(&self) -> &str {
        match self {
            TerminalFunction::CosLinear { .. } => "cos_linear",
            TerminalFunction::BoundedQuadratic { .. } => "bounded_quadratic",
            TerminalFunction::Constant(_) => "constant",
            TerminalFunction::Custom { name, .. } => name,
        }
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            TerminalFunction::CosLinear { u } => {
                u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().cos()
            }
            TerminalFunction::BoundedQuadratic { cap } => {
                x.iter().map(|v| v * v).sum::<f64>().min(*cap)
            }
            TerminalFunction::Constant(c) => *c,
            TerminalFunction::Custom { value, .. } => value(x),
        }
    }

    #[inline]
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            TerminalFunction::CosLinear { u } => {
                let s = -u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().sin();
                for (o, a) in out.iter_mut().zip(u) {
                    *o = s * a;
                }
            }
            TerminalFunction::BoundedQuadratic { cap } => {
                let inside = x.iter().map(|v| v * v).sum::<f64>() < *cap;
                for (o, v) in out.iter_mut().zip(x) {
                    *o = if inside { 2.0 * v } else { 0.0 };
                }
            }
            TerminalFunction::Constant(_) => out.iter_mut().for_each(|o| *o = 0.0),
            TerminalFunction::Custom { gradient, .. } => gradient(x, out),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.gradient_into(x, &mut out);
        out
    }
}
