//! The exponential weight `β` that makes the mild-form map a contraction.
//!
//! Both bounds have the shape `K · [ε (T-t)]^{1-α} e^{-β (T-t)(1-ε)}` with
//! `K₁ = C/(1-α)` for the value part and `K₂ = C² (1-ε)^{-α}/(1-α)` for the
//! gradient part; each must stay below 1/5 uniformly in `t`.

use crate::error::{Error, Result};

const TARGET: f64 = 0.2;
/// `ε` is placed this fraction of the way from `max(ε₁, ε₂)` to 1.
const EPSILON_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSchedule {
    pub constant: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Value,
    Gradient,
}

fn prefactor(step: Step, c: f64, alpha: f64, eps: f64) -> f64 {
    match step {
        Step::Value => c / (1.0 - alpha),
        Step::Gradient => c * c * (1.0 - eps).powf(-alpha) / (1.0 - alpha),
    }
}

/// The bound at a single time `t`.
pub fn step_expression(
    step: Step,
    c: f64,
    alpha: f64,
    horizon: f64,
    eps: f64,
    beta: f64,
    t: f64,
) -> f64 {
    let tau = horizon - t;
    prefactor(step, c, alpha, eps)
        * (eps * tau).powf(1.0 - alpha)
        * (-beta * tau * (1.0 - eps)).exp()
}

/// Supremum over `t ∈ [0, T]`: interior maximiser `T - t̄ = (1-α)/(β(1-ε))`
/// when it lies inside the interval, the `t = 0` endpoint otherwise.
pub fn step_supremum(step: Step, c: f64, alpha: f64, horizon: f64, eps: f64, beta: f64) -> f64 {
    let k = prefactor(step, c, alpha, eps);
    if beta > 0.0 {
        let tau_star = (1.0 - alpha) / (beta * (1.0 - eps));
        if tau_star <= horizon {
            return k
                * (eps * (1.0 - alpha) / (std::f64::consts::E * beta * (1.0 - eps)))
                    .powf(1.0 - alpha);
        }
    }
    step_expression(step, c, alpha, horizon, eps, beta, 0.0)
}

fn smallest_beta(step: Step, c: f64, alpha: f64, horizon: f64, eps: f64) -> f64 {
    let sup = |b: f64| step_supremum(step, c, alpha, horizon, eps, b);
    if sup(0.0) < TARGET {
        return 0.0;
    }
    let mut hi = 1.0;
    while sup(hi) >= TARGET {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    if sup(lo) < TARGET {
        lo = 0.0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if sup(mid) < TARGET {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `ε₂`: root of `C² ε^{-α} [T(1-ε)]^{1-α}/(1-α) = 1/5`, decreasing in `ε`.
fn epsilon2(c: f64, alpha: f64, horizon: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let g =
        |e: f64| c * c * e.powf(-alpha) * (horizon * (1.0 - e)).powf(1.0 - alpha) / (1.0 - alpha);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < TARGET {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn schedule_beta(c: f64, alpha: f64, horizon: f64) -> Result<BetaSchedule> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::ExponentOutOfRange { alpha });
    }
    if !(c >= 0.0) || !c.is_finite() || !(horizon > 0.0) {
        return Err(Error::arg(format!(
            "schedule needs C >= 0 and T > 0, got C={c}, T={horizon}"
        )));
    }
    let epsilon1 = (1.0 - (1.0 - alpha) / (5.0 * c * horizon.powf(1.0 - alpha)))
        .max(0.0)
        .powf(1.0 / (1.0 - alpha));
    let epsilon2 = epsilon2(c, alpha, horizon);
    let base = epsilon1.max(epsilon2);
    let epsilon = base + EPSILON_MARGIN * (1.0 - base);
    let beta1 = smallest_beta(Step::Value, c, alpha, horizon, epsilon);
    let beta2 = smallest_beta(Step::Gradient, c, alpha, horizon, epsilon);
    Ok(BetaSchedule {
        constant: c,
        alpha,
        horizon,
        epsilon1,
        epsilon2,
        epsilon,
        beta1,
        beta2,
        beta: beta1.max(beta2),
    })
}
