//! Deterministic cubature for expectations under the standard normal law.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::quadrature::gauss_hermite_normal;

pub const DEFAULT_NODES_PER_DIM: usize = 9;
pub const DEFAULT_SAMPLES: usize = 20_000;
/// Largest dimension for which the tensor rule is used by default.
pub const TENSOR_MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cubature {
    GaussHermiteTensor { nodes_per_dim: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for Cubature {
    fn default() -> Self {
        Cubature::GaussHermiteTensor {
            nodes_per_dim: DEFAULT_NODES_PER_DIM,
        }
    }
}

impl Cubature {
    /// Tensor Gauss-Hermite up to `TENSOR_MAX_DIM` dimensions, seeded Monte Carlo above.
    pub fn auto(dim: usize, nodes_per_dim: usize, samples: usize, seed: u64) -> Self {
        if dim <= TENSOR_MAX_DIM {
            Cubature::GaussHermiteTensor { nodes_per_dim }
        } else {
            Cubature::MonteCarlo { samples, seed }
        }
    }

    pub fn rule(&self, dim: usize) -> Result<CubatureRule> {
        match *self {
            Cubature::GaussHermiteTensor { nodes_per_dim } => {
                if nodes_per_dim == 0 {
                    return Err(Error::arg("nodes_per_dim must be positive"));
                }
                let total = nodes_per_dim
                    .checked_pow(dim as u32)
                    .filter(|&n| n <= 50_000_000)
                    .ok_or_else(|| {
                        Error::arg(format!("{nodes_per_dim}^{dim} tensor nodes is too many"))
                    })?;
                Ok(CubatureRule::tensor(dim, nodes_per_dim, total))
            }
            Cubature::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(Error::arg("sample count must be positive"));
                }
                Ok(CubatureRule::monte_carlo(dim, samples, seed))
            }
        }
    }
}

/// Points `ξ_k` (as columns) and weights `w_k` approximating `E[f(ξ)]`, `ξ ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubatureRule {
    points: DMatrix<f64>,
    weights: Vec<f64>,
}

impl CubatureRule {
    fn tensor(dim: usize, n: usize, total: usize) -> Self {
        let (x, w) = gauss_hermite_normal(n);
        let mut points = DMatrix::zeros(dim, total);
        let mut weights = Vec::with_capacity(total);
        for k in 0..total {
            let mut rem = k;
            let mut weight = 1.0;
            for d in 0..dim {
                let idx = rem % n;
                rem /= n;
                points[(d, k)] = x[idx];
                weight *= w[idx];
            }
            weights.push(weight);
        }
        let sum = pairwise_sum(&weights);
        weights.iter_mut().for_each(|w| *w /= sum);
        CubatureRule { points, weights }
    }

    fn monte_carlo(dim: usize, samples: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = DMatrix::from_fn(dim, samples, |_, _| StandardNormal.sample(&mut rng));
        CubatureRule {
            points,
            weights: vec![1.0 / samples as f64; samples],
        }
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn point(&self, k: usize) -> DVector<f64> {
        self.points.column(k).into_owned()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ w_k f(ξ_k)` with pairwise summation.
    pub fn integrate(&self, mut f: impl FnMut(&DVector<f64>) -> f64) -> f64 {
        let terms: Vec<f64> = (0..self.len())
            .map(|k| self.weights[k] * f(&self.point(k)))
            .collect();
        pairwise_sum(&terms)
    }
}
