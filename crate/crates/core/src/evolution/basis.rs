use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::evolution::CoefficientField;
use crate::quadrature::composite_gauss_legendre;

/// Dirichlet sine basis `e_n(xi) = sqrt(2) sin(n pi xi)`, n = 1..N, with
/// Laplacian eigenvalues `(n pi)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    modes: usize,
    eigenvalues: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::arg("the spectral basis needs at least one mode"));
        }
        let eigenvalues = (1..=modes).map(|n| (n as f64 * PI).powi(2)).collect();
        Ok(SpectralBasis { modes, eigenvalues })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `e_n(xi)` for the 1-based mode index n.
    pub fn function(&self, n: usize, xi: f64) -> f64 {
        SQRT_2 * (n as f64 * PI * xi).sin()
    }

    pub fn derivative(&self, n: usize, xi: f64) -> f64 {
        SQRT_2 * n as f64 * PI * (n as f64 * PI * xi).cos()
    }
}

/// Galerkin projection of the coefficient operators onto a [`SpectralBasis`].
///
/// Entries are computed with a composite Gauss–Legendre rule (8 nodes per
/// element, 4N elements); basis values at the nodes are tabulated once.
#[derive(Debug, Clone)]
pub struct GalerkinAssembler {
    basis: SpectralBasis,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// values[q * N + (n-1)] = e_n(node_q)
    values: Vec<f64>,
    derivatives: Vec<f64>,
}

pub const NODES_PER_ELEMENT: usize = 8;

impl GalerkinAssembler {
    pub fn new(basis: SpectralBasis) -> Self {
        let n = basis.modes();
        let (nodes, weights) = composite_gauss_legendre(NODES_PER_ELEMENT, 4 * n, 0.0, 1.0);
        let mut values = Vec::with_capacity(nodes.len() * n);
        let mut derivatives = Vec::with_capacity(nodes.len() * n);
        for &xi in &nodes {
            for m in 1..=n {
                values.push(basis.function(m, xi));
                derivatives.push(basis.derivative(m, xi));
            }
        }
        GalerkinAssembler {
            basis,
            nodes,
            weights,
            values,
            derivatives,
        }
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.modes()
    }

    pub fn quadrature(&self) -> (&[f64], &[f64]) {
        (&self.nodes, &self.weights)
    }

    /// Galerkin matrix A(t) with entries
    /// `∫ e_m [a (n pi)^2 e_n + b e_n' + c e_n] dxi`.
    pub fn assemble_operator(&self, coeffs: &CoefficientField, t: f64) -> Result<DMatrix<f64>> {
        if !(0.0..=coeffs.horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::arg(format!(
                "time {t} outside [0, {}]",
                coeffs.horizon
            )));
        }
        let n = self.dim();
        let lambda = self.basis.eigenvalues();
        let mut out = DMatrix::zeros(n, n);
        for (q, (&xi, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let a = (coeffs.a)(t, xi);
            if !(a > 0.0) {
                return Err(Error::Ellipticity { t, xi, value: a });
            }
            let b = (coeffs.b)(t, xi);
            let c = (coeffs.c)(t, xi);
            let e = &self.values[q * n..(q + 1) * n];
            let de = &self.derivatives[q * n..(q + 1) * n];
            for col in 0..n {
                let image = (a * lambda[col] + c) * e[col] + b * de[col];
                let wi = w * image;
                for row in 0..n {
                    out[(row, col)] += wi * e[row];
                }
            }
        }
        Ok(out)
    }

    /// Galerkin matrix of multiplication by g(t, ·): `∫ g e_m e_n dxi`.
    pub fn noise_matrix(&self, coeffs: &CoefficientField, t: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (q, (&xi, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let g = (coeffs.g)(t, xi);
            let e = &self.values[q * n..(q + 1) * n];
            for col in 0..n {
                for row in 0..n {
                    out[(row, col)] += w * g * e[row] * e[col];
                }
            }
        }
        out
    }
}
