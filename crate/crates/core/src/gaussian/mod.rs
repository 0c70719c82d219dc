//! Finite-dimensional Gaussian measures, kernel spaces and Gaussian smoothing.

mod cubature;
mod series;
mod smoothing;
mod state;

pub use cubature::{
    Cubature, CubatureRule, DEFAULT_NODES_PER_DIM, DEFAULT_SAMPLES, TENSOR_MAX_DIM,
};
pub use series::{gamma_series_diagnostic, GammaSeries, CONVERGENCE_RTOL, DEFAULT_N_MAX};
pub use smoothing::{
    coords_to_covector, moments, moments_of_values, sample_values, smooth_convolve,
    smooth_gradient, smooth_hessian, sup_estimate, Moments,
};
pub use state::{inclusion_constant, GaussianState, RkhsVector, DEFAULT_PINV_TOL};
