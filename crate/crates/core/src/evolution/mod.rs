//! Spectral Galerkin truncation of the time-dependent operators and the
//! evolution family they generate.

mod basis;
mod coefficients;
mod propagator;
mod smoothing;

pub use basis::{GalerkinAssembler, SpectralBasis, NODES_PER_ELEMENT};
pub use coefficients::{
    CoefficientField, CoefficientLattice, FieldFn, LinearInTime, LpExample, NoiseBounds,
};
pub use propagator::{Propagator, Substep, TimeGrid};
pub use smoothing::{fractional_power, smoothing_exponent_probe, ExponentProbe};
