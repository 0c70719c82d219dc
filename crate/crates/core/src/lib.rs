//! Non-autonomous Ornstein-Uhlenbeck transition operators in a spectral
//! truncation, and mild solutions of semilinear Hamilton-Jacobi equations
//! built on them.
//!
//! The guide in `book/` walks through the modules in order; its snippets
//! run as doc-tests of this crate.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod fit;
pub mod gaussian;
pub mod hjb;
pub mod linalg;
pub mod ou;
pub mod quadrature;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/gaussian.md")]
    mod gaussian {}
    #[doc = include_str!("../../../book/src/ou.md")]
    mod ou {}
    #[doc = include_str!("../../../book/src/hjb.md")]
    mod hjb {}
}
