//! Ornstein-Uhlenbeck transition operators driven by the evolution family.

mod gramian;
mod model;

pub use gramian::{frozen_gramian, GramianTable};
pub use model::{
    default_alpha_pairs, sample_triples, AlphaFit, OuModel, SigmaMap, Transition,
    ALPHA_MIN_DECADES, ALPHA_MIN_PAIRS,
};
