//! k-player nonlocal games, correlations and their quantum strategies.

mod game;
pub mod library;
mod seesaw;
mod strategy;

pub use game::{
    classical_value, deterministic_correlation, flatten, ns_check, score, unflatten, ClassicalValue, Correlation, Game,
    NsReport, DEFAULT_ENUMERATION_CAP,
};
pub(crate) use game::{input_sensitivity, marginal};
pub use seesaw::{seesaw_quantum_value, SeesawOutcome, SEESAW_GAIN_STOP, SEESAW_MAX_SWEEPS};
pub use strategy::{
    eval_commuting, eval_commuting_ordered, eval_tensor, label_sets, CommutingStrategy, PovmFamily, TensorStrategy,
    COMMUTATION_FACTOR,
};
