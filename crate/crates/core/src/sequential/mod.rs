//! Sequential strategies: an assemblage for the first player, instruments
//! for the middle ones and a final POVM, plus their conversion to
//! commuting-operator strategies.

mod convert;
pub mod library;
mod strategy;

pub use convert::{chain_stages, convert, convert_generalized, to_commuting, Conversion, ONS_FACTOR};
pub use strategy::{eval_sequential, ons_check, OnsReport, SequentialStrategy};
