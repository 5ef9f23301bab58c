//! Radon–Nikodym derivatives of dominated CP maps, lifting of commutant
//! operators through dilations, and the chain rule.

mod chain;
mod derivative;

pub use chain::{chain2, chain_k, ChainReport, CommutingRepresentation, Family, Stage};
pub use derivative::{commutant_defect, lift, rn_decomposition, rn_derivative, RnDerivative, RnReport};
