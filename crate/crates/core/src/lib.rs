//! Operator-algebra toolkit and nonlocal game workbench.
//!
//! Finite-dimensional Stinespring and GNS dilations, Radon–Nikodym
//! derivatives of completely positive maps, lifts of commutant operators and the chain
//! rule that turns sequential no-signalling strategies into commuting-operator
//! strategies, plus k-player games and a compiled-protocol simulator.

pub mod compiled;
pub mod cpmaps;
pub mod dilation;
pub mod error;
pub mod games;
pub mod numerics;
pub mod radon_nikodym;
pub mod random;
pub mod sequential;

pub use cpmaps::{CpMap, Instrument};
pub use error::{Error, Result};
pub use numerics::{CMatrix, Tolerance};
