//! Completely positive maps between matrix algebras, instruments, and the
//! Wittstock and Egerváry constructions.

mod constructions;
mod instrument;
mod map;

pub use constructions::{
    egervary_unitary_dilation, instrument_from_circuit, swap, wittstock_decompose, wittstock_reconstruct,
    CircuitInstrument,
};
pub use instrument::{povm_instrument, Instrument};
pub use map::{adjoint, apply, compose, dominates, domination_margin, CpMap};
