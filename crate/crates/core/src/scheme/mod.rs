//! Transmission scheme.

pub mod engine;
pub mod generation;
pub mod ic6;
pub mod interleaver;
pub mod psin;
pub mod relay;
pub mod symbols;
pub mod transcript;
pub mod two_hop;
pub mod x3;

pub use engine::{Engine, SlotRecord};
pub use symbols::{Held, OrderSymbol, Provenance};
pub use transcript::Transcript;
