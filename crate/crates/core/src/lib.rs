//! Degrees-of-freedom achievability for multi-hop interference and X networks with delayed CSI.
//!
//! [`numerics`] holds the linear algebra and exact arithmetic, [`network`] the physical model,
//! [`scheme`] the constructive transmission scheme and [`accounting`] the closed-form slot counts.

#![allow(clippy::needless_range_loop)]

pub mod accounting;
pub mod error;
pub mod network;
pub mod numerics;
pub mod scheme;

pub use error::{Error, Result};
pub use network::{ChannelTensor, KnowledgeLedger, NetworkShape, NodeId};
pub use numerics::{ComplexMatrix, RandomStream, Rational};
