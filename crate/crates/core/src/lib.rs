//! Isometric flow of G2-structures on flat 7-tori.
//!
//! The G2-structures in one isometric class are parametrized by unit spinor
//! fields ψ = U·ψ̄ + uψ̄. The flow ψ̇ = div T · ψ is the negative gradient of
//! E = ½∫|T|², and this crate integrates it on periodic grids together with
//! the variational and spectral checks that go with it.

pub mod algebra;
pub mod analysis;
pub mod config;
pub mod error;
pub mod dictionary;
pub mod flow;
pub mod grid;
pub mod registry;
pub mod verify;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
