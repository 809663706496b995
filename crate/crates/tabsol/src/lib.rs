//! Trainable analogue block with sign-based online learning.
//!
//! This crate models a three-layer neuromorphic regression network: a frozen
//! random projection with systematic offsets feeding a tanh hidden layer, and
//! a single trainable linear readout. The readout can be trained with an
//! online inverse-correlation rule, two of its simplifications, or — the main
//! event — a sign-only rule that runs bit-exactly on per-connection
//! sign/magnitude counters as a digital circuit would implement it.
//!
//! Module map:
//!
//! * [`net`] — the frozen encoder and linear readout.
//! * [`trainers`] — floating-point online rules and an SVD batch baseline.
//! * [`dlb`] — the bit-exact counter emulator and test-vector formatting.
//! * [`bench`] — target functions, schedules, metrics, and the four
//!   experiment sweeps.
//! * [`config`] / [`model`] — TOML job configs and JSON model files.
//!
//! The long-form guide lives in `book/`; its code snippets compile and run as
//! doctests of this crate.

pub mod bench;
pub mod config;
pub mod dlb;
pub mod error;
pub mod model;
pub mod net;
pub mod trainers;

pub use error::{Error, Result};

// Compile and run the guide's code snippets as doctests so the book can
// never drift from the library.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/hardware.md")]
    mod hardware {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
