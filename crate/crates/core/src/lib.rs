//! Band-limited friction texture synthesis and perceptual-space analysis.
//!
//! The crate covers the whole loop: render textures from frequency,
//! amplitude and irregularity ([`synthesis`]), check their spectra
//! ([`spectrum`]), score three-round grouping sessions into a similarity
//! matrix ([`grouping`]), embed it with nonmetric MDS ([`mds`]) and relate the
//! embedding back to the engineering parameters ([`space`]). [`session`]
//! runs the protocol live, [`pipeline`] strings the analysis together and
//! [`export`] holds the file formats.

pub mod error;
pub mod export;
pub mod grouping;
pub mod mds;
pub mod pipeline;
pub mod session;
pub mod space;
pub mod spectrum;
pub mod synthesis;

pub use error::{Error, Result};
