//! Core algorithms for authenticating integrated-circuit packages from the
//! microstructure of their surfaces.
//!
//! The crate is `no_std` and only needs an allocator. Everything that touches
//! files, processes or threads lives in the `chipprint` companion crate.
//!
//! Modules follow the processing chain:
//!
//! 1. [`surface_sim`] – random package surfaces and a diffuse + specular
//!    renderer for camera clips and flatbed-scanner passes.
//! 2. [`registration`] – phase-correlation alignment (translation, rotation,
//!    scale) followed by an NCC direct-search refinement.
//! 3. [`diffuse_auth`] – norm maps from opposite-direction captures, height
//!    integration, frequency subbands and correlation scores.
//! 4. [`specular_auth`] – masks, observed specular points, the robust
//!    matching score and the gated robust test statistic.
//! 5. [`evaluation`] – pair enumeration, PDF fits, EERs and bootstrapping.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diffuse_auth;
pub mod error;
pub mod evaluation;
pub mod fft;
pub mod grid;
pub mod registration;
pub mod seed;
pub mod specular_auth;
pub mod stats;
pub mod surface_sim;

pub use error::{Error, Result};
pub use grid::Grid;
