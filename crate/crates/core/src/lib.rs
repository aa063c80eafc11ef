//! Simulation and decoding toolkit for the XYZ color code under biased Pauli noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`gf2kit`]: bit-packed GF(2) rows and matrices, rule-108 evolution, cycle lengths.
//! - [`codegrid`]: the periodic lattice, Pauli frames, syndromes and the plaquette energy.
//! - [`logicals`]: biased (tiling) and string logical operators, size certification.
//! - [`exactdec`]: the exact infinite-bias decoder and its Hoeffding failure bound.
//! - [`rgdec`]: a bias-agnostic renormalization-group cluster decoder.
//! - [`dynamics`]: detailed-balance rates and the n-fold-way event engine.
//! - [`expt`]: memory-time sampling, half-lives, threshold scans and scaling fits.

pub mod codegrid;
pub mod dynamics;
pub mod error;
pub mod exactdec;
pub mod expt;
pub mod gf2kit;
pub mod logicals;
pub mod rgdec;

pub use error::{Error, Result};
