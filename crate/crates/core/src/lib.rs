//! Epstein zeta functions of three-dimensional lattices and periodic sets,
//! Riesz and Lennard-Jones lattice energies, and their minimization over a
//! fundamental domain of lattice shapes.

#![allow(clippy::excessive_precision)]

pub mod cli;
pub mod energy;
pub mod error;
pub mod exec;
pub mod lattice;
pub mod optimize;
pub mod quadrature;
pub mod scan;
pub mod special;
pub mod zeta;

pub use error::{Error, Result};
