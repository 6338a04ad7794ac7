//! Imaging convex polyhedral impedance scatterers from a single electric
//! far-field pattern, with test-ball indicators, Mie spectra, a Maxwell
//! reflection operator and a method-of-fundamental-solutions forward solver.

pub mod cli;
pub mod data;
pub mod error;
pub mod fd;
pub mod fields;
pub mod fitting;
pub mod forward;
pub mod geom;
pub mod harmonics;
pub mod indicator;
pub mod io;
pub mod mesh;
pub mod mie;
pub mod quadrature;
pub mod recon;
pub mod reflect;
pub mod specfun;

pub use error::{Error, Result};
