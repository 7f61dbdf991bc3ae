//! Numerical toolkit for the adiabatic dynamics of quantum many-body scars.

pub mod agp;
pub mod error;
pub mod hilbert;
pub mod kpm;
pub mod linalg;
pub mod fit;
pub mod fqh_model;
pub mod mps_engine;
pub mod output;
pub mod mps_model;
pub mod spectra;
pub mod dynamics;

pub use error::{Error, Result};
pub use num_complex::Complex64 as c64;
