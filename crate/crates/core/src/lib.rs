//! Numerical differential geometry of real hypersurfaces in C².
//!
//! Defining functions are symbolic expression graphs ([`expr`]). From them the
//! crate builds canonical frames and Levi forms ([`cframe`]), samples and
//! projects onto the boundary ([`boundary`]), classifies boundary points
//! ([`classify`]), constructs modified defining functions ([`construct`]) and
//! checks inequalities and Landau-class conditions on samples ([`certify`]).
//! [`gallery`] holds the worked example domains and [`suite`] runs them as a
//! fixed verification matrix.

pub mod boundary;
pub mod certify;
pub mod cframe;
pub mod classify;
pub mod construct;
pub mod error;
pub mod expr;
pub mod gallery;
pub mod jet;
pub mod report;
pub mod suite;

pub use error::{Error, Result};

/// Default tolerance for |r| at boundary points.
pub const TOL_BDRY: f64 = 1e-10;
/// Default relative threshold of the zero test in type detection.
pub const TOL_ZERO: f64 = 1e-7;
/// Default floor below which a denominator counts as degenerate in ratio certificates.
pub const LAMBDA_MIN: f64 = 1e-12;
