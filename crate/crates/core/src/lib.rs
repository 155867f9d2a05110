//! Numerical geometry at infinity for polynomial families of real level
//! sets: Rabier numbers and asymptotic critical values, links at infinity,
//! sectional Euler characteristics, curvature densities at infinity, and
//! checks of the Gauss-Bonnet relations between them.

// index loops read closer to the formulas in the numerical kernels
#![allow(clippy::needless_range_loop)]

pub mod acv;
pub mod catalog;
pub mod density;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod ode;
pub mod output;
pub mod par;
pub mod poly;
pub mod rabier;
pub mod rng;
pub mod roots;
pub mod spec;
pub mod topology;
pub mod verify;

pub use error::{Error, PolyError, Result};
pub use poly::{parse_polynomial, restrict_to_plane, Jet2, Polynomial};
pub use spec::{FamilyKind, FamilySpec, GridAxis, RadiusSchedule};
