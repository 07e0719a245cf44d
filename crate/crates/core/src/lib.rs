//! Analytical model of spherical large intelligent surfaces.
//!
//! * [`geometry`]: surface geometry, terminal canonicalization and the
//!   pointwise line-of-sight field.
//! * [`rss`]: closed-form received power for caps and disks and the
//!   spherical-versus-planar gain ratio.
//! * [`oracle`]: brute-force surface integration used to check the closed
//!   forms.
//! * [`positioning`]: distance estimators and their Cramér-Rao factors.
//! * [`reflector`]: phase-compensated reflection across two caps.
//! * [`experiments`]: parameter sweeps written as CSV.

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod lattice;
pub mod oracle;
pub mod positioning;
pub mod quadrature;
pub mod reflector;
pub mod rss;
pub mod solve;

pub use error::{LisError, Result};
