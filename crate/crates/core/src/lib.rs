//! Memetic binary topology optimization over method-of-moments operator
//! bundles.
//!
//! A design problem is an [`OperatorBundle`]: dense impedance, radiation,
//! reactance, stored-energy and loss operators over N basis functions plus
//! masks saying which DOF are fixed and which the optimizer may toggle. A
//! [`Word`] selects the enabled DOF. The [`reanalysis`] kernel keeps the
//! inverse of the enabled sub-system up to date through rank-one updates so
//! that every single-DOF toggle is evaluated without re-factorization;
//! [`local`] turns that into a greedy descent and [`global`] wraps it into a
//! genetic algorithm. The [`bounds`] module computes the physical limits the
//! optimized designs are measured against.

pub mod bounds;
pub mod error;
pub mod global;
pub mod io;
pub mod linalg;
pub mod local;
pub mod model;
pub mod objectives;
pub mod opgen;
pub mod oracle;
pub mod reanalysis;

pub use error::{Error, Result};
pub use model::{materialize, Meta, ObjectiveKind, ObjectiveSpec, OperatorBundle, RunConfig, Word};
