//! Dense forests: lattice unions, cut-and-project sets and toral visit sets,
//! with visibility estimators and Diophantine certifiers.

pub mod circle;
pub mod diophantine;
pub mod enumerate;
pub mod error;
pub mod exact;
pub mod forest_gen;
pub mod lattice_core;
pub mod linalg;
pub mod torus_dynamics;
pub mod visibility;

pub use error::{Error, Result};
