//! Desingularized cotangent models for integrable systems with non-degenerate singularities.

pub mod error;
pub mod cotangent;
pub mod dynamics;
pub mod exact;
pub mod figure_eight;
pub mod geometry;
pub mod normal_forms;
pub mod parallel;
pub mod profile;
pub mod sampling;
pub mod sphere;
pub mod subspace;
pub mod symplectic;

pub use error::{Error, Result};
