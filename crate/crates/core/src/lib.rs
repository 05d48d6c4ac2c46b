//! Numerical laboratory for gradient estimates in the insulated conductivity
//! problem between two nearly touching convex inclusions.
//!
//! The pipeline is geometry → flattening → discretization → solve → analysis;
//! [`cli`] wires the stages together behind scenario files.

pub mod analyze;
pub mod cli;
pub mod discretize;
pub mod geometry;
pub mod linalg;
pub mod problem;
pub mod solve;
pub mod transform;
