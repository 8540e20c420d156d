//! Implicit curve and surface reconstruction from oriented point clouds with
//! curl-free radial basis functions blended by a partition of unity.
//!
//! Pipeline: fit a curl-free interpolant of the normals on each patch,
//! extract its scalar potential, shift it, blend the shifted potentials with
//! Shepard weights and extract the zero-level set.

pub mod cfpu;
pub mod error;
pub mod isosurface;
pub mod kernels;
pub mod partition;
pub mod pointcloud;
pub mod solver;
pub mod spatial;
pub mod synthetic;

pub use error::{Error, Result};

/// Point or vector in `D` dimensions.
pub type Point<const D: usize> = nalgebra::SVector<f64, D>;
