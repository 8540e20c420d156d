//! Oriented point clouds: the reconstruction input.

mod io;
mod normals;

pub use io::{
    fmt_f64, load_cloud, parse_cloud, read_mesh, write_cloud, write_mesh, write_polylines,
    CloudFormat, MeshFormat,
};
pub use normals::{estimate_normals, estimate_normals_with_tree, perturb_normals, NormalEstimate};

use crate::error::{Error, Result};
use crate::Point;

/// Points with one normal each. Normals are unit length unless the cloud was
/// produced by [`perturb_normals`], which deliberately leaves noise in them.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientedPointCloud<const D: usize> {
    points: Vec<Point<D>>,
    normals: Vec<Point<D>>,
}

impl<const D: usize> OrientedPointCloud<D> {
    /// Validates the data and normalizes every normal.
    pub fn new(points: Vec<Point<D>>, normals: Vec<Point<D>>) -> Result<Self> {
        let mut cloud = Self::from_raw(points, normals)?;
        for (i, n) in cloud.normals.iter_mut().enumerate() {
            let len = n.norm();
            if len == 0.0 {
                return Err(Error::InvalidParameter(format!("normal {i} has zero length")));
            }
            *n /= len;
        }
        Ok(cloud)
    }

    /// Validates the data but keeps normals as given.
    pub fn from_raw(points: Vec<Point<D>>, normals: Vec<Point<D>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if points.len() != normals.len() {
            return Err(Error::InvalidParameter(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        let all_finite = |v: &[Point<D>]| v.iter().all(|p| p.iter().all(|c| c.is_finite()));
        if !all_finite(&points) || !all_finite(&normals) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(OrientedPointCloud { points, normals })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        D
    }

    pub fn points(&self) -> &[Point<D>] {
        &self.points
    }

    pub fn normals(&self) -> &[Point<D>] {
        &self.normals
    }

    pub fn into_parts(self) -> (Vec<Point<D>>, Vec<Point<D>>) {
        (self.points, self.normals)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Point<D>, Point<D>) {
        bounds_of(&self.points)
    }
}

pub(crate) fn bounds_of<const D: usize>(points: &[Point<D>]) -> (Point<D>, Point<D>) {
    let mut lo = Point::<D>::repeat(f64::INFINITY);
    let mut hi = Point::<D>::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Positions with optional normals, as read from a file.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet<const D: usize> {
    pub points: Vec<Point<D>>,
    pub normals: Option<Vec<Point<D>>>,
}

impl<const D: usize> PointSet<D> {
    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn into_oriented(self) -> Result<OrientedPointCloud<D>> {
        match self.normals {
            Some(normals) => OrientedPointCloud::new(self.points, normals),
            None => Err(Error::MissingNormals),
        }
    }
}

/// A point set whose dimension is only known after reading the file.
#[derive(Clone, Debug, PartialEq)]
pub enum LoadedCloud {
    Planar(PointSet<2>),
    Spatial(PointSet<3>),
}

impl LoadedCloud {
    pub fn dim(&self) -> usize {
        match self {
            LoadedCloud::Planar(_) => 2,
            LoadedCloud::Spatial(_) => 3,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            LoadedCloud::Planar(p) => p.points.len(),
            LoadedCloud::Spatial(p) => p.points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_normals(&self) -> bool {
        match self {
            LoadedCloud::Planar(p) => p.has_normals(),
            LoadedCloud::Spatial(p) => p.has_normals(),
        }
    }
}
