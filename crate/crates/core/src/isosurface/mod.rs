//! Zero-level extraction from sampled potentials.
//!
//! Nodes with value `< 0` count as inside. Cells touching a node outside the
//! coverage mask are skipped entirely.

mod cubes;
mod squares;
mod tables;

use std::collections::HashSet;

use nalgebra::{Vector2, Vector3};
use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};
use crate::Point;

pub use cubes::marching_cubes;
pub use squares::marching_squares;

/// Regular grid of node values with a coverage mask. Nodes are stored with
/// the first axis varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid<const D: usize> {
    pub origin: Point<D>,
    pub spacing: Point<D>,
    pub dims: [usize; D],
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl<const D: usize> ScalarGrid<D> {
    /// Grid of zeros with every node unmasked.
    pub fn new(origin: Point<D>, spacing: Point<D>, dims: [usize; D]) -> Result<Self> {
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidParameter(format!("grid needs >= 2 nodes per axis, got {dims:?}")));
        }
        if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidParameter("grid spacing must be positive".into()));
        }
        let n = dims.iter().product();
        Ok(ScalarGrid {
            origin,
            spacing,
            dims,
            values: vec![0.0; n],
            mask: vec![false; n],
        })
    }

    /// Grid spanning `[lo, hi]` with `cells` cells per axis, filled with `f`
    /// and fully masked.
    pub fn sample(lo: Point<D>, hi: Point<D>, cells: usize, f: impl Fn(&Point<D>) -> f64) -> Result<Self> {
        if cells < 1 {
            return Err(Error::InvalidParameter("need at least one cell per axis".into()));
        }
        let spacing = (hi - lo) / cells as f64;
        let mut grid = Self::new(lo, spacing, [cells + 1; D])?;
        for i in 0..grid.len() {
            grid.values[i] = f(&grid.position(i));
            grid.mask[i] = true;
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, coords: [usize; D]) -> usize {
        let mut idx = 0;
        for a in (0..D).rev() {
            idx = idx * self.dims[a] + coords[a];
        }
        idx
    }

    pub fn coords(&self, mut index: usize) -> [usize; D] {
        let mut c = [0; D];
        for a in 0..D {
            c[a] = index % self.dims[a];
            index /= self.dims[a];
        }
        c
    }

    pub fn position(&self, index: usize) -> Point<D> {
        let c = self.coords(index);
        Point::<D>::from_fn(|a, _| self.origin[a] + self.spacing[a] * c[a] as f64)
    }

    /// `(min, max)` over covered nodes, `None` if nothing is covered.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .fold(None, |acc, (&v, _)| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }

    pub fn covered_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Triangle mesh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl SurfaceMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    fn edge_set(&self) -> HashSet<(usize, usize)> {
        let mut edges = HashSet::with_capacity(self.triangles.len() * 3 / 2);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges
    }

    /// `V - E + F` over the vertices referenced by triangles.
    pub fn euler_characteristic(&self) -> i64 {
        let used: HashSet<usize> = self.triangles.iter().flatten().copied().collect();
        used.len() as i64 - self.edge_set().len() as i64 + self.triangles.len() as i64
    }

    /// Edges not shared by exactly two triangles. Zero for a closed manifold.
    pub fn boundary_edge_count(&self) -> usize {
        let mut counts = std::collections::HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
            }
        }
        counts.values().filter(|&&c| c != 2).count()
    }

    /// Number of edge-connected components.
    pub fn component_count(&self) -> usize {
        let mut sets = UnionFind::<usize>::new(self.vertices.len());
        for t in &self.triangles {
            sets.union(t[0], t[1]);
            sets.union(t[1], t[2]);
        }
        let roots: HashSet<usize> = self.triangles.iter().map(|t| sets.find(t[0])).collect();
        roots.len()
    }
}

/// Vertex chain of a contour.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polyline {
    pub vertices: Vec<Vector2<f64>>,
    /// Whether the last vertex connects back to the first.
    pub closed: bool,
}

impl Polyline {
    pub fn segment_count(&self) -> usize {
        match self.vertices.len() {
            0 | 1 => 0,
            n if self.closed => n,
            n => n - 1,
        }
    }
}

/// Edge or node a contour vertex was generated on. Crossings that land
/// exactly on a node are keyed by the node so neighboring cells share them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum VertexKey {
    Node(usize),
    Edge(usize, usize),
}

/// Zero crossing between nodes `a` and `b` on opposite sides. Returns the
/// key and the interpolation parameter from the lower-indexed node.
fn crossing(a: usize, b: usize, va: f64, vb: f64) -> (VertexKey, f64) {
    let (a, b, va, vb) = if a < b { (a, b, va, vb) } else { (b, a, vb, va) };
    let t = va / (va - vb);
    if t <= 0.0 {
        (VertexKey::Node(a), 0.0)
    } else if t >= 1.0 {
        (VertexKey::Node(b), 1.0)
    } else {
        (VertexKey::Edge(a, b), t)
    }
}

fn key_position<const D: usize>(grid: &ScalarGrid<D>, key: VertexKey, t: f64) -> Point<D> {
    match key {
        VertexKey::Node(a) => grid.position(a),
        VertexKey::Edge(a, b) => {
            let pa = grid.position(a);
            pa + (grid.position(b) - pa) * t
        }
    }
}
