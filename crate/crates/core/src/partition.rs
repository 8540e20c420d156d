//! Overlapping ball cover of the point cloud and its Shepard weights.

use crate::error::{Error, Result};
use crate::spatial::KdTree;
use crate::Point;

/// Radius growth factor applied while a patch is under-populated.
pub const GROWTH: f64 = 1.25;

/// Greedy farthest-point subsampling. The first center is the point nearest
/// the centroid; each next one is the point farthest from those chosen so far
/// (ties go to the lower index). Returns indices into `points`.
pub fn select_centers<const D: usize>(points: &[Point<D>], target: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if target == 0 || target > n {
        return Err(Error::InvalidParameter(format!(
            "patch count {target} must be between 1 and the number of points {n}"
        )));
    }
    let centroid = points.iter().fold(Point::<D>::zeros(), |a, p| a + p) / n as f64;
    let first = argmax(points.iter().map(|p| -(p - centroid).norm_squared()));
    let mut chosen = vec![first];
    let mut dist: Vec<f64> = points.iter().map(|p| (p - points[first]).norm_squared()).collect();
    while chosen.len() < target {
        let next = argmax(dist.iter().copied());
        chosen.push(next);
        let c = points[next];
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min((p - c).norm_squared());
        }
    }
    Ok(chosen)
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Compactly supported C¹ quadratic B-spline on `[0, 1)`.
pub fn kappa(r: f64) -> f64 {
    if r < 0.0 || r >= 1.0 {
        0.0
    } else if r <= 1.0 / 3.0 {
        1.0 - 3.0 * r * r
    } else {
        1.5 * (1.0 - r) * (1.0 - r)
    }
}

/// Patch centers, radii and membership, with a k-d tree over the centers.
#[derive(Clone, Debug)]
pub struct PatchCover<const D: usize> {
    pub centers: Vec<Point<D>>,
    pub radii: Vec<f64>,
    /// Indices of cloud points strictly inside each patch, ascending.
    pub members: Vec<Vec<usize>>,
    tree: KdTree<D>,
    max_radius: f64,
}

/// Initial radii `ρ = (1 + δ)τ/2`, where `τ` is the largest distance from a
/// center to its nearest fellow center. A lone center gets `(1 + δ)` times
/// its distance to the farthest point.
pub fn initial_radius<const D: usize>(centers: &[Point<D>], points: &[Point<D>], delta: f64) -> f64 {
    if centers.len() == 1 {
        let reach = points.iter().map(|p| (p - centers[0]).norm()).fold(0.0, f64::max);
        return (1.0 + delta) * if reach > 0.0 { reach } else { 1.0 };
    }
    let tree = KdTree::new(centers);
    let tau = centers
        .iter()
        .map(|c| tree.nearest_k(c, 2)[1].1)
        .fold(0.0, f64::max);
    (1.0 + delta) * tau / 2.0
}

/// Radii and memberships such that every patch holds at least `n_min` points
/// and every point lies strictly inside some patch. Under-populated patches
/// grow by [`GROWTH`]; a point left outside every patch grows its nearest
/// patch until covered.
pub fn compute_radii<const D: usize>(
    centers: &[Point<D>],
    points: &[Point<D>],
    delta: f64,
    n_min: usize,
) -> Result<(Vec<f64>, Vec<Vec<usize>>)> {
    if centers.is_empty() {
        return Err(Error::InvalidParameter("no patch centers".into()));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("overlap delta must be positive, got {delta}")));
    }
    if n_min == 0 {
        return Err(Error::InvalidParameter("n_min must be at least 1".into()));
    }
    if points.len() < n_min {
        return Err(Error::InvalidParameter(format!(
            "{} points cannot fill a patch of {n_min}",
            points.len()
        )));
    }
    let rho0 = initial_radius(centers, points, delta);
    if !(rho0 > 0.0) {
        return Err(Error::InvalidParameter("patch centers coincide".into()));
    }
    let point_tree = KdTree::new(points);
    let mut radii = vec![rho0; centers.len()];
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(centers.len());
    for (c, r) in centers.iter().zip(radii.iter_mut()) {
        let mut inside = point_tree.within(c, *r);
        while inside.len() < n_min {
            *r *= GROWTH;
            point_tree.within_into(c, *r, &mut inside);
        }
        members.push(inside);
    }

    let mut covered = vec![false; points.len()];
    for m in &members {
        for &i in m {
            covered[i] = true;
        }
    }
    let center_tree = KdTree::new(centers);
    for i in 0..points.len() {
        if covered[i] {
            continue;
        }
        let (m, dist) = center_tree.nearest(&points[i]).unwrap();
        while radii[m] <= dist {
            radii[m] *= GROWTH;
        }
        members[m] = point_tree.within(&centers[m], radii[m]);
        for &j in &members[m] {
            covered[j] = true;
        }
    }
    Ok((radii, members))
}

impl<const D: usize> PatchCover<D> {
    /// Cover with `target` farthest-point centers.
    pub fn build(points: &[Point<D>], target: usize, delta: f64, n_min: usize) -> Result<Self> {
        let idx = select_centers(points, target)?;
        let centers: Vec<Point<D>> = idx.iter().map(|&i| points[i]).collect();
        Self::with_centers(centers, points, delta, n_min)
    }

    pub fn with_centers(centers: Vec<Point<D>>, points: &[Point<D>], delta: f64, n_min: usize) -> Result<Self> {
        let (radii, members) = compute_radii(&centers, points, delta, n_min)?;
        Ok(Self::from_parts(centers, radii, members))
    }

    pub fn from_parts(centers: Vec<Point<D>>, radii: Vec<f64>, members: Vec<Vec<usize>>) -> Self {
        let tree = KdTree::new(&centers);
        let max_radius = radii.iter().copied().fold(0.0, f64::max);
        PatchCover {
            centers,
            radii,
            members,
            tree,
            max_radius,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    /// Patches with `‖x − ξ_m‖ < ρ_m`, ascending.
    pub fn covering_patches(&self, x: &Point<D>) -> Vec<usize> {
        let mut out = Vec::new();
        self.covering_into(x, &mut out);
        out
    }

    pub fn covering_into(&self, x: &Point<D>, out: &mut Vec<usize>) {
        self.tree.within_into(x, self.max_radius, out);
        out.retain(|&m| (x - self.centers[m]).norm() < self.radii[m]);
    }

    /// Unnormalized weight `κ(‖x − ξ_m‖/ρ_m)`.
    pub fn bump(&self, m: usize, x: &Point<D>) -> f64 {
        kappa((x - self.centers[m]).norm() / self.radii[m])
    }

    /// Shepard weight of patch `m` at `x`.
    pub fn weight(&self, m: usize, x: &Point<D>) -> Result<f64> {
        let cover = self.covering_patches(x);
        if cover.is_empty() {
            return Err(Error::Uncovered);
        }
        if !cover.contains(&m) {
            return Ok(0.0);
        }
        let total: f64 = cover.iter().map(|&j| self.bump(j, x)).sum();
        Ok(self.bump(m, x) / total)
    }

    /// All nonzero-support weights at `x` as `(patch, weight)`, ascending by
    /// patch. Empty when `x` is uncovered.
    pub fn weights(&self, x: &Point<D>) -> Vec<(usize, f64)> {
        let cover = self.covering_patches(x);
        let bumps: Vec<f64> = cover.iter().map(|&m| self.bump(m, x)).collect();
        let total: f64 = bumps.iter().sum();
        cover.into_iter().zip(bumps).map(|(m, b)| (m, b / total)).collect()
    }

    /// Largest number of patches overlapping at any of `points`.
    pub fn max_overlap(&self, points: &[Point<D>]) -> usize {
        let mut buf = Vec::new();
        points
            .iter()
            .map(|p| {
                self.covering_into(p, &mut buf);
                buf.len()
            })
            .max()
            .unwrap_or(0)
    }
}
