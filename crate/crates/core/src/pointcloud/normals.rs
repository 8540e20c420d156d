use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use petgraph::unionfind::UnionFind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::OrientedPointCloud;
use crate::error::{Error, Result};
use crate::spatial::KdTree;
use crate::Point;

/// Estimated normals plus the spanning tree used to orient them.
#[derive(Clone, Debug)]
pub struct NormalEstimate<const D: usize> {
    pub cloud: OrientedPointCloud<D>,
    /// `(parent, child)` pairs in propagation order.
    pub tree_edges: Vec<(usize, usize)>,
}

/// Weighted PCA normals from each point and its `k` nearest neighbors, consistently
/// oriented by propagation along a spanning tree. The point with the largest
/// first coordinate gets a normal pointing toward +x.
pub fn estimate_normals<const D: usize>(points: &[Point<D>], k: usize) -> Result<OrientedPointCloud<D>> {
    estimate_normals_with_tree(points, k).map(|e| e.cloud)
}

pub fn estimate_normals_with_tree<const D: usize>(points: &[Point<D>], k: usize) -> Result<NormalEstimate<D>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if k < D || k >= n {
        return Err(Error::InvalidParameter(format!(
            "neighbor count k={k} must satisfy {D} <= k < N={n}"
        )));
    }
    let tree = KdTree::new(points);
    let mut normals = Vec::with_capacity(n);
    for (i, p) in points.iter().enumerate() {
        let hood = tree.nearest_k(p, k + 1);
        normals.push(pca_normal(points, &hood, i)?);
    }

    let tree_edges = spanning_tree(points, &tree, k);
    let root = tree_edges.first().map_or(0, |e| e.0);
    if normals[root][0] < 0.0 {
        normals[root] = -normals[root];
    }
    for &(parent, child) in &tree_edges {
        if normals[parent].dot(&normals[child]) < 0.0 {
            normals[child] = -normals[child];
        }
    }
    Ok(NormalEstimate {
        cloud: OrientedPointCloud::new(points.to_vec(), normals)?,
        tree_edges,
    })
}

fn pca_normal<const D: usize>(points: &[Point<D>], hood: &[(usize, f64)], index: usize) -> Result<Point<D>> {
    // Gaussian falloff toward the farthest neighbor damps the bias from
    // lopsided neighborhoods.
    let reach = hood.iter().map(|h| h.1).fold(0.0, f64::max);
    let weights: Vec<f64> = hood
        .iter()
        .map(|&(_, d)| if reach > 0.0 { (-2.0 * (d / reach).powi(2)).exp() } else { 1.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    let mean = hood
        .iter()
        .zip(&weights)
        .fold(Point::<D>::zeros(), |acc, (&(j, _), w)| acc + points[j] * *w)
        / total;
    let mut cov = DMatrix::<f64>::zeros(D, D);
    for (&(j, _), w) in hood.iter().zip(&weights) {
        let d = points[j] - mean;
        for r in 0..D {
            for c in 0..D {
                cov[(r, c)] += w * d[r] * d[c];
            }
        }
    }
    if cov.amax() == 0.0 {
        return Err(Error::DegenerateNeighborhood { index });
    }
    let eig = SymmetricEigen::new(cov);
    let imin = eig.eigenvalues.imin();
    let v = eig.eigenvectors.column(imin);
    let normal = Point::<D>::from_fn(|r, _| v[r]);
    Ok(normal / normal.norm())
}

/// Euclidean minimum spanning tree of the k-nearest-neighbor graph, with the
/// neighbor count doubled until the graph is connected. Returned edges are in
/// breadth-first order from the root.
fn spanning_tree<const D: usize>(points: &[Point<D>], tree: &KdTree<D>, k: usize) -> Vec<(usize, usize)> {
    let n = points.len();
    if n == 1 {
        return Vec::new();
    }
    let mut kg = k.max(10).min(n - 1);
    let adjacency = loop {
        let mut edges: Vec<(f64, usize, usize)> = Vec::new();
        for (i, p) in points.iter().enumerate() {
            for (j, dist) in tree.nearest_k(p, kg + 1) {
                if j != i {
                    edges.push((dist, i.min(j), i.max(j)));
                }
            }
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        edges.dedup_by(|a, b| a.1 == b.1 && a.2 == b.2);

        let mut sets = UnionFind::<usize>::new(n);
        let mut adjacency = vec![Vec::new(); n];
        let mut joined = 0;
        for &(_, a, b) in &edges {
            if sets.union(a, b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
                joined += 1;
            }
        }
        if joined == n - 1 || kg == n - 1 {
            break adjacency;
        }
        kg = (kg * 2).min(n - 1);
    };

    let root = (0..n)
        .max_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(b.cmp(&a)))
        .unwrap();
    let mut visited = vec![false; n];
    let mut out = Vec::with_capacity(n - 1);
    let mut queue = VecDeque::from([root]);
    visited[root] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if !visited[v] {
                visited[v] = true;
                out.push((u, v));
                queue.push_back(v);
            }
        }
    }
    out
}

/// Adds independent N(0, sigma^2) noise to every normal component. The result
/// is not renormalized.
pub fn perturb_normals<const D: usize>(
    cloud: &OrientedPointCloud<D>,
    sigma: f64,
    seed: u64,
) -> Result<OrientedPointCloud<D>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("noise sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let dist = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normals = cloud
        .normals()
        .iter()
        .map(|n| n + Point::<D>::from_fn(|_, _| dist.sample(&mut rng)))
        .collect();
    OrientedPointCloud::from_raw(cloud.points().to_vec(), normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Vector2, Vector3};

    fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden * i as f64;
                Vector3::new(r * t.cos(), r * t.sin(), z)
            })
            .collect()
    }

    #[test]
    fn sphere_normals_are_radial_and_outward() {
        let pts = fibonacci_sphere(200);
        let est = estimate_normals_with_tree(&pts, 10).unwrap();
        for (p, n) in pts.iter().zip(est.cloud.normals()) {
            let angle = p.normalize().dot(n).clamp(-1.0, 1.0).acos().to_degrees();
            assert!(angle <= 5.0, "angle {angle}");
        }
        assert_eq!(est.tree_edges.len(), pts.len() - 1);
        let nn = est.cloud.normals();
        assert!(est.tree_edges.iter().all(|&(a, b)| nn[a].dot(&nn[b]) > 0.0));
    }

    #[test]
    fn collinear_segment() {
        let pts = vec![Vector2::new(0.0, 0.0), Vector2::new(1.0, 1.0), Vector2::new(2.0, 2.0)];
        let c = estimate_normals(&pts, 2).unwrap();
        let dir = Vector2::new(1.0, 1.0).normalize();
        for n in c.normals() {
            assert!(n.dot(&dir).abs() < 1e-12);
            assert!((n - c.normals()[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn duplicates_are_degenerate() {
        let mut pts = vec![Vector3::new(0.5, 0.5, 0.5); 11];
        pts.extend(fibonacci_sphere(20));
        assert!(matches!(
            estimate_normals(&pts, 10),
            Err(Error::DegenerateNeighborhood { .. })
        ));
    }

    #[test]
    fn neighbor_count_checked() {
        let pts = fibonacci_sphere(10);
        assert!(estimate_normals(&pts, 10).is_err());
        assert!(estimate_normals(&pts, 2).is_err());
    }

    #[test]
    fn perturbation_contract() {
        let pts = fibonacci_sphere(50);
        let cloud = OrientedPointCloud::new(pts.clone(), pts).unwrap();
        assert_eq!(perturb_normals(&cloud, 0.0, 1).unwrap(), cloud);
        let a = perturb_normals(&cloud, 0.3, 9).unwrap();
        let b = perturb_normals(&cloud, 0.3, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, perturb_normals(&cloud, 0.3, 10).unwrap());
        assert!(perturb_normals(&cloud, -1.0, 1).is_err());
    }
}
