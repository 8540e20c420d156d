//! Local curl-free interpolation and smoothing on a single patch.
//!
//! The unknowns are one coefficient vector `c_j` per point and `L` polynomial
//! coefficients `b`, solving
//!
//! ```text
//! [ A + m·λ·I   P ] [c]   [u]
//! [ Pᵀ          0 ] [b] = [0]
//! ```
//!
//! where `m = d·n` is the number of scalar data values. Row `d·j + i` holds
//! component `i` of point `j`.

mod gcv;
mod residual;

pub use gcv::{default_grid, gcv_score, gcv_select, GcvResult, GcvSpectrum};
pub use residual::{fit_residual, gcv_select_residual, residual_system, ResidualSpline};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{CurlFreePolyBasis, PolyFrame, RadialKernel};
use crate::Point;

/// Assembled curl-free system for one patch.
#[derive(Clone, Debug)]
pub struct CurlFreeSystem<const D: usize> {
    /// `dn × dn` block matrix of `Φ(x_i, x_j)`.
    pub a: DMatrix<f64>,
    /// `dn × L` curl-free polynomial fields at the points.
    pub p: DMatrix<f64>,
    /// Normals stacked point by point.
    pub u: DVector<f64>,
    pub basis: CurlFreePolyBasis<D>,
}

/// Solution of a saddle system.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleSolution {
    pub c: DVector<f64>,
    pub b: DVector<f64>,
    /// `‖rhs − M x‖ / ‖rhs‖` of the full system after refinement.
    pub relative_residual: f64,
}

pub(crate) fn check_distinct<const D: usize>(points: &[Point<D>]) -> Result<()> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i] == points[j] {
                return Err(Error::DuplicatePoints { first: i, second: j });
            }
        }
    }
    Ok(())
}

/// Builds `A`, `P` and `u` for a patch. Polynomials are evaluated in a frame
/// fitted to the points, which changes only the scaling of `b`.
pub fn assemble<const D: usize>(
    points: &[Point<D>],
    normals: &[Point<D>],
    kernel: RadialKernel,
    order: usize,
) -> Result<CurlFreeSystem<D>> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if points.len() != normals.len() {
        return Err(Error::InvalidParameter("points and normals differ in length".into()));
    }
    kernel.validate()?;
    if !kernel.is_curl_free_admissible() {
        return Err(Error::InvalidParameter(format!(
            "{kernel:?} is not twice continuously differentiable"
        )));
    }
    check_distinct(points)?;
    let basis = CurlFreePolyBasis::new(order, PolyFrame::fitted(points))?;
    let n = points.len();
    let m = D * n;
    let mut a = DMatrix::zeros(m, m);
    for j in 0..n {
        for i in j..n {
            let block = kernel.curl_free_matrix(&points[i], &points[j]);
            for r in 0..D {
                for c in 0..D {
                    a[(D * i + r, D * j + c)] = block[(r, c)];
                    a[(D * j + c, D * i + r)] = block[(r, c)];
                }
            }
        }
    }
    let mut p = DMatrix::zeros(m, basis.len());
    for (j, x) in points.iter().enumerate() {
        for k in 0..basis.len() {
            let f = basis.field(k, x);
            for r in 0..D {
                p[(D * j + r, k)] = f[r];
            }
        }
    }
    let u = DVector::from_iterator(m, normals.iter().flat_map(|v| v.iter().copied()));
    Ok(CurlFreeSystem { a, p, u, basis })
}

/// Whether `p` has full column rank, judged by a column-pivoted QR with a
/// relative cut of `1e-10` on the diagonal of `R`.
pub fn has_full_column_rank(p: &DMatrix<f64>) -> bool {
    if p.ncols() == 0 {
        return true;
    }
    if p.nrows() < p.ncols() {
        return false;
    }
    let r = p.clone().col_piv_qr().r();
    let diag: Vec<f64> = (0..p.ncols()).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    max > 0.0 && diag.iter().all(|&d| d > 1e-10 * max)
}

/// Solves `[[A + m·param·I, P], [Pᵀ, 0]] [c; b] = [u; 0]` with `m` the order
/// of `A`, by LU with partial pivoting and one step of iterative refinement.
pub(crate) fn solve_saddle(
    a: &DMatrix<f64>,
    p: &DMatrix<f64>,
    u: &DVector<f64>,
    param: f64,
    degree: usize,
) -> Result<SaddleSolution> {
    let m = a.nrows();
    let l = p.ncols();
    if a.ncols() != m || p.nrows() != m || u.len() != m {
        return Err(Error::InvalidParameter("inconsistent saddle system dimensions".into()));
    }
    if !(param >= 0.0) || !param.is_finite() {
        return Err(Error::InvalidParameter(format!("regularization {param} must be >= 0")));
    }
    if !has_full_column_rank(p) {
        return Err(Error::NotUnisolvent { degree });
    }
    let shift = m as f64 * param;
    let mut full = DMatrix::zeros(m + l, m + l);
    full.view_mut((0, 0), (m, m)).copy_from(a);
    for i in 0..m {
        full[(i, i)] += shift;
    }
    full.view_mut((0, m), (m, l)).copy_from(p);
    full.view_mut((m, 0), (l, m)).copy_from(&p.transpose());
    let mut rhs = DVector::zeros(m + l);
    rhs.rows_mut(0, m).copy_from(u);

    let lu = full.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    let correction = lu.solve(&(&rhs - &full * &x)).ok_or(Error::SingularSystem)?;
    x += correction;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let rhs_norm = rhs.norm();
    let res = (&rhs - &full * &x).norm();
    Ok(SaddleSolution {
        c: x.rows(0, m).into_owned(),
        b: x.rows(m, l).into_owned(),
        relative_residual: if rhs_norm > 0.0 { res / rhs_norm } else { res },
    })
}

/// Interpolating solve.
pub fn solve_interp(a: &DMatrix<f64>, p: &DMatrix<f64>, u: &DVector<f64>) -> Result<SaddleSolution> {
    solve_saddle(a, p, u, 0.0, 0)
}

/// Smoothing solve with `A` replaced by `A + d·n·λ·I`.
pub fn solve_smoothed(a: &DMatrix<f64>, p: &DMatrix<f64>, u: &DVector<f64>, lambda: f64) -> Result<SaddleSolution> {
    solve_saddle(a, p, u, lambda, 0)
}

/// Curl-free fit on one patch: a gradient field and its potential.
#[derive(Clone, Debug)]
pub struct CurlFreeFit<const D: usize> {
    pub centers: Vec<Point<D>>,
    pub kernel: RadialKernel,
    pub basis: CurlFreePolyBasis<D>,
    pub c: Vec<Point<D>>,
    pub b: Vec<f64>,
    pub lambda: f64,
    pub relative_residual: f64,
}

impl<const D: usize> CurlFreeFit<D> {
    /// Assembles and solves in one step. `lambda = 0` interpolates.
    pub fn new(
        points: &[Point<D>],
        normals: &[Point<D>],
        kernel: RadialKernel,
        order: usize,
        lambda: f64,
    ) -> Result<Self> {
        let sys = assemble(points, normals, kernel, order)?;
        Self::from_system(points, kernel, sys, lambda)
    }

    pub fn from_system(
        points: &[Point<D>],
        kernel: RadialKernel,
        sys: CurlFreeSystem<D>,
        lambda: f64,
    ) -> Result<Self> {
        let sol = solve_saddle(&sys.a, &sys.p, &sys.u, lambda, sys.basis.order())?;
        Ok(Self::from_solution(points, kernel, sys.basis, &sol, lambda))
    }

    pub fn from_solution(
        points: &[Point<D>],
        kernel: RadialKernel,
        basis: CurlFreePolyBasis<D>,
        sol: &SaddleSolution,
        lambda: f64,
    ) -> Self {
        let c = (0..points.len())
            .map(|j| Point::<D>::from_fn(|i, _| sol.c[D * j + i]))
            .collect();
        CurlFreeFit {
            centers: points.to_vec(),
            kernel,
            basis,
            c,
            b: sol.b.iter().copied().collect(),
            lambda,
            relative_residual: sol.relative_residual,
        }
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    /// Scalar potential `Σ_j potential_row(x, x_j)·c_j + Σ_k b_k p_k(x)`.
    pub fn eval_potential(&self, x: &Point<D>) -> f64 {
        let mut acc = 0.0;
        for (y, c) in self.centers.iter().zip(&self.c) {
            acc += self.kernel.potential_row(x, y).dot(c);
        }
        acc + self.basis.combine_scalar(&self.b, x)
    }

    /// Vector field `Σ_j Φ(x, x_j) c_j + Σ_k b_k ∇p_k(x)`.
    pub fn eval_field(&self, x: &Point<D>) -> Point<D> {
        let mut acc = Point::<D>::zeros();
        for (y, c) in self.centers.iter().zip(&self.c) {
            let delta = x - y;
            let (g, h) = self.kernel.radial_terms(delta.norm());
            acc -= delta * (h * delta.dot(c)) + c * g;
        }
        acc + self.basis.combine_field(&self.b, x)
    }

    /// `Σ_j ‖s(x_j) − n_j‖²`
    pub fn misfit(&self, normals: &[Point<D>]) -> f64 {
        self.centers
            .iter()
            .zip(normals)
            .map(|(x, n)| (self.eval_field(x) - n).norm_squared())
            .sum()
    }

    /// `Pᵀc` relative to `‖c‖`, the moment conditions.
    pub fn moment_violation(&self) -> f64 {
        let scale = self.c.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt();
        let mut worst: f64 = 0.0;
        for k in 0..self.basis.len() {
            let s: f64 = self
                .centers
                .iter()
                .zip(&self.c)
                .map(|(x, c)| self.basis.field(k, x).dot(c))
                .sum();
            worst = worst.max(s.abs());
        }
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::RadialKernel;
    use nalgebra::{Vector2, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud3(n: usize, seed: u64) -> Vec<Vector3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vector3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    fn cubic() -> RadialKernel {
        RadialKernel::PhsOdd { order: 1 }
    }

    // p(x) = x² + xy − 3z² + 2x
    fn quad_grad(x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(2.0 * x.x + x.y + 2.0, x.x, -6.0 * x.z)
    }

    #[test]
    fn assembly_shapes_and_symmetry() {
        let pts = cloud3(10, 1);
        let sys = assemble(&pts, &pts, RadialKernel::PhsOdd { order: 2 }, 2).unwrap();
        assert_eq!(sys.p.shape(), (30, 9));
        assert_eq!(sys.a, sys.a.transpose());

        let one = assemble(&pts[..1], &pts[..1], cubic(), 1).unwrap();
        assert_eq!(one.a, DMatrix::zeros(3, 3));

        let p2 = vec![Vector2::new(0.0, 0.0), Vector2::new(0.5, 0.25)];
        let sys2 = assemble(&p2, &p2, RadialKernel::PhsEven { order: 2 }, 1).unwrap();
        let block = RadialKernel::PhsEven { order: 2 }.curl_free_matrix(&p2[0], &p2[1]);
        assert_eq!(sys2.a.shape(), (4, 4));
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(sys2.a[(r, 2 + c)], block[(r, c)]);
            }
        }
    }

    #[test]
    fn duplicates_rejected() {
        let mut pts = cloud3(5, 2);
        pts[3] = pts[1];
        assert!(matches!(
            assemble(&pts, &pts, cubic(), 1),
            Err(Error::DuplicatePoints { first: 1, second: 3 })
        ));
    }

    #[test]
    fn polynomial_gradient_reproduced() {
        let pts = cloud3(40, 3);
        let normals: Vec<_> = pts.iter().map(quad_grad).collect();
        let fit = CurlFreeFit::new(&pts, &normals, RadialKernel::PhsOdd { order: 2 }, 2, 0.0).unwrap();
        let bscale = fit.b.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(fit.c.iter().all(|c| c.norm() <= 1e-8 * bscale));
        for x in cloud3(20, 4) {
            assert!((fit.eval_field(&x) - quad_grad(&x)).norm() < 1e-8);
        }
    }

    #[test]
    fn zero_data_zero_coefficients() {
        let pts = cloud3(12, 5);
        let zeros = vec![Vector3::zeros(); 12];
        let fit = CurlFreeFit::new(&pts, &zeros, cubic(), 1, 0.0).unwrap();
        assert!(fit.c.iter().all(|c| *c == Vector3::zeros()));
        assert!(fit.b.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn interpolates_and_satisfies_moments() {
        let pts = cloud3(30, 6);
        let normals: Vec<_> = pts.iter().map(|p| (p - Vector3::repeat(0.5)).normalize()).collect();
        let fit = CurlFreeFit::new(&pts, &normals, cubic(), 1, 0.0).unwrap();
        assert!(fit.relative_residual < 1e-10);
        assert!(fit.moment_violation() < 1e-8);
        for (x, n) in pts.iter().zip(&normals) {
            assert!((fit.eval_field(x) - n).norm() < 1e-6);
        }
    }

    #[test]
    fn smoothing_limits() {
        let pts = cloud3(25, 7);
        let normals: Vec<_> = pts.iter().map(|p| (p - Vector3::new(0.2, 0.5, 0.4)).normalize()).collect();
        let sys = assemble(&pts, &normals, cubic(), 1).unwrap();
        let interp = solve_interp(&sys.a, &sys.p, &sys.u).unwrap();
        let zero = solve_smoothed(&sys.a, &sys.p, &sys.u, 0.0).unwrap();
        assert!((&interp.c - &zero.c).amax() <= 1e-12 && (&interp.b - &zero.b).amax() <= 1e-12);
        let stiff = solve_smoothed(&sys.a, &sys.p, &sys.u, 1e12).unwrap();
        assert!(stiff.c.norm() <= 1e-6 * interp.c.norm());
    }

    #[test]
    fn misfit_grows_with_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = cloud3(50, 8);
        let normals: Vec<_> = pts
            .iter()
            .map(|p| (p - Vector3::repeat(0.5)).normalize() + Vector3::from_fn(|_, _| 0.3 * (rng.random::<f64>() - 0.5)))
            .collect();
        let mut last = -1.0;
        for lambda in [1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2] {
            let misfit = CurlFreeFit::new(&pts, &normals, cubic(), 1, lambda).unwrap().misfit(&normals);
            assert!(misfit >= last, "{misfit} < {last} at {lambda}");
            last = misfit;
        }
    }

    #[test]
    fn coplanar_points_not_unisolvent_for_quadratics() {
        // all on the plane z = 0: z² cannot be distinguished from 0
        let pts: Vec<_> = cloud3(20, 9).iter().map(|p| Vector3::new(p.x, p.y, 0.0)).collect();
        let normals = vec![Vector3::z(); 20];
        assert!(matches!(
            CurlFreeFit::new(&pts, &normals, RadialKernel::PhsOdd { order: 2 }, 2, 0.0),
            Err(Error::NotUnisolvent { degree: 2 })
        ));
        assert!(CurlFreeFit::new(&pts, &normals, cubic(), 1, 0.0).is_ok());
    }

    #[test]
    fn potential_of_linear_polynomial() {
        let pts = cloud3(8, 10);
        let zeros = vec![Vector3::zeros(); 8];
        let mut fit = CurlFreeFit::new(&pts, &zeros, cubic(), 1, 0.0).unwrap();
        // b for p(x) = x₁ in the local frame z = (x − o)/s is s·z₁ + o₁,
        // up to the constant that the basis cannot hold
        let s = fit.basis.frame().scale;
        let o = fit.basis.frame().origin;
        fit.b = vec![s, 0.0, 0.0];
        let x = Vector3::new(2.0, 0.0, 0.0);
        assert!((fit.eval_potential(&x) - (2.0 - o.x)).abs() < 1e-12);
    }
}
