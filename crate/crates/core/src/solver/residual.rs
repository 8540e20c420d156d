//! Scalar spline through the potential values at the patch points, used to
//! shift each local potential so it vanishes (or nearly vanishes) there.
//!
//! The kernel is `φ₀(r) = −r`, augmented with constant and linear terms.
//! With this sign `φ₀` is conditionally positive definite, so the shift
//! `n·α·I` gives a well-posed smoothing problem.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{PolyFrame, RadialKernel, ScalarPolyBasis};
use crate::Point;

use super::gcv::{select, GcvResult, GcvSpectrum};
use super::{check_distinct, has_full_column_rank, solve_saddle};

const PHI0: RadialKernel = RadialKernel::PhsOdd { order: 0 };

#[derive(Clone, Debug)]
pub struct ResidualSpline<const D: usize> {
    pub centers: Vec<Point<D>>,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub basis: ScalarPolyBasis<D>,
    pub alpha: f64,
}

impl<const D: usize> ResidualSpline<D> {
    pub fn eval(&self, x: &Point<D>) -> f64 {
        let mut acc = 0.0;
        for (y, c) in self.centers.iter().zip(&self.c) {
            acc += c * PHI0.eval((x - y).norm());
        }
        acc + self.basis.combine(&self.b, x)
    }

    /// Gradient; the kink of `φ₀` at a center contributes nothing there.
    pub fn gradient(&self, x: &Point<D>) -> Point<D> {
        let mut acc = Point::<D>::zeros();
        for (y, c) in self.centers.iter().zip(&self.c) {
            let delta = x - y;
            let r = delta.norm();
            if r > 0.0 {
                acc -= delta * (c / r);
            }
        }
        acc + self.basis.gradient(&self.b)
    }

    /// Whether the affine points forced a constant-only augmentation.
    pub fn reduced(&self) -> bool {
        !self.basis.is_linear()
    }
}

/// Kernel matrix, polynomial block and basis for a residual fit. Falls back
/// to constants when the points are affinely degenerate.
pub fn residual_system<const D: usize>(points: &[Point<D>]) -> Result<(DMatrix<f64>, DMatrix<f64>, ScalarPolyBasis<D>)> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_distinct(points)?;
    let n = points.len();
    let k = DMatrix::from_fn(n, n, |i, j| PHI0.eval((points[i] - points[j]).norm()));
    let frame = PolyFrame::fitted(points);
    let build = |basis: &ScalarPolyBasis<D>| DMatrix::from_fn(n, basis.len(), |i, j| basis.eval(j, &points[i]));
    let linear = ScalarPolyBasis::new(true, frame);
    let p = build(&linear);
    if has_full_column_rank(&p) {
        return Ok((k, p, linear));
    }
    log::debug!("residual points affinely degenerate; using constant augmentation");
    let constant = ScalarPolyBasis::new(false, frame);
    let p = build(&constant);
    Ok((k, p, constant))
}

/// Fits the residual spline with smoothing `alpha` (`0` interpolates).
pub fn fit_residual<const D: usize>(points: &[Point<D>], values: &[f64], alpha: f64) -> Result<ResidualSpline<D>> {
    if values.len() != points.len() {
        return Err(Error::InvalidParameter("points and values differ in length".into()));
    }
    let (k, p, basis) = residual_system(points)?;
    let u = DVector::from_column_slice(values);
    let sol = solve_saddle(&k, &p, &u, alpha, 1)?;
    Ok(ResidualSpline {
        centers: points.to_vec(),
        c: sol.c.iter().copied().collect(),
        b: sol.b.iter().copied().collect(),
        basis,
        alpha,
    })
}

/// GCV choice of `alpha` for the residual spline.
pub fn gcv_select_residual<const D: usize>(points: &[Point<D>], values: &[f64], grid: &[f64]) -> Result<GcvResult> {
    if values.len() != points.len() {
        return Err(Error::InvalidParameter("points and values differ in length".into()));
    }
    let (k, p, _) = residual_system(points)?;
    let u = DVector::from_column_slice(values);
    let spectrum = GcvSpectrum::new(&k, &p, &u)?;
    select(&spectrum, grid, u.norm())
}
