//! Generalized cross validation for the smoothing parameter.
//!
//! With `Q₂` an orthonormal basis of the null space of `Pᵀ`, the reduced
//! matrix `Q₂ᵀ A Q₂ = V Λ Vᵀ` and `z = Vᵀ Q₂ᵀ u`, the constrained smoother with
//! shift `μ = m·λ` has
//!
//! ```text
//! ‖(I − H)u‖² = Σ μ² zᵢ² / (Λᵢ + μ)²      tr(I − H) = Σ μ / (Λᵢ + μ)
//! ```
//!
//! so each score costs `O(m)` once the spectrum is known.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

use super::has_full_column_rank;

/// 50 log-spaced values from `1e-12` to `1e2`.
pub fn default_grid() -> Vec<f64> {
    let n = 50;
    (0..n)
        .map(|i| 10f64.powf(-12.0 + 14.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// Reduced spectrum of a saddle system, reusable for any `λ`.
#[derive(Clone, Debug)]
pub struct GcvSpectrum {
    eigenvalues: Vec<f64>,
    z: Vec<f64>,
    m: usize,
}

impl GcvSpectrum {
    pub fn new(a: &DMatrix<f64>, p: &DMatrix<f64>, u: &DVector<f64>) -> Result<Self> {
        let m = a.nrows();
        let l = p.ncols();
        if !has_full_column_rank(p) {
            return Err(Error::NotUnisolvent { degree: 0 });
        }
        if m <= l {
            return Err(Error::InvalidParameter(
                "no degrees of freedom left after the polynomial constraints".into(),
            ));
        }
        let qr = p.clone().col_piv_qr();
        let mut qt = DMatrix::<f64>::identity(m, m);
        qr.q_tr_mul(&mut qt);
        let q2t = qt.rows(l, m - l).into_owned();
        let reduced = &q2t * a * q2t.transpose();
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let eig = SymmetricEigen::new(reduced);
        let projected = &q2t * u;
        let z = eig.eigenvectors.transpose() * projected;
        Ok(GcvSpectrum {
            // the reduced matrix is positive semidefinite; clip rounding noise
            eigenvalues: eig.eigenvalues.iter().map(|&e| e.max(0.0)).collect(),
            z: z.iter().copied().collect(),
            m,
        })
    }

    /// Norm of the data component outside the polynomial space.
    pub fn projected_norm(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `m‖(I − H)u‖² / tr(I − H)²`
    pub fn score(&self, lambda: f64) -> f64 {
        let mu = self.m as f64 * lambda;
        let mut resid = 0.0;
        let mut trace = 0.0;
        for (&e, &z) in self.eigenvalues.iter().zip(&self.z) {
            let f = mu / (e + mu);
            resid += f * f * z * z;
            trace += f;
        }
        self.m as f64 * resid / (trace * trace)
    }
}

/// GCV score of a saddle system at a single `λ`.
pub fn gcv_score(a: &DMatrix<f64>, p: &DMatrix<f64>, u: &DVector<f64>, lambda: f64) -> Result<f64> {
    Ok(GcvSpectrum::new(a, p, u)?.score(lambda))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcvResult {
    pub lambda: f64,
    pub score: f64,
    /// Set when the data carry no signal outside the polynomial space, in
    /// which case the largest grid value is returned.
    pub degenerate: bool,
}

/// Minimizes the GCV score over `grid`, then refines by golden-section search
/// in `log λ` between the neighbors of the best grid point.
pub fn gcv_select(a: &DMatrix<f64>, p: &DMatrix<f64>, u: &DVector<f64>, grid: &[f64]) -> Result<GcvResult> {
    let spectrum = GcvSpectrum::new(a, p, u)?;
    select(&spectrum, grid, u.norm())
}

pub(crate) fn select(spectrum: &GcvSpectrum, grid: &[f64], data_norm: f64) -> Result<GcvResult> {
    if grid.is_empty() || grid.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(Error::InvalidParameter("GCV grid must be non-empty and positive".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    if spectrum.projected_norm() <= 1e-13 * data_norm.max(f64::MIN_POSITIVE) {
        let lambda = *sorted.last().unwrap();
        log::warn!("data lie in the polynomial space; GCV is flat, using lambda = {lambda:e}");
        return Ok(GcvResult {
            lambda,
            score: spectrum.score(lambda),
            degenerate: true,
        });
    }

    let scores: Vec<f64> = sorted.iter().map(|&l| spectrum.score(l)).collect();
    let best = (0..sorted.len())
        .min_by(|&i, &j| scores[i].total_cmp(&scores[j]))
        .unwrap();
    let mut result = GcvResult {
        lambda: sorted[best],
        score: scores[best],
        degenerate: false,
    };
    if sorted.len() < 2 {
        return Ok(result);
    }

    let f = |t: f64| spectrum.score(t.exp());
    let mut lo = sorted[best.saturating_sub(1)].ln();
    let mut hi = sorted[(best + 1).min(sorted.len() - 1)].ln();
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-6 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    let (t, s) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if s < result.score {
        result.lambda = t.exp();
        result.score = s;
    }
    Ok(result)
}
