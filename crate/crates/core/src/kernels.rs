//! Radial kernels, the matrix-valued curl-free kernels derived from them,
//! and the polynomial spaces used to augment the interpolants.
//!
//! Every derivative structure is expressed through two radial scalars:
//!
//! * `g(r) = φ'(r) / r`
//! * `h(r) = (φ''(r) - φ'(r) / r) / r²`
//!
//! With `δ = x - y` and `r = |δ|`, the Hessian of `φ(|x - y|)` with respect to
//! `x` is `h(r) δδᵀ + g(r) I` and its gradient is `g(r) δ`. The curl-free
//! kernel is the negated Hessian. Both scalars carry explicit `r → 0` limits
//! so coincident points never produce `0/0`.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};

/// Scalar radial basis function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadialKernel {
    /// `(-1)^(ℓ+1) r^(2ℓ+1)`, `ℓ ≥ 0`.
    PhsOdd { order: u32 },
    /// `(-1)^(ℓ+1) r^(2ℓ) log r`, `ℓ ≥ 1`.
    PhsEven { order: u32 },
    /// `exp(-(εr)²)`
    Gaussian { shape: f64 },
    /// `(1 + (εr)²)^(-1/2)`
    InverseMultiquadric { shape: f64 },
    /// `-(1 + (εr)²)^(1/2)`
    Multiquadric { shape: f64 },
}

impl RadialKernel {
    /// Default polyharmonic kernel of order `order` for dimension `dim`:
    /// `r^(2ℓ) log r` in even dimensions, `r^(2ℓ+1)` otherwise.
    pub fn phs_for_dim(order: u32, dim: usize) -> Self {
        if dim % 2 == 0 {
            RadialKernel::PhsEven { order }
        } else {
            RadialKernel::PhsOdd { order }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RadialKernel::PhsOdd { .. } => Ok(()),
            RadialKernel::PhsEven { order } if order >= 1 => Ok(()),
            RadialKernel::PhsEven { order } => Err(Error::InvalidParameter(format!(
                "even polyharmonic spline requires order >= 1, got {order}"
            ))),
            RadialKernel::Gaussian { shape }
            | RadialKernel::InverseMultiquadric { shape }
            | RadialKernel::Multiquadric { shape } => {
                if shape.is_finite() && shape > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "shape parameter must be positive, got {shape}"
                    )))
                }
            }
        }
    }

    /// Whether the kernel is twice continuously differentiable, which the
    /// curl-free construction needs.
    pub fn is_curl_free_admissible(&self) -> bool {
        match *self {
            RadialKernel::PhsOdd { order } => order >= 1,
            RadialKernel::PhsEven { order } => order >= 2,
            _ => self.validate().is_ok(),
        }
    }

    /// Order ℓ of a polyharmonic kernel, `None` for parametric families.
    pub fn phs_order(&self) -> Option<u32> {
        match *self {
            RadialKernel::PhsOdd { order } | RadialKernel::PhsEven { order } => Some(order),
            _ => None,
        }
    }

    /// Same family with a different polyharmonic order. Parametric kernels are
    /// returned unchanged.
    pub fn with_order(&self, order: u32) -> Self {
        match *self {
            RadialKernel::PhsOdd { .. } => RadialKernel::PhsOdd { order },
            RadialKernel::PhsEven { .. } => RadialKernel::PhsEven { order },
            other => other,
        }
    }

    /// φ(r)
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            RadialKernel::PhsOdd { order } => phs_sign(order) * r.powi(2 * order as i32 + 1),
            RadialKernel::PhsEven { order } => {
                if r == 0.0 {
                    0.0
                } else {
                    phs_sign(order) * r.powi(2 * order as i32) * r.ln()
                }
            }
            RadialKernel::Gaussian { shape } => (-(shape * r).powi(2)).exp(),
            RadialKernel::InverseMultiquadric { shape } => 1.0 / (1.0 + (shape * r).powi(2)).sqrt(),
            RadialKernel::Multiquadric { shape } => -(1.0 + (shape * r).powi(2)).sqrt(),
        }
    }

    /// `(φ'(r)/r, (φ''(r) - φ'(r)/r)/r²)` with their limits at `r = 0`.
    ///
    /// At `r = 0` the second term always multiplies `δδᵀ = 0`, so for the
    /// polyharmonic families (where it diverges) it is reported as zero.
    pub fn radial_terms(&self, r: f64) -> (f64, f64) {
        match *self {
            RadialKernel::PhsOdd { order } => {
                if r == 0.0 {
                    return (0.0, 0.0);
                }
                let k = 2 * order as i32 + 1;
                let s = phs_sign(order);
                let kf = k as f64;
                let rk4 = r.powi(k - 4);
                (s * kf * rk4 * r * r, s * kf * (kf - 2.0) * rk4)
            }
            RadialKernel::PhsEven { order } => {
                if r == 0.0 {
                    return (0.0, 0.0);
                }
                let m = 2 * order as i32;
                let mf = m as f64;
                let s = phs_sign(order);
                let ln = r.ln();
                let rm4 = r.powi(m - 4);
                (
                    s * rm4 * r * r * (mf * ln + 1.0),
                    s * rm4 * (mf * (mf - 2.0) * ln + 2.0 * (mf - 1.0)),
                )
            }
            RadialKernel::Gaussian { shape } => {
                let e2 = shape * shape;
                let phi = (-e2 * r * r).exp();
                (-2.0 * e2 * phi, 4.0 * e2 * e2 * phi)
            }
            RadialKernel::InverseMultiquadric { shape } => {
                let e2 = shape * shape;
                let q = 1.0 + e2 * r * r;
                let q12 = q.sqrt();
                let q32 = q * q12;
                (-e2 / q32, 3.0 * e2 * e2 / (q32 * q))
            }
            RadialKernel::Multiquadric { shape } => {
                let e2 = shape * shape;
                let q = 1.0 + e2 * r * r;
                let q12 = q.sqrt();
                (-e2 / q12, e2 * e2 / (q * q12))
            }
        }
    }

    /// Matrix-valued curl-free kernel `Φ(x, y) = -∇∇ᵀ φ(|x - y|)`.
    pub fn curl_free_matrix<const D: usize>(
        &self,
        x: &SVector<f64, D>,
        y: &SVector<f64, D>,
    ) -> SMatrix<f64, D, D> {
        let delta = x - y;
        let r = delta.norm();
        let (g, h) = self.radial_terms(r);
        let mut m = SMatrix::<f64, D, D>::zeros();
        for i in 0..D {
            for j in 0..D {
                let mut v = h * (delta[i] * delta[j]);
                if i == j {
                    v += g;
                }
                m[(i, j)] = -v;
            }
        }
        m
    }

    /// `-∇_x φ(|x - y|)`; its dot product with a coefficient vector is that
    /// coefficient's contribution to the scalar potential.
    pub fn potential_row<const D: usize>(
        &self,
        x: &SVector<f64, D>,
        y: &SVector<f64, D>,
    ) -> SVector<f64, D> {
        let delta = x - y;
        let (g, _) = self.radial_terms(delta.norm());
        delta * (-g)
    }
}

fn phs_sign(order: u32) -> f64 {
    if order % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Affine change of variables `z = (x - origin) / scale` used to keep
/// polynomial columns well scaled. Polynomial spaces are invariant under it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolyFrame<const D: usize> {
    pub origin: SVector<f64, D>,
    pub scale: f64,
}

impl<const D: usize> Default for PolyFrame<D> {
    fn default() -> Self {
        PolyFrame {
            origin: SVector::zeros(),
            scale: 1.0,
        }
    }
}

impl<const D: usize> PolyFrame<D> {
    /// Frame centered at the centroid of `points`, scaled by their spread.
    pub fn fitted(points: &[SVector<f64, D>]) -> Self {
        if points.is_empty() {
            return Self::default();
        }
        let origin = points.iter().fold(SVector::zeros(), |acc, p| acc + p) / points.len() as f64;
        let scale = points
            .iter()
            .map(|p| (p - origin).norm())
            .fold(0.0, f64::max);
        PolyFrame {
            origin,
            scale: if scale > 0.0 { scale } else { 1.0 },
        }
    }

    #[inline]
    pub fn local(&self, x: &SVector<f64, D>) -> SVector<f64, D> {
        (x - self.origin) / self.scale
    }
}

/// Monomial exponents of total degree `min_degree..=max_degree` in graded
/// lexicographic order: degree ascending, then exponent tuples descending.
pub fn graded_lex_exponents<const D: usize>(min_degree: usize, max_degree: usize) -> Vec<[u32; D]> {
    fn fill<const D: usize>(pos: usize, remaining: u32, cur: &mut [u32; D], out: &mut Vec<[u32; D]>) {
        if pos == D - 1 {
            cur[pos] = remaining;
            out.push(*cur);
            return;
        }
        for e in (0..=remaining).rev() {
            cur[pos] = e;
            fill(pos + 1, remaining - e, cur, out);
        }
    }
    let mut out = Vec::new();
    for deg in min_degree..=max_degree {
        let mut cur = [0u32; D];
        fill(0, deg as u32, &mut cur, &mut out);
    }
    out
}

fn monomial<const D: usize>(exp: &[u32; D], z: &SVector<f64, D>) -> f64 {
    let mut v = 1.0;
    for i in 0..D {
        v *= z[i].powi(exp[i] as i32);
    }
    v
}

fn monomial_gradient<const D: usize>(exp: &[u32; D], z: &SVector<f64, D>) -> SVector<f64, D> {
    let mut g = SVector::<f64, D>::zeros();
    for i in 0..D {
        if exp[i] == 0 {
            continue;
        }
        let mut v = exp[i] as f64 * z[i].powi(exp[i] as i32 - 1);
        for j in 0..D {
            if j != i {
                v *= z[j].powi(exp[j] as i32);
            }
        }
        g[i] = v;
    }
    g
}

/// Curl-free vector polynomials of degree `ℓ - 1`, generated as gradients of
/// the scalar monomials of degree `1..=ℓ` (the constant is excluded since its
/// gradient vanishes).
#[derive(Clone, Debug, PartialEq)]
pub struct CurlFreePolyBasis<const D: usize> {
    order: usize,
    exponents: Vec<[u32; D]>,
    frame: PolyFrame<D>,
}

/// Curl-free polynomial basis of order `order` (scalar degree) in `D`
/// dimensions, expressed in global coordinates.
pub fn poly_basis<const D: usize>(order: usize) -> Result<CurlFreePolyBasis<D>> {
    CurlFreePolyBasis::new(order, PolyFrame::default())
}

impl<const D: usize> CurlFreePolyBasis<D> {
    pub fn new(order: usize, frame: PolyFrame<D>) -> Result<Self> {
        if D != 2 && D != 3 {
            return Err(Error::UnsupportedDimension(D));
        }
        if order < 1 {
            return Err(Error::InvalidParameter(
                "curl-free polynomial basis requires order >= 1".into(),
            ));
        }
        Ok(CurlFreePolyBasis {
            order,
            exponents: graded_lex_exponents::<D>(1, order),
            frame,
        })
    }

    /// Number of vector basis fields, `C(ℓ + d, d) - 1`.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn frame(&self) -> &PolyFrame<D> {
        &self.frame
    }

    pub fn exponents(&self) -> &[[u32; D]] {
        &self.exponents
    }

    /// Scalar monomial `p_k(x)`.
    pub fn scalar(&self, k: usize, x: &SVector<f64, D>) -> f64 {
        monomial(&self.exponents[k], &self.frame.local(x))
    }

    /// Vector basis field `∇p_k(x)`.
    pub fn field(&self, k: usize, x: &SVector<f64, D>) -> SVector<f64, D> {
        monomial_gradient(&self.exponents[k], &self.frame.local(x)) / self.frame.scale
    }

    /// `Σ_k b_k p_k(x)`
    pub fn combine_scalar(&self, coeffs: &[f64], x: &SVector<f64, D>) -> f64 {
        let z = self.frame.local(x);
        self.exponents
            .iter()
            .zip(coeffs)
            .map(|(e, b)| b * monomial(e, &z))
            .sum()
    }

    /// `Σ_k b_k ∇p_k(x)`
    pub fn combine_field(&self, coeffs: &[f64], x: &SVector<f64, D>) -> SVector<f64, D> {
        let z = self.frame.local(x);
        let mut acc = SVector::<f64, D>::zeros();
        for (e, b) in self.exponents.iter().zip(coeffs) {
            acc += monomial_gradient(e, &z) * *b;
        }
        acc / self.frame.scale
    }
}

/// Scalar polynomials used to augment the residual spline: the constant
/// alone, or constant plus linear terms.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarPolyBasis<const D: usize> {
    linear: bool,
    frame: PolyFrame<D>,
}

impl<const D: usize> ScalarPolyBasis<D> {
    pub fn new(linear: bool, frame: PolyFrame<D>) -> Self {
        ScalarPolyBasis { linear, frame }
    }

    pub fn len(&self) -> usize {
        if self.linear {
            1 + D
        } else {
            1
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_linear(&self) -> bool {
        self.linear
    }

    pub fn eval(&self, k: usize, x: &SVector<f64, D>) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.frame.local(x)[k - 1]
        }
    }

    pub fn combine(&self, coeffs: &[f64], x: &SVector<f64, D>) -> f64 {
        let mut v = coeffs[0];
        if self.linear {
            let z = self.frame.local(x);
            for i in 0..D {
                v += coeffs[i + 1] * z[i];
            }
        }
        v
    }

    /// Gradient of `combine(coeffs, ·)`, constant in `x`.
    pub fn gradient(&self, coeffs: &[f64]) -> SVector<f64, D> {
        if self.linear {
            SVector::from_fn(|i, _| coeffs[i + 1] / self.frame.scale)
        } else {
            SVector::zeros()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Vector2, Vector3};

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    fn all_kernels() -> Vec<RadialKernel> {
        vec![
            RadialKernel::PhsOdd { order: 1 },
            RadialKernel::PhsOdd { order: 2 },
            RadialKernel::PhsOdd { order: 3 },
            RadialKernel::PhsEven { order: 2 },
            RadialKernel::PhsEven { order: 3 },
            RadialKernel::Gaussian { shape: 0.8 },
            RadialKernel::InverseMultiquadric { shape: 1.3 },
            RadialKernel::Multiquadric { shape: 0.6 },
        ]
    }

    #[test]
    fn scalar_values() {
        assert_eq!(RadialKernel::PhsOdd { order: 1 }.eval(2.0), 8.0);
        assert_eq!(RadialKernel::PhsOdd { order: 2 }.eval(1.0), -1.0);
        assert_eq!(RadialKernel::PhsOdd { order: 0 }.eval(3.0), -3.0);
        assert_eq!(RadialKernel::PhsEven { order: 1 }.eval(1.0), 0.0);
        assert_eq!(RadialKernel::PhsEven { order: 1 }.eval(0.0), 0.0);
        assert!((RadialKernel::Gaussian { shape: 2.0 }.eval(0.5) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((RadialKernel::Multiquadric { shape: 1.0 }.eval(1.0) + 2f64.sqrt()).abs() < 1e-15);
        assert!(
            (RadialKernel::InverseMultiquadric { shape: 1.0 }.eval(1.0) - 1.0 / 2f64.sqrt()).abs()
                < 1e-15
        );
    }

    #[test]
    fn admissibility_rules() {
        assert!(!RadialKernel::PhsOdd { order: 0 }.is_curl_free_admissible());
        assert!(RadialKernel::PhsOdd { order: 1 }.is_curl_free_admissible());
        assert!(!RadialKernel::PhsEven { order: 1 }.is_curl_free_admissible());
        assert!(RadialKernel::PhsEven { order: 2 }.is_curl_free_admissible());
        assert!(RadialKernel::PhsEven { order: 0 }.validate().is_err());
        assert!(RadialKernel::Gaussian { shape: 0.0 }.validate().is_err());
        assert!(RadialKernel::Gaussian { shape: 1.0 }.is_curl_free_admissible());
    }

    #[test]
    fn cubic_curl_free_matrix_on_axis() {
        let k = RadialKernel::PhsOdd { order: 1 };
        let m = k.curl_free_matrix(&Vector3::new(1.0, 0.0, 0.0), &Vector3::zeros());
        let expected = SMatrix::<f64, 3, 3>::from_diagonal(&Vector3::new(-6.0, -3.0, -3.0));
        assert!((m - expected).abs().max() < 1e-14);
    }

    #[test]
    fn coincident_point_limits() {
        let x = Vector3::new(0.2, -0.1, 0.4);
        let m = RadialKernel::PhsOdd { order: 1 }.curl_free_matrix(&x, &x);
        assert_eq!(m, SMatrix::<f64, 3, 3>::zeros());
        let g = RadialKernel::Gaussian { shape: 1.0 }.curl_free_matrix(&x, &x);
        assert!((g - SMatrix::<f64, 3, 3>::identity() * 2.0).abs().max() < 1e-15);
        for k in all_kernels() {
            assert_eq!(k.potential_row(&x, &x), Vector3::zeros());
        }
    }

    #[test]
    fn gaussian_limit_matches_finite_difference() {
        // Hessian of exp(-r²) by central differences at r = 1e-4, negated.
        let k = RadialKernel::Gaussian { shape: 1.0 };
        let y = Vector2::new(0.0, 0.0);
        let x = Vector2::new(1e-4, 0.0);
        let h = 1e-4;
        let f = |p: Vector2<f64>| k.eval((p - y).norm());
        let mut hess = SMatrix::<f64, 2, 2>::zeros();
        for i in 0..2 {
            for j in 0..2 {
                let mut ei = Vector2::zeros();
                ei[i] = h;
                let mut ej = Vector2::zeros();
                ej[j] = h;
                hess[(i, j)] =
                    (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h * h);
            }
        }
        let m = k.curl_free_matrix(&x, &y);
        assert!((m + hess).abs().max() < 1e-6);
        assert!((m - SMatrix::<f64, 2, 2>::identity() * 2.0).abs().max() < 1e-6);
    }

    #[test]
    fn symmetric_and_swap_invariant_exactly() {
        let x = Vector2::new(0.3, 0.7);
        let y = Vector2::new(-0.45, 1.1);
        for k in all_kernels() {
            let m = k.curl_free_matrix(&x, &x);
            assert_eq!(m, m.transpose());
            let a = k.curl_free_matrix(&x, &y);
            assert_eq!(a, a.transpose());
            assert_eq!(a, k.curl_free_matrix(&y, &x));
        }
    }

    fn fd_hessian<const D: usize>(
        k: &RadialKernel,
        x: &SVector<f64, D>,
        y: &SVector<f64, D>,
        h: f64,
    ) -> SMatrix<f64, D, D> {
        let f = |p: SVector<f64, D>| k.eval((p - y).norm());
        let mut hess = SMatrix::<f64, D, D>::zeros();
        for i in 0..D {
            for j in 0..D {
                let mut ei = SVector::<f64, D>::zeros();
                ei[i] = h;
                let mut ej = SVector::<f64, D>::zeros();
                ej[j] = h;
                hess[(i, j)] = if i == j {
                    (-f(x + ei * 2.0) + 16.0 * f(x + ei) - 30.0 * f(*x) + 16.0 * f(x - ei)
                        - f(x - ei * 2.0))
                        / (12.0 * h * h)
                } else {
                    (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej))
                        / (4.0 * h * h)
                };
            }
        }
        hess
    }

    #[test]
    fn curl_free_matrix_is_negated_fd_hessian() {
        let dir = Vector3::new(0.48, -0.6, 0.64).normalize();
        let y = Vector3::new(0.1, 0.2, -0.3);
        for k in all_kernels() {
            for &r in &[1e-3f64, 0.1, 1.0, 10.0] {
                let x = y + dir * r;
                let h = match k {
                    RadialKernel::PhsOdd { .. } | RadialKernel::PhsEven { .. } => 1e-3 * r,
                    _ => 1e-4_f64.min(1e-2 * r.max(1e-2)),
                };
                let fd = -fd_hessian(&k, &x, &y, h);
                let m = k.curl_free_matrix(&x, &y);
                let scale = m.norm().max(1e-300);
                let rel = (m - fd).norm() / scale;
                assert!(rel < 1e-4, "{k:?} r={r}: rel={rel:e}");
            }
        }
    }

    #[test]
    fn potential_row_is_negated_gradient() {
        let y = Vector3::new(0.0, 0.0, 0.0);
        let k = RadialKernel::PhsOdd { order: 1 };
        let row = k.potential_row(&Vector3::new(1.0, 0.0, 0.0), &y);
        assert!((row - Vector3::new(-3.0, 0.0, 0.0)).norm() < 1e-14);

        let dir = Vector3::new(1.0, 2.0, -2.0).normalize();
        for k in all_kernels() {
            let x = y + dir * 0.7;
            let h = 1e-6;
            let fd = (k.eval((x + dir * h - y).norm()) - k.eval((x - dir * h - y).norm())) / (2.0 * h);
            let analytic = -k.potential_row(&x, &y).dot(&dir);
            assert!(
                (fd - analytic).abs() <= 1e-6 * analytic.abs().max(1e-12),
                "{k:?}: fd={fd} analytic={analytic}"
            );
        }
    }

    #[test]
    fn matrix_field_is_gradient_of_potential_row() {
        // x ↦ Φ(x,y)c equals ∇(x ↦ potential_row(x,y)·c)
        let y = Vector3::new(0.3, -0.2, 0.1);
        let c = Vector3::new(0.7, -1.1, 0.4);
        let x = Vector3::new(0.9, 0.5, -0.6);
        for k in all_kernels() {
            let field = k.curl_free_matrix(&x, &y) * c;
            let g = |p: Vector3<f64>| k.potential_row(&p, &y).dot(&c);
            let h = 1e-6;
            let mut fd = Vector3::zeros();
            for i in 0..3 {
                let mut e = Vector3::zeros();
                e[i] = h;
                fd[i] = (g(x + e) - g(x - e)) / (2.0 * h);
            }
            let rel = (field - fd).norm() / field.norm();
            assert!(rel < 1e-5, "{k:?}: rel={rel:e}");
        }
    }

    #[test]
    fn basis_sizes() {
        let b = poly_basis::<3>(1).unwrap();
        assert_eq!(b.len(), 3);
        for k in 0..3 {
            let mut e = Vector3::zeros();
            e[k] = 1.0;
            assert_eq!(b.field(k, &Vector3::new(0.3, 2.0, -1.0)), e);
        }
        assert_eq!(poly_basis::<3>(2).unwrap().len(), 9);
        assert_eq!(poly_basis::<2>(2).unwrap().len(), 5);
        for d_order in 1..=4 {
            assert_eq!(poly_basis::<2>(d_order).unwrap().len(), binomial(d_order + 2, 2) - 1);
            assert_eq!(poly_basis::<3>(d_order).unwrap().len(), binomial(d_order + 3, 3) - 1);
        }
        assert!(matches!(poly_basis::<4>(1), Err(Error::UnsupportedDimension(4))));
        assert!(poly_basis::<3>(0).is_err());
    }

    #[test]
    fn graded_lex_order_is_fixed() {
        let e = graded_lex_exponents::<3>(1, 2);
        assert_eq!(
            e,
            vec![
                [1, 0, 0],
                [0, 1, 0],
                [0, 0, 1],
                [2, 0, 0],
                [1, 1, 0],
                [1, 0, 1],
                [0, 2, 0],
                [0, 1, 1],
                [0, 0, 2]
            ]
        );
    }

    #[test]
    fn degree_one_fields_span_listed_basis() {
        // The listed 3D basis: e1, e2, e3, (y,x,0), (z,0,x), (0,z,y), (x,0,0), (0,y,0), (0,0,z).
        let b = poly_basis::<3>(2).unwrap();
        let listed = |x: &Vector3<f64>| -> Vec<Vector3<f64>> {
            vec![
                Vector3::x(),
                Vector3::y(),
                Vector3::z(),
                Vector3::new(x.y, x.x, 0.0),
                Vector3::new(x.z, 0.0, x.x),
                Vector3::new(0.0, x.z, x.y),
                Vector3::new(x.x, 0.0, 0.0),
                Vector3::new(0.0, x.y, 0.0),
                Vector3::new(0.0, 0.0, x.z),
            ]
        };
        // Each of our fields, sampled at several points, must be a fixed
        // combination of the listed fields: check via least squares on a stack.
        let pts: Vec<Vector3<f64>> = (0..6)
            .map(|i| {
                let t = i as f64;
                Vector3::new((1.3 * t).sin(), (0.7 * t + 0.4).cos(), 0.1 * t * t)
            })
            .collect();
        let rows = pts.len() * 3;
        let mut listed_m = nalgebra::DMatrix::zeros(rows, 9);
        let mut ours = nalgebra::DMatrix::zeros(rows, 9);
        for (j, p) in pts.iter().enumerate() {
            let l = listed(p);
            for k in 0..9 {
                for i in 0..3 {
                    listed_m[(3 * j + i, k)] = l[k][i];
                    ours[(3 * j + i, k)] = b.field(k, p)[i];
                }
            }
        }
        let svd = listed_m.clone().svd(true, true);
        let coeffs = svd.solve(&ours, 1e-12).unwrap();
        assert!((listed_m.clone() * coeffs - &ours).norm() < 1e-10);
        assert_eq!(listed_m.rank(1e-10), 9);
        assert_eq!(ours.rank(1e-10), 9);
    }

    #[test]
    fn fields_are_fd_gradients_of_monomials() {
        let frame = PolyFrame {
            origin: Vector3::new(0.5, -0.25, 1.0),
            scale: 0.8,
        };
        let b = CurlFreePolyBasis::<3>::new(3, frame).unwrap();
        let x = Vector3::new(0.9, 0.1, 1.3);
        let h = 1e-5;
        for k in 0..b.len() {
            let mut fd = Vector3::zeros();
            for i in 0..3 {
                let mut e = Vector3::zeros();
                e[i] = h;
                fd[i] = (b.scalar(k, &(x + e)) - b.scalar(k, &(x - e))) / (2.0 * h);
            }
            assert!((b.field(k, &x) - fd).norm() < 1e-8, "basis {k}");
        }
    }
}
