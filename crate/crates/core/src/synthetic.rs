//! Test geometries with exact normals and error metrics against them.

use std::f64::consts::{PI, TAU};

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use crate::cfpu::CfpuModel;
use crate::error::{Error, Result};
use crate::pointcloud::OrientedPointCloud;
use crate::Point;

/// Surface given as the zero set of `f`, with a sampler on it.
pub trait ImplicitSurface<const D: usize>: Sync {
    fn value(&self, x: &Point<D>) -> f64;
    fn gradient(&self, x: &Point<D>) -> Point<D>;
    /// Roughly `n` points on the surface with unit normals `∇f / ‖∇f‖`.
    fn sample(&self, n: usize) -> Result<OrientedPointCloud<D>>;
}

/// Cassini oval `(x² + y²)² − 2a²(x² − y²) + a⁴ − b⁴ = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cassini {
    pub a: f64,
    pub b: f64,
}

impl Cassini {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > a) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Cassini oval needs b > a > 0 for a single curve, got a = {a}, b = {b}"
            )));
        }
        Ok(Cassini { a, b })
    }

    /// Polar radius at angle `theta`.
    pub fn radius(&self, theta: f64) -> f64 {
        let (a2, b4) = (self.a * self.a, self.b.powi(4));
        let s = (2.0 * theta).sin();
        (a2 * (2.0 * theta).cos() + (b4 - a2 * a2 * s * s).sqrt()).sqrt()
    }
}

impl ImplicitSurface<2> for Cassini {
    fn value(&self, p: &Vector2<f64>) -> f64 {
        let (x2, y2, a2) = (p.x * p.x, p.y * p.y, self.a * self.a);
        (x2 + y2).powi(2) - 2.0 * a2 * (x2 - y2) + a2 * a2 - self.b.powi(4)
    }

    fn gradient(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let (s, a2) = (p.norm_squared(), self.a * self.a);
        Vector2::new(4.0 * p.x * (s - a2), 4.0 * p.y * (s + a2))
    }

    fn sample(&self, n: usize) -> Result<OrientedPointCloud<2>> {
        if n < 4 {
            return Err(Error::InvalidParameter(format!("need at least 4 samples, got {n}")));
        }
        let points: Vec<Vector2<f64>> = (0..n)
            .map(|j| {
                let t = TAU * j as f64 / n as f64;
                Vector2::new(t.cos(), t.sin()) * self.radius(t)
            })
            .collect();
        let normals = points.iter().map(|p| self.gradient(p)).collect();
        OrientedPointCloud::new(points, normals)
    }
}

/// Samples `n` points of the Cassini oval equally spaced in angle.
pub fn cassini(n: usize, a: f64, b: f64) -> Result<(OrientedPointCloud<2>, Cassini)> {
    let c = Cassini::new(a, b)?;
    Ok((c.sample(n)?, c))
}

/// Sphere `‖x‖ = radius` about the origin, `f` the signed distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sphere {
    pub radius: f64,
}

impl ImplicitSurface<3> for Sphere {
    fn value(&self, x: &Vector3<f64>) -> f64 {
        x.norm() - self.radius
    }

    fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        x / x.norm()
    }

    /// Fibonacci spiral.
    fn sample(&self, n: usize) -> Result<OrientedPointCloud<3>> {
        if n < 4 || !(self.radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sphere needs n >= 4 and a positive radius, got n = {n}, radius = {}",
                self.radius
            )));
        }
        let golden = PI * (3.0 - 5f64.sqrt());
        let normals: Vec<Vector3<f64>> = (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden * i as f64;
                Vector3::new(r * t.cos(), r * t.sin(), z)
            })
            .collect();
        let points = normals.iter().map(|u| u * self.radius).collect();
        OrientedPointCloud::new(points, normals)
    }
}

pub fn sphere(n: usize, radius: f64) -> Result<(OrientedPointCloud<3>, Sphere)> {
    let s = Sphere { radius };
    Ok((s.sample(n)?, s))
}

/// Tube of constant radius around the (2,5) torus knot
/// `γ(t) = (cos 2t (cos 5t + 3), sin 2t (cos 5t + 3), sin 5t)`.
/// `f` is the distance to the core curve minus the tube radius.
#[derive(Clone, Debug)]
pub struct TrefoilPipe {
    pub radius: f64,
    // cumulative arc length on a uniform t grid
    arc: Vec<f64>,
    coarse: Vec<(f64, Vector3<f64>)>,
}

/// Frenet frame of the core curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub tangent: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub binormal: Vector3<f64>,
}

const ARC_STEPS: usize = 20_000;
const COARSE_STEPS: usize = 4_000;

impl TrefoilPipe {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("tube radius must be positive, got {radius}")));
        }
        let h = TAU / ARC_STEPS as f64;
        let mut arc = Vec::with_capacity(ARC_STEPS + 1);
        arc.push(0.0);
        for i in 0..ARC_STEPS {
            let (t0, t1) = (i as f64 * h, (i + 1) as f64 * h);
            // Simpson on each step
            let s = (Self::speed(t0) + 4.0 * Self::speed(0.5 * (t0 + t1)) + Self::speed(t1)) * h / 6.0;
            arc.push(arc[i] + s);
        }
        let coarse = (0..COARSE_STEPS)
            .map(|i| {
                let t = TAU * i as f64 / COARSE_STEPS as f64;
                (t, Self::curve(t))
            })
            .collect();
        Ok(TrefoilPipe { radius, arc, coarse })
    }

    pub fn curve(t: f64) -> Vector3<f64> {
        let r = (5.0 * t).cos() + 3.0;
        Vector3::new((2.0 * t).cos() * r, (2.0 * t).sin() * r, (5.0 * t).sin())
    }

    pub fn curve_d1(t: f64) -> Vector3<f64> {
        let (c2, s2, c5, s5) = ((2.0 * t).cos(), (2.0 * t).sin(), (5.0 * t).cos(), (5.0 * t).sin());
        let r = c5 + 3.0;
        let dr = -5.0 * s5;
        Vector3::new(dr * c2 - 2.0 * r * s2, dr * s2 + 2.0 * r * c2, 5.0 * c5)
    }

    pub fn curve_d2(t: f64) -> Vector3<f64> {
        let (c2, s2, c5, s5) = ((2.0 * t).cos(), (2.0 * t).sin(), (5.0 * t).cos(), (5.0 * t).sin());
        let r = c5 + 3.0;
        let dr = -5.0 * s5;
        let ddr = -25.0 * c5;
        Vector3::new(
            ddr * c2 - 4.0 * dr * s2 - 4.0 * r * c2,
            ddr * s2 + 4.0 * dr * c2 - 4.0 * r * s2,
            -25.0 * s5,
        )
    }

    fn speed(t: f64) -> f64 {
        Self::curve_d1(t).norm()
    }

    /// Total length of the core curve.
    pub fn length(&self) -> f64 {
        self.arc[ARC_STEPS]
    }

    pub fn frame(t: f64) -> Result<Frame> {
        let d1 = Self::curve_d1(t);
        let d2 = Self::curve_d2(t);
        let tangent = d1.normalize();
        let perp = d2 - tangent * d2.dot(&tangent);
        if perp.norm() <= 1e-12 * d2.norm().max(1.0) {
            return Err(Error::InvalidParameter(format!("core curve has zero curvature at t = {t}")));
        }
        let normal = perp.normalize();
        Ok(Frame {
            tangent,
            normal,
            binormal: tangent.cross(&normal),
        })
    }

    /// Parameter at arc-length fraction `s ∈ [0, 1]`.
    fn param_at(&self, s: f64) -> f64 {
        let target = s * self.length();
        let j = self.arc.partition_point(|&a| a < target).clamp(1, ARC_STEPS);
        let (a0, a1) = (self.arc[j - 1], self.arc[j]);
        let h = TAU / ARC_STEPS as f64;
        let mut t = (j - 1) as f64 * h + h * (target - a0) / (a1 - a0);
        // polish so sample spacing follows arc length closely
        for _ in 0..2 {
            let t0 = (j - 1) as f64 * h;
            let mid = 0.5 * (t0 + t);
            let arc = a0 + (Self::speed(t0) + 4.0 * Self::speed(mid) + Self::speed(t)) * (t - t0) / 6.0;
            t -= (arc - target) / Self::speed(t);
        }
        t
    }

    /// Lattice sizes `(n_t, n_θ)` with roughly `n` points and equal spacing
    /// along and around the tube.
    pub fn lattice(&self, n: usize) -> (usize, usize) {
        let ratio = self.length() / (TAU * self.radius);
        let n_theta = ((n as f64 / ratio).sqrt().round() as usize).max(3);
        let n_t = ((n as f64 / n_theta as f64).round() as usize).max(4);
        (n_t, n_theta)
    }

    /// Closest core parameter to `x`.
    pub fn closest_param(&self, x: &Vector3<f64>) -> f64 {
        let mut t = self
            .coarse
            .iter()
            .min_by(|a, b| (a.1 - x).norm_squared().total_cmp(&(b.1 - x).norm_squared()))
            .map(|c| c.0)
            .unwrap_or(0.0);
        for _ in 0..50 {
            let diff = Self::curve(t) - x;
            let d1 = Self::curve_d1(t);
            let g = diff.dot(&d1);
            let dg = d1.norm_squared() + diff.dot(&Self::curve_d2(t));
            if dg <= 0.0 {
                break;
            }
            let step = g / dg;
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        t
    }
}

impl ImplicitSurface<3> for TrefoilPipe {
    fn value(&self, x: &Vector3<f64>) -> f64 {
        (x - Self::curve(self.closest_param(x))).norm() - self.radius
    }

    fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        (x - Self::curve(self.closest_param(x))).normalize()
    }

    /// Staggered `(t, θ)` lattice with `t` spaced uniformly in arc length.
    fn sample(&self, n: usize) -> Result<OrientedPointCloud<3>> {
        if n < 16 {
            return Err(Error::InvalidParameter(format!("need at least 16 samples, got {n}")));
        }
        let (n_t, n_theta) = self.lattice(n);
        let mut points = Vec::with_capacity(n_t * n_theta);
        let mut normals = Vec::with_capacity(n_t * n_theta);
        for i in 0..n_t {
            let t = self.param_at(i as f64 / n_t as f64);
            let f = Self::frame(t)?;
            let c = Self::curve(t);
            let offset = if i % 2 == 1 { 0.5 } else { 0.0 };
            for j in 0..n_theta {
                let th = TAU * (j as f64 + offset) / n_theta as f64;
                let u = f.normal * th.cos() + f.binormal * th.sin();
                points.push(c + u * self.radius);
                normals.push(u);
            }
        }
        OrientedPointCloud::new(points, normals)
    }
}

pub fn trefoil_pipe(n: usize, radius: f64) -> Result<(OrientedPointCloud<3>, TrefoilPipe)> {
    let knot = TrefoilPipe::new(radius)?;
    Ok((knot.sample(n)?, knot))
}

/// Potential errors at points on the exact surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub rms: f64,
    pub max: f64,
    /// Samples evaluated.
    pub covered: usize,
    /// Samples outside every patch, excluded from the metrics.
    pub uncovered: usize,
}

/// RMS and max of the model potential over `samples`, which lie on the true
/// surface where the exact potential is zero.
pub fn error_report<const D: usize>(model: &CfpuModel<D>, samples: &[Point<D>]) -> Result<ErrorReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let values: Vec<Option<f64>> = samples.par_iter().map(|x| model.eval(x)).collect();
    let uncovered = values.iter().filter(|v| v.is_none()).count();
    if uncovered * 100 > samples.len() {
        return Err(Error::ExcessUncovered {
            uncovered,
            total: samples.len(),
        });
    }
    if uncovered > 0 {
        log::warn!("{uncovered} of {} error samples are outside the cover", samples.len());
    }
    let covered = samples.len() - uncovered;
    let (sum, max) = values
        .iter()
        .flatten()
        .fold((0.0, 0.0f64), |(s, m), v| (s + v * v, m.max(v.abs())));
    Ok(ErrorReport {
        rms: (sum / covered as f64).sqrt(),
        max,
        covered,
        uncovered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfpu::{fit, CfpuConfig, ShiftMode};
    use crate::spatial::KdTree;

    #[test]
    fn cassini_axis_crossing() {
        let c = Cassini::new(1.0, 1.1).unwrap();
        // x⁴ − 2x² + 1 − b⁴ = 0  ⇒  x² = 1 + b²
        let x = (1.0f64 + 1.1 * 1.1).sqrt();
        assert!((c.radius(0.0) - x).abs() < 1e-12);
        assert!((x - 1.48661).abs() < 1e-5);
        let (cloud, _) = cassini(30, 1.0, 1.1).unwrap();
        assert_eq!(cloud.len(), 30);
        assert!((cloud.normals()[0] - Vector2::x()).norm() < 1e-12);
    }

    #[test]
    fn cassini_samples_on_curve() {
        let (cloud, c) = cassini(200, 1.0, 1.1).unwrap();
        for (p, n) in cloud.points().iter().zip(cloud.normals()) {
            assert!(c.value(p).abs() <= 1e-10);
            assert!((n - c.gradient(p).normalize()).norm() <= 1e-10);
        }
        assert!(Cassini::new(1.0, 0.9).is_err());
        assert!(cassini(3, 1.0, 1.1).is_err());
    }

    #[test]
    fn knot_curve_start() {
        assert!((TrefoilPipe::curve(0.0) - Vector3::new(4.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn knot_derivatives_match_differences() {
        let h = 1e-5;
        for t in [0.0, 0.4, 1.7, 3.3, 5.9] {
            let d1 = (TrefoilPipe::curve(t + h) - TrefoilPipe::curve(t - h)) / (2.0 * h);
            let d2 = (TrefoilPipe::curve_d1(t + h) - TrefoilPipe::curve_d1(t - h)) / (2.0 * h);
            assert!((d1 - TrefoilPipe::curve_d1(t)).norm() < 1e-7);
            assert!((d2 - TrefoilPipe::curve_d2(t)).norm() < 1e-6);
        }
    }

    #[test]
    fn knot_samples_on_tube() {
        let (cloud, knot) = trefoil_pipe(2000, 0.7).unwrap();
        let (n_t, n_theta) = knot.lattice(2000);
        assert_eq!(cloud.len(), n_t * n_theta);
        for (p, n) in cloud.points().iter().zip(cloud.normals()) {
            let t = knot.closest_param(p);
            assert!(((p - TrefoilPipe::curve(t)).norm() - 0.7).abs() <= 1e-10);
            assert!(n.dot(&TrefoilPipe::frame(t).unwrap().tangent).abs() <= 1e-10);
            assert!(knot.value(p).abs() <= 1e-10);
            assert!((n - knot.gradient(p)).norm() <= 1e-10);
        }
    }

    fn mean_spacing(cloud: &OrientedPointCloud<3>) -> f64 {
        let tree = KdTree::new(cloud.points());
        cloud.points().iter().map(|p| tree.nearest_k(p, 2)[1].1).sum::<f64>() / cloud.len() as f64
    }

    #[test]
    fn knot_spacing_scales_with_inverse_sqrt_n() {
        let (a, _) = trefoil_pipe(3000, 0.7).unwrap();
        let (b, _) = trefoil_pipe(6000, 0.7).unwrap();
        let ratio = mean_spacing(&b) / mean_spacing(&a);
        assert!((ratio * 2f64.sqrt() - 1.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn sphere_samples_exact() {
        let (cloud, s) = sphere(500, 2.0).unwrap();
        for (p, n) in cloud.points().iter().zip(cloud.normals()) {
            assert!(s.value(p).abs() <= 1e-10);
            assert!((n - s.gradient(p)).norm() <= 1e-10);
        }
    }

    #[test]
    fn report_on_interpolated_points() {
        let (cloud, _) = sphere(400, 1.0).unwrap();
        let model = fit(
            &cloud,
            &CfpuConfig {
                patches: 12,
                shift: ShiftMode::Exact,
                ..Default::default()
            },
        )
        .unwrap();
        let r = error_report(&model, cloud.points()).unwrap();
        assert!(r.rms <= 1e-8 && r.rms <= r.max);
        assert_eq!(r.uncovered, 0);

        let far = vec![Vector3::new(50.0, 0.0, 0.0); 10];
        assert!(matches!(
            error_report(&model, &far),
            Err(Error::ExcessUncovered { uncovered: 10, total: 10 })
        ));
    }
}
