//! The full reconstruction: per-patch curl-free fits, shifted potentials and
//! their partition-of-unity blend.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::isosurface::ScalarGrid;
use crate::kernels::{CurlFreePolyBasis, RadialKernel};
use crate::partition::PatchCover;
use crate::pointcloud::{bounds_of, OrientedPointCloud};
use crate::solver::{
    assemble, default_grid, fit_residual, gcv_select, gcv_select_residual, CurlFreeFit, ResidualSpline,
};
use crate::Point;

/// How each local potential is shifted before blending.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftMode {
    /// Subtract the mean of the potential over the patch points.
    Mean,
    /// Subtract a spline interpolating the potential at the patch points.
    Exact,
    /// Subtract a smoothing spline of the potential values.
    Regularized,
}

/// Choice of a smoothing parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamMode {
    None,
    Fixed(f64),
    Gcv,
}

/// Fixed smoothing parameters for one patch, taking precedence over the
/// global modes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PatchOverride {
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfpuConfig {
    /// Polyharmonic order ℓ.
    pub order: usize,
    /// Patch overlap δ.
    pub delta: f64,
    /// Requested number of patches.
    pub patches: usize,
    pub shift: ShiftMode,
    pub lambda: ParamMode,
    /// Residual smoothing, used by the regularized shift and by per-patch
    /// overrides in exact mode.
    pub alpha: ParamMode,
    pub overrides: BTreeMap<usize, PatchOverride>,
    /// Kernel family; its order is replaced by the working order. Defaults to
    /// `r^(2ℓ) log r` in 2D and `r^(2ℓ+1)` in 3D.
    pub kernel: Option<RadialKernel>,
    /// Candidate values for GCV.
    pub gcv_grid: Vec<f64>,
}

impl Default for CfpuConfig {
    fn default() -> Self {
        CfpuConfig {
            order: 1,
            delta: 1.0,
            patches: 1,
            shift: ShiftMode::Mean,
            lambda: ParamMode::None,
            alpha: ParamMode::None,
            overrides: BTreeMap::new(),
            kernel: None,
            gcv_grid: default_grid(),
        }
    }
}

impl CfpuConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.order < 1 {
            return bad("order must be at least 1".into());
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.patches < 1 {
            return bad("need at least one patch".into());
        }
        let param_ok = |p: &ParamMode| !matches!(p, ParamMode::Fixed(v) if !(*v >= 0.0) || !v.is_finite());
        if !param_ok(&self.lambda) || !param_ok(&self.alpha) {
            return bad("smoothing parameters must be finite and >= 0".into());
        }
        if self.shift == ShiftMode::Regularized && self.alpha == ParamMode::None {
            return bad("regularized shift needs a fixed or GCV alpha".into());
        }
        for (m, o) in &self.overrides {
            for v in [o.lambda, o.alpha].into_iter().flatten() {
                if !(v >= 0.0) || !v.is_finite() {
                    return bad(format!("override for patch {m} must be finite and >= 0"));
                }
            }
        }
        if (matches!(self.lambda, ParamMode::Gcv) || matches!(self.alpha, ParamMode::Gcv)) && self.gcv_grid.is_empty() {
            return bad("GCV grid is empty".into());
        }
        if let Some(k) = self.kernel {
            k.validate()?;
        }
        Ok(())
    }

    /// Kernel used at order `order` in `dim` dimensions.
    pub fn kernel_for(&self, order: usize, dim: usize) -> RadialKernel {
        let k = match self.kernel {
            Some(k) => k.with_order(order as u32),
            None => RadialKernel::phs_for_dim(order as u32, dim),
        };
        if k.is_curl_free_admissible() {
            k
        } else {
            // r^(2ℓ) log r is not C² for ℓ = 1
            RadialKernel::PhsOdd { order: order as u32 }
        }
    }

    /// Minimum patch population `2L`.
    pub fn n_min(&self, dim: usize) -> usize {
        let l = (1..=dim).fold(1usize, |acc, i| acc * (self.order + i) / i) - 1;
        2 * l
    }
}

/// Shift subtracted from a local potential.
#[derive(Clone, Debug)]
pub enum Shift<const D: usize> {
    Constant(f64),
    Spline(ResidualSpline<D>),
}

impl<const D: usize> Shift<D> {
    pub fn eval(&self, x: &Point<D>) -> f64 {
        match self {
            Shift::Constant(v) => *v,
            Shift::Spline(s) => s.eval(x),
        }
    }

    pub fn gradient(&self, x: &Point<D>) -> Point<D> {
        match self {
            Shift::Constant(_) => Point::<D>::zeros(),
            Shift::Spline(s) => s.gradient(x),
        }
    }
}

/// Fitted patch.
#[derive(Clone, Debug)]
pub struct LocalModel<const D: usize> {
    pub fit: CurlFreeFit<D>,
    pub shift: Shift<D>,
    /// Set when GCV found no signal outside the polynomial space.
    pub gcv_degenerate: bool,
}

impl<const D: usize> LocalModel<D> {
    /// `s_m(x) − shift_m(x)`
    pub fn shifted_potential(&self, x: &Point<D>) -> f64 {
        self.fit.eval_potential(x) - self.shift.eval(x)
    }

    pub fn shifted_gradient(&self, x: &Point<D>) -> Point<D> {
        self.fit.eval_field(x) - self.shift.gradient(x)
    }

    pub fn alpha(&self) -> Option<f64> {
        match &self.shift {
            Shift::Constant(_) => None,
            Shift::Spline(s) => Some(s.alpha),
        }
    }
}

/// Per-patch summary for diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchInfo<const D: usize> {
    pub index: usize,
    pub center: Point<D>,
    pub radius: f64,
    pub members: usize,
    pub order: usize,
    pub lambda: f64,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CfpuModel<const D: usize> {
    pub cover: PatchCover<D>,
    pub patches: Vec<LocalModel<D>>,
    pub config: CfpuConfig,
    bounds: (Point<D>, Point<D>),
}

/// Builds the cover and fits every patch.
pub fn fit<const D: usize>(cloud: &OrientedPointCloud<D>, config: &CfpuConfig) -> Result<CfpuModel<D>> {
    config.validate()?;
    if D != 2 && D != 3 {
        return Err(Error::UnsupportedDimension(D));
    }
    let points = cloud.points();
    let target = config.patches.min(points.len());
    if target < config.patches {
        log::warn!("requested {} patches but only {} points", config.patches, points.len());
    }
    let cover = PatchCover::build(points, target, config.delta, config.n_min(D))?;
    CfpuModel::fit_with_cover(cloud, config, cover)
}

impl<const D: usize> CfpuModel<D> {
    /// Fits every patch of a prebuilt cover.
    pub fn fit_with_cover(cloud: &OrientedPointCloud<D>, config: &CfpuConfig, cover: PatchCover<D>) -> Result<Self> {
        config.validate()?;
        let results: Vec<Result<LocalModel<D>>> = (0..cover.len())
            .into_par_iter()
            .map(|m| {
                let pts: Vec<Point<D>> = cover.members[m].iter().map(|&i| cloud.points()[i]).collect();
                let nrm: Vec<Point<D>> = cover.members[m].iter().map(|&i| cloud.normals()[i]).collect();
                fit_patch(&pts, &nrm, config, config.overrides.get(&m)).map_err(|e| Error::DegeneratePatch {
                    patch: m,
                    source: Box::new(e),
                })
            })
            .collect();
        let patches = results.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(CfpuModel {
            cover,
            patches,
            config: config.clone(),
            bounds: bounds_of(cloud.points()),
        })
    }

    pub fn patch_info(&self) -> Vec<PatchInfo<D>> {
        self.patches
            .iter()
            .enumerate()
            .map(|(m, p)| PatchInfo {
                index: m,
                center: self.cover.centers[m],
                radius: self.cover.radii[m],
                members: self.cover.members[m].len(),
                order: p.fit.order(),
                lambda: p.fit.lambda,
                alpha: p.alpha(),
            })
            .collect()
    }

    /// Blended potential, `None` outside the cover.
    pub fn eval(&self, x: &Point<D>) -> Option<f64> {
        let cover = self.cover.covering_patches(x);
        if cover.is_empty() {
            return None;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for m in cover {
            let k = self.cover.bump(m, x);
            num += k * self.patches[m].shifted_potential(x);
            den += k;
        }
        Some(num / den)
    }

    /// Gradient of the blended potential, `None` outside the cover.
    pub fn gradient(&self, x: &Point<D>) -> Option<Point<D>> {
        let cover = self.cover.covering_patches(x);
        if cover.is_empty() {
            return None;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        let mut dnum = Point::<D>::zeros();
        let mut dden = Point::<D>::zeros();
        for m in cover {
            let delta = x - self.cover.centers[m];
            let rho = self.cover.radii[m];
            let dist = delta.norm();
            let r = dist / rho;
            let k = crate::partition::kappa(r);
            let dk = if dist == 0.0 {
                Point::<D>::zeros()
            } else {
                let slope = if r <= 1.0 / 3.0 { -6.0 * r } else { -3.0 * (1.0 - r) };
                delta * (slope / (dist * rho))
            };
            let s = self.patches[m].shifted_potential(x);
            let ds = self.patches[m].shifted_gradient(x);
            num += k * s;
            den += k;
            dnum += dk * s + ds * k;
            dden += dk;
        }
        Some((dnum * den - dden * num) / (den * den))
    }

    /// Bounding box of the fitted cloud.
    pub fn cloud_bounds(&self) -> (Point<D>, Point<D>) {
        self.bounds
    }

    /// Cloud bounds grown by the largest patch radius on every side.
    pub fn default_bbox(&self) -> (Point<D>, Point<D>) {
        let pad = Point::<D>::repeat(self.cover.max_radius());
        (self.bounds.0 - pad, self.bounds.1 + pad)
    }

    /// Samples the potential on a grid with `resolution` cells per axis.
    /// Each patch evaluates only the nodes inside it; contributions are summed
    /// in ascending patch order, so the result matches [`CfpuModel::eval`]
    /// bit for bit and does not depend on the thread count.
    pub fn eval_grid(&self, bbox: Option<(Point<D>, Point<D>)>, resolution: usize) -> Result<ScalarGrid<D>> {
        if resolution < 2 {
            return Err(Error::InvalidParameter("grid resolution must be at least 2".into()));
        }
        let (lo, hi) = bbox.unwrap_or_else(|| self.default_bbox());
        if (0..D).any(|a| !(hi[a] > lo[a])) {
            return Err(Error::InvalidParameter("grid box is degenerate".into()));
        }
        let spacing = (hi - lo) / resolution as f64;
        let mut grid = ScalarGrid::new(lo, spacing, [resolution + 1; D])?;
        let mut num = vec![0.0; grid.len()];
        let mut den = vec![0.0; grid.len()];

        const CHUNK: usize = 64;
        let ids: Vec<usize> = (0..self.patches.len()).collect();
        for chunk in ids.chunks(CHUNK) {
            let buffers: Vec<Vec<(usize, f64, f64)>> = chunk
                .par_iter()
                .map(|&m| self.patch_contributions(&grid, m))
                .collect();
            for buf in buffers {
                for (node, k, ks) in buf {
                    num[node] += ks;
                    den[node] += k;
                }
            }
        }
        for i in 0..grid.len() {
            if den[i] > 0.0 {
                grid.values[i] = num[i] / den[i];
                grid.mask[i] = true;
            }
        }
        Ok(grid)
    }

    fn patch_contributions(&self, grid: &ScalarGrid<D>, m: usize) -> Vec<(usize, f64, f64)> {
        let c = self.cover.centers[m];
        let rho = self.cover.radii[m];
        let mut lo = [0usize; D];
        let mut hi = [0usize; D];
        for a in 0..D {
            let last = grid.dims[a] as f64 - 1.0;
            let from = ((c[a] - rho - grid.origin[a]) / grid.spacing[a]).floor().clamp(0.0, last);
            let to = ((c[a] + rho - grid.origin[a]) / grid.spacing[a]).ceil().clamp(0.0, last);
            lo[a] = from as usize;
            hi[a] = to as usize;
        }
        if (0..D).any(|a| c[a] + rho < grid.origin[a] || c[a] - rho > grid.origin[a] + grid.spacing[a] * (grid.dims[a] - 1) as f64) {
            return Vec::new();
        }
        let local = &self.patches[m];
        let mut out = Vec::new();
        let mut idx = lo;
        loop {
            let node = grid.index(idx);
            let x = grid.position(node);
            if (x - c).norm() < rho {
                let k = self.cover.bump(m, &x);
                out.push((node, k, k * local.shifted_potential(&x)));
            }
            // odometer over the index box, first axis fastest
            let mut a = 0;
            loop {
                if a == D {
                    return out;
                }
                if idx[a] < hi[a] {
                    idx[a] += 1;
                    break;
                }
                idx[a] = lo[a];
                a += 1;
            }
        }
    }
}

/// Fits one patch, lowering the order when the points are not unisolvent.
fn fit_patch<const D: usize>(
    points: &[Point<D>],
    normals: &[Point<D>],
    config: &CfpuConfig,
    over: Option<&PatchOverride>,
) -> Result<LocalModel<D>> {
    let mut order = config.order;
    let (fit, gcv_degenerate) = loop {
        match fit_field(points, normals, config, over, order) {
            Err(Error::NotUnisolvent { .. }) if order > 1 => {
                log::debug!("patch not unisolvent at order {order}; retrying at {}", order - 1);
                order -= 1;
            }
            other => break other?,
        }
    };

    let values: Vec<f64> = points.iter().map(|x| fit.eval_potential(x)).collect();
    let alpha = match (config.shift, over.and_then(|o| o.alpha)) {
        (ShiftMode::Mean, _) => None,
        (_, Some(a)) => Some(a),
        (ShiftMode::Exact, None) => Some(0.0),
        (ShiftMode::Regularized, None) => Some(match config.alpha {
            ParamMode::Fixed(a) => a,
            ParamMode::Gcv => gcv_select_residual(points, &values, &config.gcv_grid)?.lambda,
            ParamMode::None => 0.0,
        }),
    };
    let shift = match alpha {
        None => Shift::Constant(values.iter().sum::<f64>() / values.len() as f64),
        Some(a) => Shift::Spline(fit_residual(points, &values, a)?),
    };
    Ok(LocalModel {
        fit,
        shift,
        gcv_degenerate,
    })
}

fn fit_field<const D: usize>(
    points: &[Point<D>],
    normals: &[Point<D>],
    config: &CfpuConfig,
    over: Option<&PatchOverride>,
    order: usize,
) -> Result<(CurlFreeFit<D>, bool)> {
    let kernel = config.kernel_for(order, D);
    let sys = assemble(points, normals, kernel, order)?;
    let (lambda, degenerate) = match (over.and_then(|o| o.lambda), config.lambda) {
        (Some(l), _) => (l, false),
        (None, ParamMode::None) => (0.0, false),
        (None, ParamMode::Fixed(l)) => (l, false),
        (None, ParamMode::Gcv) => {
            if !crate::solver::has_full_column_rank(&sys.p) {
                return Err(Error::NotUnisolvent { degree: order });
            }
            let g = gcv_select(&sys.a, &sys.p, &sys.u, &config.gcv_grid)?;
            (g.lambda, g.degenerate)
        }
    };
    Ok((CurlFreeFit::from_system(points, kernel, sys, lambda)?, degenerate))
}

/// Curl-free polynomial basis size `L` for order `order` in `dim` dimensions.
pub fn basis_len(order: usize, dim: usize) -> usize {
    match dim {
        2 => CurlFreePolyBasis::<2>::new(order, Default::default()).map_or(0, |b| b.len()),
        3 => CurlFreePolyBasis::<3>::new(order, Default::default()).map_or(0, |b| b.len()),
        _ => 0,
    }
}
