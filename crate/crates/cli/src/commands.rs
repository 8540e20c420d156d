use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cfpu::cfpu::{fit, CfpuModel, ParamMode, ShiftMode};
use cfpu::isosurface::{marching_cubes, marching_squares, ScalarGrid};
use cfpu::pointcloud::{
    estimate_normals, fmt_f64, load_cloud, perturb_normals, write_cloud, write_mesh, write_polylines, CloudFormat,
    LoadedCloud, MeshFormat, OrientedPointCloud, PointSet,
};
use cfpu::synthetic::{error_report, Cassini, ImplicitSurface, Sphere, TrefoilPipe};
use cfpu::Point;

use crate::config::{RunConfig, DEFAULT_EVAL_SAMPLES};
use crate::{CliError, EvalArgs, ReconstructArgs, Shape, ShapeArgs, SynthArgs};

fn init_threads(cfg: &RunConfig) -> Result<(), CliError> {
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}")))?;
    }
    Ok(())
}

fn mode_label(p: ParamMode) -> String {
    match p {
        ParamMode::None => "none".into(),
        ParamMode::Gcv => "gcv".into(),
        ParamMode::Fixed(v) => fmt_f64(v),
    }
}

fn shift_label(s: ShiftMode) -> &'static str {
    match s {
        ShiftMode::Mean => "mean",
        ShiftMode::Exact => "exact",
        ShiftMode::Regularized => "regularized",
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Applies normal estimation and noise as configured.
fn orient<const D: usize>(set: PointSet<D>, cfg: &RunConfig) -> Result<OrientedPointCloud<D>, CliError> {
    let cloud = match cfg.estimate_normals {
        Some(k) => {
            if set.has_normals() {
                log::info!("replacing input normals with estimates from {k} neighbors");
            }
            estimate_normals(&set.points, k)?
        }
        None => set.into_oriented()?,
    };
    Ok(perturb_normals(&cloud, cfg.noise, cfg.seed)?)
}

fn bbox<const D: usize>(cfg: &RunConfig) -> Result<Option<(Point<D>, Point<D>)>, CliError> {
    match &cfg.bbox {
        None => Ok(None),
        Some(b) if b.len() == 2 * D => Ok(Some((
            Point::<D>::from_fn(|i, _| b[i]),
            Point::<D>::from_fn(|i, _| b[D + i]),
        ))),
        Some(b) => Err(CliError::usage(format!("bbox has {} numbers but the cloud is {D}D", b.len()))),
    }
}

struct Fitted<const D: usize> {
    model: CfpuModel<D>,
    grid: ScalarGrid<D>,
    summary: Vec<(String, String)>,
}

fn fit_and_sample<const D: usize>(cloud: &OrientedPointCloud<D>, cfg: &RunConfig) -> Result<Fitted<D>, CliError> {
    let t = Instant::now();
    let model = fit(cloud, &cfg.cfpu)?;
    println!("fit: {} patches in {:.3} s", model.patches.len(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let grid = model.eval_grid(bbox::<D>(cfg)?, cfg.grid_res)?;
    println!("grid: {} nodes in {:.3} s", grid.len(), t.elapsed().as_secs_f64());

    let sizes: Vec<usize> = model.cover.members.iter().map(Vec::len).collect();
    let (lo, hi) = grid.value_range().unwrap_or((f64::NAN, f64::NAN));
    let c = &cfg.cfpu;
    let summary = vec![
        ("dimension".into(), D.to_string()),
        ("points".into(), cloud.len().to_string()),
        ("patches".into(), model.patches.len().to_string()),
        ("order".into(), c.order.to_string()),
        ("delta".into(), fmt_f64(c.delta)),
        ("shift".into(), shift_label(c.shift).into()),
        ("lambda".into(), mode_label(c.lambda)),
        ("alpha".into(), mode_label(c.alpha)),
        ("seed".into(), cfg.seed.to_string()),
        ("noise".into(), fmt_f64(cfg.noise)),
        ("patch_points_min".into(), sizes.iter().min().unwrap_or(&0).to_string()),
        ("patch_points_max".into(), sizes.iter().max().unwrap_or(&0).to_string()),
        (
            "patch_points_mean".into(),
            fmt_f64(sizes.iter().sum::<usize>() as f64 / sizes.len().max(1) as f64),
        ),
        (
            "patches_reduced_order".into(),
            model.patches.iter().filter(|p| p.fit.order() < c.order).count().to_string(),
        ),
        ("grid_resolution".into(), cfg.grid_res.to_string()),
        ("grid_covered".into(), grid.covered_count().to_string()),
        ("potential_min".into(), fmt_f64(lo)),
        ("potential_max".into(), fmt_f64(hi)),
    ];
    Ok(Fitted { model, grid, summary })
}

fn write_summary(path: &Path, rows: &[(String, String)]) -> Result<(), CliError> {
    let mut text = String::from("key,value\n");
    for (k, v) in rows {
        let _ = writeln!(text, "{k},{v}");
    }
    std::fs::write(path, text).map_err(CliError::write)
}

fn write_patch_summary<const D: usize>(path: &Path, model: &CfpuModel<D>) -> Result<(), CliError> {
    let axes = ["x", "y", "z"];
    let mut text = String::from("patch");
    for a in &axes[..D] {
        let _ = write!(text, ",center_{a}");
    }
    text.push_str(",radius,points,order,lambda,alpha,gcv_flat\n");
    for (info, local) in model.patch_info().iter().zip(&model.patches) {
        let _ = write!(text, "{}", info.index);
        for i in 0..D {
            let _ = write!(text, ",{}", fmt_f64(info.center[i]));
        }
        let _ = writeln!(
            text,
            ",{},{},{},{},{},{}",
            fmt_f64(info.radius),
            info.members,
            info.order,
            fmt_f64(info.lambda),
            info.alpha.map(fmt_f64).unwrap_or_default(),
            local.gcv_degenerate
        );
    }
    std::fs::write(path, text).map_err(CliError::write)
}

pub fn reconstruct(args: ReconstructArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::resolve(&args.fit)?;
    init_threads(&cfg)?;
    let input = args
        .input
        .or(cfg.input.take())
        .ok_or_else(|| CliError::usage("no input cloud given".into()))?;
    let output = args
        .output
        .or(cfg.output.take())
        .ok_or_else(|| CliError::usage("no output path given".into()))?;
    let format = match &args.format {
        Some(s) => s.parse::<CloudFormat>()?,
        None => cfg
            .format
            .or_else(|| CloudFormat::from_path(&input))
            .ok_or_else(|| CliError::usage(format!("cannot tell the format of {}", input.display())))?,
    };
    let mesh_format = match &args.mesh_format {
        Some(s) => s.parse::<MeshFormat>()?,
        None => cfg.mesh_format.or_else(|| MeshFormat::from_path(&output)).unwrap_or(MeshFormat::Obj),
    };
    let summary_path = args
        .summary
        .or(cfg.summary.take())
        .unwrap_or_else(|| with_suffix(&output, ".summary.csv"));
    let patch_path = args
        .patch_summary
        .or(cfg.patch_summary.take())
        .unwrap_or_else(|| with_suffix(&output, ".patches.csv"));

    let start = Instant::now();
    let t = Instant::now();
    let loaded = load_cloud(&input, format)?;
    println!("load: {} points ({}D) in {:.3} s", loaded.len(), loaded.dim(), t.elapsed().as_secs_f64());

    let mut summary = match loaded {
        LoadedCloud::Planar(set) => {
            let cloud = orient(set, &cfg)?;
            let f = fit_and_sample(&cloud, &cfg)?;
            let t = Instant::now();
            let lines = marching_squares(&f.grid);
            println!("contour: {} polylines in {:.3} s", lines.len(), t.elapsed().as_secs_f64());
            write_polylines(&lines, &output, mesh_format).map_err(CliError::write)?;
            write_patch_summary(&patch_path, &f.model)?;
            let mut s = f.summary;
            s.push(("polylines".into(), lines.len().to_string()));
            s.push(("closed_polylines".into(), lines.iter().filter(|l| l.closed).count().to_string()));
            s.push((
                "segments".into(),
                lines.iter().map(|l| l.segment_count()).sum::<usize>().to_string(),
            ));
            s
        }
        LoadedCloud::Spatial(set) => {
            let cloud = orient(set, &cfg)?;
            let f = fit_and_sample(&cloud, &cfg)?;
            let t = Instant::now();
            let mesh = marching_cubes(&f.grid);
            println!(
                "mesh: {} vertices, {} triangles in {:.3} s",
                mesh.vertices.len(),
                mesh.triangles.len(),
                t.elapsed().as_secs_f64()
            );
            if mesh.is_empty() {
                log::warn!("the zero-level set does not cross the grid; writing an empty mesh");
            }
            write_mesh(&mesh, &output, mesh_format).map_err(CliError::write)?;
            write_patch_summary(&patch_path, &f.model)?;
            let mut s = f.summary;
            s.push(("vertices".into(), mesh.vertices.len().to_string()));
            s.push(("triangles".into(), mesh.triangles.len().to_string()));
            s.push(("euler_characteristic".into(), mesh.euler_characteristic().to_string()));
            s.push(("boundary_edges".into(), mesh.boundary_edge_count().to_string()));
            s.push(("components".into(), mesh.component_count().to_string()));
            s
        }
    };
    summary.insert(0, ("input".into(), input.display().to_string()));
    write_summary(&summary_path, &summary)?;
    for (k, v) in &summary {
        println!("{k}: {v}");
    }
    println!("total: {:.3} s", start.elapsed().as_secs_f64());
    println!("wrote {}", output.display());
    Ok(())
}

fn check_shape(args: &ShapeArgs) -> Result<(), CliError> {
    if let Some(r) = args.radius {
        if !(r > 0.0) || !r.is_finite() {
            return Err(CliError::usage(format!("radius must be positive, got {r}")));
        }
    }
    Ok(())
}

fn trefoil(args: &ShapeArgs) -> Result<TrefoilPipe, CliError> {
    Ok(TrefoilPipe::new(args.radius.unwrap_or(0.7))?)
}

fn sphere(args: &ShapeArgs) -> Sphere {
    Sphere {
        radius: args.radius.unwrap_or(1.0),
    }
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    check_shape(&args.shape)?;
    let s = &args.shape;
    match s.shape {
        Shape::Cassini => {
            let cloud = Cassini::new(s.a, s.b)?.sample(s.n)?;
            let cloud = perturb_normals(&cloud, args.sigma, args.seed)?;
            write_cloud(&cloud, &args.output, CloudFormat::Xyz).map_err(CliError::write)?;
            println!("wrote {} points to {}", cloud.len(), args.output.display());
        }
        Shape::Trefoil | Shape::Sphere => {
            let cloud = match s.shape {
                Shape::Trefoil => trefoil(s)?.sample(s.n)?,
                _ => sphere(s).sample(s.n)?,
            };
            let cloud = perturb_normals(&cloud, args.sigma, args.seed)?;
            write_cloud(&cloud, &args.output, CloudFormat::Xyz).map_err(CliError::write)?;
            println!("wrote {} points to {}", cloud.len(), args.output.display());
        }
    }
    Ok(())
}

fn load_set<const D: usize>(path: &Path) -> Result<PointSet<D>, CliError> {
    let format = CloudFormat::from_path(path).unwrap_or(CloudFormat::Xyz);
    let loaded = load_cloud(path, format)?;
    let dim = loaded.dim();
    // reinterpret through the matching variant
    let any: Box<dyn std::any::Any> = match loaded {
        LoadedCloud::Planar(s) => Box::new(s),
        LoadedCloud::Spatial(s) => Box::new(s),
    };
    any.downcast::<PointSet<D>>()
        .map(|b| *b)
        .map_err(|_| CliError::usage(format!("{} holds {dim}D points but the shape is {D}D", path.display())))
}

fn eval_shape<const D: usize, S: ImplicitSurface<D>>(
    surface: &S,
    args: &EvalArgs,
    cfg: &RunConfig,
) -> Result<(usize, f64, f64), CliError> {
    let set = match &args.input {
        Some(path) => load_set::<D>(path)?,
        None => {
            let (points, normals) = surface.sample(args.shape.n)?.into_parts();
            PointSet {
                points,
                normals: Some(normals),
            }
        }
    };
    let cloud = orient(set, cfg)?;
    let t = Instant::now();
    let model = fit(&cloud, &cfg.cfpu)?;
    println!("fit: {} patches in {:.3} s", model.patches.len(), t.elapsed().as_secs_f64());
    let samples = args.eval_samples.unwrap_or(cfg.eval_samples);
    let dense = surface.sample(samples)?;
    let report = error_report(&model, dense.points())?;
    if report.uncovered > 0 {
        println!("uncovered samples: {}", report.uncovered);
    }
    Ok((cloud.len(), report.rms, report.max))
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    check_shape(&args.shape)?;
    let cfg = RunConfig::resolve(&args.fit)?;
    init_threads(&cfg)?;
    if args.eval_samples == Some(0) || (args.eval_samples.is_none() && cfg.eval_samples == 0) {
        return Err(CliError::usage(format!(
            "need a positive number of error samples (default {DEFAULT_EVAL_SAMPLES})"
        )));
    }
    let s = &args.shape;
    let (n, rms, max) = match s.shape {
        Shape::Cassini => eval_shape(&Cassini::new(s.a, s.b)?, &args, &cfg)?,
        Shape::Trefoil => eval_shape(&trefoil(s)?, &args, &cfg)?,
        Shape::Sphere => eval_shape(&sphere(s), &args, &cfg)?,
    };
    let row = format!("{n},{},{},{}", cfg.cfpu.order, fmt_f64(rms), fmt_f64(max));
    println!("n,order,rms,max");
    println!("{row}");
    if let Some(path) = &args.csv {
        append_row(path, "n,order,rms,max", &row).map_err(CliError::write)?;
    }
    Ok(())
}

/// Appends `row`, writing `header` first when the file is new or empty.
fn append_row(path: &Path, header: &str, row: &str) -> std::io::Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    if file.metadata()?.len() == 0 {
        writeln!(file, "{header}")?;
    }
    writeln!(file, "{row}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_writes_header_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("errors.csv");
        append_row(&path, "a,b", "1,2").unwrap();
        append_row(&path, "a,b", "3,4").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n1,2\n3,4\n");
    }

    #[test]
    fn suffix_keeps_extension() {
        assert_eq!(with_suffix(Path::new("out/m.obj"), ".summary.csv"), PathBuf::from("out/m.obj.summary.csv"));
    }
}
