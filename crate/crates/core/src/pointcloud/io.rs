//! Text formats: whitespace-separated xyz, ASCII ply and Wavefront obj.
//!
//! xyz lines hold `x y [nx ny]` (2D, 2 or 4 columns) or `x y z [nx ny nz]`
//! (3D, 3 or 6 columns). Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{SVector, Vector3};

use super::{LoadedCloud, OrientedPointCloud, PointSet};
use crate::error::{Error, Result};
use crate::isosurface::{Polyline, SurfaceMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    Ply,
    Obj,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        ext.parse().ok()
    }
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xyz" | "txt" => Ok(CloudFormat::Xyz),
            "ply" => Ok(CloudFormat::Ply),
            "obj" => Ok(CloudFormat::Obj),
            other => Err(Error::InvalidParameter(format!("unknown cloud format '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        ext.parse().ok()
    }
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            other => Err(Error::InvalidParameter(format!("unknown mesh format '{other}'"))),
        }
    }
}

/// Shortest representation that parses back to the identical value.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn load_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<LoadedCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(&text, format)
}

pub fn parse_cloud(text: &str, format: CloudFormat) -> Result<LoadedCloud> {
    match format {
        CloudFormat::Xyz => parse_xyz(text),
        CloudFormat::Ply => {
            let ply = parse_ply(text)?;
            spatial_set(ply.positions, ply.normals)
        }
        CloudFormat::Obj => {
            let obj = parse_obj(text)?;
            let normals = obj.vertex_normals();
            spatial_set(obj.positions, normals)
        }
    }
}

fn spatial_set(points: Vec<Vector3<f64>>, normals: Option<Vec<Vector3<f64>>>) -> Result<LoadedCloud> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(LoadedCloud::Spatial(PointSet { points, normals }))
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid number '{tok}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value '{tok}'")));
    }
    Ok(v)
}

fn parse_xyz(text: &str) -> Result<LoadedCloud> {
    let mut columns: Option<usize> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|t| parse_number(t, line_no))
            .collect::<Result<Vec<_>>>()?;
        let n = values.len();
        let dim_of = |c: usize| match c {
            2 | 4 => Some(2),
            3 | 6 => Some(3),
            _ => None,
        };
        let dim = dim_of(n)
            .ok_or_else(|| Error::parse(line_no, format!("expected 2, 3, 4 or 6 columns, found {n}")))?;
        match columns {
            None => columns = Some(n),
            Some(c) if c == n => {}
            Some(c) => {
                let expected = dim_of(c).unwrap();
                return Err(if expected != dim {
                    Error::MixedDimension {
                        line: line_no,
                        expected,
                        found: dim,
                    }
                } else {
                    Error::parse(line_no, format!("expected {c} columns, found {n}"))
                });
            }
        }
        rows.push(values);
    }
    let columns = columns.ok_or(Error::EmptyInput)?;
    Ok(match columns {
        2 | 4 => LoadedCloud::Planar(rows_to_set::<2>(&rows, columns == 4)),
        _ => LoadedCloud::Spatial(rows_to_set::<3>(&rows, columns == 6)),
    })
}

fn rows_to_set<const D: usize>(rows: &[Vec<f64>], with_normals: bool) -> PointSet<D> {
    let points = rows
        .iter()
        .map(|r| SVector::<f64, D>::from_fn(|i, _| r[i]))
        .collect();
    let normals = with_normals.then(|| {
        rows.iter()
            .map(|r| SVector::<f64, D>::from_fn(|i, _| r[D + i]))
            .collect()
    });
    PointSet { points, normals }
}

#[derive(Debug)]
enum PlyProperty {
    Scalar(String),
    List(String),
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

struct PlyData {
    positions: Vec<Vector3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
    faces: Vec<Vec<usize>>,
}

fn parse_ply(text: &str) -> Result<PlyData> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::parse(1, "missing 'ply' magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut ascii = false;
    loop {
        let (i, raw) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "unterminated ply header"))?;
        let line_no = i + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(Error::parse(line_no, format!("unsupported ply format '{fmt}'")));
                }
                ascii = true;
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::parse(line_no, "invalid element count"))?,
                properties: Vec::new(),
            }),
            ["property", "list", _, _, name] => elements
                .last_mut()
                .ok_or_else(|| Error::parse(line_no, "property before element"))?
                .properties
                .push(PlyProperty::List(name.to_string())),
            ["property", _, name] => elements
                .last_mut()
                .ok_or_else(|| Error::parse(line_no, "property before element"))?
                .properties
                .push(PlyProperty::Scalar(name.to_string())),
            _ => return Err(Error::parse(line_no, format!("unrecognized header line '{raw}'"))),
        }
    }
    if !ascii {
        return Err(Error::parse(2, "missing ply format line"));
    }

    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut has_normals = false;
    let mut faces = Vec::new();
    for el in &elements {
        let scalar_index = |name: &str| {
            el.properties
                .iter()
                .position(|p| matches!(p, PlyProperty::Scalar(n) if n == name))
        };
        let is_vertex = el.name == "vertex";
        let xyz = [scalar_index("x"), scalar_index("y"), scalar_index("z")];
        let nxyz = [scalar_index("nx"), scalar_index("ny"), scalar_index("nz")];
        if is_vertex {
            if xyz.iter().any(Option::is_none) {
                return Err(Error::parse(0, "vertex element lacks x/y/z"));
            }
            has_normals = nxyz.iter().all(Option::is_some);
        }
        for _ in 0..el.count {
            let (i, raw) = lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("truncated '{}' data", el.name)))?;
            let line_no = i + 1;
            let mut toks = raw.split_whitespace();
            let mut scalars: Vec<f64> = Vec::with_capacity(el.properties.len());
            for prop in &el.properties {
                match prop {
                    PlyProperty::Scalar(_) => {
                        let t = toks.next().ok_or_else(|| Error::parse(line_no, "missing value"))?;
                        scalars.push(parse_number(t, line_no)?);
                    }
                    PlyProperty::List(name) => {
                        let t = toks.next().ok_or_else(|| Error::parse(line_no, "missing list count"))?;
                        let count: usize =
                            t.parse().map_err(|_| Error::parse(line_no, "invalid list count"))?;
                        let mut items = Vec::with_capacity(count);
                        for _ in 0..count {
                            let t = toks.next().ok_or_else(|| Error::parse(line_no, "short list"))?;
                            items.push(
                                t.parse::<usize>()
                                    .map_err(|_| Error::parse(line_no, "invalid index"))?,
                            );
                        }
                        scalars.push(f64::NAN);
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            faces.push(items);
                        }
                    }
                }
            }
            if is_vertex {
                let get = |idx: Option<usize>| scalars[idx.unwrap()];
                positions.push(Vector3::new(get(xyz[0]), get(xyz[1]), get(xyz[2])));
                if has_normals {
                    normals.push(Vector3::new(get(nxyz[0]), get(nxyz[1]), get(nxyz[2])));
                }
            }
        }
    }
    Ok(PlyData {
        positions,
        normals: has_normals.then_some(normals),
        faces,
    })
}

struct ObjData {
    positions: Vec<Vector3<f64>>,
    normals: Vec<Vector3<f64>>,
    // (vertex index, optional normal index), zero based
    faces: Vec<Vec<(usize, Option<usize>)>>,
}

impl ObjData {
    fn vertex_normals(&self) -> Option<Vec<Vector3<f64>>> {
        if self.normals.is_empty() {
            return None;
        }
        if self.normals.len() == self.positions.len() {
            return Some(self.normals.clone());
        }
        // fall back to v//vn pairings from faces
        let mut out: Vec<Option<Vector3<f64>>> = vec![None; self.positions.len()];
        for f in &self.faces {
            for &(v, n) in f {
                if let Some(n) = n {
                    out[v] = Some(self.normals[n]);
                }
            }
        }
        out.into_iter().collect()
    }
}

fn obj_index(tok: &str, count: usize, line: usize) -> Result<usize> {
    let v: i64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid index '{tok}'")))?;
    let idx = if v > 0 {
        v - 1
    } else if v < 0 {
        count as i64 + v
    } else {
        -1
    };
    if idx < 0 || idx as usize >= count {
        return Err(Error::parse(line, format!("index {v} out of range")));
    }
    Ok(idx as usize)
}

fn parse_obj(text: &str) -> Result<ObjData> {
    let mut data = ObjData {
        positions: Vec::new(),
        normals: Vec::new(),
        faces: Vec::new(),
    };
    let mut pending_faces: Vec<(usize, Vec<String>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut toks = raw.split_whitespace();
        match toks.next() {
            Some("v") | Some("vn") => {
                let is_normal = raw.trim_start().starts_with("vn");
                let vals = toks
                    .take(3)
                    .map(|t| parse_number(t, line_no))
                    .collect::<Result<Vec<_>>>()?;
                if vals.len() != 3 {
                    return Err(Error::parse(line_no, "expected 3 coordinates"));
                }
                let v = Vector3::new(vals[0], vals[1], vals[2]);
                if is_normal {
                    data.normals.push(v);
                } else {
                    data.positions.push(v);
                }
            }
            Some("f") => pending_faces.push((line_no, toks.map(String::from).collect())),
            _ => {}
        }
    }
    for (line_no, toks) in pending_faces {
        let mut face = Vec::with_capacity(toks.len());
        for t in &toks {
            let mut parts = t.split('/');
            let v = obj_index(parts.next().unwrap_or(""), data.positions.len(), line_no)?;
            let _tex = parts.next();
            let n = match parts.next() {
                Some(s) if !s.is_empty() => Some(obj_index(s, data.normals.len(), line_no)?),
                _ => None,
            };
            face.push((v, n));
        }
        if face.len() < 3 {
            return Err(Error::parse(line_no, "face with fewer than 3 vertices"));
        }
        data.faces.push(face);
    }
    Ok(data)
}

fn fan(face: &[usize]) -> impl Iterator<Item = [usize; 3]> + '_ {
    (1..face.len() - 1).map(move |k| [face[0], face[k], face[k + 1]])
}

/// Reads a triangle mesh; polygons are fan-triangulated.
pub fn read_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<SurfaceMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (vertices, faces): (Vec<Vector3<f64>>, Vec<Vec<usize>>) = match format {
        MeshFormat::Obj => {
            let obj = parse_obj(&text)?;
            let faces = obj
                .faces
                .iter()
                .map(|f| f.iter().map(|&(v, _)| v).collect())
                .collect();
            (obj.positions, faces)
        }
        MeshFormat::Ply => {
            let ply = parse_ply(&text)?;
            (ply.positions, ply.faces)
        }
    };
    let mut triangles = Vec::new();
    for f in &faces {
        if f.len() < 3 || f.iter().any(|&v| v >= vertices.len()) {
            return Err(Error::parse(0, "invalid face"));
        }
        triangles.extend(fan(f));
    }
    Ok(SurfaceMesh {
        vertices,
        triangles,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn vec_line<const D: usize>(out: &mut String, v: &SVector<f64, D>) {
    for (i, c) in v.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&fmt_f64(*c));
    }
}

pub fn write_mesh(mesh: &SurfaceMesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    if let Some(t) = mesh.triangles.iter().find(|t| t.iter().any(|&v| v >= mesh.vertices.len())) {
        return Err(Error::InvalidParameter(format!("triangle {t:?} references a missing vertex")));
    }
    let mut out = String::new();
    match format {
        MeshFormat::Obj => {
            for v in &mesh.vertices {
                out.push_str("v ");
                vec_line(&mut out, v);
                out.push('\n');
            }
            for t in &mesh.triangles {
                let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
            }
        }
        MeshFormat::Ply => {
            let _ = write!(
                out,
                "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
                mesh.vertices.len(),
                mesh.triangles.len()
            );
            for v in &mesh.vertices {
                vec_line(&mut out, v);
                out.push('\n');
            }
            for t in &mesh.triangles {
                let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
            }
        }
    }
    write_text(path, &out)
}

/// Writes an oriented cloud. ply and obj carry 3D data only; 2D clouds must
/// use xyz.
pub fn write_cloud<const D: usize>(
    cloud: &OrientedPointCloud<D>,
    path: impl AsRef<Path>,
    format: CloudFormat,
) -> Result<()> {
    let path = path.as_ref();
    if D != 3 && format != CloudFormat::Xyz {
        return Err(Error::InvalidParameter(format!(
            "{D}D clouds can only be written as xyz"
        )));
    }
    let mut out = String::new();
    let pairs = cloud.points().iter().zip(cloud.normals());
    match format {
        CloudFormat::Xyz => {
            for (p, n) in pairs {
                vec_line(&mut out, p);
                out.push(' ');
                vec_line(&mut out, n);
                out.push('\n');
            }
        }
        CloudFormat::Ply => {
            let _ = write!(
                out,
                "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nproperty double nx\nproperty double ny\nproperty double nz\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n",
                cloud.len()
            );
            for (p, n) in pairs {
                vec_line(&mut out, p);
                out.push(' ');
                vec_line(&mut out, n);
                out.push('\n');
            }
        }
        CloudFormat::Obj => {
            for p in cloud.points() {
                out.push_str("v ");
                vec_line(&mut out, p);
                out.push('\n');
            }
            for n in cloud.normals() {
                out.push_str("vn ");
                vec_line(&mut out, n);
                out.push('\n');
            }
        }
    }
    write_text(path, &out)
}

/// Writes 2D contours as obj `l` records (z = 0) or as a ply edge list.
pub fn write_polylines(lines: &[Polyline], path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    let total: usize = lines.iter().map(|l| l.vertices.len()).sum();
    let segments: usize = lines.iter().map(Polyline::segment_count).sum();
    let mut out = String::new();
    if format == MeshFormat::Ply {
        let _ = write!(
            out,
            "ply\nformat ascii 1.0\nelement vertex {total}\nproperty double x\nproperty double y\nproperty double z\nelement edge {segments}\nproperty int vertex1\nproperty int vertex2\nend_header\n"
        );
    }
    for l in lines {
        for v in &l.vertices {
            if format == MeshFormat::Obj {
                out.push_str("v ");
            }
            vec_line(&mut out, v);
            out.push_str(" 0\n");
        }
    }
    let mut base = 0usize;
    for l in lines {
        let n = l.vertices.len();
        match format {
            MeshFormat::Obj => {
                out.push('l');
                for i in 0..n {
                    let _ = write!(out, " {}", base + i + 1);
                }
                if l.closed {
                    let _ = write!(out, " {}", base + 1);
                }
                out.push('\n');
            }
            MeshFormat::Ply => {
                for i in 0..l.segment_count() {
                    let _ = writeln!(out, "{} {}", base + i, base + (i + 1) % n);
                }
            }
        }
        base += n;
    }
    write_text(path, &out)
}
