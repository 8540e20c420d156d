//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cfpu::cfpu::{CfpuConfig, ParamMode, PatchOverride, ShiftMode};
use cfpu::pointcloud::{CloudFormat, MeshFormat};
use clap::Args;
use serde::Deserialize;

use crate::CliError;

pub const MIN_RESOLUTION: usize = 8;
pub const MAX_RESOLUTION: usize = 1024;

/// Smoothing parameter as written in a config file: a number, `"none"` or
/// `"gcv"`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Word(String),
}

impl ParamValue {
    fn to_mode(&self) -> Result<ParamMode, String> {
        match self {
            ParamValue::Number(v) => Ok(ParamMode::Fixed(*v)),
            ParamValue::Word(w) => parse_param(w),
        }
    }
}

pub fn parse_param(s: &str) -> Result<ParamMode, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "none" => Ok(ParamMode::None),
        "gcv" => Ok(ParamMode::Gcv),
        other => other
            .parse::<f64>()
            .map(ParamMode::Fixed)
            .map_err(|_| format!("expected none, gcv or a number, got '{s}'")),
    }
}

pub fn parse_shift(s: &str) -> Result<ShiftMode, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "mean" => Ok(ShiftMode::Mean),
        "exact" => Ok(ShiftMode::Exact),
        "regularized" => Ok(ShiftMode::Regularized),
        _ => Err(format!("expected mean, exact or regularized, got '{s}'")),
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OverrideEntry {
    pub patch: usize,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub format: Option<String>,
    pub output: Option<PathBuf>,
    pub mesh_format: Option<String>,
    pub summary: Option<PathBuf>,
    pub patch_summary: Option<PathBuf>,
    pub order: Option<usize>,
    pub patches: Option<usize>,
    pub delta: Option<f64>,
    pub shift: Option<String>,
    pub lambda: Option<ParamValue>,
    pub alpha: Option<ParamValue>,
    pub grid_res: Option<usize>,
    pub bbox: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub estimate_normals: Option<usize>,
    pub noise: Option<f64>,
    pub eval_samples: Option<usize>,
    #[serde(default, rename = "override")]
    pub overrides: Vec<OverrideEntry>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Reconstruction flags shared by `reconstruct` and `eval`. Unset flags fall
/// back to the config file, then to defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct FitArgs {
    /// TOML file with any of the settings below plus [[override]] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Polyharmonic order.
    #[arg(long)]
    pub order: Option<usize>,
    /// Number of patches.
    #[arg(long)]
    pub patches: Option<usize>,
    /// Patch overlap.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Potential shift: mean, exact or regularized.
    #[arg(long)]
    pub shift: Option<String>,
    /// Normal smoothing: none, gcv or a value.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Residual smoothing: none, gcv or a value.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Grid cells per axis.
    #[arg(long)]
    pub grid_res: Option<usize>,
    /// Grid box as comma-separated lower then upper corner.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bbox: Option<Vec<f64>>,
    /// Seed for all randomness.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Estimate normals from this many neighbors, replacing any in the input.
    #[arg(long)]
    pub estimate_normals: Option<usize>,
    /// Standard deviation of Gaussian noise added to the normals.
    #[arg(long)]
    pub noise: Option<f64>,
}

/// Fully resolved settings.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub format: Option<CloudFormat>,
    pub output: Option<PathBuf>,
    pub mesh_format: Option<MeshFormat>,
    pub summary: Option<PathBuf>,
    pub patch_summary: Option<PathBuf>,
    pub cfpu: CfpuConfig,
    pub grid_res: usize,
    pub bbox: Option<Vec<f64>>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub estimate_normals: Option<usize>,
    pub noise: f64,
    pub eval_samples: usize,
}

pub const DEFAULT_GRID_RES: usize = 128;
pub const DEFAULT_EVAL_SAMPLES: usize = 131_424;

impl RunConfig {
    pub fn resolve(args: &FitArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let usage = CliError::usage;

        let mut cfpu = CfpuConfig::default();
        if let Some(v) = args.order.or(file.order) {
            cfpu.order = v;
        }
        if let Some(v) = args.patches.or(file.patches) {
            cfpu.patches = v;
        }
        if let Some(v) = args.delta.or(file.delta) {
            cfpu.delta = v;
        }
        if let Some(s) = args.shift.as_ref().or(file.shift.as_ref()) {
            cfpu.shift = parse_shift(s).map_err(usage)?;
        }
        cfpu.lambda = match (&args.lambda, &file.lambda) {
            (Some(s), _) => parse_param(s).map_err(usage)?,
            (None, Some(v)) => v.to_mode().map_err(usage)?,
            (None, None) => ParamMode::None,
        };
        cfpu.alpha = match (&args.alpha, &file.alpha) {
            (Some(s), _) => parse_param(s).map_err(usage)?,
            (None, Some(v)) => v.to_mode().map_err(usage)?,
            (None, None) => ParamMode::None,
        };
        let mut overrides = BTreeMap::new();
        for o in &file.overrides {
            if overrides
                .insert(o.patch, PatchOverride { lambda: o.lambda, alpha: o.alpha })
                .is_some()
            {
                return Err(usage(format!("patch {} is overridden twice", o.patch)));
            }
        }
        cfpu.overrides = overrides;
        cfpu.validate().map_err(|e| usage(e.to_string()))?;

        let grid_res = args.grid_res.or(file.grid_res).unwrap_or(DEFAULT_GRID_RES);
        if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&grid_res) {
            return Err(usage(format!(
                "grid resolution {grid_res} outside [{MIN_RESOLUTION}, {MAX_RESOLUTION}]"
            )));
        }
        let bbox = args.bbox.clone().or(file.bbox);
        if let Some(b) = &bbox {
            if b.len() != 4 && b.len() != 6 {
                return Err(usage(format!("bbox needs 4 (2D) or 6 (3D) numbers, got {}", b.len())));
            }
        }
        let noise = args.noise.or(file.noise).unwrap_or(0.0);
        if !(noise >= 0.0) || !noise.is_finite() {
            return Err(usage(format!("noise must be >= 0, got {noise}")));
        }
        let threads = args.threads.or(file.threads);
        if threads == Some(0) {
            return Err(usage("thread count must be positive".into()));
        }
        let format = file
            .format
            .as_deref()
            .map(|s| s.parse::<CloudFormat>().map_err(|e| usage(e.to_string())))
            .transpose()?;
        let mesh_format = file
            .mesh_format
            .as_deref()
            .map(|s| s.parse::<MeshFormat>().map_err(|e| usage(e.to_string())))
            .transpose()?;
        Ok(RunConfig {
            input: file.input,
            format,
            output: file.output,
            mesh_format,
            summary: file.summary,
            patch_summary: file.patch_summary,
            cfpu,
            grid_res,
            bbox,
            seed: args.seed.or(file.seed).unwrap_or(0),
            threads,
            estimate_normals: args.estimate_normals.or(file.estimate_normals),
            noise,
            eval_samples: file.eval_samples.unwrap_or(DEFAULT_EVAL_SAMPLES),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            r#"
order = 2
patches = 50
lambda = "gcv"
alpha = 1e-4
shift = "regularized"

[[override]]
patch = 3
lambda = 0.5
"#,
        )
        .unwrap();
        let args = FitArgs {
            config: Some(path),
            patches: Some(80),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!(cfg.cfpu.order, 2);
        assert_eq!(cfg.cfpu.patches, 80);
        assert_eq!(cfg.cfpu.lambda, ParamMode::Gcv);
        assert_eq!(cfg.cfpu.alpha, ParamMode::Fixed(1e-4));
        assert_eq!(cfg.cfpu.overrides[&3].lambda, Some(0.5));
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |args: FitArgs| RunConfig::resolve(&args).unwrap_err().code;
        assert_eq!(bad(FitArgs { grid_res: Some(4), ..Default::default() }), 2);
        assert_eq!(bad(FitArgs { lambda: Some("lots".into()), ..Default::default() }), 2);
        assert_eq!(bad(FitArgs { shift: Some("regularized".into()), ..Default::default() }), 2);
        assert_eq!(parse_param("1e-3"), Ok(ParamMode::Fixed(1e-3)));
    }
}
