//! Run configuration: a TOML file overlaid by command-line flags.

use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use serde::Deserialize;
use tomoinv_core::geometry::{fibonacci_sphere, SphereQuadrature, VolumeGrid};
use tomoinv_core::inversion::{Branch, ProfileGrid};
use tomoinv_core::xform::default_diff_step;
use tomoinv_core::Phantom;

pub const DEFAULT_NODES: usize = 2000;
pub const DEFAULT_GRID: (f64, f64, usize) = (-3.0, 3.0, 33);
pub const DEFAULT_BAND: f64 = 0.05;
pub const DEFAULT_EVAL_POINTS: usize = 50;

/// Flags shared by every pipeline subcommand. Each one overrides the
/// same-named key of `--config`.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArgs {
    /// TOML file with any of the keys below
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Phantom description file
    #[arg(long)]
    pub phantom: Option<PathBuf>,
    /// xray, radon or classical_radon
    #[arg(long)]
    pub branch: Option<String>,
    /// Fibonacci sphere node count
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub s_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub s_count: Option<usize>,
    /// Lower corner of the cubic volume grid (all three axes)
    #[arg(long, allow_hyphen_values = true)]
    pub grid_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_max: Option<f64>,
    /// Samples per axis
    #[arg(long)]
    pub grid_count: Option<usize>,
    /// Central-difference step of the xray branch
    #[arg(long)]
    pub diff_step: Option<f64>,
    /// Mollifier width for the Grangeat check
    #[arg(long)]
    pub band: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Seed for every randomly drawn evaluation point
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random evaluation points
    #[arg(long)]
    pub eval_points: Option<usize>,
    /// Reconstruction prefactor; defaults to the branch's derived constant
    #[arg(long, allow_hyphen_values = true)]
    pub normalization: Option<f64>,
    /// Directory written by `forward`; without it, `invert` uses analytic data
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunArgs {
    /// Loads `--config` (if any) and applies the flags on top.
    pub fn merged(&self) -> Result<RunArgs> {
        let mut out = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config file {}", path.display()))?;
                toml::from_str::<RunArgs>(&text)
                    .with_context(|| format!("invalid config file {}", path.display()))?
            }
            None => RunArgs::default(),
        };
        overlay!(out, self; phantom, branch, nodes, s_min, s_max, s_count, grid_min, grid_max,
            grid_count, diff_step, band, out_dir, seed, eval_points, normalization, data_dir);
        Ok(out)
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        RunConfig::from_args(&self.merged()?)
    }
}

/// Fully validated run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub phantom_path: PathBuf,
    pub phantom: Phantom,
    pub branch: Branch,
    pub quadrature: SphereQuadrature,
    pub profile_grid: ProfileGrid,
    pub grid: VolumeGrid,
    pub diff_step: f64,
    pub band: f64,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub eval_points: usize,
    pub normalization: f64,
    pub data_dir: Option<PathBuf>,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    ensure!(v > 0.0 && v.is_finite(), "{name} must be positive, got {v}");
    Ok(v)
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> Result<RunConfig> {
        let Some(phantom_path) = a.phantom.clone() else {
            bail!("phantom: no phantom file given (use --phantom or the `phantom` config key)");
        };
        let phantom = Phantom::from_file(&phantom_path)
            .with_context(|| format!("phantom: cannot load {}", phantom_path.display()))?;
        let branch: Branch = match &a.branch {
            Some(b) => b.parse()?,
            None => Branch::Xray,
        };
        let nodes = a.nodes.unwrap_or(DEFAULT_NODES);
        let quadrature = fibonacci_sphere(nodes)?;

        let auto = ProfileGrid::for_phantom(&phantom);
        let profile_grid = ProfileGrid {
            s_min: a.s_min.unwrap_or(auto.s_min),
            s_max: a.s_max.unwrap_or(auto.s_max),
            count: a.s_count.unwrap_or(auto.count),
        };
        ensure!(
            profile_grid.s_min < profile_grid.s_max,
            "s_min must be below s_max, got [{}, {}]",
            profile_grid.s_min,
            profile_grid.s_max
        );
        ensure!(
            profile_grid.count >= 8,
            "s_count must be at least 8, got {}",
            profile_grid.count
        );

        let lo = a.grid_min.unwrap_or(DEFAULT_GRID.0);
        let hi = a.grid_max.unwrap_or(DEFAULT_GRID.1);
        let count = a.grid_count.unwrap_or(DEFAULT_GRID.2);
        ensure!(lo < hi, "grid_min must be below grid_max, got [{lo}, {hi}]");
        ensure!(count >= 2, "grid_count must be at least 2, got {count}");
        let grid = VolumeGrid::cube(lo, hi, count)?;

        let diff_step = positive(
            "diff_step",
            a.diff_step.unwrap_or_else(|| default_diff_step(&phantom)),
        )?;
        let band = positive("band", a.band.unwrap_or(DEFAULT_BAND))?;
        let eval_points = a.eval_points.unwrap_or(DEFAULT_EVAL_POINTS);
        ensure!(eval_points > 0, "eval_points must be positive");
        let normalization = a.normalization.unwrap_or(branch.default_normalization());
        ensure!(normalization.is_finite(), "normalization must be finite");

        Ok(RunConfig {
            phantom_path,
            phantom,
            branch,
            quadrature,
            profile_grid,
            grid,
            diff_step,
            band,
            out_dir: a.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            seed: a.seed.unwrap_or(0),
            eval_points,
            normalization,
            data_dir: a.data_dir.clone(),
        })
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}
