//! Reconstruction of a density from divergent-beam or planar Radon data.
//!
//! Three branches share one backprojection skeleton, a weighted sum over
//! sphere-quadrature directions:
//!
//! * `xray`: `ρ(x) = c Σ_k w_k n_k·∇ₓ(Xρ)(x, n_k)`. Because
//!   `n·∇ₓ(Xρ)(x, n) = -ρ(x)` for every direction, the exact constant under
//!   the `4π` surface measure is `c = -1/(4π)`.
//! * `radon`: `c Σ_k w_k (-2π) ∂ₛ(H Rρ)(n_k, s)|_{s = x·n_k}`, the Hilbert-
//!   filtered form. Its output is compared against the density rather than
//!   assumed to reproduce it; see [`calibrate_normalization`].
//! * `classical_radon`: `-(1/8π²) Σ_k w_k ∂ₛ²(Rρ)(n_k, x·n_k)`, the standard
//!   three-dimensional Radon inversion, used as an independent oracle.
//!
//! [`grangeat_convert`] maps divergent-beam data to the derivative of
//! planar Radon data, and [`Lemma9Diagnostic`] measures both sides of the
//! identity relating the spherical averages of the line transform and of
//! the Hilbert-filtered Radon data.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Direction3, SphereQuadrature, Vec3, VolumeGrid};
use crate::hilbert::{derivative, hilbert_spectral, Profile1D};
use crate::phantom::Phantom;
use crate::xform::{self, RadonProfile};

/// Exact X-ray-branch constant under the `4π` surface measure.
pub const XRAY_NORMALIZATION: f64 = -1.0 / (4.0 * PI);

/// `1/(2π³)`, the alternative prefactor for the X-ray branch that
/// calibration is measured against.
pub const INV_TWO_PI_CUBED: f64 = 1.0 / (2.0 * PI * PI * PI);

/// Weight of the Hilbert-filtered Radon term.
pub const RADON_FILTER_FACTOR: f64 = -2.0 * PI;

/// Constant of the classical second-derivative Radon inversion.
pub const CLASSICAL_RADON_CONSTANT: f64 = -1.0 / (8.0 * PI * PI);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Xray,
    Radon,
    ClassicalRadon,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::Xray, Branch::Radon, Branch::ClassicalRadon];

    pub fn name(self) -> &'static str {
        match self {
            Branch::Xray => "xray",
            Branch::Radon => "radon",
            Branch::ClassicalRadon => "classical_radon",
        }
    }

    /// `-1/(4π)` for both filtered branches; `1` for the classical oracle,
    /// whose constant is applied internally.
    pub fn default_normalization(self) -> f64 {
        match self {
            Branch::Xray | Branch::Radon => XRAY_NORMALIZATION,
            Branch::ClassicalRadon => 1.0,
        }
    }

    pub fn uses_radon_data(self) -> bool {
        !matches!(self, Branch::Xray)
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Branch::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                Error::invalid(
                    "branch",
                    format!("`{s}` is not one of xray, radon, classical_radon"),
                )
            })
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionConfig {
    pub quadrature: SphereQuadrature,
    pub diff_step: f64,
    /// Multiplies the spherical sum.
    pub normalization: f64,
    pub branch: Branch,
}

impl ReconstructionConfig {
    pub fn new(
        quadrature: SphereQuadrature,
        diff_step: f64,
        normalization: f64,
        branch: Branch,
    ) -> Result<Self> {
        let cfg = ReconstructionConfig {
            quadrature,
            diff_step,
            normalization,
            branch,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configuration with the branch's default normalization.
    pub fn for_branch(
        quadrature: SphereQuadrature,
        diff_step: f64,
        branch: Branch,
    ) -> Result<Self> {
        ReconstructionConfig::new(
            quadrature,
            diff_step,
            branch.default_normalization(),
            branch,
        )
    }

    pub fn with_normalization(&self, normalization: f64) -> Result<Self> {
        ReconstructionConfig::new(
            self.quadrature.clone(),
            self.diff_step,
            normalization,
            self.branch,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diff_step > 0.0 && self.diff_step.is_finite()) {
            return Err(Error::invalid(
                "diff_step",
                format!("must be positive, got {}", self.diff_step),
            ));
        }
        if self.normalization == 0.0 || !self.normalization.is_finite() {
            return Err(Error::invalid(
                "normalization",
                format!("must be finite and nonzero, got {}", self.normalization),
            ));
        }
        if self.quadrature.is_empty() {
            return Err(Error::invalid("quadrature", "no nodes"));
        }
        Ok(())
    }

    fn expect_branch(&self, want: Branch) -> Result<()> {
        if self.branch != want {
            return Err(Error::invalid(
                "branch",
                format!("operation needs branch {want}, config has {}", self.branch),
            ));
        }
        Ok(())
    }
}

/// Uniform `s` grid shared by all profiles of a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileGrid {
    pub s_min: f64,
    pub s_max: f64,
    pub count: usize,
}

impl ProfileGrid {
    /// `[-R, R]` for the phantom's support radius `R`, sampled at one
    /// hundredth of the smallest primitive scale (odd count, so `s = 0` is a
    /// node).
    pub fn for_phantom(ph: &Phantom) -> ProfileGrid {
        let r = if ph.support_radius() > 0.0 {
            ph.support_radius()
        } else {
            1.0
        };
        let finest = ph
            .primitives()
            .iter()
            .map(|p| p.scale)
            .fold(f64::INFINITY, f64::min);
        let h = if finest.is_finite() {
            finest / 100.0
        } else {
            0.01
        };
        let half = (r / h).ceil() as usize;
        ProfileGrid {
            s_min: -r,
            s_max: r,
            count: 2 * half + 1,
        }
    }
}

/// One planar Radon profile per quadrature node, on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadonDataset {
    profiles: Vec<RadonProfile>,
}

impl RadonDataset {
    pub fn new(profiles: Vec<RadonProfile>) -> Result<Self> {
        let first = profiles
            .first()
            .ok_or_else(|| Error::invalid("profiles", "dataset is empty"))?;
        let (a, b, n) = (first.s_min, first.s_max, first.count());
        if let Some(k) = profiles
            .iter()
            .position(|p| p.s_min != a || p.s_max != b || p.count() != n)
        {
            return Err(Error::invalid(
                "profiles",
                format!("profile {k} does not share the s-grid [{a}, {b}] x {n}"),
            ));
        }
        Ok(RadonDataset { profiles })
    }

    /// Analytic plane integrals of `ph` for every node of `q`.
    pub fn from_phantom(ph: &Phantom, q: &SphereQuadrature, grid: ProfileGrid) -> Result<Self> {
        let profiles = q
            .nodes()
            .par_iter()
            .map(|&n| xform::radon_profile(ph, n, grid.s_min, grid.s_max, grid.count))
            .collect::<Result<Vec<_>>>()?;
        RadonDataset::new(profiles)
    }

    pub fn profiles(&self) -> &[RadonProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn scaled(&self, k: f64) -> RadonDataset {
        RadonDataset {
            profiles: self
                .profiles
                .iter()
                .map(|p| RadonProfile {
                    values: p.values.iter().map(|v| v * k).collect(),
                    ..p.clone()
                })
                .collect(),
        }
    }

    fn check_against(&self, q: &SphereQuadrature) -> Result<()> {
        if self.len() != q.len() {
            return Err(Error::invalid(
                "dataset",
                format!("{} profiles for {} quadrature nodes", self.len(), q.len()),
            ));
        }
        for (k, (p, n)) in self.profiles.iter().zip(q.nodes()).enumerate() {
            if (p.n.vec() - n.vec()).norm() > 1e-9 {
                return Err(Error::invalid(
                    "dataset",
                    format!("profile {k} direction does not match quadrature node {k}"),
                ));
            }
        }
        Ok(())
    }
}

/// X-ray branch at one point. `data(x, n)` must supply divergent-beam
/// values at `x ± h n_k` for every node.
pub fn invert_xray<F>(data: F, cfg: &ReconstructionConfig, x: Vec3) -> Result<f64>
where
    F: Fn(Vec3, Direction3) -> f64,
{
    cfg.validate()?;
    cfg.expect_branch(Branch::Xray)?;
    Ok(xray_sum(&data, cfg, x))
}

fn xray_sum<F>(data: &F, cfg: &ReconstructionConfig, x: Vec3) -> f64
where
    F: Fn(Vec3, Direction3) -> f64,
{
    let h = cfg.diff_step;
    let sum = cfg.quadrature.iter().fold(0.0, |acc, (n, w)| {
        acc + w * xform::directional_derivative(data, x, n, h)
    });
    cfg.normalization * sum
}

/// X-ray branch over every grid point, in parallel.
pub fn invert_xray_volume<F>(
    data: F,
    cfg: &ReconstructionConfig,
    grid: &VolumeGrid,
) -> Result<VolumeGrid>
where
    F: Fn(Vec3, Direction3) -> f64 + Sync,
{
    cfg.validate()?;
    cfg.expect_branch(Branch::Xray)?;
    let samples: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| xray_sum(&data, cfg, grid.point_at(i)))
        .collect();
    VolumeGrid::from_samples(grid.origin(), grid.spacing(), grid.dims(), samples)
}

/// Pre-filtered Radon data ready for backprojection. Building it is the
/// expensive step; evaluation at a point is one interpolation per node.
#[derive(Debug, Clone)]
pub struct RadonBackprojector {
    nodes: Vec<Direction3>,
    weights: Vec<f64>,
    filtered: Vec<Profile1D>,
    factor: f64,
}

impl RadonBackprojector {
    /// Filters `data` for `cfg.branch` (`radon` or `classical_radon`).
    pub fn new(data: &RadonDataset, cfg: &ReconstructionConfig) -> Result<Self> {
        cfg.validate()?;
        data.check_against(&cfg.quadrature)?;
        let (factor, filter): (f64, fn(&Profile1D) -> Result<Profile1D>) = match cfg.branch {
            Branch::Radon => (RADON_FILTER_FACTOR, |p| {
                Ok(derivative(&hilbert_spectral(p)?))
            }),
            Branch::ClassicalRadon => {
                (CLASSICAL_RADON_CONSTANT, |p| Ok(derivative(&derivative(p))))
            }
            Branch::Xray => {
                return Err(Error::invalid(
                    "branch",
                    "the xray branch does not consume Radon data",
                ))
            }
        };
        let filtered = data
            .profiles()
            .par_iter()
            .map(|p| filter(&Profile1D::try_from(p)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(RadonBackprojector {
            nodes: cfg.quadrature.nodes().to_vec(),
            weights: cfg.quadrature.weights().to_vec(),
            filtered,
            factor: factor * cfg.normalization,
        })
    }

    pub fn eval(&self, x: Vec3) -> Result<f64> {
        let mut acc = 0.0;
        for ((n, w), prof) in self.nodes.iter().zip(&self.weights).zip(&self.filtered) {
            acc += w * prof.interpolate(n.dot(x))?;
        }
        Ok(self.factor * acc)
    }

    pub fn eval_volume(&self, grid: &VolumeGrid) -> Result<VolumeGrid> {
        let samples = (0..grid.len())
            .into_par_iter()
            .map(|i| self.eval(grid.point_at(i)))
            .collect::<Result<Vec<_>>>()?;
        VolumeGrid::from_samples(grid.origin(), grid.spacing(), grid.dims(), samples)
    }
}

/// Hilbert-filtered Radon branch at one point.
pub fn invert_radon(data: &RadonDataset, cfg: &ReconstructionConfig, x: Vec3) -> Result<f64> {
    cfg.expect_branch(Branch::Radon)?;
    RadonBackprojector::new(data, cfg)?.eval(x)
}

/// Classical second-derivative Radon inversion at one point.
pub fn invert_classical_radon(data: &RadonDataset, q: &SphereQuadrature, x: Vec3) -> Result<f64> {
    let cfg = ReconstructionConfig {
        quadrature: q.clone(),
        diff_step: 1.0,
        normalization: 1.0,
        branch: Branch::ClassicalRadon,
    };
    RadonBackprojector::new(data, &cfg)?.eval(x)
}

/// Reconstructs `ph` on `grid` from analytic forward data for `cfg.branch`.
pub fn reconstruct_phantom(
    ph: &Phantom,
    cfg: &ReconstructionConfig,
    grid: &VolumeGrid,
    profile_grid: ProfileGrid,
) -> Result<VolumeGrid> {
    match cfg.branch {
        Branch::Xray => invert_xray_volume(|x, n| xform::xray(ph, x, n), cfg, grid),
        Branch::Radon | Branch::ClassicalRadon => {
            let data = RadonDataset::from_phantom(ph, &cfg.quadrature, profile_grid)?;
            RadonBackprojector::new(&data, cfg)?.eval_volume(grid)
        }
    }
}

/// Normalized derivative-of-Gaussian `g'(u)` with standard deviation `band`.
pub fn mollified_delta_prime(u: f64, band: f64) -> f64 {
    let g = (-0.5 * (u / band).powi(2)).exp() / ((2.0 * PI).sqrt() * band);
    -u / (band * band) * g
}

/// `∫_{S²} (Xf)(x, n₁) δ'(n·n₁) dn₁` with `δ'` replaced by
/// [`mollified_delta_prime`]; estimates `-(Rf)'(n, x·n)`.
///
/// `band` must be at least twice the quadrature's node spacing.
pub fn grangeat_convert<F>(
    xdata: F,
    x: Vec3,
    n: Direction3,
    band: f64,
    q: &SphereQuadrature,
) -> Result<f64>
where
    F: Fn(Vec3, Direction3) -> f64,
{
    let spacing = q.node_spacing();
    if !band.is_finite() || band < 2.0 * spacing {
        return Err(Error::invalid(
            "band",
            format!(
                "{band} is below twice the node spacing {spacing:.5} of a {}-node sphere",
                q.len()
            ),
        ));
    }
    // Kernel is odd in n₁: integrate the antipodally odd part of the data.
    let mut acc = 0.0;
    for (n1, w) in q.iter() {
        let k = mollified_delta_prime(n.dot(n1.vec()), band);
        if k != 0.0 {
            acc += w * k * 0.5 * (xdata(x, n1) - xdata(x, -n1));
        }
    }
    Ok(acc)
}

/// Both sides of `⟨Xρ⟩ = -2π ⟨H Rρ⟩` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma9Report {
    pub x: Vec3,
    /// Sphere integral of the full-line transform.
    pub lhs: f64,
    /// `-2π` times the sphere integral of the Hilbert-filtered Radon data.
    pub rhs: f64,
    /// `lhs / rhs`; not finite when `rhs` vanishes.
    pub ratio: f64,
    pub difference: f64,
}

pub struct Lemma9Diagnostic<'a> {
    ph: &'a Phantom,
    quadrature: &'a SphereQuadrature,
    filtered: Vec<Profile1D>,
}

impl<'a> Lemma9Diagnostic<'a> {
    pub fn new(
        ph: &'a Phantom,
        quadrature: &'a SphereQuadrature,
        grid: ProfileGrid,
    ) -> Result<Self> {
        let data = RadonDataset::from_phantom(ph, quadrature, grid)?;
        let filtered = data
            .profiles()
            .par_iter()
            .map(|p| hilbert_spectral(&Profile1D::try_from(p)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Lemma9Diagnostic {
            ph,
            quadrature,
            filtered,
        })
    }

    pub fn evaluate(&self, x: Vec3) -> Result<Lemma9Report> {
        let mut lhs = 0.0;
        let mut filtered = 0.0;
        for ((n, w), prof) in self.quadrature.iter().zip(&self.filtered) {
            lhs += w * xform::line_transform(self.ph, x, n);
            filtered += w * prof.interpolate(n.dot(x))?;
        }
        let rhs = RADON_FILTER_FACTOR * filtered;
        Ok(Lemma9Report {
            x,
            lhs,
            rhs,
            ratio: lhs / rhs,
            difference: lhs - rhs,
        })
    }
}

/// One-point convenience wrapper around [`Lemma9Diagnostic`].
pub fn lemma9_diagnostic(ph: &Phantom, x: Vec3, q: &SphereQuadrature) -> Result<Lemma9Report> {
    Lemma9Diagnostic::new(ph, q, ProfileGrid::for_phantom(ph))?.evaluate(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Least-squares multiplier of the raw (unit-normalized) inversion.
    pub normalization: f64,
    /// RMS of `normalization · raw - truth` over the sample points.
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub points: usize,
    /// Sample radius; defaults to half the support radius.
    pub radius: Option<f64>,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            points: 50,
            radius: None,
            seed: 0x5eed,
        }
    }
}

/// `count` points uniform in the ball of `radius` about the origin.
pub fn sample_ball(radius: f64, count: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if v.norm_squared() <= 1.0 {
            out.push(v * radius);
        }
    }
    out
}

/// Least-squares `c` minimizing `Σ |c·raw(x) - truth(x)|²` over `points`.
pub fn calibrate_with<R, T>(raw: R, truth: T, points: &[Vec3]) -> Result<Calibration>
where
    R: Fn(Vec3) -> Result<f64> + Sync,
    T: Fn(Vec3) -> f64 + Sync,
{
    let pairs = points
        .par_iter()
        .map(|&x| Ok((raw(x)?, truth(x))))
        .collect::<Result<Vec<_>>>()?;
    let rr: f64 = pairs.iter().map(|(r, _)| r * r).sum();
    if rr == 0.0 {
        return Err(Error::DegenerateCalibration);
    }
    let rt: f64 = pairs.iter().map(|(r, t)| r * t).sum();
    let c = rt / rr;
    let ss: f64 = pairs.iter().map(|(r, t)| (c * r - t).powi(2)).sum();
    Ok(Calibration {
        normalization: c,
        residual: (ss / pairs.len() as f64).sqrt(),
        points: pairs.len(),
    })
}

/// Fits the normalization of `cfg.branch` against the phantom's density,
/// using analytic forward data. The fitted value replaces
/// `cfg.normalization`, so for the classical branch it is a pure correction
/// factor (ideally 1).
pub fn calibrate_normalization(
    ph: &Phantom,
    cfg: &ReconstructionConfig,
    opts: CalibrationOptions,
) -> Result<Calibration> {
    let raw_cfg = cfg.with_normalization(1.0)?;
    let radius = opts.radius.unwrap_or(0.5 * ph.support_radius().max(1.0));
    let points = sample_ball(radius, opts.points, opts.seed);
    let truth = |x: Vec3| ph.eval(x);
    match cfg.branch {
        Branch::Xray => calibrate_with(
            |x| Ok(xray_sum(&|p, n| xform::xray(ph, p, n), &raw_cfg, x)),
            truth,
            &points,
        ),
        Branch::Radon | Branch::ClassicalRadon => {
            let data =
                RadonDataset::from_phantom(ph, &cfg.quadrature, ProfileGrid::for_phantom(ph))?;
            let bp = RadonBackprojector::new(&data, &raw_cfg)?;
            calibrate_with(|x| bp.eval(x), truth, &points)
        }
    }
}

/// Error summary of a reconstruction, restricted to grid points inside the
/// phantom's support ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionMetrics {
    /// `‖rec - ρ‖₂ / ‖ρ‖₂`; `None` when `ρ` vanishes on every counted point.
    pub rel_l2: Option<f64>,
    pub max_error: f64,
    pub voxels: usize,
}

impl ReconstructionMetrics {
    pub fn compute(rec: &VolumeGrid, ph: &Phantom) -> ReconstructionMetrics {
        let r2 = ph.support_radius().powi(2);
        let (mut err2, mut ref2, mut max_error, mut voxels) = (0.0, 0.0, 0.0f64, 0usize);
        for (i, &v) in rec.samples().iter().enumerate() {
            let x = rec.point_at(i);
            if x.norm_squared() > r2 {
                continue;
            }
            let truth = ph.eval(x);
            err2 += (v - truth).powi(2);
            ref2 += truth * truth;
            max_error = max_error.max((v - truth).abs());
            voxels += 1;
        }
        ReconstructionMetrics {
            rel_l2: (ref2 > 0.0).then(|| (err2 / ref2).sqrt()),
            max_error,
            voxels,
        }
    }
}
