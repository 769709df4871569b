//! Analytic test densities with closed-form point values, half-line
//! integrals and plane integrals.
//!
//! # Phantom file grammar
//!
//! Line oriented, UTF-8. `#` starts a comment; blank lines are ignored.
//! Every other line is one record:
//!
//! ```text
//! support_radius <R>
//! <kind> center=<x>,<y>,<z> scale=<s> amplitude=<A>
//! ```
//!
//! `kind` is `gaussian` (`A·exp(-|x-c|²/s²)`) or `ball` (`A` inside radius
//! `s`). The three fields may appear in any order, each exactly once. The
//! optional `support_radius` record overrides the computed support radius and
//! must not be smaller than it. Unknown kinds or fields are rejected.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Direction3, Vec3, VolumeGrid};

/// Support radius margin, in units of primitive scale. A Gaussian is below
/// `e^{-36}` (about 2.3e-16) of its amplitude at this distance.
pub const SUPPORT_SCALES: f64 = 6.0;

/// Radius, in units of scale, a Gaussian must be sampled over when
/// rasterized. Beyond it the density is below `e^{-16}` (about 1.1e-7) of
/// the amplitude.
pub const RASTER_SCALES: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimitiveKind {
    Gaussian,
    Ball,
}

impl PrimitiveKind {
    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::Gaussian => "gaussian",
            PrimitiveKind::Ball => "ball",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    pub center: Vec3,
    /// Gaussian width `a` or ball radius `R`.
    pub scale: f64,
    pub amplitude: f64,
}

impl Primitive {
    pub fn new(kind: PrimitiveKind, center: Vec3, scale: f64, amplitude: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(
                "scale",
                format!("must be positive, got {scale}"),
            ));
        }
        if !amplitude.is_finite() || !center.norm().is_finite() {
            return Err(Error::invalid(
                "primitive",
                "non-finite center or amplitude",
            ));
        }
        Ok(Primitive {
            kind,
            center,
            scale,
            amplitude,
        })
    }

    pub fn gaussian(center: Vec3, width: f64, amplitude: f64) -> Result<Self> {
        Primitive::new(PrimitiveKind::Gaussian, center, width, amplitude)
    }

    pub fn ball(center: Vec3, radius: f64, amplitude: f64) -> Result<Self> {
        Primitive::new(PrimitiveKind::Ball, center, radius, amplitude)
    }

    pub fn eval(&self, x: Vec3) -> f64 {
        let r2 = (x - self.center).norm_squared();
        match self.kind {
            PrimitiveKind::Gaussian => self.amplitude * (-r2 / (self.scale * self.scale)).exp(),
            PrimitiveKind::Ball => {
                if r2 <= self.scale * self.scale {
                    self.amplitude
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫₀^∞ ρ(x + t n) dt`.
    pub fn halfline_integral(&self, x: Vec3, n: Direction3) -> f64 {
        let rel = x - self.center;
        let p = n.dot(rel);
        let d2 = (rel.norm_squared() - p * p).max(0.0);
        let a = self.scale;
        match self.kind {
            PrimitiveKind::Gaussian => {
                self.amplitude * a * (PI.sqrt() / 2.0) * (-d2 / (a * a)).exp() * libm::erfc(p / a)
            }
            PrimitiveKind::Ball => {
                let disc = a * a - d2;
                if disc <= 0.0 {
                    return 0.0;
                }
                let half = disc.sqrt();
                let (t0, t1) = (-p - half, -p + half);
                self.amplitude * (t1 - t0.max(0.0)).max(0.0)
            }
        }
    }

    /// `∫_ℝ ρ(x + t n) dt`.
    pub fn line_integral(&self, x: Vec3, n: Direction3) -> f64 {
        let rel = x - self.center;
        let p = n.dot(rel);
        let d2 = (rel.norm_squared() - p * p).max(0.0);
        let a = self.scale;
        match self.kind {
            PrimitiveKind::Gaussian => self.amplitude * a * PI.sqrt() * (-d2 / (a * a)).exp(),
            PrimitiveKind::Ball => 2.0 * self.amplitude * (a * a - d2).max(0.0).sqrt(),
        }
    }

    /// Integral over the plane `{y : y·n = s}`.
    pub fn plane_integral(&self, n: Direction3, s: f64) -> f64 {
        let u = s - n.dot(self.center);
        let a = self.scale;
        match self.kind {
            PrimitiveKind::Gaussian => self.amplitude * a * a * PI * (-u * u / (a * a)).exp(),
            PrimitiveKind::Ball => {
                if u.abs() <= a {
                    self.amplitude * PI * (a * a - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// `∂/∂s` of [`Primitive::plane_integral`].
    pub fn plane_integral_derivative(&self, n: Direction3, s: f64) -> f64 {
        let u = s - n.dot(self.center);
        let a = self.scale;
        match self.kind {
            PrimitiveKind::Gaussian => {
                -2.0 * u / (a * a) * self.amplitude * a * a * PI * (-u * u / (a * a)).exp()
            }
            PrimitiveKind::Ball => {
                if u.abs() <= a {
                    -2.0 * PI * self.amplitude * u
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫_{ℝ³} ρ`.
    pub fn total_mass(&self) -> f64 {
        let a = self.scale;
        match self.kind {
            PrimitiveKind::Gaussian => self.amplitude * a * a * a * PI.powf(1.5),
            PrimitiveKind::Ball => self.amplitude * 4.0 / 3.0 * PI * a * a * a,
        }
    }

    fn support_extent(&self) -> f64 {
        self.center.norm() + SUPPORT_SCALES * self.scale
    }

    fn raster_extent(&self) -> f64 {
        match self.kind {
            PrimitiveKind::Gaussian => RASTER_SCALES * self.scale,
            PrimitiveKind::Ball => self.scale,
        }
    }
}

/// Sum of primitives, negligible outside a ball of `support_radius` about
/// the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    primitives: Vec<Primitive>,
    support_radius: f64,
}

impl Phantom {
    pub fn new(primitives: Vec<Primitive>) -> Self {
        let support_radius = required_support(&primitives);
        Phantom {
            primitives,
            support_radius,
        }
    }

    pub fn with_support_radius(primitives: Vec<Primitive>, support_radius: f64) -> Result<Self> {
        let required = required_support(&primitives);
        if support_radius.is_nan() || support_radius < required {
            return Err(Error::invalid(
                "support_radius",
                format!("{support_radius} is smaller than the required {required}"),
            ));
        }
        Ok(Phantom {
            primitives,
            support_radius,
        })
    }

    pub fn empty() -> Self {
        Phantom::new(Vec::new())
    }

    /// `exp(-|x|²)`.
    pub fn unit_gaussian() -> Self {
        Phantom::new(vec![Primitive::gaussian(Vec3::ZERO, 1.0, 1.0).unwrap()])
    }

    /// Indicator of the unit ball.
    pub fn unit_ball() -> Self {
        Phantom::new(vec![Primitive::ball(Vec3::ZERO, 1.0, 1.0).unwrap()])
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    /// True when every primitive is a Gaussian (so the density is smooth).
    pub fn is_smooth(&self) -> bool {
        self.primitives
            .iter()
            .all(|p| p.kind == PrimitiveKind::Gaussian)
    }

    /// Same phantom with every amplitude multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Phantom {
        Phantom {
            primitives: self
                .primitives
                .iter()
                .map(|p| Primitive {
                    amplitude: p.amplitude * k,
                    ..*p
                })
                .collect(),
            support_radius: self.support_radius,
        }
    }

    /// Same phantom with every center moved by `shift`.
    pub fn translated(&self, shift: Vec3) -> Phantom {
        Phantom::new(
            self.primitives
                .iter()
                .map(|p| Primitive {
                    center: p.center + shift,
                    ..*p
                })
                .collect(),
        )
    }

    pub fn eval(&self, x: Vec3) -> f64 {
        self.primitives.iter().map(|p| p.eval(x)).sum()
    }

    pub fn halfline_integral(&self, x: Vec3, n: Direction3) -> f64 {
        self.primitives
            .iter()
            .map(|p| p.halfline_integral(x, n))
            .sum()
    }

    pub fn line_integral(&self, x: Vec3, n: Direction3) -> f64 {
        self.primitives.iter().map(|p| p.line_integral(x, n)).sum()
    }

    pub fn plane_integral(&self, n: Direction3, s: f64) -> f64 {
        self.primitives.iter().map(|p| p.plane_integral(n, s)).sum()
    }

    pub fn plane_integral_derivative(&self, n: Direction3, s: f64) -> f64 {
        self.primitives
            .iter()
            .map(|p| p.plane_integral_derivative(n, s))
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.primitives.iter().map(Primitive::total_mass).sum()
    }

    /// Samples [`Phantom::eval`] at every grid point.
    ///
    /// The grid box must contain each Gaussian out to [`RASTER_SCALES`]
    /// widths and each ball entirely.
    pub fn rasterize(&self, grid: &VolumeGrid) -> Result<VolumeGrid> {
        let (lo, hi) = (grid.lower(), grid.upper());
        for p in &self.primitives {
            let r = p.raster_extent();
            let covered = (0..3).all(|a| {
                let c = p.center.component(a);
                c - r >= lo.component(a) - 1e-12 && c + r <= hi.component(a) + 1e-12
            });
            if !covered {
                return Err(Error::GridDoesNotCover {
                    lo: lo.to_array(),
                    hi: hi.to_array(),
                    center: p.center.to_array(),
                    radius: r,
                });
            }
        }
        let samples = (0..grid.len())
            .map(|i| self.eval(grid.point_at(i)))
            .collect();
        VolumeGrid::from_samples(grid.origin(), grid.spacing(), grid.dims(), samples)
    }

    pub fn parse(text: &str) -> Result<Phantom> {
        parse_phantom(text, Path::new("<input>"))
    }

    pub fn from_file(path: &Path) -> Result<Phantom> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_phantom(&text, path)
    }

    /// Serializes in the phantom file grammar. Values use Rust's shortest
    /// round-trip float formatting, so `parse(to_text())` is lossless.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "support_radius {}", self.support_radius);
        for p in &self.primitives {
            let _ = writeln!(
                out,
                "{} center={},{},{} scale={} amplitude={}",
                p.kind.name(),
                p.center.x,
                p.center.y,
                p.center.z,
                p.scale,
                p.amplitude
            );
        }
        out
    }
}

fn required_support(primitives: &[Primitive]) -> f64 {
    primitives
        .iter()
        .map(Primitive::support_extent)
        .fold(0.0, f64::max)
}

fn parse_phantom(text: &str, path: &Path) -> Result<Phantom> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut primitives = Vec::new();
    let mut support = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap_or_default();
        let kind = match head {
            "support_radius" => {
                let value = tokens
                    .next()
                    .ok_or_else(|| err(line_no, "support_radius needs a value".into()))?;
                if tokens.next().is_some() {
                    return Err(err(line_no, "trailing tokens after support_radius".into()));
                }
                let r = parse_f64(value).map_err(|m| err(line_no, m))?;
                if support.replace(r).is_some() {
                    return Err(err(line_no, "duplicate support_radius record".into()));
                }
                continue;
            }
            "gaussian" => PrimitiveKind::Gaussian,
            "ball" => PrimitiveKind::Ball,
            other => return Err(err(line_no, format!("unknown primitive kind `{other}`"))),
        };
        let (mut center, mut scale, mut amplitude) = (None, None, None);
        for tok in tokens {
            let (key, value) = tok
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected key=value, got `{tok}`")))?;
            let slot_taken = match key {
                "center" => {
                    let parts: Vec<&str> = value.split(',').collect();
                    if parts.len() != 3 {
                        return Err(err(
                            line_no,
                            format!("center needs 3 components, got `{value}`"),
                        ));
                    }
                    let mut c = [0.0; 3];
                    for (dst, s) in c.iter_mut().zip(parts) {
                        *dst = parse_f64(s).map_err(|m| err(line_no, m))?;
                    }
                    center.replace(Vec3::from_array(c)).is_some()
                }
                "scale" => scale
                    .replace(parse_f64(value).map_err(|m| err(line_no, m))?)
                    .is_some(),
                "amplitude" => amplitude
                    .replace(parse_f64(value).map_err(|m| err(line_no, m))?)
                    .is_some(),
                other => return Err(err(line_no, format!("unknown field `{other}`"))),
            };
            if slot_taken {
                return Err(err(line_no, format!("duplicate field `{key}`")));
            }
        }
        let center = center.ok_or_else(|| err(line_no, "missing field `center`".into()))?;
        let scale = scale.ok_or_else(|| err(line_no, "missing field `scale`".into()))?;
        let amplitude =
            amplitude.ok_or_else(|| err(line_no, "missing field `amplitude`".into()))?;
        let prim = Primitive::new(kind, center, scale, amplitude)
            .map_err(|e| err(line_no, e.to_string()))?;
        primitives.push(prim);
    }
    match support {
        Some(r) => Phantom::with_support_radius(primitives, r).map_err(|e| err(0, e.to_string())),
        None => Ok(Phantom::new(primitives)),
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("not a number: `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value `{s}`"))
    }
}
