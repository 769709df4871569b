//! Forward operators: the divergent-beam X-ray transform, the full-line
//! transform and planar Radon profiles, evaluated from analytic phantoms or
//! by ray marching through sampled volumes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Direction3, Vec3, VolumeGrid};
use crate::phantom::Phantom;

/// Default difference step as a fraction of the domain radius.
pub const DIFF_STEP_FRACTION: f64 = 1e-4;

/// One divergent-beam sample `(Xρ)(x, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XRayDatum {
    pub x: Vec3,
    pub n: Direction3,
    pub value: f64,
}

/// Plane integrals `s ↦ (Rρ)(n, s)` on the uniform grid
/// `s_k = s_min + k (s_max - s_min) / (count - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadonProfile {
    pub n: Direction3,
    pub s_min: f64,
    pub s_max: f64,
    pub values: Vec<f64>,
}

impl RadonProfile {
    pub fn new(n: Direction3, s_min: f64, s_max: f64, values: Vec<f64>) -> Result<Self> {
        check_s_grid(s_min, s_max, values.len(), 2)?;
        Ok(RadonProfile {
            n,
            s_min,
            s_max,
            values,
        })
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        (self.s_max - self.s_min) / (self.count() - 1) as f64
    }

    pub fn s(&self, k: usize) -> f64 {
        grid_node(self.s_min, self.s_max, self.count(), k)
    }
}

/// Node `k` of the uniform `count`-point grid on `[s_min, s_max]`; exact at
/// both ends.
pub(crate) fn grid_node(s_min: f64, s_max: f64, count: usize, k: usize) -> f64 {
    let t = k as f64 / (count - 1) as f64;
    s_min * (1.0 - t) + s_max * t
}

pub(crate) fn check_s_grid(s_min: f64, s_max: f64, count: usize, min_count: usize) -> Result<()> {
    if count < min_count {
        return Err(Error::invalid(
            "count",
            format!("need at least {min_count} samples, got {count}"),
        ));
    }
    if !s_min.is_finite() || !s_max.is_finite() || s_max <= s_min {
        return Err(Error::invalid(
            "s-range",
            format!("need finite s_min < s_max, got [{s_min}, {s_max}]"),
        ));
    }
    Ok(())
}

/// `(Xρ)(x, n) = ∫₀^∞ ρ(x + t n) dt`, closed form.
pub fn xray(ph: &Phantom, x: Vec3, n: Direction3) -> f64 {
    ph.halfline_integral(x, n)
}

/// Full-line transform, the sum of the two opposite half-line transforms.
pub fn line_transform(ph: &Phantom, x: Vec3, n: Direction3) -> f64 {
    xray(ph, x, n) + xray(ph, x, -n)
}

/// Evaluates [`xray`] for a batch of `(x, n)` pairs in parallel; output order
/// follows input order.
pub fn xray_batch(ph: &Phantom, rays: &[(Vec3, Direction3)]) -> Vec<XRayDatum> {
    rays.par_iter()
        .map(|&(x, n)| XRayDatum {
            x,
            n,
            value: xray(ph, x, n),
        })
        .collect()
}

/// Midpoint rule for `∫_{t0}^{t1} f(x + t n) dt` with the largest uniform
/// step not exceeding `step`.
pub fn march<F>(f: F, x: Vec3, n: Direction3, t0: f64, t1: f64, step: f64) -> f64
where
    F: Fn(Vec3) -> f64,
{
    let len = t1 - t0;
    if len.is_nan() || len <= 0.0 {
        return 0.0;
    }
    let steps = (len / step).ceil().max(1.0) as usize;
    let h = len / steps as f64;
    let dir = n.vec();
    (0..steps)
        .map(|i| f(x + dir * (t0 + (i as f64 + 0.5) * h)))
        .sum::<f64>()
        * h
}

/// Parameter interval `[t_in, t_out]` (with `t_in ≥ 0`) over which the ray
/// `x + t n` lies inside the grid box, if any.
pub fn ray_box_interval(grid: &VolumeGrid, x: Vec3, n: Direction3) -> Option<(f64, f64)> {
    let (lo, hi) = (grid.lower(), grid.upper());
    let (mut t_in, mut t_out) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        let (o, d) = (x.component(a), n.vec().component(a));
        let (l, h) = (lo.component(a), hi.component(a));
        if d.abs() < 1e-300 {
            if o < l || o > h {
                return None;
            }
            continue;
        }
        let (ta, tb) = ((l - o) / d, (h - o) / d);
        t_in = t_in.max(ta.min(tb));
        t_out = t_out.min(ta.max(tb));
    }
    (t_out > t_in).then_some((t_in, t_out))
}

/// Ray-marched X-ray transform of a sampled volume: midpoint rule with
/// trilinear interpolation, from `x` (or the entry point) to the grid
/// boundary.
pub fn xray_numeric(vol: &VolumeGrid, x: Vec3, n: Direction3, step: f64) -> Result<f64> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(
            "step",
            format!("must be positive, got {step}"),
        ));
    }
    Ok(match ray_box_interval(vol, x, n) {
        Some((t0, t1)) => march(|p| vol.trilinear(p), x, n, t0, t1, step),
        None => 0.0,
    })
}

/// Samples plane integrals of `ph` on a uniform `s` grid.
pub fn radon_profile(
    ph: &Phantom,
    n: Direction3,
    s_min: f64,
    s_max: f64,
    count: usize,
) -> Result<RadonProfile> {
    check_s_grid(s_min, s_max, count, 2)?;
    let values = (0..count)
        .map(|k| ph.plane_integral(n, grid_node(s_min, s_max, count, k)))
        .collect();
    RadonProfile::new(n, s_min, s_max, values)
}

/// Central difference `[g(x + h n, n) - g(x - h n, n)] / 2h` of arbitrary
/// divergent-beam data `g`.
pub fn directional_derivative<F>(data: F, x: Vec3, n: Direction3, h: f64) -> f64
where
    F: Fn(Vec3, Direction3) -> f64,
{
    let step = n.vec() * h;
    (data(x + step, n) - data(x - step, n)) / (2.0 * h)
}

/// `n·∇ₓ(Xρ)(x, n)` by central differences on the analytic transform.
pub fn directional_derivative_xray(ph: &Phantom, x: Vec3, n: Direction3, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("must be positive, got {h}")));
    }
    Ok(directional_derivative(|p, d| xray(ph, p, d), x, n, h))
}

/// `DIFF_STEP_FRACTION` times the phantom's support radius (or 1 for an
/// empty phantom).
pub fn default_diff_step(ph: &Phantom) -> f64 {
    let r = ph.support_radius();
    DIFF_STEP_FRACTION * if r > 0.0 { r } else { 1.0 }
}
