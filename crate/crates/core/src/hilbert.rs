//! Principal-value Hilbert transform of uniformly sampled profiles.
//!
//! Convention: `Hf(s) = (1/π) P.V. ∫ f(σ) / (s - σ) dσ`, so that
//! `H[1/(1+s²)] = s/(1+s²)` and `H∘H = -I`.
//!
//! Two independent routes are provided. [`hilbert_spectral`] applies the
//! multiplier `-i·sgn(ω)` in the Fourier domain of the zero-padded profile;
//! [`hilbert_pv_direct`] integrates the singularity-subtracted kernel by the
//! trapezoid rule and adds the analytic log term for the subtracted constant.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::xform::{check_s_grid, grid_node, RadonProfile};

pub const MIN_SAMPLES: usize = 8;

/// Minimum zero-padding factor for the spectral route. The padded length is
/// rounded up to a power of two.
pub const PAD_FACTOR: usize = 4;

/// Largest end value accepted by the Hilbert routes, relative to the
/// profile's peak magnitude.
pub const TAIL_TOLERANCE: f64 = 1e-3;

/// Samples of a function on the uniform grid
/// `s_k = s_min + k (s_max - s_min) / (count - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    s_min: f64,
    s_max: f64,
    values: Vec<f64>,
}

impl Profile1D {
    pub fn new(s_min: f64, s_max: f64, values: Vec<f64>) -> Result<Self> {
        check_s_grid(s_min, s_max, values.len(), MIN_SAMPLES)?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "values",
                format!("non-finite sample at index {k}"),
            ));
        }
        Ok(Profile1D {
            s_min,
            s_max,
            values,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(s_min: f64, s_max: f64, count: usize, f: F) -> Result<Self> {
        check_s_grid(s_min, s_max, count, MIN_SAMPLES)?;
        let values = (0..count)
            .map(|k| f(grid_node(s_min, s_max, count, k)))
            .collect();
        Profile1D::new(s_min, s_max, values)
    }

    pub fn s_min(&self) -> f64 {
        self.s_min
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spacing(&self) -> f64 {
        (self.s_max - self.s_min) / (self.count() - 1) as f64
    }

    pub fn s(&self, k: usize) -> f64 {
        grid_node(self.s_min, self.s_max, self.count(), k)
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count()).map(move |k| self.s(k))
    }

    pub fn scaled(&self, k: f64) -> Profile1D {
        Profile1D {
            values: self.values.iter().map(|v| v * k).collect(),
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Four-point Lagrange (cubic) interpolation. The stencil is the four
    /// nodes around `s`, shifted inward at the ends of the grid.
    pub fn interpolate(&self, s: f64) -> Result<f64> {
        let h = self.spacing();
        let slack = 1e-9 * h;
        if !(s >= self.s_min - slack && s <= self.s_max + slack) {
            return Err(Error::OutOfRange {
                s,
                s_min: self.s_min,
                s_max: self.s_max,
            });
        }
        let t = (s - self.s_min) / h;
        let n = self.count();
        let i = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let u = t - i as f64;
        let v = &self.values[i..i + 4];
        // Lagrange basis on nodes 0, 1, 2, 3.
        let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
        let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
        let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
        let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
        Ok(l0 * v[0] + l1 * v[1] + l2 * v[2] + l3 * v[3])
    }

    fn check_decay(&self, tail_tolerance: f64) -> Result<()> {
        let peak = self.max_abs();
        if peak == 0.0 {
            return Ok(());
        }
        let limit = tail_tolerance * peak;
        let edge = self.values[0]
            .abs()
            .max(self.values[self.count() - 1].abs());
        if edge > limit {
            return Err(Error::NotDecaying {
                edge,
                limit: tail_tolerance,
            });
        }
        Ok(())
    }
}

impl TryFrom<&RadonProfile> for Profile1D {
    type Error = Error;

    fn try_from(p: &RadonProfile) -> Result<Self> {
        Profile1D::new(p.s_min, p.s_max, p.values.clone())
    }
}

/// Hilbert transform through the Fourier domain of the zero-padded profile,
/// evaluated on the input grid.
///
/// The multiplier `-i·sgn(ω)` of the discrete-time Fourier transform has
/// impulse response `2/(πk)` for odd `k` and 0 for even `k`. Both the
/// profile and that kernel (truncated to `|k| < count`, which is exact on the
/// input grid) are zero-padded to at least `PAD_FACTOR · count` and
/// multiplied bin by bin, so the product is a linear rather than circular
/// convolution.
pub fn hilbert_spectral(p: &Profile1D) -> Result<Profile1D> {
    hilbert_spectral_with(p, TAIL_TOLERANCE)
}

pub fn hilbert_spectral_with(p: &Profile1D, tail_tolerance: f64) -> Result<Profile1D> {
    p.check_decay(tail_tolerance)?;
    let n = p.count();
    let m = (PAD_FACTOR * n).next_power_of_two();
    let zero = Complex::new(0.0, 0.0);

    let mut signal = vec![zero; m];
    for (dst, &v) in signal.iter_mut().zip(&p.values) {
        *dst = Complex::new(v, 0.0);
    }
    let mut kernel = vec![zero; m];
    for k in (1..n).step_by(2) {
        let c = 2.0 / (PI * k as f64);
        kernel[k] = Complex::new(c, 0.0);
        kernel[m - k] = Complex::new(-c, 0.0);
    }

    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(m);
    forward.process(&mut signal);
    forward.process(&mut kernel);
    for (s, k) in signal.iter_mut().zip(&kernel) {
        *s *= *k;
    }
    planner.plan_fft_inverse(m).process(&mut signal);

    let scale = 1.0 / m as f64;
    let values = signal[..n].iter().map(|c| c.re * scale).collect();
    Profile1D::new(p.s_min, p.s_max, values)
}

/// Direct principal-value quadrature at every interior grid node. The
/// result lives on the interior grid (`count - 2` nodes) because the log
/// end-correction is singular at the endpoints.
pub fn hilbert_pv_direct(p: &Profile1D) -> Result<Profile1D> {
    p.check_decay(TAIL_TOLERANCE)?;
    let slope = derivative(p);
    let n = p.count();
    let values = (1..n - 1)
        .map(|i| pv_sum(p, p.s(i), p.values[i], Some((i, slope.values[i]))))
        .collect();
    Profile1D::new(p.s(1), p.s(n - 2), values)
}

/// Direct principal-value quadrature at an arbitrary point strictly inside
/// the grid.
pub fn hilbert_pv_direct_at(p: &Profile1D, s: f64) -> Result<f64> {
    if !(s > p.s_min && s < p.s_max) {
        return Err(Error::invalid(
            "s",
            format!(
                "principal value needs s strictly inside ({}, {}), got {s}",
                p.s_min, p.s_max
            ),
        ));
    }
    p.check_decay(TAIL_TOLERANCE)?;
    let h = p.spacing();
    let t = (s - p.s_min) / h;
    let k = t.round();
    if (t - k).abs() < 1e-12 {
        let k = k as usize;
        let slope = derivative(p).values[k];
        return Ok(pv_sum(p, p.s(k), p.values[k], Some((k, slope))));
    }
    let fs = p.interpolate(s)?;
    Ok(pv_sum(p, s, fs, None))
}

/// `(1/π) [ ∫ (f(σ) - f(s)) / (s - σ) dσ + f(s) ln((s - a) / (b - s)) ]`,
/// trapezoid rule over the grid. `node` marks a grid node coinciding with
/// `s` together with `f'(s)`, the limit of the subtracted integrand there
/// being `-f'(s)`.
fn pv_sum(p: &Profile1D, s: f64, fs: f64, node: Option<(usize, f64)>) -> f64 {
    let h = p.spacing();
    let n = p.count();
    let mut acc = 0.0;
    for (j, &fj) in p.values.iter().enumerate() {
        let g = match node {
            Some((i, slope)) if i == j => -slope,
            _ => (fj - fs) / (s - p.s(j)),
        };
        let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        acc += w * g;
    }
    let log_term = fs * ((s - p.s_min) / (p.s_max - s)).ln();
    (acc * h + log_term) / PI
}

/// First derivative: fourth-order central differences in the interior,
/// second-order central next to the ends, second-order one-sided at the
/// ends.
pub fn derivative(p: &Profile1D) -> Profile1D {
    let f = &p.values;
    let n = f.len();
    let h = p.spacing();
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    d[1] = (f[2] - f[0]) / (2.0 * h);
    d[n - 2] = (f[n - 1] - f[n - 3]) / (2.0 * h);
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    }
    Profile1D {
        s_min: p.s_min,
        s_max: p.s_max,
        values: d,
    }
}
