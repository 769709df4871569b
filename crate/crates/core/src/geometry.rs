//! Directions, orthogonal frames, spherical quadrature and Cartesian grids.
//!
//! Every surface integral in the crate is taken against the unnormalized
//! measure on the unit sphere, so quadrature weights sum to `4π`.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|n| - 1` accepted when a direction is constructed.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Plain 3-vector in world coordinates (lengths).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn component(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit vector on the sphere; the photon direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction3(Vec3);

impl Direction3 {
    pub const X: Direction3 = Direction3(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: Direction3 = Direction3(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: Direction3 = Direction3(Vec3::new(0.0, 0.0, 1.0));

    /// Accepts `v` only if it is already unit length within [`UNIT_TOLERANCE`].
    /// Components more than a few ulps off unit norm are renormalized; others
    /// are stored bit for bit.
    pub fn new(u1: f64, u2: f64, u3: f64) -> Result<Self> {
        let v = Vec3::new(u1, u2, u3);
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NonUnitDirection { norm });
        }
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Direction3(v));
        }
        Ok(Direction3(v * (1.0 / norm)))
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalize(v: Vec3) -> Result<Self> {
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NonUnitDirection { norm });
        }
        Ok(Direction3(v * (1.0 / norm)))
    }

    pub fn vec(self) -> Vec3 {
        self.0
    }

    pub fn u1(self) -> f64 {
        self.0.x
    }

    pub fn u2(self) -> f64 {
        self.0.y
    }

    pub fn u3(self) -> f64 {
        self.0.z
    }

    pub fn dot(self, v: Vec3) -> f64 {
        self.0.dot(v)
    }
}

impl Neg for Direction3 {
    type Output = Direction3;
    fn neg(self) -> Direction3 {
        Direction3(-self.0)
    }
}

/// A direction together with one unit vector perpendicular to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub n: Direction3,
    pub n_perp: Direction3,
}

/// Builds a deterministic perpendicular to `n`.
///
/// The coordinate axis least aligned with `n` (ties go to the lowest axis
/// index) is projected onto the plane orthogonal to `n` and normalized.
pub fn make_frame(n: Direction3) -> Frame {
    let v = n.vec();
    let mut axis = 0;
    for k in 1..3 {
        if v.component(k).abs() < v.component(axis).abs() {
            axis = k;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let e = Vec3::from_array(e);
    let p = e - v * v.component(axis);
    // |p|² = 1 - n_k², and n_k² ≤ 1/3 for the least aligned axis.
    let n_perp = Direction3(p * (1.0 / p.norm()));
    Frame { n, n_perp }
}

/// Nodes and weights approximating `∫_{S²} f(n) dn`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    nodes: Vec<Direction3>,
    weights: Vec<f64>,
}

impl SphereQuadrature {
    /// Builds a rule from explicit nodes and weights. Weights must be
    /// positive and sum to `4π` within 1e-6.
    pub fn new(nodes: Vec<Direction3>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::invalid(
                "weights",
                format!("{} weights for {} nodes", weights.len(), nodes.len()),
            ));
        }
        if nodes.is_empty() {
            return Err(Error::invalid("nodes", "empty quadrature"));
        }
        if let Some(w) = weights.iter().find(|w| w.is_nan() || **w <= 0.0) {
            return Err(Error::invalid(
                "weights",
                format!("non-positive weight {w}"),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 4.0 * PI).abs() > 1e-6 {
            return Err(Error::invalid(
                "weights",
                format!("weights sum to {total}, expected 4π"),
            ));
        }
        Ok(SphereQuadrature { nodes, weights })
    }

    pub fn nodes(&self) -> &[Direction3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Direction3, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Geodesic radius of a spherical cap whose area equals the mean area
    /// per node, `2π(1 - cos r) = 4π / count`.
    pub fn node_spacing(&self) -> f64 {
        let c = 1.0 - 2.0 / self.len() as f64;
        c.clamp(-1.0, 1.0).acos()
    }
}

/// Golden-angle (Fibonacci) lattice with equal weights `4π / count`.
pub fn fibonacci_sphere(count: usize) -> Result<SphereQuadrature> {
    if count < 2 {
        return Err(Error::invalid(
            "count",
            format!("need at least 2 nodes, got {count}"),
        ));
    }
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    let n = count as f64;
    let nodes = (0..count)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            Direction3::normalize(Vec3::new(r * phi.cos(), r * phi.sin(), z))
                .expect("lattice point is nonzero")
        })
        .collect();
    let w = 4.0 * PI / n;
    Ok(SphereQuadrature {
        nodes,
        weights: vec![w; count],
    })
}

/// `Σ_k w_k f(n_k)`, accumulated in node order.
pub fn sphere_integrate<F>(q: &SphereQuadrature, mut f: F) -> f64
where
    F: FnMut(Direction3) -> f64,
{
    q.iter().fold(0.0, |acc, (n, w)| acc + w * f(n))
}

/// Uniform 3D scalar field, x-fastest sample order.
///
/// Sample `(i, j, k)` sits at `origin + (i·dx, j·dy, k·dz)`; the grid box is
/// the convex hull of the sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid {
    origin: Vec3,
    spacing: [f64; 3],
    dims: [usize; 3],
    samples: Vec<f64>,
}

impl VolumeGrid {
    pub fn zeros(origin: Vec3, spacing: [f64; 3], dims: [usize; 3]) -> Result<Self> {
        let len = checked_len(spacing, dims)?;
        Ok(VolumeGrid {
            origin,
            spacing,
            dims,
            samples: vec![0.0; len],
        })
    }

    pub fn from_samples(
        origin: Vec3,
        spacing: [f64; 3],
        dims: [usize; 3],
        samples: Vec<f64>,
    ) -> Result<Self> {
        let len = checked_len(spacing, dims)?;
        if samples.len() != len {
            return Err(Error::invalid(
                "samples",
                format!("{} samples for dims {dims:?}", samples.len()),
            ));
        }
        Ok(VolumeGrid {
            origin,
            spacing,
            dims,
            samples,
        })
    }

    /// `count³` samples spanning `[min, max]³` inclusive.
    pub fn cube(min: f64, max: f64, count: usize) -> Result<Self> {
        if min.is_nan() || max.is_nan() || max <= min || count < 2 {
            return Err(Error::invalid(
                "grid",
                format!("need min < max and count >= 2, got [{min}, {max}] x {count}"),
            ));
        }
        let h = (max - min) / (count - 1) as f64;
        VolumeGrid::zeros(Vec3::new(min, min, min), [h; 3], [count; 3])
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.samples[self.index(i, j, k)]
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin
            + Vec3::new(
                i as f64 * self.spacing[0],
                j as f64 * self.spacing[1],
                k as f64 * self.spacing[2],
            )
    }

    /// Position of the sample with flat index `idx`.
    pub fn point_at(&self, idx: usize) -> Vec3 {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        self.point(i, j, k)
    }

    /// All sample positions in storage order.
    pub fn points(&self) -> impl Iterator<Item = Vec3> + '_ {
        (0..self.len()).map(move |idx| self.point_at(idx))
    }

    pub fn lower(&self) -> Vec3 {
        self.origin
    }

    pub fn upper(&self) -> Vec3 {
        self.point(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        (0..3).all(|a| p.component(a) >= lo.component(a) && p.component(a) <= hi.component(a))
    }

    /// Trilinear interpolation; zero outside the grid box.
    pub fn trilinear(&self, p: Vec3) -> f64 {
        if !self.contains(p) {
            return 0.0;
        }
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let t = (p.component(a) - self.origin.component(a)) / self.spacing[a];
            let last = self.dims[a] - 1;
            let i = (t.floor().max(0.0) as usize).min(last.saturating_sub(1));
            base[a] = i;
            frac[a] = if last == 0 {
                0.0
            } else {
                (t - i as f64).clamp(0.0, 1.0)
            };
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut ijk = [0usize; 3];
            for a in 0..3 {
                let upper = (corner >> a) & 1 == 1;
                w *= if upper { frac[a] } else { 1.0 - frac[a] };
                ijk[a] = (base[a] + upper as usize).min(self.dims[a] - 1);
            }
            if w != 0.0 {
                acc += w * self.get(ijk[0], ijk[1], ijk[2]);
            }
        }
        acc
    }
}

fn checked_len(spacing: [f64; 3], dims: [usize; 3]) -> Result<usize> {
    if dims.contains(&0) {
        return Err(Error::invalid(
            "dims",
            format!("dims must be positive, got {dims:?}"),
        ));
    }
    if spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::invalid(
            "spacing",
            format!("spacing must be positive, got {spacing:?}"),
        ));
    }
    Ok(dims.iter().product())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_frame(f: Frame) {
        let (n, p) = (f.n.vec(), f.n_perp.vec());
        assert!(n.dot(p).abs() < 1e-12);
        assert!((p.norm() - 1.0).abs() < 1e-12);
        assert!((n.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frame_axis_cases() {
        let f = make_frame(Direction3::X);
        assert_eq!(f.n_perp.vec(), Vec3::new(0.0, 1.0, 0.0));
        let f = make_frame(Direction3::Z);
        assert_eq!(f.n_perp.vec(), Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn frame_diagonal_is_orthonormal() {
        let s = 0.5f64.sqrt();
        let f = make_frame(Direction3::new(s, s, 0.0).unwrap());
        assert_frame(f);
    }

    #[test]
    fn frame_rejects_non_unit() {
        assert!(matches!(
            Direction3::new(1.0, 1.0, 0.0),
            Err(Error::NonUnitDirection { .. })
        ));
        assert!(Direction3::new(1.0 + 1e-10, 0.0, 0.0).is_ok());
        assert!(Direction3::new(1.0 + 1e-8, 0.0, 0.0).is_err());
    }

    #[test]
    fn frame_is_deterministic() {
        let n = Direction3::normalize(Vec3::new(0.3, -0.7, 0.2)).unwrap();
        let a = make_frame(n);
        let b = make_frame(n);
        assert_eq!(
            a.n_perp.vec().to_array().map(f64::to_bits),
            b.n_perp.vec().to_array().map(f64::to_bits)
        );
        assert_frame(a);
    }

    #[test]
    fn fibonacci_weights_and_constants() {
        let q = fibonacci_sphere(1000).unwrap();
        let total: f64 = q.weights().iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-9);
        assert!((sphere_integrate(&q, |_| 1.0) - 4.0 * PI).abs() < 1e-9);
        assert!(q.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn fibonacci_second_moment() {
        let q = fibonacci_sphere(2000).unwrap();
        let m = sphere_integrate(&q, |n| n.u3() * n.u3());
        assert!((m - 4.0 * PI / 3.0).abs() < 1e-3, "{m}");
    }

    #[test]
    fn fibonacci_rejects_small_counts() {
        assert!(fibonacci_sphere(0).is_err());
        assert!(fibonacci_sphere(1).is_err());
        assert!(fibonacci_sphere(2).is_ok());
    }

    #[test]
    fn integrate_trivial_integrands() {
        let q = fibonacci_sphere(500).unwrap();
        assert_eq!(sphere_integrate(&q, |_| 0.0), 0.0);
        let unit = sphere_integrate(&q, |n| n.vec().norm_squared());
        assert!((unit - 4.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn odd_monomials_nearly_vanish() {
        for count in [1000, 2000, 5000] {
            let q = fibonacci_sphere(count).unwrap();
            for axis in 0..3 {
                let v = sphere_integrate(&q, |n| n.vec().component(axis));
                assert!(v.abs() < 1e-2, "count {count} axis {axis}: {v}");
            }
        }
    }

    type Case = (&'static str, fn(Vec3) -> f64, f64);

    #[test]
    fn degree_two_polynomials_match_closed_forms() {
        let q = fibonacci_sphere(2000).unwrap();
        let third = 4.0 * PI / 3.0;
        let cases: [Case; 5] = [
            ("x^2", |v| v.x * v.x, third),
            ("y^2", |v| v.y * v.y, third),
            ("xy", |v| v.x * v.y, 0.0),
            ("yz", |v| v.y * v.z, 0.0),
            ("x^2 - z^2 + 2", |v| v.x * v.x - v.z * v.z + 2.0, 8.0 * PI),
        ];
        for (name, f, exact) in cases {
            let v = sphere_integrate(&q, |n| f(n.vec()));
            assert!((v - exact).abs() < 1e-3, "{name}: {v} vs {exact}");
        }
    }

    #[test]
    fn quadrature_validation() {
        let n = vec![Direction3::X, Direction3::Z];
        assert!(SphereQuadrature::new(n.clone(), vec![2.0 * PI, 2.0 * PI]).is_ok());
        assert!(SphereQuadrature::new(n.clone(), vec![4.0 * PI, 0.0]).is_err());
        assert!(SphereQuadrature::new(n.clone(), vec![1.0, 1.0]).is_err());
        assert!(SphereQuadrature::new(n, vec![4.0 * PI]).is_err());
    }

    #[test]
    fn node_spacing_shrinks_with_count() {
        let a = fibonacci_sphere(8000).unwrap().node_spacing();
        let b = fibonacci_sphere(32000).unwrap().node_spacing();
        assert!((a - 2.0 / 8000f64.sqrt()).abs() < 1e-4);
        assert!(b < a);
    }

    #[test]
    fn grid_layout_and_trilinear() {
        let mut g = VolumeGrid::cube(-1.0, 1.0, 3).unwrap();
        assert_eq!(g.len(), 27);
        assert_eq!(g.point(1, 1, 1), Vec3::ZERO);
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 3);
        assert_eq!(g.point_at(g.index(2, 0, 1)), Vec3::new(1.0, -1.0, 0.0));
        // Linear field is reproduced exactly.
        let pts: Vec<Vec3> = g.points().collect();
        for (s, p) in g.samples_mut().iter_mut().zip(pts) {
            *s = 1.0 + 2.0 * p.x - p.y + 0.5 * p.z;
        }
        let p = Vec3::new(0.3, -0.45, 0.9);
        assert!((g.trilinear(p) - (1.0 + 0.6 + 0.45 + 0.45)).abs() < 1e-12);
        assert_eq!(g.trilinear(Vec3::new(1.5, 0.0, 0.0)), 0.0);
        assert!((g.trilinear(g.upper()) - (1.0 + 2.0 - 1.0 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(VolumeGrid::zeros(Vec3::ZERO, [1.0; 3], [0, 1, 1]).is_err());
        assert!(VolumeGrid::zeros(Vec3::ZERO, [1.0, -1.0, 1.0], [1, 1, 1]).is_err());
        assert!(VolumeGrid::from_samples(Vec3::ZERO, [1.0; 3], [2, 2, 2], vec![0.0; 7]).is_err());
    }
}
