//! Divergent-beam X-ray and planar Radon transforms of analytic phantoms,
//! principal-value Hilbert filtering, and the inversion formulas that
//! recover a density from either kind of data.
//!
//! Modules, bottom-up:
//!
//! * [`geometry`]: directions, perpendicular frames, Fibonacci sphere
//!   quadrature and uniform volume grids.
//! * [`phantom`]: Gaussian and ball densities with closed-form line and
//!   plane integrals, plus the phantom file grammar.
//! * [`xform`]: forward operators, analytic and ray-marched.
//! * [`hilbert`]: spectral and direct principal-value Hilbert transforms of
//!   sampled profiles.
//! * [`inversion`]: reconstruction branches, Grangeat conversion,
//!   calibration and diagnostics.
//! * [`io`]: CSV exports and the raw volume format.
//!
//! All surface integrals use the unnormalized measure on the unit sphere
//! (total `4π`).

pub mod error;
pub mod geometry;
pub mod hilbert;
pub mod inversion;
pub mod io;
pub mod phantom;
pub mod xform;

pub use error::{Error, Result};
pub use geometry::{
    fibonacci_sphere, make_frame, sphere_integrate, Direction3, Frame, SphereQuadrature, Vec3,
    VolumeGrid,
};
pub use hilbert::{
    derivative, hilbert_pv_direct, hilbert_pv_direct_at, hilbert_spectral, Profile1D,
};
pub use inversion::{
    calibrate_normalization, grangeat_convert, invert_classical_radon, invert_radon, invert_xray,
    lemma9_diagnostic, Branch, Calibration, CalibrationOptions, Lemma9Diagnostic, Lemma9Report,
    ProfileGrid, RadonBackprojector, RadonDataset, ReconstructionConfig, ReconstructionMetrics,
};
pub use phantom::{Phantom, Primitive, PrimitiveKind};
pub use xform::{
    directional_derivative_xray, line_transform, radon_profile, xray, xray_numeric, RadonProfile,
    XRayDatum,
};
