//! Inversion branches against each other and against the phantom density.

use std::f64::consts::PI;

use tomoinv_core::inversion::{invert_xray_volume, sample_ball};
use tomoinv_core::{
    calibrate_normalization, fibonacci_sphere, grangeat_convert, invert_classical_radon,
    invert_radon, invert_xray, xray, Branch, CalibrationOptions, Direction3, Phantom, Primitive,
    ProfileGrid, RadonBackprojector, RadonDataset, ReconstructionConfig, Vec3, VolumeGrid,
};

fn xray_cfg(nodes: usize) -> ReconstructionConfig {
    ReconstructionConfig::for_branch(fibonacci_sphere(nodes).unwrap(), 1e-4, Branch::Xray).unwrap()
}

#[test]
fn xray_and_classical_branches_agree() {
    let ph = Phantom::unit_gaussian();
    let cfg = xray_cfg(2000);
    let data =
        RadonDataset::from_phantom(&ph, &cfg.quadrature, ProfileGrid::for_phantom(&ph)).unwrap();
    let classical = RadonBackprojector::new(
        &data,
        &ReconstructionConfig::for_branch(cfg.quadrature.clone(), 1e-4, Branch::ClassicalRadon)
            .unwrap(),
    )
    .unwrap();
    for x in sample_ball(2.5, 50, 21) {
        let a = invert_xray(|p, n| xray(&ph, p, n), &cfg, x).unwrap();
        let b = classical.eval(x).unwrap();
        assert!((a - b).abs() < 5e-3, "x={x:?}: {a} vs {b}");
        assert_eq!(
            b,
            invert_classical_radon(&data, &cfg.quadrature, x).unwrap()
        );
    }
}

#[test]
fn xray_branch_is_shift_equivariant() {
    let ph = Phantom::new(vec![
        Primitive::gaussian(Vec3::new(0.2, 0.0, -0.3), 0.8, 1.0).unwrap(),
        Primitive::gaussian(Vec3::new(-0.5, 0.4, 0.1), 0.6, 0.7).unwrap(),
    ]);
    let c = Vec3::new(0.7, -1.1, 0.4);
    let moved = ph.translated(c);
    let cfg = xray_cfg(1500);
    for x in sample_ball(1.5, 20, 22) {
        let a = invert_xray(|p, n| xray(&ph, p, n), &cfg, x).unwrap();
        let b = invert_xray(|p, n| xray(&moved, p, n), &cfg, x + c).unwrap();
        assert!((a - b).abs() < 1e-3);
        assert!((a - ph.eval(x)).abs() < 1e-3);
    }
}

#[test]
fn reconstructions_are_linear_in_the_data() {
    let ph = Phantom::new(vec![Primitive::gaussian(
        Vec3::new(0.3, 0.0, 0.0),
        1.0,
        1.0,
    )
    .unwrap()]);
    let q = fibonacci_sphere(400).unwrap();
    let x = Vec3::new(0.1, 0.5, -0.2);

    let cfg = xray_cfg(400);
    let a = invert_xray(|p, n| xray(&ph, p, n), &cfg, x).unwrap();
    let b = invert_xray(|p, n| 2.0 * xray(&ph, p, n), &cfg, x).unwrap();
    assert!((b - 2.0 * a).abs() < 1e-12);

    let data = RadonDataset::from_phantom(&ph, &q, ProfileGrid::for_phantom(&ph)).unwrap();
    let double = data.scaled(2.0);
    let a = invert_classical_radon(&data, &q, x).unwrap();
    let b = invert_classical_radon(&double, &q, x).unwrap();
    assert!((b - 2.0 * a).abs() < 1e-12);

    let rcfg = ReconstructionConfig::for_branch(q.clone(), 1e-4, Branch::Radon).unwrap();
    let a = invert_radon(&data, &rcfg, x).unwrap();
    let b = invert_radon(&double, &rcfg, x).unwrap();
    assert!((b - 2.0 * a).abs() < 1e-12 * a.abs().max(1.0));
}

#[test]
fn grangeat_refines_toward_the_analytic_derivative() {
    let ph = Phantom::unit_gaussian();
    let n = Direction3::normalize(Vec3::new(0.3, -0.5, 0.8)).unwrap();
    let worst = |nodes: usize, band: f64| {
        let q = fibonacci_sphere(nodes).unwrap();
        (0..=20)
            .map(|k| {
                let s = -2.0 + 0.2 * k as f64;
                let lhs =
                    grangeat_convert(|p, d| xray(&ph, p, d), n.vec() * s, n, band, &q).unwrap();
                // -(d/ds) π e^{-s²}
                (lhs - 2.0 * PI * s * (-s * s).exp()).abs()
            })
            .fold(0.0, f64::max)
    };
    let coarse = worst(8000, 0.05);
    let fine = worst(32000, 0.025);
    assert!(coarse < 5e-2, "{coarse}");
    assert!(fine < coarse, "{fine} vs {coarse}");
}

#[test]
fn calibration_absorbs_data_scaling() {
    let ph = Phantom::unit_gaussian();
    let cfg = xray_cfg(1000);
    let opts = CalibrationOptions::default();
    let c1 = calibrate_normalization(&ph, &cfg, opts).unwrap();
    assert!((c1.normalization / (-1.0 / (4.0 * PI)) - 1.0).abs() < 1e-3);

    let scaled = ph.scaled(2.0);
    let points = sample_ball(3.0, 50, opts.seed);
    let raw = cfg.with_normalization(1.0).unwrap();
    let fit = tomoinv_core::inversion::calibrate_with(
        |x| invert_xray(|p, n| xray(&scaled, p, n), &raw, x),
        |x| ph.eval(x),
        &points,
    )
    .unwrap();
    assert!((fit.normalization - 0.5 * c1.normalization).abs() < 1e-6 * c1.normalization.abs());
    let rec_cfg = cfg.with_normalization(fit.normalization).unwrap();
    for &x in points.iter().take(10) {
        let v = invert_xray(|p, n| xray(&scaled, p, n), &rec_cfg, x).unwrap();
        let w = invert_xray(
            |p, n| xray(&ph, p, n),
            &cfg.with_normalization(c1.normalization).unwrap(),
            x,
        )
        .unwrap();
        assert!((v - w).abs() < 1e-6);
    }
}

#[test]
fn volume_reconstruction_is_deterministic() {
    let ph = Phantom::unit_gaussian();
    let cfg = xray_cfg(300);
    let grid = VolumeGrid::cube(-1.0, 1.0, 7).unwrap();
    let a = invert_xray_volume(|p, n| xray(&ph, p, n), &cfg, &grid).unwrap();
    let b = invert_xray_volume(|p, n| xray(&ph, p, n), &cfg, &grid).unwrap();
    assert_eq!(a.samples(), b.samples());
    for (i, v) in a.samples().iter().enumerate() {
        assert_eq!(
            *v,
            invert_xray(|p, n| xray(&ph, p, n), &cfg, grid.point_at(i)).unwrap()
        );
    }
}
