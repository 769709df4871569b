use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tomoinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomoinv"))
        .args(args)
        .output()
        .expect("spawn tomoinv")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn preset(dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(format!("{name}.txt"));
    ok(&tomoinv(&[
        "phantom-gen",
        "--preset",
        name,
        "--out",
        path.to_str().unwrap(),
    ]));
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn phantom_gen_presets_parse_back() {
    let dir = TempDir::new().unwrap();
    for name in ["unit-gaussian", "two-gaussians", "unit-ball", "empty"] {
        let path = preset(dir.path(), name);
        tomoinv_core::Phantom::from_file(&path).unwrap();
    }
    let bad = tomoinv(&[
        "phantom-gen",
        "--preset",
        "cube",
        "--out",
        s(&dir.path().join("x")),
    ]);
    assert!(!bad.status.success());
}

#[test]
fn forward_radon_writes_one_profile_per_node() {
    let dir = TempDir::new().unwrap();
    let ph = preset(dir.path(), "unit-gaussian");
    let out = dir.path().join("fwd");
    ok(&tomoinv(&[
        "forward",
        "--phantom",
        s(&ph),
        "--branch",
        "radon",
        "--nodes",
        "200",
        "--out-dir",
        s(&out),
    ]));
    let profiles = fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("profile_")
        })
        .count();
    assert_eq!(profiles, 200);
    assert_eq!(csv_rows(&out.join("manifest.csv")).len(), 200);
}

#[test]
fn forward_of_empty_phantom_is_zero() {
    let dir = TempDir::new().unwrap();
    let ph = preset(dir.path(), "empty");
    let out = dir.path().join("fwd");
    ok(&tomoinv(&[
        "forward",
        "--phantom",
        s(&ph),
        "--branch",
        "radon",
        "--nodes",
        "20",
        "--out-dir",
        s(&out),
    ]));
    for k in 0..20 {
        for row in csv_rows(&out.join(format!("profile_{k:05}.csv"))) {
            assert_eq!(row[4].parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn forward_is_byte_identical_across_reruns() {
    let dir = TempDir::new().unwrap();
    let ph = preset(dir.path(), "two-gaussians");
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&tomoinv(&[
            "forward",
            "--phantom",
            s(&ph),
            "--nodes",
            "100",
            "--eval-points",
            "10",
            "--seed",
            "42",
            "--out-dir",
            s(&out),
        ]));
        fs::read(out.join("xray.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 10 * 100);
}

#[test]
fn invert_zero_phantom_reports_undefined_error() {
    let dir = TempDir::new().unwrap();
    let ph = preset(dir.path(), "empty");
    let out = dir.path().join("inv");
    ok(&tomoinv(&[
        "invert",
        "--phantom",
        s(&ph),
        "--nodes",
        "50",
        "--grid-count",
        "5",
        "--out-dir",
        s(&out),
    ]));
    let row = &csv_rows(&out.join("metrics.csv"))[0];
    assert_eq!(row[0], "xray");
    assert_eq!(row[1], "undefined");
    assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[4], "undefined");
    let raw = fs::read(out.join("volume.raw")).unwrap();
    assert_eq!(raw.len(), 5 * 5 * 5 * 4);
    assert!(raw
        .chunks_exact(4)
        .all(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) == 0.0));
}

#[test]
fn invert_from_forward_data_matches_analytic_mode() {
    let dir = TempDir::new().unwrap();
    let ph = preset(dir.path(), "unit-gaussian");
    let fwd = dir.path().join("fwd");
    let common = [
        "--phantom",
        s(&ph),
        "--branch",
        "classical_radon",
        "--nodes",
        "300",
        "--grid-count",
        "9",
    ];
    ok(&tomoinv(
        &[&["forward"], &common[..], &["--out-dir", s(&fwd)]].concat(),
    ));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&tomoinv(
        &[
            &["invert"],
            &common[..],
            &["--out-dir", s(&a), "--data-dir", s(&fwd)],
        ]
        .concat(),
    ));
    ok(&tomoinv(
        &[&["invert"], &common[..], &["--out-dir", s(&b)]].concat(),
    ));
    assert_eq!(
        fs::read(a.join("volume.raw")).unwrap(),
        fs::read(b.join("volume.raw")).unwrap()
    );
}

#[test]
fn invert_rejects_missing_data_dir() {
    let dir = TempDir::new().unwrap();
    let ph = preset(dir.path(), "unit-gaussian");
    let out = dir.path().join("inv");
    let res = tomoinv(&[
        "invert",
        "--phantom",
        s(&ph),
        "--branch",
        "radon",
        "--data-dir",
        s(&dir.path().join("nope")),
        "--out-dir",
        s(&out),
    ]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("data_dir"), "{}", stderr(&res));
    assert!(!out.join("volume.raw").exists());
}

#[test]
fn missing_phantom_fails_and_names_it() {
    let dir = TempDir::new().unwrap();
    let res = tomoinv(&[
        "forward",
        "--phantom",
        s(&dir.path().join("absent.txt")),
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("phantom"), "{}", stderr(&res));
    let res = tomoinv(&["forward", "--out-dir", s(dir.path())]);
    assert!(stderr(&res).contains("phantom"), "{}", stderr(&res));
}

#[test]
fn forward_failure_removes_partial_outputs() {
    let dir = TempDir::new().unwrap();
    let ph = preset(dir.path(), "unit-gaussian");
    let out = dir.path().join("fwd");
    fs::create_dir_all(out.join("profile_00003.csv")).unwrap();
    let res = tomoinv(&[
        "forward",
        "--phantom",
        s(&ph),
        "--branch",
        "radon",
        "--nodes",
        "10",
        "--out-dir",
        s(&out),
    ]);
    assert!(!res.status.success());
    for k in 0..3 {
        assert!(!out.join(format!("profile_{k:05}.csv")).exists());
    }
    assert!(!out.join("manifest.csv").exists());
}

#[test]
fn check_rejects_ball_phantom() {
    let dir = TempDir::new().unwrap();
    let ph = preset(dir.path(), "unit-ball");
    let res = tomoinv(&[
        "check",
        "--phantom",
        s(&ph),
        "--nodes",
        "8000",
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("ball"), "{}", stderr(&res));
}

#[test]
fn check_rejects_undersampled_band() {
    let dir = TempDir::new().unwrap();
    let ph = preset(dir.path(), "unit-gaussian");
    let res = tomoinv(&[
        "check",
        "--phantom",
        s(&ph),
        "--nodes",
        "500",
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("band"), "{}", stderr(&res));
}

#[test]
fn check_sweep_and_report() {
    let dir = TempDir::new().unwrap();
    let ph = preset(dir.path(), "unit-gaussian");
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&tomoinv(&[
            "check",
            "--phantom",
            s(&ph),
            "--nodes",
            "8000",
            "--eval-points",
            "20",
            "--out-dir",
            s(&out),
        ]));
        out
    };
    let a = run("a");
    let rows = csv_rows(&a.join("grangeat.csv"));
    assert_eq!(rows.len(), 41);
    let num = |v: &str| v.parse::<f64>().unwrap();
    let worst = rows.iter().map(|r| num(&r[3])).fold(0.0, f64::max);
    assert!(worst <= 5e-2, "{worst}");
    let mid = &rows[20];
    assert_eq!(num(&mid[0]), 0.0);
    assert!(num(&mid[1]).abs() <= 1e-2 && num(&mid[2]).abs() <= 1e-2);
    assert_eq!(csv_rows(&a.join("lemma9.csv")).len(), 21);

    let b = run("b");
    for f in ["grangeat.csv", "lemma9.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let ph = preset(dir.path(), "unit-gaussian");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "phantom = {:?}\nbranch = \"classical_radon\"\nnodes = 400\nout_dir = {:?}\n",
            s(&ph),
            s(&dir.path().join("from_file"))
        ),
    )
    .unwrap();
    let out = dir.path().join("from_flag");
    ok(&tomoinv(&[
        "calibrate",
        "--config",
        s(&cfg),
        "--out-dir",
        s(&out),
    ]));
    let row = &csv_rows(&out.join("calibration.csv"))[0];
    assert_eq!(row[0], "classical_radon");
    let c: f64 = row[1].parse().unwrap();
    assert!((c - 1.0).abs() < 1e-2, "{c}");
    assert!(!dir.path().join("from_file").exists());

    fs::write(&cfg, "phantom = \"x\"\nbogus = 1\n").unwrap();
    let res = tomoinv(&["calibrate", "--config", s(&cfg)]);
    assert!(!res.status.success());
    assert!(stderr(&res).contains("bogus"), "{}", stderr(&res));
}

#[test]
fn calibrate_reports_ratio_to_literature_constant() {
    let dir = TempDir::new().unwrap();
    let ph = preset(dir.path(), "unit-gaussian");
    let out = dir.path().join("cal");
    ok(&tomoinv(&[
        "calibrate",
        "--phantom",
        s(&ph),
        "--nodes",
        "1000",
        "--diff-step",
        "1e-4",
        "--out-dir",
        s(&out),
    ]));
    let row = &csv_rows(&out.join("calibration.csv"))[0];
    let num = |k: usize| row[k].parse::<f64>().unwrap();
    assert!((num(4) - 1.0).abs() < 1e-3);
    let pi = std::f64::consts::PI;
    assert!((num(5) - num(1) * 2.0 * pi.powi(3)).abs() < 1e-9);
}
