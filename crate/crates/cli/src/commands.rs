//! Subcommand implementations. Each one computes everything first and then
//! writes its files; if writing fails midway the files already written are
//! removed again.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use tomoinv_core::geometry::{Direction3, Vec3};
use tomoinv_core::inversion::{
    calibrate_normalization, calibrate_with, grangeat_convert, invert_xray_volume, sample_ball,
    Branch, Calibration, CalibrationOptions, Lemma9Diagnostic, RadonBackprojector, RadonDataset,
    ReconstructionConfig, ReconstructionMetrics, INV_TWO_PI_CUBED,
};
use tomoinv_core::io::{read_profile_csv, write_profile_csv, write_xray_csv, VolumeMetadata};
use tomoinv_core::xform::{xray, XRayDatum};
use tomoinv_core::{Error, Phantom, Primitive, VolumeGrid};

use crate::config::RunConfig;

pub const XRAY_FILE: &str = "xray.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const VOLUME_RAW: &str = "volume.raw";
pub const VOLUME_META: &str = "volume.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const GRANGEAT_FILE: &str = "grangeat.csv";
pub const LEMMA9_FILE: &str = "lemma9.csv";
pub const CALIBRATION_FILE: &str = "calibration.csv";

/// Largest tolerated `|lhs - rhs|` in the Grangeat sweep.
pub const GRANGEAT_TOLERANCE: f64 = 5e-2;
pub const GRANGEAT_SWEEP: (f64, f64, usize) = (-2.0, 2.0, 41);

/// Written in place of a metric that has no value (zero reference density).
pub const UNDEFINED: &str = "undefined";

pub fn profile_file(k: usize) -> String {
    format!("profile_{k:05}.csv")
}

/// Files written by one command; removed on drop unless committed.
struct Outputs {
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Outputs> {
        fs::create_dir_all(dir)
            .with_context(|| format!("out_dir: cannot create {}", dir.display()))?;
        Ok(Outputs {
            written: Vec::new(),
            committed: false,
        })
    }

    fn create(&mut self, path: PathBuf) -> Result<BufWriter<File>> {
        let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    fn text(&mut self, path: PathBuf, body: &str) -> Result<()> {
        let mut w = self.create(path)?;
        w.write_all(body.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn reconstruction_config(cfg: &RunConfig) -> Result<ReconstructionConfig> {
    Ok(ReconstructionConfig::new(
        cfg.quadrature.clone(),
        cfg.diff_step,
        cfg.normalization,
        cfg.branch,
    )?)
}

/// Radius of the ball the random evaluation points are drawn from.
fn eval_radius(ph: &Phantom) -> f64 {
    0.5 * ph.support_radius().max(1.0)
}

fn eval_points(cfg: &RunConfig) -> Vec<Vec3> {
    sample_ball(eval_radius(&cfg.phantom), cfg.eval_points, cfg.seed)
}

/// `forward`: X-ray samples at random points along every node direction,
/// or one Radon profile per node plus a manifest.
pub fn forward(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ph = &cfg.phantom;
    match cfg.branch {
        Branch::Xray => {
            let rows: Vec<XRayDatum> = eval_points(cfg)
                .into_iter()
                .flat_map(|x| {
                    cfg.quadrature.nodes().iter().map(move |&n| XRayDatum {
                        x,
                        n,
                        value: xray(ph, x, n),
                    })
                })
                .collect();
            let mut out = Outputs::new(&cfg.out_dir)?;
            let mut w = out.create(cfg.out(XRAY_FILE))?;
            write_xray_csv(&mut w, &rows)?;
            w.flush()?;
            drop(w);
            Ok(out.commit())
        }
        Branch::Radon | Branch::ClassicalRadon => {
            let data = RadonDataset::from_phantom(ph, &cfg.quadrature, cfg.profile_grid)?;
            let mut out = Outputs::new(&cfg.out_dir)?;
            let mut manifest = String::from("index,file,n1,n2,n3,weight\n");
            for (k, (p, w)) in data
                .profiles()
                .iter()
                .zip(cfg.quadrature.weights())
                .enumerate()
            {
                let name = profile_file(k);
                let mut f = out.create(cfg.out(&name))?;
                write_profile_csv(&mut f, p)?;
                f.flush()?;
                writeln!(
                    manifest,
                    "{k},{name},{},{},{},{w}",
                    p.n.u1(),
                    p.n.u2(),
                    p.n.u3()
                )?;
            }
            out.text(cfg.out(MANIFEST_FILE), &manifest)?;
            Ok(out.commit())
        }
    }
}

/// Reads the profiles listed in `dir/manifest.csv`.
pub fn load_radon_dataset(dir: &Path) -> Result<RadonDataset> {
    let manifest = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest)
        .with_context(|| format!("data_dir: cannot read {}", manifest.display()))?;
    let mut lines = text.lines();
    ensure!(
        lines.next() == Some("index,file,n1,n2,n3,weight"),
        "data_dir: {} has an unexpected header",
        manifest.display()
    );
    let mut profiles = Vec::new();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        ensure!(
            fields.len() == 6 && fields[0] == k.to_string(),
            "data_dir: malformed manifest row {}: `{line}`",
            k + 2
        );
        let path = dir.join(fields[1]);
        let f = File::open(&path)
            .with_context(|| format!("data_dir: cannot open {}", path.display()))?;
        profiles.push(read_profile_csv(BufReader::new(f), &path)?);
    }
    ensure!(!profiles.is_empty(), "data_dir: manifest lists no profiles");
    Ok(RadonDataset::new(profiles)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_owned(), |v| v.to_string())
}

/// Calibration, or `None` when the raw inversion vanishes identically.
fn degenerate_ok(r: tomoinv_core::Result<Calibration>) -> Result<Option<Calibration>> {
    match r {
        Ok(c) => Ok(Some(c)),
        Err(Error::DegenerateCalibration) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Reconstructed volume and its fitted normalization.
pub struct Inversion {
    pub volume: VolumeGrid,
    pub metrics: ReconstructionMetrics,
    pub calibration: Option<Calibration>,
}

pub fn reconstruct(cfg: &RunConfig) -> Result<Inversion> {
    let ph = &cfg.phantom;
    let rcfg = reconstruction_config(cfg)?;
    let opts = CalibrationOptions {
        points: cfg.eval_points,
        radius: Some(eval_radius(ph)),
        seed: cfg.seed,
    };
    let (volume, calibration) = match cfg.branch {
        Branch::Xray => {
            if cfg.data_dir.is_some() {
                bail!(
                    "data_dir: the xray branch needs divergent-beam data at every voxel and \
                     runs in analytic mode only; drop data_dir"
                );
            }
            let volume = invert_xray_volume(|x, n| xray(ph, x, n), &rcfg, &cfg.grid)?;
            (
                volume,
                degenerate_ok(calibrate_normalization(ph, &rcfg, opts))?,
            )
        }
        Branch::Radon | Branch::ClassicalRadon => {
            let data = match &cfg.data_dir {
                Some(dir) => load_radon_dataset(dir)?,
                None => RadonDataset::from_phantom(ph, &cfg.quadrature, cfg.profile_grid)?,
            };
            let volume = RadonBackprojector::new(&data, &rcfg)?.eval_volume(&cfg.grid)?;
            let raw = RadonBackprojector::new(&data, &rcfg.with_normalization(1.0)?)?;
            let points = sample_ball(eval_radius(ph), opts.points, opts.seed);
            let cal = calibrate_with(|x| raw.eval(x), |x| ph.eval(x), &points);
            (volume, degenerate_ok(cal)?)
        }
    };
    let metrics = ReconstructionMetrics::compute(&volume, ph);
    Ok(Inversion {
        volume,
        metrics,
        calibration,
    })
}

/// `invert`: volume, sidecar and a one-row metrics CSV.
pub fn invert(cfg: &RunConfig) -> Result<(Inversion, Vec<PathBuf>)> {
    let inv = reconstruct(cfg)?;
    let meta = VolumeMetadata::new(
        &inv.volume,
        cfg.branch.name(),
        cfg.normalization,
        cfg.quadrature.len(),
        cfg.diff_step,
    );
    let m = &inv.metrics;
    let metrics = format!(
        "branch,rel_l2,max_err,voxels,fitted_normalization,calibration_residual\n{},{},{},{},{},{}\n",
        cfg.branch.name(),
        fmt_opt(m.rel_l2),
        m.max_error,
        m.voxels,
        fmt_opt(inv.calibration.map(|c| c.normalization)),
        fmt_opt(inv.calibration.map(|c| c.residual)),
    );

    let mut out = Outputs::new(&cfg.out_dir)?;
    let mut raw = out.create(cfg.out(VOLUME_RAW))?;
    raw.write_all(&tomoinv_core::io::encode_volume(&inv.volume))?;
    raw.flush()?;
    drop(raw);
    out.text(cfg.out(VOLUME_META), &meta.to_toml()?)?;
    out.text(cfg.out(METRICS_FILE), &metrics)?;
    Ok((inv, out.commit()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrangeatRow {
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl GrangeatRow {
    pub fn abs_err(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Grangeat sweep along `n = e₁`: estimate at `x = s n` against the
/// analytic `-(Rf)'(n, s)`.
pub fn grangeat_sweep(cfg: &RunConfig) -> Result<Vec<GrangeatRow>> {
    let ph = &cfg.phantom;
    let n = Direction3::X;
    let (lo, hi, count) = GRANGEAT_SWEEP;
    (0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            let s = (1.0 - t) * lo + t * hi;
            let lhs = grangeat_convert(
                |p, d| xray(ph, p, d),
                n.vec() * s,
                n,
                cfg.band,
                &cfg.quadrature,
            )?;
            Ok(GrangeatRow {
                s,
                lhs,
                rhs: -ph.plane_integral_derivative(n, s),
            })
        })
        .collect()
}

/// `check`: Grangeat sweep and the `lemma9` balance report. The files are kept even when
/// the sweep exceeds [`GRANGEAT_TOLERANCE`]; the error is returned after.
pub fn check(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ph = &cfg.phantom;
    ensure!(
        ph.is_smooth(),
        "phantom: check needs a smooth (gaussian-only) phantom; {} contains a ball",
        cfg.phantom_path.display()
    );
    let sweep = grangeat_sweep(cfg)?;
    let diag = Lemma9Diagnostic::new(ph, &cfg.quadrature, cfg.profile_grid)?;
    let mut points = vec![Vec3::ZERO];
    points.extend(eval_points(cfg));
    let reports = points
        .iter()
        .map(|&x| diag.evaluate(x))
        .collect::<tomoinv_core::Result<Vec<_>>>()?;

    let mut g = String::from("s,lhs,rhs,abs_err\n");
    for r in &sweep {
        writeln!(g, "{},{},{},{}", r.s, r.lhs, r.rhs, r.abs_err())?;
    }
    let mut l = String::from("x1,x2,x3,lhs,rhs,ratio,difference\n");
    for r in &reports {
        writeln!(
            l,
            "{},{},{},{},{},{},{}",
            r.x.x, r.x.y, r.x.z, r.lhs, r.rhs, r.ratio, r.difference
        )?;
    }
    let mut out = Outputs::new(&cfg.out_dir)?;
    out.text(cfg.out(GRANGEAT_FILE), &g)?;
    out.text(cfg.out(LEMMA9_FILE), &l)?;
    let files = out.commit();

    let worst = sweep.iter().map(GrangeatRow::abs_err).fold(0.0, f64::max);
    ensure!(
        worst <= GRANGEAT_TOLERANCE,
        "grangeat: max |lhs - rhs| = {worst:.3e} exceeds {GRANGEAT_TOLERANCE:e}; \
         raise nodes or band (nodes={}, band={})",
        cfg.quadrature.len(),
        cfg.band
    );
    Ok(files)
}

/// `calibrate`: fitted normalization and its ratios to the derived
/// constant and to `1/(2π³)`.
pub fn calibrate(cfg: &RunConfig) -> Result<(Calibration, Vec<PathBuf>)> {
    let rcfg = reconstruction_config(cfg)?;
    let opts = CalibrationOptions {
        points: cfg.eval_points,
        radius: Some(eval_radius(&cfg.phantom)),
        seed: cfg.seed,
    };
    let cal = calibrate_normalization(&cfg.phantom, &rcfg, opts)
        .context("calibration: the raw inversion of this phantom vanishes")?;
    let body = format!(
        "branch,normalization,residual,points,ratio_to_derived,ratio_to_inv_two_pi_cubed\n{},{},{},{},{},{}\n",
        cfg.branch.name(),
        cal.normalization,
        cal.residual,
        cal.points,
        cal.normalization / cfg.branch.default_normalization(),
        cal.normalization / INV_TWO_PI_CUBED,
    );
    let mut out = Outputs::new(&cfg.out_dir)?;
    out.text(cfg.out(CALIBRATION_FILE), &body)?;
    Ok((cal, out.commit()))
}

pub const PRESETS: [&str; 4] = ["unit-gaussian", "two-gaussians", "unit-ball", "empty"];

pub fn preset(name: &str) -> Result<Phantom> {
    Ok(match name {
        "unit-gaussian" => Phantom::unit_gaussian(),
        "two-gaussians" => Phantom::new(vec![
            Primitive::gaussian(Vec3::new(1.0, 0.0, 0.0), 1.0, 1.0)?,
            Primitive::gaussian(Vec3::new(-1.0, 0.0, 0.0), 1.0, 1.0)?,
        ]),
        "unit-ball" => Phantom::unit_ball(),
        "empty" => Phantom::empty(),
        other => bail!("preset: `{other}` is not one of {}", PRESETS.join(", ")),
    })
}

/// `phantom-gen`: writes a preset in the phantom file grammar.
pub fn phantom_gen(name: &str, path: &Path) -> Result<()> {
    let ph = preset(name)?;
    fs::write(path, ph.to_text()).with_context(|| format!("cannot write {}", path.display()))
}
