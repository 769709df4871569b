//! File formats.
//!
//! * X-ray batch CSV: header `x1,x2,x3,n1,n2,n3,value`, one sample per row.
//! * Radon profile CSV: header `n1,n2,n3,s,value`, one grid node per row in
//!   increasing `s`; the direction is repeated on every row.
//! * Volume: raw little-endian `f32` samples, x fastest, plus a TOML sidecar
//!   ([`VolumeMetadata`]).
//!
//! Floats are written with the shortest representation that round-trips, so
//! output is byte-identical for identical input.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Direction3, Vec3, VolumeGrid};
use crate::xform::{RadonProfile, XRayDatum};

pub const XRAY_HEADER: [&str; 7] = ["x1", "x2", "x3", "n1", "n2", "n3", "value"];
pub const PROFILE_HEADER: [&str; 5] = ["n1", "n2", "n3", "s", "value"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    }
}

fn parse_row<const N: usize>(path: &Path, rec: &csv::StringRecord) -> Result<[f64; N]> {
    let line = rec.position().map_or(0, |p| p.line() as usize);
    let err = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    if rec.len() != N {
        return Err(err(format!("expected {N} fields, got {}", rec.len())));
    }
    let mut out = [0.0; N];
    for (dst, field) in out.iter_mut().zip(rec.iter()) {
        *dst = field
            .trim()
            .parse()
            .map_err(|_| err(format!("not a number: `{field}`")))?;
    }
    Ok(out)
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    if got.iter().map(str::trim).ne(want.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected header `{}`", want.join(",")),
        });
    }
    Ok(())
}

pub fn write_xray_csv<W: Write>(out: W, data: &[XRayDatum]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::io("<xray csv>", e.into());
    w.write_record(XRAY_HEADER).map_err(wrap)?;
    for d in data {
        let row = [d.x.x, d.x.y, d.x.z, d.n.u1(), d.n.u2(), d.n.u3(), d.value];
        w.write_record(row.iter().map(f64::to_string))
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<xray csv>", e))
}

pub fn read_xray_csv<R: Read>(input: R, path: &Path) -> Result<Vec<XRayDatum>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(
        path,
        r.headers().map_err(|e| csv_err(path, e))?,
        &XRAY_HEADER,
    )?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let v: [f64; 7] = parse_row(path, &rec)?;
            let n = Direction3::new(v[3], v[4], v[5]).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: rec.position().map_or(0, |p| p.line() as usize),
                msg: e.to_string(),
            })?;
            Ok(XRayDatum {
                x: Vec3::new(v[0], v[1], v[2]),
                n,
                value: v[6],
            })
        })
        .collect()
}

pub fn write_profile_csv<W: Write>(out: W, p: &RadonProfile) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::io("<profile csv>", e.into());
    w.write_record(PROFILE_HEADER).map_err(wrap)?;
    let (n1, n2, n3) = (p.n.u1(), p.n.u2(), p.n.u3());
    for (k, v) in p.values.iter().enumerate() {
        let row = [n1, n2, n3, p.s(k), *v];
        w.write_record(row.iter().map(f64::to_string))
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<profile csv>", e))
}

/// Reads a profile written by [`write_profile_csv`]. The rows must share a
/// direction and lie on a uniform increasing `s` grid.
pub fn read_profile_csv<R: Read>(input: R, path: &Path) -> Result<RadonProfile> {
    let mut r = csv::Reader::from_reader(input);
    check_header(
        path,
        r.headers().map_err(|e| csv_err(path, e))?,
        &PROFILE_HEADER,
    )?;
    let mut dir = None;
    let mut s = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let v: [f64; 5] = parse_row(path, &rec)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        match dir {
            None => dir = Some([v[0], v[1], v[2]]),
            Some(d) if d != [v[0], v[1], v[2]] => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: "direction changes within one profile".into(),
                })
            }
            Some(_) => {}
        }
        s.push(v[3]);
        values.push(v[4]);
    }
    let d = dir.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "profile has no rows".into(),
    })?;
    let n = Direction3::new(d[0], d[1], d[2]).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 2,
        msg: e.to_string(),
    })?;
    let (s_min, s_max) = (s[0], s[s.len() - 1]);
    let profile = RadonProfile::new(n, s_min, s_max, values).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 2,
        msg: e.to_string(),
    })?;
    let tol = 1e-9 * profile.spacing();
    if let Some(k) = s
        .iter()
        .enumerate()
        .position(|(k, &sk)| (sk - profile.s(k)).abs() > tol)
    {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: k + 2,
            msg: "s values are not on a uniform grid".into(),
        });
    }
    Ok(profile)
}

/// Sidecar describing a raw volume file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeMetadata {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub branch: String,
    pub normalization: f64,
    pub quadrature_count: usize,
    pub diff_step: f64,
    pub sample_format: String,
    pub order: String,
}

impl VolumeMetadata {
    pub const SAMPLE_FORMAT: &'static str = "f32-le";
    pub const ORDER: &'static str = "x-fastest";

    pub fn new(
        grid: &VolumeGrid,
        branch: &str,
        normalization: f64,
        quadrature_count: usize,
        diff_step: f64,
    ) -> Self {
        VolumeMetadata {
            dims: grid.dims(),
            spacing: grid.spacing(),
            origin: grid.origin().to_array(),
            branch: branch.to_owned(),
            normalization,
            quadrature_count,
            diff_step,
            sample_format: Self::SAMPLE_FORMAT.into(),
            order: Self::ORDER.into(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Metadata(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let meta: VolumeMetadata =
            toml::from_str(text).map_err(|e| Error::Metadata(e.to_string()))?;
        if meta.sample_format != Self::SAMPLE_FORMAT || meta.order != Self::ORDER {
            return Err(Error::Metadata(format!(
                "unsupported layout {} / {}",
                meta.sample_format, meta.order
            )));
        }
        Ok(meta)
    }
}

pub fn encode_volume(grid: &VolumeGrid) -> Vec<u8> {
    grid.samples()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect()
}

pub fn decode_volume(bytes: &[u8], meta: &VolumeMetadata) -> Result<VolumeGrid> {
    let expected = meta.dims.iter().product::<usize>() * 4;
    if bytes.len() != expected {
        return Err(Error::Metadata(format!(
            "raw file has {} bytes, dims {:?} need {expected}",
            bytes.len(),
            meta.dims
        )));
    }
    let samples = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    VolumeGrid::from_samples(
        Vec3::from_array(meta.origin),
        meta.spacing,
        meta.dims,
        samples,
    )
}

pub fn write_volume(
    raw: &Path,
    sidecar: &Path,
    grid: &VolumeGrid,
    meta: &VolumeMetadata,
) -> Result<()> {
    let mut f = BufWriter::new(File::create(raw).map_err(|e| Error::io(raw, e))?);
    f.write_all(&encode_volume(grid))
        .map_err(|e| Error::io(raw, e))?;
    f.flush().map_err(|e| Error::io(raw, e))?;
    std::fs::write(sidecar, meta.to_toml()?).map_err(|e| Error::io(sidecar, e))
}

pub fn read_volume(raw: &Path, sidecar: &Path) -> Result<(VolumeGrid, VolumeMetadata)> {
    let text = std::fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
    let meta = VolumeMetadata::from_toml(&text)?;
    let mut bytes = Vec::new();
    BufReader::new(File::open(raw).map_err(|e| Error::io(raw, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(raw, e))?;
    Ok((decode_volume(&bytes, &meta)?, meta))
}
