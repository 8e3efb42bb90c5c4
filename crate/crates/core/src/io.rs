//! On-disk formats.
//!
//! Images are raw little-endian `f32` in row-major order (`<stem>.raw`) with
//! a TOML sidecar (`<stem>.hdr`). Projected objects use the same scheme
//! with four planes in the order `T, phi, dphi_dx, lap_phi`. Previews are
//! binary 16-bit PGM with the linear scaling recorded in the sidecar.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{DetectorImage, ImageKind};
use crate::phantom::ProjectedObject;

pub const DTYPE: &str = "f32le";
pub const OBJECT_FIELDS: [&str; 4] = ["T", "phi", "dphi_dx", "lap_phi"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreviewScale {
    pub file: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageHeader {
    pub width: usize,
    pub height: usize,
    pub pixel_size_um: f64,
    pub kind: String,
    pub dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preview: Option<PreviewScale>,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectHeader {
    pub cols: usize,
    pub rows: usize,
    pub spacing_x_um: f64,
    pub spacing_y_um: f64,
    pub dtype: String,
    pub fields: Vec<String>,
}

pub fn raw_path(stem: &Path) -> PathBuf {
    stem.with_extension("raw")
}

pub fn header_path(stem: &Path) -> PathBuf {
    stem.with_extension("hdr")
}

fn strip_known_extension(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("raw") | Some("hdr") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

fn f32_bytes<'a>(values: impl Iterator<Item = &'a f64>, out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

fn read_f32(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect()
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Format(e.to_string()))
}

/// Writes `<stem>.raw` and `<stem>.hdr`; with `preview`, also `<stem>.pgm`.
/// Returns the written paths.
pub fn write_image(img: &DetectorImage, stem: &Path, preview: bool) -> Result<Vec<PathBuf>> {
    let mut bytes = Vec::with_capacity(img.pixels.len() * 4);
    f32_bytes(img.pixels.iter(), &mut bytes);
    let raw = raw_path(stem);
    fs::write(&raw, &bytes)?;
    let mut written = vec![raw];

    let preview_scale = if preview {
        let pgm = stem.with_extension("pgm");
        let (min, max) = write_pgm16(&img.pixels, &pgm)?;
        let file = pgm
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        written.push(pgm);
        Some(PreviewScale { file, min, max })
    } else {
        None
    };

    let header = ImageHeader {
        width: img.width(),
        height: img.height(),
        pixel_size_um: img.pixel_size * 1e6,
        kind: img.kind.to_string(),
        dtype: DTYPE.into(),
        flat_level: img.flat_level,
        preview: preview_scale,
        provenance: img.provenance.clone(),
    };
    let hdr = header_path(stem);
    fs::write(&hdr, to_toml(&header)?)?;
    written.push(hdr);
    Ok(written)
}

/// Reads an image given its stem, `.raw` or `.hdr` path.
pub fn read_image(path: &Path) -> Result<DetectorImage> {
    let stem = strip_known_extension(path);
    let text = fs::read_to_string(header_path(&stem))?;
    let header: ImageHeader = toml::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    if header.dtype != DTYPE {
        return Err(Error::Format(format!("unsupported dtype `{}`", header.dtype)));
    }
    let bytes = fs::read(raw_path(&stem))?;
    let expected = header.width * header.height * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{} holds {} bytes, header implies {expected}",
            raw_path(&stem).display(),
            bytes.len()
        )));
    }
    let pixels = Array2::from_shape_vec((header.height, header.width), read_f32(&bytes))
        .map_err(|e| Error::Format(e.to_string()))?;
    let kind: ImageKind = header.kind.parse()?;
    Ok(DetectorImage {
        pixels,
        pixel_size: header.pixel_size_um * 1e-6,
        kind,
        flat_level: header.flat_level,
        provenance: header.provenance,
    })
}

/// Binary PGM (maxval 65535, big-endian samples), linearly scaled from
/// `[min, max]` of the finite values. Returns the scaling.
pub fn write_pgm16(pixels: &Array2<f64>, path: &Path) -> Result<(f64, f64)> {
    let (min, max) = pixels
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (min, max) = if min.is_finite() { (min, max) } else { (0.0, 0.0) };
    let span = max - min;
    let (rows, cols) = pixels.dim();
    let mut out = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    out.reserve(rows * cols * 2);
    for &v in pixels.iter() {
        let level = if span > 0.0 && v.is_finite() {
            ((v - min) / span * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok((min, max))
}

/// Planar export of a projected object.
pub fn write_object(obj: &ProjectedObject, stem: &Path) -> Result<Vec<PathBuf>> {
    let planes = [&obj.transmission, &obj.phase, &obj.dphi_dx, &obj.lap_phi];
    let mut bytes = Vec::with_capacity(obj.phase.len() * 16);
    for plane in planes {
        f32_bytes(plane.iter(), &mut bytes);
    }
    let raw = raw_path(stem);
    fs::write(&raw, &bytes)?;
    let (rows, cols) = obj.shape();
    let header = ObjectHeader {
        cols,
        rows,
        spacing_x_um: obj.spacing_x * 1e6,
        spacing_y_um: obj.spacing_y * 1e6,
        dtype: DTYPE.into(),
        fields: OBJECT_FIELDS.iter().map(|s| s.to_string()).collect(),
    };
    let hdr = header_path(stem);
    fs::write(&hdr, to_toml(&header)?)?;
    Ok(vec![raw, hdr])
}

/// Reads a planar object export back (values are `f32`-rounded).
pub fn read_object(path: &Path) -> Result<ProjectedObject> {
    let stem = strip_known_extension(path);
    let header: ObjectHeader = toml::from_str(&fs::read_to_string(header_path(&stem))?)
        .map_err(|e| Error::Format(e.to_string()))?;
    if header.fields != OBJECT_FIELDS {
        return Err(Error::Format(format!("unexpected field order {:?}", header.fields)));
    }
    let bytes = fs::read(raw_path(&stem))?;
    let n = header.rows * header.cols;
    if bytes.len() != 16 * n {
        return Err(Error::Format("object file size does not match header".into()));
    }
    let values = read_f32(&bytes);
    let plane = |i: usize| {
        Array2::from_shape_vec((header.rows, header.cols), values[i * n..(i + 1) * n].to_vec())
            .expect("plane shape")
    };
    Ok(ProjectedObject {
        spacing_x: header.spacing_x_um * 1e-6,
        spacing_y: header.spacing_y_um * 1e-6,
        transmission: plane(0),
        phase: plane(1),
        dphi_dx: plane(2),
        lap_phi: plane(3),
        rim_band: Array2::from_elem((header.rows, header.cols), false),
    })
}

#[derive(Debug, Deserialize)]
struct ProfileRow {
    x_um: f64,
    transmission: f64,
}

/// Reads a `x_um,transmission` profile. Returns `(x [m], transmission)` pairs.
pub fn read_mask_profile(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x_um", "transmission"] {
        return Err(Error::Format(format!(
            "{}: expected header `x_um,transmission`, found `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize::<ProfileRow>()
        .map(|r| r.map(|r| (r.x_um * 1e-6, r.transmission)).map_err(Error::from))
        .collect()
}

/// Writes a CSV with the given header and rows of numbers. Values are
/// written with Rust's shortest round-trip formatting.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    fs::write(path, out)?;
    Ok(())
}
