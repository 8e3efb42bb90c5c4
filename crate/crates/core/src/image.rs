use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageKind {
    RawPb,
    RawSm,
    FlatField,
    Corrected,
    RetrievedPb,
    RetrievedDpc,
    Diagnostic,
}

impl ImageKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImageKind::RawPb => "raw_pb",
            ImageKind::RawSm => "raw_sm",
            ImageKind::FlatField => "flat_field",
            ImageKind::Corrected => "corrected",
            ImageKind::RetrievedPb => "retrieved_pb",
            ImageKind::RetrievedDpc => "retrieved_dpc",
            ImageKind::Diagnostic => "diagnostic",
        }
    }

    pub fn is_raw(&self) -> bool {
        matches!(self, ImageKind::RawPb | ImageKind::RawSm | ImageKind::FlatField)
    }
}

impl fmt::Display for ImageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ImageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "raw_pb" => ImageKind::RawPb,
            "raw_sm" => ImageKind::RawSm,
            "flat_field" => ImageKind::FlatField,
            "corrected" => ImageKind::Corrected,
            "retrieved_pb" => ImageKind::RetrievedPb,
            "retrieved_dpc" => ImageKind::RetrievedDpc,
            "diagnostic" => ImageKind::Diagnostic,
            other => return Err(Error::Format(format!("unknown image kind `{other}`"))),
        })
    }
}

/// Pixel image `[row, column]` with acquisition metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorImage {
    pub pixels: Array2<f64>,
    pub pixel_size: f64,
    pub kind: ImageKind,
    /// Intensity an object-free pixel would record, when known (`w_e` for
    /// single-mask images, 1 for propagation-based ones).
    pub flat_level: Option<f64>,
    pub provenance: BTreeMap<String, String>,
}

impl DetectorImage {
    pub fn new(pixels: Array2<f64>, pixel_size: f64, kind: ImageKind) -> Self {
        Self {
            pixels,
            pixel_size,
            kind,
            flat_level: None,
            provenance: BTreeMap::new(),
        }
    }

    pub fn with_flat_level(mut self, level: f64) -> Self {
        self.flat_level = Some(level);
        self
    }

    pub fn with_note(mut self, key: &str, value: impl ToString) -> Self {
        self.provenance.insert(key.to_string(), value.to_string());
        self
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    /// Column means over all rows.
    pub fn row_average(&self) -> Vec<f64> {
        let h = self.height().max(1) as f64;
        self.pixels
            .columns()
            .into_iter()
            .map(|c| c.sum() / h)
            .collect()
    }
}
