//! Single-shot separation of a flat-field-corrected single-mask image into
//! propagation-based and differential-phase images by neighbour-pair sums
//! and differences.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::parity_sign;
use crate::image::{DetectorImage, ImageKind};
use crate::mask::MaskParameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// Pairs `(n, n+1)` for every `n`; `width - 1` output columns.
    #[default]
    Sliding,
    /// Pairs `(2i, 2i+1)`; `width / 2` output columns.
    Disjoint,
}

impl Pairing {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pairing::Sliding => "sliding",
            Pairing::Disjoint => "disjoint",
        }
    }

    /// Left input column of output column `j`.
    pub fn left_column(&self, j: usize) -> usize {
        match self {
            Pairing::Sliding => j,
            Pairing::Disjoint => 2 * j,
        }
    }

    pub fn output_width(&self, width: usize) -> usize {
        match self {
            Pairing::Sliding => width.saturating_sub(1),
            Pairing::Disjoint => width / 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetrievalResult {
    /// `T (1 - L)` estimate.
    pub pb: DetectorImage,
    /// `D = (z/k) ∂xφ` estimate, metres.
    pub dpc: DetectorImage,
    /// False where a pair sum was not positive; `pb` and `dpc` are 0 there.
    pub valid: Array2<bool>,
    pub pairing: Pairing,
    pub mask_params: MaskParameters,
}

impl RetrievalResult {
    /// Refraction angle `D / z`, radians.
    pub fn refraction_angle(&self, z: f64) -> DetectorImage {
        let mut img = self.dpc.clone();
        img.pixels.mapv_inplace(|d| d / z);
        img.with_note("quantity", "refraction_angle_rad")
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

/// Pointwise ratio `raw / flat`.
pub fn flat_field_correct(raw: &DetectorImage, flat: &DetectorImage) -> Result<DetectorImage> {
    if raw.pixels.dim() != flat.pixels.dim() {
        return Err(Error::Dimensions(format!(
            "raw image {:?} vs flat field {:?}",
            raw.pixels.dim(),
            flat.pixels.dim()
        )));
    }
    if let Some(((row, col), &value)) = flat
        .pixels
        .indexed_iter()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(Error::NonPositiveFlat { row, col, value });
    }
    let mut out = DetectorImage::new(&raw.pixels / &flat.pixels, raw.pixel_size, ImageKind::Corrected)
        .with_flat_level(1.0);
    out.provenance = raw.provenance.clone();
    Ok(out)
}

/// Pair retrieval:
/// `pb = (Ī_n + Ī_{n+1}) / 2`,
/// `dpc = (-1)^n (w_e/α) (Ī_{n+1} - Ī_n) / (Ī_n + Ī_{n+1})`,
/// with `n` counted from `parity_origin`. The difference is taken in this
/// order so that `dpc` inverts `Ī_n = T(1 - L) - (-1)^n (α/w_e) T D`.
pub fn retrieve(
    corrected: &DetectorImage,
    mask_params: &MaskParameters,
    pairing: Pairing,
    parity_origin: i64,
) -> Result<RetrievalResult> {
    if mask_params.alpha == 0.0 {
        return Err(Error::ZeroContrast);
    }
    let (rows, width) = corrected.pixels.dim();
    if width < 2 {
        return Err(Error::Dimensions(format!("need at least 2 columns, got {width}")));
    }
    let out_w = pairing.output_width(width);
    let scale = mask_params.w_e / mask_params.alpha;
    let mut pb = Array2::zeros((rows, out_w));
    let mut dpc = Array2::zeros((rows, out_w));
    let mut valid = Array2::from_elem((rows, out_w), true);
    Zip::indexed(&mut pb)
        .and(&mut dpc)
        .and(&mut valid)
        .for_each(|(r, j), pb, dpc, ok| {
            let n = pairing.left_column(j);
            let a = corrected.pixels[[r, n]];
            let b = corrected.pixels[[r, n + 1]];
            let sum = a + b;
            if sum > 0.0 && sum.is_finite() {
                *pb = 0.5 * sum;
                *dpc = parity_sign(n, parity_origin) * scale * (b - a) / sum;
            } else {
                *ok = false;
            }
        });
    let pixel_size = corrected.pixel_size * if pairing == Pairing::Disjoint { 2.0 } else { 1.0 };
    let tag = |img: DetectorImage| {
        img.with_note("pairing", pairing.as_str())
            .with_note("parity_origin", parity_origin)
            .with_note("w_e_m", mask_params.w_e)
            .with_note("alpha", mask_params.alpha)
    };
    Ok(RetrievalResult {
        pb: tag(DetectorImage::new(pb, pixel_size, ImageKind::RetrievedPb).with_flat_level(1.0)),
        dpc: tag(DetectorImage::new(dpc, pixel_size, ImageKind::RetrievedDpc)),
        valid,
        pairing,
        mask_params: *mask_params,
    })
}

/// `|I_n - (I_{n-1} + I_{n+1}) / 2|` on interior columns; border columns are 0.
pub fn fringe_amplitude_map(corrected: &DetectorImage) -> Result<DetectorImage> {
    let (rows, width) = corrected.pixels.dim();
    if width < 3 {
        return Err(Error::Dimensions(format!("need at least 3 columns, got {width}")));
    }
    let p = &corrected.pixels;
    let mut out = Array2::zeros((rows, width));
    for r in 0..rows {
        for n in 1..width - 1 {
            out[[r, n]] = (p[[r, n]] - 0.5 * (p[[r, n - 1]] + p[[r, n + 1]])).abs();
        }
    }
    Ok(DetectorImage::new(out, corrected.pixel_size, ImageKind::Diagnostic)
        .with_note("quantity", "fringe_amplitude"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn img(pixels: Array2<f64>) -> DetectorImage {
        DetectorImage::new(pixels, 27.5e-6, ImageKind::Corrected)
    }

    #[test]
    fn raw_equals_flat_gives_ones() {
        let flat = DetectorImage::new(Array2::from_elem((2, 4), 4.0e-6), 1e-5, ImageKind::FlatField);
        let c = flat_field_correct(&flat, &flat).unwrap();
        assert!(c.pixels.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn nonpositive_flat_reports_coordinates() {
        let mut f = Array2::from_elem((3, 3), 1.0);
        f[[2, 1]] = 0.0;
        let flat = DetectorImage::new(f, 1e-5, ImageKind::FlatField);
        let raw = flat.clone();
        match flat_field_correct(&raw, &flat) {
            Err(Error::NonPositiveFlat { row: 2, col: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mismatched_dims_rejected() {
        let a = img(Array2::ones((2, 4)));
        let b = img(Array2::ones((2, 5)));
        assert!(matches!(flat_field_correct(&a, &b), Err(Error::Dimensions(_))));
    }

    #[test]
    fn ones_give_unit_pb_zero_dpc() {
        let p = MaskParameters::new(13.75e-6, 1.0).unwrap();
        let r = retrieve(&img(Array2::ones((3, 8))), &p, Pairing::Sliding, 0).unwrap();
        assert_eq!(r.pb.width(), 7);
        assert!(r.pb.pixels.iter().all(|v| *v == 1.0));
        assert!(r.dpc.pixels.iter().all(|v| *v == 0.0));
        let d = retrieve(&img(Array2::ones((3, 8))), &p, Pairing::Disjoint, 0).unwrap();
        assert_eq!(d.pb.width(), 4);
    }

    #[test]
    fn alternation_recovers_epsilon() {
        let eps = 0.03;
        let p = MaskParameters::new(4.06e-6, 1.0).unwrap();
        let c = Array2::from_shape_fn((1, 6), |(_, n)| if n % 2 == 0 { 1.0 - eps } else { 1.0 + eps });
        let r = retrieve(&img(c), &p, Pairing::Sliding, 0).unwrap();
        for j in 0..5 {
            assert_relative_eq!(r.pb.pixels[[0, j]], 1.0, epsilon = 1e-15);
            // Ī_0 = 1 - ε means D = (w_e/α) ε on every pair.
            assert_relative_eq!(r.dpc.pixels[[0, j]], 4.06e-6 * eps, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_alpha_rejected() {
        let p = MaskParameters::new(27.5e-6, 0.0).unwrap();
        assert!(matches!(
            retrieve(&img(Array2::ones((1, 4))), &p, Pairing::Sliding, 0),
            Err(Error::ZeroContrast)
        ));
    }

    #[test]
    fn nonpositive_pairs_are_flagged() {
        let p = MaskParameters::new(13.75e-6, 1.0).unwrap();
        let mut c = Array2::ones((1, 5));
        c[[0, 2]] = -1.0;
        c[[0, 3]] = 0.5;
        let r = retrieve(&img(c), &p, Pairing::Sliding, 0).unwrap();
        assert_eq!(r.valid.row(0).to_vec(), vec![true, false, false, true]);
        assert_eq!(r.invalid_count(), 2);
        assert_eq!(r.pb.pixels[[0, 1]], 0.0);
    }

    #[test]
    fn fringe_amplitude_of_alternation() {
        let eps = 0.01;
        let c = Array2::from_shape_fn((2, 7), |(_, n)| if n % 2 == 0 { 1.0 + eps } else { 1.0 - eps });
        let f = fringe_amplitude_map(&img(c)).unwrap();
        for n in 1..6 {
            assert_relative_eq!(f.pixels[[0, n]], 2.0 * eps, max_relative = 1e-10);
        }
        let flat = fringe_amplitude_map(&img(Array2::ones((1, 5)))).unwrap();
        assert!(flat.pixels.iter().all(|v| *v == 0.0));
        assert!(fringe_amplitude_map(&img(Array2::ones((1, 2)))).is_err());
    }
}
