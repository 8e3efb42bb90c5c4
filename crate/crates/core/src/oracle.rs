//! Scalar wave-optics reference: exit field behind mask and object, free-space
//! propagation by the angular-spectrum method, and pixel detection.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImagingGeometry;
use crate::grid;
use crate::image::{DetectorImage, ImageKind};
use crate::mask::MaskSpec;
use crate::phantom::ProjectedObject;

/// Smallest vacuum guard band per side, as a fraction of the detector extent.
pub const MIN_GUARD_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferFunction {
    /// `exp(i z (√(k² - κ²) - k))`.
    #[default]
    Exact,
    /// Paraxial `exp(-i z κ² / 2k)`.
    Fresnel,
}

/// Detector window inside a padded field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone)]
pub struct ComplexField {
    pub values: Array2<Complex64>,
    pub spacing_x: f64,
    pub spacing_y: f64,
    pub wavelength: f64,
    pub window: Window,
}

impl ComplexField {
    pub fn intensity(&self) -> Array2<f64> {
        self.values.mapv(|u| u.norm_sqr())
    }

    /// `Σ |u|² dA`.
    pub fn power(&self) -> f64 {
        self.values.iter().map(|u| u.norm_sqr()).sum::<f64>() * self.spacing_x * self.spacing_y
    }

    pub fn wave_number(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

fn raised_cosine_ramp(guard: usize) -> Vec<f64> {
    (0..guard)
        .map(|g| 0.5 - 0.5 * (PI * (g as f64 + 0.5) / guard as f64).cos())
        .collect()
}

fn edge_weight(ramp: &[f64], idx: usize, start: usize, len: usize) -> f64 {
    let guard = ramp.len();
    if idx < start {
        ramp[idx]
    } else if idx >= start + len {
        ramp[guard - 1 - (idx - start - len)]
    } else {
        1.0
    }
}

fn is_row_invariant(obj: &ProjectedObject) -> bool {
    let first_t = obj.transmission.row(0);
    let first_p = obj.phase.row(0);
    obj.transmission.rows().into_iter().all(|r| r == first_t)
        && obj.phase.rows().into_iter().all(|r| r == first_p)
}

/// `u₀ = √(T M) e^{iφ}` on the fine grid, padded with an apodized vacuum
/// guard band of `guard_fraction` of the detector extent on each side.
/// The mask continues under the guard band. Objects that do not vary along
/// y are treated as periodic in y and get no y guard band.
pub fn build_exit_field(
    obj: &ProjectedObject,
    mask: Option<&MaskSpec>,
    geom: &ImagingGeometry,
    guard_fraction: f64,
) -> Result<ComplexField> {
    obj.check_covers(geom)?;
    if !(guard_fraction >= MIN_GUARD_FRACTION) {
        return Err(Error::InvalidArgument(format!(
            "guard band fraction must be >= {MIN_GUARD_FRACTION}, got {guard_fraction}"
        )));
    }
    let dx = geom.dx();
    if let Some(m) = mask {
        let harmonic = m.max_harmonic();
        if harmonic > 0 {
            // highest mask frequency harmonic / period must sit below Nyquist
            let required = m.period() / (2.0 * harmonic as f64);
            if dx >= required {
                return Err(Error::MaskSampling {
                    actual_m: dx,
                    required_m: required,
                });
            }
        }
    }
    let (rows, cols) = obj.shape();
    let guard_x = (guard_fraction * cols as f64).ceil() as usize;
    let guard_y = if rows > 1 && !is_row_invariant(obj) {
        (guard_fraction * rows as f64).ceil() as usize
    } else {
        0
    };
    let (tr, tc) = (rows + 2 * guard_y, cols + 2 * guard_x);
    let ramp_x = raised_cosine_ramp(guard_x);
    let ramp_y = raised_cosine_ramp(guard_y);

    let mask_row: Vec<f64> = (0..tc)
        .map(|c| {
            let x = (c as f64 - guard_x as f64 + 0.5) * dx;
            mask.map_or(1.0, |m| m.transmission_at(geom.mask_coordinate(x)).clamp(0.0, 1.0))
        })
        .collect();

    let values = Array2::from_shape_fn((tr, tc), |(r, c)| {
        let wx = edge_weight(&ramp_x, c, guard_x, cols);
        let wy = if guard_y > 0 {
            edge_weight(&ramp_y, r, guard_y, rows)
        } else {
            1.0
        };
        let inside = r >= guard_y && r < guard_y + rows && c >= guard_x && c < guard_x + cols;
        let (t, phi) = if inside {
            let (i, j) = (r - guard_y, c - guard_x);
            (obj.transmission[[i, j]], obj.phase[[i, j]])
        } else {
            (1.0, 0.0)
        };
        Complex64::from_polar((t * mask_row[c]).sqrt() * wx * wy, phi)
    });
    Ok(ComplexField {
        values,
        spacing_x: dx,
        spacing_y: geom.dy(),
        wavelength: geom.wavelength(),
        window: Window {
            row0: guard_y,
            col0: guard_x,
            rows,
            cols,
        },
    })
}

fn fft_axis(values: &mut Array2<Complex64>, axis: Axis, inverse: bool, planner: &mut FftPlanner<f64>) {
    let n = values.len_of(axis);
    if n < 2 {
        return;
    }
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for mut lane in values.lanes_mut(axis) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        fft.process(&mut buf);
        for (v, b) in lane.iter_mut().zip(&buf) {
            *v = *b;
        }
    }
}

fn fft2(values: &mut Array2<Complex64>, inverse: bool) {
    let mut planner = FftPlanner::new();
    fft_axis(values, Axis(1), inverse, &mut planner);
    fft_axis(values, Axis(0), inverse, &mut planner);
    if inverse {
        let n = values.len() as f64;
        values.mapv_inplace(|v| v / n);
    }
}

/// Angular frequency of FFT bin `i` out of `n` at spacing `h`.
fn angular_frequency(i: usize, n: usize, h: f64) -> f64 {
    let signed = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
    2.0 * PI * signed / (n as f64 * h)
}

/// Largest propagation distance whose transfer function is adequately
/// sampled on this grid: `λ z <= Δx · L` for every non-trivial axis.
pub fn max_propagation_distance(field: &ComplexField) -> f64 {
    let (rows, cols) = field.values.dim();
    let mut zmax = f64::INFINITY;
    for (n, h) in [(cols, field.spacing_x), (rows, field.spacing_y)] {
        if n > 1 {
            zmax = zmax.min(h * h * n as f64 / field.wavelength);
        }
    }
    zmax
}

/// Free-space propagation over `z` by spectral multiplication.
pub fn propagate(field: &ComplexField, z: f64, transfer: TransferFunction) -> Result<ComplexField> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::InvalidArgument(format!("propagation distance must be >= 0, got {z}")));
    }
    let mut out = field.clone();
    if z == 0.0 {
        return Ok(out);
    }
    let (rows, cols) = field.values.dim();
    for (n, h) in [(cols, field.spacing_x), (rows, field.spacing_y)] {
        if n > 1 {
            let required = field.wavelength * z / (n as f64 * h);
            if h < required {
                return Err(Error::PropagationSampling {
                    actual_m: h,
                    required_m: required,
                });
            }
        }
    }
    let k = field.wave_number();
    fft2(&mut out.values, false);
    let kx: Vec<f64> = (0..cols).map(|j| angular_frequency(j, cols, field.spacing_x)).collect();
    let ky: Vec<f64> = (0..rows).map(|i| angular_frequency(i, rows, field.spacing_y)).collect();
    for ((r, c), v) in out.values.indexed_iter_mut() {
        let kappa2 = kx[c] * kx[c] + ky[r] * ky[r];
        let h = match transfer {
            TransferFunction::Fresnel => Complex64::from_polar(1.0, -z * kappa2 / (2.0 * k)),
            TransferFunction::Exact => {
                if kappa2 <= k * k {
                    // √(k² - κ²) - k without cancellation
                    let kz_minus_k = -kappa2 / ((k * k - kappa2).sqrt() + k);
                    Complex64::from_polar(1.0, z * kz_minus_k)
                } else {
                    let decay = (kappa2 - k * k).sqrt();
                    Complex64::from_polar((-z * decay).exp(), -z * k)
                }
            }
        };
        *v *= h;
    }
    fft2(&mut out.values, true);
    Ok(out)
}

fn gaussian_blur(intensity: &mut Array2<f64>, sigma: f64, dx: f64, dy: f64) {
    let (rows, cols) = intensity.dim();
    let mut spec = intensity.mapv(|v| Complex64::new(v, 0.0));
    fft2(&mut spec, false);
    for ((r, c), v) in spec.indexed_iter_mut() {
        let kx = angular_frequency(c, cols, dx);
        let ky = if rows > 1 {
            angular_frequency(r, rows, dy)
        } else {
            0.0
        };
        *v *= (-0.5 * sigma * sigma * (kx * kx + ky * ky)).exp();
    }
    fft2(&mut spec, true);
    intensity.zip_mut_with(&spec, |o, s| *o = s.re);
}

/// `|u|²`, optionally blurred by a Gaussian of the given FWHM (0 disables),
/// cropped to the detector window and integrated over each pixel along x
/// (averaged along y), matching the single-mask intensity units.
pub fn detect(field: &ComplexField, geom: &ImagingGeometry, source_blur_fwhm: f64) -> Result<DetectorImage> {
    let w = field.window;
    let (fr, fc) = geom.fine_shape();
    if (w.rows, w.cols) != (fr, fc)
        || ((field.spacing_x - geom.dx()) / geom.dx()).abs() > 1e-12
        || ((field.spacing_y - geom.dy()) / geom.dy()).abs() > 1e-12
    {
        return Err(Error::Coverage(format!(
            "field window {}x{} does not cover the detector fine grid {fr}x{fc}",
            w.rows, w.cols
        )));
    }
    if !(source_blur_fwhm.is_finite() && source_blur_fwhm >= 0.0) {
        return Err(Error::InvalidArgument(format!("blur FWHM must be >= 0, got {source_blur_fwhm}")));
    }
    let mut intensity = field.intensity();
    if source_blur_fwhm > 0.0 {
        let sigma = source_blur_fwhm / (8.0 * 2f64.ln()).sqrt();
        gaussian_blur(&mut intensity, sigma, field.spacing_x, field.spacing_y);
    }
    let window = intensity.slice(ndarray::s![w.row0..w.row0 + w.rows, w.col0..w.col0 + w.cols]);
    let pixels = grid::bin_average(window, geom.oversampling_y, geom.oversampling) * geom.pixel_size;
    Ok(DetectorImage::new(pixels, geom.pixel_size, ImageKind::RawSm)
        .with_note("model", "wave_oracle")
        .with_note("source_blur_fwhm_m", source_blur_fwhm)
        .with_note("z_m", geom.z))
}

/// Options for a full oracle run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub guard_fraction: f64,
    pub transfer: TransferFunction,
    pub source_blur_fwhm: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            guard_fraction: 1.0 / 6.0,
            transfer: TransferFunction::Exact,
            source_blur_fwhm: 0.0,
        }
    }
}

/// Exit field, propagation over `geom.z` and detection in one call.
pub fn simulate(
    obj: &ProjectedObject,
    mask: Option<&MaskSpec>,
    geom: &ImagingGeometry,
    options: &OracleOptions,
) -> Result<DetectorImage> {
    let field = build_exit_field(obj, mask, geom, options.guard_fraction)?;
    let out = propagate(&field, geom.z, options.transfer)?;
    detect(&out, geom, options.source_blur_fwhm)
}
