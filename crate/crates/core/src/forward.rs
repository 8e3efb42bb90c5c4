//! Detector-intensity forward models.
//!
//! Single-mask intensities are pixel integrals along x (units of length,
//! so an object-free pixel records `w_e`), averaged over the pixel height.
//! Propagation-based intensities are plain area averages (vacuum = 1).

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ImagingGeometry;
use crate::grid;
use crate::image::{DetectorImage, ImageKind};
use crate::mask::{MaskParameters, MaskSpec};
use crate::phantom::ProjectedObject;

/// Per-pixel area averages `T_n`, `D_n = (z/k) ∂xφ` and `L_n = (z/k) ∇⊥²φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelAverages {
    pub transmission: Array2<f64>,
    pub d: Array2<f64>,
    pub l: Array2<f64>,
}

pub fn pixel_averages(obj: &ProjectedObject, geom: &ImagingGeometry) -> Result<PixelAverages> {
    obj.check_covers(geom)?;
    let (oy, ox) = (geom.oversampling_y, geom.oversampling);
    let zk = geom.z_over_k();
    Ok(PixelAverages {
        transmission: grid::bin_average(obj.transmission.view(), oy, ox),
        d: grid::bin_average(obj.dphi_dx.view(), oy, ox) * zk,
        l: grid::bin_average(obj.lap_phi.view(), oy, ox) * zk,
    })
}

fn provenance(img: DetectorImage, geom: &ImagingGeometry) -> DetectorImage {
    img.with_note("z_m", geom.z)
        .with_note("k_per_m", geom.k)
        .with_note("oversampling", geom.oversampling)
        .with_note("parity_origin", geom.parity_origin)
}

/// `I = T (1 - (z/k) ∇⊥²φ)` on the fine grid, area-averaged into pixels.
pub fn forward_pb(obj: &ProjectedObject, geom: &ImagingGeometry) -> Result<DetectorImage> {
    obj.check_covers(geom)?;
    let zk = geom.z_over_k();
    let mut fine = Array2::zeros(obj.shape());
    Zip::from(&mut fine)
        .and(&obj.transmission)
        .and(&obj.lap_phi)
        .for_each(|o, &t, &l| *o = t * (1.0 - zk * l));
    let pixels = grid::bin_average(fine.view(), geom.oversampling_y, geom.oversampling);
    Ok(provenance(
        DetectorImage::new(pixels, geom.pixel_size, ImageKind::RawPb).with_flat_level(1.0),
        geom,
    ))
}

/// Minimum oversampling accepted for a mask whose highest harmonic is `m`.
pub fn required_oversampling(max_harmonic: usize) -> usize {
    if max_harmonic > 5 {
        16
    } else {
        8
    }
}

/// Per fine column `j`: `∫_cell M dx` and `M(right) - M(left)` in the mask frame.
fn mask_cell_weights(mask: &MaskSpec, geom: &ImagingGeometry, cols: usize) -> (Vec<f64>, Vec<f64>) {
    let dx = geom.dx();
    let mut w_int = Vec::with_capacity(cols);
    let mut w_diff = Vec::with_capacity(cols);
    let mut left = geom.mask_coordinate(0.0);
    let mut m_left = mask.transmission_at(left);
    for j in 0..cols {
        let right = geom.mask_coordinate((j + 1) as f64 * dx);
        let m_right = mask.transmission_at(right);
        w_int.push(mask.integral(left, right));
        w_diff.push(m_right - m_left);
        left = right;
        m_left = m_right;
    }
    (w_int, w_diff)
}

fn check_mask_oversampling(mask: &MaskSpec, geom: &ImagingGeometry) -> Result<()> {
    let harmonic = mask.max_harmonic();
    let required = required_oversampling(harmonic);
    if geom.oversampling < required {
        return Err(Error::Oversampling {
            actual: geom.oversampling,
            required,
            harmonic,
        });
    }
    Ok(())
}

/// Sums fine-row pixel integrals into pixel rows in index order so the
/// result does not depend on the thread count.
fn reduce_rows(per_row: Vec<Vec<f64>>, geom: &ImagingGeometry) -> Array2<f64> {
    let mut out = Array2::zeros((geom.n_pixels_y, geom.n_pixels_x));
    for (i, row) in per_row.iter().enumerate() {
        let mut dst = out.row_mut(i / geom.oversampling_y);
        for (d, v) in dst.iter_mut().zip(row) {
            *d += v;
        }
    }
    out /= geom.oversampling_y as f64;
    out
}

/// Pixel integrals of the single-mask transport equation with the object
/// gradient term dropped:
/// `∫ T M - (z/k) ∫ T ∂xM ∂xφ - (z/k) ∫ T M ∇⊥²φ`.
///
/// Object quantities are taken at fine-cell midpoints; the mask factors are
/// integrated exactly over each cell from the Fourier series.
pub fn forward_sm_integrated(
    obj: &ProjectedObject,
    mask: &MaskSpec,
    geom: &ImagingGeometry,
) -> Result<DetectorImage> {
    obj.check_covers(geom)?;
    check_mask_oversampling(mask, geom)?;
    let (rows, cols) = obj.shape();
    let (w_int, w_diff) = mask_cell_weights(mask, geom, cols);
    let zk = geom.z_over_k();
    let os = geom.oversampling;
    let per_row: Vec<Vec<f64>> = (0..rows)
        .into_par_iter()
        .map(|i| {
            let t = obj.transmission.row(i);
            let g = obj.dphi_dx.row(i);
            let l = obj.lap_phi.row(i);
            (0..geom.n_pixels_x)
                .map(|n| {
                    (n * os..(n + 1) * os)
                        .map(|j| t[j] * (w_int[j] * (1.0 - zk * l[j]) - zk * g[j] * w_diff[j]))
                        .sum()
                })
                .collect()
        })
        .collect();
    let params = mask.parameters();
    Ok(provenance(
        DetectorImage::new(reduce_rows(per_row, geom), geom.pixel_size, ImageKind::RawSm)
            .with_flat_level(params.w_e)
            .with_note("model", "integrated")
            .with_note("w_e_m", params.w_e)
            .with_note("alpha", params.alpha),
        geom,
    ))
}

/// Closed form `I_n = w_e T_n (1 - L_n) - α (-1)^n T_n D_n`, with `n`
/// counted from the geometry's parity origin.
pub fn forward_sm_closed(
    obj: &ProjectedObject,
    params: &MaskParameters,
    geom: &ImagingGeometry,
) -> Result<DetectorImage> {
    let avg = pixel_averages(obj, geom)?;
    Ok(forward_sm_closed_from_averages(&avg, params, geom))
}

pub fn forward_sm_closed_from_averages(
    avg: &PixelAverages,
    params: &MaskParameters,
    geom: &ImagingGeometry,
) -> DetectorImage {
    let mut pixels = Array2::zeros(avg.transmission.raw_dim());
    for ((r, n), out) in pixels.indexed_iter_mut() {
        let t = avg.transmission[[r, n]];
        let pb = params.w_e * t * (1.0 - avg.l[[r, n]]);
        *out = pb - params.alpha * geom.parity_sign(n) * t * avg.d[[r, n]];
    }
    provenance(
        DetectorImage::new(pixels, geom.pixel_size, ImageKind::RawSm)
            .with_flat_level(params.w_e)
            .with_note("model", "closed")
            .with_note("w_e_m", params.w_e)
            .with_note("alpha", params.alpha),
        geom,
    )
}

/// Pixel integrals of the dropped term `-(z/k) M ∇⊥T · ∇⊥φ`, for bounding
/// the gradient approximation. Never part of the forward signal.
pub fn neglected_gradient_term(
    obj: &ProjectedObject,
    mask: &MaskSpec,
    geom: &ImagingGeometry,
) -> Result<DetectorImage> {
    obj.check_covers(geom)?;
    let (_, cols) = obj.shape();
    let (w_int, _) = mask_cell_weights(mask, geom, cols);
    let dtdx = grid::gradient_x(obj.transmission.view(), geom.dx());
    let (dtdy, dphidy) = y_gradients(obj, geom);
    let zk = geom.z_over_k();
    let os = geom.oversampling;
    let per_row: Vec<Vec<f64>> = (0..obj.shape().0)
        .map(|i| {
            (0..geom.n_pixels_x)
                .map(|n| {
                    (n * os..(n + 1) * os)
                        .map(|j| {
                            let dot = dtdx[[i, j]] * obj.dphi_dx[[i, j]] + dtdy[[i, j]] * dphidy[[i, j]];
                            -zk * w_int[j] * dot
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(DetectorImage::new(reduce_rows(per_row, geom), geom.pixel_size, ImageKind::Diagnostic)
        .with_note("term", "mask_times_grad_t_dot_grad_phi"))
}

fn y_gradients(obj: &ProjectedObject, geom: &ImagingGeometry) -> (Array2<f64>, Array2<f64>) {
    let ty = transpose_gradient(obj.transmission.view(), geom.dy());
    let py = transpose_gradient(obj.phase.view(), geom.dy());
    (ty, py)
}

fn transpose_gradient(f: ArrayView2<f64>, dy: f64) -> Array2<f64> {
    let t = f.reversed_axes();
    let mut g = grid::gradient_x(t, dy);
    g.swap_axes(0, 1);
    g.as_standard_layout().to_owned()
}

/// Photon-counting noise: scales the image so its flat level maps to
/// `mean_counts_per_pixel`, draws Poisson counts and scales back.
pub fn add_poisson_noise(
    img: &DetectorImage,
    mean_counts_per_pixel: f64,
    seed: u64,
) -> Result<DetectorImage> {
    if !(mean_counts_per_pixel.is_finite() && mean_counts_per_pixel > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mean counts per pixel must be > 0, got {mean_counts_per_pixel}"
        )));
    }
    let level = img
        .flat_level
        .unwrap_or_else(|| img.pixels.mean().unwrap_or(1.0));
    if !(level > 0.0) {
        return Err(Error::InvalidArgument("image has no positive flat level".into()));
    }
    let scale = mean_counts_per_pixel / level;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = img.clone();
    for v in out.pixels.iter_mut() {
        let lambda = *v * scale;
        let counts = if lambda > 0.0 && lambda.is_finite() {
            Poisson::new(lambda)
                .map_err(|e| Error::InvalidArgument(format!("poisson rate {lambda}: {e}")))?
                .sample(&mut rng)
        } else {
            0.0
        };
        *v = counts / scale;
    }
    out.provenance
        .insert("noise_counts".into(), mean_counts_per_pixel.to_string());
    out.provenance.insert("noise_seed".into(), seed.to_string());
    Ok(out)
}

/// Column means of a single-row-invariant image, used for profiles.
pub fn cross_section(img: &DetectorImage) -> Vec<f64> {
    img.pixels.mean_axis(Axis(0)).map(|a| a.to_vec()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::linear_phase;
    use approx::assert_relative_eq;

    fn geom(os: usize) -> ImagingGeometry {
        ImagingGeometry::new(0.6, 1.0135e11, 27.5e-6, os, 16, 2).unwrap()
    }

    #[test]
    fn vacuum_pb_is_one() {
        let g = geom(8);
        let img = forward_pb(&ProjectedObject::vacuum(&g), &g).unwrap();
        assert!(img.pixels.iter().all(|v| (*v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn integrated_flat_field_is_w_e() {
        let g = geom(16);
        let mask = MaskSpec::square(8.12e-6, 55e-6, 0.0, 51).unwrap();
        let img = forward_sm_integrated(&ProjectedObject::vacuum(&g), &mask, &g).unwrap();
        let w_e = mask.effective_aperture();
        assert!(img.pixels.iter().all(|v| ((v - w_e) / w_e).abs() < 1e-9));
    }

    #[test]
    fn shifted_mask_flat_field_alternates() {
        // Moving the strips off the pixel boundaries leaks the odd harmonics
        // into the pixel integrals: the flat is w_e ± a constant.
        let g = geom(16);
        let mask = MaskSpec::raised_cosine(55e-6, 5e-6).unwrap();
        let img = forward_sm_integrated(&ProjectedObject::vacuum(&g), &mask, &g).unwrap();
        let w_e = mask.effective_aperture();
        let dev: Vec<f64> = img.pixels.row(0).iter().map(|v| v - w_e).collect();
        assert!(dev[0].abs() > 1e-3 * w_e);
        for n in 1..dev.len() {
            assert_relative_eq!(dev[n], -dev[n - 1], max_relative = 1e-9);
        }
    }

    #[test]
    fn low_oversampling_rejected_for_sharp_mask() {
        let g = geom(8);
        let mask = MaskSpec::square(8.12e-6, 55e-6, 0.0, 51).unwrap();
        let err = forward_sm_integrated(&ProjectedObject::vacuum(&g), &mask, &g).unwrap_err();
        assert!(matches!(err, Error::Oversampling { required: 16, .. }));
        let smooth = MaskSpec::raised_cosine(55e-6, 0.0).unwrap();
        assert!(forward_sm_integrated(&ProjectedObject::vacuum(&g), &smooth, &g).is_ok());
    }

    #[test]
    fn linear_phase_integrated_matches_alternation() {
        let g = geom(16);
        let a = 5.0e4;
        let mask = MaskSpec::square(13.75e-6, 55e-6, 0.0, 51).unwrap();
        let MaskParameters { w_e, alpha } = mask.parameters();
        let img = forward_sm_integrated(&linear_phase(a, &g), &mask, &g).unwrap();
        for n in 0..g.n_pixels_x {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let want = w_e - alpha * sign * g.z_over_k() * a;
            assert_relative_eq!(img.pixels[[0, n]], want, max_relative = 1e-10);
        }
    }

    #[test]
    fn closed_single_pixel_substitution() {
        let g = ImagingGeometry::new(0.6, 1.0e11, 27.5e-6, 8, 2, 1).unwrap();
        let d = 3.0e-7;
        let avg = PixelAverages {
            transmission: Array2::ones((1, 2)),
            d: Array2::from_elem((1, 2), d),
            l: Array2::zeros((1, 2)),
        };
        let p = MaskParameters::new(13.75e-6, 1.0).unwrap();
        let img = forward_sm_closed_from_averages(&avg, &p, &g);
        assert_relative_eq!(img.pixels[[0, 0]], 13.75e-6 - d, max_relative = 1e-14);
        assert_relative_eq!(img.pixels[[0, 1]], 13.75e-6 + d, max_relative = 1e-14);
    }

    #[test]
    fn noise_rejects_nonpositive_counts() {
        let g = geom(8);
        let img = forward_pb(&ProjectedObject::vacuum(&g), &g).unwrap();
        assert!(add_poisson_noise(&img, 0.0, 1).is_err());
        assert!(add_poisson_noise(&img, -5.0, 1).is_err());
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let g = geom(8);
        let img = forward_pb(&ProjectedObject::vacuum(&g), &g).unwrap();
        let a = add_poisson_noise(&img, 1000.0, 42).unwrap();
        let b = add_poisson_noise(&img, 1000.0, 42).unwrap();
        let c = add_poisson_noise(&img, 1000.0, 43).unwrap();
        assert!(a.pixels.iter().zip(b.pixels.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a.pixels, c.pixels);
    }
}
