//! Imaging geometry and material constants.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `h c` in eV·m.
pub const HC_EV_M: f64 = 1.239_841_984e-6;

pub fn wavelength_from_kev(energy_kev: f64) -> f64 {
    HC_EV_M / (energy_kev * 1e3)
}

pub fn wave_number_from_kev(energy_kev: f64) -> f64 {
    2.0 * PI / wavelength_from_kev(energy_kev)
}

/// Complex refractive index `n = 1 - δ + iβ` of a material at the design energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub delta: f64,
    pub beta: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, delta: f64, beta: f64) -> Result<Self> {
        let name = name.into();
        for (label, v) in [("delta", delta), ("beta", beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidMaterial {
                    name,
                    reason: format!("{label} must be >= 0, got {v}"),
                });
            }
        }
        Ok(Self { name, delta, beta })
    }
}

/// Plane-wave, detector-plane geometry. Lengths in metres.
///
/// Pixel column `n` covers `[n p, (n + 1) p)` in detector coordinates. Fine
/// grid samples sit at cell midpoints, `oversampling` per pixel along x and
/// `oversampling_y` along y.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingGeometry {
    /// Object-to-detector distance.
    pub z: f64,
    /// Wave number `2π/λ`, rad/m.
    pub k: f64,
    pub pixel_size: f64,
    pub oversampling: usize,
    pub oversampling_y: usize,
    pub n_pixels_x: usize,
    pub n_pixels_y: usize,
    /// Column whose DPC sign factor `(-1)^(n - parity_origin)` is +1.
    pub parity_origin: i64,
}

impl ImagingGeometry {
    /// Isotropic oversampling, parity origin 0.
    pub fn new(
        z: f64,
        k: f64,
        pixel_size: f64,
        oversampling: usize,
        n_pixels_x: usize,
        n_pixels_y: usize,
    ) -> Result<Self> {
        let g = Self {
            z,
            k,
            pixel_size,
            oversampling,
            oversampling_y: oversampling,
            n_pixels_x,
            n_pixels_y,
            parity_origin: 0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_oversampling_y(mut self, oversampling_y: usize) -> Result<Self> {
        self.oversampling_y = oversampling_y;
        self.validate()?;
        Ok(self)
    }

    pub fn with_parity_origin(mut self, parity_origin: i64) -> Self {
        self.parity_origin = parity_origin;
        self
    }

    pub fn with_z(mut self, z: f64) -> Result<Self> {
        self.z = z;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGeometry(msg));
        if !(self.z.is_finite() && self.z > 0.0) {
            return bad(format!("z must be > 0, got {}", self.z));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return bad(format!("k must be > 0, got {}", self.k));
        }
        if !(self.pixel_size.is_finite() && self.pixel_size > 0.0) {
            return bad(format!("pixel size must be > 0, got {}", self.pixel_size));
        }
        if self.oversampling < 8 || !self.oversampling.is_multiple_of(2) {
            return bad(format!(
                "oversampling must be even and >= 8, got {}",
                self.oversampling
            ));
        }
        if self.oversampling_y == 0 {
            return bad("oversampling_y must be >= 1".into());
        }
        if self.n_pixels_x == 0 || self.n_pixels_y == 0 {
            return bad("detector must have at least one pixel in each direction".into());
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k
    }

    /// `z / k`, the scale turning phase derivatives into `D` and `L`.
    pub fn z_over_k(&self) -> f64 {
        self.z / self.k
    }

    pub fn dx(&self) -> f64 {
        self.pixel_size / self.oversampling as f64
    }

    pub fn dy(&self) -> f64 {
        self.pixel_size / self.oversampling_y as f64
    }

    /// Fine grid shape `(rows, cols)`.
    pub fn fine_shape(&self) -> (usize, usize) {
        (
            self.n_pixels_y * self.oversampling_y,
            self.n_pixels_x * self.oversampling,
        )
    }

    pub fn width(&self) -> f64 {
        self.n_pixels_x as f64 * self.pixel_size
    }

    pub fn height(&self) -> f64 {
        self.n_pixels_y as f64 * self.pixel_size
    }

    pub fn fine_x(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx()
    }

    pub fn fine_y(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dy()
    }

    /// `(-1)^(n - parity_origin)`.
    pub fn parity_sign(&self, column: usize) -> f64 {
        parity_sign(column, self.parity_origin)
    }

    /// Mask-frame coordinate of detector position `x`: the left boundary of
    /// column `parity_origin` sits on a strip centre.
    pub fn mask_coordinate(&self, x: f64) -> f64 {
        x + (1 - self.parity_origin) as f64 * self.pixel_size
    }
}

pub(crate) fn parity_sign(column: usize, origin: i64) -> f64 {
    if (column as i64 - origin).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}
