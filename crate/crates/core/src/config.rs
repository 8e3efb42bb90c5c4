//! Run configuration (TOML). Unknown keys are errors; every physical
//! quantity carries its unit in the key name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wave_number_from_kev, ImagingGeometry, Material};
use crate::io;
use crate::mask::{fourier_from_profile, MaskParameters, MaskSpec, DEFAULT_SQUARE_HARMONICS};
use crate::oracle::{OracleOptions, TransferFunction};
use crate::phantom::{
    cylinder_phantom_at, gaussian_phantom, tube_phantom, ProjectedObject, RodAxis, TubeGeometry,
    TubeMaterials,
};
use crate::retrieval::Pairing;

const UM: f64 = 1e-6;
const MM: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub energy_kev: f64,
    pub z_m: f64,
    pub pixel_size_um: f64,
    #[serde(default = "default_oversampling")]
    pub oversampling: usize,
    #[serde(default)]
    pub oversampling_y: Option<usize>,
    pub n_pixels_x: usize,
    pub n_pixels_y: usize,
    #[serde(default)]
    pub parity_origin: i64,
}

fn default_oversampling() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MaskConfig {
    Square {
        aperture_um: f64,
        period_um: f64,
        #[serde(default)]
        offset_um: f64,
        #[serde(default)]
        m_max: Option<usize>,
    },
    Fourier {
        coefficients: Vec<f64>,
        period_um: f64,
        #[serde(default)]
        offset_um: f64,
    },
    Sampled {
        csv_path: PathBuf,
        /// Defaults to twice the geometry pixel size.
        #[serde(default)]
        period_um: Option<f64>,
        #[serde(default)]
        m_max: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub delta: f64,
    pub beta: f64,
    /// Free-text provenance of the optical constants.
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhantomConfig {
    Vacuum,
    Cylinder {
        radius_mm: f64,
        material: String,
        #[serde(default = "default_axis")]
        axis: RodAxis,
        #[serde(default)]
        center_offset_mm: f64,
    },
    Tube {
        outer_radius_mm: f64,
        wall_mm: f64,
        rod_radius_mm: f64,
        #[serde(default)]
        rod_offset_mm: f64,
        tube_material: String,
        fill_material: String,
        rod_material: String,
    },
    Gaussian {
        phase_amplitude_rad: f64,
        #[serde(default)]
        absorption: f64,
        sigma_um: f64,
    },
}

fn default_axis() -> RodAxis {
    RodAxis::Y
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub enabled: bool,
    pub mean_counts: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub blur_fwhm_um: f64,
    #[serde(default)]
    pub transfer: TransferFunction,
    #[serde(default = "default_guard")]
    pub guard_fraction: f64,
    /// Fine-grid oversampling for the wave oracle; defaults to the geometry's.
    #[serde(default)]
    pub oversampling: Option<usize>,
    /// Interior region half-width as a fraction of the object radius.
    #[serde(default = "default_interior")]
    pub interior_fraction: f64,
}

fn default_guard() -> f64 {
    1.0 / 6.0
}

fn default_interior() -> f64 {
    0.8
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            blur_fwhm_um: 0.0,
            transfer: TransferFunction::Exact,
            guard_fraction: default_guard(),
            oversampling: None,
            interior_fraction: default_interior(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardModel {
    #[default]
    Closed,
    Integrated,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub previews: bool,
    #[serde(default)]
    pub model: ForwardModel,
    #[serde(default = "yes")]
    pub pb_reference: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            previews: true,
            model: ForwardModel::Closed,
            pb_reference: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalConfig {
    #[serde(default)]
    pub pairing: Pairing,
    /// Overrides the geometry's parity origin for retrieval.
    #[serde(default)]
    pub parity_origin: Option<i64>,
    /// Explicit mask parameters; otherwise derived from `[mask]`.
    #[serde(default)]
    pub w_e_um: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: Option<GeometryConfig>,
    #[serde(default)]
    pub mask: Option<MaskConfig>,
    #[serde(default)]
    pub materials: BTreeMap<String, MaterialConfig>,
    #[serde(default)]
    pub phantom: Option<PhantomConfig>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_err(format!("`{name}` must be > 0, got {v}")))
    }
}

impl RunConfig {
    /// Parses and validates a config file; relative paths inside it resolve
    /// against the file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        if let Some(MaskConfig::Sampled { csv_path, .. }) = &mut cfg.mask {
            if csv_path.is_relative() {
                *csv_path = base_dir.join(&*csv_path);
            }
            if !csv_path.exists() {
                return Err(config_err(format!("mask profile {} does not exist", csv_path.display())));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if let Some(g) = &self.geometry {
            positive("geometry.energy_kev", g.energy_kev)?;
            positive("geometry.z_m", g.z_m)?;
            positive("geometry.pixel_size_um", g.pixel_size_um)?;
            self.geometry()?;
        }
        match &self.mask {
            Some(MaskConfig::Square {
                aperture_um,
                period_um,
                ..
            }) => {
                positive("mask.aperture_um", *aperture_um)?;
                positive("mask.period_um", *period_um)?;
            }
            Some(MaskConfig::Fourier { period_um, .. }) => positive("mask.period_um", *period_um)?,
            Some(MaskConfig::Sampled { period_um: Some(p), .. }) => positive("mask.period_um", *p)?,
            _ => {}
        }
        for (name, m) in &self.materials {
            Material::new(name.clone(), m.delta, m.beta).map_err(|e| config_err(e.to_string()))?;
        }
        if let Some(p) = &self.phantom {
            let need = |m: &str| {
                if self.materials.contains_key(m) {
                    Ok(())
                } else {
                    Err(config_err(format!("phantom refers to unknown material `{m}`")))
                }
            };
            match p {
                PhantomConfig::Vacuum => {}
                PhantomConfig::Cylinder {
                    radius_mm, material, ..
                } => {
                    positive("phantom.radius_mm", *radius_mm)?;
                    need(material)?;
                }
                PhantomConfig::Tube {
                    outer_radius_mm,
                    wall_mm,
                    rod_radius_mm,
                    tube_material,
                    fill_material,
                    rod_material,
                    ..
                } => {
                    positive("phantom.outer_radius_mm", *outer_radius_mm)?;
                    positive("phantom.wall_mm", *wall_mm)?;
                    positive("phantom.rod_radius_mm", *rod_radius_mm)?;
                    need(tube_material)?;
                    need(fill_material)?;
                    need(rod_material)?;
                }
                PhantomConfig::Gaussian {
                    sigma_um,
                    absorption,
                    ..
                } => {
                    positive("phantom.sigma_um", *sigma_um)?;
                    if *absorption < 0.0 {
                        return Err(config_err("`phantom.absorption` must be >= 0"));
                    }
                }
            }
        }
        if let Some(n) = &self.noise {
            positive("noise.mean_counts", n.mean_counts)?;
        }
        if self.oracle.blur_fwhm_um < 0.0 {
            return Err(config_err("`oracle.blur_fwhm_um` must be >= 0"));
        }
        positive("oracle.guard_fraction", self.oracle.guard_fraction)?;
        positive("oracle.interior_fraction", self.oracle.interior_fraction)?;
        if let Some(w) = self.retrieval.w_e_um {
            positive("retrieval.w_e_um", w)?;
        }
        Ok(())
    }

    fn geometry_section(&self) -> Result<&GeometryConfig> {
        self.geometry
            .as_ref()
            .ok_or_else(|| config_err("missing [geometry] section"))
    }

    pub fn geometry(&self) -> Result<ImagingGeometry> {
        let g = self.geometry_section()?;
        let mut geom = ImagingGeometry::new(
            g.z_m,
            wave_number_from_kev(g.energy_kev),
            g.pixel_size_um * UM,
            g.oversampling,
            g.n_pixels_x,
            g.n_pixels_y,
        )
        .map_err(|e| config_err(e.to_string()))?
        .with_parity_origin(g.parity_origin);
        if let Some(oy) = g.oversampling_y {
            geom = geom.with_oversampling_y(oy).map_err(|e| config_err(e.to_string()))?;
        }
        Ok(geom)
    }

    /// Geometry used by the wave oracle (its own oversampling, if set).
    pub fn oracle_geometry(&self) -> Result<ImagingGeometry> {
        let mut geom = self.geometry()?;
        if let Some(os) = self.oracle.oversampling {
            geom.oversampling = os;
            geom.validate().map_err(|e| config_err(e.to_string()))?;
        }
        Ok(geom)
    }

    pub fn oracle_options(&self) -> OracleOptions {
        OracleOptions {
            guard_fraction: self.oracle.guard_fraction,
            transfer: self.oracle.transfer,
            source_blur_fwhm: self.oracle.blur_fwhm_um * UM,
        }
    }

    pub fn mask(&self) -> Result<MaskSpec> {
        match self
            .mask
            .as_ref()
            .ok_or_else(|| config_err("missing [mask] section"))?
        {
            MaskConfig::Square {
                aperture_um,
                period_um,
                offset_um,
                m_max,
            } => MaskSpec::square(
                aperture_um * UM,
                period_um * UM,
                offset_um * UM,
                m_max.unwrap_or(DEFAULT_SQUARE_HARMONICS),
            ),
            MaskConfig::Fourier {
                coefficients,
                period_um,
                offset_um,
            } => MaskSpec::new(coefficients.clone(), period_um * UM, offset_um * UM),
            MaskConfig::Sampled {
                csv_path,
                period_um,
                m_max,
            } => {
                let period = match period_um {
                    Some(p) => p * UM,
                    None => 2.0 * self.geometry_section()?.pixel_size_um * UM,
                };
                let samples = io::read_mask_profile(csv_path)?;
                fourier_from_profile(&samples, period, m_max.unwrap_or(DEFAULT_SQUARE_HARMONICS))
            }
        }
    }

    /// Mask parameters for retrieval: explicit overrides win over `[mask]`.
    pub fn mask_parameters(&self) -> Result<MaskParameters> {
        match (self.retrieval.w_e_um, self.retrieval.alpha) {
            (Some(w), Some(a)) => MaskParameters::new(w * UM, a),
            (None, None) => Ok(self.mask()?.parameters()),
            _ => Err(config_err("set both `retrieval.w_e_um` and `retrieval.alpha`, or neither")),
        }
    }

    pub fn material(&self, name: &str) -> Result<Material> {
        let m = self
            .materials
            .get(name)
            .ok_or_else(|| config_err(format!("unknown material `{name}`")))?;
        Material::new(name, m.delta, m.beta)
    }

    pub fn phantom(&self, geom: &ImagingGeometry) -> Result<ProjectedObject> {
        let p = self
            .phantom
            .as_ref()
            .ok_or_else(|| config_err("missing [phantom] section"))?;
        match p {
            PhantomConfig::Vacuum => Ok(ProjectedObject::vacuum(geom)),
            PhantomConfig::Cylinder {
                radius_mm,
                material,
                axis,
                center_offset_mm,
            } => {
                let extent = match axis {
                    RodAxis::Y => geom.width(),
                    RodAxis::X => geom.height(),
                };
                cylinder_phantom_at(
                    radius_mm * MM,
                    0.5 * extent + center_offset_mm * MM,
                    &self.material(material)?,
                    geom,
                    *axis,
                )
            }
            PhantomConfig::Tube { .. } => {
                let (tube, materials) = self.tube_parts()?.expect("tube phantom");
                tube_phantom(&tube, &materials, geom)
            }
            PhantomConfig::Gaussian {
                phase_amplitude_rad,
                absorption,
                sigma_um,
            } => gaussian_phantom(*phase_amplitude_rad, *absorption, sigma_um * UM, geom),
        }
    }

    /// Tube geometry and materials when the phantom is a tube.
    pub fn tube_parts(&self) -> Result<Option<(TubeGeometry, TubeMaterials)>> {
        let Some(PhantomConfig::Tube {
            outer_radius_mm,
            wall_mm,
            rod_radius_mm,
            rod_offset_mm,
            tube_material,
            fill_material,
            rod_material,
        }) = &self.phantom
        else {
            return Ok(None);
        };
        let tube = TubeGeometry {
            outer_radius: outer_radius_mm * MM,
            wall: wall_mm * MM,
            rod_radius: rod_radius_mm * MM,
            rod_offset: rod_offset_mm * MM,
        };
        let materials = TubeMaterials {
            tube: self.material(tube_material)?,
            fill: self.material(fill_material)?,
            rod: self.material(rod_material)?,
        };
        Ok(Some((tube, materials)))
    }

    /// Across-axis centre and radius of the phantom's outer boundary, when it has one.
    pub fn phantom_extent(&self, geom: &ImagingGeometry) -> Option<(f64, f64)> {
        match self.phantom.as_ref()? {
            PhantomConfig::Cylinder {
                radius_mm,
                axis: RodAxis::Y,
                center_offset_mm,
                ..
            } => Some((0.5 * geom.width() + center_offset_mm * MM, radius_mm * MM)),
            PhantomConfig::Tube {
                outer_radius_mm, ..
            } => Some((0.5 * geom.width(), outer_radius_mm * MM)),
            PhantomConfig::Gaussian { sigma_um, .. } => Some((0.5 * geom.width(), 3.0 * sigma_um * UM)),
            _ => None,
        }
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise.as_ref().map_or(0, |n| n.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[geometry]
energy_kev = 20.0
z_m = 0.6
pixel_size_um = 27.5
n_pixels_x = 64
n_pixels_y = 2

[mask]
type = "fourier"
coefficients = [0.5, 0.5]
period_um = 55.0

[materials.pmma]
delta = 6.66e-7
beta = 3.69e-10

[phantom]
type = "cylinder"
radius_mm = 0.5
material = "pmma"
"#;

    #[test]
    fn parses_base() {
        let cfg = RunConfig::parse(BASE, Path::new(".")).unwrap();
        let g = cfg.geometry().unwrap();
        assert_eq!(g.oversampling, 32);
        let m = cfg.mask().unwrap();
        assert!((m.effective_aperture() - 13.75e-6).abs() < 1e-18);
        let obj = cfg.phantom(&g).unwrap();
        assert_eq!(obj.shape(), (64, 2048));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = BASE.replace("z_m = 0.6", "z_m = 0.6\nzz = 1");
        assert!(matches!(RunConfig::parse(&text, Path::new(".")), Err(Error::Config(_))));
        let text = BASE.replace("type = \"fourier\"", "type = \"fourier\"\naperture = 3");
        assert!(RunConfig::parse(&text, Path::new(".")).is_err());
        let text = format!("{BASE}\n[extra]\na = 1\n");
        assert!(RunConfig::parse(&text, Path::new(".")).is_err());
    }

    #[test]
    fn nonpositive_quantities_rejected() {
        let text = BASE.replace("z_m = 0.6", "z_m = -0.6");
        assert!(RunConfig::parse(&text, Path::new(".")).is_err());
        let text = BASE.replace("radius_mm = 0.5", "radius_mm = 0.0");
        assert!(RunConfig::parse(&text, Path::new(".")).is_err());
    }

    #[test]
    fn missing_profile_rejected() {
        let text = BASE.replace(
            "type = \"fourier\"\ncoefficients = [0.5, 0.5]\nperiod_um = 55.0",
            "type = \"sampled\"\ncsv_path = \"does-not-exist.csv\"",
        );
        let err = RunConfig::parse(&text, Path::new("/nonexistent")).unwrap_err();
        assert!(err.to_string().contains("does not exist"));
    }

    #[test]
    fn unknown_material_rejected() {
        let text = BASE.replace("material = \"pmma\"", "material = \"lead\"");
        assert!(RunConfig::parse(&text, Path::new(".")).is_err());
    }
}
