//! Analytic phantoms projected onto the fine object-plane grid.
//!
//! Sign convention: the projected phase is `φ = -k δ t` for thickness `t`
//! (X-ray refractive index below one advances the phase), and the intensity
//! transmission is `T = exp(-2 k β t)`.

use ndarray::{Array1, Array2, Zip};

use crate::error::{Error, Result};
use crate::geometry::{ImagingGeometry, Material};
use crate::grid;

/// Rim band half-width in fine samples where analytic derivatives of a
/// chord profile are replaced by finite differences.
pub const RIM_BAND_SAMPLES: f64 = 2.0;

/// Fine-grid object-plane fields. All arrays share the same `[row, col]` shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedObject {
    pub spacing_x: f64,
    pub spacing_y: f64,
    pub transmission: Array2<f64>,
    /// Radians.
    pub phase: Array2<f64>,
    /// Radians per metre.
    pub dphi_dx: Array2<f64>,
    /// Radians per square metre.
    pub lap_phi: Array2<f64>,
    /// Samples whose derivatives came from finite differences because an
    /// analytic edge singularity is nearby.
    pub rim_band: Array2<bool>,
}

/// Direction of a rod's long axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RodAxis {
    /// Rod runs along x; the profile varies with y (no x gradient).
    X,
    /// Rod runs along y, parallel to the mask strips; the profile varies with x.
    Y,
}

impl ProjectedObject {
    pub fn shape(&self) -> (usize, usize) {
        self.phase.dim()
    }

    pub fn vacuum(geometry: &ImagingGeometry) -> Self {
        let shape = geometry.fine_shape();
        Self {
            spacing_x: geometry.dx(),
            spacing_y: geometry.dy(),
            transmission: Array2::ones(shape),
            phase: Array2::zeros(shape),
            dphi_dx: Array2::zeros(shape),
            lap_phi: Array2::zeros(shape),
            rim_band: Array2::from_elem(shape, false),
        }
    }

    /// Builds an object from sampled `T` and `φ`, deriving the gradient and
    /// Laplacian by finite differences.
    pub fn from_sampled(
        transmission: Array2<f64>,
        phase: Array2<f64>,
        spacing_x: f64,
        spacing_y: f64,
    ) -> Result<Self> {
        if transmission.dim() != phase.dim() {
            return Err(Error::Dimensions(format!(
                "transmission {:?} vs phase {:?}",
                transmission.dim(),
                phase.dim()
            )));
        }
        if transmission.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidPhantom("transmission outside [0, 1]".into()));
        }
        let (dphi_dx, lap_phi) = grid::derivatives_from_phase(phase.view(), spacing_x, spacing_y);
        let shape = phase.dim();
        Ok(Self {
            spacing_x,
            spacing_y,
            transmission,
            phase,
            dphi_dx,
            lap_phi,
            rim_band: Array2::from_elem(shape, false),
        })
    }

    /// Phase additive, transmission multiplicative.
    pub fn superpose(&self, other: &ProjectedObject) -> Result<ProjectedObject> {
        if self.shape() != other.shape()
            || self.spacing_x != other.spacing_x
            || self.spacing_y != other.spacing_y
        {
            return Err(Error::Dimensions("superposed objects must share a grid".into()));
        }
        let mut rim_band = self.rim_band.clone();
        Zip::from(&mut rim_band)
            .and(&other.rim_band)
            .for_each(|a, &b| *a |= b);
        Ok(ProjectedObject {
            spacing_x: self.spacing_x,
            spacing_y: self.spacing_y,
            transmission: &self.transmission * &other.transmission,
            phase: &self.phase + &other.phase,
            dphi_dx: &self.dphi_dx + &other.dphi_dx,
            lap_phi: &self.lap_phi + &other.lap_phi,
            rim_band,
        })
    }

    /// Checks the object grid matches the geometry's fine grid.
    pub fn check_covers(&self, geometry: &ImagingGeometry) -> Result<()> {
        let want = geometry.fine_shape();
        if self.shape() != want {
            return Err(Error::Coverage(format!(
                "object grid {:?} does not match detector fine grid {:?}",
                self.shape(),
                want
            )));
        }
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        if rel(self.spacing_x, geometry.dx()) > 1e-12 || rel(self.spacing_y, geometry.dy()) > 1e-12 {
            return Err(Error::Coverage(format!(
                "object spacing ({:e}, {:e}) differs from detector fine spacing ({:e}, {:e})",
                self.spacing_x,
                self.spacing_y,
                geometry.dx(),
                geometry.dy()
            )));
        }
        Ok(())
    }
}

/// One signed solid cylinder in a superposition. A negative `weight`
/// removes material, e.g. the water displaced by a rod.
#[derive(Debug, Clone)]
pub struct CylinderTerm {
    /// Across-axis position of the cylinder axis, detector coordinates.
    pub center: f64,
    pub radius: f64,
    pub material: Material,
    pub weight: f64,
}

/// Coaxial or side-by-side cylinders sharing one axis direction.
#[derive(Debug, Clone)]
pub struct CylinderSet {
    pub axis: RodAxis,
    pub terms: Vec<CylinderTerm>,
}

fn chord(s: f64, r: f64) -> (f64, f64, f64) {
    // thickness 2√(R² - s²) and its first two derivatives
    let q = r * r - s * s;
    if q <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let root = q.sqrt();
    (2.0 * root, -2.0 * s / root, -2.0 * r * r / (q * root))
}

struct Profile {
    phase: Array1<f64>,
    transmission: Array1<f64>,
    dphi: Array1<f64>,
    d2phi: Array1<f64>,
    rim: Array1<bool>,
}

impl CylinderSet {
    pub fn new(axis: RodAxis) -> Self {
        Self {
            axis,
            terms: Vec::new(),
        }
    }

    pub fn add(mut self, center: f64, radius: f64, material: Material, weight: f64) -> Self {
        self.terms.push(CylinderTerm {
            center,
            radius,
            material,
            weight,
        });
        self
    }

    fn profile(&self, n: usize, h: f64, k: f64) -> Profile {
        let mut phase = Array1::zeros(n);
        let mut mu = Array1::zeros(n);
        let mut dphi = Array1::zeros(n);
        let mut d2phi = Array1::zeros(n);
        let mut rim = Array1::from_elem(n, false);
        let band = RIM_BAND_SAMPLES * h;
        for j in 0..n {
            let pos = (j as f64 + 0.5) * h;
            for t in &self.terms {
                let s = pos - t.center;
                let (th, dth, d2th) = chord(s, t.radius);
                let kd = -k * t.material.delta * t.weight;
                phase[j] += kd * th;
                mu[j] += 2.0 * k * t.material.beta * t.weight * th;
                dphi[j] += kd * dth;
                d2phi[j] += kd * d2th;
                if (s.abs() - t.radius).abs() <= band {
                    rim[j] = true;
                }
            }
        }
        // replace derivatives near rims with second-order differences of φ
        let mut fd1 = Array1::zeros(n);
        let mut fd2 = Array1::zeros(n);
        grid_1d(phase.view(), fd1.view_mut(), fd2.view_mut(), h);
        for j in 0..n {
            if rim[j] {
                dphi[j] = fd1[j];
                d2phi[j] = fd2[j];
            }
        }
        // cancellation in signed superpositions can leave mu at -0.0 or a few ulp below zero
        let transmission = mu.mapv(|m: f64| (-m.max(0.0)).exp());
        Profile {
            phase,
            transmission,
            dphi,
            d2phi,
            rim,
        }
    }

    /// Projects the set onto the geometry's fine grid.
    pub fn project(&self, geometry: &ImagingGeometry) -> Result<ProjectedObject> {
        let (rows, cols) = geometry.fine_shape();
        let (n, h, extent) = match self.axis {
            RodAxis::Y => (cols, geometry.dx(), geometry.width()),
            RodAxis::X => (rows, geometry.dy(), geometry.height()),
        };
        for t in &self.terms {
            if !(t.radius.is_finite() && t.radius > 0.0) {
                return Err(Error::InvalidPhantom(format!("radius must be > 0, got {}", t.radius)));
            }
            let margin = RIM_BAND_SAMPLES * h;
            if t.center - t.radius - margin < 0.0 || t.center + t.radius + margin > extent {
                return Err(Error::InvalidPhantom(format!(
                    "cylinder of radius {:.4e} m at {:.4e} m does not fit in the {:.4e} m field of view",
                    t.radius, t.center, extent
                )));
            }
        }
        let p = self.profile(n, h, geometry.k);
        let shape = (rows, cols);
        let obj = match self.axis {
            RodAxis::Y => {
                let bcast = |v: &Array1<f64>| v.broadcast(shape).expect("row broadcast").to_owned();
                ProjectedObject {
                    spacing_x: geometry.dx(),
                    spacing_y: geometry.dy(),
                    transmission: bcast(&p.transmission),
                    phase: bcast(&p.phase),
                    dphi_dx: bcast(&p.dphi),
                    lap_phi: bcast(&p.d2phi),
                    rim_band: p.rim.broadcast(shape).expect("row broadcast").to_owned(),
                }
            }
            RodAxis::X => {
                let col = |v: &Array1<f64>| Array2::from_shape_fn(shape, |(i, _)| v[i]);
                ProjectedObject {
                    spacing_x: geometry.dx(),
                    spacing_y: geometry.dy(),
                    transmission: col(&p.transmission),
                    phase: col(&p.phase),
                    dphi_dx: Array2::zeros(shape),
                    lap_phi: col(&p.d2phi),
                    rim_band: Array2::from_shape_fn(shape, |(i, _)| p.rim[i]),
                }
            }
        };
        Ok(obj)
    }
}

fn grid_1d(
    f: ndarray::ArrayView1<f64>,
    d1: ndarray::ArrayViewMut1<f64>,
    d2: ndarray::ArrayViewMut1<f64>,
    h: f64,
) {
    let row = f.insert_axis(ndarray::Axis(0));
    let (g, l) = grid::derivatives_from_phase(row, h, h);
    g.row(0).assign_to(d1);
    l.row(0).assign_to(d2);
}

fn across_center(geometry: &ImagingGeometry, axis: RodAxis) -> f64 {
    match axis {
        RodAxis::Y => 0.5 * geometry.width(),
        RodAxis::X => 0.5 * geometry.height(),
    }
}

/// Single-material rod centred in the field of view.
pub fn cylinder_phantom(
    radius: f64,
    material: &Material,
    geometry: &ImagingGeometry,
    axis: RodAxis,
) -> Result<ProjectedObject> {
    let c = across_center(geometry, axis);
    cylinder_phantom_at(radius, c, material, geometry, axis)
}

pub fn cylinder_phantom_at(
    radius: f64,
    center: f64,
    material: &Material,
    geometry: &ImagingGeometry,
    axis: RodAxis,
) -> Result<ProjectedObject> {
    CylinderSet::new(axis)
        .add(center, radius, material.clone(), 1.0)
        .project(geometry)
}

/// Geometry of a liquid-filled tube holding a rod, all parallel to y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeGeometry {
    pub outer_radius: f64,
    pub wall: f64,
    pub rod_radius: f64,
    /// Rod axis offset from the tube axis.
    pub rod_offset: f64,
}

#[derive(Debug, Clone)]
pub struct TubeMaterials {
    pub tube: Material,
    pub fill: Material,
    pub rod: Material,
}

impl TubeGeometry {
    pub fn inner_radius(&self) -> f64 {
        self.outer_radius - self.wall
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPhantom(m));
        if !(self.outer_radius > 0.0 && self.wall > 0.0 && self.rod_radius > 0.0) {
            return bad("tube radii and wall must be > 0".into());
        }
        if self.wall >= self.outer_radius {
            return bad(format!(
                "wall {:e} m leaves no lumen in a tube of radius {:e} m",
                self.wall, self.outer_radius
            ));
        }
        if self.rod_radius + self.rod_offset.abs() > self.inner_radius() {
            return bad(format!(
                "rod (radius {:e} m, offset {:e} m) does not fit inside the lumen of radius {:e} m",
                self.rod_radius,
                self.rod_offset,
                self.inner_radius()
            ));
        }
        Ok(())
    }

    /// The tube as a signed cylinder superposition; `which` picks components.
    pub fn cylinder_set(
        &self,
        materials: &TubeMaterials,
        center: f64,
        which: TubeComponents,
    ) -> CylinderSet {
        let rod_c = center + self.rod_offset;
        let mut set = CylinderSet::new(RodAxis::Y);
        if which.wall {
            set = set
                .add(center, self.outer_radius, materials.tube.clone(), 1.0)
                .add(center, self.inner_radius(), materials.tube.clone(), -1.0);
        }
        if which.fill {
            set = set
                .add(center, self.inner_radius(), materials.fill.clone(), 1.0)
                .add(rod_c, self.rod_radius, materials.fill.clone(), -1.0);
        }
        if which.rod {
            set = set.add(rod_c, self.rod_radius, materials.rod.clone(), 1.0);
        }
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TubeComponents {
    pub wall: bool,
    pub fill: bool,
    pub rod: bool,
}

impl TubeComponents {
    pub const ALL: Self = Self {
        wall: true,
        fill: true,
        rod: true,
    };
}

/// Plastic tube filled with liquid and holding a rod, centred in the field
/// of view with all axes along y.
pub fn tube_phantom(
    tube: &TubeGeometry,
    materials: &TubeMaterials,
    geometry: &ImagingGeometry,
) -> Result<ProjectedObject> {
    tube.validate()?;
    let c = across_center(geometry, RodAxis::Y);
    tube.cylinder_set(materials, c, TubeComponents::ALL)
        .project(geometry)
}

/// Smooth Gaussian phase bump `φ = -A g`, `T = exp(-B g)` with
/// `g = exp(-r² / 2σ²)` centred in the field of view.
pub fn gaussian_phantom(
    phase_amplitude: f64,
    absorption: f64,
    sigma: f64,
    geometry: &ImagingGeometry,
) -> Result<ProjectedObject> {
    if !(sigma > 0.0) || !(absorption >= 0.0) {
        return Err(Error::InvalidPhantom("gaussian needs sigma > 0 and absorption >= 0".into()));
    }
    let (xc, yc) = (0.5 * geometry.width(), 0.5 * geometry.height());
    let shape = geometry.fine_shape();
    let s2 = sigma * sigma;
    let eval = |i: usize, j: usize| {
        let x = geometry.fine_x(j) - xc;
        let y = geometry.fine_y(i) - yc;
        let r2 = x * x + y * y;
        (x, r2, (-r2 / (2.0 * s2)).exp())
    };
    let a = phase_amplitude;
    Ok(ProjectedObject {
        spacing_x: geometry.dx(),
        spacing_y: geometry.dy(),
        transmission: Array2::from_shape_fn(shape, |(i, j)| (-absorption * eval(i, j).2).exp()),
        phase: Array2::from_shape_fn(shape, |(i, j)| -a * eval(i, j).2),
        dphi_dx: Array2::from_shape_fn(shape, |(i, j)| {
            let (x, _, g) = eval(i, j);
            a * g * x / s2
        }),
        lap_phi: Array2::from_shape_fn(shape, |(i, j)| {
            let (_, r2, g) = eval(i, j);
            -a * g * (r2 / (s2 * s2) - 2.0 / s2)
        }),
        rim_band: Array2::from_elem(shape, false),
    })
}

/// `φ = a x` with unit transmission.
pub fn linear_phase(slope: f64, geometry: &ImagingGeometry) -> ProjectedObject {
    let shape = geometry.fine_shape();
    let mut obj = ProjectedObject::vacuum(geometry);
    obj.phase = Array2::from_shape_fn(shape, |(_, j)| slope * geometry.fine_x(j));
    obj.dphi_dx.fill(slope);
    obj
}
