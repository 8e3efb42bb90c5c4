//! Periodic absorption mask described by a cosine Fourier series.
//!
//! The mask period is twice the detector pixel size. In the mask frame the
//! series is even about `x = 0`, so `x = 0` is the centre of an open region
//! and `x = p` the centre of a blocking strip.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Slack allowed when checking `0 <= M(x) <= 1` on a reconstructed series.
pub const PHYSICALITY_TOLERANCE: f64 = 1e-6;

/// Default truncation order for analytic binary masks.
pub const DEFAULT_SQUARE_HARMONICS: usize = 51;

/// Where a mask's coefficients came from.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSource {
    /// Coefficients given directly.
    Fourier,
    /// Analytic series of a binary strip mask with the given open width.
    Square { aperture: f64 },
    /// Projected from a sampled transmission profile.
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    coefficients: Vec<f64>,
    period: f64,
    phase_offset: f64,
    source: MaskSource,
}

/// The two numbers that carry the whole mask dependence of the closed-form model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskParameters {
    /// Effective aperture `C_0 p`, metres.
    pub w_e: f64,
    /// Contrast `2 Σ C_{2m+1}`.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physicality {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl Physicality {
    pub fn is_physical(&self) -> bool {
        self.min >= -PHYSICALITY_TOLERANCE && self.max <= 1.0 + PHYSICALITY_TOLERANCE
    }
}

impl MaskParameters {
    pub fn new(w_e: f64, alpha: f64) -> Result<Self> {
        if !(w_e.is_finite() && w_e > 0.0) {
            return Err(Error::InvalidMask(format!("effective aperture must be > 0, got {w_e}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidMask(format!("contrast must be >= 0, got {alpha}")));
        }
        Ok(Self { w_e, alpha })
    }
}

fn check_common(coefficients: &[f64], period: f64, phase_offset: f64) -> Result<()> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidMask(format!("period must be > 0, got {period}")));
    }
    if !phase_offset.is_finite() {
        return Err(Error::InvalidMask("phase offset must be finite".into()));
    }
    let c0 = match coefficients.first() {
        Some(&c) => c,
        None => return Err(Error::InvalidMask("no coefficients".into())),
    };
    if !(c0 > 0.0 && c0 <= 1.0) {
        return Err(Error::InvalidMask(format!("mean transmission C_0 must lie in (0, 1], got {c0}")));
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidMask("non-finite coefficient".into()));
    }
    Ok(())
}

impl MaskSpec {
    /// Mask from explicit coefficients. The reconstructed transmission must
    /// stay inside `[0, 1]`.
    pub fn new(coefficients: Vec<f64>, period: f64, phase_offset: f64) -> Result<Self> {
        check_common(&coefficients, period, phase_offset)?;
        let mask = Self {
            coefficients,
            period,
            phase_offset,
            source: MaskSource::Fourier,
        };
        let phys = mask.physicality();
        if !phys.is_physical() {
            return Err(Error::InvalidMask(format!(
                "transmission leaves [0, 1]: min {:.6}, max {:.6}",
                phys.min, phys.max
            )));
        }
        Ok(mask)
    }

    /// Binary strip mask: open width `aperture` centred on `x = 0`, series
    /// truncated at `m_max`. Built from the analytic rectangle-wave series,
    /// so the Gibbs ripple of the truncation is not subject to the
    /// physicality check.
    pub fn square(aperture: f64, period: f64, phase_offset: f64, m_max: usize) -> Result<Self> {
        if !(aperture > 0.0 && aperture <= period) {
            return Err(Error::InvalidMask(format!(
                "aperture must lie in (0, period], got {aperture} for period {period}"
            )));
        }
        if m_max < 1 {
            return Err(Error::InvalidMask("m_max must be >= 1".into()));
        }
        let duty = aperture / period;
        let mut coefficients = Vec::with_capacity(m_max + 1);
        coefficients.push(duty);
        for m in 1..=m_max {
            let m = m as f64;
            coefficients.push(2.0 / (m * PI) * (m * PI * duty).sin());
        }
        check_common(&coefficients, period, phase_offset)?;
        Ok(Self {
            coefficients,
            period,
            phase_offset,
            source: MaskSource::Square { aperture },
        })
    }

    /// `M(x) = 0.5 + 0.5 cos(2πx / period)`.
    pub fn raised_cosine(period: f64, phase_offset: f64) -> Result<Self> {
        Self::new(vec![0.5, 0.5], period, phase_offset)
    }

    /// Fully transparent mask (`M = 1`).
    pub fn open(period: f64) -> Result<Self> {
        Self::new(vec![1.0], period, 0.0)
    }

    pub(crate) fn from_parts_unchecked(
        coefficients: Vec<f64>,
        period: f64,
        phase_offset: f64,
        source: MaskSource,
    ) -> Result<Self> {
        check_common(&coefficients, period, phase_offset)?;
        Ok(Self {
            coefficients,
            period,
            phase_offset,
            source,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// The detector pixel size this mask is matched to (half the period).
    pub fn pixel_size(&self) -> f64 {
        0.5 * self.period
    }

    pub fn phase_offset(&self) -> f64 {
        self.phase_offset
    }

    pub fn source(&self) -> &MaskSource {
        &self.source
    }

    pub fn with_phase_offset(mut self, phase_offset: f64) -> Self {
        self.phase_offset = phase_offset;
        self
    }

    /// Highest harmonic index with a non-zero coefficient.
    pub fn max_harmonic(&self) -> usize {
        self.coefficients
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }

    fn angular(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn transmission_at(&self, x: f64) -> f64 {
        let w = self.angular();
        let u = x - self.phase_offset;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(m, &c)| c * (w * m as f64 * u).cos())
            .sum()
    }

    /// Analytic derivative `dM/dx`.
    pub fn slope_at(&self, x: f64) -> f64 {
        let w = self.angular();
        let u = x - self.phase_offset;
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(m, &c)| {
                let km = w * m as f64;
                -c * km * (km * u).sin()
            })
            .sum()
    }

    /// Exact `∫_a^b M(x) dx` of the series.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let w = self.angular();
        let (ua, ub) = (a - self.phase_offset, b - self.phase_offset);
        let mut acc = self.coefficients[0] * (b - a);
        for (m, &c) in self.coefficients.iter().enumerate().skip(1) {
            let km = w * m as f64;
            acc += c / km * ((km * ub).sin() - (km * ua).sin());
        }
        acc
    }

    /// `w_e = C_0 p`.
    pub fn effective_aperture(&self) -> f64 {
        self.coefficients[0] * self.pixel_size()
    }

    /// `α = 2 Σ C_{2m+1}` over odd indices up to `m_max`.
    pub fn contrast_alpha(&self, m_max: usize) -> f64 {
        2.0 * self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .step_by(2)
            .take_while(|(m, _)| *m <= m_max)
            .map(|(_, &c)| c)
            .sum::<f64>()
    }

    pub fn parameters(&self) -> MaskParameters {
        MaskParameters {
            w_e: self.effective_aperture(),
            alpha: self.contrast_alpha(self.coefficients.len()),
        }
    }

    /// Samples the series over one period and reports its range.
    pub fn physicality(&self) -> Physicality {
        let samples = 64.max(16 * self.coefficients.len());
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..samples {
            let x = self.phase_offset + self.period * i as f64 / samples as f64;
            let v = self.transmission_at(x);
            min = min.min(v);
            max = max.max(v);
        }
        Physicality { min, max, samples }
    }
}

/// Projects a sampled transmission profile onto the cosine basis.
///
/// Samples must be uniformly spaced and cover at least one period; the first
/// `period / dx` samples starting at the smallest `x` are used with the
/// rectangle rule, which is exact for trigonometric polynomials below the
/// Nyquist order. Any odd (sine) part of the profile is discarded.
pub fn fourier_from_profile(samples: &[(f64, f64)], period: f64, m_max: usize) -> Result<MaskSpec> {
    if m_max < 1 {
        return Err(Error::InvalidMask("m_max must be >= 1".into()));
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidMask(format!("period must be > 0, got {period}")));
    }
    if samples.len() < 2 {
        return Err(Error::InsufficientSampling("need at least two samples".into()));
    }
    let mut pts = samples.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let dx = pts[1].0 - pts[0].0;
    if !(dx > 0.0) {
        return Err(Error::InsufficientSampling("duplicate sample positions".into()));
    }
    for w in pts.windows(2) {
        let step = w[1].0 - w[0].0;
        if (step - dx).abs() > 1e-6 * dx {
            return Err(Error::InsufficientSampling(format!(
                "samples must be uniformly spaced (found steps {dx:e} and {step:e})"
            )));
        }
    }
    let per_period = (period / dx).round() as usize;
    if ((per_period as f64) * dx - period).abs() > 1e-6 * period {
        return Err(Error::InsufficientSampling(format!(
            "sample spacing {dx:e} does not divide the period {period:e}"
        )));
    }
    if pts.len() < per_period {
        return Err(Error::InsufficientSampling(format!(
            "samples cover {} of the {per_period} points in one period",
            pts.len()
        )));
    }
    if per_period < 2 * m_max || pts.len() < 4 * m_max {
        return Err(Error::InsufficientSampling(format!(
            "{per_period} samples per period cannot resolve harmonics up to m = {m_max}"
        )));
    }
    if let Some(&(x, v)) = pts.iter().find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(v))) {
        return Err(Error::InvalidMask(format!("transmission {v} at x = {x} outside [0, 1]")));
    }

    let one_period = &pts[..per_period];
    let n = per_period as f64;
    let w = 2.0 * PI / period;
    let coefficients = (0..=m_max)
        .map(|m| {
            let s: f64 = one_period
                .iter()
                .map(|&(x, v)| v * (w * m as f64 * x).cos())
                .sum();
            if m == 0 {
                s / n
            } else {
                2.0 * s / n
            }
        })
        .collect();
    MaskSpec::from_parts_unchecked(coefficients, period, 0.0, MaskSource::Sampled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const P: f64 = 27.5e-6;

    #[test]
    fn raised_cosine_endpoints() {
        let m = MaskSpec::raised_cosine(2.0 * P, 0.0).unwrap();
        assert_relative_eq!(m.transmission_at(0.0), 1.0, epsilon = 1e-15);
        assert!(m.transmission_at(P).abs() < 1e-15);
        assert_relative_eq!(m.effective_aperture(), 13.75e-6, max_relative = 1e-12);
        assert_relative_eq!(m.contrast_alpha(101), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn square_open_at_aperture_centre() {
        let m = MaskSpec::square(P, 2.0 * P, 0.0, 101).unwrap();
        assert!((m.transmission_at(0.0) - 1.0).abs() < 0.02);
        assert_relative_eq!(m.effective_aperture(), P / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn open_mask_has_no_contrast() {
        let m = MaskSpec::open(2.0 * P).unwrap();
        assert_eq!(m.contrast_alpha(51), 0.0);
        assert_relative_eq!(m.effective_aperture(), P);
    }

    #[test]
    fn rejects_unphysical_series() {
        assert!(MaskSpec::new(vec![0.5, 0.7], 2.0 * P, 0.0).is_err());
        assert!(MaskSpec::new(vec![0.0, 0.0], 2.0 * P, 0.0).is_err());
        assert!(MaskSpec::new(vec![1.2], 2.0 * P, 0.0).is_err());
        assert!(MaskSpec::new(vec![0.5], -1.0, 0.0).is_err());
    }

    #[test]
    fn alpha_truncation() {
        let m = MaskSpec::new(vec![0.4, 0.3, 0.1, 0.1], 2.0 * P, 0.0).unwrap();
        assert_relative_eq!(m.contrast_alpha(1), 0.6, epsilon = 1e-15);
        assert_relative_eq!(m.contrast_alpha(3), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn integral_matches_slope() {
        let m = MaskSpec::square(8.12e-6, 2.0 * P, 1e-6, 21).unwrap();
        let (a, b) = (0.3 * P, 1.7 * P);
        // ∫ M' = M(b) - M(a), checked by fine midpoint quadrature of the slope
        let n = 200_000;
        let h = (b - a) / n as f64;
        let q: f64 = (0..n).map(|i| m.slope_at(a + (i as f64 + 0.5) * h) * h).sum();
        assert_relative_eq!(q, m.transmission_at(b) - m.transmission_at(a), epsilon = 1e-6);
        let qi: f64 = (0..n).map(|i| m.transmission_at(a + (i as f64 + 0.5) * h) * h).sum();
        assert_relative_eq!(qi, m.integral(a, b), max_relative = 1e-8);
    }

    #[test]
    fn profile_rejects_undersampling() {
        let samples: Vec<_> = (0..10).map(|i| (i as f64 * P / 5.0, 0.5)).collect();
        assert!(matches!(
            fourier_from_profile(&samples, 2.0 * P, 8),
            Err(Error::InsufficientSampling(_))
        ));
    }

    #[test]
    fn profile_rejects_nonuniform() {
        let samples = vec![(0.0, 1.0), (1e-6, 1.0), (3e-6, 1.0), (4e-6, 1.0)];
        assert!(fourier_from_profile(&samples, 4e-6, 1).is_err());
    }

    #[test]
    fn constant_profile() {
        let samples: Vec<_> = (0..64).map(|i| (i as f64 * 2.0 * P / 64.0, 1.0)).collect();
        let m = fourier_from_profile(&samples, 2.0 * P, 8).unwrap();
        assert_relative_eq!(m.coefficients()[0], 1.0, epsilon = 1e-14);
        assert!(m.coefficients()[1..].iter().all(|c| c.abs() < 1e-14));
    }
}
