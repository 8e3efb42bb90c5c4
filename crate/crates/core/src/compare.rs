//! Region statistics for comparing two cross-section profiles.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// `|s| < fraction * R`.
    Interior,
    /// `fraction * R <= |s| <= R`.
    Rim,
    /// Everything else.
    Background,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Interior => "interior",
            Region::Rim => "rim",
            Region::Background => "background",
        }
    }
}

/// Region of each pixel column given the object centre and radius (metres).
pub fn classify_columns(
    width: usize,
    pixel_size: f64,
    center: f64,
    radius: f64,
    interior_fraction: f64,
) -> Vec<Region> {
    (0..width)
        .map(|n| {
            let s = ((n as f64 + 0.5) * pixel_size - center).abs();
            if s < interior_fraction * radius {
                Region::Interior
            } else if s <= radius {
                Region::Rim
            } else {
                Region::Background
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionStats {
    pub region: String,
    pub samples: usize,
    /// RMS of `(test - reference) / reference`.
    pub rms_relative: f64,
    pub max_relative: f64,
}

fn stats_over<'a>(name: &str, pairs: impl Iterator<Item = (&'a f64, &'a f64)>) -> RegionStats {
    let (mut n, mut sum2, mut max) = (0usize, 0.0, 0.0f64);
    for (t, r) in pairs {
        let rel = (t - r) / r;
        n += 1;
        sum2 += rel * rel;
        max = max.max(rel.abs());
    }
    RegionStats {
        region: name.to_string(),
        samples: n,
        rms_relative: if n > 0 { (sum2 / n as f64).sqrt() } else { 0.0 },
        max_relative: max,
    }
}

/// Per-region relative differences of `test` against `reference`.
pub fn region_stats(test: &[f64], reference: &[f64], regions: &[Region]) -> Result<Vec<RegionStats>> {
    if test.len() != reference.len() || test.len() != regions.len() {
        return Err(Error::Dimensions(format!(
            "profiles of length {} and {} with {} region labels",
            test.len(),
            reference.len(),
            regions.len()
        )));
    }
    if reference.contains(&0.0) {
        return Err(Error::InvalidArgument("reference profile contains zeros".into()));
    }
    let mut out = Vec::new();
    for region in [Region::Interior, Region::Rim, Region::Background] {
        let it = test
            .iter()
            .zip(reference)
            .zip(regions)
            .filter(|(_, g)| **g == region)
            .map(|(p, _)| p);
        out.push(stats_over(region.as_str(), it));
    }
    out.push(stats_over("all", test.iter().zip(reference)));
    Ok(out)
}

/// Sign of `I_n - (I_{n-1} + I_{n+1}) / 2`; 0 at the two ends.
pub fn fringe_signs(profile: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; profile.len()];
    for n in 1..profile.len().saturating_sub(1) {
        let d = profile[n] - 0.5 * (profile[n - 1] + profile[n + 1]);
        out[n] = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignAgreement {
    pub agree: usize,
    pub total: usize,
}

impl SignAgreement {
    pub fn all_agree(&self) -> bool {
        self.total > 0 && self.agree == self.total
    }
}

/// Compares fringe signs on the fringe region: columns inside the object
/// (`within`) where the reference's fringe amplitude exceeds `threshold`
/// times its maximum over the object.
pub fn fringe_sign_agreement(
    test: &[f64],
    reference: &[f64],
    threshold: f64,
    within: &[bool],
) -> SignAgreement {
    let amp: Vec<f64> = (0..reference.len())
        .map(|n| {
            if n == 0 || n + 1 >= reference.len() || !within[n] {
                0.0
            } else {
                (reference[n] - 0.5 * (reference[n - 1] + reference[n + 1])).abs()
            }
        })
        .collect();
    let peak = amp.iter().cloned().fold(0.0, f64::max);
    let (st, sr) = (fringe_signs(test), fringe_signs(reference));
    let mut agree = 0;
    let mut total = 0;
    for n in 0..amp.len() {
        if peak > 0.0 && amp[n] > threshold * peak {
            total += 1;
            if st[n] == sr[n] {
                agree += 1;
            }
        }
    }
    SignAgreement { agree, total }
}

/// Visibility of one component of a scene in a profile: RMS over `region`
/// of `full - without`, relative to the RMS of `full - baseline` over
/// `object`. `without` is the same scene with the component replaced by its
/// surroundings.
pub fn component_visibility(
    full: &[f64],
    without: &[f64],
    baseline: f64,
    region: &[bool],
    object: &[bool],
) -> Result<f64> {
    let n = full.len();
    if without.len() != n || region.len() != n || object.len() != n {
        return Err(Error::Dimensions("visibility inputs differ in length".into()));
    }
    let rms = |sel: &[bool], f: &dyn Fn(usize) -> f64| {
        let (mut s, mut c) = (0.0, 0usize);
        for i in (0..n).filter(|i| sel[*i]) {
            s += f(i).powi(2);
            c += 1;
        }
        if c == 0 {
            None
        } else {
            Some((s / c as f64).sqrt())
        }
    };
    let signal = rms(region, &|i| full[i] - without[i])
        .ok_or_else(|| Error::InvalidArgument("empty component region".into()))?;
    let scale = rms(object, &|i| full[i] - baseline)
        .filter(|s| *s > 0.0)
        .ok_or_else(|| Error::InvalidArgument("object region has no contrast".into()))?;
    Ok(signal / scale)
}
