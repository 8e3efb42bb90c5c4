//! Command implementations behind the `smpci` binary.
//!
//! Every command reads a [`RunConfig`], writes its files into one output
//! directory and finishes with a `manifest-<command>.sha256` listing each
//! written file and its SHA-256 digest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use smpci_core::compare::{self, Region, RegionStats, SignAgreement};
use smpci_core::config::{ForwardModel, RunConfig};
use smpci_core::mask::MaskSource;
use smpci_core::{forward, io, oracle, retrieval};
use smpci_core::{DetectorImage, ErrorCategory, ImageKind, ProjectedObject};

mod output;

pub use output::OutputDir;

const UM: f64 = 1e-6;

/// Fringe-region threshold, relative to the peak model fringe amplitude
/// inside the object.
pub const FRINGE_THRESHOLD: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: smpci_core::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core { source, .. } => match source.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Numerical => 3,
                ErrorCategory::Io => 4,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

trait Context<T> {
    fn context(self, what: &str) -> CliResult<T>;
}

impl<T> Context<T> for smpci_core::Result<T> {
    fn context(self, what: &str) -> CliResult<T> {
        self.map_err(|source| CliError::Core {
            context: what.to_string(),
            source,
        })
    }
}

/// Flags shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// `retrieve` inputs; default to the closed-form (or integrated) images
    /// written by `simulate` in the output directory.
    pub raw: Option<PathBuf>,
    pub flat: Option<PathBuf>,
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    RunConfig::from_path(path).context("reading configuration")
}

fn open_output(cfg: &RunConfig, opts: &Options) -> CliResult<OutputDir> {
    let root = opts
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    OutputDir::create(&root, cfg.output.previews).context("creating output directory")
}

fn fmt_num(v: f64) -> String {
    // Shortest round-trip form, with floating noise below 1e-12 removed.
    let r = (v * 1e12).round() / 1e12;
    format!("{r}")
}

// mask-analyze

#[derive(Debug, Clone, Serialize)]
pub struct MaskReport {
    pub source: String,
    pub period_um: f64,
    pub pixel_size_um: f64,
    pub harmonics: usize,
    pub w_e_um: f64,
    pub alpha: f64,
    pub physical: bool,
    pub min_transmission: f64,
    pub max_transmission: f64,
    pub dpc_sensitive: bool,
}

impl MaskReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "source = {}", self.source);
        let _ = writeln!(s, "period_um = {}", fmt_num(self.period_um));
        let _ = writeln!(s, "pixel_size_um = {}", fmt_num(self.pixel_size_um));
        let _ = writeln!(s, "harmonics = {}", self.harmonics);
        let _ = writeln!(s, "w_e_um = {}", fmt_num(self.w_e_um));
        let _ = writeln!(s, "alpha = {}", fmt_num(self.alpha));
        let _ = writeln!(s, "physical = {}", self.physical);
        let _ = writeln!(
            s,
            "series_range = [{:.6}, {:.6}]",
            self.min_transmission, self.max_transmission
        );
        if !self.dpc_sensitive {
            let _ = writeln!(s, "warning: alpha = 0, no DPC sensitivity");
        }
        s
    }
}

/// Samples in the reconstructed-profile CSV.
const PROFILE_SAMPLES: usize = 512;

pub fn mask_analyze(cfg: &RunConfig, opts: &Options) -> CliResult<(MaskReport, PathBuf)> {
    let mask = cfg.mask().context("building mask")?;
    let params = mask.parameters();
    let phys = mask.physicality();
    let source = match mask.source() {
        MaskSource::Fourier => "fourier".to_string(),
        MaskSource::Square { aperture } => format!("square (aperture {} um)", fmt_num(aperture / UM)),
        MaskSource::Sampled => "sampled".to_string(),
    };
    let report = MaskReport {
        source,
        period_um: mask.period() / UM,
        pixel_size_um: mask.pixel_size() / UM,
        harmonics: mask.max_harmonic(),
        w_e_um: params.w_e / UM,
        alpha: params.alpha,
        // Binary and sampled masks are checked on their source profile when
        // built; their truncated series ring (Gibbs) and is reported only.
        physical: match mask.source() {
            MaskSource::Fourier => phys.is_physical(),
            _ => true,
        },
        min_transmission: phys.min,
        max_transmission: phys.max,
        dpc_sensitive: params.alpha.abs() > 1e-12,
    };
    let mut out = open_output(cfg, opts)?;
    let rows: Vec<Vec<f64>> = (0..PROFILE_SAMPLES)
        .map(|i| {
            let x = mask.phase_offset() + mask.period() * i as f64 / PROFILE_SAMPLES as f64;
            vec![x / UM, mask.transmission_at(x)]
        })
        .collect();
    out.csv("mask_profile.csv", &["x_um", "transmission"], &rows)
        .context("writing mask profile")?;
    out.text("mask_report.txt", &report.render())
        .context("writing mask report")?;
    let manifest = out.finish("mask-analyze").context("writing manifest")?;
    Ok((report, manifest))
}

// phantom-gen

pub fn phantom_gen(cfg: &RunConfig, opts: &Options) -> CliResult<PathBuf> {
    let geom = cfg.geometry().context("building geometry")?;
    let obj = cfg.phantom(&geom).context("projecting phantom")?;
    let mut out = open_output(cfg, opts)?;
    out.object("object", &obj).context("writing object")?;
    out.csv("phantom_profile.csv", &["x_um", "transmission", "phase_rad", "dphi_dx", "lap_phi"], &object_profile(&obj))
        .context("writing phantom profile")?;
    out.finish("phantom-gen").context("writing manifest")
}

/// Middle fine row of the object fields.
fn object_profile(obj: &ProjectedObject) -> Vec<Vec<f64>> {
    let (rows, cols) = obj.shape();
    let r = rows / 2;
    (0..cols)
        .map(|j| {
            vec![
                (j as f64 + 0.5) * obj.spacing_x / UM,
                obj.transmission[[r, j]],
                obj.phase[[r, j]],
                obj.dphi_dx[[r, j]],
                obj.lap_phi[[r, j]],
            ]
        })
        .collect()
}

// simulate

fn model_names(model: ForwardModel) -> &'static [&'static str] {
    match model {
        ForwardModel::Closed => &["closed"],
        ForwardModel::Integrated => &["integrated"],
        ForwardModel::Both => &["closed", "integrated"],
    }
}

pub fn simulate(cfg: &RunConfig, opts: &Options) -> CliResult<PathBuf> {
    let geom = cfg.geometry().context("building geometry")?;
    let mask = cfg.mask().context("building mask")?;
    let params = mask.parameters();
    let obj = cfg.phantom(&geom).context("projecting phantom")?;
    let vacuum = ProjectedObject::vacuum(&geom);
    let seed = opts.seed.unwrap_or_else(|| cfg.noise_seed());
    let mut out = open_output(cfg, opts)?;

    for &model in model_names(cfg.output.model) {
        let (flat, raw) = match model {
            "closed" => (
                forward::forward_sm_closed(&vacuum, &params, &geom),
                forward::forward_sm_closed(&obj, &params, &geom),
            ),
            _ => (
                forward::forward_sm_integrated(&vacuum, &mask, &geom),
                forward::forward_sm_integrated(&obj, &mask, &geom),
            ),
        };
        let flat = flat.context("simulating flat field")?;
        let raw = raw.context("simulating single-mask image")?;
        let mut flat = flat;
        flat.kind = ImageKind::FlatField;
        out.image(&format!("flat_{model}"), &flat).context("writing flat field")?;
        out.image(&format!("raw_sm_{model}"), &raw).context("writing raw image")?;
        if let Some(noise) = cfg.noise.as_ref().filter(|n| n.enabled) {
            let noisy_raw = forward::add_poisson_noise(&raw, noise.mean_counts, seed)
                .context("adding noise to raw image")?;
            let noisy_flat = forward::add_poisson_noise(&flat, noise.mean_counts, seed.wrapping_add(1))
                .context("adding noise to flat field")?;
            out.image(&format!("raw_sm_{model}_noisy"), &noisy_raw)
                .context("writing noisy raw image")?;
            out.image(&format!("flat_{model}_noisy"), &noisy_flat)
                .context("writing noisy flat field")?;
        }
    }
    if cfg.output.pb_reference {
        let pb = forward::forward_pb(&obj, &geom).context("simulating propagation-based reference")?;
        out.image("raw_pb", &pb).context("writing propagation-based reference")?;
    }
    out.finish("simulate").context("writing manifest")
}

// retrieve

#[derive(Debug, Clone)]
pub struct RetrieveSummary {
    pub manifest: PathBuf,
    pub invalid_pairs: usize,
    pub pb_profile: Vec<f64>,
    pub dpc_profile: Vec<f64>,
}

pub fn retrieve(cfg: &RunConfig, opts: &Options) -> CliResult<RetrieveSummary> {
    let params = cfg.mask_parameters().context("deriving mask parameters")?;
    if params.alpha == 0.0 {
        return Err(CliError::Core {
            context: "refusing differential-phase retrieval: the mask has no contrast between \
                      neighbouring pixels, so the difference signal carries no phase information"
                .into(),
            source: smpci_core::Error::ZeroContrast,
        });
    }
    let mut out = open_output(cfg, opts)?;
    let default_model = model_names(cfg.output.model)[0];
    let raw_path = opts
        .raw
        .clone()
        .unwrap_or_else(|| out.path(&format!("raw_sm_{default_model}.hdr")));
    let flat_path = opts
        .flat
        .clone()
        .unwrap_or_else(|| out.path(&format!("flat_{default_model}.hdr")));
    let raw = io::read_image(&raw_path).context(&format!("reading {}", raw_path.display()))?;
    let flat = io::read_image(&flat_path).context(&format!("reading {}", flat_path.display()))?;
    let corrected = retrieval::flat_field_correct(&raw, &flat).context("flat-field correction")?;
    let parity = cfg
        .retrieval
        .parity_origin
        .or(cfg.geometry.as_ref().map(|g| g.parity_origin))
        .unwrap_or(0);
    let pairing = cfg.retrieval.pairing;
    let result = retrieval::retrieve(&corrected, &params, pairing, parity).context("retrieval")?;

    out.image("pb", &result.pb).context("writing pb image")?;
    out.image("dpc", &result.dpc).context("writing dpc image")?;
    let valid = DetectorImage::new(
        result.valid.mapv(|v| if v { 1.0 } else { 0.0 }),
        result.pb.pixel_size,
        ImageKind::Diagnostic,
    )
    .with_note("quantity", "valid_pair");
    out.image("valid", &valid).context("writing validity mask")?;

    let pb_profile = forward::cross_section(&result.pb);
    let dpc_profile = forward::cross_section(&result.dpc);
    let valid_profile = forward::cross_section(&valid);
    let rows: Vec<Vec<f64>> = (0..pb_profile.len())
        .map(|j| {
            let left = pairing.left_column(j) as f64;
            vec![
                j as f64,
                (left + 1.0) * corrected.pixel_size / UM,
                pb_profile[j],
                dpc_profile[j] / UM,
                valid_profile[j],
            ]
        })
        .collect();
    out.csv("retrieval_profile.csv", &["column", "x_um", "pb", "dpc_um", "valid_fraction"], &rows)
        .context("writing cross-section")?;
    let manifest = out.finish("retrieve").context("writing manifest")?;
    Ok(RetrieveSummary {
        manifest,
        invalid_pairs: result.invalid_count(),
        pb_profile,
        dpc_profile,
    })
}

// compare

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub manifest: PathBuf,
    pub stats: Vec<RegionStats>,
    pub signs: SignAgreement,
    pub model_profile: Vec<f64>,
    pub oracle_profile: Vec<f64>,
    pub regions: Vec<Region>,
}

impl CompareReport {
    pub fn region(&self, name: &str) -> Option<&RegionStats> {
        self.stats.iter().find(|s| s.region == name)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("region      samples  rms_rel      max_rel\n");
        for st in &self.stats {
            let _ = writeln!(
                s,
                "{:<11} {:>7}  {:.6e}  {:.6e}",
                st.region, st.samples, st.rms_relative, st.max_relative
            );
        }
        let _ = writeln!(
            s,
            "fringe signs agree on {} of {} fringe-region columns",
            self.signs.agree, self.signs.total
        );
        s
    }
}

/// Flat-field-corrected closed-form model against the wave oracle on the
/// same scene and grid.
pub fn compare(cfg: &RunConfig, opts: &Options) -> CliResult<CompareReport> {
    let geom = cfg.oracle_geometry().context("building geometry")?;
    let mask = cfg.mask().context("building mask")?;
    let params = mask.parameters();
    let obj = cfg.phantom(&geom).context("projecting phantom")?;
    let vacuum = ProjectedObject::vacuum(&geom);
    let oracle_opts = cfg.oracle_options();

    let model_raw = forward::forward_sm_closed(&obj, &params, &geom).context("closed-form model")?;
    let model_flat = forward::forward_sm_closed(&vacuum, &params, &geom).context("closed-form flat")?;
    let oracle_raw = oracle::simulate(&obj, Some(&mask), &geom, &oracle_opts).context("wave oracle")?;
    let oracle_flat =
        oracle::simulate(&vacuum, Some(&mask), &geom, &oracle_opts).context("wave oracle flat field")?;
    let model_c = retrieval::flat_field_correct(&model_raw, &model_flat).context("model correction")?;
    let oracle_c = retrieval::flat_field_correct(&oracle_raw, &oracle_flat).context("oracle correction")?;
    let model_profile = forward::cross_section(&model_c);
    let oracle_profile = forward::cross_section(&oracle_c);

    let regions = match cfg.phantom_extent(&geom) {
        Some((center, radius)) => compare::classify_columns(
            geom.n_pixels_x,
            geom.pixel_size,
            center,
            radius,
            cfg.oracle.interior_fraction,
        ),
        None => vec![Region::Background; geom.n_pixels_x],
    };
    let stats = compare::region_stats(&oracle_profile, &model_profile, &regions).context("statistics")?;
    let inside: Vec<bool> = regions.iter().map(|r| *r != Region::Background).collect();
    let signs = compare::fringe_sign_agreement(&oracle_profile, &model_profile, FRINGE_THRESHOLD, &inside);

    let mut out = open_output(cfg, opts)?;
    out.image("model_raw", &model_raw).context("writing model image")?;
    out.image("oracle_raw", &oracle_raw).context("writing oracle image")?;
    out.image("oracle_flat", &oracle_flat).context("writing oracle flat field")?;
    let rows: Vec<Vec<f64>> = (0..model_profile.len())
        .map(|n| {
            let code = match regions[n] {
                Region::Interior => 0.0,
                Region::Rim => 1.0,
                Region::Background => 2.0,
            };
            vec![
                n as f64,
                (n as f64 + 0.5) * geom.pixel_size / UM,
                model_profile[n],
                oracle_profile[n],
                (oracle_profile[n] - model_profile[n]) / model_profile[n],
                code,
            ]
        })
        .collect();
    out.csv(
        "compare_profiles.csv",
        &["column", "x_um", "model", "oracle", "relative_difference", "region"],
        &rows,
    )
    .context("writing profiles")?;
    let mut stats_csv = String::from("region,samples,rms_relative,max_relative\n");
    for s in &stats {
        let _ = writeln!(stats_csv, "{},{},{:e},{:e}", s.region, s.samples, s.rms_relative, s.max_relative);
    }
    out.text("compare_stats.csv", &stats_csv).context("writing statistics")?;
    let mut report = CompareReport {
        manifest: PathBuf::new(),
        stats,
        signs,
        model_profile,
        oracle_profile,
        regions,
    };
    let mut text = report.render();
    let _ = writeln!(text, "region codes in compare_profiles.csv: 0 interior, 1 rim, 2 background");
    out.text("compare_report.txt", &text).context("writing report")?;
    report.manifest = out.finish("compare").context("writing manifest")?;
    Ok(report)
}
