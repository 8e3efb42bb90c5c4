use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use smpci::{CliResult, Options};

#[derive(Parser)]
#[command(name = "smpci", version, about = "Single-mask X-ray phase contrast simulation and retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "smpci.toml")]
    config: PathBuf,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Noise seed; overrides `noise.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Report w_e, alpha and the reconstructed transmission profile.
    MaskAnalyze,
    /// Project the configured phantom onto the fine grid.
    PhantomGen,
    /// Flat field, single-mask image(s), PB reference and noisy variants.
    Simulate,
    /// Separate a single-mask image into PB and DPC images.
    Retrieve {
        /// Raw single-mask image (`.hdr`); defaults to the simulate output.
        #[arg(long)]
        raw: Option<PathBuf>,
        /// Flat field (`.hdr`); defaults to the simulate output.
        #[arg(long)]
        flat: Option<PathBuf>,
    },
    /// Closed-form model against the wave-optics oracle.
    Compare,
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = smpci::load_config(&cli.config)?;
    let mut opts = Options {
        out: cli.out,
        seed: cli.seed,
        ..Options::default()
    };
    let manifest = match cli.command {
        Command::MaskAnalyze => {
            let (report, manifest) = smpci::mask_analyze(&cfg, &opts)?;
            print!("{}", report.render());
            if !report.dpc_sensitive {
                eprintln!("warning: no DPC sensitivity (alpha = 0)");
            }
            manifest
        }
        Command::PhantomGen => smpci::phantom_gen(&cfg, &opts)?,
        Command::Simulate => smpci::simulate(&cfg, &opts)?,
        Command::Retrieve { raw, flat } => {
            opts.raw = raw;
            opts.flat = flat;
            let summary = smpci::retrieve(&cfg, &opts)?;
            if summary.invalid_pairs > 0 {
                eprintln!("warning: {} pixel pairs had non-positive sums", summary.invalid_pairs);
            }
            summary.manifest
        }
        Command::Compare => {
            let report = smpci::compare(&cfg, &opts)?;
            print!("{}", report.render());
            report.manifest
        }
    };
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
