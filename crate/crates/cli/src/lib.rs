//! Library side of the `sarpose` binary: argument parsing and subcommands.

pub mod commands;
pub mod config;
pub mod corpus;
pub mod quicklook;
pub mod scene;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{parse_shift, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "sarpose",
    version,
    about = "Sparse scattering-model pose synthesis for SAR chips"
)]
struct Cli {
    /// TOML run configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Regularisation weight as a fraction of lambda_max.
    #[arg(long, global = true)]
    lambda_rel: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true)]
    r_cap_deg: Option<f64>,
    #[arg(long, global = true)]
    step_deg: Option<f64>,
    /// Sub-pixel shift `dx,dy` in metres; repeat for several.
    #[arg(long, global = true, value_parser = parse_shift, allow_hyphen_values = true)]
    subpixel: Vec<[f64; 2]>,
    #[arg(long, global = true)]
    window_nbar: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    window_sll_db: Option<f64>,
    #[arg(long, global = true)]
    ratio: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Direct non-uniform sums instead of the gridded FFT approximation.
    #[arg(long, global = true)]
    exact_transform: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BaselineKind {
    Rotation,
    LinearInterp,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Convert Phoenix chips to containers.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate phantom chips (random corpus, or one chip from a scene file).
    Phantom {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Write Phoenix files instead of containers.
        #[arg(long)]
        phoenix: bool,
    },
    /// Sub-sample, split and flip-augment a corpus.
    Dataset {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one scattering model per chip.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize one pose from a fitted model.
    Synthesize {
        #[arg(long)]
        model: PathBuf,
        /// Chip the model was fitted on (class and pixel lattice).
        #[arg(long)]
        chip: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        azimuth_deg: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fourier-domain translation of one chip.
    Shift {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        dx: f64,
        #[arg(long, allow_hyphen_values = true)]
        dy: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rotation or linear-interpolation pose baselines.
    Baseline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        kind: BaselineKind,
    },
    /// 8-bit PGM magnitude previews.
    Quicklook {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40.0)]
        dynamic_range_db: f64,
    },
    /// Full pipeline: fit every chip and emit poses and shifts.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// model, rotation or linear-interp; repeat for several.
        #[arg(long = "method")]
        methods: Vec<String>,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let mut methods = None;
    if let Cmd::Augment { methods: m, .. } = &cli.cmd {
        if !m.is_empty() {
            methods = Some(m.clone());
        }
    }
    if let Cmd::Baseline { kind, .. } = &cli.cmd {
        let name = match kind {
            BaselineKind::Rotation => "rotation",
            BaselineKind::LinearInterp => "linear-interp",
        };
        methods = Some(vec![name.to_string()]);
    }
    cfg.apply(&Overrides {
        lambda_rel: cli.lambda_rel,
        eta: cli.eta,
        r_cap_deg: cli.r_cap_deg,
        step_deg: cli.step_deg,
        subpixel: (!cli.subpixel.is_empty()).then(|| cli.subpixel.clone()),
        window_nbar: cli.window_nbar,
        window_sll_db: cli.window_sll_db,
        ratio: cli.ratio,
        seed: cli.seed,
        jobs: cli.jobs,
        exact_transform: cli.exact_transform,
        methods,
    });
    if let Cmd::Phantom { count, size, .. } = &cli.cmd {
        if let Some(c) = count {
            cfg.phantom.count = *c;
        }
        if let Some(s) = size {
            cfg.phantom.size = *s;
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build()?;
    pool.install(|| match &cli.cmd {
        Cmd::Ingest { input, out } => commands::ingest(&cfg, input, out).map(drop),
        Cmd::Phantom {
            out, scene, phoenix, ..
        } => commands::phantom(&cfg, out, scene.as_deref(), *phoenix).map(drop),
        Cmd::Dataset { input, out } => commands::dataset(&cfg, input, out).map(drop),
        Cmd::Fit { input, out } => commands::fit(&cfg, input, out).map(drop),
        Cmd::Synthesize {
            model,
            chip,
            azimuth_deg,
            out,
        } => commands::synthesize(&cfg, model, chip, *azimuth_deg, out),
        Cmd::Shift { input, dx, dy, out } => commands::shift(input, *dx, *dy, out),
        Cmd::Baseline { input, out, .. } | Cmd::Augment { input, out, .. } => {
            commands::augment(&cfg, input, out).map(drop)
        }
        Cmd::Quicklook {
            inputs,
            out,
            dynamic_range_db,
        } => commands::quicklook(inputs, out, *dynamic_range_db).map(drop),
    })
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    dispatch(Cli::try_parse_from(args)?)
}
