mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lfcodec::codec::CodecId;

use config::PipelineConfig;

#[derive(Parser, Debug)]
#[command(name = "lfcodec", version, about = "Light-field codec with learned view synthesis and quality enhancement")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON file whose keys replace the matching flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Light-field manifest (the original for decode/eval).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 28)]
    qp: u8,
    #[arg(long, global = true, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, global = true, value_enum, default_value_t = CodecArg::Builtin)]
    codec: CodecArg,
    /// External encoder command template, e.g. "enc -i {input_yuv} -wdt {width} -hgt {height} -f {frames} -q {qp} -b {output}".
    #[arg(long, global = true)]
    ext_cmd: Option<String>,
    #[arg(long, global = true)]
    synth_model: Option<PathBuf>,
    #[arg(long, global = true)]
    qe_model: Option<PathBuf>,
    /// Reference view selection for enhancement: sharpness or nearest.
    #[arg(long, global = true, default_value = "sharpness")]
    rvs: String,
    #[arg(long, global = true)]
    no_enhance: bool,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CodecArg {
    Builtin,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    /// Lagrangian drop decision with the synthesis model.
    Rdo,
    KeepAll,
    /// Drop every TL4 view.
    DropTl4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SceneKind {
    Plane,
    Occlusion,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode a light field into an LFD2 stream plus drop-decision report.
    Encode {
        #[arg(long, value_enum, default_value_t = PolicyArg::Rdo)]
        policy: PolicyArg,
    },
    /// Decode a stream, fill dropped views and optionally enhance.
    Decode {
        #[arg(long)]
        stream: PathBuf,
    },
    /// Train the view-synthesis generator on light fields.
    TrainSynth(TrainSynthArgs),
    /// Train the enhancement network on codec-degraded light fields.
    TrainQe(TrainQeArgs),
    /// Per-view quality of a reconstruction, or BD metrics between two RD curves.
    Eval(EvalArgs),
    /// Write a synthetic light field.
    GenSynthetic(GenArgs),
    /// Encode and decode at several QPs and write the RD curve.
    RdSweep {
        #[arg(long, value_delimiter = ',', default_value = "22,28,34,40")]
        qps: Vec<u8>,
        #[arg(long, value_enum, default_value_t = PolicyArg::Rdo)]
        policy: PolicyArg,
        /// Anchor RD curve CSV to report BD metrics against.
        #[arg(long)]
        anchor: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct TrainSynthArgs {
    /// Training light-field manifests.
    #[arg(long = "train", required = true)]
    pub train: Vec<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 10)]
    pub batch: usize,
    #[arg(long, default_value_t = 2e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct TrainQeArgs {
    #[arg(long = "train", required = true)]
    pub train: Vec<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 2e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub patch: usize,
    #[arg(long, default_value_t = 4000)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Reconstructed light-field manifest, compared with --manifest.
    #[arg(long)]
    pub decoded: Option<PathBuf>,
    /// Stream whose rate is reported with the totals.
    #[arg(long)]
    pub stream: Option<PathBuf>,
    #[arg(long, requires = "test_curve")]
    pub anchor_curve: Option<PathBuf>,
    #[arg(long, requires = "anchor_curve")]
    pub test_curve: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value_t = SceneKind::Plane)]
    pub kind: SceneKind,
    /// Plane disparity in pixels per view step.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub disparity: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub background: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub foreground: f64,
    #[arg(long, default_value_t = 8)]
    pub rows: usize,
    #[arg(long, default_value_t = 8)]
    pub cols: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    /// Write PNG views instead of raw 4:2:0.
    #[arg(long)]
    pub png: bool,
}

fn pipeline_config(c: &CommonArgs) -> anyhow::Result<PipelineConfig> {
    let base = PipelineConfig {
        manifest: c.manifest.clone(),
        qp: c.qp,
        lambda: c.lambda,
        codec: match c.codec {
            CodecArg::Builtin => CodecId::Builtin,
            CodecArg::External => CodecId::External,
        },
        ext_cmd: c.ext_cmd.clone(),
        synth_model: c.synth_model.clone(),
        qe_model: c.qe_model.clone(),
        rvs: c.rvs.clone(),
        no_enhance: c.no_enhance,
        out: c.out.clone(),
        seed: c.seed,
        jobs: c.jobs,
    };
    let config = match &c.config {
        Some(path) => base.overlay(path)?,
        None => base,
    };
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = pipeline_config(&cli.common)?;
    if let Some(jobs) = config.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    std::fs::create_dir_all(&config.out)?;
    match cli.command {
        Command::Encode { policy } => commands::encode(&config, policy),
        Command::Decode { stream } => commands::decode(&config, &stream),
        Command::TrainSynth(args) => commands::train_synth(&config, &args),
        Command::TrainQe(args) => commands::train_qe(&config, &args),
        Command::Eval(args) => commands::eval(&config, &args),
        Command::GenSynthetic(args) => commands::gen_synthetic(&config, &args),
        Command::RdSweep { qps, policy, anchor } => commands::rd_sweep(&config, &qps, policy, anchor.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
