//! `seamcut`: seam extraction, cutting, unwrapping, part-label refinement and
//! seam generation from the command line.

mod geometry;
mod learn;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use seamcut::codec::DEFAULT_MAX_SEGMENTS;
use seamcut::neural::{GenerationConfig, TrainConfig};
use seamcut::sampler::{DEFAULT_BUDGET, FULL_BUDGET};
use seamcut::Codec;

use crate::learn::Preset;
use crate::report::CliResult;

#[derive(Parser)]
#[command(name = "seamcut", version, about = "Seam extraction, mesh cutting, UV unwrapping and seam generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Quantization bins per axis.
    #[arg(long, default_value_t = 1024)]
    bins: u32,
    /// Seed recorded in reports and used by every random choice.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path (defaults next to the main output).
    #[arg(long)]
    report: Option<PathBuf>,
}

impl Common {
    fn codec(&self) -> CliResult<Codec> {
        Ok(Codec::new(self.bins, DEFAULT_MAX_SEGMENTS)?)
    }
}

#[derive(Args, Clone)]
struct Sampling {
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Temperature; 0 decodes greedily.
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Keep only the k most likely tokens (0 disables).
    #[arg(long = "top-k", default_value_t = 0)]
    top_k: usize,
    /// Condition point budget (defaults to the training budget).
    #[arg(long)]
    budget: Option<usize>,
    /// Segment limit (0: the model's maximum).
    #[arg(long, default_value_t = 0)]
    max_segments: usize,
    /// Require a checkpoint with the full-scale configuration.
    #[arg(long = "paper-scale")]
    full_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Read seams from a UV-mapped mesh.
    Extract {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        islands: Option<PathBuf>,
        /// Check the UV layout and fail on issues.
        #[arg(long)]
        validate: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Cut along seams, flatten every chart and write a textured mesh.
    Unwrap {
        input: PathBuf,
        #[arg(long)]
        seams: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add cuts until every chart is a disk instead of failing.
        #[arg(long)]
        repair: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Snap per-face part labels to seam-bounded patches.
    Segment {
        input: PathBuf,
        #[arg(long)]
        seams: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a procedural dataset of meshes with reference seams.
    Synth {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the seam generator on a directory of meshes and seam files.
    Train {
        data: PathBuf,
        #[arg(long, default_value = "model.ckpt")]
        out: PathBuf,
        #[arg(long)]
        loss: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Preset::Desk)]
        preset: Preset,
        /// Full-scale model constants and point budget.
        #[arg(long = "paper-scale")]
        full_scale: bool,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 8)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        #[arg(long, default_value_t = 0.5)]
        clip: f64,
        #[arg(long)]
        kl_weight: Option<f64>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        no_augment: bool,
        /// Stop once loss < F x first loss with a perfectly predicted batch.
        #[arg(long)]
        early_stop: Option<f64>,
        /// Crop targets to this many coordinate tokens.
        #[arg(long)]
        truncate: Option<usize>,
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        log_every: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Sample a seam for a mesh.
    Generate {
        input: PathBuf,
        /// Seam segments per mesh vertex.
        #[arg(long, default_value_t = 0.2)]
        ratio: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the raw token stream (u16 little endian).
        #[arg(long)]
        tokens: Option<PathBuf>,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
    },
    /// Generate, unwrap (with repair) and measure every mesh in a directory.
    Eval {
        dir: PathBuf,
        /// Fixed ratio; by default each mesh's reference seam ratio, else 0.2.
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for unwrapped meshes.
        #[arg(long)]
        objs: Option<PathBuf>,
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
    },
}

fn sample_args(s: Sampling, c: &Common, ratio: f64) -> learn::SampleArgs {
    let budget = s.budget.or(s.full_scale.then_some(FULL_BUDGET));
    learn::SampleArgs {
        checkpoint: s.checkpoint,
        expect: s.full_scale.then(|| Preset::Full.config()),
        bins: c.bins,
        gen: GenerationConfig {
            ratio,
            temperature: s.temperature,
            top_k: s.top_k,
            seed: c.seed,
            max_segments: s.max_segments,
        },
        budget,
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Extract { input, out, islands, validate, common } => geometry::extract(geometry::ExtractArgs {
            input,
            out,
            islands,
            report: common.report.clone(),
            validate,
            codec: common.codec()?,
            seed: common.seed,
        }),
        Command::Unwrap { input, seams, out, repair, common } => geometry::unwrap(geometry::UnwrapArgs {
            input,
            seams,
            out,
            report: common.report.clone(),
            repair,
            codec: common.codec()?,
            seed: common.seed,
        }),
        Command::Segment { input, seams, labels, out, common } => geometry::segment(geometry::SegmentArgs {
            input,
            seams,
            labels,
            out,
            report: common.report.clone(),
            codec: common.codec()?,
            seed: common.seed,
        }),
        Command::Synth { count, out, seed } => learn::synth(count, seed, &out),
        Command::Train {
            data,
            out,
            loss,
            preset,
            full_scale,
            width,
            steps,
            batch_size,
            lr,
            warmup,
            clip,
            kl_weight,
            budget,
            no_augment,
            early_stop,
            truncate,
            resume,
            log_every,
            common,
        } => {
            let preset = if full_scale { Preset::Full } else { preset };
            let mut model = preset.config();
            if let Some(w) = width {
                model = seamcut::neural::ModelConfig { depth: model.depth, ..seamcut::neural::ModelConfig::tiny(w) };
            }
            model.bins = common.bins;
            if let Some(b) = kl_weight {
                model.kl_weight = b;
            }
            model.validate()?;
            let budget = budget.unwrap_or(if full_scale { FULL_BUDGET } else { DEFAULT_BUDGET });
            let train = TrainConfig {
                steps,
                batch_size,
                learning_rate: lr,
                warmup_steps: warmup,
                grad_clip: clip,
                seed: common.seed,
                augment: !no_augment,
                point_budget: budget,
                truncate_tokens: truncate,
                early_stop_fraction: early_stop,
            };
            learn::train(learn::TrainArgs { data, out, loss, report: common.report, model, train, resume, log_every })
        }
        Command::Generate { input, ratio, out, tokens, sampling, common } => {
            let args = sample_args(sampling, &common, ratio);
            learn::generate(&input, args, out, tokens, common.report)
        }
        Command::Eval { dir, ratio, out, objs, limit, sampling, common } => {
            let sample = sample_args(sampling, &common, ratio.unwrap_or(0.2));
            learn::eval(learn::EvalArgs { dir, sample, ratio, out, objs, report: common.report, limit })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("seamcut: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
