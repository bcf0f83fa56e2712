use clap::Args;
use rayon::prelude::*;

use catstream_core::scoring::{auroc, format_scores, labeled_scores, score_stream, Level, ScoreOptions};
use catstream_core::training::{load_checkpoint, Checkpoint};
use catstream_core::{CheckpointError, EvalError, Instance, TrainConfig};

use crate::io::{load_dataset, write_file};
use crate::run_config::parse_list;
use crate::{assemble, CliError, Common, RunConfig};

/// Keys that may differ from the checkpoint's training configuration.
const SCORING_KEYS: &[&str] = &[
    "block_size",
    "beta",
    "gamma",
    "no_blockloss",
    "score_disc_terms",
    "inference_norm",
    "inference_noise_samples",
];

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: Option<String>,
    /// Test dataset file.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub manifest: Option<String>,
    #[arg(long)]
    pub block_size: Option<usize>,
    /// Score blocks by their mean instance score only.
    #[arg(long)]
    pub no_blockloss: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub checkpoint: Option<String>,
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub manifest: Option<String>,
    /// Comma-separated block sizes.
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long)]
    pub no_blockloss: bool,
    #[command(flatten)]
    pub common: Common,
}

const OPTIONS: &[(&str, Option<&str>)] = &[("checkpoint", None), ("data", None), ("manifest", None), ("out", None)];

const SWEEP_OPTIONS: &[(&str, Option<&str>)] = &[
    ("checkpoint", None),
    ("data", None),
    ("manifest", None),
    ("sizes", Some("1,10,50,100,200")),
    ("out", None),
];

/// Assembles the configuration on top of the checkpoint's own settings and
/// rejects changes to anything that shaped the trained model.
fn with_checkpoint(
    command: &'static str,
    options: &[(&'static str, Option<&str>)],
    common: &Common,
    flags: Vec<(&'static str, String)>,
) -> Result<(RunConfig, Checkpoint), CliError> {
    let probe = assemble(RunConfig::new(command, options, Some(TrainConfig::default())), common, flags.clone())?;
    let path = probe.require("checkpoint")?.to_string();
    let ckpt = load_checkpoint(&path)?;
    let cfg = assemble(RunConfig::new(command, options, Some(ckpt.model.config.clone())), common, flags)?;
    let stored = ckpt.model.config.entries();
    for ((key, ours), (_, theirs)) in cfg.model().entries().into_iter().zip(stored) {
        if ours != theirs && !SCORING_KEYS.contains(&key) {
            return Err(CheckpointError::Mismatch(format!(
                "{key}={ours} but {path} was trained with {key}={theirs}"
            ))
            .into());
        }
    }
    Ok((cfg, ckpt))
}

fn load_test(cfg: &RunConfig, ckpt: &Checkpoint) -> Result<Vec<Instance>, CliError> {
    let (test, dims) = load_dataset(&cfg.path("data")?, cfg.get("manifest"))?;
    if dims != ckpt.model.dims {
        return Err(CheckpointError::Mismatch(format!(
            "dataset has dimension {} with {} attributes, model expects {} with {}",
            dims.dimension, dims.attributes, ckpt.model.dims.dimension, ckpt.model.dims.attributes
        ))
        .into());
    }
    Ok(test)
}

pub fn run(a: ScoreArgs) -> Result<(), CliError> {
    let mut flags = Vec::new();
    flags.extend(a.checkpoint.map(|v| ("checkpoint", v)));
    flags.extend(a.data.map(|v| ("data", v)));
    flags.extend(a.manifest.map(|v| ("manifest", v)));
    flags.extend(a.block_size.map(|v| ("block_size", v.to_string())));
    if a.no_blockloss {
        flags.push(("no_blockloss", "true".into()));
    }
    let (cfg, ckpt) = with_checkpoint("score", OPTIONS, &a.common, flags)?;
    let out = cfg.path("out")?;
    let test = load_test(&cfg, &ckpt)?;
    let model_cfg = cfg.model();
    let records = score_stream(
        &ckpt.model,
        &test,
        model_cfg.block_size,
        &ckpt.memory,
        &ScoreOptions::from_config(model_cfg),
    )?;
    cfg.echo(&out)?;
    write_file(&out.join("scores.csv"), &format_scores(&records))?;
    let blocks = records.iter().filter(|r| r.level == Level::Block).count();
    println!("scored {} instances in {blocks} blocks", records.len() - blocks);
    Ok(())
}

/// Block-level AUROC at `size`, NaN when the blocks carry a single label.
fn sweep_point(ckpt: &Checkpoint, test: &[Instance], size: usize, opts: &ScoreOptions) -> Result<f64, CliError> {
    let records = score_stream(&ckpt.model, test, size, &ckpt.memory, opts)?;
    match auroc(&labeled_scores(&records, Level::Block)) {
        Ok(a) => Ok(a),
        Err(e @ EvalError::SingleClass { .. }) => {
            log::warn!("block size {size}: {e}; reporting nan");
            Ok(f64::NAN)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn run_sweep(a: SweepArgs) -> Result<(), CliError> {
    let mut flags = Vec::new();
    flags.extend(a.checkpoint.map(|v| ("checkpoint", v)));
    flags.extend(a.data.map(|v| ("data", v)));
    flags.extend(a.manifest.map(|v| ("manifest", v)));
    flags.extend(a.sizes.map(|v| ("sizes", v)));
    if a.no_blockloss {
        flags.push(("no_blockloss", "true".into()));
    }
    let (cfg, ckpt) = with_checkpoint("sweep", SWEEP_OPTIONS, &a.common, flags)?;
    let out = cfg.path("out")?;
    let sizes: Vec<usize> = parse_list("sizes", cfg.require("sizes")?)?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(catstream_core::config::ConfigError::Invalid("sizes must be positive".into()).into());
    }
    let test = load_test(&cfg, &ckpt)?;
    let opts = ScoreOptions::from_config(cfg.model());
    let points: Vec<f64> = sizes
        .par_iter()
        .map(|&s| sweep_point(&ckpt, &test, s, &opts))
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("block_size,auroc\n");
    for (s, a) in sizes.iter().zip(&points) {
        csv.push_str(&format!("{s},{a}\n"));
    }
    cfg.echo(&out)?;
    write_file(&out.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}
