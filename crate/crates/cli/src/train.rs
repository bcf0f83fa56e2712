use clap::Args;

use catstream_core::training::{format_log, load_checkpoint, save_checkpoint, Checkpoint, Trainer};
use catstream_core::{CheckpointError, TrainConfig};

use crate::io::{load_dataset, write_file};
use crate::{assemble, CliError, Common, RunConfig};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset file.
    #[arg(long)]
    pub data: Option<String>,
    /// Manifest; defaults to `manifest.txt` next to the data.
    #[arg(long)]
    pub manifest: Option<String>,
    /// Continue from this checkpoint.
    #[arg(long)]
    pub resume: Option<String>,
    /// Stop after this many blocks and checkpoint mid-stream.
    #[arg(long)]
    pub stop_after: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub no_noise: bool,
    #[arg(long)]
    pub no_relrep: bool,
    #[command(flatten)]
    pub common: Common,
}

const OPTIONS: &[(&str, Option<&str>)] = &[
    ("data", None),
    ("manifest", None),
    ("resume", None),
    ("stop_after", None),
    ("out", None),
];

pub fn run(a: TrainArgs) -> Result<(), CliError> {
    let mut flags = Vec::new();
    flags.extend(a.data.map(|v| ("data", v)));
    flags.extend(a.manifest.map(|v| ("manifest", v)));
    flags.extend(a.resume.map(|v| ("resume", v)));
    flags.extend(a.stop_after.map(|v| ("stop_after", v.to_string())));
    flags.extend(a.seed.map(|v| ("seed", v.to_string())));
    flags.extend(a.block_size.map(|v| ("block_size", v.to_string())));
    flags.extend(a.epochs.map(|v| ("epochs", v.to_string())));
    if a.no_noise {
        flags.push(("no_noise", "true".into()));
    }
    if a.no_relrep {
        flags.push(("no_relrep", "true".into()));
    }
    let base = RunConfig::new("train", OPTIONS, Some(TrainConfig::default()));
    let cfg = assemble(base, &a.common, flags)?;

    let data = cfg.path("data")?;
    let out = cfg.path("out")?;
    let (train, dims) = load_dataset(&data, cfg.get("manifest"))?;
    let mut trainer = match cfg.get("resume") {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            if ckpt.model.config != *cfg.model() || ckpt.model.dims != dims {
                return Err(CheckpointError::Mismatch(format!(
                    "{path} was written with a different configuration or dataset shape"
                ))
                .into());
            }
            ckpt.into_trainer()
        }
        None => Trainer::new(cfg.model(), dims)?,
    };
    let trained = trainer.run(&train, cfg.parsed("stop_after")?)?;

    cfg.echo(&out)?;
    save_checkpoint(out.join("checkpoint.ckpt"), &Checkpoint::from_trainer(&trainer))?;
    write_file(&out.join("train_log.csv"), &format_log(&trainer.log))?;
    let state = if trainer.is_finished() { "finished" } else { "paused" };
    println!(
        "trained {trained} blocks ({} total, {state} at epoch {} block {})",
        trainer.log.len(),
        trainer.position.epoch,
        trainer.position.block
    );
    Ok(())
}
