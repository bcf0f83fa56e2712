//! Compound anomaly scores over a test stream, and their evaluation.

pub mod metrics;

use std::fmt;
use std::str::FromStr;

pub use metrics::{
    auroc, classify_and_report, evaluate, optimal_threshold, roc_area, roc_curve, Confusion,
    EvalReport, Threshold,
};

use crate::config::{DiscTerms, NormStats, TrainConfig};
use crate::data::{blockify, Instance, Label};
use crate::model::{LossValues, Model, NormSource, PassOptions};
use crate::tensor::{RngState, Tensor};
use crate::{Error, EvalError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Instance,
    Block,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Instance => "instance",
            Level::Block => "block",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "instance" => Ok(Level::Instance),
            "block" => Ok(Level::Block),
            other => Err(format!("unknown level {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRecord {
    pub level: Level,
    /// Stream position for instances, block number for blocks.
    pub index: usize,
    pub z: f64,
    pub loss_g: f64,
    pub loss_d: f64,
    /// Mean instance score of the block; absent on instance rows.
    pub mean_instance: Option<f64>,
    pub label: Label,
}

/// Scoring-time settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreOptions {
    pub beta: f64,
    pub gamma: f64,
    pub no_blockloss: bool,
    pub disc_terms: DiscTerms,
    pub norm: NormStats,
    /// Noise draws averaged per block; 0 scores with zero noise.
    pub noise_samples: usize,
    pub seed: u64,
}

impl ScoreOptions {
    pub fn from_config(c: &TrainConfig) -> Self {
        ScoreOptions {
            beta: c.beta,
            gamma: c.gamma,
            no_blockloss: c.no_blockloss,
            disc_terms: c.score_disc_terms,
            norm: c.inference_norm,
            noise_samples: c.inference_noise_samples,
            seed: c.seed,
        }
    }
}

/// `z^I = L_G^I + beta * L_D^I`.
pub fn score_instance(loss_g: f64, loss_d: f64, beta: f64) -> f64 {
    loss_g + beta * loss_d
}

/// `z^B = L_G^B + beta * L_D^B + gamma * mean(z^I)`, or just `mean(z^I)`
/// with the block loss removed.
pub fn score_block(loss_g: f64, loss_d: f64, instance_scores: &[f64], beta: f64, gamma: f64, no_blockloss: bool) -> f64 {
    let mean = instance_scores.iter().sum::<f64>() / instance_scores.len() as f64;
    if no_blockloss {
        mean
    } else {
        loss_g + beta * loss_d + gamma * mean
    }
}

fn average(values: &[LossValues]) -> LossValues {
    let k = values.len() as f64;
    let n = values[0].generator_instance.len();
    let col = |f: &dyn Fn(&LossValues) -> &[f64]| -> Vec<f64> {
        (0..n).map(|i| values.iter().map(|v| f(v)[i]).sum::<f64>() / k).collect()
    };
    let scalar = |f: &dyn Fn(&LossValues) -> f64| values.iter().map(f).sum::<f64>() / k;
    LossValues {
        generator_instance: col(&|v| &v.generator_instance),
        discriminator_instance: col(&|v| &v.discriminator_instance),
        generator_block: scalar(&|v| v.generator_block),
        discriminator_block: scalar(&|v| v.discriminator_block),
        generator_total: scalar(&|v| v.generator_total),
        discriminator_total: scalar(&|v| v.discriminator_total),
    }
}

/// Scores `instances` in order, block by block, starting from `memory`.
///
/// Records come out in stream order: each block's instance rows, then its
/// block row.
pub fn score_stream(
    model: &Model,
    instances: &[Instance],
    block_size: usize,
    memory: &Tensor,
    opts: &ScoreOptions,
) -> Result<Vec<ScoreRecord>, Error> {
    let blocks = blockify(instances, block_size)?;
    let pass_opts = PassOptions {
        norm: match opts.norm {
            NormStats::Block => NormSource::Batch,
            NormStats::Running => NormSource::Running,
        },
        disc_terms: opts.disc_terms,
    };
    let mut rng = RngState::new(opts.seed).derive("score-noise");
    let width = model.config.instance_dim();
    let mut memory = memory.clone();
    let mut out = Vec::with_capacity(instances.len() + blocks.len());
    let mut offset = 0;
    for (b, block) in blocks.iter().enumerate() {
        let insts = &block.instances;
        let (values, state) = if opts.noise_samples == 0 {
            let pass = model.forward(insts, &memory, None, pass_opts)?;
            (pass.values(), pass.block_state())
        } else {
            let mut draws = Vec::with_capacity(opts.noise_samples);
            let mut state = None;
            for _ in 0..opts.noise_samples {
                let noise = rng.gaussian(&[insts.len(), width]);
                let pass = model.forward(insts, &memory, Some(&noise), pass_opts)?;
                draws.push(pass.values());
                state = Some(pass.block_state());
            }
            (average(&draws), state.expect("at least one draw"))
        };
        let mut zs = Vec::with_capacity(insts.len());
        for (i, inst) in insts.iter().enumerate() {
            let (g, d) = (values.generator_instance[i], values.discriminator_instance[i]);
            let z = score_instance(g, d, opts.beta);
            zs.push(z);
            out.push(ScoreRecord {
                level: Level::Instance,
                index: offset + i,
                z,
                loss_g: g,
                loss_d: d,
                mean_instance: None,
                label: inst.label,
            });
        }
        let (g, d) = (values.generator_block, values.discriminator_block);
        out.push(ScoreRecord {
            level: Level::Block,
            index: b,
            z: score_block(g, d, &zs, opts.beta, opts.gamma, opts.no_blockloss),
            loss_g: g,
            loss_d: d,
            mean_instance: Some(zs.iter().sum::<f64>() / zs.len() as f64),
            label: block.label,
        });
        offset += insts.len();
        memory = state;
    }
    Ok(out)
}

pub const SCORE_HEADER: &str = "level,index,z,loss_g,loss_d,mean_instance,label";

pub fn format_scores(records: &[ScoreRecord]) -> String {
    let mut out = format!("{SCORE_HEADER}\n");
    for r in records {
        let mean = r.mean_instance.map(|m| m.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.level, r.index, r.z, r.loss_g, r.loss_d, mean, r.label
        ));
    }
    out
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoreRecord>, EvalError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SCORE_HEADER => {}
        _ => {
            return Err(EvalError::Parse {
                line: 1,
                message: format!("expected header {SCORE_HEADER:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| EvalError::Parse { line: n + 1, message };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(format!("expected 7 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        out.push(ScoreRecord {
            level: f[0].parse().map_err(bad)?,
            index: f[1].parse().map_err(|e| bad(format!("{e}")))?,
            z: num(f[2])?,
            loss_g: num(f[3])?,
            loss_d: num(f[4])?,
            mean_instance: if f[5].is_empty() { None } else { Some(num(f[5])?) },
            label: f[6].parse().map_err(bad)?,
        });
    }
    Ok(out)
}

/// `(z, anomalous)` pairs of one level, skipping unlabeled records.
pub fn labeled_scores(records: &[ScoreRecord], level: Level) -> Vec<(f64, bool)> {
    records
        .iter()
        .filter(|r| r.level == level && r.label != Label::Unknown)
        .map(|r| (r.z, r.label.is_anomalous()))
        .collect()
}
