//! Block-by-block alternating optimization.

mod checkpoint;
pub mod losses;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};

use crate::config::{ConfigError, TrainConfig};
use crate::data::{blockify, Instance};
use crate::model::{BlockPass, Group, LossValues, Model, ModelDims, PassOptions};
use crate::tensor::{RmsProp, RngState, Tensor};
use crate::{Error, ModelError};

/// Loss components of one trained block, read from its first pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub block_index: usize,
    pub generator_instance: f64,
    pub generator_block: f64,
    pub discriminator_instance: f64,
    pub discriminator_block: f64,
}

impl LogRow {
    fn from_values(block_index: usize, v: &LossValues) -> Self {
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        LogRow {
            block_index,
            generator_instance: mean(&v.generator_instance),
            generator_block: v.generator_block,
            discriminator_instance: mean(&v.discriminator_instance),
            discriminator_block: v.discriminator_block,
        }
    }

    pub fn generator_total(&self) -> f64 {
        self.generator_instance + self.generator_block
    }
}

pub const LOG_HEADER: &str = "block_index,loss_g_instance,loss_g_block,loss_d_instance,loss_d_block";

/// Training log as CSV text.
pub fn format_log(rows: &[LogRow]) -> String {
    let mut out = format!("{LOG_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.block_index,
            r.generator_instance,
            r.generator_block,
            r.discriminator_instance,
            r.discriminator_block
        ));
    }
    out
}

/// Next block to train.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamPosition {
    pub epoch: usize,
    pub block: usize,
}

/// Model plus everything needed to continue the stream exactly.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: Model,
    pub generator_opt: RmsProp,
    pub discriminator_opt: RmsProp,
    pub position: StreamPosition,
    /// Final state of the last trained block.
    pub memory: Tensor,
    pub noise_rng: RngState,
    pub log: Vec<LogRow>,
}

fn optimizer(model: &Model, group: Group) -> RmsProp {
    let c = &model.config;
    let params: Vec<Tensor> = model
        .indices(group)
        .into_iter()
        .map(|i| model.params[i].clone())
        .collect();
    RmsProp::new(c.learning_rate, c.rmsprop_decay, c.rmsprop_epsilon, &params)
}

impl Trainer {
    pub fn new(config: &TrainConfig, dims: ModelDims) -> Result<Trainer, ModelError> {
        let root = RngState::new(config.seed);
        let model = Model::new(config, dims, &mut root.derive("init"))?;
        Ok(Trainer {
            generator_opt: optimizer(&model, Group::Generator),
            discriminator_opt: optimizer(&model, Group::Discriminator),
            memory: model.zero_memory(),
            model,
            position: StreamPosition::default(),
            noise_rng: root.derive("noise"),
            log: Vec::new(),
        })
    }

    fn noise(&mut self, rows: usize) -> Option<Tensor> {
        let c = &self.model.config;
        c.noise_enabled()
            .then(|| self.noise_rng.gaussian(&[rows, c.instance_dim()]))
    }

    fn step(&mut self, pass: &BlockPass, group: Group) -> Result<(), ModelError> {
        let (loss, opt) = match group {
            Group::Generator => (pass.losses.generator_total, &mut self.generator_opt),
            Group::Discriminator => (pass.losses.discriminator_total, &mut self.discriminator_opt),
        };
        let grads = pass.param_grads(loss)?;
        for (k, i) in self.model.indices(group).into_iter().enumerate() {
            opt.step(k, &mut self.model.params[i], grads[i].as_ref())?;
        }
        Ok(())
    }

    /// Generator steps, then discriminator steps, then the memory handoff.
    pub fn train_block(&mut self, block: &[Instance]) -> Result<LogRow, ModelError> {
        let c = self.model.config.clone();
        let mut first: Option<LossValues> = None;
        let mut last: Option<BlockPass> = None;
        for _ in 0..c.gen_steps_per_block {
            let noise = self.noise(block.len());
            let pass = self.model.forward(block, &self.memory, noise.as_ref(), PassOptions::TRAINING)?;
            first.get_or_insert_with(|| pass.values());
            self.step(&pass, Group::Generator)?;
        }
        for _ in 0..c.disc_steps_per_block {
            let noise = self.noise(block.len());
            let pass = self.model.forward(block, &self.memory, noise.as_ref(), PassOptions::TRAINING)?;
            first.get_or_insert_with(|| pass.values());
            self.step(&pass, Group::Discriminator)?;
            last = Some(pass);
        }
        let last = match last {
            Some(p) => p,
            None => {
                let noise = self.noise(block.len());
                let pass = self.model.forward(block, &self.memory, noise.as_ref(), PassOptions::TRAINING)?;
                first.get_or_insert_with(|| pass.values());
                pass
            }
        };
        let (mean, var) = &last.moments;
        self.model.running.update(mean, var, c.norm_momentum);
        self.memory = last.block_state();
        let row = LogRow::from_values(self.log.len(), first.as_ref().expect("at least one pass"));
        self.log.push(row.clone());
        Ok(row)
    }

    /// Trains from the current position to the end of the last epoch, or
    /// until `stop_after` blocks have been trained in this call. Returns the
    /// number of blocks trained.
    pub fn run(&mut self, train: &[Instance], stop_after: Option<usize>) -> Result<usize, Error> {
        let blocks = blockify(train, self.model.config.block_size)?;
        if blocks.is_empty() {
            return Err(ConfigError::Invalid("training data is empty".into()).into());
        }
        let mut trained = 0;
        while self.position.epoch < self.model.config.epochs {
            while self.position.block < blocks.len() {
                if stop_after.is_some_and(|s| trained >= s) {
                    return Ok(trained);
                }
                if self.position.block == 0 {
                    self.memory = self.model.zero_memory();
                }
                let row = self.train_block(&blocks[self.position.block].instances)?;
                log::debug!(
                    "epoch {} block {}: L_G {:.5} L_D {:.5}",
                    self.position.epoch,
                    self.position.block,
                    row.generator_total(),
                    row.discriminator_instance + row.discriminator_block
                );
                self.position.block += 1;
                trained += 1;
            }
            self.position.epoch += 1;
            self.position.block = 0;
        }
        Ok(trained)
    }

    pub fn is_finished(&self) -> bool {
        self.position.epoch >= self.model.config.epochs
    }
}

/// Trains a fresh model over the whole stream.
pub fn train_stream(train: &[Instance], config: &TrainConfig, dims: ModelDims) -> Result<Trainer, Error> {
    if train.is_empty() {
        return Err(ConfigError::Invalid("training data is empty".into()).into());
    }
    let mut trainer = Trainer::new(config, dims)?;
    trainer.run(train, None)?;
    Ok(trainer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticParams};

    fn tiny() -> TrainConfig {
        TrainConfig {
            block_size: 20,
            embed_dim: 4,
            hidden: 8,
            epochs: 1,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    fn data(n: usize) -> Vec<Instance> {
        generate_synthetic(&SyntheticParams::default(), 1)[..n].to_vec()
    }

    const DIMS: ModelDims = ModelDims { dimension: 30, attributes: 3 };

    #[test]
    fn zero_steps_keep_parameters() {
        let cfg = TrainConfig { gen_steps_per_block: 0, disc_steps_per_block: 0, ..tiny() };
        let mut t = Trainer::new(&cfg, DIMS).unwrap();
        let before = t.model.params.clone();
        t.run(&data(20), None).unwrap();
        assert_eq!(t.model.params, before);
        assert_eq!(t.log.len(), 1);
        assert!(t.log[0].generator_instance > 0.0);
        assert_ne!(t.memory, t.model.zero_memory());
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let a = train_stream(&data(100), &tiny(), DIMS).unwrap();
        let b = train_stream(&data(100), &tiny(), DIMS).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn steps_touch_only_their_partition() {
        let mut t = Trainer::new(&tiny(), DIMS).unwrap();
        let block = data(20);
        let gen = t.model.indices(Group::Generator);
        let disc = t.model.indices(Group::Discriminator);
        let snapshot = |t: &Trainer, idx: &[usize]| -> Vec<Tensor> {
            idx.iter().map(|&i| t.model.params[i].clone()).collect()
        };
        let pass = t.model.forward(&block, &t.memory, None, PassOptions::TRAINING).unwrap();
        let before = snapshot(&t, &disc);
        t.step(&pass, Group::Generator).unwrap();
        assert_eq!(snapshot(&t, &disc), before);

        let pass = t.model.forward(&block, &t.memory, None, PassOptions::TRAINING).unwrap();
        let before = snapshot(&t, &gen);
        t.step(&pass, Group::Discriminator).unwrap();
        assert_eq!(snapshot(&t, &gen), before);
    }

    #[test]
    fn memory_resets_each_epoch_and_chains_within() {
        let cfg = TrainConfig { epochs: 2, ..tiny() };
        let mut t = Trainer::new(&cfg, DIMS).unwrap();
        let d = data(40);
        assert_eq!(t.run(&d, Some(1)).unwrap(), 1);
        let after_first = t.memory.clone();
        // Block 1 of epoch 0 starts from block 0's state.
        let pass = t.model.forward(&d[20..], &after_first, None, PassOptions::TRAINING).unwrap();
        assert!(pass.block_state().is_finite());
        t.run(&d, None).unwrap();
        assert!(t.is_finished());
        assert_eq!(t.log.len(), 4);
    }

    #[test]
    fn empty_training_set_is_config_error() {
        assert!(matches!(train_stream(&[], &tiny(), DIMS), Err(Error::Config(_))));
    }

    #[test]
    fn log_csv_format() {
        let rows = vec![LogRow {
            block_index: 0,
            generator_instance: 1.5,
            generator_block: 2.0,
            discriminator_instance: 0.5,
            discriminator_block: 0.25,
        }];
        assert_eq!(format_log(&rows), format!("{LOG_HEADER}\n0,1.5,2,0.5,0.25\n"));
    }
}
