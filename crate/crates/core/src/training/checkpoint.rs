use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LogRow, StreamPosition, Trainer};
use crate::model::Model;
use crate::tensor::{RmsProp, RngSnapshot, RngState, Tensor};
use crate::CheckpointError;

const MAGIC: &str = "catstream-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized [`Trainer`]. The file is a `catstream-checkpoint <version>`
/// header line followed by one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: Model,
    pub generator_opt: RmsProp,
    pub discriminator_opt: RmsProp,
    pub position: StreamPosition,
    pub memory: Tensor,
    pub noise_rng: RngSnapshot,
    pub log: Vec<LogRow>,
}

impl Checkpoint {
    pub fn from_trainer(t: &Trainer) -> Self {
        Checkpoint {
            model: t.model.clone(),
            generator_opt: t.generator_opt.clone(),
            discriminator_opt: t.discriminator_opt.clone(),
            position: t.position,
            memory: t.memory.clone(),
            noise_rng: t.noise_rng.snapshot(),
            log: t.log.clone(),
        }
    }

    pub fn into_trainer(self) -> Trainer {
        Trainer {
            model: self.model,
            generator_opt: self.generator_opt,
            discriminator_opt: self.discriminator_opt,
            position: self.position,
            memory: self.memory,
            noise_rng: RngState::restore(self.noise_rng),
            log: self.log,
        }
    }

    pub fn to_text(&self) -> String {
        let body = serde_json::to_string(self).expect("checkpoint serializes");
        format!("{MAGIC} {CHECKPOINT_VERSION}\n{body}\n")
    }

    pub fn from_text(text: &str) -> Result<Self, CheckpointError> {
        let (header, body) = text.split_once('\n').ok_or(CheckpointError::Header)?;
        let version = header
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or(CheckpointError::Header)?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let ckpt: Checkpoint =
            serde_json::from_str(body).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    /// Structural checks: every tensor well formed and shaped as the stored
    /// configuration dictates.
    pub fn validate(&self) -> Result<(), CheckpointError> {
        let corrupt = |m: String| Err(CheckpointError::Corrupt(m));
        let well_formed = |t: &Tensor| t.shape().iter().product::<usize>() == t.len() && !t.is_empty();
        let m = &self.model;
        let fresh = Model::new(&m.config, m.dims, &mut RngState::new(0))
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        if fresh.specs != m.specs || fresh.layout != m.layout || m.params.len() != m.specs.len() {
            return corrupt("parameter layout does not match stored configuration".into());
        }
        for (p, spec) in m.params.iter().zip(&m.specs) {
            if !well_formed(p) || p.shape() != spec.shape.as_slice() {
                return corrupt(format!("parameter {} has wrong shape", spec.name));
            }
        }
        let width = m.config.instance_dim();
        if m.running.mean.len() != width || m.running.var.len() != width {
            return corrupt("running statistics have wrong width".into());
        }
        if !well_formed(&self.memory) || self.memory.shape() != [1, m.config.hidden] {
            return corrupt("memory vector has wrong shape".into());
        }
        for (opt, group) in [
            (&self.generator_opt, crate::model::Group::Generator),
            (&self.discriminator_opt, crate::model::Group::Discriminator),
        ] {
            let params: Vec<Tensor> = m.indices(group).iter().map(|&i| m.params[i].clone()).collect();
            if !opt.shapes_match(&params) || !opt.accumulators().iter().all(well_formed) {
                return corrupt(format!("{group:?} optimizer state does not match parameters"));
            }
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    fs::write(path, ckpt.to_text()).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Checkpoint::from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticParams};
    use crate::model::ModelDims;
    use crate::training::train_stream;
    use crate::TrainConfig;

    fn config() -> TrainConfig {
        TrainConfig {
            block_size: 25,
            embed_dim: 4,
            hidden: 8,
            epochs: 2,
            seed: 9,
            ..TrainConfig::default()
        }
    }

    const DIMS: ModelDims = ModelDims { dimension: 30, attributes: 3 };

    #[test]
    fn save_load_save_is_byte_identical() {
        let data = generate_synthetic(&SyntheticParams::default(), 2);
        let t = train_stream(&data[..100], &config(), DIMS).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
        save_checkpoint(&a, &Checkpoint::from_trainer(&t)).unwrap();
        let loaded = load_checkpoint(&a).unwrap();
        assert_eq!(loaded, Checkpoint::from_trainer(&t));
        save_checkpoint(&b, &loaded).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let data = generate_synthetic(&SyntheticParams::default(), 2)[..150].to_vec();
        let full = train_stream(&data, &config(), DIMS).unwrap();
        for stop in [1, 4, 6, 7] {
            let mut part = Trainer::new(&config(), DIMS).unwrap();
            part.run(&data, Some(stop)).unwrap();
            let text = Checkpoint::from_trainer(&part).to_text();
            let mut resumed = Checkpoint::from_text(&text).unwrap().into_trainer();
            resumed.run(&data, None).unwrap();
            assert_eq!(resumed.model, full.model, "stop after {stop}");
            assert_eq!(resumed.log, full.log);
            assert_eq!(resumed.memory, full.memory);
        }
    }

    #[test]
    fn header_and_version_checked() {
        let t = Trainer::new(&config(), DIMS).unwrap();
        let text = Checkpoint::from_trainer(&t).to_text();
        let bumped = text.replacen("catstream-checkpoint 1", "catstream-checkpoint 2", 1);
        assert!(matches!(
            Checkpoint::from_text(&bumped),
            Err(CheckpointError::Version { found: 2, expected: 1 })
        ));
        assert!(matches!(Checkpoint::from_text("hello\n{}"), Err(CheckpointError::Header)));
        let truncated = &text[..text.len() / 2];
        assert!(matches!(Checkpoint::from_text(truncated), Err(CheckpointError::Corrupt(_))));
    }

    #[test]
    fn reshaped_parameters_rejected() {
        let t = Trainer::new(&config(), DIMS).unwrap();
        let mut ckpt = Checkpoint::from_trainer(&t);
        ckpt.model.config.embed_dim = 5;
        assert!(matches!(ckpt.validate(), Err(CheckpointError::Corrupt(_))));
        let mut ckpt = Checkpoint::from_trainer(&t);
        ckpt.memory = Tensor::zeros(&[1, 3]);
        assert!(ckpt.validate().is_err());
    }
}
