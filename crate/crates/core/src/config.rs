//! Model and training settings, with a flat `key=value` text form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("{key}: cannot parse {value:?}: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Which discriminator terms enter the inference-time L_D.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscTerms {
    /// Average of the real and resembled terms (as in training).
    Both,
    /// Only the real-vector term.
    Real,
}

/// Batch statistics used by instance normalization when scoring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormStats {
    /// Statistics of the block being scored.
    Block,
    /// Running averages accumulated over the training stream.
    Running,
}

macro_rules! choice {
    ($ty:ty, $($name:literal => $variant:expr),+) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(format!("expected one of {:?}, got {other:?}", [$($name),+])),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

choice!(DiscTerms, "both" => DiscTerms::Both, "real" => DiscTerms::Real);
choice!(NormStats, "block" => NormStats::Block, "running" => NormStats::Running);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RnnCell {
    Tanh,
    /// Update and reset gates around the tanh candidate.
    Gated,
}

choice!(RnnCell, "tanh" => RnnCell::Tanh, "gated" => RnnCell::Gated);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub block_size: usize,
    pub learning_rate: f64,
    /// Weight of the discriminator loss in both anomaly scores.
    pub beta: f64,
    /// Weight of the mean instance score in the block score.
    pub gamma: f64,
    pub gen_steps_per_block: usize,
    pub disc_steps_per_block: usize,
    pub epochs: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub rnn_cell: RnnCell,
    /// Autoencoder bottleneck width; 0 means half the instance-vector width.
    pub encoder_width: usize,
    pub leaky_slope: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    /// Weights start uniform in `(-init_scale, init_scale)`; biases at zero.
    pub init_scale: f64,
    pub bn_epsilon: f64,
    /// Momentum of the running normalization statistics.
    pub norm_momentum: f64,
    /// Optional generator term rewarding resembled vectors the discriminator
    /// accepts as real. Zero disables it.
    pub adversarial_weight: f64,
    pub seed: u64,
    pub no_noise: bool,
    pub no_relrep: bool,
    pub no_blockloss: bool,
    /// Noise draws averaged per scored block; 0 scores with zero noise.
    pub inference_noise_samples: usize,
    pub score_disc_terms: DiscTerms,
    pub inference_norm: NormStats,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            block_size: 100,
            learning_rate: 0.01,
            beta: 0.3,
            gamma: 0.05,
            gen_steps_per_block: 3,
            disc_steps_per_block: 1,
            epochs: 3,
            embed_dim: 16,
            hidden: 32,
            rnn_cell: RnnCell::Tanh,
            encoder_width: 0,
            leaky_slope: 0.2,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            init_scale: 0.05,
            bn_epsilon: 1e-5,
            norm_momentum: 0.1,
            adversarial_weight: 0.0,
            seed: 0,
            no_noise: false,
            no_relrep: false,
            no_blockloss: false,
            inference_noise_samples: 0,
            score_disc_terms: DiscTerms::Both,
            inference_norm: NormStats::Running,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

macro_rules! fields {
    ($($field:ident),+ $(,)?) => {
        pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),+];

        /// Sets one field from text. Unknown keys are rejected.
        pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
            match key {
                $(stringify!($field) => self.$field = parse(key, value)?,)+
                _ => return Err(ConfigError::UnknownKey(key.to_string())),
            }
            Ok(())
        }

        /// `(key, value)` pairs in declaration order.
        pub fn entries(&self) -> Vec<(&'static str, String)> {
            vec![$((stringify!($field), self.$field.to_string())),+]
        }
    };
}

impl TrainConfig {
    fields!(
        block_size,
        learning_rate,
        beta,
        gamma,
        gen_steps_per_block,
        disc_steps_per_block,
        epochs,
        embed_dim,
        hidden,
        rnn_cell,
        encoder_width,
        leaky_slope,
        rmsprop_decay,
        rmsprop_epsilon,
        init_scale,
        bn_epsilon,
        norm_momentum,
        adversarial_weight,
        seed,
        no_noise,
        no_relrep,
        no_blockloss,
        inference_noise_samples,
        score_disc_terms,
        inference_norm,
    );

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("block_size", self.block_size),
            ("epochs", self.epochs),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError::Invalid(format!("{k} must be positive")));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ConfigError::Invalid("learning_rate must be positive".into()));
        }
        if !(self.beta >= 0.0 && self.gamma >= 0.0) {
            return Err(ConfigError::Invalid("beta and gamma must be non-negative".into()));
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return Err(ConfigError::Invalid("rmsprop_decay must lie in (0, 1)".into()));
        }
        if !(self.rmsprop_epsilon > 0.0 && self.bn_epsilon > 0.0) {
            return Err(ConfigError::Invalid("epsilons must be positive".into()));
        }
        if !(self.norm_momentum > 0.0 && self.norm_momentum <= 1.0) {
            return Err(ConfigError::Invalid("norm_momentum must lie in (0, 1]".into()));
        }
        if !(self.init_scale > 0.0) || !(self.adversarial_weight >= 0.0) {
            return Err(ConfigError::Invalid(
                "init_scale must be positive and adversarial_weight non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Width of the instance vector.
    pub fn instance_dim(&self) -> usize {
        if self.no_relrep {
            self.embed_dim
        } else {
            2 * self.embed_dim
        }
    }

    pub fn bottleneck(&self) -> usize {
        if self.encoder_width > 0 {
            self.encoder_width
        } else {
            (self.instance_dim() / 2).max(1)
        }
    }

    pub fn noise_enabled(&self) -> bool {
        !self.no_noise
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

/// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: n + 1 })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
