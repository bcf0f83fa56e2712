//! Resembled-vector generators and the two discriminator heads.

use serde::{Deserialize, Serialize};

use crate::representation::{block_forward, RnnParams};
use crate::tensor::{RngState, Tape, Tensor, TensorError, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoencoderParams<T> {
    pub w_enc: T,
    pub b_enc: T,
    pub w_dec: T,
    pub b_dec: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorParams<T> {
    pub w_instance: T,
    pub b_instance: T,
    pub w_block: T,
    pub b_block: T,
}

impl<T: Copy> AutoencoderParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> AutoencoderParams<U> {
        AutoencoderParams {
            w_enc: f(self.w_enc),
            b_enc: f(self.b_enc),
            w_dec: f(self.w_dec),
            b_dec: f(self.b_dec),
        }
    }
}

impl<T: Copy> DiscriminatorParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> DiscriminatorParams<U> {
        DiscriminatorParams {
            w_instance: f(self.w_instance),
            b_instance: f(self.b_instance),
            w_block: f(self.w_block),
            b_block: f(self.b_block),
        }
    }
}

/// One standard-normal noise row per instance.
pub fn sample_noise(rng: &mut RngState, rows: usize, dim: usize) -> Tensor {
    rng.gaussian(&[rows, dim])
}

/// `v^I* = f(f((f(v^I) + D) W_enc + b_enc) W_dec + b_dec) - D`, row-wise.
/// `noise` is the `D` matrix; `None` means zero noise.
pub fn generate_instances(
    tape: &mut Tape,
    instance_vecs: Var,
    noise: Option<Var>,
    slope: f64,
    p: &AutoencoderParams<Var>,
) -> Result<Var, TensorError> {
    let mut x = tape.leaky_relu(instance_vecs, slope);
    if let Some(d) = noise {
        x = tape.add(x, d)?;
    }
    let enc = tape.matmul(x, p.w_enc)?;
    let enc = tape.add_row(enc, p.b_enc)?;
    let hidden = tape.leaky_relu(enc, slope);
    let dec = tape.matmul(hidden, p.w_dec)?;
    let dec = tape.add_row(dec, p.b_dec)?;
    let out = tape.leaky_relu(dec, slope);
    match noise {
        Some(d) => tape.sub(out, d),
        None => Ok(out),
    }
}

/// Value copies of the RNN weights with gradient flow cut.
pub fn copy_rnn(tape: &mut Tape, rnn: &RnnParams<Var>) -> RnnParams<Var> {
    rnn.map(|v| tape.detach(v))
}

/// Hidden states of the copied RNN over resembled instance vectors; the
/// last one is `v^B*`. Gradients reach `resembled` but not `copied`.
pub fn generate_block(
    tape: &mut Tape,
    resembled: Var,
    copied: &RnnParams<Var>,
    previous: Var,
    slope: f64,
) -> Result<Vec<Var>, TensorError> {
    block_forward(tape, resembled, previous, slope, copied)
}

/// `sigmoid(x W + b)`, one probability per row of `x`.
pub fn discriminate(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
    let z = tape.matmul(x, w)?;
    let z = tape.add_row(z, b)?;
    Ok(tape.sigmoid(z))
}
