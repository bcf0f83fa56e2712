//! Parameter layout, initialization and the full per-block pass.

use serde::{Deserialize, Serialize};

use crate::adversarial::{self, AutoencoderParams, DiscriminatorParams};
use crate::config::{DiscTerms, RnnCell, TrainConfig};
use crate::data::Instance;
use crate::representation::{
    self, column_moments, AttentionParams, GateParams, Normalization, Representation, RnnParams,
};
use crate::tensor::{Gradients, RngState, Tape, Tensor, Var};
use crate::training::losses::{binary_cross_entropy, soft_cross_entropy};
use crate::ModelError;

/// Dataset-dependent sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Vocabulary size.
    pub dimension: usize,
    /// Attributes per instance.
    pub attributes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    Generator,
    Discriminator,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub group: Group,
    pub bias: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSet<T> {
    pub representation: Representation<T>,
    pub autoencoder: AutoencoderParams<T>,
    pub discriminator: DiscriminatorParams<T>,
}

impl<T: Copy> ParamSet<T> {
    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> ParamSet<U> {
        ParamSet {
            representation: self.representation.map(&mut f),
            autoencoder: self.autoencoder.map(&mut f),
            discriminator: self.discriminator.map(&mut f),
        }
    }
}

struct Layout {
    specs: Vec<ParamSpec>,
}

impl Layout {
    fn add(&mut self, name: &str, shape: [usize; 2], group: Group) -> usize {
        self.specs.push(ParamSpec {
            name: name.to_string(),
            shape: shape.to_vec(),
            group,
            bias: shape[0] == 1 && name.contains(".b"),
        });
        self.specs.len() - 1
    }

    fn attention(&mut self, name: &str, input: usize, width: usize) -> AttentionParams<usize> {
        let g = Group::Generator;
        AttentionParams {
            w: self.add(&format!("{name}.w"), [input, width], g),
            b: self.add(&format!("{name}.b"), [1, width], g),
            u: self.add(&format!("{name}.u"), [width, 1], g),
        }
    }
}

fn layout(config: &TrainConfig, dims: &ModelDims) -> (ParamSet<usize>, Vec<ParamSpec>) {
    let (e, h, d, k) = (
        config.embed_dim,
        config.hidden,
        config.instance_dim(),
        config.bottleneck(),
    );
    let g = Group::Generator;
    let mut l = Layout { specs: Vec::new() };
    let embedding = l.add("embedding", [dims.dimension, e], g);
    let feature = l.attention("feature_attention", e, e);
    let self_attention = l.attention("self_attention", e, e);
    let relative = (!config.no_relrep).then(|| l.attention("relative_attention", e + h, e));
    let rnn = RnnParams {
        w_in: l.add("rnn.w_in", [d, h], g),
        w_rec: l.add("rnn.w_rec", [h, h], g),
        b: l.add("rnn.b", [1, h], g),
        gates: (config.rnn_cell == RnnCell::Gated).then(|| GateParams {
            w_in_z: l.add("rnn.w_in_z", [d, h], g),
            w_rec_z: l.add("rnn.w_rec_z", [h, h], g),
            b_z: l.add("rnn.b_z", [1, h], g),
            w_in_r: l.add("rnn.w_in_r", [d, h], g),
            w_rec_r: l.add("rnn.w_rec_r", [h, h], g),
            b_r: l.add("rnn.b_r", [1, h], g),
        }),
    };
    let autoencoder = AutoencoderParams {
        w_enc: l.add("autoencoder.w_enc", [d, k], g),
        b_enc: l.add("autoencoder.b_enc", [1, k], g),
        w_dec: l.add("autoencoder.w_dec", [k, d], g),
        b_dec: l.add("autoencoder.b_dec", [1, d], g),
    };
    let dg = Group::Discriminator;
    let discriminator = DiscriminatorParams {
        w_instance: l.add("discriminator.w_instance", [d, 1], dg),
        b_instance: l.add("discriminator.b_instance", [1, 1], dg),
        w_block: l.add("discriminator.w_block", [h, 1], dg),
        b_block: l.add("discriminator.b_block", [1, 1], dg),
    };
    let set = ParamSet {
        representation: Representation {
            embedding,
            feature,
            self_attention,
            relative,
            rnn,
        },
        autoencoder,
        discriminator,
    };
    (set, l.specs)
}

/// Running per-column statistics of the unnormalized instance vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub updates: u64,
}

impl RunningStats {
    pub fn new(width: usize) -> Self {
        RunningStats {
            mean: vec![0.0; width],
            var: vec![1.0; width],
            updates: 0,
        }
    }

    pub fn update(&mut self, mean: &[f64], var: &[f64], momentum: f64) {
        for (r, b) in self.mean.iter_mut().zip(mean) {
            *r += momentum * (b - *r);
        }
        for (r, b) in self.var.iter_mut().zip(var) {
            *r += momentum * (b - *r);
        }
        self.updates += 1;
    }
}

/// Which statistics normalize instance vectors in a pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormSource {
    Batch,
    Running,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PassOptions {
    pub norm: NormSource,
    pub disc_terms: DiscTerms,
}

impl PassOptions {
    pub const TRAINING: PassOptions = PassOptions {
        norm: NormSource::Batch,
        disc_terms: DiscTerms::Both,
    };
}

/// Loss nodes of one block pass.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    /// `n x 1` instance generator losses.
    pub generator_instance: Var,
    /// `n x 1` instance discriminator losses.
    pub discriminator_instance: Var,
    pub generator_block: Var,
    pub discriminator_block: Var,
    /// `mean(L_G^I) + L_G^B` plus the optional adversarial term.
    pub generator_total: Var,
    /// `mean(L_D^I) + L_D^B`.
    pub discriminator_total: Var,
}

/// Everything recorded while pushing one block through the model.
pub struct BlockPass {
    pub tape: Tape,
    pub vars: ParamSet<Var>,
    /// Tape leaves of every parameter, in layout order.
    pub leaves: Vec<Var>,
    pub instance_vecs: Var,
    pub resembled_instances: Var,
    pub block_vec: Var,
    pub resembled_block: Var,
    pub losses: LossVars,
    /// Batch moments of the unnormalized instance vectors.
    pub moments: (Vec<f64>, Vec<f64>),
}

/// Per-part loss values read off a pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LossValues {
    pub generator_instance: Vec<f64>,
    pub discriminator_instance: Vec<f64>,
    pub generator_block: f64,
    pub discriminator_block: f64,
    pub generator_total: f64,
    pub discriminator_total: f64,
}

impl BlockPass {
    pub fn values(&self) -> LossValues {
        let l = &self.losses;
        let v = |x: Var| self.tape.value(x);
        LossValues {
            generator_instance: v(l.generator_instance).data().to_vec(),
            discriminator_instance: v(l.discriminator_instance).data().to_vec(),
            generator_block: v(l.generator_block).item(),
            discriminator_block: v(l.discriminator_block).item(),
            generator_total: v(l.generator_total).item(),
            discriminator_total: v(l.discriminator_total).item(),
        }
    }

    pub fn block_state(&self) -> Tensor {
        self.tape.value(self.block_vec).clone()
    }

    /// Gradients of `loss` for every parameter, in layout order. Parameters
    /// the loss does not reach get `None`.
    pub fn param_grads(&self, loss: Var) -> Result<Vec<Option<Tensor>>, ModelError> {
        let grads: Gradients = self.tape.backward(loss)?;
        Ok(self.leaves.iter().map(|&v| grads.get(v).cloned()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: TrainConfig,
    pub dims: ModelDims,
    pub layout: ParamSet<usize>,
    pub specs: Vec<ParamSpec>,
    pub params: Vec<Tensor>,
    pub running: RunningStats,
}

impl Model {
    /// Weights uniform in `(-init_scale, init_scale)`, biases zero.
    pub fn new(config: &TrainConfig, dims: ModelDims, rng: &mut RngState) -> Result<Model, ModelError> {
        config.validate()?;
        if dims.dimension == 0 || dims.attributes == 0 {
            return Err(ModelError::Shape("dimension and attribute count must be positive".into()));
        }
        let (layout, specs) = layout(config, &dims);
        let s = config.init_scale;
        let params = specs
            .iter()
            .map(|p| {
                if p.bias {
                    Tensor::zeros(&p.shape)
                } else {
                    rng.uniform_tensor(&p.shape, -s, s)
                }
            })
            .collect();
        Ok(Model {
            config: config.clone(),
            dims,
            layout,
            specs,
            params,
            running: RunningStats::new(config.instance_dim()),
        })
    }

    pub fn indices(&self, group: Group) -> Vec<usize> {
        (0..self.specs.len()).filter(|&i| self.specs[i].group == group).collect()
    }

    pub fn zero_memory(&self) -> Tensor {
        Tensor::zeros(&[1, self.config.hidden])
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Runs both chains and every loss over one block.
    ///
    /// `memory` is the previous block's final state (`1 x hidden`); it seeds
    /// both RNN chains and enters the relative attention. `noise` is the
    /// `n x d` autoencoder noise, `None` for zero.
    pub fn forward(
        &self,
        block: &[Instance],
        memory: &Tensor,
        noise: Option<&Tensor>,
        options: PassOptions,
    ) -> Result<BlockPass, ModelError> {
        if block.is_empty() {
            return Err(ModelError::EmptyBlock);
        }
        let cfg = &self.config;
        let slope = cfg.leaky_slope;
        let n = self.dims.attributes;
        let mut tape = Tape::new();
        let leaves: Vec<Var> = self.params.iter().map(|p| tape.param(p)).collect();
        let vars = self.layout.map(|i| leaves[i]);
        let rep = &vars.representation;
        if memory.shape() != [1, cfg.hidden] {
            return Err(ModelError::Shape(format!(
                "memory vector has shape {:?}, expected [1, {}]",
                memory.shape(),
                cfg.hidden
            )));
        }
        let mem = tape.constant(memory.clone());

        let va = representation::attribute_vectors(&mut tape, rep.embedding, block, n, &rep.feature)?;
        let vs = representation::instance_self(&mut tape, va, n, &rep.self_attention)?;
        let vr = match &rep.relative {
            Some(p) => Some(representation::instance_relative(&mut tape, va, mem, n, slope, p)?),
            None => None,
        };
        let joined = match vr {
            Some(r) => {
                let (a, b) = (tape.value(vs), tape.value(r));
                let rows: Vec<Vec<f64>> = (0..a.rows())
                    .map(|i| [a.row_slice(i), b.row_slice(i)].concat())
                    .collect();
                Tensor::from_rows(&rows)?
            }
            None => tape.value(vs).clone(),
        };
        let moments = column_moments(&joined);
        let norm = match options.norm {
            NormSource::Batch => Normalization::Batch,
            NormSource::Running => Normalization::Fixed {
                mean: &self.running.mean,
                var: &self.running.var,
            },
        };
        let vi = representation::instance_vectors(&mut tape, vs, vr, &norm, cfg.bn_epsilon)?;
        let states = representation::block_forward(&mut tape, vi, mem, slope, &rep.rnn)?;
        let vb = *states.last().expect("non-empty block");

        let noise = match noise {
            Some(t) => {
                let want = [block.len(), cfg.instance_dim()];
                if t.shape() != want {
                    return Err(ModelError::Shape(format!(
                        "noise has shape {:?}, expected {want:?}",
                        t.shape()
                    )));
                }
                Some(tape.constant(t.clone()))
            }
            None => None,
        };
        let vi_star = adversarial::generate_instances(&mut tape, vi, noise, slope, &vars.autoencoder)?;
        let copied = adversarial::copy_rnn(&mut tape, &rep.rnn);
        let fake = adversarial::generate_block(&mut tape, vi_star, &copied, mem, slope)?;
        let vb_star = *fake.last().expect("non-empty block");

        let losses = self.losses(&mut tape, &vars, [vi, vi_star, vb, vb_star], options.disc_terms)?;
        Ok(BlockPass {
            tape,
            vars,
            leaves,
            instance_vecs: vi,
            resembled_instances: vi_star,
            block_vec: vb,
            resembled_block: vb_star,
            losses,
            moments,
        })
    }

    fn losses(
        &self,
        tape: &mut Tape,
        vars: &ParamSet<Var>,
        [vi, vi_star, vb, vb_star]: [Var; 4],
        terms: DiscTerms,
    ) -> Result<LossVars, ModelError> {
        let d = &vars.discriminator;
        let lg_i = soft_cross_entropy(tape, vi, vi_star)?;
        let lg_b = soft_cross_entropy(tape, vb, vb_star)?;

        let disc_loss = |tape: &mut Tape, real: Var, fake: Var, w: Var, b: Var| -> Result<Var, ModelError> {
            let (real, fake) = (tape.detach(real), tape.detach(fake));
            let yr = adversarial::discriminate(tape, real, w, b)?;
            let lr = binary_cross_entropy(tape, yr, true);
            Ok(match terms {
                DiscTerms::Real => lr,
                DiscTerms::Both => {
                    let yf = adversarial::discriminate(tape, fake, w, b)?;
                    let lf = binary_cross_entropy(tape, yf, false);
                    let s = tape.add(lr, lf)?;
                    tape.scale(s, 0.5)
                }
            })
        };
        let ld_i = disc_loss(tape, vi, vi_star, d.w_instance, d.b_instance)?;
        let ld_b = disc_loss(tape, vb, vb_star, d.w_block, d.b_block)?;

        let mean_lg_i = tape.mean(lg_i);
        let lg_b_s = tape.sum(lg_b);
        let mut lg = tape.add(mean_lg_i, lg_b_s)?;
        let w = self.config.adversarial_weight;
        if w > 0.0 {
            let fi = adversarial::discriminate(tape, vi_star, d.w_instance, d.b_instance)?;
            let fi = binary_cross_entropy(tape, fi, true);
            let fi = tape.mean(fi);
            let fb = adversarial::discriminate(tape, vb_star, d.w_block, d.b_block)?;
            let fb = binary_cross_entropy(tape, fb, true);
            let fb = tape.sum(fb);
            let adv = tape.add(fi, fb)?;
            let adv = tape.scale(adv, w);
            lg = tape.add(lg, adv)?;
        }
        let mean_ld_i = tape.mean(ld_i);
        let ld_b_s = tape.sum(ld_b);
        let ld = tape.add(mean_ld_i, ld_b_s)?;
        Ok(LossVars {
            generator_instance: lg_i,
            discriminator_instance: ld_i,
            generator_block: lg_b_s,
            discriminator_block: ld_b_s,
            generator_total: lg,
            discriminator_total: ld,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Label, SyntheticParams};

    fn small_config() -> TrainConfig {
        TrainConfig {
            embed_dim: 3,
            hidden: 4,
            ..TrainConfig::default()
        }
    }

    fn dims() -> ModelDims {
        ModelDims { dimension: 30, attributes: 3 }
    }

    #[test]
    fn layout_shapes_and_groups() {
        let m = Model::new(&TrainConfig::default(), dims(), &mut RngState::new(0)).unwrap();
        let shape = |i: usize| m.params[i].shape().to_vec();
        let r = &m.layout.representation;
        assert_eq!(shape(r.embedding), [30, 16]);
        assert_eq!(shape(r.relative.unwrap().w), [16 + 32, 16]);
        assert_eq!(shape(r.rnn.w_rec), [32, 32]);
        assert_eq!(shape(r.rnn.w_in), [32, 32]);
        assert_eq!(shape(m.layout.autoencoder.w_enc), [32, 16]);
        assert_eq!(shape(m.layout.discriminator.w_block), [32, 1]);
        assert_eq!(m.indices(Group::Discriminator).len(), 4);
        for (spec, p) in m.specs.iter().zip(&m.params) {
            if spec.bias {
                assert!(p.data().iter().all(|&x| x == 0.0), "{}", spec.name);
            } else {
                assert!(p.data().iter().all(|&x| x.abs() < 0.05), "{}", spec.name);
            }
        }
        let ablated = TrainConfig { no_relrep: true, ..TrainConfig::default() };
        let m = Model::new(&ablated, dims(), &mut RngState::new(0)).unwrap();
        assert!(m.layout.representation.relative.is_none());
        assert_eq!(m.params[m.layout.autoencoder.w_enc].shape(), [16, 8]);
    }

    #[test]
    fn pass_shapes_and_finite_losses() {
        let data = generate_synthetic(&SyntheticParams::default(), 0);
        for cfg in [
            small_config(),
            TrainConfig { no_relrep: true, ..small_config() },
            TrainConfig { rnn_cell: RnnCell::Gated, adversarial_weight: 0.5, ..small_config() },
        ] {
            let m = Model::new(&cfg, dims(), &mut RngState::new(1)).unwrap();
            let noise = RngState::new(2).gaussian(&[7, cfg.instance_dim()]);
            let pass = m.forward(&data[..7], &m.zero_memory(), Some(&noise), PassOptions::TRAINING).unwrap();
            assert_eq!(pass.tape.value(pass.instance_vecs).shape(), [7, cfg.instance_dim()]);
            assert_eq!(pass.block_state().shape(), [1, 4]);
            let v = pass.values();
            assert_eq!(v.generator_instance.len(), 7);
            let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
            let lg = mean(&v.generator_instance) + v.generator_block;
            let ld = mean(&v.discriminator_instance) + v.discriminator_block;
            assert!((v.discriminator_total - ld).abs() < 1e-12);
            if cfg.adversarial_weight == 0.0 {
                assert!((v.generator_total - lg).abs() < 1e-12);
            } else {
                assert!(v.generator_total > lg);
            }
            assert!(v.generator_instance.iter().chain(&v.discriminator_instance).all(|x| x.is_finite() && *x >= 0.0));
        }
    }

    #[test]
    fn discriminator_loss_does_not_reach_generator() {
        let data = generate_synthetic(&SyntheticParams::default(), 0);
        let m = Model::new(&small_config(), dims(), &mut RngState::new(1)).unwrap();
        let pass = m.forward(&data[..5], &m.zero_memory(), None, PassOptions::TRAINING).unwrap();
        let grads = pass.param_grads(pass.losses.discriminator_total).unwrap();
        for i in m.indices(Group::Generator) {
            assert!(grads[i].as_ref().map_or(true, |g| g.data().iter().all(|&x| x == 0.0)));
        }
        for i in m.indices(Group::Discriminator) {
            assert!(grads[i].is_some());
        }
        // Without the adversarial term the generator loss ignores the discriminator.
        let grads = pass.param_grads(pass.losses.generator_total).unwrap();
        for i in m.indices(Group::Discriminator) {
            assert!(grads[i].is_none());
        }
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let m = Model::new(&small_config(), dims(), &mut RngState::new(1)).unwrap();
        let inst = vec![Instance::new(vec![vec![1], vec![2], vec![31]], Label::Normal, 0)];
        assert!(matches!(
            m.forward(&inst, &m.zero_memory(), None, PassOptions::TRAINING),
            Err(ModelError::UnknownFeature { id: 31, .. })
        ));
        let ok = vec![Instance::new(vec![vec![1], vec![2], vec![3]], Label::Normal, 0)];
        assert!(m.forward(&ok, &Tensor::zeros(&[1, 5]), None, PassOptions::TRAINING).is_err());
        assert!(m.forward(&[], &m.zero_memory(), None, PassOptions::TRAINING).is_err());
    }

    #[test]
    fn running_stats_move_toward_batch() {
        let mut r = RunningStats::new(2);
        r.update(&[1.0, 2.0], &[3.0, 1.0], 0.5);
        assert_eq!(r.mean, [0.5, 1.0]);
        assert_eq!(r.var, [2.0, 1.0]);
        assert_eq!(r.updates, 1);
    }
}
