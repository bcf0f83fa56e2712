//! Feature, attribute, instance and block representations built on the tape.
//!
//! All functions work on a whole block at once: row `i * attributes + a` of
//! the attribute matrix holds attribute `a` of instance `i`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::Instance;
use crate::tensor::{Tape, Tensor, TensorError, Var};
use crate::ModelError;

/// `e = tanh(x W + b) u` scores followed by softmax pooling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionParams<T> {
    pub w: T,
    pub b: T,
    pub u: T,
}

/// Update-gate and reset-gate weights of a gated cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateParams<T> {
    pub w_in_z: T,
    pub w_rec_z: T,
    pub b_z: T,
    pub w_in_r: T,
    pub w_rec_r: T,
    pub b_r: T,
}

/// `h_t = tanh(x_t W_in + h_{t-1} W_rec + b)`, or the gated variant when
/// `gates` is present.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RnnParams<T> {
    pub w_in: T,
    pub w_rec: T,
    pub b: T,
    pub gates: Option<GateParams<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Representation<T> {
    /// `dimension x embed_dim` feature table.
    pub embedding: T,
    pub feature: AttentionParams<T>,
    pub self_attention: AttentionParams<T>,
    /// Absent when the relative representation is ablated.
    pub relative: Option<AttentionParams<T>>,
    pub rnn: RnnParams<T>,
}

impl<T: Copy> AttentionParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> AttentionParams<U> {
        AttentionParams {
            w: f(self.w),
            b: f(self.b),
            u: f(self.u),
        }
    }
}

impl<T: Copy> RnnParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> RnnParams<U> {
        RnnParams {
            w_in: f(self.w_in),
            w_rec: f(self.w_rec),
            b: f(self.b),
            gates: self.gates.map(|g| GateParams {
                w_in_z: f(g.w_in_z),
                w_rec_z: f(g.w_rec_z),
                b_z: f(g.b_z),
                w_in_r: f(g.w_in_r),
                w_rec_r: f(g.w_rec_r),
                b_r: f(g.b_r),
            }),
        }
    }
}

impl<T: Copy> Representation<T> {
    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> Representation<U> {
        Representation {
            embedding: f(self.embedding),
            feature: self.feature.map(&mut f),
            self_attention: self.self_attention.map(&mut f),
            relative: self.relative.map(|r| r.map(&mut f)),
            rnn: self.rnn.map(&mut f),
        }
    }
}

/// Unnormalized attention scores `tanh(x W + b) u`, one per row of `x`.
pub fn attention_scores(
    tape: &mut Tape,
    x: Var,
    p: &AttentionParams<Var>,
) -> Result<Var, TensorError> {
    let xw = tape.matmul(x, p.w)?;
    let pre = tape.add_row(xw, p.b)?;
    let act = tape.tanh(pre);
    tape.matmul(act, p.u)
}

/// Attention-pooled attribute vectors for every attribute of every instance,
/// as an `(instances * attributes) x embed_dim` matrix. Empty attributes give
/// zero rows.
pub fn attribute_vectors(
    tape: &mut Tape,
    table: Var,
    instances: &[Instance],
    attributes: usize,
    p: &AttentionParams<Var>,
) -> Result<Var, ModelError> {
    let mut ids = Vec::new();
    let mut segments: Vec<Range<usize>> = Vec::with_capacity(instances.len() * attributes);
    for (i, inst) in instances.iter().enumerate() {
        if inst.attributes.len() != attributes {
            return Err(ModelError::AttributeCount {
                instance: i,
                expected: attributes,
                found: inst.attributes.len(),
            });
        }
        for attr in &inst.attributes {
            let start = ids.len();
            ids.extend_from_slice(attr);
            segments.push(start..ids.len());
        }
    }
    let width = tape.value(table).cols();
    if ids.is_empty() {
        return Ok(tape.constant(Tensor::zeros(&[segments.len(), width])));
    }
    let features = tape.gather_rows(table, &ids).map_err(|e| match e {
        TensorError::IndexOutOfRange { index, bound } => ModelError::UnknownFeature {
            id: index,
            dimension: bound,
        },
        other => other.into(),
    })?;
    let scores = attention_scores(tape, features, p)?;
    Ok(tape.attention_pool(scores, features, segments)?)
}

/// Attention over a single attribute's feature ids.
pub fn attend_attribute(
    tape: &mut Tape,
    table: Var,
    ids: &[usize],
    p: &AttentionParams<Var>,
) -> Result<Var, ModelError> {
    let inst = Instance::new(vec![ids.to_vec()], crate::data::Label::Unknown, 0);
    attribute_vectors(tape, table, std::slice::from_ref(&inst), 1, p)
}

fn instance_segments(rows: usize, attributes: usize) -> Vec<Range<usize>> {
    (0..rows / attributes)
        .map(|i| i * attributes..(i + 1) * attributes)
        .collect()
}

/// Self representation per instance: attention over its attribute vectors.
pub fn instance_self(
    tape: &mut Tape,
    attribute_vecs: Var,
    attributes: usize,
    p: &AttentionParams<Var>,
) -> Result<Var, TensorError> {
    let rows = tape.value(attribute_vecs).rows();
    let scores = attention_scores(tape, attribute_vecs, p)?;
    tape.attention_pool(scores, attribute_vecs, instance_segments(rows, attributes))
}

/// Relative representation per instance: scores from `[f(v^A), v^Mem]`,
/// weights applied to the raw attribute vectors.
pub fn instance_relative(
    tape: &mut Tape,
    attribute_vecs: Var,
    memory: Var,
    attributes: usize,
    slope: f64,
    p: &AttentionParams<Var>,
) -> Result<Var, TensorError> {
    let rows = tape.value(attribute_vecs).rows();
    let act = tape.leaky_relu(attribute_vecs, slope);
    let mem = tape.repeat_rows(memory, rows)?;
    let joined = tape.concat_cols(act, mem)?;
    let scores = attention_scores(tape, joined, p)?;
    tape.attention_pool(scores, attribute_vecs, instance_segments(rows, attributes))
}

/// Column means and population variances of a matrix.
pub fn column_moments(t: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (t.rows(), t.cols());
    let mut mean = vec![0.0; n];
    for r in 0..m {
        for (acc, x) in mean.iter_mut().zip(t.row_slice(r)) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= m as f64);
    let mut var = vec![0.0; n];
    for r in 0..m {
        for ((acc, x), mu) in var.iter_mut().zip(t.row_slice(r)).zip(&mean) {
            *acc += (x - mu) * (x - mu);
        }
    }
    var.iter_mut().for_each(|x| *x /= m as f64);
    (mean, var)
}

/// Normalization statistics applied to instance vectors.
pub enum Normalization<'a> {
    /// Standardize with the current block's statistics.
    Batch,
    /// Standardize with fixed column means and variances.
    Fixed { mean: &'a [f64], var: &'a [f64] },
}

/// `v^I = norm([v^S, v^R])`, or `norm(v^S)` without a relative part.
pub fn instance_vectors(
    tape: &mut Tape,
    self_vecs: Var,
    relative_vecs: Option<Var>,
    norm: &Normalization<'_>,
    eps: f64,
) -> Result<Var, TensorError> {
    let joined = match relative_vecs {
        Some(r) => tape.concat_cols(self_vecs, r)?,
        None => self_vecs,
    };
    match norm {
        Normalization::Batch => tape.batch_norm(joined, eps),
        Normalization::Fixed { mean, var } => {
            let rows = tape.value(joined).rows();
            let shift = Tensor::row(mean.iter().map(|m| -m).collect())?;
            let inv = Tensor::row(var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect())?;
            let shift = tape.constant(shift);
            let inv = tape.constant(inv);
            let centered = tape.add_row(joined, shift)?;
            let inv = tape.repeat_rows(inv, rows)?;
            tape.mul(centered, inv)
        }
    }
}

/// Runs the cell over the rows of `inputs` from `initial`, returning every
/// hidden state (each `1 x h`). Inputs are used as given; callers apply the
/// leaky ReLU first.
pub fn run_rnn(
    tape: &mut Tape,
    inputs: Var,
    initial: Var,
    p: &RnnParams<Var>,
) -> Result<Vec<Var>, TensorError> {
    let steps = tape.value(inputs).rows();
    let project = |tape: &mut Tape, w: Var, b: Var| -> Result<Var, TensorError> {
        let xw = tape.matmul(inputs, w)?;
        tape.add_row(xw, b)
    };
    let x = project(tape, p.w_in, p.b)?;
    let gates = match &p.gates {
        Some(g) => Some((project(tape, g.w_in_z, g.b_z)?, project(tape, g.w_in_r, g.b_r)?, g)),
        None => None,
    };
    let mut h = initial;
    let mut states = Vec::with_capacity(steps);
    for i in 0..steps {
        let xi = tape.row(x, i)?;
        h = match gates {
            None => {
                let rec = tape.matmul(h, p.w_rec)?;
                let pre = tape.add(xi, rec)?;
                tape.tanh(pre)
            }
            Some((xz, xr, g)) => {
                let gate = |tape: &mut Tape, xg: Var, w: Var| -> Result<Var, TensorError> {
                    let xgi = tape.row(xg, i)?;
                    let rec = tape.matmul(h, w)?;
                    let pre = tape.add(xgi, rec)?;
                    Ok(tape.sigmoid(pre))
                };
                let z = gate(tape, xz, g.w_rec_z)?;
                let r = gate(tape, xr, g.w_rec_r)?;
                let rh = tape.mul(r, h)?;
                let rec = tape.matmul(rh, p.w_rec)?;
                let pre = tape.add(xi, rec)?;
                let cand = tape.tanh(pre);
                // h' = cand + z * (h - cand)
                let diff = tape.sub(h, cand)?;
                let keep = tape.mul(z, diff)?;
                tape.add(cand, keep)?
            }
        };
        states.push(h);
    }
    Ok(states)
}

/// Hidden states of the block RNN over `f(v^I)`; the last one is `v^B`.
pub fn block_forward(
    tape: &mut Tape,
    instance_vecs: Var,
    previous: Var,
    slope: f64,
    p: &RnnParams<Var>,
) -> Result<Vec<Var>, TensorError> {
    let act = tape.leaky_relu(instance_vecs, slope);
    run_rnn(tape, act, previous, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;
    use crate::tensor::RngState;

    fn attention(tape: &mut Tape, rng: &mut RngState, input: usize, width: usize) -> AttentionParams<Var> {
        AttentionParams {
            w: tape.param(&rng.uniform_tensor(&[input, width], -0.5, 0.5)),
            b: tape.param(&rng.uniform_tensor(&[1, width], -0.5, 0.5)),
            u: tape.param(&rng.uniform_tensor(&[width, 1], -0.5, 0.5)),
        }
    }

    /// Scalar recomputation of `sum_i softmax(u . tanh(W^T x_i + b))_i x_i`.
    fn pool_by_hand(rows: &[Vec<f64>], keys: &[Vec<f64>], w: &Tensor, b: &Tensor, u: &Tensor) -> Vec<f64> {
        let mut e = Vec::new();
        for k in keys {
            let mut s = 0.0;
            for j in 0..w.cols() {
                let mut z = b.data()[j];
                for (i, x) in k.iter().enumerate() {
                    z += x * w.at(i, j);
                }
                s += u.data()[j] * z.tanh();
            }
            e.push(s);
        }
        let top = e.iter().cloned().fold(f64::MIN, f64::max);
        let exp: Vec<f64> = e.iter().map(|x| (x - top).exp()).collect();
        let total: f64 = exp.iter().sum();
        let mut out = vec![0.0; rows[0].len()];
        for (r, a) in rows.iter().zip(&exp) {
            for (o, x) in out.iter_mut().zip(r) {
                *o += a / total * x;
            }
        }
        out
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn single_feature_and_repeated_id() {
        let mut rng = RngState::new(1);
        let mut tape = Tape::new();
        let table_t = rng.uniform_tensor(&[5, 4], -1.0, 1.0);
        let table = tape.param(&table_t);
        let p = attention(&mut tape, &mut rng, 4, 4);
        let one = attend_attribute(&mut tape, table, &[3], &p).unwrap();
        close(tape.value(one).data(), table_t.row_slice(3), 1e-12);
        let many = attend_attribute(&mut tape, table, &[2, 2, 2, 2], &p).unwrap();
        close(tape.value(many).data(), table_t.row_slice(2), 1e-12);
    }

    #[test]
    fn three_features_match_hand_oracle() {
        let mut rng = RngState::new(2);
        let mut tape = Tape::new();
        let table_t = rng.uniform_tensor(&[6, 3], -1.0, 1.0);
        let table = tape.param(&table_t);
        let p = attention(&mut tape, &mut rng, 3, 2);
        let got = attend_attribute(&mut tape, table, &[0, 4, 5], &p).unwrap();
        let rows: Vec<Vec<f64>> = [0, 4, 5].iter().map(|&i| table_t.row_slice(i).to_vec()).collect();
        let want = pool_by_hand(&rows, &rows, tape.value(p.w), tape.value(p.b), tape.value(p.u));
        close(tape.value(got).data(), &want, 1e-10);
    }

    #[test]
    fn empty_attribute_is_zero_and_unknown_id_errors() {
        let mut rng = RngState::new(3);
        let mut tape = Tape::new();
        let table = tape.param(&rng.uniform_tensor(&[4, 3], -1.0, 1.0));
        let p = attention(&mut tape, &mut rng, 3, 3);
        let inst = vec![Instance::new(vec![vec![1], vec![], vec![2, 3]], Label::Normal, 0)];
        let va = attribute_vectors(&mut tape, table, &inst, 3, &p).unwrap();
        assert_eq!(tape.value(va).row_slice(1), &[0.0; 3]);
        let err = attend_attribute(&mut tape, table, &[9], &p).unwrap_err();
        assert_eq!(err, ModelError::UnknownFeature { id: 9, dimension: 4 });
        let all_empty = vec![Instance::new(vec![vec![], vec![]], Label::Normal, 0)];
        let va = attribute_vectors(&mut tape, table, &all_empty, 2, &p).unwrap();
        assert_eq!(tape.value(va).data(), &[0.0; 6]);
        assert!(matches!(
            attribute_vectors(&mut tape, table, &all_empty, 3, &p),
            Err(ModelError::AttributeCount { .. })
        ));
    }

    #[test]
    fn permuting_features_leaves_attribute_vector_unchanged() {
        let mut rng = RngState::new(4);
        let mut tape = Tape::new();
        let table = tape.param(&rng.uniform_tensor(&[8, 4], -1.0, 1.0));
        let p = attention(&mut tape, &mut rng, 4, 4);
        let a = attend_attribute(&mut tape, table, &[1, 5, 7, 2], &p).unwrap();
        let b = attend_attribute(&mut tape, table, &[7, 2, 1, 5], &p).unwrap();
        close(tape.value(a).data(), tape.value(b).data(), 1e-12);
    }

    #[test]
    fn self_attention_cases() {
        let mut rng = RngState::new(5);
        let mut tape = Tape::new();
        let p = attention(&mut tape, &mut rng, 3, 3);
        let single_t = rng.uniform_tensor(&[2, 3], -1.0, 1.0);
        let single = tape.constant(single_t.clone());
        let vs = instance_self(&mut tape, single, 1, &p).unwrap();
        assert_eq!(tape.value(vs), &single_t);

        let same = tape.constant(Tensor::from_rows(&vec![vec![0.3, -0.2, 0.1]; 3]).unwrap());
        let vs = instance_self(&mut tape, same, 3, &p).unwrap();
        close(tape.value(vs).data(), &[0.3, -0.2, 0.1], 1e-12);

        let rows_t = rng.uniform_tensor(&[3, 3], -1.0, 1.0);
        let rows = tape.constant(rows_t.clone());
        let vs = instance_self(&mut tape, rows, 3, &p).unwrap();
        let r: Vec<Vec<f64>> = (0..3).map(|i| rows_t.row_slice(i).to_vec()).collect();
        let want = pool_by_hand(&r, &r, tape.value(p.w), tape.value(p.b), tape.value(p.u));
        close(tape.value(vs).data(), &want, 1e-10);
    }

    #[test]
    fn relative_attention_cases() {
        let mut rng = RngState::new(6);
        let mut tape = Tape::new();
        let (e, h) = (3, 4);
        let p = attention(&mut tape, &mut rng, e + h, 3);
        let slope = 0.01;
        let rows_t = rng.uniform_tensor(&[3, e], -1.0, 1.0);
        let rows = tape.constant(rows_t.clone());
        for mem_t in [Tensor::zeros(&[1, h]), rng.uniform_tensor(&[1, h], -1.0, 1.0)] {
            let mem = tape.constant(mem_t.clone());
            let vr = instance_relative(&mut tape, rows, mem, 3, slope, &p).unwrap();
            let values: Vec<Vec<f64>> = (0..3).map(|i| rows_t.row_slice(i).to_vec()).collect();
            let keys: Vec<Vec<f64>> = values
                .iter()
                .map(|v| {
                    let mut k: Vec<f64> = v.iter().map(|&x| if x > 0.0 { x } else { slope * x }).collect();
                    k.extend_from_slice(mem_t.data());
                    k
                })
                .collect();
            let want = pool_by_hand(&values, &keys, tape.value(p.w), tape.value(p.b), tape.value(p.u));
            close(tape.value(vr).data(), &want, 1e-10);
        }
        let same = tape.constant(Tensor::from_rows(&vec![vec![0.5, 0.1, -0.4]; 3]).unwrap());
        let mem = tape.constant(rng.uniform_tensor(&[1, h], -3.0, 3.0));
        let vr = instance_relative(&mut tape, same, mem, 3, slope, &p).unwrap();
        close(tape.value(vr).data(), &[0.5, 0.1, -0.4], 1e-12);
    }

    #[test]
    fn instance_vector_normalization() {
        let mut tape = Tape::new();
        let vs = tape.constant(Tensor::from_rows(&[vec![0.4, -1.0]]).unwrap());
        let vr = tape.constant(Tensor::from_rows(&[vec![2.0, 3.0]]).unwrap());
        let one = instance_vectors(&mut tape, vs, Some(vr), &Normalization::Batch, 1e-5).unwrap();
        assert_eq!(tape.value(one).data(), &[0.0; 4]);

        let vs = tape.constant(Tensor::from_rows(&[vec![1.0, -2.0], vec![-1.0, 2.0]]).unwrap());
        let two = instance_vectors(&mut tape, vs, None, &Normalization::Batch, 0.0).unwrap();
        close(tape.value(two).data(), &[1.0, -1.0, -1.0, 1.0], 1e-12);

        let fixed = Normalization::Fixed { mean: &[1.0, 0.0], var: &[4.0, 1.0] };
        let v = instance_vectors(&mut tape, vs, None, &fixed, 0.0).unwrap();
        close(tape.value(v).data(), &[0.0, -2.0, -1.0, 2.0], 1e-12);
    }

    fn rnn(tape: &mut Tape, rng: &mut RngState, d: usize, h: usize, gated: bool) -> RnnParams<Var> {
        let mut m = |r, c| tape.param(&rng.uniform_tensor(&[r, c], -0.5, 0.5));
        let (w_in, w_rec, b) = (m(d, h), m(h, h), m(1, h));
        let gates = gated.then(|| GateParams {
            w_in_z: m(d, h),
            w_rec_z: m(h, h),
            b_z: m(1, h),
            w_in_r: m(d, h),
            w_rec_r: m(h, h),
            b_r: m(1, h),
        });
        RnnParams { w_in, w_rec, b, gates }
    }

    #[test]
    fn rnn_matches_step_by_step_oracle() {
        let mut rng = RngState::new(7);
        let mut tape = Tape::new();
        let (d, h) = (2, 3);
        let p = rnn(&mut tape, &mut rng, d, h, false);
        let xs_t = rng.uniform_tensor(&[3, d], -1.0, 1.0);
        let h0_t = rng.uniform_tensor(&[1, h], -1.0, 1.0);
        let xs = tape.constant(xs_t.clone());
        let h0 = tape.constant(h0_t.clone());
        let states = block_forward(&mut tape, xs, h0, 0.01, &p).unwrap();
        assert_eq!(states.len(), 3);

        let (wi, wr, b) = (tape.value(p.w_in), tape.value(p.w_rec), tape.value(p.b));
        let mut hv = h0_t.data().to_vec();
        for (t, &s) in states.iter().enumerate() {
            let x: Vec<f64> = xs_t.row_slice(t).iter().map(|&v| if v > 0.0 { v } else { 0.01 * v }).collect();
            let next: Vec<f64> = (0..h)
                .map(|j| {
                    let mut z = b.data()[j];
                    for (i, xi) in x.iter().enumerate() {
                        z += xi * wi.at(i, j);
                    }
                    for (i, hi) in hv.iter().enumerate() {
                        z += hi * wr.at(i, j);
                    }
                    z.tanh()
                })
                .collect();
            close(tape.value(s).data(), &next, 1e-12);
            hv = next;
        }
    }

    #[test]
    fn rnn_boundary_cases() {
        let mut rng = RngState::new(8);
        for gated in [false, true] {
            let mut tape = Tape::new();
            let mut p = rnn(&mut tape, &mut rng, 4, 3, gated);
            p.b = tape.constant(Tensor::zeros(&[1, 3]));
            if let Some(g) = p.gates.as_mut() {
                g.b_z = tape.constant(Tensor::zeros(&[1, 3]));
                g.b_r = tape.constant(Tensor::zeros(&[1, 3]));
            }
            let zeros = tape.constant(Tensor::zeros(&[5, 4]));
            let h0 = tape.constant(Tensor::zeros(&[1, 3]));
            let states = block_forward(&mut tape, zeros, h0, 0.01, &p).unwrap();
            assert_eq!(tape.value(*states.last().unwrap()).data(), &[0.0; 3]);

            let x = tape.constant(rng.uniform_tensor(&[1, 4], -1.0, 1.0));
            let states = block_forward(&mut tape, x, h0, 0.01, &p).unwrap();
            assert_eq!(states.len(), 1);
            assert_eq!(tape.value(states[0]).shape(), &[1, 3]);
        }
    }

    #[test]
    fn gated_cell_blends_candidate_and_previous_state() {
        let mut rng = RngState::new(9);
        let mut tape = Tape::new();
        let p = rnn(&mut tape, &mut rng, 2, 2, true);
        let x_t = Tensor::from_rows(&[vec![0.3, -0.7]]).unwrap();
        let h0_t = Tensor::from_rows(&[vec![0.2, 0.5]]).unwrap();
        let x = tape.constant(x_t.clone());
        let h0 = tape.constant(h0_t.clone());
        let h1 = run_rnn(&mut tape, x, h0, &p).unwrap()[0];

        let g = p.gates.unwrap();
        let lin = |w: Var, v: &[f64], j: usize| -> f64 {
            let w = tape.value(w);
            v.iter().enumerate().map(|(i, a)| a * w.at(i, j)).sum()
        };
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let (x, h) = (x_t.data(), h0_t.data());
        let r: Vec<f64> = (0..2)
            .map(|j| sig(lin(g.w_in_r, x, j) + lin(g.w_rec_r, h, j) + tape.value(g.b_r).data()[j]))
            .collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let want: Vec<f64> = (0..2)
            .map(|j| {
                let z = sig(lin(g.w_in_z, x, j) + lin(g.w_rec_z, h, j) + tape.value(g.b_z).data()[j]);
                let n = (lin(p.w_in, x, j) + lin(p.w_rec, &rh, j) + tape.value(p.b).data()[j]).tanh();
                (1.0 - z) * n + z * h[j]
            })
            .collect();
        close(tape.value(h1).data(), &want, 1e-12);
    }

    #[test]
    fn gradients_reach_embeddings_through_attention() {
        // Two-instance toy block: embeddings -> attentions -> norm -> RNN.
        let mut rng = RngState::new(10);
        let (e, h) = (3, 4);
        let table_t = rng.uniform_tensor(&[6, e], -1.0, 1.0);
        let mut params = vec![table_t];
        for shape in [[e, e], [1, e], [e, 1], [e, e], [1, e], [e, 1], [e + h, e], [1, e], [e, 1]] {
            params.push(rng.uniform_tensor(&shape, -0.5, 0.5));
        }
        for shape in [[2 * e, h], [h, h], [1, h]] {
            params.push(rng.uniform_tensor(&shape, -0.5, 0.5));
        }
        let insts = vec![
            Instance::new(vec![vec![0, 3], vec![5]], Label::Normal, 0),
            Instance::new(vec![vec![1], vec![2, 4, 1]], Label::Normal, 1),
        ];
        let mem_t = rng.uniform_tensor(&[1, h], -0.5, 0.5);
        let loss_of = |ps: &[Tensor], grad: bool| -> (f64, Option<Tensor>) {
            let mut tape = Tape::new();
            let v: Vec<Var> = ps.iter().map(|p| tape.param(p)).collect();
            let att = |k: usize| AttentionParams { w: v[k], b: v[k + 1], u: v[k + 2] };
            let va = attribute_vectors(&mut tape, v[0], &insts, 2, &att(1)).unwrap();
            let vs = instance_self(&mut tape, va, 2, &att(4)).unwrap();
            let mem = tape.constant(mem_t.clone());
            let vr = instance_relative(&mut tape, va, mem, 2, 0.01, &att(7)).unwrap();
            let vi = instance_vectors(&mut tape, vs, Some(vr), &Normalization::Batch, 1e-5).unwrap();
            let p = RnnParams { w_in: v[10], w_rec: v[11], b: v[12], gates: None };
            let states = block_forward(&mut tape, vi, mem, 0.01, &p).unwrap();
            let s = tape.sum(*states.last().unwrap());
            let g = grad.then(|| tape.backward(s).unwrap().get(v[0]).unwrap().clone());
            (tape.value(s).item(), g)
        };
        let analytic = loss_of(&params, true).1.unwrap();
        let mut numeric = Vec::new();
        let step = 1e-5;
        for k in 0..params[0].len() {
            let mut up = params.clone();
            up[0].data_mut()[k] += step;
            let mut dn = params.clone();
            dn[0].data_mut()[k] -= step;
            numeric.push((loss_of(&up, false).0 - loss_of(&dn, false).0) / (2.0 * step));
        }
        let diff: f64 = analytic.data().iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum();
        let scale: f64 = numeric.iter().map(|b| b * b).sum::<f64>().max(1e-12);
        assert!((diff / scale).sqrt() < 1e-4);
        // Feature id 0..5 all used, so every embedding row gets signal.
        assert!(analytic.data().iter().any(|g| g.abs() > 1e-8));
    }
}
