//! Cross-entropy losses, negated so that every value is non-negative.

use crate::tensor::{Tape, TensorError, Var};

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

/// Row-wise `-[s(t) . log s(p) + (1 - s(t)) . log(1 - s(p))]` with `s` the
/// sigmoid; returns an `n x 1` column.
pub fn soft_cross_entropy(tape: &mut Tape, target: Var, pred: Var) -> Result<Var, TensorError> {
    let t = tape.sigmoid(target);
    let p = tape.sigmoid(pred);
    let p = tape.clamp(p, PROB_CLAMP, 1.0 - PROB_CLAMP);
    let log_p = tape.log(p);
    let q = tape.affine(p, -1.0, 1.0);
    let log_q = tape.log(q);
    let t_bar = tape.affine(t, -1.0, 1.0);
    let a = tape.mul(t, log_p)?;
    let b = tape.mul(t_bar, log_q)?;
    let s = tape.add(a, b)?;
    let rows = tape.row_sums(s)?;
    Ok(tape.scale(rows, -1.0))
}

/// Elementwise `-log y` for real labels, `-log(1 - y)` otherwise.
pub fn binary_cross_entropy(tape: &mut Tape, prob: Var, real: bool) -> Var {
    let p = tape.clamp(prob, PROB_CLAMP, 1.0 - PROB_CLAMP);
    let p = if real { p } else { tape.affine(p, -1.0, 1.0) };
    let l = tape.log(p);
    tape.scale(l, -1.0)
}
