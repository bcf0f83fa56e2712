//! Threshold-free and thresholded detection metrics.
//!
//! Inputs are `(score, anomalous)` pairs; higher scores mean more anomalous.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write;

use crate::EvalError;

fn class_counts(scores: &[(f64, bool)]) -> Result<(usize, usize), EvalError> {
    if let Some(i) = scores.iter().position(|(s, _)| s.is_nan()) {
        return Err(EvalError::NonFinite(i));
    }
    let positives = scores.iter().filter(|(_, y)| *y).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass { positives, negatives });
    }
    Ok((positives, negatives))
}

fn sorted(scores: &[(f64, bool)]) -> Vec<(f64, bool)> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    v
}

/// Mann-Whitney statistic: the chance that a random anomalous score beats a
/// random normal one, ties counting one half. Uses tie-averaged ranks.
pub fn auroc(scores: &[(f64, bool)]) -> Result<f64, EvalError> {
    let (pos, neg) = class_counts(scores)?;
    let v = sorted(scores);
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j].0 == v[i].0 {
            j += 1;
        }
        // Ranks i+1..=j share their average.
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * v[i..j].iter().filter(|(_, y)| *y).count() as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// ROC points `(fpr, tpr)` from the strictest threshold down, one point per
/// distinct score.
pub fn roc_curve(scores: &[(f64, bool)]) -> Result<Vec<(f64, f64)>, EvalError> {
    let (pos, neg) = class_counts(scores)?;
    let mut v = sorted(scores);
    v.reverse();
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < v.len() {
        let s = v[i].0;
        while i < v.len() && v[i].0 == s {
            if v[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Area under [`roc_curve`] by the trapezoid rule.
pub fn roc_area(scores: &[(f64, bool)]) -> Result<f64, EvalError> {
    let pts = roc_curve(scores)?;
    Ok(pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    pub value: f64,
    /// Sensitivity + specificity - 1 at `value`.
    pub youden: f64,
}

/// Threshold maximizing Youden's J, where scores strictly above it are
/// flagged. Candidates are midpoints between consecutive distinct scores and
/// the two infinite guards; ties go to the larger threshold.
pub fn optimal_threshold(scores: &[(f64, bool)]) -> Result<Threshold, EvalError> {
    let (pos, neg) = class_counts(scores)?;
    let mut v = sorted(scores);
    v.reverse();
    // J * pos * neg = tp * neg - fp * pos, compared exactly.
    let gain = |tp: usize, fp: usize| tp as i128 * neg as i128 - fp as i128 * pos as i128;
    let mut best = (f64::INFINITY, gain(0, 0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < v.len() {
        let s = v[i].0;
        while i < v.len() && v[i].0 == s {
            if v[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // Everything at or above `s` is now flagged.
        let candidate = if i < v.len() { (s + v[i].0) / 2.0 } else { f64::NEG_INFINITY };
        let g = gain(tp, fp);
        if g > best.1 {
            best = (candidate, g);
        }
    }
    Ok(Threshold {
        value: best.0,
        youden: best.1 as f64 / (pos as f64 * neg as f64),
    })
}

/// Confusion counts with "anomalous" as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn at(scores: &[(f64, bool)], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for &(s, y) in scores {
            match (s > threshold, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// `2TP / (2TP + FP + FN)`, defined as 0 when nothing is predicted or
    /// present in the class.
    fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            log::warn!("F1 of a class with no true and no predicted members set to 0");
            return 0.0;
        }
        2.0 * tp as f64 / denom as f64
    }

    pub fn f1_anomalous(&self) -> f64 {
        Self::f1(self.tp, self.fp, self.fn_)
    }

    pub fn f1_normal(&self) -> f64 {
        Self::f1(self.tn, self.fn_, self.fp)
    }

    pub fn f1_macro(&self) -> f64 {
        (self.f1_normal() + self.f1_anomalous()) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub auroc: f64,
    pub threshold: f64,
    pub youden: f64,
    pub accuracy: f64,
    pub f1_macro: f64,
    pub counts: Confusion,
}

/// Applies `threshold` and collects the thresholded metrics.
pub fn classify_and_report(scores: &[(f64, bool)], auroc: f64, threshold: Threshold) -> EvalReport {
    let counts = Confusion::at(scores, threshold.value);
    EvalReport {
        auroc,
        threshold: threshold.value,
        youden: threshold.youden,
        accuracy: counts.accuracy(),
        f1_macro: counts.f1_macro(),
        counts,
    }
}

/// AUROC, then the optimal threshold, then accuracy and F1 at it.
pub fn evaluate(scores: &[(f64, bool)]) -> Result<EvalReport, EvalError> {
    let a = auroc(scores)?;
    let t = optimal_threshold(scores)?;
    Ok(classify_and_report(scores, a, t))
}

impl EvalReport {
    /// `prefix.key=value` lines.
    pub fn write_text(&self, prefix: &str, out: &mut String) {
        let c = &self.counts;
        let fields: [(&str, String); 10] = [
            ("auroc", self.auroc.to_string()),
            ("threshold", self.threshold.to_string()),
            ("youden_j", self.youden.to_string()),
            ("accuracy", self.accuracy.to_string()),
            ("f1_macro", self.f1_macro.to_string()),
            ("tp", c.tp.to_string()),
            ("fp", c.fp.to_string()),
            ("tn", c.tn.to_string()),
            ("fn", c.fn_.to_string()),
            ("n", c.total().to_string()),
        ];
        for (k, v) in fields {
            writeln!(out, "{prefix}.{k}={v}").expect("writing to a string");
        }
    }

    /// Reads back the lines written by [`EvalReport::write_text`].
    pub fn from_map(prefix: &str, map: &BTreeMap<String, String>) -> Option<EvalReport> {
        let get = |k: &str| map.get(&format!("{prefix}.{k}"));
        let f = |k: &str| get(k)?.parse::<f64>().ok();
        let u = |k: &str| get(k)?.parse::<usize>().ok();
        Some(EvalReport {
            auroc: f("auroc")?,
            threshold: f("threshold")?,
            youden: f("youden_j")?,
            accuracy: f("accuracy")?,
            f1_macro: f("f1_macro")?,
            counts: Confusion {
                tp: u("tp")?,
                fp: u("fp")?,
                tn: u("tn")?,
                fn_: u("fn")?,
            },
        })
    }
}
