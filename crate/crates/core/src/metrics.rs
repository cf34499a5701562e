//! Confusion-matrix statistics, ROC curves and AUC.
//!
//! Every statistic is one-vs-rest against an explicitly named positive
//! class. Ratios with a zero denominator are `None` rather than `0`.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClassSet;
use crate::scalar::Scalar;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub positive: String,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts with the positive and negative roles exchanged.
    pub fn swapped(&self, positive: impl Into<String>) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
            positive: positive.into(),
        }
    }

    pub fn metrics(&self) -> MetricSet {
        MetricSet {
            sensitivity: sensitivity(self),
            specificity: specificity(self),
            accuracy: accuracy(self),
            f1: f1(self),
        }
    }
}

pub fn confusion<T: PartialEq + fmt::Display>(
    predicted: &[T],
    truth: &[T],
    positive: &T,
) -> Result<Confusion> {
    if predicted.len() != truth.len() {
        return Err(Error::shape("predictions vs truth", truth.len(), predicted.len()));
    }
    let mut c = Confusion {
        positive: positive.to_string(),
        ..Confusion::default()
    };
    for (p, t) in predicted.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn sensitivity(c: &Confusion) -> Option<f64> {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn specificity(c: &Confusion) -> Option<f64> {
    ratio(c.tn, c.tn + c.fp)
}

pub fn accuracy(c: &Confusion) -> Option<f64> {
    ratio(c.tp + c.tn, c.total())
}

pub fn f1(c: &Confusion) -> Option<f64> {
    ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
}

fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    ratio_f(sum, n)
}

fn ratio_f(sum: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| sum / n as f64)
}

impl MetricSet {
    /// Per-field mean over the sets where the field is defined.
    pub fn macro_mean(sets: &[MetricSet]) -> MetricSet {
        MetricSet {
            sensitivity: mean_defined(sets.iter().map(|m| m.sensitivity)),
            specificity: mean_defined(sets.iter().map(|m| m.specificity)),
            accuracy: mean_defined(sets.iter().map(|m| m.accuracy)),
            f1: mean_defined(sets.iter().map(|m| m.f1)),
        }
    }
}

/// Operating points ordered by decreasing threshold, from `(0,0)` to `(1,1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|p| (p[1].0 - p[0].0) * (p[1].1 + p[0].1) / 2.0)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (x, y) in &self.points {
            let _ = writeln!(out, "{x},{y}");
        }
        out
    }
}

/// ROC curve for `scores` where larger means "more likely positive".
/// Records sharing a score enter together, so ties trace a diagonal
/// segment worth half a concordant pair.
pub fn roc_curve<F: Scalar, T: PartialEq>(scores: &[F], truth: &[T], positive: &T) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(Error::shape("scores vs truth", truth.len(), scores.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("ROC scores"));
    }
    let is_pos: Vec<bool> = truth.iter().map(|t| t == positive).collect();
    let pos = is_pos.iter().filter(|&&p| p).count();
    let neg = is_pos.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("NaN filtered"));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if is_pos[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(RocCurve { points })
}

pub fn auc<F: Scalar, T: PartialEq>(scores: &[F], truth: &[T], positive: &T) -> Result<f64> {
    Ok(roc_curve(scores, truth, positive)?.auc())
}

/// One-vs-rest margin of class `c`: its score minus the best other score.
pub fn one_vs_rest_margin<F: Scalar>(scores: &[F], c: usize) -> F {
    let best_other = scores
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != c)
        .map(|(_, &s)| s)
        .fold(F::neg_infinity(), F::max);
    scores[c] - best_other
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub confusion: Confusion,
    pub metrics: MetricSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: MetricSet,
    /// Fraction of records whose class was predicted exactly.
    pub overall_accuracy: Option<f64>,
}

/// One-vs-rest statistics for every class index in `0..classes.len()`.
pub fn per_class_report(predicted: &[usize], truth: &[usize], classes: &ClassSet) -> Result<ClassReport> {
    if predicted.len() != truth.len() {
        return Err(Error::shape("predictions vs truth", truth.len(), predicted.len()));
    }
    let c = classes.len();
    if let Some(&bad) = predicted.iter().chain(truth).find(|&&k| k >= c) {
        return Err(Error::ClassOutOfRange { index: bad, classes: c });
    }
    let per_class: Vec<ClassMetrics> = (0..c)
        .map(|k| {
            let mut conf = confusion(predicted, truth, &k)?;
            conf.positive = classes.names()[k].clone();
            Ok(ClassMetrics {
                class: conf.positive.clone(),
                metrics: conf.metrics(),
                confusion: conf,
            })
        })
        .collect::<Result<_>>()?;
    let sets: Vec<MetricSet> = per_class.iter().map(|m| m.metrics).collect();
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(ClassReport {
        per_class,
        macro_avg: MetricSet::macro_mean(&sets),
        overall_accuracy: ratio(correct, truth.len()),
    })
}
