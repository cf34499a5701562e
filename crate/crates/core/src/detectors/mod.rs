//! Least-squares anomaly detectors with sparsity-inducing penalties.
//!
//! * `L1ls`: binary, `w ∈ R^{d+1}`, element-wise L1 penalty.
//! * `Mcl1ls`: multi-class, `W ∈ R^{(d+1)×C}`, element-wise L1 penalty.
//! * `Mcl21ls`: multi-class with the row-wise L2,1 penalty, which zeroes
//!   whole attribute rows and so selects attributes.
//!
//! All are fitted by [`crate::solver::sgd_fit`], warm-started from their
//! current weights so consecutive batches refine one model.

mod binary;
mod init;
mod multiclass;
pub mod objective;
mod snapshot;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use binary::{predict_binary, BinaryDetector};
pub use init::{biased_init, biased_init_multiclass};
pub use multiclass::{predict_multiclass, MulticlassDetector};
pub use snapshot::Snapshot;

use crate::error::{Error, Result};
use crate::features::AttributeRanking;
use crate::model::{BinaryLabel, ClassLabel, Record};
use crate::scalar::Scalar;
use crate::solver::{FitOutcome, LrSchedule, StopReason, StopRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L21,
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Penalty::L1 => "l1",
            Penalty::L21 => "l21",
        })
    }
}

impl FromStr for Penalty {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Penalty::L1),
            "l21" => Ok(Penalty::L21),
            other => Err(Error::Config(format!("unknown penalty `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    L1ls,
    Mcl1ls,
    Mcl21ls,
}

impl ModelKind {
    pub fn penalty(self) -> Penalty {
        match self {
            ModelKind::L1ls | ModelKind::Mcl1ls => Penalty::L1,
            ModelKind::Mcl21ls => Penalty::L21,
        }
    }

    pub fn is_binary(self) -> bool {
        self == ModelKind::L1ls
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::L1ls => "l1ls",
            ModelKind::Mcl1ls => "mcl1ls",
            ModelKind::Mcl21ls => "mcl21ls",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1ls" => Ok(ModelKind::L1ls),
            "mcl1ls" => Ok(ModelKind::Mcl1ls),
            "mcl21ls" => Ok(ModelKind::Mcl21ls),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Everything needed to construct a fresh detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub model: ModelKind,
    pub lambda: f64,
    /// Initialization bias magnitude; ignored when `biased_init` is off.
    pub alpha: f64,
    pub biased_init: bool,
    pub initial_lr: f64,
    pub shrink_factor: f64,
    pub lr_floor: f64,
    /// Constant learning rate instead of the shrinking schedule.
    pub fixed_lr: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Mcl21ls,
            lambda: 0.01,
            alpha: 0.5,
            biased_init: true,
            initial_lr: 0.1,
            shrink_factor: 10.0,
            lr_floor: 1e-7,
            fixed_lr: None,
            tol: 1e-6,
            max_iters: 10_000,
            seed: 0,
        }
    }
}

impl DetectorConfig {
    pub fn schedule<F: Scalar>(&self) -> Result<LrSchedule<F>> {
        match self.fixed_lr {
            Some(lr) => LrSchedule::fixed(F::lit(lr)),
            None => LrSchedule::new(
                F::lit(self.initial_lr),
                F::lit(self.shrink_factor),
                F::lit(self.lr_floor),
            ),
        }
    }

    pub fn stop<F: Scalar>(&self) -> Result<StopRule<F>> {
        StopRule::new(F::lit(self.tol), self.max_iters)
    }

    pub fn effective_alpha(&self) -> f64 {
        if self.biased_init {
            self.alpha
        } else {
            0.0
        }
    }

    /// Fresh detector for `d` attributes; `classes` is ignored for L1LS.
    pub fn build<F: Scalar>(&self, d: usize, classes: usize) -> Result<Detector<F>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let alpha = self.effective_alpha();
        let (schedule, stop) = (self.schedule()?, self.stop()?);
        let lambda = F::lit(self.lambda);
        Ok(if self.model.is_binary() {
            BinaryDetector::new(biased_init(d, alpha, &mut rng)?, lambda)?
                .with_solver(schedule, stop)
                .into()
        } else {
            let w = biased_init_multiclass(d, classes, alpha, &mut rng)?;
            MulticlassDetector::new(w, lambda, self.model.penalty())?
                .with_solver(schedule, stop)
                .into()
        })
    }
}

/// Solver diagnostics of one incremental fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub samples: usize,
    pub iterations: usize,
    pub objective: f64,
    pub lr: f64,
    pub stop: StopReason,
}

impl FitSummary {
    fn from_outcome<F: Scalar, D: ndarray::Dimension>(samples: usize, o: &FitOutcome<F, D>) -> Self {
        Self {
            samples,
            iterations: o.iterations,
            objective: o.objective.as_f64(),
            lr: o.schedule.current().as_f64(),
            stop: o.stop,
        }
    }
}

/// Predicted class index (0 = normal) with the raw detector scores: one
/// score `x·w` for binary detectors, `C` scores `x·W` otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Prediction<F> {
    pub class: usize,
    pub scores: Vec<F>,
}

impl<F: Scalar> Prediction<F> {
    pub fn is_anomaly(&self) -> bool {
        self.class != 0
    }

    /// Distance from the decision boundary: `|x·w|` for binary, gap between
    /// the two highest class scores otherwise.
    pub fn margin(&self) -> F {
        match self.scores.as_slice() {
            [s] => s.abs(),
            scores => {
                let mut top = F::neg_infinity();
                let mut second = F::neg_infinity();
                for &s in scores {
                    if s > top {
                        second = top;
                        top = s;
                    } else if s > second {
                        second = s;
                    }
                }
                top - second
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Detector<F> {
    Binary(BinaryDetector<F>),
    Multiclass(MulticlassDetector<F>),
}

impl<F: Scalar> Detector<F> {
    pub fn kind(&self) -> ModelKind {
        match self {
            Detector::Binary(_) => ModelKind::L1ls,
            Detector::Multiclass(m) => match m.penalty() {
                Penalty::L1 => ModelKind::Mcl1ls,
                Penalty::L21 => ModelKind::Mcl21ls,
            },
        }
    }

    /// Attribute count `d` (excluding the bias input).
    pub fn dim(&self) -> usize {
        match self {
            Detector::Binary(b) => b.dim(),
            Detector::Multiclass(m) => m.dim(),
        }
    }

    /// Number of predicted classes: 2 for binary detectors.
    pub fn classes(&self) -> usize {
        match self {
            Detector::Binary(_) => 2,
            Detector::Multiclass(m) => m.classes(),
        }
    }

    pub fn lambda(&self) -> F {
        match self {
            Detector::Binary(b) => b.lambda(),
            Detector::Multiclass(m) => m.lambda(),
        }
    }

    pub fn schedule(&self) -> LrSchedule<F> {
        match self {
            Detector::Binary(b) => b.schedule(),
            Detector::Multiclass(m) => m.schedule(),
        }
    }

    pub fn predict(&self, record: &Record<F>) -> Result<Prediction<F>> {
        match self {
            Detector::Binary(b) => {
                let (label, score) = b.predict(record)?;
                Ok(Prediction {
                    class: usize::from(label == BinaryLabel::Anomaly),
                    scores: vec![score],
                })
            }
            Detector::Multiclass(m) => {
                let (class, scores) = m.predict(record)?;
                Ok(Prediction { class, scores })
            }
        }
    }

    /// Binary detectors collapse every anomaly type to `-1`.
    pub fn fit_incremental(
        &mut self,
        records: &[Record<F>],
        labels: &[ClassLabel],
    ) -> Result<FitSummary> {
        match self {
            Detector::Binary(b) => b.fit_incremental(records, labels),
            Detector::Multiclass(m) => m.fit_incremental(records, labels),
        }
    }

    pub fn ranking(&self, names: &[String]) -> Result<AttributeRanking> {
        match self {
            Detector::Binary(b) => b.ranking(names),
            Detector::Multiclass(m) => m.ranking(names),
        }
    }

    pub fn snapshot(&self) -> Snapshot<F> {
        Snapshot::of(self)
    }

    pub fn from_snapshot(s: &Snapshot<F>, template: LrSchedule<F>, stop: StopRule<F>) -> Result<Self> {
        s.to_detector(template, stop)
    }
}

impl<F> From<BinaryDetector<F>> for Detector<F> {
    fn from(d: BinaryDetector<F>) -> Self {
        Detector::Binary(d)
    }
}

impl<F> From<MulticlassDetector<F>> for Detector<F> {
    fn from(d: MulticlassDetector<F>) -> Self {
        Detector::Multiclass(d)
    }
}

pub(crate) fn check_dim<F: Scalar>(record: &Record<F>, d: usize) -> Result<()> {
    if record.dim() != d {
        return Err(Error::shape(
            "record attributes",
            d,
            format!("{} (record `{}`)", record.dim(), record.id),
        ));
    }
    if record.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("record values"));
    }
    Ok(())
}

pub(crate) fn check_training<F: Scalar>(
    records: &[Record<F>],
    labels: &[ClassLabel],
    d: usize,
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    if records.len() != labels.len() {
        return Err(Error::shape("training labels", records.len(), labels.len()));
    }
    records.iter().try_for_each(|r| check_dim(r, d))
}
