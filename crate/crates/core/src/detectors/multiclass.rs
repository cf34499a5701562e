use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::features::{rank_multiclass, AttributeRanking};
use crate::model::{design_matrix, encode_multiclass, ClassLabel, Record};
use crate::scalar::Scalar;
use crate::solver::{sgd_fit, LrSchedule, StopRule};

use super::objective::MatrixObjective;
use super::{check_dim, check_training, FitSummary, Penalty};

/// Multi-class least-squares detector, `W` of shape `(d+1) × C`; the last
/// row holds the per-class biases.
#[derive(Clone, Debug, PartialEq)]
pub struct MulticlassDetector<F> {
    weights: Array2<F>,
    lambda: F,
    penalty: Penalty,
    schedule: LrSchedule<F>,
    stop: StopRule<F>,
}

impl<F: Scalar> MulticlassDetector<F> {
    pub fn new(weights: Array2<F>, lambda: F, penalty: Penalty) -> Result<Self> {
        if weights.nrows() < 2 || weights.ncols() < 2 {
            return Err(Error::shape(
                "multi-class weights",
                "(d+1 >= 2) x (C >= 2)",
                format!("{}x{}", weights.nrows(), weights.ncols()),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("detector weights"));
        }
        if !(lambda >= F::zero() && lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self {
            weights,
            lambda,
            penalty,
            schedule: LrSchedule::default(),
            stop: StopRule::default(),
        })
    }

    pub fn with_solver(mut self, schedule: LrSchedule<F>, stop: StopRule<F>) -> Self {
        self.schedule = schedule;
        self.stop = stop;
        self
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows() - 1
    }

    pub fn classes(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &Array2<F> {
        &self.weights
    }

    pub fn attribute_weights(&self) -> ArrayView2<'_, F> {
        self.weights.slice(s![..self.dim(), ..])
    }

    pub fn lambda(&self) -> F {
        self.lambda
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    pub fn schedule(&self) -> LrSchedule<F> {
        self.schedule
    }

    pub fn stop_rule(&self) -> StopRule<F> {
        self.stop
    }

    /// Scores `x·W` and their argmax. Ties go to the highest class index, so
    /// an anomaly class wins a tie with normal.
    pub fn predict(&self, record: &Record<F>) -> Result<(usize, Vec<F>)> {
        check_dim(record, self.dim())?;
        let scores = record.augmented().dot(&self.weights).to_vec();
        Ok((argmax_last(&scores), scores))
    }

    pub fn fit_incremental(
        &mut self,
        records: &[Record<F>],
        labels: &[ClassLabel],
    ) -> Result<FitSummary> {
        check_training(records, labels, self.dim())?;
        let x = design_matrix(records);
        let y = encode_multiclass::<F>(labels, self.classes())?;
        let objective = MatrixObjective::new(x.view(), y.view(), self.lambda, self.penalty)?;
        let out = sgd_fit(&objective, self.weights.clone(), self.schedule, self.stop)?;
        let summary = FitSummary::from_outcome(records.len(), &out);
        self.weights = out.weights;
        self.schedule = out.schedule;
        Ok(summary)
    }

    pub fn ranking(&self, names: &[String]) -> Result<AttributeRanking> {
        rank_multiclass(self.attribute_weights(), names, self.lambda.as_f64())
    }
}

/// Index of the maximum; the last maximal index on ties.
pub(crate) fn argmax_last<F: Scalar>(scores: &[F]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s >= scores[best] {
            best = i;
        }
    }
    best
}

pub fn predict_multiclass<F: Scalar>(
    record: &Record<F>,
    detector: &MulticlassDetector<F>,
) -> Result<(usize, Vec<F>)> {
    detector.predict(record)
}
