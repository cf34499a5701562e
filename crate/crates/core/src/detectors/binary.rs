use ndarray::Array1;

use crate::error::{Error, Result};
use crate::features::{rank_binary, AttributeRanking};
use crate::model::{binary_targets, design_matrix, BinaryLabel, ClassLabel, Record};
use crate::scalar::Scalar;
use crate::solver::{sgd_fit, LrSchedule, StopRule};

use super::objective::VectorObjective;
use super::{check_dim, check_training, FitSummary};

/// Binary L1-penalized least-squares detector. The last weight is the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryDetector<F> {
    weights: Array1<F>,
    lambda: F,
    schedule: LrSchedule<F>,
    stop: StopRule<F>,
}

impl<F: Scalar> BinaryDetector<F> {
    pub fn new(weights: Array1<F>, lambda: F) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::shape("binary weights", "d+1 >= 2", weights.len()));
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
        self.weights.len() - 1
    }

    pub fn weights(&self) -> &Array1<F> {
        &self.weights
    }

    pub fn attribute_weights(&self) -> ndarray::ArrayView1<'_, F> {
        self.weights.slice(ndarray::s![..self.dim()])
    }

    pub fn bias(&self) -> F {
        self.weights[self.dim()]
    }

    pub fn lambda(&self) -> F {
        self.lambda
    }

    pub fn schedule(&self) -> LrSchedule<F> {
        self.schedule
    }

    pub fn stop_rule(&self) -> StopRule<F> {
        self.stop
    }

    /// Score `x·w`; label by which of ±1 the score is closer to. An exact
    /// zero score is an anomaly so that it is routed for verification.
    pub fn predict(&self, record: &Record<F>) -> Result<(BinaryLabel, F)> {
        check_dim(record, self.dim())?;
        let score = record.augmented().dot(&self.weights);
        let label = if (score - F::one()).abs() < (score + F::one()).abs() {
            BinaryLabel::Normal
        } else {
            BinaryLabel::Anomaly
        };
        Ok((label, score))
    }

    /// Warm-started fit on one verified batch. On error the detector is unchanged.
    pub fn fit_incremental(
        &mut self,
        records: &[Record<F>],
        labels: &[ClassLabel],
    ) -> Result<FitSummary> {
        check_training(records, labels, self.dim())?;
        let x = design_matrix(records);
        let y = binary_targets::<F>(labels)?;
        let objective = VectorObjective::new(x.view(), y.view(), self.lambda)?;
        let out = sgd_fit(&objective, self.weights.clone(), self.schedule, self.stop)?;
        let summary = FitSummary::from_outcome(records.len(), &out);
        self.weights = out.weights;
        self.schedule = out.schedule;
        Ok(summary)
    }

    pub fn ranking(&self, names: &[String]) -> Result<AttributeRanking> {
        rank_binary(self.attribute_weights(), names, self.lambda.as_f64())
    }
}

pub fn predict_binary<F: Scalar>(
    record: &Record<F>,
    detector: &BinaryDetector<F>,
) -> Result<(BinaryLabel, F)> {
    detector.predict(record)
}
