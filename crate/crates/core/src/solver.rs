//! Subgradient descent with an objective-driven learning-rate schedule.
//!
//! Each iteration takes a full-batch step `w ← w − lr·∇F(w)`. A step that
//! would increase the objective is reverted and the learning rate divided by
//! the shrink factor, down to a floor. Iteration stops once an accepted step
//! decreases the objective by no more than the tolerance.

use ndarray::{Array, Dimension};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Offset applied to an exact zero before taking its sign.
pub const SIGN_SHIFT: f64 = 1e-7;

/// `+1` for positive input, `-1` for negative, and `sign(0 + 1e-7) = +1` at zero.
pub fn sign_eps<F: Scalar>(v: F) -> Result<F> {
    if !v.is_finite() {
        return Err(Error::NonFinite("sign argument"));
    }
    Ok(sign_shifted(v))
}

#[inline]
pub(crate) fn sign_shifted<F: Scalar>(v: F) -> F {
    let v = if v == F::zero() { v + F::lit(SIGN_SHIFT) } else { v };
    if v > F::zero() {
        F::one()
    } else {
        -F::one()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LrSchedule<F> {
    current: F,
    initial: F,
    shrink_factor: F,
    floor: F,
}

impl<F: Scalar> LrSchedule<F> {
    pub fn new(initial: F, shrink_factor: F, floor: F) -> Result<Self> {
        let positive = |v: F| v.is_finite() && v > F::zero();
        if !(positive(initial) && positive(shrink_factor) && positive(floor)) {
            return Err(Error::Config(
                "learning-rate schedule parameters must be positive and finite".into(),
            ));
        }
        if floor > initial {
            return Err(Error::Config(format!(
                "learning-rate floor {floor} exceeds initial rate {initial}"
            )));
        }
        if shrink_factor < F::one() {
            return Err(Error::Config(
                "learning-rate shrink factor must be at least 1".into(),
            ));
        }
        Ok(Self {
            current: initial,
            initial,
            shrink_factor,
            floor,
        })
    }

    /// Constant learning rate: the floor equals the initial rate, so any
    /// rejected step ends the fit.
    pub fn fixed(lr: F) -> Result<Self> {
        Self::new(lr, F::one(), lr)
    }

    /// Resumes a schedule at a previously reached rate.
    pub fn with_current(mut self, current: F) -> Result<Self> {
        if !(current >= self.floor && current <= self.initial) {
            return Err(Error::Config(format!(
                "learning rate {current} outside [{}, {}]",
                self.floor, self.initial
            )));
        }
        self.current = current;
        Ok(self)
    }

    pub fn current(&self) -> F {
        self.current
    }

    pub fn initial(&self) -> F {
        self.initial
    }

    pub fn shrink_factor(&self) -> F {
        self.shrink_factor
    }

    pub fn floor(&self) -> F {
        self.floor
    }

    pub fn at_floor(&self) -> bool {
        self.current <= self.floor
    }
}

impl<F: Scalar> Default for LrSchedule<F> {
    /// Start at 0.1, divide by 10 on every non-decrease, never below 1e-7.
    fn default() -> Self {
        Self {
            current: F::lit(0.1),
            initial: F::lit(0.1),
            shrink_factor: F::lit(10.0),
            floor: F::lit(1e-7),
        }
    }
}

pub fn lr_step<F: Scalar>(schedule: LrSchedule<F>, objective_decreased: bool) -> LrSchedule<F> {
    if objective_decreased {
        return schedule;
    }
    LrSchedule {
        current: (schedule.current / schedule.shrink_factor).max(schedule.floor),
        ..schedule
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct StopRule<F> {
    pub tol: F,
    pub max_iters: usize,
}

impl<F: Scalar> StopRule<F> {
    pub fn new(tol: F, max_iters: usize) -> Result<Self> {
        if !(tol.is_finite() && tol > F::zero()) || max_iters == 0 {
            return Err(Error::Config(
                "stop rule needs tol > 0 and max_iters >= 1".into(),
            ));
        }
        Ok(Self { tol, max_iters })
    }
}

impl<F: Scalar> Default for StopRule<F> {
    fn default() -> Self {
        Self {
            tol: F::lit(1e-6),
            max_iters: 10_000,
        }
    }
}

/// A (sub)differentiable objective over weights of shape `D`.
pub trait Objective<F, D: Dimension> {
    fn value(&self, w: &Array<F, D>) -> F;
    fn gradient(&self, w: &Array<F, D>) -> Array<F, D>;
}

/// Adapter turning a pair of closures into an [`Objective`].
pub struct FnObjective<V, G> {
    pub value: V,
    pub gradient: G,
}

impl<F, D, V, G> Objective<F, D> for FnObjective<V, G>
where
    D: Dimension,
    V: Fn(&Array<F, D>) -> F,
    G: Fn(&Array<F, D>) -> Array<F, D>,
{
    fn value(&self, w: &Array<F, D>) -> F {
        (self.value)(w)
    }
    fn gradient(&self, w: &Array<F, D>) -> Array<F, D> {
        (self.gradient)(w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// An accepted step decreased the objective by at most `tol`.
    Converged,
    /// A step was rejected with the learning rate already at its floor.
    Stalled,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct FitOutcome<F, D: Dimension> {
    pub weights: Array<F, D>,
    pub objective: F,
    pub iterations: usize,
    pub schedule: LrSchedule<F>,
    pub stop: StopReason,
}

pub fn sgd_fit<F, D, O>(
    objective: &O,
    w0: Array<F, D>,
    schedule: LrSchedule<F>,
    stop: StopRule<F>,
) -> Result<FitOutcome<F, D>>
where
    F: Scalar,
    D: Dimension,
    O: Objective<F, D> + ?Sized,
{
    let mut schedule = schedule;
    let mut w = w0;
    let mut f = objective.value(&w);
    if !f.is_finite() {
        return Err(Error::Diverged {
            iteration: 0,
            lr: schedule.current().as_f64(),
            what: "objective",
        });
    }
    let mut grad = objective.gradient(&w);
    let mut iterations = 0;
    let reason = loop {
        if iterations >= stop.max_iters {
            break StopReason::MaxIters;
        }
        iterations += 1;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                iteration: iterations,
                lr: schedule.current().as_f64(),
                what: "gradient",
            });
        }
        let lr = schedule.current();
        let candidate = &w - &(&grad * lr);
        let f_new = objective.value(&candidate);
        if !f_new.is_finite() {
            return Err(Error::Diverged {
                iteration: iterations,
                lr: lr.as_f64(),
                what: "objective",
            });
        }
        if f_new <= f {
            let decrease = f - f_new;
            w = candidate;
            f = f_new;
            if decrease <= stop.tol {
                break StopReason::Converged;
            }
            grad = objective.gradient(&w);
        } else {
            if schedule.at_floor() {
                break StopReason::Stalled;
            }
            schedule = lr_step(schedule, false);
        }
    };
    Ok(FitOutcome {
        weights: w,
        objective: f,
        iterations,
        schedule,
        stop: reason,
    })
}
