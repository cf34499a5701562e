//! Versioned plain-text weight snapshots.
//!
//! ```text
//! evolad-weights v1 kind=mcl21ls d=3 c=2 lambda=0.01 penalty=l21 lr=0.001
//! 0.5 -0.25
//! ...            (d+1 rows, the bias row last)
//! ```
//!
//! Values are written with Rust's shortest round-trip formatting, so a
//! snapshot parses back to bit-identical weights.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solver::{LrSchedule, StopRule};

use super::{BinaryDetector, Detector, ModelKind, MulticlassDetector, Penalty};

pub const MAGIC: &str = "evolad-weights";
pub const VERSION: &str = "v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<F> {
    pub kind: ModelKind,
    pub lambda: F,
    pub penalty: Penalty,
    pub lr: F,
    /// `(d+1) × columns`; a single column for binary detectors.
    pub weights: Array2<F>,
}

impl<F: Scalar> Snapshot<F> {
    pub fn of(detector: &Detector<F>) -> Self {
        let weights = match detector {
            Detector::Binary(b) => b.weights().clone().insert_axis(Axis(1)),
            Detector::Multiclass(m) => m.weights().clone(),
        };
        Self {
            kind: detector.kind(),
            lambda: detector.lambda(),
            penalty: detector.kind().penalty(),
            lr: detector.schedule().current(),
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows().saturating_sub(1)
    }

    pub fn columns(&self) -> usize {
        self.weights.ncols()
    }

    /// Rebuilds the detector; the schedule's bounds come from `template`,
    /// its current rate from the snapshot.
    pub fn to_detector(&self, template: LrSchedule<F>, stop: StopRule<F>) -> Result<Detector<F>> {
        let schedule = template.with_current(self.lr)?;
        Ok(match self.kind {
            ModelKind::L1ls => {
                let w: Array1<F> = self.weights.column(0).to_owned();
                BinaryDetector::new(w, self.lambda)?
                    .with_solver(schedule, stop)
                    .into()
            }
            _ => MulticlassDetector::new(self.weights.clone(), self.lambda, self.penalty)?
                .with_solver(schedule, stop)
                .into(),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Snapshot {
            line: 1,
            message: "empty snapshot".into(),
        })?;
        let bad = |line: usize, message: String| Error::Snapshot { line, message };
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some(MAGIC) {
            return Err(bad(1, format!("missing `{MAGIC}` header")));
        }
        match tokens.next() {
            Some(VERSION) => {}
            other => return Err(bad(1, format!("unsupported version {other:?}"))),
        }
        let mut fields = BTreeMap::new();
        for t in tokens {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| bad(1, format!("malformed header field `{t}`")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| bad(1, format!("header lacks `{k}`")))
        };
        let num = |k: &str| -> Result<F> {
            get(k)?
                .parse::<F>()
                .map_err(|_| bad(1, format!("header field `{k}` is not a number")))
        };
        let int = |k: &str| -> Result<usize> {
            get(k)?
                .parse::<usize>()
                .map_err(|_| bad(1, format!("header field `{k}` is not an integer")))
        };
        let kind: ModelKind = get("kind")?.parse()?;
        let penalty: Penalty = get("penalty")?.parse()?;
        let d = int("d")?;
        let c = int("c")?;
        let lambda = num("lambda")?;
        let lr = num("lr")?;

        let mut values = Vec::with_capacity((d + 1) * c);
        let mut rows = 0;
        for (i, line) in lines {
            let before = values.len();
            for tok in line.split_whitespace() {
                values.push(
                    tok.parse::<F>()
                        .map_err(|_| bad(i + 1, format!("`{tok}` is not a number")))?,
                );
            }
            if values.len() - before != c {
                return Err(bad(i + 1, format!("expected {c} values per row")));
            }
            rows += 1;
        }
        if rows != d + 1 {
            return Err(bad(rows + 1, format!("expected {} weight rows, found {rows}", d + 1)));
        }
        let weights = Array2::from_shape_vec((d + 1, c), values)
            .map_err(|e| bad(1, e.to_string()))?;
        Ok(Self {
            kind,
            lambda,
            penalty,
            lr,
            weights,
        })
    }
}

impl<F: Scalar> fmt::Display for Snapshot<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{MAGIC} {VERSION} kind={} d={} c={} lambda={} penalty={} lr={}",
            self.kind,
            self.dim(),
            self.columns(),
            self.lambda,
            self.penalty,
            self.lr
        )?;
        for row in self.weights.outer_iter() {
            let mut first = true;
            for v in row {
                if !first {
                    f.write_str(" ")?;
                }
                write!(f, "{v}")?;
                first = false;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

impl<F: Scalar> FromStr for Snapshot<F> {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Snapshot::parse(s)
    }
}
