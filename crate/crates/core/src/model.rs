//! Records, class labels and the ±1 label encodings.
//!
//! Class index 0 is always "normal"; indices `1..C` are anomaly types. The
//! binary encoding maps normal to `+1` and every anomaly type to `-1`, and
//! the multi-class encoding puts `+1` at the record's class column and `-1`
//! elsewhere, so the two agree on normal-vs-anomaly.

use std::fmt;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const NORMAL: &str = "normal";

/// Default anomaly taxonomy of the telemetry datasets.
pub const DEFAULT_CLASSES: [&str; 5] = [NORMAL, "memory", "cpu", "network", "disk"];

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassLabel {
    pub index: usize,
    pub name: String,
}

impl ClassLabel {
    pub fn is_normal(&self) -> bool {
        self.index == 0
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Ordered class names; position is the class index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ClassSet {
    names: Vec<String>,
}

impl ClassSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::Config(format!(
                "need at least two classes, got {}",
                names.len()
            )));
        }
        if names[0] != NORMAL {
            return Err(Error::Config(format!(
                "class 0 must be `{NORMAL}`, got `{}`",
                names[0]
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Config(format!("duplicate class name `{n}`")));
            }
        }
        Ok(Self { names })
    }

    /// `normal` plus a single generic `anomaly` class.
    pub fn binary() -> Self {
        Self {
            names: vec![NORMAL.into(), "anomaly".into()],
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn label(&self, index: usize) -> Result<ClassLabel> {
        self.names
            .get(index)
            .map(|name| ClassLabel {
                index,
                name: name.clone(),
            })
            .ok_or(Error::ClassOutOfRange {
                index,
                classes: self.names.len(),
            })
    }

    pub fn normal(&self) -> ClassLabel {
        ClassLabel {
            index: 0,
            name: self.names[0].clone(),
        }
    }

    pub fn by_name(&self, name: &str) -> Result<ClassLabel> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|index| ClassLabel {
                index,
                name: name.to_owned(),
            })
            .ok_or_else(|| Error::UnknownClass(name.to_owned()))
    }
}

impl Default for ClassSet {
    fn default() -> Self {
        Self {
            names: DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl TryFrom<Vec<String>> for ClassSet {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        ClassSet::new(v)
    }
}

impl From<ClassSet> for Vec<String> {
    fn from(c: ClassSet) -> Self {
        c.names
    }
}

/// `+1` = normal, `-1` = anomaly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Normal,
    Anomaly,
}

impl BinaryLabel {
    pub fn of(label: &ClassLabel) -> Self {
        if label.is_normal() {
            BinaryLabel::Normal
        } else {
            BinaryLabel::Anomaly
        }
    }

    pub fn value<F: Scalar>(self) -> F {
        match self {
            BinaryLabel::Normal => F::one(),
            BinaryLabel::Anomaly => -F::one(),
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinaryLabel::Normal => "normal",
            BinaryLabel::Anomaly => "anomaly",
        })
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One telemetry observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Record<F> {
    pub id: String,
    pub values: Vec<F>,
    /// Epoch milliseconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
    /// Produced by oversampling; never scored or counted as labeling effort.
    #[serde(default, skip_serializing_if = "is_false")]
    pub synthetic: bool,
    /// Set by normalization when a value fell outside the fitted range.
    #[serde(default, skip_serializing_if = "is_false")]
    pub out_of_range: bool,
}

impl<F: Scalar> Record<F> {
    pub fn new(id: impl Into<String>, values: Vec<F>) -> Self {
        Self {
            id: id.into(),
            values,
            timestamp: None,
            synthetic: false,
            out_of_range: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Attribute values followed by the constant bias input `1`.
    pub fn augmented(&self) -> Array1<F> {
        self.values
            .iter()
            .copied()
            .chain(std::iter::once(F::one()))
            .collect()
    }
}

/// `n` records of a common dimension `d`, optionally labeled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Batch<F> {
    records: Vec<Record<F>>,
    labels: Option<Vec<ClassLabel>>,
}

impl<F: Scalar> Batch<F> {
    pub fn new(records: Vec<Record<F>>, labels: Option<Vec<ClassLabel>>) -> Result<Self> {
        if let Some(first) = records.first() {
            let d = first.dim();
            if let Some(bad) = records.iter().find(|r| r.dim() != d) {
                return Err(Error::shape(
                    "batch record dimension",
                    d,
                    format!("{} (record `{}`)", bad.dim(), bad.id),
                ));
            }
        }
        if let Some(l) = &labels {
            if l.len() != records.len() {
                return Err(Error::shape("batch labels", records.len(), l.len()));
            }
        }
        Ok(Self { records, labels })
    }

    pub fn unlabeled(records: Vec<Record<F>>) -> Result<Self> {
        Self::new(records, None)
    }

    pub fn records(&self) -> &[Record<F>] {
        &self.records
    }

    pub fn labels(&self) -> Option<&[ClassLabel]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Attribute count `d`; `None` for an empty batch.
    pub fn dim(&self) -> Option<usize> {
        self.records.first().map(Record::dim)
    }

    pub fn into_parts(self) -> (Vec<Record<F>>, Option<Vec<ClassLabel>>) {
        (self.records, self.labels)
    }

    pub fn design_matrix(&self) -> Array2<F> {
        design_matrix(&self.records)
    }
}

/// `n × (d+1)` matrix of record values with a trailing column of ones.
pub fn design_matrix<F: Scalar>(records: &[Record<F>]) -> Array2<F> {
    let d = records.first().map_or(0, Record::dim);
    let mut x = Array2::ones((records.len(), d + 1));
    for (mut row, r) in x.outer_iter_mut().zip(records) {
        for (dst, &v) in row.iter_mut().zip(&r.values) {
            *dst = v;
        }
    }
    x
}

pub fn encode_binary(labels: &[ClassLabel]) -> Result<Vec<BinaryLabel>> {
    if labels.is_empty() {
        return Err(Error::Empty("labels to encode"));
    }
    Ok(labels.iter().map(BinaryLabel::of).collect())
}

pub fn binary_targets<F: Scalar>(labels: &[ClassLabel]) -> Result<Array1<F>> {
    Ok(encode_binary(labels)?.into_iter().map(BinaryLabel::value).collect())
}

/// `n × C` target matrix: `+1` at the record's class column, `-1` elsewhere.
pub fn encode_multiclass<F: Scalar>(labels: &[ClassLabel], classes: usize) -> Result<Array2<F>> {
    let mut y = Array2::from_elem((labels.len(), classes), -F::one());
    for (i, l) in labels.iter().enumerate() {
        if l.index >= classes {
            return Err(Error::ClassOutOfRange {
                index: l.index,
                classes,
            });
        }
        y[[i, l.index]] = F::one();
    }
    Ok(y)
}
