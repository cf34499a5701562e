//! Attribute importance from fitted weights, and the λ sweep.
//!
//! Binary detectors rank attributes by `|wⱼ|`, multi-class ones by the
//! Euclidean norm of the attribute's weight row. The bias is never ranked.

use std::fmt::Write as _;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorConfig, ModelKind};
use crate::error::{Error, Result};
use crate::imbalance::{rebalance_epoch, SmoteConfig};
use crate::model::{Batch, ClassSet};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedAttribute {
    pub attribute: String,
    pub importance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeRanking {
    pub entries: Vec<RankedAttribute>,
    pub lambda: f64,
    pub model: Option<ModelKind>,
}

impl AttributeRanking {
    fn from_importance(importance: Vec<f64>, names: &[String], lambda: f64) -> Self {
        let mut order: Vec<usize> = (0..importance.len()).collect();
        // stable sort keeps index order among equal importances
        order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]));
        Self {
            entries: order
                .into_iter()
                .map(|i| RankedAttribute {
                    attribute: names[i].clone(),
                    importance: importance[i],
                })
                .collect(),
            lambda,
            model: None,
        }
    }

    pub fn with_model(mut self, model: ModelKind) -> Self {
        self.model = Some(model);
        self
    }

    pub fn top(&self, k: usize) -> &[RankedAttribute] {
        &self.entries[..k.min(self.entries.len())]
    }

    pub fn truncated(mut self, k: usize) -> Self {
        self.entries.truncate(k);
        self
    }

    pub fn importances(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.importance).collect()
    }

    /// `rank,attribute,weight` rows, rank starting at 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,attribute,weight\n");
        for (i, e) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, csv_field(&e.attribute), e.importance);
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn check_names(weights: usize, names: &[String]) -> Result<()> {
    if weights != names.len() {
        return Err(Error::shape("attribute names vs weights", weights, names.len()));
    }
    Ok(())
}

/// `w` holds attribute weights only (no bias entry).
pub fn rank_binary<F: Scalar>(w: ArrayView1<F>, names: &[String], lambda: f64) -> Result<AttributeRanking> {
    check_names(w.len(), names)?;
    let importance = w.iter().map(|v| v.abs().as_f64()).collect();
    Ok(AttributeRanking::from_importance(importance, names, lambda).with_model(ModelKind::L1ls))
}

/// `w` holds one row per attribute (no bias row).
pub fn rank_multiclass<F: Scalar>(w: ArrayView2<F>, names: &[String], lambda: f64) -> Result<AttributeRanking> {
    check_names(w.nrows(), names)?;
    let importance = w
        .outer_iter()
        .map(|row| row.dot(&row).sqrt().as_f64())
        .collect();
    Ok(AttributeRanking::from_importance(importance, names, lambda))
}

/// Standard deviation over mean; `None` when the mean is zero.
pub fn coefficient_of_variation(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return None;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(var.sqrt() / mean)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    pub top_k: usize,
    /// Every cell starts from this detector configuration, with its own λ.
    pub detector: DetectorConfig,
    pub smote: Option<SmoteConfig>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.01, 0.1, 1.0, 10.0],
            top_k: 10,
            detector: DetectorConfig::default(),
            smote: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub lambda: f64,
    /// Full ranking over every attribute; use [`AttributeRanking::top`].
    pub ranking: Option<AttributeRanking>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub model: ModelKind,
    pub top_k: usize,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    /// Long format: `lambda,rank,attribute,weight`, top-k rows per λ.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,rank,attribute,weight\n");
        for cell in &self.cells {
            if let Some(r) = &cell.ranking {
                for (i, e) in r.top(self.top_k).iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        cell.lambda,
                        i + 1,
                        csv_field(&e.attribute),
                        e.importance
                    );
                }
            }
        }
        out
    }
}

/// Fits one detector per λ on the whole labeled batch, all from the same
/// seeded initialization, and ranks attributes for each.
pub fn lambda_sweep<F: Scalar>(
    data: &Batch<F>,
    names: &[String],
    classes: &ClassSet,
    cfg: &SweepConfig,
) -> Result<SweepTable> {
    if cfg.lambdas.is_empty() {
        return Err(Error::Empty("lambda list"));
    }
    let labels = data.labels().ok_or(Error::Empty("labels for the sweep data"))?;
    let d = data.dim().ok_or(Error::Empty("sweep data"))?;
    check_names(d, names)?;
    let (records, labels) = match &cfg.smote {
        Some(smote) => {
            let (b, _) = rebalance_epoch(data, smote)?;
            let (r, l) = b.into_parts();
            (r, l.unwrap_or_default())
        }
        None => (data.records().to_vec(), labels.to_vec()),
    };
    let cells = cfg
        .lambdas
        .iter()
        .map(|&lambda| {
            let result = DetectorConfig {
                lambda,
                ..cfg.detector.clone()
            }
            .build::<F>(d, classes.len())
            .and_then(|mut det| {
                det.fit_incremental(&records, &labels)?;
                det.ranking(names)
            });
            match result {
                Ok(r) => SweepCell {
                    lambda,
                    ranking: Some(r.with_model(cfg.detector.model)),
                    error: None,
                },
                Err(e) => SweepCell {
                    lambda,
                    ranking: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepTable {
        model: cfg.detector.model,
        top_k: cfg.top_k,
        cells,
    })
}
