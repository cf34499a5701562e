//! Self-evolving anomaly detection over system-counter records.
//!
//! Sparse least-squares detectors ([`detectors`]) are fitted by a
//! full-batch subgradient solver ([`solver`]) and refined epoch by epoch
//! from operator-verified records ([`evolution`]). Rare fault types are
//! oversampled with SMOTE ([`imbalance`]), fitted weights rank attributes
//! ([`features`]) and [`metrics`] scores the predictions.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix `f64`.

pub mod data;
pub mod detectors;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod features;
pub mod imbalance;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod solver;

pub use detectors::{
    BinaryDetector, Detector, DetectorConfig, ModelKind, MulticlassDetector, Penalty, Prediction,
    Snapshot,
};
pub use error::{Error, Result};
pub use model::{Batch, BinaryLabel, ClassLabel, ClassSet, Record};
pub use scalar::Scalar;

pub type Record64 = Record<f64>;
pub type Batch64 = Batch<f64>;
pub type Detector64 = Detector<f64>;
pub type BinaryDetector64 = BinaryDetector<f64>;
pub type MulticlassDetector64 = MulticlassDetector<f64>;
pub type Record32 = Record<f32>;
pub type Detector32 = Detector<f32>;
