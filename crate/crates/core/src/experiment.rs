//! Unattended replay of labeled streams and the SMOTE / biased-init ablation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{fit_norm, synth_stream, NormStats, SynthConfig, TruthBatch};
use crate::detectors::DetectorConfig;
use crate::error::{Error, Result};
use crate::evolution::{EpochReport, EvolutionConfig, Evolver, Labeler, OracleLabeler};
use crate::features::AttributeRanking;
use crate::imbalance::SmoteConfig;
use crate::metrics::{MetricSet, RocCurve};
use crate::model::{ClassLabel, ClassSet};
use crate::scalar::Scalar;

/// Where min–max statistics come from during a replay.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    /// `Frozen` for loaded data, `Off` for synthetic streams, which are
    /// generated in the normalized range already.
    #[default]
    Auto,
    /// Fitted on the first epoch and kept for the run.
    Frozen,
    /// Refitted on every epoch.
    PerEpoch,
    /// Input is used as is.
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    pub detector: DetectorConfig,
    pub evolution: EvolutionConfig,
    pub normalization: NormMode,
    pub epochs: usize,
    /// Chance that an operator reports a missed failure after its epoch.
    pub missed_report_rate: f64,
    /// Chance that the oracle answers with a wrong class.
    pub labeler_noise: f64,
    pub seed: u64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            evolution: EvolutionConfig::default(),
            normalization: NormMode::default(),
            epochs: 15,
            missed_report_rate: 0.0,
            labeler_noise: 0.0,
            seed: 0,
        }
    }
}

impl ReplayConfig {
    fn validate(&self) -> Result<()> {
        for (name, p) in [("missed_report_rate", self.missed_report_rate), ("labeler_noise", self.labeler_noise)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0,1], got {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayRun {
    pub reports: Vec<EpochReport>,
    /// Anomaly-vs-normal ROC per epoch; `None` when an epoch had one class.
    pub rocs: Vec<Option<RocCurve>>,
    pub final_weights: String,
    pub ranking: AttributeRanking,
}

impl ReplayRun {
    /// Mean of a per-epoch value over the last `k` epochs, skipping
    /// undefined entries.
    pub fn tail_mean(&self, k: usize, value: impl Fn(&EpochReport) -> Option<f64>) -> Option<f64> {
        let tail = &self.reports[self.reports.len().saturating_sub(k)..];
        let vals: Vec<f64> = tail.iter().filter_map(value).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

pub fn macro_metrics(r: &EpochReport) -> Option<&MetricSet> {
    r.evaluation.as_ref().map(|e| &e.classes.macro_avg)
}

/// Runs the loop over `stream` with an oracle labeler holding the truth.
pub fn replay<F: Scalar>(
    cfg: &ReplayConfig,
    stream: &[TruthBatch<F>],
    attributes: &[String],
    classes: &ClassSet,
) -> Result<ReplayRun> {
    cfg.validate()?;
    let d = stream
        .first()
        .and_then(|e| e.records.first())
        .map(|r| r.dim())
        .ok_or(Error::Empty("replay stream"))?;
    let detector = cfg.detector.build::<F>(d, classes.len())?;
    let mut ev = Evolver::new(detector, cfg.evolution.clone(), classes.clone())?;
    let mut oracle = OracleLabeler::new(classes.clone()).with_noise(cfg.labeler_noise, cfg.seed ^ 0x5EED);
    let mut operator = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0FE7);
    let mut reports = Vec::with_capacity(stream.len());
    let mut rocs = Vec::with_capacity(stream.len());
    let mut stats: Option<NormStats<F>> = None;
    for epoch in stream.iter().take(cfg.epochs) {
        let records = match cfg.normalization {
            NormMode::Off => epoch.records.clone(),
            NormMode::Frozen | NormMode::Auto => {
                if stats.is_none() {
                    stats = Some(fit_norm(&epoch.records)?);
                }
                stats.as_ref().expect("fitted above").apply_all(&epoch.records)?
            }
            NormMode::PerEpoch => fit_norm(&epoch.records)?.apply_all(&epoch.records)?,
        };
        oracle.learn(&records, &epoch.truth);
        let pending = ev.begin_epoch(records)?;
        rocs.push(Evolver::roc(&pending, &epoch.truth).ok());
        let unflagged_anomalies: Vec<(String, ClassLabel)> = pending
            .predictions
            .iter()
            .zip(&pending.records)
            .zip(&epoch.truth)
            .enumerate()
            .filter(|(i, ((p, _), t))| !p.is_anomaly() && !t.is_normal() && pending.flagged.binary_search(i).is_err())
            .map(|(_, ((_, r), t))| (r.id.clone(), t.clone()))
            .collect();
        let verdicts = {
            let submitted = pending.flagged_records();
            Labeler::<F>::verify(&mut oracle, &submitted, &[])?
        };
        let report = ev.complete_epoch(pending, verdicts, Some(&epoch.truth))?;
        reports.push(report);
        if cfg.missed_report_rate > 0.0 {
            for (id, truth) in unflagged_anomalies {
                if operator.random::<f64>() < cfg.missed_report_rate {
                    ev.report_missed(&id, truth)?;
                }
            }
        }
    }
    Ok(ReplayRun {
        reports,
        rocs,
        final_weights: ev.detector().snapshot().to_string(),
        ranking: ev.detector().ranking(attributes)?,
    })
}

/// Replay on a freshly generated synthetic stream.
pub fn replay_synthetic<F: Scalar>(cfg: &ReplayConfig, synth: &SynthConfig) -> Result<ReplayRun> {
    let stream = synth_stream::<F>(synth, cfg.epochs, cfg.evolution.epoch_size)?;
    replay(&for_synthetic(cfg), &stream, &synth.attributes, &synth.classes)
}

fn for_synthetic(cfg: &ReplayConfig) -> ReplayConfig {
    let mut cfg = cfg.clone();
    if cfg.normalization == NormMode::Auto {
        cfg.normalization = NormMode::Off;
    }
    cfg
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub base: ReplayConfig,
    pub synth: SynthConfig,
    pub seeds: Vec<u64>,
    /// Epochs averaged for the final metrics.
    pub tail: usize,
    /// Settings tried on each axis; drop a value to restrict the grid.
    pub smote: Vec<bool>,
    pub biased_init: Vec<bool>,
    pub self_evolving: Vec<bool>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            base: ReplayConfig::default(),
            synth: SynthConfig::default(),
            seeds: (0..20).collect(),
            tail: 5,
            smote: vec![false, true],
            biased_init: vec![false, true],
            self_evolving: vec![false, true],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub seed: u64,
    pub smote: bool,
    pub biased_init: bool,
    pub self_evolving: bool,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub labeled_fraction: Option<f64>,
    pub error: Option<String>,
}

impl AblationRow {
    pub const CSV_HEADER: &'static str =
        "seed,smote,biased_init,self_evolving,sensitivity,specificity,accuracy,f1,labeled_fraction,error";

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.smote,
            self.biased_init,
            self.self_evolving,
            opt(self.sensitivity),
            opt(self.specificity),
            opt(self.accuracy),
            opt(self.f1),
            opt(self.labeled_fraction),
            self.error.as_deref().map(|e| format!("\"{}\"", e.replace('"', "\"\""))).unwrap_or_default()
        )
    }
}

/// Seeds one replay: the seed drives the data stream, the detector init,
/// SMOTE, the labeler and the operator.
pub fn seeded(base: &ReplayConfig, synth: &SynthConfig, seed: u64) -> (ReplayConfig, SynthConfig) {
    let mut cfg = base.clone();
    cfg.seed = seed;
    cfg.detector.seed = seed;
    if let Some(s) = cfg.evolution.smote.as_mut() {
        s.seed = seed;
    }
    (cfg, SynthConfig { seed, ..synth.clone() })
}

/// Replays every toggle combination per seed on a shared stream; macro
/// metrics are averaged over the last `tail` epochs. A failing cell is
/// recorded and the rest of the grid still runs.
pub fn ablate<F: Scalar>(cfg: &AblationConfig) -> Result<Vec<AblationRow>> {
    let cfg = AblationConfig {
        base: for_synthetic(&cfg.base),
        ..cfg.clone()
    };
    ablate_on(&cfg, |synth, base| synth_stream::<F>(synth, base.epochs, base.evolution.epoch_size))
}

/// As [`ablate`], with the stream for each seed supplied by `stream`.
pub fn ablate_on<F: Scalar>(
    cfg: &AblationConfig,
    mut stream: impl FnMut(&SynthConfig, &ReplayConfig) -> Result<Vec<TruthBatch<F>>>,
) -> Result<Vec<AblationRow>> {
    let smote = cfg.base.evolution.smote.clone().unwrap_or_default();
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let (base, synth) = seeded(&cfg.base, &cfg.synth, seed);
        let data = stream(&synth, &base)?;
        for &use_smote in &cfg.smote {
            for &biased in &cfg.biased_init {
                for &evolving in &cfg.self_evolving {
                    let mut run_cfg = base.clone();
                    run_cfg.evolution.smote = use_smote.then(|| SmoteConfig { seed, ..smote.clone() });
                    run_cfg.detector.biased_init = biased;
                    run_cfg.evolution.all_evolving = !evolving;
                    let mut row = AblationRow {
                        seed,
                        smote: use_smote,
                        biased_init: biased,
                        self_evolving: evolving,
                        sensitivity: None,
                        specificity: None,
                        accuracy: None,
                        f1: None,
                        labeled_fraction: None,
                        error: None,
                    };
                    match replay(&run_cfg, &data, &synth.attributes, &synth.classes) {
                        Ok(run) => {
                            let m = |f: fn(&MetricSet) -> Option<f64>| {
                                run.tail_mean(cfg.tail, |r| macro_metrics(r).and_then(f))
                            };
                            row.sensitivity = m(|s| s.sensitivity);
                            row.specificity = m(|s| s.specificity);
                            row.accuracy = m(|s| s.accuracy);
                            row.f1 = m(|s| s.f1);
                            row.labeled_fraction = run.reports.last().map(|r| r.labeled_fraction_cumulative);
                        }
                        Err(e) => row.error = Some(e.to_string()),
                    }
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}
