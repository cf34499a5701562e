//! The self-evolving loop: predict an epoch, send predicted anomalies to a
//! labeler, fit on the verified records and account for labeling effort.
//!
//! An epoch runs in two halves so that a service can park between them
//! while a human answers: [`Evolver::begin_epoch`] predicts and flags, and
//! [`Evolver::complete_epoch`] consumes the verdicts. [`Evolver::run_epoch`]
//! chains both through a [`Labeler`].

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::{Detector, FitSummary, Prediction};
use crate::error::{Error, Result};
use crate::imbalance::{rebalance_epoch, SmoteConfig};
use crate::metrics::{confusion, per_class_report, roc_curve, ClassReport, Confusion, MetricSet, RocCurve};
use crate::model::{Batch, ClassLabel, ClassSet, Record};
use crate::scalar::Scalar;

/// A confirmed class for one submitted record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub record_id: String,
    pub class: ClassLabel,
}

pub trait Labeler<F> {
    /// One verdict per submitted record, matched by id.
    fn verify(&mut self, records: &[Record<F>], suggested: &[ClassLabel]) -> Result<Vec<Verdict>>;
}

/// Answers from held-out ground truth, optionally mislabeling a fraction of
/// verdicts as a uniformly drawn other class.
#[derive(Clone, Debug)]
pub struct OracleLabeler {
    truth: HashMap<String, ClassLabel>,
    classes: ClassSet,
    flip_rate: f64,
    rng: ChaCha8Rng,
}

impl OracleLabeler {
    pub fn new(classes: ClassSet) -> Self {
        Self {
            truth: HashMap::new(),
            classes,
            flip_rate: 0.0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn with_noise(mut self, flip_rate: f64, seed: u64) -> Self {
        self.flip_rate = flip_rate;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn learn<F>(&mut self, records: &[Record<F>], truth: &[ClassLabel]) {
        for (r, t) in records.iter().zip(truth) {
            self.truth.insert(r.id.clone(), t.clone());
        }
    }

    pub fn truth_of(&self, id: &str) -> Option<&ClassLabel> {
        self.truth.get(id)
    }
}

impl<F> Labeler<F> for OracleLabeler {
    fn verify(&mut self, records: &[Record<F>], _suggested: &[ClassLabel]) -> Result<Vec<Verdict>> {
        records
            .iter()
            .map(|r| {
                let mut class = self
                    .truth
                    .get(&r.id)
                    .cloned()
                    .ok_or_else(|| Error::UnknownRecord(r.id.clone()))?;
                if self.flip_rate > 0.0 && self.rng.random::<f64>() < self.flip_rate {
                    let shift = self.rng.random_range(1..self.classes.len());
                    class = self.classes.label((class.index + shift) % self.classes.len())?;
                }
                Ok(Verdict {
                    record_id: r.id.clone(),
                    class,
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub epoch_size: usize,
    /// Rebalance the verified set before fitting; `None` disables SMOTE.
    pub smote: Option<SmoteConfig>,
    /// Also flag predicted-normal records whose margin is below this.
    pub uncertainty_margin: f64,
    /// Flag every record (the fully labeled comparison mode).
    pub all_evolving: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            epoch_size: 300,
            smote: Some(SmoteConfig::default()),
            uncertainty_margin: 0.0,
            all_evolving: false,
        }
    }
}

/// Prediction quality for one epoch, measured before the update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Per-class one-vs-rest metrics; binary detectors use {normal, anomaly}.
    pub classes: ClassReport,
    /// Anomaly-vs-normal with anomaly as the positive class.
    pub anomaly: Confusion,
    pub anomaly_metrics: MetricSet,
    pub auc: Option<f64>,
    /// Only labeler-verified records were scored.
    pub partial: bool,
    pub evaluated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub n: usize,
    pub flagged: usize,
    /// Operator reports of missed failures folded into this epoch's update.
    pub missed_reports: usize,
    /// Flagged records closed without a verdict (timeout mode).
    #[serde(default)]
    pub unverified: usize,
    pub verdicts: BTreeMap<String, usize>,
    pub evaluation: Option<Evaluation>,
    pub fit: Option<FitSummary>,
    pub labeled_fraction_epoch: f64,
    pub labeled_fraction_cumulative: f64,
    pub warnings: Vec<String>,
}

impl EpochReport {
    pub fn labeled(&self) -> usize {
        self.flagged - self.unverified + self.missed_reports
    }
}

/// Mean of `(verified + missed) / n` over the last `window` epochs (all of
/// them when the window is longer than the run).
pub fn labeled_fraction(reports: &[EpochReport], window: usize) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::Empty("epoch reports"));
    }
    let tail = &reports[reports.len() - window.clamp(1, reports.len())..];
    Ok(tail
        .iter()
        .map(|r| r.labeled() as f64 / r.n as f64)
        .sum::<f64>()
        / tail.len() as f64)
}

/// Predictions for an epoch awaiting verdicts.
#[derive(Clone, Debug, PartialEq)]
pub struct PendingEpoch<F> {
    pub epoch: usize,
    pub records: Vec<Record<F>>,
    pub predictions: Vec<Prediction<F>>,
    /// Indices into `records`, ascending.
    pub flagged: Vec<usize>,
}

impl<F: Scalar> PendingEpoch<F> {
    pub fn flagged_records(&self) -> Vec<Record<F>> {
        self.flagged.iter().map(|&i| self.records[i].clone()).collect()
    }

    pub fn suggested(&self, classes: &[ClassLabel]) -> Vec<ClassLabel> {
        self.flagged
            .iter()
            .map(|&i| classes[self.predictions[i].class].clone())
            .collect()
    }
}

/// Cumulative labeling counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTotals {
    pub labeled: usize,
    pub records: usize,
}

impl LabelTotals {
    pub fn fraction(&self) -> f64 {
        if self.records == 0 {
            0.0
        } else {
            self.labeled as f64 / self.records as f64
        }
    }
}

/// Detector plus loop bookkeeping.
#[derive(Clone, Debug)]
pub struct Evolver<F> {
    detector: Detector<F>,
    cfg: EvolutionConfig,
    classes: ClassSet,
    epoch: usize,
    totals: LabelTotals,
    /// Records predicted normal and never flagged, open to operator reports.
    reportable: HashMap<String, Record<F>>,
    reported: BTreeSet<String>,
    queued_missed: Vec<(Record<F>, ClassLabel)>,
}

impl<F: Scalar> Evolver<F> {
    /// `classes` is the full class set of the data; binary detectors
    /// collapse it to normal/anomaly for prediction.
    pub fn new(detector: Detector<F>, cfg: EvolutionConfig, classes: ClassSet) -> Result<Self> {
        if cfg.epoch_size == 0 {
            return Err(Error::Config("epoch_size must be positive".into()));
        }
        if !detector.kind().is_binary() && detector.classes() != classes.len() {
            return Err(Error::shape("detector classes", classes.len(), detector.classes()));
        }
        Ok(Self {
            detector,
            cfg,
            classes,
            epoch: 0,
            totals: LabelTotals::default(),
            reportable: HashMap::new(),
            reported: BTreeSet::new(),
            queued_missed: Vec::new(),
        })
    }

    pub fn detector(&self) -> &Detector<F> {
        &self.detector
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.cfg
    }

    pub fn classes(&self) -> &ClassSet {
        &self.classes
    }

    /// Index of the next epoch to run.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn totals(&self) -> LabelTotals {
        self.totals
    }

    pub fn queued_missed(&self) -> &[(Record<F>, ClassLabel)] {
        &self.queued_missed
    }

    pub fn is_reportable(&self, id: &str) -> bool {
        self.reportable.contains_key(id)
    }

    pub fn reportable_ids(&self) -> impl Iterator<Item = &str> {
        self.reportable.keys().map(String::as_str)
    }

    /// Classes a prediction index maps to: the data classes for multi-class
    /// detectors, {normal, anomaly} for binary ones.
    pub fn prediction_classes(&self) -> Vec<ClassLabel> {
        let set = if self.detector.kind().is_binary() {
            ClassSet::binary()
        } else {
            self.classes.clone()
        };
        (0..set.len()).map(|i| set.label(i).expect("index in range")).collect()
    }

    pub fn begin_epoch(&self, records: Vec<Record<F>>) -> Result<PendingEpoch<F>> {
        if records.is_empty() {
            return Err(Error::Empty("epoch batch"));
        }
        let predictions = records
            .iter()
            .map(|r| self.detector.predict(r))
            .collect::<Result<Vec<_>>>()?;
        let tau = F::lit(self.cfg.uncertainty_margin);
        let flagged = predictions
            .iter()
            .enumerate()
            .filter(|(_, p)| self.cfg.all_evolving || p.is_anomaly() || p.margin() < tau)
            .map(|(i, _)| i)
            .collect();
        Ok(PendingEpoch {
            epoch: self.epoch,
            records,
            predictions,
            flagged,
        })
    }

    /// Checks that `verdicts` answer exactly the flagged records and
    /// returns them in flagged order.
    pub fn match_verdicts(&self, pending: &PendingEpoch<F>, verdicts: Vec<Verdict>) -> Result<Vec<ClassLabel>> {
        if verdicts.len() != pending.flagged.len() {
            return Err(Error::VerdictCount {
                expected: pending.flagged.len(),
                got: verdicts.len(),
            });
        }
        let mut by_id: HashMap<String, ClassLabel> = HashMap::with_capacity(verdicts.len());
        for v in verdicts {
            if v.class.index >= self.classes.len() || self.classes.names()[v.class.index] != v.class.name {
                return Err(Error::UnknownClass(v.class.name));
            }
            if by_id.insert(v.record_id.clone(), v.class).is_some() {
                return Err(Error::VerdictMismatch(v.record_id));
            }
        }
        pending
            .flagged
            .iter()
            .map(|&i| {
                let id = &pending.records[i].id;
                by_id.remove(id).ok_or_else(|| Error::VerdictMismatch(id.clone()))
            })
            .collect()
    }

    /// Like [`Self::match_verdicts`] but accepts any subset of the flagged
    /// records; unanswered ones come back as `None`.
    pub fn match_partial(&self, pending: &PendingEpoch<F>, verdicts: Vec<Verdict>) -> Result<Vec<Option<ClassLabel>>> {
        let mut by_id: HashMap<String, ClassLabel> = HashMap::with_capacity(verdicts.len());
        for v in verdicts {
            if v.class.index >= self.classes.len() || self.classes.names()[v.class.index] != v.class.name {
                return Err(Error::UnknownClass(v.class.name));
            }
            if by_id.insert(v.record_id.clone(), v.class).is_some() {
                return Err(Error::VerdictMismatch(v.record_id));
            }
        }
        let answered: Vec<Option<ClassLabel>> = pending
            .flagged
            .iter()
            .map(|&i| by_id.remove(&pending.records[i].id))
            .collect();
        match by_id.into_keys().min() {
            Some(stray) => Err(Error::VerdictMismatch(stray)),
            None => Ok(answered),
        }
    }

    /// Applies verdicts (in any order) and fits. `truth`, when given, holds
    /// the true class of every record and makes the evaluation complete.
    /// On error nothing changes.
    pub fn complete_epoch(
        &mut self,
        pending: PendingEpoch<F>,
        verdicts: Vec<Verdict>,
        truth: Option<&[ClassLabel]>,
    ) -> Result<EpochReport> {
        self.check_pending(&pending, truth)?;
        let verified = self.match_verdicts(&pending, verdicts)?;
        self.commit(pending, verified.into_iter().map(Some).collect(), truth)
    }

    /// Timeout close: fits on the verdicts received so far. Flagged records
    /// without a verdict are left out of the fit and of the labeled count.
    pub fn complete_epoch_partial(
        &mut self,
        pending: PendingEpoch<F>,
        verdicts: Vec<Verdict>,
        truth: Option<&[ClassLabel]>,
    ) -> Result<EpochReport> {
        self.check_pending(&pending, truth)?;
        let verified = self.match_partial(&pending, verdicts)?;
        self.commit(pending, verified, truth)
    }

    fn check_pending(&self, pending: &PendingEpoch<F>, truth: Option<&[ClassLabel]>) -> Result<()> {
        if pending.epoch != self.epoch {
            return Err(Error::Config(format!(
                "pending epoch {} does not follow epoch {}",
                pending.epoch,
                self.epoch
            )));
        }
        if let Some(t) = truth {
            if t.len() != pending.records.len() {
                return Err(Error::shape("epoch truth", pending.records.len(), t.len()));
            }
        }
        Ok(())
    }

    fn commit(
        &mut self,
        pending: PendingEpoch<F>,
        answers: Vec<Option<ClassLabel>>,
        truth: Option<&[ClassLabel]>,
    ) -> Result<EpochReport> {
        let answered: Vec<(usize, ClassLabel)> = pending
            .flagged
            .iter()
            .zip(&answers)
            .filter_map(|(&i, a)| a.clone().map(|l| (i, l)))
            .collect();
        let unverified = pending.flagged.len() - answered.len();
        let verified: Vec<ClassLabel> = answered.iter().map(|(_, l)| l.clone()).collect();

        let mut fit_records: Vec<Record<F>> = answered.iter().map(|&(i, _)| pending.records[i].clone()).collect();
        let mut fit_labels = verified.clone();
        let missed = self.queued_missed.len();
        for (r, l) in &self.queued_missed {
            fit_records.push(r.clone());
            fit_labels.push(l.clone());
        }

        let mut warnings = Vec::new();
        let mut detector = self.detector.clone();
        let fit = if fit_records.is_empty() {
            None
        } else {
            let batch = Batch::new(fit_records, Some(fit_labels))?;
            let batch = match &self.cfg.smote {
                Some(smote) => {
                    let (b, w) = rebalance_epoch(&batch, &smote.reseeded(self.epoch as u64))?;
                    warnings.extend(w);
                    b
                }
                None => batch,
            };
            let (records, labels) = batch.into_parts();
            Some(detector.fit_incremental(&records, &labels.unwrap_or_default())?)
        };

        let evaluated: Vec<usize> = answered.iter().map(|&(i, _)| i).collect();
        let evaluation = self.evaluate(&pending, &evaluated, &verified, truth)?;
        let mut counts = BTreeMap::new();
        for l in &verified {
            *counts.entry(l.name.clone()).or_insert(0) += 1;
        }

        // commit
        let flagged: BTreeSet<usize> = pending.flagged.iter().copied().collect();
        for (i, r) in pending.records.iter().enumerate() {
            if !flagged.contains(&i) && !pending.predictions[i].is_anomaly() {
                self.reportable.insert(r.id.clone(), r.clone());
            }
        }
        self.detector = detector;
        self.queued_missed.clear();
        let n = pending.records.len();
        let labeled = answered.len() + missed;
        self.totals.labeled += labeled;
        self.totals.records += n;
        self.epoch += 1;
        Ok(EpochReport {
            epoch: pending.epoch,
            n,
            flagged: pending.flagged.len(),
            missed_reports: missed,
            unverified,
            verdicts: counts,
            evaluation,
            fit,
            labeled_fraction_epoch: labeled as f64 / n as f64,
            labeled_fraction_cumulative: self.totals.fraction(),
            warnings,
        })
    }

    pub fn run_epoch<L: Labeler<F> + ?Sized>(
        &mut self,
        records: Vec<Record<F>>,
        labeler: &mut L,
        truth: Option<&[ClassLabel]>,
    ) -> Result<EpochReport> {
        let pending = self.begin_epoch(records)?;
        let verdicts = if pending.flagged.is_empty() {
            Vec::new()
        } else {
            let submitted = pending.flagged_records();
            let suggested = pending.suggested(&self.prediction_classes());
            labeler.verify(&submitted, &suggested)?
        };
        self.complete_epoch(pending, verdicts, truth)
    }

    /// Queues a missed failure for the next update. Only records predicted
    /// normal and never sent for verification can be reported, each once.
    pub fn report_missed(&mut self, record_id: &str, truth: ClassLabel) -> Result<()> {
        if truth.is_normal() {
            return Err(Error::NormalReport);
        }
        if truth.index >= self.classes.len() || self.classes.names()[truth.index] != truth.name {
            return Err(Error::UnknownClass(truth.name));
        }
        if self.reported.contains(record_id) {
            return Err(Error::DuplicateReport(record_id.to_owned()));
        }
        let record = self
            .reportable
            .remove(record_id)
            .ok_or_else(|| Error::UnknownRecord(record_id.to_owned()))?;
        self.reported.insert(record_id.to_owned());
        self.queued_missed.push((record, truth));
        Ok(())
    }

    fn evaluate(
        &self,
        pending: &PendingEpoch<F>,
        answered: &[usize],
        verified: &[ClassLabel],
        truth: Option<&[ClassLabel]>,
    ) -> Result<Option<Evaluation>> {
        let (indices, truth, partial): (Vec<usize>, Vec<ClassLabel>, bool) = match truth {
            Some(t) => ((0..t.len()).collect(), t.to_vec(), false),
            None => (answered.to_vec(), verified.to_vec(), true),
        };
        if indices.is_empty() {
            return Ok(None);
        }
        let binary = self.detector.kind().is_binary();
        let to_pred_index = |l: &ClassLabel| if binary { usize::from(!l.is_normal()) } else { l.index };
        let predicted: Vec<usize> = indices.iter().map(|&i| pending.predictions[i].class).collect();
        let truth_idx: Vec<usize> = truth.iter().map(to_pred_index).collect();
        let set = if binary { ClassSet::binary() } else { self.classes.clone() };
        let classes = per_class_report(&predicted, &truth_idx, &set)?;

        let pred_anom: Vec<bool> = predicted.iter().map(|&c| c != 0).collect();
        let true_anom: Vec<bool> = truth.iter().map(|l| !l.is_normal()).collect();
        let anomaly = confusion(&pred_anom, &true_anom, &true)?;
        let anomaly = Confusion {
            positive: "anomaly".into(),
            ..anomaly
        };
        let scores: Vec<F> = indices.iter().map(|&i| anomaly_score(&pending.predictions[i])).collect();
        let auc = roc_curve(&scores, &true_anom, &true).ok().map(|r| r.auc());
        Ok(Some(Evaluation {
            anomaly_metrics: anomaly.metrics(),
            classes,
            anomaly,
            auc,
            partial,
            evaluated: indices.len(),
        }))
    }

    /// Anomaly-vs-normal ROC for an epoch's predictions.
    pub fn roc(pending: &PendingEpoch<F>, truth: &[ClassLabel]) -> Result<RocCurve> {
        let scores: Vec<F> = pending.predictions.iter().map(anomaly_score).collect();
        let true_anom: Vec<bool> = truth.iter().map(|l| !l.is_normal()).collect();
        roc_curve(&scores, &true_anom, &true)
    }
}

/// Higher means more anomalous: `−x·w` for binary detectors, otherwise the
/// best anomaly score minus the normal score.
pub fn anomaly_score<F: Scalar>(p: &Prediction<F>) -> F {
    match p.scores.as_slice() {
        [s] => -*s,
        [normal, rest @ ..] => rest.iter().copied().fold(F::neg_infinity(), F::max) - *normal,
        [] => F::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{BinaryDetector, DetectorConfig, ModelKind, MulticlassDetector, Penalty};
    use ndarray::{array, Array2};

    fn rec(id: &str, v: &[f64]) -> Record<f64> {
        Record::new(id, v.to_vec())
    }

    /// Flags records whose first attribute exceeds 0.5.
    fn threshold_detector() -> Detector<f64> {
        BinaryDetector::new(array![-2.0, 0.0, 1.0], 0.0).unwrap().into()
    }

    fn records(values: &[f64]) -> Vec<Record<f64>> {
        values.iter().enumerate().map(|(i, &v)| rec(&format!("r{i}"), &[v, 0.5])).collect()
    }

    struct Fixed(Vec<Verdict>);
    impl Labeler<f64> for Fixed {
        fn verify(&mut self, _: &[Record<f64>], _: &[ClassLabel]) -> Result<Vec<Verdict>> {
            Ok(self.0.clone())
        }
    }

    fn plain_cfg() -> EvolutionConfig {
        EvolutionConfig {
            smote: None,
            ..EvolutionConfig::default()
        }
    }

    #[test]
    fn flags_only_predicted_anomalies() {
        let ev = Evolver::new(threshold_detector(), plain_cfg(), ClassSet::default()).unwrap();
        let vals: Vec<f64> = (0..300).map(|i| if i < 40 { 0.9 } else { 0.1 }).collect();
        let p = ev.begin_epoch(records(&vals)).unwrap();
        assert_eq!(p.flagged.len(), 40);
        assert_eq!(p.flagged, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn empty_flag_set_leaves_detector_unchanged() {
        let mut ev = Evolver::new(threshold_detector(), plain_cfg(), ClassSet::default()).unwrap();
        let before = ev.detector().clone();
        let mut labeler = Fixed(vec![]);
        let report = ev.run_epoch(records(&[0.1, 0.2]), &mut labeler, None).unwrap();
        assert_eq!(report.flagged, 0);
        assert!(report.fit.is_none());
        assert_eq!(ev.detector(), &before);
        assert_eq!(report.labeled_fraction_cumulative, 0.0);
    }

    #[test]
    fn verdict_count_mismatch_aborts_without_changes() {
        let mut ev = Evolver::new(threshold_detector(), plain_cfg(), ClassSet::default()).unwrap();
        let before = ev.detector().clone();
        let mut labeler = Fixed(vec![]);
        let err = ev.run_epoch(records(&[0.9, 0.1]), &mut labeler, None).unwrap_err();
        assert!(matches!(err, Error::VerdictCount { expected: 1, got: 0 }));
        assert_eq!(ev.detector(), &before);
        assert_eq!(ev.epoch(), 0);
        assert_eq!(ev.totals(), LabelTotals::default());

        let cs = ClassSet::default();
        let wrong = Fixed(vec![Verdict { record_id: "zz".into(), class: cs.label(2).unwrap() }]);
        let err = ev.run_epoch(records(&[0.9, 0.1]), &mut { wrong }, None).unwrap_err();
        assert!(matches!(err, Error::VerdictMismatch(_)));
    }

    #[test]
    fn labeled_fraction_accounting() {
        let cs = ClassSet::default();
        let mut ev = Evolver::new(threshold_detector(), plain_cfg(), cs.clone()).unwrap();
        let mut oracle = OracleLabeler::new(cs.clone());
        for e in 0..2 {
            let vals: Vec<f64> = (0..300).map(|i| if i < 30 { 0.9 } else { 0.1 }).collect();
            let mut recs = records(&vals);
            for r in &mut recs {
                r.id = format!("e{e}-{}", r.id);
            }
            let truth: Vec<ClassLabel> = (0..300).map(|i| cs.label(usize::from(i < 30) * 2).unwrap()).collect();
            oracle.learn(&recs, &truth);
            let r = ev.run_epoch(recs, &mut oracle, Some(&truth)).unwrap();
            assert!(r.flagged <= r.n);
            assert_eq!(r.labeled_fraction_epoch, 0.1);
            // the update must not flip the threshold for the second epoch
            ev.detector = threshold_detector();
        }
        assert_eq!(ev.totals().fraction(), 0.1);
    }

    #[test]
    fn labeled_fraction_window() {
        let report = |flagged| EpochReport {
            epoch: 0,
            n: 300,
            flagged,
            missed_reports: 0,
            unverified: 0,
            verdicts: BTreeMap::new(),
            evaluation: None,
            fit: None,
            labeled_fraction_epoch: 0.0,
            labeled_fraction_cumulative: 0.0,
            warnings: vec![],
        };
        assert!((labeled_fraction(&[report(30), report(30)], 2).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(labeled_fraction(&[report(300), report(300)], 10).unwrap(), 1.0);
        assert!((labeled_fraction(&[report(300), report(0)], 1).unwrap()).abs() < 1e-15);
        assert!(labeled_fraction(&[], 3).is_err());
    }

    #[test]
    fn missed_reports_join_next_update() {
        let cs = ClassSet::default();
        let w = Array2::from_shape_fn((3, 5), |(i, j)| if i == 2 && j == 0 { 1.0 } else { 0.0 });
        let det: Detector<f64> = MulticlassDetector::new(w, 0.0, Penalty::L21).unwrap().into();
        let mut ev = Evolver::new(det, plain_cfg(), cs.clone()).unwrap();
        let mut labeler = Fixed(vec![]);
        let r = ev.run_epoch(records(&[0.2, 0.3]), &mut labeler, None).unwrap();
        assert_eq!(r.flagged, 0);

        let disk = cs.by_name("disk").unwrap();
        assert!(matches!(ev.report_missed("r0", cs.normal()), Err(Error::NormalReport)));
        assert!(matches!(ev.report_missed("nope", disk.clone()), Err(Error::UnknownRecord(_))));
        ev.report_missed("r0", disk.clone()).unwrap();
        assert!(matches!(ev.report_missed("r0", disk.clone()), Err(Error::DuplicateReport(_))));
        assert_eq!(ev.queued_missed()[0].1, disk);

        let r = ev.run_epoch(records(&[0.2]).into_iter().map(|mut r| { r.id = "x".into(); r }).collect(), &mut labeler, None).unwrap();
        assert_eq!(r.missed_reports, 1);
        assert_eq!(r.fit.as_ref().unwrap().samples, 1);
        assert!(ev.queued_missed().is_empty());
        assert_eq!(ev.totals(), LabelTotals { labeled: 1, records: 3 });
    }

    #[test]
    fn partial_close_fits_on_answered_verdicts_only() {
        let cs = ClassSet::default();
        let mut ev = Evolver::new(threshold_detector(), plain_cfg(), cs.clone()).unwrap();
        let p = ev.begin_epoch(records(&[0.9, 0.8, 0.1, 0.1])).unwrap();
        assert_eq!(p.flagged, vec![0, 1]);
        let cpu = cs.by_name("cpu").unwrap();
        let stray = vec![Verdict { record_id: "r2".into(), class: cpu.clone() }];
        assert!(matches!(ev.match_partial(&p, stray), Err(Error::VerdictMismatch(_))));

        let one = vec![Verdict { record_id: "r1".into(), class: cpu }];
        let r = ev.complete_epoch_partial(p, one, None).unwrap();
        assert_eq!((r.flagged, r.unverified, r.labeled()), (2, 1, 1));
        assert_eq!(r.fit.unwrap().samples, 1);
        assert_eq!(r.evaluation.unwrap().evaluated, 1);
        assert_eq!(ev.totals(), LabelTotals { labeled: 1, records: 4 });
        // flagged-but-unanswered records are not open to missed reports
        assert!(!ev.is_reportable("r0"));
        assert!(ev.is_reportable("r2"));
    }

    #[test]
    fn all_evolving_flags_everything() {
        let cfg = EvolutionConfig { all_evolving: true, ..plain_cfg() };
        let ev = Evolver::new(threshold_detector(), cfg, ClassSet::default()).unwrap();
        let p = ev.begin_epoch(records(&[0.1, 0.9, 0.2])).unwrap();
        assert_eq!(p.flagged, vec![0, 1, 2]);
    }

    #[test]
    fn uncertainty_margin_flags_near_boundary() {
        let cfg = EvolutionConfig { uncertainty_margin: 0.5, ..plain_cfg() };
        let ev = Evolver::new(threshold_detector(), cfg, ClassSet::default()).unwrap();
        // scores 1 - 2x: 0.8, 0.2, -0.8
        let p = ev.begin_epoch(records(&[0.1, 0.4, 0.9])).unwrap();
        assert_eq!(p.flagged, vec![1, 2]);
    }

    #[test]
    fn run_is_reproducible() {
        let cs = ClassSet::default();
        let run = || {
            let det = DetectorConfig { model: ModelKind::Mcl21ls, seed: 3, ..DetectorConfig::default() }
                .build::<f64>(2, cs.len())
                .unwrap();
            let mut ev = Evolver::new(det, EvolutionConfig { all_evolving: true, ..EvolutionConfig::default() }, cs.clone()).unwrap();
            let mut oracle = OracleLabeler::new(cs.clone()).with_noise(0.1, 9);
            let recs = records(&(0..40).map(|i| i as f64 / 40.0).collect::<Vec<_>>());
            let truth: Vec<_> = (0..40).map(|i| cs.label(if i % 4 == 0 { 1 } else { 0 }).unwrap()).collect();
            oracle.learn(&recs, &truth);
            let r = ev.run_epoch(recs, &mut oracle, Some(&truth)).unwrap();
            (r, ev.detector().snapshot().to_string())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn anomaly_score_orientation() {
        let p = Prediction { class: 0, scores: vec![0.7] };
        assert_eq!(anomaly_score(&p), -0.7);
        let p = Prediction { class: 1, scores: vec![0.1f64, 0.4, -0.2] };
        assert!((anomaly_score(&p) - 0.3).abs() < 1e-15);
    }
}
