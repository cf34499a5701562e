//! The serialized state machine behind the API. Every mutation goes through
//! [`Engine::apply`], which takes one input event and returns the events it
//! derives, so replaying a log's inputs rebuilds the state exactly.

use std::collections::{HashMap, HashSet};

use evolad_core::data::{fit_norm, NormStats};
use evolad_core::evolution::{EpochReport, Evolver, PendingEpoch, Verdict};
use evolad_core::features::AttributeRanking;
use evolad_core::{ClassLabel, ClassSet, Record64};
use serde::{Deserialize, Serialize};

use crate::config::{Normalization, ServiceConfig};
use crate::error::{Result, ServiceError};
use crate::events::Event;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemStatus {
    Pending,
    Verified,
    /// Its epoch closed on timeout before a verdict arrived.
    Expired,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub record_id: String,
    /// Normalized values, in schema order.
    pub values: Vec<f64>,
    pub suggested: String,
    pub scores: Vec<f64>,
    pub epoch: usize,
    pub status: ItemStatus,
    pub verdict: Option<String>,
    /// Epoch milliseconds.
    pub verdict_time: Option<i64>,
}

#[derive(Clone, Debug)]
struct Open {
    pending: PendingEpoch<f64>,
    verdicts: Vec<Verdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Status {
    /// Index of the next epoch to start, or the one open for verification.
    pub epoch: usize,
    pub buffered: usize,
    pub open_epoch: Option<usize>,
    pub pending_verdicts: usize,
    pub labeled: usize,
    pub records: usize,
    pub labeled_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct Engine {
    attributes: Vec<String>,
    classes: ClassSet,
    normalization: Normalization,
    norm: Option<NormStats<f64>>,
    evolver: Evolver<f64>,
    buffer: Vec<Record64>,
    ids: HashSet<String>,
    open: Option<Open>,
    queue: Vec<QueueItem>,
    queue_index: HashMap<String, usize>,
    reports: Vec<EpochReport>,
    missed_ids: HashSet<String>,
}

impl Engine {
    pub fn new(cfg: &ServiceConfig) -> Result<Self> {
        cfg.validate()?;
        let classes = cfg.class_set()?;
        let detector = cfg.detector.build::<f64>(cfg.attributes.len(), classes.len())?;
        let evolver = Evolver::new(detector, cfg.evolution.clone(), classes.clone())?;
        Ok(Self {
            attributes: cfg.attributes.clone(),
            classes,
            normalization: cfg.normalization,
            norm: None,
            evolver,
            buffer: Vec::new(),
            ids: HashSet::new(),
            open: None,
            queue: Vec::new(),
            queue_index: HashMap::new(),
            reports: Vec::new(),
            missed_ids: HashSet::new(),
        })
    }

    /// The header event for a fresh log.
    pub fn initialized(cfg: &ServiceConfig, engine: &Engine) -> Event {
        Event::Initialized {
            attributes: cfg.attributes.clone(),
            classes: cfg.classes.clone(),
            detector: cfg.detector.clone(),
            evolution: cfg.evolution.clone(),
            normalization: cfg.normalization,
            weights: engine.weights(),
        }
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn classes(&self) -> &ClassSet {
        &self.classes
    }

    /// Count of records ever ingested.
    pub fn ingested(&self) -> usize {
        self.ids.len()
    }

    pub fn knows(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    // ----- reads -----

    pub fn status(&self) -> Status {
        let t = self.evolver.totals();
        Status {
            epoch: self.evolver.epoch(),
            buffered: self.buffer.len(),
            open_epoch: self.open.as_ref().map(|o| o.pending.epoch),
            pending_verdicts: self
                .open
                .as_ref()
                .map_or(0, |o| o.pending.flagged.len() - o.verdicts.len()),
            labeled: t.labeled,
            records: t.records,
            labeled_fraction: t.fraction(),
        }
    }

    pub fn queue(&self) -> &[QueueItem] {
        &self.queue
    }

    pub fn reports(&self) -> &[EpochReport] {
        &self.reports
    }

    /// Current weights in the snapshot text format.
    pub fn weights(&self) -> String {
        self.evolver.detector().snapshot().to_string()
    }

    pub fn ranking(&self) -> Result<AttributeRanking> {
        Ok(self.evolver.detector().ranking(&self.attributes)?)
    }

    // ----- validation (no mutation) -----

    pub fn class(&self, name: &str) -> Result<ClassLabel> {
        self.classes
            .by_name(name)
            .map_err(|_| ServiceError::InvalidClass(name.to_owned()))
    }

    pub fn check_record(&self, r: &Record64) -> Result<()> {
        if r.id.is_empty() {
            return Err(ServiceError::BadRequest("record id is empty".into()));
        }
        if self.ids.contains(&r.id) {
            return Err(ServiceError::DuplicateRecord(r.id.clone()));
        }
        if r.values.len() != self.attributes.len() {
            let attribute = self.attributes.get(r.values.len()).cloned();
            return Err(ServiceError::Schema {
                message: format!(
                    "record `{}` has {} values for {} attributes",
                    r.id,
                    r.values.len(),
                    self.attributes.len()
                ),
                attribute,
            });
        }
        if let Some(j) = r.values.iter().position(|v| !v.is_finite()) {
            return Err(ServiceError::Schema {
                message: format!("record `{}`: non-finite value for `{}`", r.id, self.attributes[j]),
                attribute: Some(self.attributes[j].clone()),
            });
        }
        Ok(())
    }

    pub fn check_verdict(&self, record_id: &str, class: &str) -> Result<()> {
        let item = self
            .queue_index
            .get(record_id)
            .map(|&i| &self.queue[i])
            .ok_or_else(|| ServiceError::UnknownRecord(record_id.to_owned()))?;
        match item.status {
            ItemStatus::Verified => return Err(ServiceError::DuplicateVerdict(record_id.to_owned())),
            ItemStatus::Expired => return Err(ServiceError::VerificationClosed(record_id.to_owned())),
            ItemStatus::Pending => {}
        }
        self.class(class)?;
        Ok(())
    }

    pub fn check_missed(&self, record_id: &str, class: &str) -> Result<()> {
        let label = self.class(class)?;
        if label.is_normal() {
            return Err(ServiceError::NormalReport);
        }
        if self.evolver.is_reportable(record_id) {
            return Ok(());
        }
        if !self.ids.contains(record_id) {
            return Err(ServiceError::UnknownRecord(record_id.to_owned()));
        }
        if self.missed_ids.contains(record_id) {
            Err(ServiceError::DuplicateReport(record_id.to_owned()))
        } else {
            Err(ServiceError::NotReportable(record_id.to_owned()))
        }
    }

    pub fn check_timeout(&self, epoch: usize) -> Result<()> {
        match &self.open {
            Some(o) if o.pending.epoch == epoch => Ok(()),
            _ => Err(ServiceError::BadRequest(format!("epoch {epoch} is not open"))),
        }
    }

    /// Validates an input event without applying it.
    pub fn check(&self, event: &Event) -> Result<()> {
        match event {
            Event::RecordIngested { record } => self.check_record(record),
            Event::Verdict { record_id, class, .. } => self.check_verdict(record_id, class),
            Event::MissedReport { record_id, class, .. } => self.check_missed(record_id, class),
            Event::VerificationTimeout { epoch } => self.check_timeout(*epoch),
            other => Err(ServiceError::BadRequest(format!("{other:?} is not an input event"))),
        }
    }

    // ----- mutation -----

    /// Applies a checked input event and returns the derived events, in log
    /// order.
    pub fn apply(&mut self, event: &Event) -> Result<Vec<Event>> {
        self.check(event)?;
        let mut out = Vec::new();
        match event {
            Event::RecordIngested { record } => {
                self.ids.insert(record.id.clone());
                self.buffer.push(record.clone());
            }
            Event::Verdict { record_id, class, at } => {
                let label = self.class(class)?;
                let i = self.queue_index[record_id];
                let item = &mut self.queue[i];
                item.status = ItemStatus::Verified;
                item.verdict = Some(class.clone());
                item.verdict_time = Some(*at);
                let open = self.open.as_mut().expect("pending items belong to the open epoch");
                open.verdicts.push(Verdict {
                    record_id: record_id.clone(),
                    class: label,
                });
                if open.verdicts.len() == open.pending.flagged.len() {
                    self.close(false, &mut out)?;
                }
            }
            Event::MissedReport { record_id, class, .. } => {
                let label = self.class(class)?;
                self.evolver.report_missed(record_id, label)?;
                self.missed_ids.insert(record_id.clone());
            }
            Event::VerificationTimeout { .. } => self.close(true, &mut out)?,
            _ => unreachable!("check rejects derived events"),
        }
        self.start_ready(&mut out)?;
        Ok(out)
    }

    /// Starts epochs while no epoch is open and a full epoch is buffered.
    fn start_ready(&mut self, out: &mut Vec<Event>) -> Result<()> {
        let size = self.evolver.config().epoch_size;
        while self.open.is_none() && self.buffer.len() >= size {
            let mut records: Vec<Record64> = self.buffer.drain(..size).collect();
            if self.normalization == Normalization::Frozen {
                if self.norm.is_none() {
                    self.norm = Some(fit_norm(&records)?);
                }
                records = self.norm.as_ref().expect("set above").apply_all(&records)?;
            }
            let pending = self.evolver.begin_epoch(records)?;
            let epoch = pending.epoch;
            out.push(Event::EpochStarted {
                epoch,
                records: pending.records.iter().map(|r| r.id.clone()).collect(),
            });
            let names = self.evolver.prediction_classes();
            for &i in &pending.flagged {
                let p = &pending.predictions[i];
                let r = &pending.records[i];
                let suggested = names[p.class].name.clone();
                out.push(Event::Flagged {
                    epoch,
                    record_id: r.id.clone(),
                    suggested: suggested.clone(),
                    scores: p.scores.clone(),
                });
                self.queue_index.insert(r.id.clone(), self.queue.len());
                self.queue.push(QueueItem {
                    record_id: r.id.clone(),
                    values: r.values.clone(),
                    suggested,
                    scores: p.scores.clone(),
                    epoch,
                    status: ItemStatus::Pending,
                    verdict: None,
                    verdict_time: None,
                });
            }
            self.open = Some(Open {
                pending,
                verdicts: Vec::new(),
            });
            if self.open.as_ref().is_some_and(|o| o.pending.flagged.is_empty()) {
                self.close(false, out)?;
            }
        }
        Ok(())
    }

    fn close(&mut self, timed_out: bool, out: &mut Vec<Event>) -> Result<()> {
        let open = self.open.take().expect("close needs an open epoch");
        let epoch = open.pending.epoch;
        let flagged: Vec<String> = open.pending.flagged.iter().map(|&i| open.pending.records[i].id.clone()).collect();
        let result = if timed_out {
            self.evolver.complete_epoch_partial(open.pending.clone(), open.verdicts.clone(), None)
        } else {
            self.evolver.complete_epoch(open.pending.clone(), open.verdicts.clone(), None)
        };
        let report = match result {
            Ok(r) => r,
            Err(e) => {
                // the epoch stays open; a later timeout or restart retries
                self.open = Some(open);
                return Err(e.into());
            }
        };
        if timed_out {
            for id in &flagged {
                let item = &mut self.queue[self.queue_index[id]];
                if item.status == ItemStatus::Pending {
                    item.status = ItemStatus::Expired;
                }
            }
        }
        out.push(Event::WeightsSnapshot {
            epoch,
            weights: self.weights(),
        });
        out.push(Event::EpochReport { report: report.clone() });
        self.reports.push(report);
        Ok(())
    }
}
