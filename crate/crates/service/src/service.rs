use std::collections::{HashSet, VecDeque};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use evolad_core::evolution::EpochReport;
use evolad_core::Record64;
use serde::Serialize;

use crate::config::ServiceConfig;
use crate::engine::Engine;
use crate::error::{Result, ServiceError};
use crate::events::{Event, EventLog};

pub fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as i64)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Outcome {
    pub epochs_started: Vec<usize>,
    pub epochs_completed: Vec<EpochReport>,
}

impl Outcome {
    fn absorb(&mut self, derived: &[Event]) {
        for e in derived {
            match e {
                Event::EpochStarted { epoch, .. } => self.epochs_started.push(*epoch),
                Event::EpochReport { report } => self.epochs_completed.push(report.clone()),
                _ => {}
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IngestOutcome {
    pub accepted: usize,
    pub buffered: usize,
    #[serde(flatten)]
    pub outcome: Outcome,
}

/// Engine plus its durable log. All writes go through `&mut self`, so one
/// lock around a `Service` is the single serialized writer.
#[derive(Debug)]
pub struct Service {
    cfg: ServiceConfig,
    engine: Engine,
    log: EventLog,
    opened: Option<(usize, Instant)>,
}

impl Service {
    /// Starts fresh, or rebuilds the state by replaying an existing log.
    pub fn open(cfg: ServiceConfig) -> Result<Self> {
        let mut engine = Engine::new(&cfg)?;
        let (mut log, entries) = EventLog::open(cfg.log_path(), cfg.fsync)?;
        let header = Engine::initialized(&cfg, &engine);
        match entries.first() {
            None => {
                log.append(header)?;
            }
            Some(first) if first.event == header => {}
            Some(_) => {
                return Err(ServiceError::Config(format!(
                    "{} was written under a different configuration (schema, classes, detector, evolution or normalization)",
                    log.path().display()
                )))
            }
        }
        let mut expected: VecDeque<Event> = VecDeque::new();
        for entry in entries.iter().skip(1) {
            if entry.event.is_input() {
                if let Some(missing) = expected.front() {
                    return Err(ServiceError::Log {
                        line: entry.seq as usize,
                        message: format!("input event precedes derived event {missing:?}"),
                    });
                }
                match engine.apply(&entry.event) {
                    Ok(derived) => expected.extend(derived),
                    Err(e) => tracing::warn!(seq = entry.seq, error = %e, "replayed input failed as it did live"),
                }
            } else if expected.pop_front().as_ref() != Some(&entry.event) {
                return Err(ServiceError::Log {
                    line: entry.seq as usize,
                    message: "derived event differs from the replayed state".into(),
                });
            }
        }
        // a crash between an input and its derived events
        for e in expected {
            log.append(e)?;
        }
        log.commit()?;
        let opened = engine.status().open_epoch.map(|e| (e, Instant::now()));
        Ok(Self {
            cfg,
            engine,
            log,
            opened,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn submit(&mut self, input: Event, outcome: &mut Outcome) -> Result<()> {
        self.engine.check(&input)?;
        self.log.append(input.clone())?;
        let applied = self.engine.apply(&input);
        if let Ok(derived) = &applied {
            for e in derived {
                self.log.append(e.clone())?;
            }
            outcome.absorb(derived);
        }
        let open = self.engine.status().open_epoch;
        if open != self.opened.map(|(e, _)| e) {
            self.opened = open.map(|e| (e, Instant::now()));
        }
        applied.map(|_| ())
    }

    fn finish<T>(&mut self, result: Result<T>) -> Result<T> {
        self.log.commit()?;
        result
    }

    /// All-or-nothing for schema problems: the batch is checked before any
    /// record is logged.
    pub fn ingest(&mut self, records: Vec<Record64>) -> Result<IngestOutcome> {
        if records.is_empty() {
            return Err(ServiceError::BadRequest("no records".into()));
        }
        let mut seen = HashSet::new();
        for r in &records {
            self.engine.check_record(r)?;
            if !seen.insert(r.id.as_str()) {
                return Err(ServiceError::DuplicateRecord(r.id.clone()));
            }
        }
        let accepted = records.len();
        let mut outcome = Outcome::default();
        let mut result = Ok(());
        for record in records {
            result = self.submit(Event::RecordIngested { record }, &mut outcome);
            if result.is_err() {
                break;
            }
        }
        let result = result.map(|_| IngestOutcome {
            accepted,
            buffered: self.engine.status().buffered,
            outcome,
        });
        self.finish(result)
    }

    pub fn verdict(&mut self, record_id: &str, class: &str) -> Result<Outcome> {
        let mut outcome = Outcome::default();
        let event = Event::Verdict {
            record_id: record_id.to_owned(),
            class: class.to_owned(),
            at: now_ms(),
        };
        let result = self.submit(event, &mut outcome).map(|_| outcome);
        self.finish(result)
    }

    pub fn missed(&mut self, record_id: &str, class: &str) -> Result<()> {
        let event = Event::MissedReport {
            record_id: record_id.to_owned(),
            class: class.to_owned(),
            at: now_ms(),
        };
        let result = self.submit(event, &mut Outcome::default());
        self.finish(result)
    }

    /// Closes the open epoch when its verification timeout has lapsed.
    pub fn tick(&mut self, now: Instant) -> Result<Outcome> {
        let mut outcome = Outcome::default();
        let (Some(timeout), Some((epoch, since))) = (self.cfg.timeout(), self.opened) else {
            return Ok(outcome);
        };
        if now.duration_since(since) < timeout {
            return Ok(outcome);
        }
        let result = self
            .submit(Event::VerificationTimeout { epoch }, &mut outcome)
            .map(|_| outcome);
        self.finish(result)
    }

    /// Closes the open epoch now, as a lapsed timeout would.
    pub fn expire_open_epoch(&mut self) -> Result<Outcome> {
        let mut outcome = Outcome::default();
        let Some(epoch) = self.engine.status().open_epoch else {
            return Ok(outcome);
        };
        let result = self
            .submit(Event::VerificationTimeout { epoch }, &mut outcome)
            .map(|_| outcome);
        self.finish(result)
    }
}
