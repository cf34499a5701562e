//! JSON-lines event log. One entry per line, `seq` strictly increasing from 1.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use evolad_core::evolution::{EpochReport, EvolutionConfig};
use evolad_core::{DetectorConfig, Record64};
use serde::{Deserialize, Serialize};

use crate::config::Normalization;
use crate::error::{Result, ServiceError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Event {
    /// First entry: the configuration the log was written under.
    Initialized {
        attributes: Vec<String>,
        classes: Vec<String>,
        detector: DetectorConfig,
        evolution: EvolutionConfig,
        normalization: Normalization,
        weights: String,
    },
    /// Raw values as received.
    RecordIngested { record: Record64 },
    EpochStarted { epoch: usize, records: Vec<String> },
    Flagged {
        epoch: usize,
        record_id: String,
        suggested: String,
        scores: Vec<f64>,
    },
    Verdict { record_id: String, class: String, at: i64 },
    MissedReport { record_id: String, class: String, at: i64 },
    VerificationTimeout { epoch: usize },
    /// Detector state after the update of `epoch`.
    WeightsSnapshot { epoch: usize, weights: String },
    EpochReport { report: EpochReport },
}

impl Event {
    /// Inputs drive the state machine; every other event is derived from
    /// them and only checked on replay.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Event::RecordIngested { .. } | Event::Verdict { .. } | Event::MissedReport { .. } | Event::VerificationTimeout { .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    out: BufWriter<File>,
    next_seq: u64,
    fsync: bool,
}

impl EventLog {
    /// Opens (creating if needed) and reads back every entry. A torn final
    /// line, left by a crash mid-write, is cut off.
    pub fn open(path: impl AsRef<Path>, fsync: bool) -> Result<(Self, Vec<Entry>)> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut entries = Vec::new();
        let mut good_len = 0u64;
        if path.exists() {
            let mut reader = BufReader::new(File::open(&path)?);
            let mut line = String::new();
            let mut number = 0;
            loop {
                line.clear();
                let read = reader.read_line(&mut line)?;
                if read == 0 {
                    break;
                }
                number += 1;
                if !line.ends_with('\n') {
                    tracing::warn!(line = number, "dropping torn final event log line");
                    break;
                }
                let entry: Entry = serde_json::from_str(line.trim_end()).map_err(|e| ServiceError::Log {
                    line: number,
                    message: e.to_string(),
                })?;
                let expected = entries.len() as u64 + 1;
                if entry.seq != expected {
                    return Err(ServiceError::Log {
                        line: number,
                        message: format!("sequence {} where {expected} was expected", entry.seq),
                    });
                }
                good_len += read as u64;
                entries.push(entry);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        if file.metadata()?.len() != good_len {
            file.set_len(good_len)?;
        }
        let next_seq = entries.len() as u64 + 1;
        Ok((
            Self {
                path,
                out: BufWriter::new(file),
                next_seq,
                fsync,
            },
            entries,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Buffers one entry; call [`Self::commit`] to make it durable.
    pub fn append(&mut self, event: Event) -> Result<u64> {
        let seq = self.next_seq;
        let entry = Entry { seq, event };
        let line = serde_json::to_string(&entry).map_err(|e| ServiceError::Log {
            line: seq as usize,
            message: e.to_string(),
        })?;
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.next_seq += 1;
        Ok(seq)
    }

    pub fn commit(&mut self) -> Result<()> {
        self.out.flush()?;
        if self.fsync {
            self.out.get_ref().sync_data()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(id: &str) -> Event {
        Event::RecordIngested {
            record: Record64::new(id, vec![0.1, 1.0 / 3.0]),
        }
    }

    #[test]
    fn append_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log/events.jsonl");
        {
            let (mut log, entries) = EventLog::open(&path, false).unwrap();
            assert!(entries.is_empty());
            assert_eq!(log.append(ingest("a")).unwrap(), 1);
            assert_eq!(log.append(Event::VerificationTimeout { epoch: 0 }).unwrap(), 2);
            log.commit().unwrap();
        }
        let (log, entries) = EventLog::open(&path, false).unwrap();
        assert_eq!(log.next_seq(), 3);
        assert_eq!(entries[0].event, ingest("a"));
        assert_eq!(entries[1].seq, 2);
    }

    #[test]
    fn line_layout_is_flat() {
        let line = serde_json::to_string(&Entry {
            seq: 7,
            event: Event::VerificationTimeout { epoch: 2 },
        })
        .unwrap();
        assert_eq!(line, r#"{"seq":7,"type":"verification-timeout","epoch":2}"#);
    }

    #[test]
    fn torn_tail_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        {
            let (mut log, _) = EventLog::open(&path, false).unwrap();
            log.append(ingest("a")).unwrap();
            log.commit().unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"seq":2,"type":"rec"#).unwrap();
        drop(f);
        let (mut log, entries) = EventLog::open(&path, false).unwrap();
        assert_eq!(entries.len(), 1);
        log.append(ingest("b")).unwrap();
        log.commit().unwrap();
        let (_, entries) = EventLog::open(&path, false).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[1].event, ingest("b"));
    }

    #[test]
    fn sequence_gaps_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        std::fs::write(
            &path,
            "{\"seq\":1,\"type\":\"verification-timeout\",\"epoch\":0}\n{\"seq\":3,\"type\":\"verification-timeout\",\"epoch\":1}\n",
        )
        .unwrap();
        let err = EventLog::open(&path, false).unwrap_err();
        assert!(matches!(err, ServiceError::Log { line: 2, .. }), "{err}");
    }
}
