use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use evolad_core::data::{fit_norm, load_csv, synth_stream, write_csv, Dataset, TruthBatch};
use evolad_core::evolution::labeled_fraction;
use evolad_core::experiment::{
    ablate, ablate_on, macro_metrics, replay, replay_synthetic, seeded, AblationConfig, AblationRow,
    NormMode, ReplayRun,
};
use evolad_core::features::{coefficient_of_variation, lambda_sweep, RankedAttribute, SweepConfig};
use evolad_core::metrics::MetricSet;
use evolad_core::{Batch, ClassSet};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

const LOCK: &str = ".evolad.lock";

/// Output directory held for the duration of one run.
pub struct RunDir {
    root: PathBuf,
    written: Vec<String>,
}

impl RunDir {
    pub fn open(root: &Path) -> Result<Self> {
        let io = |source| CliError::Write { path: root.to_path_buf(), source };
        fs::create_dir_all(root).map_err(io)?;
        let lock = root.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => return Err(CliError::Busy(lock)),
            Err(e) => return Err(CliError::Write { path: lock, source: e }),
        }
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| CliError::Write { path: parent.to_path_buf(), source })?;
        }
        fs::write(&path, contents).map_err(|source| CliError::Write { path, source })?;
        self.written.push(rel.to_owned());
        Ok(())
    }

    pub fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
        text.push('\n');
        self.write(rel, text)
    }

    /// Removes a subdirectory left by an earlier run.
    fn clear(&self, rel: &str) -> Result<()> {
        let path = self.root.join(rel);
        match fs::remove_dir_all(&path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(CliError::Write { path, source: e }),
            _ => Ok(()),
        }
    }

    fn done(&self) -> Value {
        json!({ "out": self.root, "files": self.written })
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK));
    }
}

#[derive(Debug, Serialize)]
struct InputInfo {
    path: PathBuf,
    bytes: u64,
    records: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seeds: &'a [u64],
    input: Option<&'a InputInfo>,
    config: &'a RunConfig,
}

fn manifest(dir: &mut RunDir, command: &str, seeds: &[u64], input: Option<&InputInfo>, config: &RunConfig) -> Result<()> {
    dir.write_json(
        "manifest.json",
        &Manifest {
            tool: "evolad",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seeds,
            input,
            config,
        },
    )
}

fn load_labeled(path: &Path, classes: &ClassSet) -> Result<(Dataset<f64>, InputInfo)> {
    let ds = load_csv::<f64>(path, classes)?;
    if ds.batch.labels().is_none() {
        return Err(CliError::UnlabeledInput(path.to_path_buf()));
    }
    let bytes = File::open(path).and_then(|f| f.metadata()).map(|m| m.len()).map_err(evolad_core::Error::from)?;
    let info = InputInfo {
        path: path.to_path_buf(),
        bytes,
        records: ds.batch.len(),
    };
    Ok((ds, info))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = values.into_iter().flatten().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub epochs: usize,
    /// Epochs averaged below.
    pub tail: usize,
    /// Macro averages over all classes.
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    /// Anomaly-vs-normal, anomaly positive.
    pub anomaly_sensitivity: Option<f64>,
    pub anomaly_specificity: Option<f64>,
    pub auc: Option<f64>,
    pub labeled_fraction: f64,
    pub labeled_fraction_tail: f64,
    pub top_attributes: Vec<RankedAttribute>,
}

fn summarize(run: &ReplayRun, tail: usize) -> Result<Summary> {
    let m = |f: fn(&MetricSet) -> Option<f64>| run.tail_mean(tail, |r| macro_metrics(r).and_then(f));
    let a = |f: fn(&MetricSet) -> Option<f64>| {
        run.tail_mean(tail, |r| r.evaluation.as_ref().and_then(|e| f(&e.anomaly_metrics)))
    };
    Ok(Summary {
        epochs: run.reports.len(),
        tail,
        sensitivity: m(|s| s.sensitivity),
        specificity: m(|s| s.specificity),
        accuracy: m(|s| s.accuracy),
        f1: m(|s| s.f1),
        anomaly_sensitivity: a(|s| s.sensitivity),
        anomaly_specificity: a(|s| s.specificity),
        auc: run.tail_mean(tail, |r| r.evaluation.as_ref().and_then(|e| e.auc)),
        labeled_fraction: run.reports.last().map_or(0.0, |r| r.labeled_fraction_cumulative),
        labeled_fraction_tail: labeled_fraction(&run.reports, tail)?,
        top_attributes: run.ranking.top(10).to_vec(),
    })
}

fn metrics_csv(run: &ReplayRun) -> String {
    let mut out = String::from(
        "epoch,n,flagged,missed_reports,sensitivity,specificity,accuracy,f1,\
         anomaly_sensitivity,anomaly_specificity,auc,labeled_fraction_epoch,labeled_fraction_cumulative\n",
    );
    for r in &run.reports {
        let m = macro_metrics(r).copied().unwrap_or_default();
        let e = r.evaluation.as_ref();
        let a = e.map(|e| e.anomaly_metrics).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.n,
            r.flagged,
            r.missed_reports,
            opt(m.sensitivity),
            opt(m.specificity),
            opt(m.accuracy),
            opt(m.f1),
            opt(a.sensitivity),
            opt(a.specificity),
            opt(e.and_then(|e| e.auc)),
            r.labeled_fraction_epoch,
            r.labeled_fraction_cumulative
        );
    }
    out
}

/// Runs the loop with an oracle labeler and writes the run directory.
pub fn run_replay(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let mut dir = RunDir::open(out)?;
    let (replay_cfg, synth) = seeded(&cfg.replay, &cfg.synth, cfg.seed);
    let resolved = RunConfig {
        replay: replay_cfg.clone(),
        synth: synth.clone(),
        ..cfg.clone()
    };
    let (run, input) = match &cfg.input {
        Some(path) => {
            let (ds, info) = load_labeled(path, &cfg.classes)?;
            let stream = TruthBatch::epochs_of(&ds.batch, replay_cfg.evolution.epoch_size)?;
            (replay(&replay_cfg, &stream, &ds.attributes, &cfg.classes)?, Some(info))
        }
        None => (replay_synthetic::<f64>(&replay_cfg, &synth)?, None),
    };

    manifest(&mut dir, "replay", &[cfg.seed], input.as_ref(), &resolved)?;
    let mut lines = String::new();
    for r in &run.reports {
        lines.push_str(&serde_json::to_string(r).expect("plain data serializes"));
        lines.push('\n');
    }
    dir.write("epochs.jsonl", lines)?;
    dir.write("metrics.csv", metrics_csv(&run))?;
    dir.clear("roc")?;
    let mut auc = String::from("epoch,auc\n");
    for (e, roc) in run.rocs.iter().enumerate() {
        if let Some(roc) = roc {
            dir.write(&format!("roc/epoch_{e:02}.csv"), roc.to_csv())?;
        }
        let _ = writeln!(auc, "{e},{}", opt(roc.as_ref().map(|r| r.auc())));
    }
    dir.write("auc.csv", auc)?;
    dir.write("weights.txt", &run.final_weights)?;
    dir.write("ranking.csv", run.ranking.to_csv())?;
    let summary = summarize(&run, cfg.tail)?;
    dir.write_json("summary.json", &summary)?;
    Ok(json!({ "summary": summary, "run": dir.done() }))
}

/// Mean of each toggle combination over the seeds, in grid order.
fn ablation_matrix(rows: &[AblationRow]) -> String {
    let mut cells: Vec<((bool, bool, bool), Vec<&AblationRow>)> = Vec::new();
    for r in rows {
        let key = (r.smote, r.biased_init, r.self_evolving);
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rs)) => rs.push(r),
            None => cells.push((key, vec![r])),
        }
    }
    let mut out = String::from(
        "smote,biased_init,self_evolving,seeds,failed,sensitivity,specificity,accuracy,f1,labeled_fraction\n",
    );
    for ((smote, biased, evolving), rs) in &cells {
        let col = |f: fn(&AblationRow) -> Option<f64>| opt(mean(rs.iter().map(|r| f(r))));
        let _ = writeln!(
            out,
            "{smote},{biased},{evolving},{},{},{},{},{},{},{}",
            rs.len(),
            rs.iter().filter(|r| r.error.is_some()).count(),
            col(|r| r.sensitivity),
            col(|r| r.specificity),
            col(|r| r.accuracy),
            col(|r| r.f1),
            col(|r| r.labeled_fraction)
        );
    }
    out
}

/// One replay per seed and toggle combination.
pub fn run_ablate(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let mut dir = RunDir::open(out)?;
    let grid = AblationConfig {
        base: cfg.replay.clone(),
        synth: cfg.synth.clone(),
        seeds: cfg.seeds.clone(),
        tail: cfg.tail,
        smote: cfg.ablation.smote.clone(),
        biased_init: cfg.ablation.biased_init.clone(),
        self_evolving: cfg.ablation.self_evolving.clone(),
    };
    let (rows, input) = match &cfg.input {
        Some(path) => {
            let (ds, info) = load_labeled(path, &cfg.classes)?;
            let grid = AblationConfig {
                synth: evolad_core::data::SynthConfig {
                    attributes: ds.attributes.clone(),
                    classes: cfg.classes.clone(),
                    ..cfg.synth.clone()
                },
                ..grid
            };
            let rows = ablate_on(&grid, |_, base| TruthBatch::epochs_of(&ds.batch, base.evolution.epoch_size))?;
            (rows, Some(info))
        }
        None => (ablate::<f64>(&grid)?, None),
    };
    manifest(&mut dir, "ablate", &cfg.seeds, input.as_ref(), cfg)?;
    let mut csv = format!("{}\n", AblationRow::CSV_HEADER);
    for r in &rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    dir.write("ablation.csv", csv)?;
    dir.write("ablation_matrix.csv", ablation_matrix(&rows))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    Ok(json!({ "cells": rows.len(), "failed": failed, "run": dir.done() }))
}

/// Ranks attributes at every λ of `cfg.sweep`.
pub fn run_sweep(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let mut dir = RunDir::open(out)?;
    let (replay_cfg, synth) = seeded(&cfg.replay, &cfg.synth, cfg.seed);
    let resolved = RunConfig {
        replay: replay_cfg.clone(),
        synth: synth.clone(),
        ..cfg.clone()
    };
    let (batch, attributes, input) = match &cfg.input {
        Some(path) => {
            let (ds, info) = load_labeled(path, &cfg.classes)?;
            let batch = match replay_cfg.normalization {
                NormMode::Off => ds.batch,
                _ => fit_norm(ds.batch.records())?.apply_batch(&ds.batch)?,
            };
            (batch, ds.attributes, Some(info))
        }
        None => {
            let stream = synth_stream::<f64>(&synth, 1, cfg.sweep.records)?;
            (stream[0].labeled()?, synth.attributes.clone(), None)
        }
    };
    let sweep = SweepConfig {
        lambdas: cfg.sweep.lambdas.clone(),
        top_k: cfg.sweep.top_k,
        detector: replay_cfg.detector.clone(),
        smote: cfg
            .sweep
            .smote
            .then(|| replay_cfg.evolution.smote.clone().unwrap_or_default()),
    };
    let table = lambda_sweep(&batch, &attributes, cfg.data_classes(), &sweep)?;

    manifest(&mut dir, "sweep", &[cfg.seed], input.as_ref(), &resolved)?;
    dir.write("sweep.csv", table.to_csv())?;
    dir.write_json("sweep.json", &table)?;
    let mut summary = String::from("lambda,near_zero_weights,cv_top_k,error\n");
    for c in &table.cells {
        let (zeros, cv) = c.ranking.as_ref().map_or((String::new(), None), |r| {
            let zeros = r.entries.iter().filter(|e| e.importance < 1e-3).count();
            let top: Vec<f64> = r.top(table.top_k).iter().map(|e| e.importance).collect();
            (zeros.to_string(), coefficient_of_variation(&top))
        });
        let err = c.error.as_deref().map(|e| format!("\"{}\"", e.replace('"', "\"\""))).unwrap_or_default();
        let _ = writeln!(summary, "{},{zeros},{},{err}", c.lambda, opt(cv));
    }
    dir.write("sweep_summary.csv", summary)?;
    Ok(json!({ "lambdas": table.cells.len(), "run": dir.done() }))
}

/// Writes a labeled synthetic stream as CSV.
pub fn run_synth_gen(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let mut dir = RunDir::open(out)?;
    let (replay_cfg, synth) = seeded(&cfg.replay, &cfg.synth, cfg.seed);
    let resolved = RunConfig {
        replay: replay_cfg.clone(),
        synth: synth.clone(),
        ..cfg.clone()
    };
    let stream = synth_stream::<f64>(&synth, replay_cfg.epochs, replay_cfg.evolution.epoch_size)?;
    let (records, truth): (Vec<_>, Vec<_>) = stream
        .into_iter()
        .flat_map(|b| b.records.into_iter().zip(b.truth))
        .unzip();
    let batch = Batch::new(records, Some(truth))?;
    let mut csv = Vec::new();
    write_csv(&mut csv, &synth.attributes, &batch)?;
    manifest(&mut dir, "synth-gen", &[cfg.seed], None, &resolved)?;
    dir.write("stream.csv", csv)?;
    Ok(json!({ "records": batch.len(), "run": dir.done() }))
}
