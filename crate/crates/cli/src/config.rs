use std::path::{Path, PathBuf};

use evolad_core::data::SynthConfig;
use evolad_core::experiment::{NormMode, ReplayConfig};
use evolad_core::imbalance::SmoteConfig;
use evolad_core::{ClassSet, ModelKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Which settings the ablation grid tries on each axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationGrid {
    pub smote: Vec<bool>,
    pub biased_init: Vec<bool>,
    pub self_evolving: Vec<bool>,
}

impl Default for AblationGrid {
    fn default() -> Self {
        Self {
            smote: vec![false, true],
            biased_init: vec![false, true],
            self_evolving: vec![false, true],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
    pub top_k: usize,
    /// Rebalance the sweep data with the replay's SMOTE settings first.
    pub smote: bool,
    /// Records generated for a synthetic sweep.
    pub records: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            lambdas: vec![0.01, 0.1, 1.0, 10.0],
            top_k: 10,
            smote: false,
            records: 300,
        }
    }
}

/// Everything a batch command needs. The `seed` (or each of `seeds` for
/// `ablate`) replaces every per-component seed inside `replay` and
/// `synth`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub seeds: Vec<u64>,
    /// Final metrics are means over this many last epochs.
    pub tail: usize,
    /// Labeled CSV; a synthetic stream from `synth` when absent.
    pub input: Option<PathBuf>,
    /// Class names for CSV input, normal first.
    pub classes: ClassSet,
    pub replay: ReplayConfig,
    pub synth: SynthConfig,
    pub ablation: AblationGrid,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            seeds: (0..20).collect(),
            tail: 5,
            input: None,
            classes: ClassSet::default(),
            replay: ReplayConfig::default(),
            synth: SynthConfig::default(),
            ablation: AblationGrid::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Class set of the data the run will see.
    pub fn data_classes(&self) -> &ClassSet {
        if self.input.is_some() {
            &self.classes
        } else {
            &self.synth.classes
        }
    }
}

/// Command-line values laid over the config file; `None` keeps the file's.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// Labeled CSV input instead of a synthetic stream.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epoch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, action = clap::ArgAction::Set)]
    pub smote: Option<bool>,
    #[arg(long)]
    pub smote_k: Option<usize>,
    #[arg(long)]
    pub smote_ratio: Option<f64>,
    #[arg(long, action = clap::ArgAction::Set)]
    pub biased_init: Option<bool>,
    /// `false` labels every record each epoch (the all-evolving comparator).
    #[arg(long, action = clap::ArgAction::Set)]
    pub self_evolving: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma list or half-open range, e.g. `0,3,7` or `0..20`.
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: Option<Seeds>,
    #[arg(long)]
    pub missed_rate: Option<f64>,
    /// Probability that the oracle labeler answers with a wrong class.
    #[arg(long)]
    pub labeler_noise: Option<f64>,
    #[arg(long, value_parser = parse_norm)]
    pub normalization: Option<NormMode>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let r = &mut cfg.replay;
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = self.model {
            r.detector.model = v;
        }
        if let Some(v) = self.lambda {
            r.detector.lambda = v;
        }
        if let Some(v) = self.alpha {
            r.detector.alpha = v;
        }
        if let Some(v) = self.epoch_size {
            r.evolution.epoch_size = v;
        }
        if let Some(v) = self.epochs {
            r.epochs = v;
        }
        match self.smote {
            Some(false) => r.evolution.smote = None,
            Some(true) if r.evolution.smote.is_none() => r.evolution.smote = Some(SmoteConfig::default()),
            _ => {}
        }
        if let Some(s) = r.evolution.smote.as_mut() {
            if let Some(k) = self.smote_k {
                s.k_neighbors = k;
            }
            if let Some(v) = self.smote_ratio {
                s.amount_ratio = v;
            }
        }
        if let Some(v) = self.biased_init {
            r.detector.biased_init = v;
        }
        if let Some(v) = self.self_evolving {
            r.evolution.all_evolving = !v;
        }
        if let Some(v) = self.missed_rate {
            r.missed_report_rate = v;
        }
        if let Some(v) = self.labeler_noise {
            r.labeler_noise = v;
        }
        if let Some(v) = self.normalization {
            r.normalization = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.seeds {
            cfg.seeds = v.0.clone();
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Seeds(pub Vec<u64>);

fn parse_seeds(s: &str) -> std::result::Result<Seeds, String> {
    parse_seed_list(s).map(Seeds)
}

fn parse_seed_list(s: &str) -> std::result::Result<Vec<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("range end: {e}"))?;
        if a >= b {
            return Err(format!("empty seed range {s}"));
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|e| format!("seed `{p}`: {e}")))
        .collect()
}

fn parse_norm(s: &str) -> std::result::Result<NormMode, String> {
    match s {
        "auto" => Ok(NormMode::Auto),
        "frozen" => Ok(NormMode::Frozen),
        "per-epoch" => Ok(NormMode::PerEpoch),
        "off" => Ok(NormMode::Off),
        other => Err(format!("expected auto, frozen, per-epoch or off, got `{other}`")),
    }
}
