//! CSV ingestion, min–max normalization and synthetic fault streams.
//!
//! CSV layout: a header of attribute names, an optional `id` column and an
//! optional trailing `label` column holding class names. Rows are numbered
//! from 1 (the first data row) in ids and error messages.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Batch, ClassLabel, ClassSet, Record};
use crate::scalar::Scalar;

pub const LABEL_COLUMN: &str = "label";
pub const ID_COLUMN: &str = "id";

/// A parsed CSV: attribute names plus the batch (labeled when the file had
/// a `label` column).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<F> {
    pub attributes: Vec<String>,
    pub batch: Batch<F>,
}

pub fn load_csv<F: Scalar>(path: impl AsRef<Path>, classes: &ClassSet) -> Result<Dataset<F>> {
    read_csv(File::open(path)?, classes)
}

pub fn read_csv<F: Scalar, R: Read>(input: R, classes: &ClassSet) -> Result<Dataset<F>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv { row: 0, message: e.to_string() })?
        .iter()
        .map(str::to_owned)
        .collect();
    let id_col = header.iter().position(|h| h == ID_COLUMN);
    let label_col = header.iter().position(|h| h == LABEL_COLUMN);
    let attr_cols: Vec<usize> = (0..header.len())
        .filter(|&i| Some(i) != id_col && Some(i) != label_col)
        .collect();
    if attr_cols.is_empty() {
        return Err(Error::Csv { row: 0, message: "header names no attribute columns".into() });
    }
    let attributes = attr_cols.iter().map(|&i| header[i].clone()).collect();

    let mut records = Vec::new();
    let mut labels = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row_no = n + 1;
        let row = row.map_err(|e| Error::Csv { row: row_no, message: e.to_string() })?;
        if row.len() != header.len() {
            return Err(Error::Csv {
                row: row_no,
                message: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        let values = attr_cols
            .iter()
            .map(|&i| {
                let cell = &row[i];
                cell.parse::<F>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Csv {
                        row: row_no,
                        message: format!("column `{}`: `{cell}` is not a finite number", header[i]),
                    })
            })
            .collect::<Result<Vec<F>>>()?;
        let id = id_col.map_or_else(|| row_no.to_string(), |i| row[i].to_owned());
        records.push(Record::new(id, values));
        if let Some(i) = label_col {
            let label = classes.by_name(&row[i]).map_err(|_| Error::Csv {
                row: row_no,
                message: format!("unknown label `{}`", &row[i]),
            })?;
            labels.push(label);
        }
    }
    Ok(Dataset {
        attributes,
        batch: Batch::new(records, label_col.map(|_| labels))?,
    })
}

/// Writes `id,<attributes...>[,label]`.
pub fn write_csv<F: Scalar, W: Write>(out: W, attributes: &[String], batch: &Batch<F>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv { row: 0, message: e.to_string() };
    let mut header = vec![ID_COLUMN.to_owned()];
    header.extend(attributes.iter().cloned());
    if batch.labels().is_some() {
        header.push(LABEL_COLUMN.into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, r) in batch.records().iter().enumerate() {
        let mut row = vec![r.id.clone()];
        row.extend(r.values.iter().map(|v| v.to_string()));
        if let Some(l) = batch.labels() {
            row.push(l[i].name.clone());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-attribute `(min, max)` captured from a reference batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct NormStats<F> {
    pub ranges: Vec<(F, F)>,
}

pub fn fit_norm<F: Scalar>(records: &[Record<F>]) -> Result<NormStats<F>> {
    let first = records.first().ok_or(Error::Empty("records to fit normalization"))?;
    let mut ranges: Vec<(F, F)> = first.values.iter().map(|&v| (v, v)).collect();
    for r in records {
        if r.dim() != ranges.len() {
            return Err(Error::shape("record attributes", ranges.len(), r.dim()));
        }
        for ((lo, hi), &v) in ranges.iter_mut().zip(&r.values) {
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
    }
    Ok(NormStats { ranges })
}

impl<F: Scalar> NormStats<F> {
    /// `(v − min)/(max − min)`, clamped to `[0,1]`; constant attributes map
    /// to 0. Clamping sets the record's `out_of_range` flag.
    pub fn apply(&self, record: &Record<F>) -> Result<Record<F>> {
        if record.dim() != self.ranges.len() {
            return Err(Error::shape("record attributes", self.ranges.len(), record.dim()));
        }
        let mut out = record.clone();
        for (v, &(lo, hi)) in out.values.iter_mut().zip(&self.ranges) {
            let span = hi - lo;
            let z = if span > F::zero() { (*v - lo) / span } else { F::zero() };
            if z < F::zero() || z > F::one() {
                out.out_of_range = true;
            }
            *v = z.max(F::zero()).min(F::one());
        }
        Ok(out)
    }

    pub fn apply_all(&self, records: &[Record<F>]) -> Result<Vec<Record<F>>> {
        records.iter().map(|r| self.apply(r)).collect()
    }

    pub fn apply_batch(&self, batch: &Batch<F>) -> Result<Batch<F>> {
        Batch::new(self.apply_all(batch.records())?, batch.labels().map(<[_]>::to_vec))
    }
}

pub fn apply_norm<F: Scalar>(batch: &Batch<F>, stats: &NormStats<F>) -> Result<Batch<F>> {
    stats.apply_batch(batch)
}

/// Attributes shifted by one anomaly class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedSignal {
    pub class: usize,
    pub attributes: Vec<usize>,
    pub shifts: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub attributes: Vec<String>,
    pub classes: ClassSet,
    pub informative: Vec<PlantedSignal>,
    pub anomaly_rate: f64,
    /// Proportions over anomaly classes `1..C`.
    pub class_mix: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// sar-style counter names used for generated attributes.
pub const SAR_ATTRIBUTES: [&str; 20] = [
    "runq-sz", "plist-sz", "ldavg-1", "ldavg-5", "cswch/s", "proc/s", "%usr", "%sys",
    "%iowait", "kbmemused", "kbcached", "kbbuffers", "majflt/s", "pgscank/s", "bufpg/s",
    "tps", "rxpck/s", "txpck/s", "tcpsck", "totsck",
];

impl Default for SynthConfig {
    /// Twenty attributes, four fault types each shifting three counters.
    fn default() -> Self {
        let sig = |class, attributes: [usize; 3]| PlantedSignal {
            class,
            attributes: attributes.to_vec(),
            shifts: vec![0.3; 3],
        };
        Self {
            attributes: SAR_ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
            classes: ClassSet::default(),
            informative: vec![
                sig(1, [9, 10, 12]),  // memory
                sig(2, [0, 2, 6]),    // cpu
                sig(3, [16, 17, 18]), // network
                sig(4, [8, 14, 15]),  // disk
            ],
            anomaly_rate: 0.1,
            class_mix: vec![0.25; 4],
            noise_sigma: 0.08,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// `d` generic attributes `attr0..`, the first `planted` of which are
    /// all shifted by `shift` for every anomaly class.
    pub fn planted(d: usize, planted: usize, shift: f64, classes: ClassSet) -> Self {
        let anomaly_classes = classes.len() - 1;
        Self {
            attributes: (0..d).map(|i| format!("attr{i}")).collect(),
            informative: (1..classes.len())
                .map(|class| PlantedSignal {
                    class,
                    attributes: (0..planted).collect(),
                    shifts: vec![shift; planted],
                })
                .collect(),
            class_mix: vec![1.0 / anomaly_classes as f64; anomaly_classes],
            classes,
            ..Self::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.attributes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.attributes.is_empty() {
            return bad("synthetic stream needs at least one attribute".into());
        }
        if !(0.0..1.0).contains(&self.anomaly_rate) {
            return bad(format!("anomaly_rate must be in [0,1), got {}", self.anomaly_rate));
        }
        if self.class_mix.len() != self.classes.len() - 1 {
            return bad(format!(
                "class_mix needs {} proportions, got {}",
                self.classes.len() - 1,
                self.class_mix.len()
            ));
        }
        let total: f64 = self.class_mix.iter().sum();
        if self.class_mix.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return bad(format!("class_mix must be non-negative and sum to 1, sums to {total}"));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be positive".into());
        }
        for s in &self.informative {
            if s.class == 0 || s.class >= self.classes.len() {
                return bad(format!("planted signal for invalid anomaly class {}", s.class));
            }
            if s.attributes.len() != s.shifts.len() {
                return bad("planted signal needs one shift per attribute".into());
            }
            if let Some(&a) = s.attributes.iter().find(|&&a| a >= self.dim()) {
                return bad(format!("planted attribute {a} out of range for d = {}", self.dim()));
            }
        }
        Ok(())
    }
}

/// One epoch of generated records with ground truth held alongside.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthBatch<F> {
    pub records: Vec<Record<F>>,
    pub truth: Vec<ClassLabel>,
}

impl<F: Scalar> TruthBatch<F> {
    pub fn labeled(&self) -> Result<Batch<F>> {
        Batch::new(self.records.clone(), Some(self.truth.clone()))
    }

    /// Splits a labeled batch into consecutive epochs of `epoch_size`
    /// records; a trailing partial epoch is dropped.
    pub fn epochs_of(batch: &Batch<F>, epoch_size: usize) -> Result<Vec<TruthBatch<F>>> {
        let labels = batch.labels().ok_or(Error::Empty("labels for replay"))?;
        if epoch_size == 0 {
            return Err(Error::Config("epoch_size must be positive".into()));
        }
        Ok(batch
            .records()
            .chunks_exact(epoch_size)
            .zip(labels.chunks_exact(epoch_size))
            .map(|(r, l)| TruthBatch {
                records: r.to_vec(),
                truth: l.to_vec(),
            })
            .collect())
    }
}

/// Records drawn as `N(0.5, σ²)` per attribute, clamped to `[0,1]`;
/// anomalies add their class's planted shifts before clamping.
pub fn synth_stream<F: Scalar>(cfg: &SynthConfig, epochs: usize, epoch_size: usize) -> Result<Vec<TruthBatch<F>>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.5, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let d = cfg.dim();
    let mut out = Vec::with_capacity(epochs);
    for e in 0..epochs {
        let mut records = Vec::with_capacity(epoch_size);
        let mut truth = Vec::with_capacity(epoch_size);
        for i in 0..epoch_size {
            let mut values: Vec<f64> = (0..d).map(|_| noise.sample(&mut rng)).collect();
            let class = if rng.random::<f64>() < cfg.anomaly_rate {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = cfg.class_mix.len();
                for (k, &p) in cfg.class_mix.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = k + 1;
                        break;
                    }
                }
                // rounding can leave u above the final cumulative sum
                pick.min(cfg.class_mix.len())
            } else {
                0
            };
            for s in cfg.informative.iter().filter(|s| s.class == class) {
                for (&a, &shift) in s.attributes.iter().zip(&s.shifts) {
                    values[a] += shift;
                }
            }
            let values = values.into_iter().map(|v| F::lit(v.clamp(0.0, 1.0))).collect();
            records.push(Record::new(format!("e{e}-r{i}"), values));
            truth.push(cfg.classes.label(class)?);
        }
        out.push(TruthBatch { records, truth });
    }
    Ok(out)
}
