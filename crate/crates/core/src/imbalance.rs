//! SMOTE oversampling of rare anomaly classes.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Batch, ClassLabel, Record};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Synthetic records per original minority record.
    pub amount_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            amount_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SmoteConfig {
    fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::Config("SMOTE needs k_neighbors >= 1".into()));
        }
        if !(self.amount_ratio > 0.0 && self.amount_ratio.is_finite()) {
            return Err(Error::Config(format!(
                "SMOTE amount_ratio must be positive, got {}",
                self.amount_ratio
            )));
        }
        Ok(())
    }

    /// Same settings with a seed derived from `salt`, so that each epoch or
    /// class draws an independent stream.
    pub fn reseeded(&self, salt: u64) -> Self {
        Self {
            seed: splitmix(self.seed ^ splitmix(salt)),
            ..self.clone()
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sq_dist<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

/// Synthesizes `⌊amount_ratio · n⌋` records from one class. Seeds cycle
/// through the originals; each synthetic point is `seed + g·(nb − seed)`
/// with `g ~ U[0,1]` and `nb` drawn from the seed's `k` nearest same-class
/// neighbours.
pub fn smote_class<F: Scalar>(records: &[Record<F>], cfg: &SmoteConfig) -> Result<Vec<Record<F>>> {
    cfg.validate()?;
    let n = records.len();
    if n < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: n });
    }
    let k = cfg.k_neighbors.min(n - 1);
    let neighbors: Vec<Vec<usize>> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut others: Vec<(F, usize)> = records
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, o)| (sq_dist(&r.values, &o.values), j))
                .collect();
            others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let count = (cfg.amount_ratio * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(count);
    for s in 0..count {
        let seed = &records[s % n];
        let nb = &records[neighbors[s % n][rng.random_range(0..k)]];
        let gap = F::lit(rng.random::<f64>());
        let values = seed
            .values
            .iter()
            .zip(&nb.values)
            .map(|(&a, &b)| (a + gap * (b - a)).max(F::zero()).min(F::one()))
            .collect();
        out.push(Record {
            id: format!("{}~smote{}", seed.id, s),
            values,
            timestamp: seed.timestamp,
            synthetic: true,
            out_of_range: false,
        });
    }
    Ok(out)
}

/// Oversamples every anomaly class with at least two members. Originals are
/// kept in order; synthetic records are appended by class index. Classes too
/// small to interpolate are passed through and reported as warnings.
pub fn rebalance_epoch<F: Scalar>(batch: &Batch<F>, cfg: &SmoteConfig) -> Result<(Batch<F>, Vec<String>)> {
    let labels = batch.labels().ok_or(Error::Empty("labels to rebalance"))?;
    let mut by_class: BTreeMap<usize, (ClassLabel, Vec<Record<F>>)> = BTreeMap::new();
    for (r, l) in batch.records().iter().zip(labels) {
        if !l.is_normal() && !r.synthetic {
            by_class
                .entry(l.index)
                .or_insert_with(|| (l.clone(), Vec::new()))
                .1
                .push(r.clone());
        }
    }
    let mut records = batch.records().to_vec();
    let mut out_labels = labels.to_vec();
    let mut warnings = Vec::new();
    for (index, (label, members)) in by_class {
        if members.len() < 2 {
            warnings.push(format!(
                "class `{}` has {} verified record(s); SMOTE skipped",
                label.name,
                members.len()
            ));
            continue;
        }
        let synthetic = smote_class(&members, &cfg.reseeded(index as u64))?;
        out_labels.extend(std::iter::repeat_n(label, synthetic.len()));
        records.extend(synthetic);
    }
    Ok((Batch::new(records, Some(out_labels))?, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClassSet;

    fn rec(id: &str, v: &[f64]) -> Record<f64> {
        Record::new(id, v.to_vec())
    }

    #[test]
    fn generates_one_per_original_at_ratio_one() {
        let recs: Vec<_> = (0..10).map(|i| rec(&i.to_string(), &[i as f64 / 10.0, 0.5])).collect();
        let out = smote_class(&recs, &SmoteConfig::default()).unwrap();
        assert_eq!(out.len(), 10);
        assert!(out.iter().all(|r| r.synthetic));
    }

    #[test]
    fn two_point_class_interpolates_on_the_segment() {
        let recs = vec![rec("a", &[0.0, 0.0]), rec("b", &[1.0, 1.0])];
        let cfg = SmoteConfig { k_neighbors: 1, amount_ratio: 5.0, seed: 4 };
        let out = smote_class(&recs, &cfg).unwrap();
        assert_eq!(out.len(), 10);
        for r in out {
            assert!((r.values[0] - r.values[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn single_record_class_is_rejected() {
        let err = smote_class(&[rec("a", &[0.2])], &SmoteConfig::default()).unwrap_err();
        assert!(matches!(err, Error::TooFewRecords { needed: 2, got: 1 }));
    }

    fn labeled(counts: &[(usize, usize)]) -> Batch<f64> {
        let cs = ClassSet::default();
        let mut recs = Vec::new();
        let mut labels = Vec::new();
        for &(class, n) in counts {
            for i in 0..n {
                let x = (i as f64 * 0.37 + class as f64 * 0.1).fract();
                recs.push(rec(&format!("c{class}-{i}"), &[x, 1.0 - x]));
                labels.push(cs.label(class).unwrap());
            }
        }
        Batch::new(recs, Some(labels)).unwrap()
    }

    #[test]
    fn rebalance_counts() {
        let (b, w) = rebalance_epoch(&labeled(&[(0, 290), (2, 10)]), &SmoteConfig::default()).unwrap();
        let labels = b.labels().unwrap();
        assert_eq!(labels.iter().filter(|l| l.index == 0).count(), 290);
        assert_eq!(labels.iter().filter(|l| l.index == 2).count(), 20);
        assert!(w.is_empty());

        let orig = labeled(&[(0, 30)]);
        let (b, _) = rebalance_epoch(&orig, &SmoteConfig::default()).unwrap();
        assert_eq!(b, orig);

        let orig = labeled(&[(0, 30), (4, 1)]);
        let (b, w) = rebalance_epoch(&orig, &SmoteConfig::default()).unwrap();
        assert_eq!(b, orig);
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("disk"));
    }

    #[test]
    fn originals_are_preserved() {
        let orig = labeled(&[(0, 20), (1, 6), (3, 4)]);
        let (b, _) = rebalance_epoch(&orig, &SmoteConfig::default()).unwrap();
        assert_eq!(&b.records()[..orig.len()], orig.records());
        assert_eq!(b.len(), 40);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn synthetic_points_stay_in_class_bounding_box(
                pts in proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, 3), 2..25),
                k in 1usize..8, ratio in 0.1f64..3.0, seed in any::<u64>(),
            ) {
                let recs: Vec<_> = pts.iter().enumerate().map(|(i, v)| rec(&i.to_string(), v)).collect();
                let cfg = SmoteConfig { k_neighbors: k, amount_ratio: ratio, seed };
                let out = smote_class(&recs, &cfg).unwrap();
                prop_assert_eq!(out.len(), (ratio * recs.len() as f64).floor() as usize);
                for r in &out {
                    for j in 0..3 {
                        let lo = pts.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
                        let hi = pts.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
                        prop_assert!(r.values[j] >= lo - 1e-12 && r.values[j] <= hi + 1e-12);
                    }
                }
                prop_assert_eq!(smote_class(&recs, &cfg).unwrap(), out);
            }
        }
    }
}
