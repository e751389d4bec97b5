use std::collections::HashSet;

use rand::seq::SliceRandom;

use super::manifest::DatasetManifest;
use crate::error::{Error, Result};
use crate::label::Label;
use crate::seed::{rng_from, STREAM_SPLIT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let all = [train, val, test];
        if all.iter().any(|f| !(0.0..=1.0).contains(f)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "split fractions {train}/{val}/{test} must lie in [0, 1] and sum to 1"
            )));
        }
        Ok(SplitFractions { train, val, test })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: DatasetManifest,
    pub val: DatasetManifest,
    pub test: DatasetManifest,
}

/// Per-class stratified split. Each class is shuffled independently and
/// `round(n_class * test)` rows go to test, `round(n_class * val)` to validation,
/// the rest to train. Rows keep their manifest order within each part.
pub fn split(manifest: &DatasetManifest, fractions: SplitFractions, seed: u64) -> Result<Split> {
    let fractions = SplitFractions::new(fractions.train, fractions.val, fractions.test)?;
    let mut test_ids = HashSet::new();
    let mut val_ids = HashSet::new();
    for label in Label::ALL {
        let mut members: Vec<usize> = manifest
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect();
        let mut rng = rng_from(seed, &[STREAM_SPLIT, label.index() as u64]);
        members.shuffle(&mut rng);
        let n = members.len();
        let n_test = ((n as f64 * fractions.test).round() as usize).min(n);
        let n_val = ((n as f64 * fractions.val).round() as usize).min(n - n_test);
        test_ids.extend(members[..n_test].iter().copied());
        val_ids.extend(members[n_test..n_test + n_val].iter().copied());
    }
    let mut parts = [Vec::new(), Vec::new(), Vec::new()];
    for (i, row) in manifest.rows.iter().enumerate() {
        let part = if test_ids.contains(&i) {
            2
        } else if val_ids.contains(&i) {
            1
        } else {
            0
        };
        parts[part].push(row.clone());
    }
    let [train, val, test] = parts;
    Ok(Split {
        train: DatasetManifest { rows: train },
        val: DatasetManifest { rows: val },
        test: DatasetManifest { rows: test },
    })
}
