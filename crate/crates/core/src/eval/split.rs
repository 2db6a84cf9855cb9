use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIGH_CHL_THRESHOLD: f64 = 5.0;
pub const TEST_FRACTION: f64 = 0.25;
pub const N_FOLDS: usize = 5;

/// `y > threshold` per row.
pub fn label_high_chl(y: &[f64], threshold: f64) -> Vec<bool> {
    y.iter().map(|v| *v > threshold).collect()
}

/// Fraction of values at or below `threshold`: the quantile the threshold sits at.
pub fn realised_quantile(y: &[f64], threshold: f64) -> f64 {
    if y.is_empty() {
        return f64::NAN;
    }
    y.iter().filter(|v| **v <= threshold).count() as f64 / y.len() as f64
}

fn class_rows(labels: &[bool], rows: impl Iterator<Item = usize> + Clone) -> [Vec<usize>; 2] {
    let high = rows.clone().filter(|&r| labels[r]).collect();
    let low = rows.filter(|&r| !labels[r]).collect();
    [high, low]
}

/// Test rows for a stratified holdout. The holdout holds ⌈fraction·n⌉ rows,
/// shared between classes by largest remainder (ties to the high class);
/// each class contributes its first rows after a seeded shuffle. A class
/// with fewer than two rows is pooled with the other one. Returned sorted.
pub fn stratified_split(labels: &[bool], test_fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Domain(format!("test fraction {test_fraction} outside [0, 1)")));
    }
    let n = labels.len();
    let total = (test_fraction * n as f64 - 1e-9).ceil().max(0.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [mut high, mut low] = class_rows(labels, 0..n);
    let mut test = Vec::with_capacity(total);
    if high.len() < 2 || low.len() < 2 {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        test.extend_from_slice(&all[..total]);
    } else {
        high.shuffle(&mut rng);
        low.shuffle(&mut rng);
        let share = |c: usize| c as f64 * total as f64 / n as f64;
        let (qh, ql) = (share(high.len()), share(low.len()));
        let (mut th, mut tl) = (qh.floor() as usize, ql.floor() as usize);
        if th + tl < total {
            if qh - qh.floor() >= ql - ql.floor() {
                th += 1;
            } else {
                tl += 1;
            }
        }
        test.extend_from_slice(&high[..th]);
        test.extend_from_slice(&low[..tl]);
    }
    test.sort_unstable();
    Ok(test)
}

/// Fold index for each entry of `labels`. Each class is shuffled and dealt
/// round-robin, the high class first, with the dealer continuing where the
/// previous class stopped so that both class counts and fold sizes differ
/// by at most one.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > labels.len() {
        return Err(Error::Domain(format!("cannot make {k} folds from {} rows", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for mut class in class_rows(labels, 0..labels.len()) {
        class.shuffle(&mut rng);
        for r in class {
            folds[r] = next;
            next = (next + 1) % k;
        }
    }
    Ok(folds)
}

/// Holdout and fold layout shared by every model evaluated on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub k: usize,
    pub threshold: f64,
    /// Fraction of targets at or below `threshold`.
    pub threshold_quantile: f64,
    pub labels: Vec<bool>,
    pub test_rows: Vec<usize>,
    /// Fold of each row; `None` for test rows.
    pub folds: Vec<Option<usize>>,
}

impl SplitPlan {
    pub fn new(y: &[f64], threshold: f64, test_fraction: f64, k: usize, seed: u64) -> Result<Self> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("targets must be finite".into()));
        }
        let labels = label_high_chl(y, threshold);
        let test_rows = stratified_split(&labels, test_fraction, seed)?;
        let mut folds = vec![None; y.len()];
        let mut is_test = vec![false; y.len()];
        for &r in &test_rows {
            is_test[r] = true;
        }
        let train: Vec<usize> = (0..y.len()).filter(|&r| !is_test[r]).collect();
        let train_labels: Vec<bool> = train.iter().map(|&r| labels[r]).collect();
        let assignment = stratified_kfold(&train_labels, k, seed.wrapping_add(1))?;
        for (&r, f) in train.iter().zip(assignment) {
            folds[r] = Some(f);
        }
        Ok(Self { seed, k, threshold, threshold_quantile: realised_quantile(y, threshold), labels, test_rows, folds })
    }

    /// The default plan: 5 folds, 25% holdout, 5 mg/m³ threshold.
    pub fn standard(y: &[f64], seed: u64) -> Result<Self> {
        Self::new(y, HIGH_CHL_THRESHOLD, TEST_FRACTION, N_FOLDS, seed)
    }

    pub fn n_rows(&self) -> usize {
        self.folds.len()
    }

    pub fn train_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.folds[r].is_some()).collect()
    }

    pub fn fold_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.folds[r] == Some(fold)).collect()
    }

    /// Training rows outside `fold`.
    pub fn fold_train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.folds[r].is_some_and(|f| f != fold)).collect()
    }
}
