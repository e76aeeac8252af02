use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Cohort, CohortError, Label};

// Absorbs representation error in n * fraction (0.29 * 100 = 28.999...).
const QUOTA_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

    pub fn new(train_fraction: f64, seed: u64) -> Result<Self, CohortError> {
        if train_fraction.is_finite() && train_fraction > 0.0 && train_fraction < 1.0 {
            Ok(Self {
                train_fraction,
                seed,
            })
        } else {
            Err(CohortError::InvalidFraction(train_fraction))
        }
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: Self::DEFAULT_TRAIN_FRACTION,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Per-class train quotas: floor of each class share, then the slots left to reach
/// round(N * fraction) go one per class by descending fractional remainder, ties by
/// class name.
fn train_quotas(class_sizes: &[(Label, usize)], fraction: f64) -> Vec<usize> {
    let total: usize = class_sizes.iter().map(|(_, n)| n).sum();
    let target = (total as f64 * fraction + QUOTA_EPS).round() as usize;

    let mut quotas = Vec::with_capacity(class_sizes.len());
    let mut remainders = Vec::with_capacity(class_sizes.len());
    for (i, (_, n)) in class_sizes.iter().enumerate() {
        let exact = *n as f64 * fraction;
        let floor = (exact + QUOTA_EPS).floor();
        quotas.push(floor as usize);
        remainders.push((i, (exact - floor).max(0.0)));
    }

    // Labels sort by name, so a stable sort on remainder keeps the name tie-break.
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut left = target.saturating_sub(quotas.iter().sum());
    for (i, _) in remainders {
        if left == 0 {
            break;
        }
        if quotas[i] < class_sizes[i].1 {
            quotas[i] += 1;
            left -= 1;
        }
    }
    quotas
}

/// Seeded, label-stratified train/test partition of a cohort's row indices.
pub fn stratified_split(cohort: &Cohort, spec: &SplitSpec) -> Result<SplitResult, CohortError> {
    let n = cohort.len();
    let mut by_class: Vec<(Label, Vec<usize>)> =
        Label::ALL.iter().map(|l| (*l, Vec::new())).collect();
    for (idx, label) in cohort.labels().enumerate() {
        let slot = by_class
            .iter_mut()
            .find(|(l, _)| *l == label)
            .expect("label listed");
        slot.1.push(idx);
    }
    let sizes: Vec<(Label, usize)> = by_class.iter().map(|(l, v)| (*l, v.len())).collect();
    let quotas = train_quotas(&sizes, spec.train_fraction);

    let train_total: usize = quotas.iter().sum();
    if n < 2 || train_total == 0 || train_total == n {
        return Err(CohortError::Split {
            n,
            train: train_total,
            test: n - train_total,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(train_total);
    let mut test = Vec::with_capacity(n - train_total);
    for ((_, mut members), quota) in by_class.into_iter().zip(quotas) {
        members.shuffle(&mut rng);
        let (tr, te) = members.split_at(quota);
        train.extend_from_slice(tr);
        test.extend_from_slice(te);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitResult {
        train_indices: train,
        test_indices: test,
    })
}
