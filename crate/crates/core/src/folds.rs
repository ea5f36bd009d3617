//! Arm-stratified fold plans and subsampling.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Partition of rows into folds. Serializes as the seed plus a flat array of
/// per-row fold indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub fold_count: usize,
    pub seed: u64,
    pub assignment: Vec<u32>,
}

impl FoldPlan {
    /// Indices of the rows in fold `k`, ascending.
    pub fn test_rows(&self, k: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f as usize == k)
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of the rows outside fold `k`, ascending.
    pub fn train_rows(&self, k: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f as usize != k)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.fold_count];
        for &f in &self.assignment {
            out[f as usize] += 1;
        }
        out
    }
}

/// Stratified `fold_count`-fold plan over all rows of `d`.
pub fn make_folds(d: &Dataset, fold_count: usize, seed: u64) -> Result<FoldPlan> {
    let assignment = stratified_assignment(d.treatments(), d.arm_count(), fold_count, seed)?;
    Ok(FoldPlan {
        fold_count,
        seed,
        assignment,
    })
}

/// Fold index for each element of `arms`. Within every arm the elements are
/// shuffled and dealt round-robin, starting where the previous arm stopped,
/// so every (fold, arm) count is within one of proportional and fold sizes
/// differ by at most one.
pub fn stratified_assignment(
    arms: &[u32],
    arm_count: usize,
    fold_count: usize,
    seed: u64,
) -> Result<Vec<u32>> {
    if fold_count < 2 {
        return Err(Error::Config {
            field: "fold_count".into(),
            reason: "must be at least 2".into(),
        });
    }
    let mut by_arm = vec![Vec::new(); arm_count];
    for (i, &a) in arms.iter().enumerate() {
        by_arm[a as usize].push(i);
    }
    for (arm, rows) in by_arm.iter().enumerate() {
        if rows.len() < fold_count {
            return Err(Error::TooFewRows {
                arm,
                rows: rows.len(),
                folds: fold_count,
            });
        }
    }
    let mut out = vec![0u32; arms.len()];
    let mut offset = 0usize;
    for (arm, mut rows) in by_arm.into_iter().enumerate() {
        rows.shuffle(&mut stream_rng(seed, arm as u64));
        for (k, &i) in rows.iter().enumerate() {
            out[i] = ((offset + k) % fold_count) as u32;
        }
        offset = (offset + rows.len()) % fold_count;
    }
    Ok(out)
}

/// Picks `size` of `rows` keeping each arm's share (largest-remainder
/// rounding). Returned indices are ascending.
pub fn stratified_subsample(
    d: &Dataset,
    rows: &[usize],
    size: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if size > rows.len() {
        return Err(Error::SizeTooLarge {
            requested: size,
            available: rows.len(),
        });
    }
    if size == rows.len() {
        return Ok(rows.to_vec());
    }
    let k = d.arm_count();
    let mut by_arm = vec![Vec::new(); k];
    for &i in rows {
        by_arm[d.treatment(i)].push(i);
    }
    let total = rows.len() as f64;
    let exact: Vec<f64> = by_arm
        .iter()
        .map(|r| r.len() as f64 * size as f64 / total)
        .collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut short = size - take.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &a in order.iter().cycle() {
        if short == 0 {
            break;
        }
        if take[a] < by_arm[a].len() {
            take[a] += 1;
            short -= 1;
        }
    }
    let mut out = Vec::with_capacity(size);
    for (arm, mut r) in by_arm.into_iter().enumerate() {
        r.shuffle(&mut stream_rng(seed, arm as u64));
        out.extend_from_slice(&r[..take[arm]]);
    }
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Schema;
    use proptest::prelude::*;

    fn dataset(arms: Vec<u32>, k: usize) -> Dataset {
        let n = arms.len();
        let schema = Schema::new(vec![1], k).unwrap();
        Dataset::from_columns(schema, vec![1.0 / k as f64; k], vec![vec![0; n]], arms, vec![1.0; n])
            .unwrap()
    }

    #[test]
    fn hundred_rows_ten_folds() {
        let arms: Vec<u32> = (0..100).map(|i| (i % 4) as u32).collect();
        let d = dataset(arms, 4);
        let plan = make_folds(&d, 10, 42).unwrap();
        assert_eq!(plan.fold_sizes(), vec![10; 10]);
        for f in 0..10 {
            let mut per_arm = [0; 4];
            for i in plan.test_rows(f) {
                per_arm[d.treatment(i)] += 1;
            }
            assert!(per_arm.iter().all(|&c| c == 2 || c == 3), "{per_arm:?}");
        }
        assert_eq!(plan, make_folds(&d, 10, 42).unwrap());
        assert_ne!(plan, make_folds(&d, 10, 43).unwrap());
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let d = dataset(vec![0, 1, 0, 1], 2);
        assert!(matches!(make_folds(&d, 10, 1), Err(Error::TooFewRows { .. })));
        assert!(make_folds(&d, 1, 1).is_err());
    }

    #[test]
    fn subsample_keeps_arm_shares() {
        let arms: Vec<u32> = (0..1000).map(|i| if i % 10 == 0 { 1 } else { 0 }).collect();
        let d = dataset(arms, 2);
        let rows: Vec<usize> = (0..1000).collect();
        let s = stratified_subsample(&d, &rows, 250, 9).unwrap();
        assert_eq!(s.len(), 250);
        assert_eq!(s.iter().filter(|&&i| d.treatment(i) == 1).count(), 25);
        assert_eq!(stratified_subsample(&d, &rows, 1000, 9).unwrap(), rows);
        assert!(stratified_subsample(&d, &rows, 1001, 9).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(
            counts in prop::collection::vec(5usize..60, 2..5),
            folds in 2usize..6,
            seed in any::<u64>(),
        ) {
            let mut arms = Vec::new();
            for (a, &c) in counts.iter().enumerate() {
                arms.extend(std::iter::repeat_n(a as u32, c));
            }
            prop_assume!(counts.iter().all(|&c| c >= folds));
            let d = dataset(arms, counts.len());
            let plan = make_folds(&d, folds, seed).unwrap();
            let mut seen = vec![0; d.n_rows()];
            for f in 0..folds {
                for i in plan.test_rows(f) {
                    seen[i] += 1;
                }
                for (a, &n_arm) in counts.iter().enumerate() {
                    let c = plan.test_rows(f).iter().filter(|&&i| d.treatment(i) == a).count();
                    prop_assert!((c as f64 - n_arm as f64 / folds as f64).abs() <= 1.0);
                }
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
