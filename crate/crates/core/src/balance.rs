//! Covariate balance across arms.

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_BALANCE_THRESHOLD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceCell {
    pub feature: usize,
    pub arm: usize,
    /// L1 distance between the arm's category distribution and the pooled one.
    pub distance: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub threshold: f64,
    pub cells: Vec<BalanceCell>,
}

impl BalanceReport {
    pub fn any_flagged(&self) -> bool {
        self.cells.iter().any(|c| c.flagged)
    }

    pub fn max_distance(&self) -> f64 {
        self.cells.iter().map(|c| c.distance).fold(0.0, f64::max)
    }
}

/// Per (feature, arm) L1 divergence from the pooled category distribution.
pub fn balance_check(d: &Dataset, threshold: f64) -> Result<BalanceReport> {
    let k = d.arm_count();
    let counts = d.arm_counts();
    if let Some(arm) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyArm { arm });
    }
    let n = d.n_rows() as f64;
    let mut cells = Vec::with_capacity(d.feature_count() * k);
    for f in 0..d.feature_count() {
        let card = d.schema().cardinalities[f] as usize;
        let mut table = vec![0usize; card * k];
        for (&code, &t) in d.feature_column(f).iter().zip(d.treatments()) {
            table[t as usize * card + code as usize] += 1;
        }
        let pooled: Vec<f64> = (0..card)
            .map(|c| (0..k).map(|a| table[a * card + c]).sum::<usize>() as f64 / n)
            .collect();
        for arm in 0..k {
            let na = counts[arm] as f64;
            let distance: f64 = (0..card)
                .map(|c| (table[arm * card + c] as f64 / na - pooled[c]).abs())
                .sum();
            cells.push(BalanceCell {
                feature: f,
                arm,
                distance,
                flagged: distance > threshold,
            });
        }
    }
    Ok(BalanceReport { threshold, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Schema;

    #[test]
    fn maximal_divergence_is_flagged() {
        // Arm 0 rows split evenly over both categories, arm 1 only category 0,
        // with the pooled distribution uniform.
        let schema = Schema::new(vec![2], 2).unwrap();
        let d = Dataset::from_columns(
            schema,
            vec![0.5, 0.5],
            vec![vec![1, 1, 1, 0, 0, 0]],
            vec![0, 0, 0, 0, 1, 1],
            vec![1.0; 6],
        )
        .unwrap();
        let r = balance_check(&d, DEFAULT_BALANCE_THRESHOLD).unwrap();
        let arm1 = r.cells.iter().find(|c| c.arm == 1).unwrap();
        assert!((arm1.distance - 1.0).abs() < 1e-12);
        assert!(arm1.flagged);
    }

    #[test]
    fn empty_arm_is_an_error() {
        let schema = Schema::new(vec![2], 2).unwrap();
        let d = Dataset::from_columns(schema, vec![0.5, 0.5], vec![vec![0, 1]], vec![0, 0], vec![1.0; 2])
            .unwrap();
        assert!(matches!(balance_check(&d, 0.02), Err(Error::EmptyArm { arm: 1 })));
    }
}
