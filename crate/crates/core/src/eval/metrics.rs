//! Offline estimators and loss metrics over a logged dataset.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::policy::{assignment_vector, Assign, Policy};
use crate::synth::SyntheticTruth;
use crate::tree::renormalized_propensity;

fn check_len(d: &Dataset, assignments: &[u32]) {
    assert_eq!(assignments.len(), d.n_rows(), "one assignment per row");
}

/// `(1/N) sum_i 1(pi(x_i) = t_i) y_i / P(t_i)` for precomputed assignments.
pub fn ips_from_assignments(d: &Dataset, assignments: &[u32]) -> f64 {
    check_len(d, assignments);
    let mut total = 0.0;
    for (i, &a) in assignments.iter().enumerate() {
        if a as usize == d.treatment(i) {
            total += d.outcome(i) / d.propensity(i);
        }
    }
    total / d.n_rows() as f64
}

/// `(1/N) sum_i 1(pi(x_i) != t_i) y_i / P(t_i)` for precomputed assignments.
pub fn wmr_from_assignments(d: &Dataset, assignments: &[u32]) -> f64 {
    check_len(d, assignments);
    let mut total = 0.0;
    for (i, &a) in assignments.iter().enumerate() {
        if a as usize != d.treatment(i) {
            total += d.outcome(i) / d.propensity(i);
        }
    }
    total / d.n_rows() as f64
}

/// `(1/N) sum_i y_i / P(t_i)`.
pub fn mean_weight(d: &Dataset) -> f64 {
    let total: f64 = (0..d.n_rows()).map(|i| d.outcome(i) / d.propensity(i)).sum();
    total / d.n_rows() as f64
}

pub fn ips_value(policy: &impl Assign, d: &Dataset) -> f64 {
    ips_from_assignments(d, &assignment_vector(policy, d))
}

pub fn wmr(policy: &impl Assign, d: &Dataset) -> f64 {
    wmr_from_assignments(d, &assignment_vector(policy, d))
}

/// IPS value of always assigning control.
pub fn control_value(d: &Dataset) -> Result<f64> {
    if d.arm_counts()[0] == 0 {
        return Err(Error::EmptyArm { arm: 0 });
    }
    let mut total = 0.0;
    for i in 0..d.n_rows() {
        if d.treatment(i) == 0 {
            total += d.outcome(i) / d.propensity(i);
        }
    }
    Ok(total / d.n_rows() as f64)
}

pub fn lift_from_assignments(d: &Dataset, assignments: &[u32]) -> Result<f64> {
    let base = control_value(d)?;
    if base == 0.0 {
        return Err(Error::UndefinedLift);
    }
    Ok(ips_from_assignments(d, assignments) / base - 1.0)
}

/// Relative IPS gain over assigning control to everyone.
pub fn lift_vs_control(policy: &impl Assign, d: &Dataset) -> Result<f64> {
    lift_from_assignments(d, &assignment_vector(policy, d))
}

fn no_model(policy: &Policy, what: &str) -> Error {
    Error::TaskMismatch {
        expected: what.into(),
        found: policy.name().into(),
    }
}

/// `mean_i (y_i - mu(x_i, t_i))^2`, with the policy's trees read through
/// the outcome leaf function.
pub fn mse_outcome(policy: &Policy, d: &Dataset) -> Result<f64> {
    let mut x = vec![0; d.feature_count()];
    let mut total = 0.0;
    for i in 0..d.n_rows() {
        d.x_into(i, &mut x);
        let mu = policy
            .predict_outcome(&x, d.treatment(i))
            .ok_or_else(|| no_model(policy, "outcome"))?;
        total += (d.outcome(i) - mu).powi(2);
    }
    Ok(total / d.n_rows() as f64)
}

/// Transformed-outcome squared error of `tau(., j)`, averaged over rows of
/// arms `{0, j}` and then over the treated arms `j`.
pub fn mse_effect_proxy(policy: &Policy, d: &Dataset) -> Result<f64> {
    let k = d.arm_count();
    let mut x = vec![0; d.feature_count()];
    let mut total = vec![0.0; k];
    let mut count = vec![0usize; k];
    for i in 0..d.n_rows() {
        let t = d.treatment(i);
        d.x_into(i, &mut x);
        let arms: Vec<usize> = if t == 0 { (1..k).collect() } else { vec![t] };
        for j in arms {
            let p = renormalized_propensity(d.propensities(), j);
            let z = if t == 0 {
                -d.outcome(i) / (1.0 - p)
            } else {
                d.outcome(i) / p
            };
            let tau = policy
                .predict_effect(&x, j)
                .ok_or_else(|| no_model(policy, "effect"))?;
            total[j] += (z - tau).powi(2);
            count[j] += 1;
        }
    }
    let mut sum = 0.0;
    for j in 1..k {
        if count[j] == 0 {
            return Err(Error::EmptyArm { arm: j });
        }
        sum += total[j] / count[j] as f64;
    }
    Ok(sum / (k - 1) as f64)
}

/// `mean_i mean_{j >= 1} (tau(x_i, j) - true_cate(x_i, j))^2`.
pub fn mse_effect_exact(policy: &Policy, d: &Dataset, truth: &SyntheticTruth) -> Result<f64> {
    truth.check_aligned(d)?;
    let k = d.arm_count();
    let mut x = vec![0; d.feature_count()];
    let mut total = 0.0;
    for i in 0..d.n_rows() {
        d.x_into(i, &mut x);
        for j in 1..k {
            let tau = policy
                .predict_effect(&x, j)
                .ok_or_else(|| no_model(policy, "effect"))?;
            total += (tau - truth.true_cate(i, j)).powi(2);
        }
    }
    Ok(total / (d.n_rows() * (k - 1)) as f64)
}

/// Share of rows assigned to each arm.
pub fn assignment_shares(assignments: &[u32], arm_count: usize) -> Vec<f64> {
    let mut counts = vec![0usize; arm_count];
    for &a in assignments {
        counts[a as usize] += 1;
    }
    let n = assignments.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// Base-2 Shannon entropy of a share vector, with `0 log 0 = 0`.
pub fn entropy_bits(shares: &[f64]) -> f64 {
    let h: f64 = shares
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| -s * s.log2())
        .sum();
    h.max(0.0)
}

pub fn assignment_entropy(policy: &impl Assign, d: &Dataset) -> f64 {
    entropy_bits(&assignment_shares(&assignment_vector(policy, d), d.arm_count()))
}
