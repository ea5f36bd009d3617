use tapol_core::dataset::Dataset;
use tapol_core::synth::{generate, optimal_value, scenario_preset};
use tapol_core::SyntheticTruth;

fn preset(name: &str, n: usize, seed: u64) -> (Dataset, SyntheticTruth) {
    let mut sc = scenario_preset(name).unwrap();
    sc.n_rows = n;
    sc.seed = seed;
    generate(&sc).unwrap()
}

/// Per-arm sample mean and variance of the mean.
fn arm_moments(d: &Dataset) -> Vec<(f64, f64)> {
    let k = d.arm_count();
    let mut s = vec![0.0; k];
    let mut s2 = vec![0.0; k];
    let mut n = vec![0.0; k];
    for i in 0..d.n_rows() {
        let (t, y) = (d.treatment(i), d.outcome(i));
        s[t] += y;
        s2[t] += y * y;
        n[t] += 1.0;
    }
    (0..k)
        .map(|j| {
            let m = s[j] / n[j];
            let var = (s2[j] / n[j] - m * m) * n[j] / (n[j] - 1.0);
            (m, var / n[j])
        })
        .collect()
}

fn best_constant_value(truth: &SyntheticTruth) -> f64 {
    let k = truth.arm_count();
    (0..k)
        .map(|j| (0..truth.n_rows()).map(|i| truth.outcomes(i)[j]).sum::<f64>() / truth.n_rows() as f64)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn level_dominant_arm_means_are_indistinguishable() {
    let (d, _) = preset("level-dominant", 100_000, 3);
    let m = arm_moments(&d);
    for (j, &(mj, vj)) in m.iter().enumerate().skip(1) {
        let z = (mj - m[0].0) / (vj + m[0].1).sqrt();
        assert!(z.abs() < 3.0, "arm {j}: z = {z}");
    }
}

#[test]
fn level_dominant_rewards_individualized_assignment() {
    let (d, truth) = preset("level-dominant", 100_000, 3);
    let gain = optimal_value(&d, &truth).unwrap() / best_constant_value(&truth) - 1.0;
    assert!(gain >= 0.02, "optimal over best constant: {gain}");
}

#[test]
fn effect_dominant_ate_spread_is_detectable() {
    let (d, _) = preset("effect-dominant", 100_000, 3);
    let m = arm_moments(&d);
    let hi = (0..m.len()).max_by(|&a, &b| m[a].0.total_cmp(&m[b].0)).unwrap();
    let lo = (0..m.len()).min_by(|&a, &b| m[a].0.total_cmp(&m[b].0)).unwrap();
    let se = (m[hi].1 + m[lo].1).sqrt();
    assert!(m[hi].0 - m[lo].0 > 5.0 * se, "spread {} vs se {se}", m[hi].0 - m[lo].0);
}

#[test]
fn null_effects_has_no_cate_anywhere() {
    let (d, truth) = preset("null-effects", 20_000, 3);
    for i in 0..d.n_rows() {
        for j in 1..d.arm_count() {
            assert_eq!(truth.true_cate(i, j), 0.0);
        }
    }
}
