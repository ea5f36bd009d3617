//! Synthetic randomized experiments with known potential outcomes.
//!
//! Conditional means are additive in per-(feature, category) effects drawn
//! from a keyed hash of `structure_seed`:
//!
//! * a level term `b(x)` shared by every arm, scaled by `base_scale`;
//! * an effect term `tau_j(x)` for each treated arm, scaled by
//!   `effect_scale` and driven only by `effect_features`.
//!
//! Both terms are centered over the (uniform) category distribution of each
//! feature. Under the Poisson log-link model the rate is
//! `level * exp(b(x) + tau_j(x) + delta_j)`, with `delta_j` solved in closed
//! form so that arm `j`'s population mean is exactly
//! `level * (1 + ate_shift[j])`. Under the truncated Gaussian model the
//! latent mean is `level * (1 + b(x) + tau_j(x) + ate_shift[j])` and
//! potential outcomes are the exact means of the truncated distribution.
//!
//! Rows are sampled from a per-row stream keyed by `(seed, row)`, so output
//! is identical however the work is split across threads.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::dataset::{Dataset, Schema};
use crate::error::{Error, Result};
use crate::policy::Assign;
use crate::rng::{hashed_uniform, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    PoissonLogLink,
    TruncatedGaussian { sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub cardinalities: Vec<u32>,
    /// Design propensity per arm; its length fixes the arm count.
    pub propensities: Vec<f64>,
    pub n_rows: usize,
    /// Population mean outcome of the control arm.
    pub level: f64,
    pub base_scale: f64,
    pub effect_scale: f64,
    /// Relative shift of each arm's population mean over control. Empty
    /// means all zeros; otherwise entry 0 must be 0.
    #[serde(default)]
    pub ate_shift: Vec<f64>,
    pub noise: NoiseModel,
    pub effect_features: Vec<usize>,
    /// Keys the hashed effects, i.e. the data-generating process itself.
    pub structure_seed: u64,
    /// Keys row sampling.
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn schema(&self) -> Schema {
        Schema {
            cardinalities: self.cardinalities.clone(),
            arm_count: self.propensities.len(),
        }
    }

    pub fn arm_count(&self) -> usize {
        self.propensities.len()
    }

    fn shift(&self, arm: usize) -> f64 {
        self.ate_shift.get(arm).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::Config {
                field: field.into(),
                reason: reason.into(),
            })
        };
        if self.cardinalities.is_empty() {
            return bad("cardinalities", "at least one feature is required");
        }
        if self.cardinalities.contains(&0) {
            return bad("cardinalities", "every cardinality must be at least 1");
        }
        let k = self.propensities.len();
        if k < 2 {
            return bad("propensities", "at least two arms are required");
        }
        if self.propensities.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return bad("propensities", "entries must lie in (0, 1]");
        }
        let total: f64 = self.propensities.iter().sum();
        if (total - 1.0).abs() > crate::dataset::PROPENSITY_SUM_TOL {
            return bad("propensities", "must sum to 1");
        }
        if self.n_rows == 0 {
            return bad("n_rows", "must be at least 1");
        }
        if !(self.level > 0.0 && self.level.is_finite()) {
            return bad("level", "must be positive and finite");
        }
        if !(self.base_scale >= 0.0 && self.base_scale.is_finite()) {
            return bad("base_scale", "must be non-negative and finite");
        }
        if !(self.effect_scale >= 0.0 && self.effect_scale.is_finite()) {
            return bad("effect_scale", "must be non-negative and finite");
        }
        if self.base_scale == 0.0 && self.effect_scale == 0.0 {
            return bad("effect_scale", "base_scale and effect_scale cannot both be zero");
        }
        if self.effect_scale > 0.0 && self.effect_features.is_empty() {
            return bad("effect_features", "must be non-empty when effect_scale > 0");
        }
        if self.effect_features.iter().any(|&f| f >= self.cardinalities.len()) {
            return bad("effect_features", "feature index out of range");
        }
        if !self.ate_shift.is_empty() {
            if self.ate_shift.len() != k {
                return bad("ate_shift", "must have one entry per arm");
            }
            if self.ate_shift[0] != 0.0 {
                return bad("ate_shift", "control entry must be 0");
            }
            if self.ate_shift.iter().any(|&s| !(s > -1.0 && s.is_finite())) {
                return bad("ate_shift", "entries must be finite and greater than -1");
            }
        }
        if let NoiseModel::TruncatedGaussian { sd } = self.noise {
            if !(sd > 0.0 && sd.is_finite()) {
                return bad("noise.sd", "must be positive and finite");
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config {
            field: "scenario".into(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Names accepted by [`scenario_preset`].
pub const PRESETS: [&str; 3] = ["level-dominant", "effect-dominant", "null-effects"];

/// Production-shaped schema: five categorical features, four arms with one large
/// control arm.
pub const PRESET_CARDINALITIES: [u32; 5] = [19, 6, 3, 4, 8];
pub const PRESET_PROPENSITIES: [f64; 4] = [0.8668, 0.0444, 0.0444, 0.0444];

/// Calibrated scenarios; see `calibrate_presets` in the bench crate for the
/// Monte Carlo run that fixed these constants.
pub fn scenario_preset(name: &str) -> Result<ScenarioConfig> {
    let base = ScenarioConfig {
        cardinalities: PRESET_CARDINALITIES.to_vec(),
        propensities: PRESET_PROPENSITIES.to_vec(),
        n_rows: 100_000,
        level: 5.0,
        base_scale: 0.0,
        effect_scale: 0.0,
        ate_shift: Vec::new(),
        noise: NoiseModel::PoissonLogLink,
        effect_features: Vec::new(),
        structure_seed: 20_190_802,
        seed: 0,
    };
    let cfg = match name {
        "level-dominant" => ScenarioConfig {
            base_scale: 0.6,
            effect_scale: 0.4,
            effect_features: vec![0, 1, 4],
            ..base
        },
        "effect-dominant" => ScenarioConfig {
            base_scale: 0.05,
            effect_scale: 0.4,
            effect_features: vec![0, 1, 2, 3, 4],
            ate_shift: vec![0.0, 0.08, -0.08, 0.0],
            ..base
        },
        "null-effects" => ScenarioConfig {
            base_scale: 0.6,
            effect_scale: 0.0,
            ..base
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

/// Exact conditional means under every arm, row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    arm_count: usize,
    potential_outcomes: Vec<f64>,
    optimal_arm: Vec<u32>,
}

impl SyntheticTruth {
    /// `potential_outcomes` is row-major, `n_rows x arm_count`.
    pub fn new(arm_count: usize, potential_outcomes: Vec<f64>) -> Result<Self> {
        if arm_count == 0 || potential_outcomes.len() % arm_count != 0 {
            return Err(Error::Misaligned(format!(
                "{} values cannot form rows of {arm_count} arms",
                potential_outcomes.len()
            )));
        }
        let optimal_arm = potential_outcomes
            .chunks_exact(arm_count)
            .map(|row| crate::policy::argmax_lowest(row) as u32)
            .collect();
        Ok(Self {
            arm_count,
            potential_outcomes,
            optimal_arm,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.optimal_arm.len()
    }

    pub fn arm_count(&self) -> usize {
        self.arm_count
    }

    /// `E[Y^j | x_i]` for every arm `j`.
    pub fn outcomes(&self, row: usize) -> &[f64] {
        &self.potential_outcomes[row * self.arm_count..(row + 1) * self.arm_count]
    }

    pub fn potential_outcomes(&self) -> &[f64] {
        &self.potential_outcomes
    }

    /// `tau_j(x_i)` for `j >= 1`; zero for the control arm.
    pub fn true_cate(&self, row: usize, arm: usize) -> f64 {
        let o = self.outcomes(row);
        o[arm] - o[0]
    }

    /// Row-major `n_rows x (arm_count - 1)` matrix of effects of arms `1..K`.
    pub fn true_cate_matrix(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_rows() * (self.arm_count - 1));
        for i in 0..self.n_rows() {
            let o = self.outcomes(i);
            out.extend(o[1..].iter().map(|v| v - o[0]));
        }
        out
    }

    pub fn optimal_arm(&self, row: usize) -> usize {
        self.optimal_arm[row] as usize
    }

    pub fn optimal_arms(&self) -> &[u32] {
        &self.optimal_arm
    }

    pub fn subset(&self, rows: &[usize]) -> SyntheticTruth {
        let mut po = Vec::with_capacity(rows.len() * self.arm_count);
        for &i in rows {
            po.extend_from_slice(self.outcomes(i));
        }
        SyntheticTruth {
            arm_count: self.arm_count,
            potential_outcomes: po,
            optimal_arm: rows.iter().map(|&i| self.optimal_arm[i]).collect(),
        }
    }

    pub fn check_aligned(&self, d: &Dataset) -> Result<()> {
        if self.n_rows() != d.n_rows() || self.arm_count != d.arm_count() {
            return Err(Error::Misaligned(format!(
                "truth is {}x{}, dataset is {}x{}",
                self.n_rows(),
                self.arm_count,
                d.n_rows(),
                d.arm_count()
            )));
        }
        Ok(())
    }
}

/// Precomputed per-(feature, category) effect tables of a scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    cfg: ScenarioConfig,
    /// `level_effects[f][c]`, already multiplied by `base_scale`.
    level_effects: Vec<Vec<f64>>,
    /// `arm_effects[j][f][c]`, already multiplied by `effect_scale`; zero for
    /// arm 0 and for features outside the mask.
    arm_effects: Vec<Vec<Vec<f64>>>,
    /// Additive offset per arm on the linear predictor.
    arm_offset: Vec<f64>,
}

fn centered(values: Vec<f64>) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.into_iter().map(|v| v - mean).collect()
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.arm_count();
        let level_effects: Vec<Vec<f64>> = cfg
            .cardinalities
            .iter()
            .enumerate()
            .map(|(f, &card)| {
                let raw = (0..card)
                    .map(|c| hashed_uniform(cfg.structure_seed, &[0, f as u64, c as u64]))
                    .collect();
                centered(raw).into_iter().map(|v| v * cfg.base_scale).collect()
            })
            .collect();
        let arm_effects: Vec<Vec<Vec<f64>>> = (0..k)
            .map(|j| {
                cfg.cardinalities
                    .iter()
                    .enumerate()
                    .map(|(f, &card)| {
                        if j == 0 || !cfg.effect_features.contains(&f) {
                            return vec![0.0; card as usize];
                        }
                        let raw = (0..card)
                            .map(|c| {
                                hashed_uniform(cfg.structure_seed, &[1, j as u64, f as u64, c as u64])
                            })
                            .collect();
                        centered(raw).into_iter().map(|v| v * cfg.effect_scale).collect()
                    })
                    .collect()
            })
            .collect();
        let arm_offset = match cfg.noise {
            NoiseModel::PoissonLogLink => (0..k)
                .map(|j| {
                    // Population mean of exp(b + tau_j) factorizes over
                    // independent uniform features.
                    let log_mean: f64 = level_effects
                        .iter()
                        .zip(&arm_effects[j])
                        .map(|(b, t)| {
                            let s: f64 = b.iter().zip(t).map(|(b, t)| (b + t).exp()).sum();
                            (s / b.len() as f64).ln()
                        })
                        .sum();
                    (1.0 + cfg.shift(j)).ln() - log_mean
                })
                .collect(),
            NoiseModel::TruncatedGaussian { .. } => (0..k).map(|j| cfg.shift(j)).collect(),
        };
        Ok(Self {
            cfg,
            level_effects,
            arm_effects,
            arm_offset,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    fn linear_predictor(&self, x: &[u32], arm: usize) -> f64 {
        let mut eta = self.arm_offset[arm];
        for (f, &c) in x.iter().enumerate() {
            eta += self.level_effects[f][c as usize] + self.arm_effects[arm][f][c as usize];
        }
        eta
    }

    /// Exact `E[Y^j | x]`.
    pub fn conditional_mean(&self, x: &[u32], arm: usize) -> f64 {
        let eta = self.linear_predictor(x, arm);
        match self.cfg.noise {
            NoiseModel::PoissonLogLink => self.cfg.level * eta.exp(),
            NoiseModel::TruncatedGaussian { sd } => {
                let m = self.cfg.level * (1.0 + eta);
                truncated_mean(m, sd)
            }
        }
    }

    fn sample_outcome<R: Rng>(&self, x: &[u32], arm: usize, rng: &mut R) -> f64 {
        let eta = self.linear_predictor(x, arm);
        match self.cfg.noise {
            NoiseModel::PoissonLogLink => {
                let rate = self.cfg.level * eta.exp();
                match Poisson::new(rate) {
                    Ok(p) => p.sample(rng),
                    Err(_) => 0.0,
                }
            }
            NoiseModel::TruncatedGaussian { sd } => {
                let m = self.cfg.level * (1.0 + eta);
                let z: f64 = StandardNormal.sample(rng);
                (m + sd * z).max(0.0)
            }
        }
    }

    /// Population (uniform-feature) mean outcome of every arm.
    pub fn population_arm_means(&self) -> Vec<f64> {
        let k = self.cfg.arm_count();
        let cells = enumerate_cells(&self.cfg.cardinalities);
        let mut sums = vec![0.0; k];
        for x in &cells {
            for (j, s) in sums.iter_mut().enumerate() {
                *s += self.conditional_mean(x, j);
            }
        }
        sums.iter().map(|s| s / cells.len() as f64).collect()
    }

    pub fn generate(&self) -> (Dataset, SyntheticTruth) {
        let cfg = &self.cfg;
        let n = cfg.n_rows;
        let m = cfg.cardinalities.len();
        let k = cfg.arm_count();
        let cumulative: Vec<f64> = cfg
            .propensities
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();

        struct Row {
            x: Vec<u32>,
            t: u32,
            y: f64,
            po: Vec<f64>,
        }
        let rows: Vec<Row> = (0..n)
            .into_par_iter()
            .with_min_len(4096)
            .map(|i| {
                let mut rng = stream_rng(cfg.seed, i as u64);
                let x: Vec<u32> = cfg
                    .cardinalities
                    .iter()
                    .map(|&c| rng.random_range(0..c))
                    .collect();
                let u: f64 = rng.random();
                let t = cumulative.iter().position(|&c| u < c).unwrap_or(k - 1);
                let y = self.sample_outcome(&x, t, &mut rng);
                let po = (0..k).map(|j| self.conditional_mean(&x, j)).collect();
                Row { x, t: t as u32, y, po }
            })
            .collect();

        let mut features = vec![Vec::with_capacity(n); m];
        let mut treatment = Vec::with_capacity(n);
        let mut outcome = Vec::with_capacity(n);
        let mut po = Vec::with_capacity(n * k);
        for r in rows {
            for (col, c) in features.iter_mut().zip(&r.x) {
                col.push(*c);
            }
            treatment.push(r.t);
            outcome.push(r.y);
            po.extend_from_slice(&r.po);
        }
        let d = Dataset::from_columns(cfg.schema(), cfg.propensities.clone(), features, treatment, outcome)
            .expect("generated columns are consistent");
        let truth = SyntheticTruth::new(k, po).expect("generated truth is consistent");
        (d, truth)
    }
}

/// `E[max(0, m + sd * Z)]` for standard normal `Z`.
fn truncated_mean(m: f64, sd: f64) -> f64 {
    let n = Normal::standard();
    let a = m / sd;
    m * n.cdf(a) + sd * n.pdf(a)
}

/// Every feature vector of a (small) schema in lexicographic order.
pub fn enumerate_cells(cardinalities: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &c in cardinalities {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..c).map(move |v| {
                    let mut x = prefix.clone();
                    x.push(v);
                    x
                })
            })
            .collect();
    }
    out
}

pub fn generate(cfg: &ScenarioConfig) -> Result<(Dataset, SyntheticTruth)> {
    Ok(Scenario::new(cfg.clone())?.generate())
}

/// `(1/N) sum_i E[Y^{pi(x_i)} | x_i]`.
pub fn true_policy_value(policy: &impl Assign, d: &Dataset, truth: &SyntheticTruth) -> Result<f64> {
    truth.check_aligned(d)?;
    let mut x = vec![0; d.feature_count()];
    let mut total = 0.0;
    for i in 0..d.n_rows() {
        d.x_into(i, &mut x);
        total += truth.outcomes(i)[policy.assign(&x)];
    }
    Ok(total / d.n_rows() as f64)
}

/// Value of the per-row optimal assignment.
pub fn optimal_value(d: &Dataset, truth: &SyntheticTruth) -> Result<f64> {
    truth.check_aligned(d)?;
    let total: f64 = (0..d.n_rows())
        .map(|i| truth.outcomes(i)[truth.optimal_arm(i)])
        .sum();
    Ok(total / d.n_rows() as f64)
}

/// `E[Y^{T*(X)} - Y^{pi(X)}]` over the rows of `d`; never negative.
pub fn true_regret(policy: &impl Assign, d: &Dataset, truth: &SyntheticTruth) -> Result<f64> {
    truth.check_aligned(d)?;
    let mut x = vec![0; d.feature_count()];
    let mut total = 0.0;
    for i in 0..d.n_rows() {
        d.x_into(i, &mut x);
        let o = truth.outcomes(i);
        total += o[truth.optimal_arm(i)] - o[policy.assign(&x)];
    }
    Ok(total / d.n_rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(effect_scale: f64) -> ScenarioConfig {
        ScenarioConfig {
            cardinalities: vec![3, 2],
            propensities: vec![0.5, 0.25, 0.25],
            n_rows: 2000,
            level: 4.0,
            base_scale: 0.5,
            effect_scale,
            ate_shift: vec![],
            noise: NoiseModel::PoissonLogLink,
            effect_features: if effect_scale > 0.0 { vec![0] } else { vec![] },
            structure_seed: 11,
            seed: 5,
        }
    }

    #[test]
    fn zero_effects_give_zero_cate_and_control_optimum() {
        let (d, truth) = generate(&small(0.0)).unwrap();
        assert!(truth.true_cate_matrix().iter().all(|&v| v == 0.0));
        assert!(truth.optimal_arms().iter().all(|&a| a == 0));
        assert!(d.validate().is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&small(0.3)).unwrap();
        let b = generate(&small(0.3)).unwrap();
        assert_eq!(a, b);
        let mut other = small(0.3);
        other.seed = 6;
        assert_ne!(a.0, generate(&other).unwrap().0);
    }

    #[test]
    fn generation_does_not_depend_on_thread_count() {
        let cfg = small(0.3);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| generate(&cfg).unwrap());
        let b = four.install(|| generate(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn optimal_arm_and_cate_invariants() {
        let (_, truth) = generate(&small(0.4)).unwrap();
        for i in 0..truth.n_rows() {
            let o = truth.outcomes(i);
            let best = truth.optimal_arm(i);
            assert!(o.iter().all(|&v| v <= o[best]));
            assert!(o[..best].iter().all(|&v| v < o[best]));
            for j in 1..3 {
                assert_eq!(truth.true_cate(i, j), o[j] - o[0]);
            }
            assert_eq!(truth.true_cate(i, 0), 0.0);
        }
    }

    #[test]
    fn poisson_offsets_hit_target_population_means() {
        let mut cfg = small(0.4);
        cfg.ate_shift = vec![0.0, 0.1, -0.2];
        let s = Scenario::new(cfg).unwrap();
        let means = s.population_arm_means();
        assert!((means[0] - 4.0).abs() < 1e-9);
        assert!((means[1] - 4.4).abs() < 1e-9);
        assert!((means[2] - 3.2).abs() < 1e-9);
    }

    #[test]
    fn truncated_gaussian_outcomes_are_clamped() {
        let mut cfg = small(0.4);
        cfg.level = 0.5;
        cfg.noise = NoiseModel::TruncatedGaussian { sd: 2.0 };
        let (d, truth) = generate(&cfg).unwrap();
        assert!(d.outcomes().iter().all(|&y| y >= 0.0));
        assert!(d.outcomes().iter().any(|&y| y == 0.0));
        assert!(truth.potential_outcomes().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn truncated_mean_matches_quadrature() {
        // Midpoint rule over the positive half line.
        for &(m, sd) in &[(1.0, 1.0), (-0.5, 2.0), (3.0, 0.5)] {
            let n = Normal::new(m, sd).unwrap();
            let h = 1e-4;
            let upper = m + 12.0 * sd;
            let steps = (upper / h) as usize;
            let q: f64 = (0..steps)
                .map(|s| {
                    let y = (s as f64 + 0.5) * h;
                    y * n.pdf(y) * h
                })
                .sum();
            assert!((truncated_mean(m, sd) - q).abs() < 1e-6, "{m} {sd}");
        }
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let mut cfg = small(0.3);
        cfg.effect_features.clear();
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "effect_features"),
            other => panic!("{other:?}"),
        }
        let mut cfg = small(0.0);
        cfg.base_scale = 0.0;
        assert!(cfg.validate().is_err());
        assert!(scenario_preset("nope").is_err());
    }

    #[test]
    fn presets_use_production_schema() {
        for name in PRESETS {
            let cfg = scenario_preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.cardinalities, vec![19, 6, 3, 4, 8]);
            assert_eq!(cfg.propensities, vec![0.8668, 0.0444, 0.0444, 0.0444]);
        }
        assert_eq!(scenario_preset("null-effects").unwrap().effect_scale, 0.0);
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = scenario_preset("effect-dominant").unwrap();
        assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn policy_value_and_regret_by_hand() {
        let schema = Schema::new(vec![2], 2).unwrap();
        let d = Dataset::from_columns(schema, vec![0.5, 0.5], vec![vec![0, 1]], vec![0, 1], vec![0.0, 0.0])
            .unwrap();
        let truth = SyntheticTruth::new(2, vec![3.0, 2.0, 1.0, 4.0]).unwrap();
        let pick = |x: &[u32]| x[0] as usize;
        assert_eq!(true_policy_value(&pick, &d, &truth).unwrap(), 3.5);
        assert_eq!(true_regret(&pick, &d, &truth).unwrap(), 0.0);
        let control = |_: &[u32]| 0usize;
        assert_eq!(true_policy_value(&control, &d, &truth).unwrap(), 2.0);
        assert_eq!(true_regret(&control, &d, &truth).unwrap(), 1.5);
        let short = SyntheticTruth::new(2, vec![3.0, 2.0]).unwrap();
        assert!(true_policy_value(&pick, &d, &short).is_err());
    }
}
