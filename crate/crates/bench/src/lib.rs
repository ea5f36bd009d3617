//! Replication experiments on the synthetic presets: the cross-task study
//! repeated over sampling seeds, learning-curve trend checks, and the small
//! statistics they report.

use serde::Serialize;
use tapol_core::eval::{
    cross_task_table, learning_curve, Approach, CrossTaskRow, CvConfig, DiagonalFlags, Grid,
    LearningCurve,
};
use tapol_core::synth::{generate, scenario_preset};
use tapol_core::{Hyperparams, Result, ScenarioConfig};

/// Cross-task outcome of one sampling seed.
#[derive(Debug, Clone, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub rows: Vec<CrossTaskRow>,
    pub flags: DiagonalFlags,
    /// Truth-based effect error per approach, OP, CP, TP.
    pub mse_effect_exact: Vec<f64>,
    /// Hyperparameters chosen in the first outer fold, per approach.
    pub first_fold_hyperparams: Vec<Vec<Hyperparams>>,
}

impl SeedOutcome {
    fn regret(&self, a: Approach) -> f64 {
        self.rows
            .iter()
            .find(|r| r.approach == a)
            .and_then(|r| r.regret)
            .expect("generated data carries regret")
    }

    /// Every diagonal flag, including TP's regret, holds.
    pub fn dominant(&self) -> bool {
        self.flags.all() && self.flags.tp_lowest_regret == Some(true)
    }
}

/// Nested-CV configuration used for a replication seed.
pub fn study_config(seed: u64, grid: Grid) -> CvConfig {
    CvConfig {
        seed,
        grid,
        ..CvConfig::default()
    }
}

pub fn preset_with(name: &str, n_rows: usize, seed: u64) -> Result<ScenarioConfig> {
    let mut sc = scenario_preset(name)?;
    sc.n_rows = n_rows;
    sc.seed = seed;
    Ok(sc)
}

/// Generates `sc` with sampling seed `seed` and runs the OP/CP/TP cross-task
/// table with the same seed driving the folds.
pub fn cross_task_seed(sc: &ScenarioConfig, seed: u64, grid: &Grid) -> Result<SeedOutcome> {
    let mut sc = sc.clone();
    sc.seed = seed;
    let (d, truth) = generate(&sc)?;
    let table = cross_task_table(&d, &Approach::LEARNED, &study_config(seed, grid.clone()), Some(&truth))?;
    Ok(SeedOutcome {
        seed,
        mse_effect_exact: table
            .reports
            .iter()
            .map(|r| r.mse_effect_exact.unwrap_or(f64::NAN))
            .collect(),
        first_fold_hyperparams: table
            .reports
            .iter()
            .map(|r| r.per_fold[0].hyperparams.clone())
            .collect(),
        rows: table.rows,
        flags: table.flags.expect("full table has flags"),
    })
}

/// Two-sided exact sign test; ties are dropped.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let k = wins.max(losses);
    let mut tail = 0.0;
    let mut coef = 1.0f64;
    // coef walks C(n, i) / 2^n from i = 0 upwards.
    let half_n = 0.5f64.powi(n as i32);
    for i in 0..=n {
        if i >= k {
            tail += coef * half_n;
        }
        coef = coef * (n - i) as f64 / (i + 1) as f64;
    }
    (2.0 * tail).min(1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct StudySummary {
    pub seeds: usize,
    pub dominant: usize,
    pub op_lowest_mse_outcome: usize,
    pub cp_lowest_mse_effect_proxy: usize,
    pub tp_highest_lift: usize,
    pub tp_lowest_regret: usize,
    pub tp_beats_op_regret: usize,
    pub tp_beats_cp_regret: usize,
    pub sign_p_vs_op: f64,
    pub sign_p_vs_cp: f64,
    pub mean_regret: [f64; 3],
}

impl StudySummary {
    pub fn of(outcomes: &[SeedOutcome]) -> Self {
        let count = |f: &dyn Fn(&SeedOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
        let n = outcomes.len();
        let beats = |other: Approach| {
            let w = count(&|o| o.regret(Approach::Tp) < o.regret(other));
            let l = count(&|o| o.regret(Approach::Tp) > o.regret(other));
            (w, l)
        };
        let (wo, lo) = beats(Approach::Op);
        let (wc, lc) = beats(Approach::Cp);
        let mut mean_regret = [0.0; 3];
        for (slot, a) in mean_regret.iter_mut().zip(Approach::LEARNED) {
            *slot = outcomes.iter().map(|o| o.regret(a)).sum::<f64>() / n as f64;
        }
        Self {
            seeds: n,
            dominant: count(&|o| o.dominant()),
            op_lowest_mse_outcome: count(&|o| o.flags.op_lowest_mse_outcome),
            cp_lowest_mse_effect_proxy: count(&|o| o.flags.cp_lowest_mse_effect_proxy),
            tp_highest_lift: count(&|o| o.flags.tp_highest_lift),
            tp_lowest_regret: count(&|o| o.flags.tp_lowest_regret == Some(true)),
            tp_beats_op_regret: wo,
            tp_beats_cp_regret: wc,
            sign_p_vs_op: sign_test(wo, lo),
            sign_p_vs_cp: sign_test(wc, lc),
            mean_regret,
        }
    }
}

/// Learning curve of OP, CP and TP (plus the best-on-average baseline) on
/// one generated dataset.
pub fn curve_study(sc: &ScenarioConfig, sizes: &[usize], grid: &Grid) -> Result<LearningCurve> {
    let (d, truth) = generate(sc)?;
    learning_curve(&d, &Approach::LEARNED, sizes, &study_config(sc.seed, grid.clone()), Some(&truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_values() {
        // 15 of 20: P(X >= 15) = 21700 / 2^20.
        let p = sign_test(15, 5);
        assert!((p - 2.0 * 21_700.0 / 1_048_576.0).abs() < 1e-12);
        assert_eq!(sign_test(3, 3), 1.0);
        assert!((sign_test(5, 0) - 0.0625).abs() < 1e-15);
        assert_eq!(sign_test(0, 0), 1.0);
    }
}
