//! Every approach scored on every task: outcome error, effect error and
//! assignment lift. Off-task cells read the trees through the other leaf
//! functions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cv::{nested_cv_many, CvConfig};
use super::report::{Approach, EvalReport};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::synth::SyntheticTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTaskRow {
    pub approach: Approach,
    pub mse_outcome: f64,
    pub mse_effect_proxy: f64,
    pub lift_vs_control: f64,
    pub regret: Option<f64>,
}

/// Whether each approach wins the column of its own task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalFlags {
    pub op_lowest_mse_outcome: bool,
    pub cp_lowest_mse_effect_proxy: bool,
    pub tp_highest_lift: bool,
    /// Generated data only.
    pub tp_lowest_regret: Option<bool>,
}

impl DiagonalFlags {
    pub fn all(&self) -> bool {
        self.op_lowest_mse_outcome && self.cp_lowest_mse_effect_proxy && self.tp_highest_lift
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTaskTable {
    pub rows: Vec<CrossTaskRow>,
    /// Present only for the full OP/CP/TP table.
    pub flags: Option<DiagonalFlags>,
    pub reports: Vec<EvalReport>,
}

fn strictly_best(values: &[f64], who: usize, lower: bool) -> bool {
    values.iter().enumerate().all(|(i, &v)| {
        i == who || if lower { values[who] < v } else { values[who] > v }
    })
}

/// Fold-averaged cross-task metrics for the learned `approaches`.
pub fn cross_task_table(
    d: &Dataset,
    approaches: &[Approach],
    cfg: &CvConfig,
    truth: Option<&SyntheticTruth>,
) -> Result<CrossTaskTable> {
    if approaches.is_empty() || approaches.iter().any(|a| !a.is_learned()) {
        return Err(Error::Config {
            field: "approach".into(),
            reason: "the cross-task table takes one or more of op, cp, tp".into(),
        });
    }
    let reports = nested_cv_many(d, approaches, cfg, truth, None)?;
    let rows: Vec<CrossTaskRow> = reports
        .iter()
        .map(|r| CrossTaskRow {
            approach: r.approach,
            mse_outcome: r.mse_outcome.expect("learned approaches have outcome error"),
            mse_effect_proxy: r.mse_effect_proxy.expect("learned approaches have effect error"),
            lift_vs_control: r.lift_vs_control,
            regret: r.regret,
        })
        .collect();
    let flags = (approaches == Approach::LEARNED).then(|| {
        let col = |f: fn(&CrossTaskRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
        DiagonalFlags {
            op_lowest_mse_outcome: strictly_best(&col(|r| r.mse_outcome), 0, true),
            cp_lowest_mse_effect_proxy: strictly_best(&col(|r| r.mse_effect_proxy), 1, true),
            tp_highest_lift: strictly_best(&col(|r| r.lift_vs_control), 2, false),
            tp_lowest_regret: rows
                .iter()
                .map(|r| r.regret)
                .collect::<Option<Vec<f64>>>()
                .map(|v| strictly_best(&v, 2, true)),
        }
    });
    Ok(CrossTaskTable {
        rows,
        flags,
        reports,
    })
}

impl CrossTaskTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("approach,mse_outcome,mse_effect_proxy,lift_vs_control,regret\n");
        for r in &self.rows {
            write!(
                out,
                "{},{},{},{},",
                r.approach, r.mse_outcome, r.mse_effect_proxy, r.lift_vs_control
            )
            .unwrap();
            if let Some(g) = r.regret {
                write!(out, "{g}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width text rendering with `*` marking diagonal wins.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<8} {:>14} {:>18} {:>10} {:>10}\n",
            "approach", "MSE_mu", "MSE_tau (proxy)", "lift", "regret"
        );
        let mark = |on: bool| if on { "*" } else { " " };
        for r in &self.rows {
            let (m1, m2, m3) = match (self.flags, r.approach) {
                (Some(f), Approach::Op) => (mark(f.op_lowest_mse_outcome), " ", " "),
                (Some(f), Approach::Cp) => (" ", mark(f.cp_lowest_mse_effect_proxy), " "),
                (Some(f), Approach::Tp) => (" ", " ", mark(f.tp_highest_lift)),
                _ => (" ", " ", " "),
            };
            let regret = r.regret.map_or("-".to_string(), |g| format!("{g:.5}"));
            writeln!(
                out,
                "{:<8} {:>13.5}{m1} {:>17.3}{m2} {:>8.3}%{m3} {:>10}",
                r.approach.name(),
                r.mse_outcome,
                r.mse_effect_proxy,
                100.0 * r.lift_vs_control,
                regret
            )
            .unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::cv::Grid;
    use crate::synth::{generate, scenario_preset};

    fn setup() -> (Dataset, SyntheticTruth, CvConfig) {
        let mut sc = scenario_preset("level-dominant").unwrap();
        sc.n_rows = 3000;
        sc.seed = 8;
        let (d, t) = generate(&sc).unwrap();
        let cfg = CvConfig {
            outer_folds: 3,
            inner_folds: 2,
            grid: Grid {
                max_depth: vec![1, 3],
                min_samples_leaf: vec![5],
                min_loss_reduction: vec![0.0],
            },
            seed: 1,
        };
        (d, t, cfg)
    }

    #[test]
    fn single_approach_has_no_flags() {
        let (d, t, cfg) = setup();
        let tab = cross_task_table(&d, &[Approach::Tp], &cfg, Some(&t)).unwrap();
        assert_eq!(tab.rows.len(), 1);
        assert!(tab.flags.is_none());
    }

    #[test]
    fn on_task_cells_equal_nested_cv() {
        let (d, t, cfg) = setup();
        let tab = cross_task_table(&d, &Approach::LEARNED, &cfg, Some(&t)).unwrap();
        assert!(tab.flags.is_some());
        let op = crate::eval::nested_cv(&d, Approach::Op, &cfg, Some(&t)).unwrap();
        let cp = crate::eval::nested_cv(&d, Approach::Cp, &cfg, Some(&t)).unwrap();
        let tp = crate::eval::nested_cv(&d, Approach::Tp, &cfg, Some(&t)).unwrap();
        assert_eq!(tab.rows[0].mse_outcome, op.mse_outcome.unwrap());
        assert_eq!(tab.rows[1].mse_effect_proxy, cp.mse_effect_proxy.unwrap());
        assert_eq!(tab.rows[2].lift_vs_control, tp.lift_vs_control);
        assert!(tab.to_text().lines().count() == 4);
        assert!(cross_task_table(&d, &[Approach::Control], &cfg, None).is_err());
    }

    #[test]
    fn strict_wins() {
        assert!(strictly_best(&[1.0, 2.0, 3.0], 0, true));
        assert!(!strictly_best(&[1.0, 1.0, 3.0], 0, true));
        assert!(strictly_best(&[1.0, 2.0, 3.0], 2, false));
    }
}
