//! Nested cross-validation: an outer loop of arm-stratified folds for
//! evaluation around an inner loop that picks hyperparameters by each
//! approach's own loss.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{
    assignment_shares, entropy_bits, ips_from_assignments, lift_from_assignments, mse_effect_exact,
    mse_effect_proxy, mse_outcome, wmr_from_assignments,
};
use super::report::{Approach, EvalReport, FoldMetrics};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::folds::{make_folds, stratified_assignment, stratified_subsample};
use crate::policy::{self, assignment_vector, argmax_lowest, Policy, PolicyKind, Provenance};
use crate::rng::derive_seed;
use crate::synth::{true_policy_value, true_regret, SyntheticTruth};
use crate::tree::{check_non_negative, fit_on_table, validation_loss, CellIndex, CellTable, Hyperparams, Task};

/// Hyperparameter grid; points are the Cartesian product in the order
/// depth, then leaf size, then loss reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub max_depth: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub min_loss_reduction: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            max_depth: vec![1, 2, 3, 4, 6, 8],
            // Transformed targets are very noisy at small leaves.
            min_samples_leaf: vec![50, 500, 5000],
            min_loss_reduction: vec![0.0],
        }
    }
}

impl Grid {
    pub fn single(hp: Hyperparams) -> Self {
        Self {
            max_depth: vec![hp.max_depth],
            min_samples_leaf: vec![hp.min_samples_leaf],
            min_loss_reduction: vec![hp.min_loss_reduction],
        }
    }

    pub fn points(&self) -> Vec<Hyperparams> {
        let mut out = Vec::new();
        for &d in &self.max_depth {
            for &m in &self.min_samples_leaf {
                for &r in &self.min_loss_reduction {
                    out.push(Hyperparams {
                        max_depth: d,
                        min_samples_leaf: m,
                        min_loss_reduction: r,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub grid: Grid,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            outer_folds: 10,
            inner_folds: 3,
            grid: Grid::default(),
            seed: 0,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("outer_folds", self.outer_folds), ("inner_folds", self.inner_folds)] {
            if v < 2 {
                return Err(Error::Config {
                    field: field.into(),
                    reason: "must be at least 2".into(),
                });
            }
        }
        let points = self.grid.points();
        if points.is_empty() {
            return Err(Error::Config {
                field: "grid".into(),
                reason: "hyperparameter grid is empty".into(),
            });
        }
        for hp in &points {
            hp.check()?;
        }
        Ok(())
    }
}

/// Unit tables for one training split and its inner folds.
struct Prepared<'a> {
    full: CellTable<'a>,
    inner: Vec<(CellTable<'a>, CellTable<'a>)>,
}

fn prepare<'a>(
    index: &'a CellIndex,
    d: &Dataset,
    rows: &[usize],
    inner_folds: usize,
    seed: u64,
) -> Result<Prepared<'a>> {
    let arms: Vec<u32> = rows.iter().map(|&i| d.treatment(i) as u32).collect();
    let assign = stratified_assignment(&arms, d.arm_count(), inner_folds, seed)?;
    let inner = (0..inner_folds)
        .into_par_iter()
        .map(|g| {
            let (mut tr, mut va) = (Vec::new(), Vec::new());
            for (&i, &f) in rows.iter().zip(&assign) {
                if f as usize == g {
                    va.push(i);
                } else {
                    tr.push(i);
                }
            }
            (CellTable::build(index, d, &tr), CellTable::build(index, d, &va))
        })
        .collect();
    Ok(Prepared {
        full: CellTable::build(index, d, rows),
        inner,
    })
}

/// Grid point with the lowest mean inner validation loss; the earliest
/// point wins ties and NaN losses never win.
fn select(d: &Dataset, prep: &Prepared, task: Task, grid: &[Hyperparams]) -> Result<Hyperparams> {
    let losses = grid
        .par_iter()
        .map(|hp| {
            let mut total = 0.0;
            for (tr, va) in &prep.inner {
                let tree = fit_on_table(d, tr, task, hp)?;
                total += validation_loss(&tree, va);
            }
            Ok(total / prep.inner.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &l) in losses.iter().enumerate() {
        if l < losses[best] || (losses[best].is_nan() && !l.is_nan()) {
            best = i;
        }
    }
    Ok(grid[best])
}

fn constant_policy(d: &Dataset, kind: PolicyKind) -> Policy {
    Policy {
        format_version: policy::POLICY_FORMAT_VERSION,
        arm_count: d.arm_count(),
        schema_hash: d.schema_hash(),
        kind,
        provenance: Provenance::default(),
    }
}

/// Fits `approach` on the prepared split with inner-CV-selected
/// hyperparameters.
fn fit_approach(d: &Dataset, prep: &Prepared, approach: Approach, grid: &[Hyperparams]) -> Result<Policy> {
    let fit = |task: Task| -> Result<_> {
        let hp = select(d, prep, task, grid)?;
        fit_on_table(d, &prep.full, task, &hp)
    };
    match approach {
        Approach::Op => policy::op_policy(fit(Task::Outcome)?),
        Approach::Tp => policy::tp_policy(fit(Task::Assignment)?),
        Approach::Cp => {
            let trees = (1..d.arm_count())
                .into_par_iter()
                .map(|arm| fit(Task::Effect { arm }))
                .collect::<Result<Vec<_>>>()?;
            policy::cp_policy(trees)
        }
        Approach::BestOnAverage => {
            let totals = prep.full.arm_totals();
            let mut means = Vec::with_capacity(totals.len());
            for (arm, (n, s)) in totals.into_iter().enumerate() {
                if n == 0.0 {
                    return Err(Error::EmptyArm { arm });
                }
                means.push(s / n);
            }
            Ok(constant_policy(
                d,
                PolicyKind::BestOnAverage {
                    arm: argmax_lowest(&means),
                },
            ))
        }
        Approach::Control => Ok(constant_policy(d, PolicyKind::Constant { arm: 0 })),
    }
}

/// All metrics of `policy` on `test`.
pub fn evaluate_policy(
    policy: &Policy,
    test: &Dataset,
    truth: Option<&SyntheticTruth>,
) -> Result<FoldMetrics> {
    let assignments = assignment_vector(policy, test);
    let shares = assignment_shares(&assignments, test.arm_count());
    let learned = !policy.trees().is_empty();
    Ok(FoldMetrics {
        fold: 0,
        train_rows: 0,
        test_rows: test.n_rows(),
        hyperparams: policy.provenance.hyperparams.clone(),
        ips_value: ips_from_assignments(test, &assignments),
        lift_vs_control: lift_from_assignments(test, &assignments)?,
        wmr: wmr_from_assignments(test, &assignments),
        entropy_bits: entropy_bits(&shares),
        shares,
        mse_outcome: learned.then(|| mse_outcome(policy, test)).transpose()?,
        mse_effect_proxy: learned.then(|| mse_effect_proxy(policy, test)).transpose()?,
        mse_effect_exact: match truth {
            Some(t) if learned => Some(mse_effect_exact(policy, test, t)?),
            _ => None,
        },
        regret: truth.map(|t| true_regret(policy, test, t)).transpose()?,
        true_value: truth.map(|t| true_policy_value(policy, test, t)).transpose()?,
    })
}

/// Nested cross-validation of one approach.
pub fn nested_cv(
    d: &Dataset,
    approach: Approach,
    cfg: &CvConfig,
    truth: Option<&SyntheticTruth>,
) -> Result<EvalReport> {
    Ok(nested_cv_many(d, &[approach], cfg, truth, None)?.remove(0))
}

/// Nested cross-validation of several approaches on shared fold plans. Each
/// report is identical to a separate [`nested_cv`] call. With `train_size`
/// set, every outer training split is first subsampled (arm-stratified) to
/// that many rows; sizes at or above the split size use the whole split.
pub fn nested_cv_many(
    d: &Dataset,
    approaches: &[Approach],
    cfg: &CvConfig,
    truth: Option<&SyntheticTruth>,
    train_size: Option<usize>,
) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    d.ensure_valid()?;
    if let Some(t) = truth {
        t.check_aligned(d)?;
    }
    if let Some(s) = train_size {
        if s > d.n_rows() {
            return Err(Error::SizeTooLarge {
                requested: s,
                available: d.n_rows(),
            });
        }
    }
    if approaches.contains(&Approach::Tp) {
        check_non_negative(d, None)?;
    }
    let grid = cfg.grid.points();
    let plan = make_folds(d, cfg.outer_folds, cfg.seed)?;
    let index = CellIndex::new(d);

    let per_fold: Vec<Vec<FoldMetrics>> = (0..cfg.outer_folds)
        .into_par_iter()
        .map(|f| -> Result<Vec<FoldMetrics>> {
            let mut train = plan.train_rows(f);
            if let Some(s) = train_size {
                if s < train.len() {
                    let seed = derive_seed(derive_seed(cfg.seed, s as u64), f as u64);
                    train = stratified_subsample(d, &train, s, seed)?;
                }
            }
            let test_rows = plan.test_rows(f);
            let test = d.subset(&test_rows);
            let test_truth = truth.map(|t| t.subset(&test_rows));
            let inner_seed = derive_seed(cfg.seed, 0x1000 + f as u64);
            let prep = prepare(&index, d, &train, cfg.inner_folds, inner_seed)?;
            approaches
                .iter()
                .map(|&a| {
                    let policy = fit_approach(d, &prep, a, &grid)?;
                    let mut m = evaluate_policy(&policy, &test, test_truth.as_ref())?;
                    m.fold = f;
                    m.train_rows = train.len();
                    Ok(m)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(approaches
        .iter()
        .enumerate()
        .map(|(ai, &a)| {
            let folds = per_fold.iter().map(|v| v[ai].clone()).collect();
            EvalReport::aggregate(a, d.arm_count(), cfg.inner_folds, cfg.seed, train_size, folds)
        })
        .collect())
}

/// Fits `approach` on all of `d` with hyperparameters chosen by
/// `cfg.inner_folds`-fold cross-validation.
pub fn train_policy(d: &Dataset, approach: Approach, cfg: &CvConfig) -> Result<Policy> {
    cfg.validate()?;
    d.ensure_valid()?;
    if approach == Approach::Tp {
        check_non_negative(d, None)?;
    }
    let index = CellIndex::new(d);
    let rows: Vec<usize> = (0..d.n_rows()).collect();
    let prep = prepare(&index, d, &rows, cfg.inner_folds, derive_seed(cfg.seed, 0x1000))?;
    let p = fit_approach(d, &prep, approach, &cfg.grid.points())?;
    Ok(p.with_provenance(Some(d.content_hash()), Some(cfg.seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, scenario_preset};

    fn small_cfg(seed: u64) -> CvConfig {
        CvConfig {
            outer_folds: 3,
            inner_folds: 2,
            grid: Grid {
                max_depth: vec![0, 1, 2],
                min_samples_leaf: vec![1, 20],
                min_loss_reduction: vec![0.0],
            },
            seed,
        }
    }

    fn data(n: usize) -> (Dataset, SyntheticTruth) {
        let mut cfg = scenario_preset("effect-dominant").unwrap();
        cfg.n_rows = n;
        cfg.seed = 3;
        generate(&cfg).unwrap()
    }

    #[test]
    fn reports_are_deterministic_and_consistent() {
        let (d, t) = data(4000);
        let cfg = small_cfg(11);
        let all = [Approach::Op, Approach::Cp, Approach::Tp, Approach::BestOnAverage, Approach::Control];
        let a = nested_cv_many(&d, &all, &cfg, Some(&t), None).unwrap();
        let b = nested_cv_many(&d, &all, &cfg, Some(&t), None).unwrap();
        assert_eq!(a, b);
        for (r, &ap) in a.iter().zip(&all) {
            assert_eq!(r.per_fold.len(), 3);
            assert_eq!(r, &nested_cv(&d, ap, &cfg, Some(&t)).unwrap());
            assert!(r.entropy_bits >= 0.0 && r.entropy_bits <= 2.0 + 1e-12);
            assert!(r.regret.unwrap() >= 0.0);
            assert_eq!(r.mse_outcome.is_some(), ap.is_learned());
        }
        let control = &a[4];
        assert!(control.per_fold.iter().all(|f| f.lift_vs_control == 0.0 && f.entropy_bits == 0.0));
    }

    #[test]
    fn full_size_subsample_is_plain_cv() {
        let (d, _) = data(1500);
        let cfg = small_cfg(5);
        let plain = nested_cv_many(&d, &[Approach::Tp], &cfg, None, None).unwrap();
        let full = nested_cv_many(&d, &[Approach::Tp], &cfg, None, Some(d.n_rows())).unwrap();
        assert_eq!(plain[0].per_fold, full[0].per_fold);
        assert!(matches!(
            nested_cv_many(&d, &[Approach::Tp], &cfg, None, Some(d.n_rows() + 1)),
            Err(Error::SizeTooLarge { .. })
        ));
    }

    #[test]
    fn single_grid_point_is_forced() {
        let (d, _) = data(1500);
        let hp = Hyperparams::new(2, 5, 0.0).unwrap();
        let cfg = CvConfig {
            grid: Grid::single(hp),
            ..small_cfg(1)
        };
        let r = nested_cv(&d, Approach::Cp, &cfg, None).unwrap();
        assert!(r.per_fold.iter().all(|f| f.hyperparams == vec![hp; 3]));
    }

    #[test]
    fn config_is_checked() {
        let (d, _) = data(500);
        let mut cfg = small_cfg(1);
        cfg.outer_folds = 1;
        assert!(matches!(nested_cv(&d, Approach::Op, &cfg, None), Err(Error::Config { .. })));
        let mut cfg = small_cfg(1);
        cfg.grid.max_depth.clear();
        assert!(matches!(nested_cv(&d, Approach::Op, &cfg, None), Err(Error::Config { .. })));
    }

    #[test]
    fn trained_policy_carries_provenance() {
        let (d, _) = data(1500);
        let p = train_policy(&d, Approach::Tp, &small_cfg(9)).unwrap();
        assert_eq!(p.provenance.seed, Some(9));
        assert_eq!(p.provenance.training_data_hash, Some(d.content_hash()));
        assert_eq!(p.provenance.hyperparams.len(), 1);
    }
}
