use super::grow::{GrowNode, Grower, SplitLoss};
use super::table::{CellIndex, CellTable};
use super::{DecisionTree, Hyperparams, LeafStats, Node, Task, TransformedStats, TREE_FORMAT_VERSION};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Rows of arms `{0, arm}` with the target `y (1{t=arm} - p) / (p (1 - p))`,
/// where `p = P(arm) / (P(arm) + P(0))` is the propensity renormalized to
/// the two arms. Its conditional mean given `x` is the effect of `arm`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedOutcome {
    pub arm: usize,
    pub p_star: f64,
    pub rows: Vec<usize>,
    pub target: Vec<f64>,
}

pub(crate) fn renormalized_propensity(propensities: &[f64], arm: usize) -> f64 {
    propensities[arm] / (propensities[arm] + propensities[0])
}

fn check_effect_arm(d: &Dataset, arm: usize) -> Result<()> {
    if arm == 0 || arm >= d.arm_count() {
        return Err(Error::Config {
            field: "arm".into(),
            reason: format!("effect arm must lie in [1, {})", d.arm_count()),
        });
    }
    let counts = d.arm_counts();
    for a in [0, arm] {
        if counts[a] == 0 {
            return Err(Error::EmptyArm { arm: a });
        }
    }
    Ok(())
}

pub fn transform_outcome(d: &Dataset, arm: usize) -> Result<TransformedOutcome> {
    check_effect_arm(d, arm)?;
    let p = renormalized_propensity(d.propensities(), arm);
    let mut rows = Vec::new();
    let mut target = Vec::new();
    for i in 0..d.n_rows() {
        let t = d.treatment(i);
        if t == arm {
            rows.push(i);
            target.push(d.outcome(i) / p);
        } else if t == 0 {
            rows.push(i);
            target.push(-d.outcome(i) / (1.0 - p));
        }
    }
    Ok(TransformedOutcome {
        arm,
        p_star: p,
        rows,
        target,
    })
}

fn all_rows(d: &Dataset) -> Vec<usize> {
    (0..d.n_rows()).collect()
}

/// Regression tree on `y` with the treatment as an extra feature.
pub fn fit_outcome_tree(d: &Dataset, hp: &Hyperparams) -> Result<DecisionTree> {
    let index = CellIndex::new(d);
    let table = CellTable::build(&index, d, &all_rows(d));
    fit_on_table(d, &table, Task::Outcome, hp)
}

/// Regression tree on the transformed outcome of `arm` against control.
pub fn fit_causal_tree(d: &Dataset, arm: usize, hp: &Hyperparams) -> Result<DecisionTree> {
    check_effect_arm(d, arm)?;
    let index = CellIndex::new(d);
    let table = CellTable::build(&index, d, &all_rows(d));
    fit_on_table(d, &table, Task::Effect { arm }, hp)
}

/// Classification tree on the logged arm with weights `y / P(t)`.
pub fn fit_assignment_tree(d: &Dataset, hp: &Hyperparams) -> Result<DecisionTree> {
    check_non_negative(d, None)?;
    let index = CellIndex::new(d);
    let table = CellTable::build(&index, d, &all_rows(d));
    fit_on_table(d, &table, Task::Assignment, hp)
}

pub(crate) fn check_non_negative(d: &Dataset, rows: Option<&[usize]>) -> Result<()> {
    let bad = |i: usize| d.outcome(i) < 0.0;
    let found = match rows {
        Some(r) => r.iter().copied().find(|&i| bad(i)),
        None => (0..d.n_rows()).find(|&i| bad(i)),
    };
    match found {
        Some(row) => Err(Error::NegativeOutcome {
            row,
            value: d.outcome(row),
        }),
        None => Ok(()),
    }
}

/// Grows a tree for `task` on precomputed unit statistics. `d` supplies the
/// schema and design propensities; `table` must have been built from it.
/// Assignment trees additionally need non-negative outcomes, which callers
/// check on the rows.
pub fn fit_on_table(d: &Dataset, table: &CellTable, task: Task, hp: &Hyperparams) -> Result<DecisionTree> {
    hp.check()?;
    let k = d.arm_count();
    let loss = match task {
        Task::Outcome => SplitLoss::Outcome,
        Task::Effect { arm } => {
            if arm == 0 || arm >= k {
                return Err(Error::Config {
                    field: "arm".into(),
                    reason: format!("effect arm must lie in [1, {k})"),
                });
            }
            SplitLoss::Effect {
                arm,
                p_star: renormalized_propensity(d.propensities(), arm),
            }
        }
        Task::Assignment => SplitLoss::Assignment,
    };
    let grower = Grower {
        table,
        loss,
        hp: *hp,
        cardinalities: &d.schema().cardinalities,
    };
    let shape = grower.grow();

    let mut fallback = vec![0.0; k];
    for (a, (n, s)) in table.arm_totals().into_iter().enumerate() {
        if n > 0.0 {
            fallback[a] = s / n;
        }
    }

    let mut nodes: Vec<Node> = shape
        .iter()
        .map(|g| match *g {
            GrowNode::Split {
                feature,
                category,
                left,
                right,
            } => Node::Split {
                feature,
                category,
                left,
                right,
            },
            GrowNode::Leaf => Node::Leaf {
                stats: LeafStats::empty(k),
            },
        })
        .collect();

    let mut tree = DecisionTree {
        format_version: TREE_FORMAT_VERSION,
        task,
        trained_for: task,
        schema: d.schema().clone(),
        propensities: d.propensities().to_vec(),
        schema_hash: d.schema_hash(),
        hyperparams: *hp,
        training_fallback: fallback,
        nodes: Vec::new(),
    };

    // Route every training unit, all arms included, to its leaf.
    let mut leaf_of = Vec::with_capacity(table.units.len());
    {
        tree.nodes = nodes.clone();
        for u in &table.units {
            leaf_of.push(tree.leaf_index_by(|f| table.index.code(u.cell, f), u.arm as usize));
        }
    }
    for (u, &leaf) in table.units.iter().zip(&leaf_of) {
        let Node::Leaf { stats } = &mut nodes[leaf] else {
            unreachable!("routing ends at a leaf")
        };
        let a = u.arm as usize;
        stats.n[a] += u.n as u64;
        stats.sum_y[a] += u.sum_y;
        stats.sum_y2[a] += u.sum_y2;
        stats.sum_w[a] += u.sum_w;
    }
    if let SplitLoss::Effect { arm, p_star } = loss {
        let q = 1.0 - p_star;
        for node in nodes.iter_mut() {
            if let Node::Leaf { stats } = node {
                stats.transformed = Some(TransformedStats {
                    arm,
                    count: stats.n[0] + stats.n[arm],
                    sum: stats.sum_y[arm] / p_star - stats.sum_y[0] / q,
                    sum_sq: stats.sum_y2[arm] / (p_star * p_star) + stats.sum_y2[0] / (q * q),
                });
            }
        }
    }
    tree.nodes = nodes;
    Ok(tree)
}

/// Mean validation loss of a tree on its own task, computed from unit
/// statistics: squared error for outcome trees, transformed-outcome squared
/// error for effect trees, weighted misclassification for assignment trees.
pub fn validation_loss(tree: &DecisionTree, table: &CellTable) -> f64 {
    let index = table.index;
    let code = move |cell: u32| move |f: usize| index.code(cell, f);
    match tree.task {
        Task::Outcome => {
            let (mut total, mut n) = (0.0, 0.0);
            for u in &table.units {
                let mu = tree.outcome_value_by(code(u.cell), u.arm as usize);
                total += u.sum_y2 - 2.0 * mu * u.sum_y + u.n * mu * mu;
                n += u.n;
            }
            total / n
        }
        Task::Effect { arm } => {
            let p = renormalized_propensity(&tree.propensities, arm);
            let q = 1.0 - p;
            let (mut total, mut n) = (0.0, 0.0);
            for u in table
                .units
                .iter()
                .filter(|u| u.arm == 0 || u.arm as usize == arm)
            {
                let (sz, sz2) = if u.arm == 0 {
                    (-u.sum_y / q, u.sum_y2 / (q * q))
                } else {
                    (u.sum_y / p, u.sum_y2 / (p * p))
                };
                let tau = tree.effect_value_by(code(u.cell), arm);
                total += sz2 - 2.0 * tau * sz + u.n * tau * tau;
                n += u.n;
            }
            total / n
        }
        Task::Assignment => {
            let (mut total, mut n) = (0.0, 0.0);
            for u in &table.units {
                if tree.assigned_arm_by(code(u.cell)) != u.arm as usize {
                    total += u.sum_w;
                }
                n += u.n;
            }
            total / n
        }
    }
}
