//! Assignment policies built from fitted trees, plus the non-learned
//! baselines. Every policy is a total map from schema-conforming feature
//! vectors to arms, and every argmax breaks ties toward the lowest arm.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::tree::{DecisionTree, Hyperparams, Task};

pub const POLICY_FORMAT_VERSION: u32 = 1;

/// Index of the largest value; the lowest index wins ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Anything that maps a feature vector to an arm.
pub trait Assign: Sync {
    fn assign(&self, x: &[u32]) -> usize;
}

impl<F> Assign for F
where
    F: Fn(&[u32]) -> usize + Sync,
{
    fn assign(&self, x: &[u32]) -> usize {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyKind {
    /// `argmax_j mu(x, j)` from one outcome tree.
    Outcome { tree: DecisionTree },
    /// `argmax` over `[0, tau(x, 1), .., tau(x, K-1)]`; `trees[j - 1]` is
    /// the effect tree of arm `j`.
    CausalEffect { trees: Vec<DecisionTree> },
    /// Leaf argmax-weight arm of one assignment tree.
    Assignment { tree: DecisionTree },
    /// Constant arm with the highest training mean.
    BestOnAverage { arm: usize },
    Constant { arm: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub training_data_hash: Option<String>,
    /// One entry per tree, in model order.
    pub hyperparams: Vec<Hyperparams>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub format_version: u32,
    pub arm_count: usize,
    pub schema_hash: String,
    #[serde(flatten)]
    pub kind: PolicyKind,
    pub provenance: Provenance,
}

fn require_task(tree: &DecisionTree, task: Task) -> Result<()> {
    if tree.task != task {
        return Err(Error::TaskMismatch {
            expected: task.to_string(),
            found: tree.task.to_string(),
        });
    }
    Ok(())
}

fn tree_provenance(trees: &[&DecisionTree]) -> Provenance {
    Provenance {
        training_data_hash: None,
        hyperparams: trees.iter().map(|t| t.hyperparams).collect(),
        seed: None,
    }
}

pub fn op_policy(tree: DecisionTree) -> Result<Policy> {
    require_task(&tree, Task::Outcome)?;
    Ok(Policy {
        format_version: POLICY_FORMAT_VERSION,
        arm_count: tree.arm_count(),
        schema_hash: tree.schema_hash.clone(),
        provenance: tree_provenance(&[&tree]),
        kind: PolicyKind::Outcome { tree },
    })
}

/// Takes effect trees in any order; one is required for every treated arm.
pub fn cp_policy(trees: Vec<DecisionTree>) -> Result<Policy> {
    let Some(first) = trees.first() else {
        return Err(Error::MissingArmModel(1));
    };
    let k = first.arm_count();
    let hash = first.schema_hash.clone();
    let mut slots: Vec<Option<DecisionTree>> = vec![None; k - 1];
    for t in trees {
        let Task::Effect { arm } = t.task else {
            return Err(Error::TaskMismatch {
                expected: "effect".into(),
                found: t.task.to_string(),
            });
        };
        if t.schema_hash != hash {
            return Err(Error::SchemaHashMismatch {
                left: hash,
                right: t.schema_hash.clone(),
            });
        }
        if arm == 0 || arm >= k {
            return Err(Error::Config {
                field: "arm".into(),
                reason: format!("effect arm must lie in [1, {k})"),
            });
        }
        slots[arm - 1] = Some(t);
    }
    let mut ordered = Vec::with_capacity(k - 1);
    for (i, s) in slots.into_iter().enumerate() {
        ordered.push(s.ok_or(Error::MissingArmModel(i + 1))?);
    }
    let refs: Vec<&DecisionTree> = ordered.iter().collect();
    Ok(Policy {
        format_version: POLICY_FORMAT_VERSION,
        arm_count: k,
        schema_hash: hash,
        provenance: tree_provenance(&refs),
        kind: PolicyKind::CausalEffect { trees: ordered },
    })
}

pub fn tp_policy(tree: DecisionTree) -> Result<Policy> {
    require_task(&tree, Task::Assignment)?;
    Ok(Policy {
        format_version: POLICY_FORMAT_VERSION,
        arm_count: tree.arm_count(),
        schema_hash: tree.schema_hash.clone(),
        provenance: tree_provenance(&[&tree]),
        kind: PolicyKind::Assignment { tree },
    })
}

/// Constant policy at the arm with the highest sample mean outcome.
pub fn best_on_average(d: &Dataset) -> Result<Policy> {
    let means = d
        .arm_means()
        .into_iter()
        .enumerate()
        .map(|(arm, m)| m.ok_or(Error::EmptyArm { arm }))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Policy {
        format_version: POLICY_FORMAT_VERSION,
        arm_count: d.arm_count(),
        schema_hash: d.schema_hash(),
        kind: PolicyKind::BestOnAverage {
            arm: argmax_lowest(&means),
        },
        provenance: Provenance {
            training_data_hash: Some(d.content_hash()),
            ..Provenance::default()
        },
    })
}

pub fn constant(d: &Dataset, arm: usize) -> Result<Policy> {
    if arm >= d.arm_count() {
        return Err(Error::Config {
            field: "arm".into(),
            reason: format!("arm must lie in [0, {})", d.arm_count()),
        });
    }
    Ok(Policy {
        format_version: POLICY_FORMAT_VERSION,
        arm_count: d.arm_count(),
        schema_hash: d.schema_hash(),
        kind: PolicyKind::Constant { arm },
        provenance: Provenance::default(),
    })
}

impl Policy {
    pub fn with_provenance(mut self, training_data_hash: Option<String>, seed: Option<u64>) -> Self {
        self.provenance.training_data_hash = training_data_hash;
        self.provenance.seed = seed;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PolicyKind::Outcome { .. } => "op",
            PolicyKind::CausalEffect { .. } => "cp",
            PolicyKind::Assignment { .. } => "tp",
            PolicyKind::BestOnAverage { .. } => "best-on-average",
            PolicyKind::Constant { .. } => "constant",
        }
    }

    pub fn trees(&self) -> Vec<&DecisionTree> {
        match &self.kind {
            PolicyKind::Outcome { tree } | PolicyKind::Assignment { tree } => vec![tree],
            PolicyKind::CausalEffect { trees } => trees.iter().collect(),
            _ => Vec::new(),
        }
    }

    /// Candidate scores whose argmax is the assigned arm; `None` for
    /// constant policies.
    pub fn scores(&self, x: &[u32]) -> Option<Vec<f64>> {
        let k = self.arm_count;
        match &self.kind {
            PolicyKind::Outcome { tree } => Some((0..k).map(|j| tree.outcome_value(x, j)).collect()),
            PolicyKind::CausalEffect { trees } => {
                let mut s = Vec::with_capacity(k);
                s.push(0.0);
                s.extend(trees.iter().enumerate().map(|(i, t)| t.effect_value(x, i + 1)));
                Some(s)
            }
            PolicyKind::Assignment { tree } => Some(tree.leaf(x, 0).sum_w.clone()),
            _ => None,
        }
    }

    /// Arm for `x`; `x` must conform to the schema.
    pub fn apply(&self, x: &[u32]) -> usize {
        match &self.kind {
            PolicyKind::Assignment { tree } => tree.assigned_arm(x),
            PolicyKind::BestOnAverage { arm } | PolicyKind::Constant { arm } => *arm,
            _ => argmax_lowest(&self.scores(x).expect("learned policies have scores")),
        }
    }

    /// [`Policy::apply`] with a schema check on `x`.
    pub fn try_apply(&self, x: &[u32]) -> Result<usize> {
        if let Some(t) = self.trees().first() {
            t.schema.conforms(x)?;
        }
        Ok(self.apply(x))
    }

    /// Predicted `mu(x, arm)` under the outcome leaf function, whatever task
    /// the trees were grown for. For CP the control mean is averaged over
    /// the effect trees.
    pub fn predict_outcome(&self, x: &[u32], arm: usize) -> Option<f64> {
        match &self.kind {
            PolicyKind::Outcome { tree } | PolicyKind::Assignment { tree } => {
                Some(tree.outcome_value(x, arm))
            }
            PolicyKind::CausalEffect { trees } => Some(if arm == 0 {
                trees.iter().map(|t| t.outcome_value(x, 0)).sum::<f64>() / trees.len() as f64
            } else {
                trees[arm - 1].outcome_value(x, arm)
            }),
            _ => None,
        }
    }

    /// Predicted `tau(x, arm)` under the effect leaf function.
    pub fn predict_effect(&self, x: &[u32], arm: usize) -> Option<f64> {
        match &self.kind {
            PolicyKind::Outcome { tree } | PolicyKind::Assignment { tree } => {
                Some(tree.effect_value(x, arm))
            }
            PolicyKind::CausalEffect { trees } => Some(trees[arm - 1].effect_value(x, arm)),
            _ => None,
        }
    }

    pub fn check_dataset(&self, d: &Dataset) -> Result<()> {
        let h = d.schema_hash();
        if h != self.schema_hash {
            return Err(Error::SchemaHashMismatch {
                left: self.schema_hash.clone(),
                right: h,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        if p.format_version != POLICY_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported policy format version {}",
                p.format_version
            )));
        }
        for t in p.trees() {
            // Round-trip through the tree reader for its structural checks.
            DecisionTree::from_json(&serde_json::to_string(t)?)?;
            if t.schema_hash != p.schema_hash {
                return Err(Error::SchemaHashMismatch {
                    left: p.schema_hash.clone(),
                    right: t.schema_hash.clone(),
                });
            }
        }
        Ok(p)
    }
}

impl Assign for Policy {
    fn assign(&self, x: &[u32]) -> usize {
        self.apply(x)
    }
}

/// `policy(x_i)` for every row, in row order.
pub fn assignment_vector(policy: &impl Assign, d: &Dataset) -> Vec<u32> {
    let m = d.feature_count();
    (0..d.n_rows())
        .into_par_iter()
        .map_init(
            || vec![0u32; m],
            |x, i| {
                d.x_into(i, x);
                policy.assign(x) as u32
            },
        )
        .collect()
}

/// Writes `row,arm` lines with a header.
pub fn write_assignment_csv(assignments: &[u32], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "row,arm")?;
    for (i, a) in assignments.iter().enumerate() {
        writeln!(w, "{i},{a}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Schema;
    use crate::tree::{fit_assignment_tree, fit_causal_tree, fit_outcome_tree, LeafStats, Node};

    fn stub_tree(task: Task, arm_count: usize, leaf: LeafStats) -> DecisionTree {
        let schema = Schema::new(vec![2], arm_count).unwrap();
        let props = vec![1.0 / arm_count as f64; arm_count];
        DecisionTree {
            format_version: crate::tree::TREE_FORMAT_VERSION,
            task,
            trained_for: task,
            schema_hash: crate::dataset::schema_hash(&schema, &props),
            schema,
            propensities: props,
            hyperparams: Hyperparams::default(),
            training_fallback: vec![0.0; arm_count],
            nodes: vec![Node::Leaf { stats: leaf }],
        }
    }

    fn means_leaf(means: &[f64]) -> LeafStats {
        let mut s = LeafStats::empty(means.len());
        for (j, &m) in means.iter().enumerate() {
            s.n[j] = 1;
            s.sum_y[j] = m;
        }
        s
    }

    fn op_with_means(means: &[f64]) -> Policy {
        op_policy(stub_tree(Task::Outcome, means.len(), means_leaf(means))).unwrap()
    }

    fn cp_with_effects(effects: &[f64]) -> Policy {
        let k = effects.len() + 1;
        let trees = effects
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let mut s = means_leaf(&vec![0.0; k]);
                s.transformed = Some(crate::tree::TransformedStats {
                    arm: i + 1,
                    count: 1,
                    sum: e,
                    sum_sq: e * e,
                });
                stub_tree(Task::Effect { arm: i + 1 }, k, s)
            })
            .collect();
        cp_policy(trees).unwrap()
    }

    fn tp_with_weights(w: &[f64]) -> Policy {
        let mut s = LeafStats::empty(w.len());
        s.sum_w = w.to_vec();
        tp_policy(stub_tree(Task::Assignment, w.len(), s)).unwrap()
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax_lowest(&[0.0, 0.0]), 0);
        assert_eq!(argmax_lowest(&[-1.0]), 0);
    }

    #[test]
    fn outcome_policy_counterexample_scores() {
        assert_eq!(op_with_means(&[4.7, 0.3]).apply(&[0]), 0);
        assert_eq!(op_with_means(&[2.2, 2.8]).apply(&[0]), 1);
        assert_eq!(op_with_means(&[1.0, 1.0, 1.0]).apply(&[0]), 0);
    }

    #[test]
    fn causal_policy_uses_zero_control_candidate() {
        assert_eq!(cp_with_effects(&[3.7, -0.7]).apply(&[0]), 1);
        assert_eq!(cp_with_effects(&[1.2, 1.8]).apply(&[0]), 2);
        assert_eq!(cp_with_effects(&[-0.1, -2.0, -0.5]).apply(&[0]), 0);
        // Zero effect ties with control and loses to it.
        assert_eq!(cp_with_effects(&[0.0, -1.0]).apply(&[0]), 0);
    }

    #[test]
    fn assignment_policy_takes_weight_argmax() {
        assert_eq!(tp_with_weights(&[0.0, 10.0, 2.0, 2.0]).apply(&[1]), 1);
        assert_eq!(tp_with_weights(&[0.0; 4]).apply(&[1]), 0);
        assert_eq!(tp_with_weights(&[0.0, 7.0, 7.0, 3.0]).apply(&[1]), 1);
    }

    #[test]
    fn wrong_task_and_missing_arm_are_errors() {
        let t = stub_tree(Task::Assignment, 2, LeafStats::empty(2));
        assert!(matches!(op_policy(t.clone()), Err(Error::TaskMismatch { .. })));
        let e1 = stub_tree(Task::Effect { arm: 1 }, 3, LeafStats::empty(3));
        assert!(matches!(cp_policy(vec![e1]), Err(Error::MissingArmModel(2))));
        assert!(matches!(cp_policy(vec![]), Err(Error::MissingArmModel(1))));
    }

    fn four_arm(means: [f64; 4]) -> Dataset {
        let schema = Schema::new(vec![1], 4).unwrap();
        let mut t = Vec::new();
        let mut y = Vec::new();
        for (j, &m) in means.iter().enumerate() {
            t.extend([j as u32; 2]);
            y.extend([m - 0.5, m + 0.5]);
        }
        Dataset::from_columns(schema, vec![0.25; 4], vec![vec![0; 8]], t, y).unwrap()
    }

    #[test]
    fn best_on_average_picks_highest_mean() {
        let d = four_arm([2.0, 2.1, 1.9, 2.0]);
        let p = best_on_average(&d).unwrap();
        assert_eq!(p.kind, PolicyKind::BestOnAverage { arm: 1 });
        assert!(assignment_vector(&p, &d).iter().all(|&a| a == 1));
    }

    #[test]
    fn best_on_average_rejects_empty_arm() {
        let schema = Schema::new(vec![1], 2).unwrap();
        let d = Dataset::from_columns(schema, vec![0.5, 0.5], vec![vec![0, 0]], vec![0, 0], vec![1.0, 2.0])
            .unwrap();
        assert!(matches!(best_on_average(&d), Err(Error::EmptyArm { arm: 1 })));
    }

    fn toy() -> Dataset {
        let schema = Schema::new(vec![3, 2], 3).unwrap();
        let n = 60;
        let f0: Vec<u32> = (0..n).map(|i| (i % 3) as u32).collect();
        let f1: Vec<u32> = (0..n).map(|i| ((i / 3) % 2) as u32).collect();
        let t: Vec<u32> = (0..n).map(|i| ((i / 6) % 3) as u32).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| ((i * 7) % 5) as f64 + if t[i] as usize == i % 3 { 3.0 } else { 0.0 })
            .collect();
        Dataset::from_columns(schema, vec![0.5, 0.25, 0.25], vec![f0, f1], t, y).unwrap()
    }

    #[test]
    fn serialized_policies_reproduce_assignments() {
        let d = toy();
        let hp = Hyperparams::new(3, 1, 0.0).unwrap();
        let policies = vec![
            op_policy(fit_outcome_tree(&d, &hp).unwrap()).unwrap(),
            cp_policy(vec![
                fit_causal_tree(&d, 2, &hp).unwrap(),
                fit_causal_tree(&d, 1, &hp).unwrap(),
            ])
            .unwrap(),
            tp_policy(fit_assignment_tree(&d, &hp).unwrap()).unwrap(),
            best_on_average(&d).unwrap(),
            constant(&d, 2).unwrap(),
        ];
        for p in policies {
            let back = Policy::from_json(&p.to_json().unwrap()).unwrap();
            assert_eq!(back, p);
            assert_eq!(assignment_vector(&back, &d), assignment_vector(&p, &d));
            p.check_dataset(&d).unwrap();
        }
    }

    #[test]
    fn assignment_vector_matches_apply() {
        let d = toy();
        let p = tp_policy(fit_assignment_tree(&d, &Hyperparams::default()).unwrap()).unwrap();
        let v = assignment_vector(&p, &d);
        for i in 0..d.n_rows() {
            assert_eq!(v[i] as usize, p.apply(&d.x(i)));
        }
        assert_eq!(v, assignment_vector(&p, &d));
    }

    #[test]
    fn try_apply_checks_schema() {
        let p = op_with_means(&[1.0, 2.0]);
        assert!(p.try_apply(&[5]).is_err());
        assert!(p.try_apply(&[0, 0]).is_err());
        assert_eq!(p.try_apply(&[1]).unwrap(), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn argmax_is_scale_invariant(
                scores in prop::collection::vec(-100i32..100, 2..6),
                c in 1u32..1000,
            ) {
                let s: Vec<f64> = scores.iter().map(|&v| v as f64 / 8.0).collect();
                let scaled: Vec<f64> = s.iter().map(|v| v * (c as f64 / 16.0)).collect();
                prop_assert_eq!(argmax_lowest(&s), argmax_lowest(&scaled));
                prop_assert_eq!(op_with_means(&s).apply(&[0]), op_with_means(&scaled).apply(&[0]));
                let fx = &s[1..];
                let fy = &scaled[1..];
                prop_assert_eq!(cp_with_effects(fx).apply(&[0]), cp_with_effects(fy).apply(&[0]));
            }

            #[test]
            fn cp_chooses_control_iff_no_positive_effect(
                effects in prop::collection::vec(-50i32..50, 1..5),
            ) {
                let e: Vec<f64> = effects.iter().map(|&v| v as f64 / 4.0).collect();
                let arm = cp_with_effects(&e).apply(&[0]);
                let best = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(arm == 0, best <= 0.0);
            }
        }
    }
}
