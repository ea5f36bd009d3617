//! Greedy binary decision trees over categorical features.
//!
//! One inducer serves three tasks that differ only in the split loss:
//! outcome regression (treatment is an extra splittable feature), effect
//! regression on the transformed outcome of one treated arm against control,
//! and importance-weighted classification of the arm. Every leaf keeps full
//! per-arm statistics, so the leaf prediction function can be switched to any
//! task after training without touching the structure.

mod fit;
mod grow;
pub mod table;

use serde::{Deserialize, Serialize};

pub use fit::{
    fit_assignment_tree, fit_causal_tree, fit_on_table, fit_outcome_tree, transform_outcome,
    validation_loss, TransformedOutcome,
};
pub(crate) use fit::{check_non_negative, renormalized_propensity};
pub use table::{CellIndex, CellTable, Unit};

use crate::dataset::Schema;
use crate::error::{Error, Result};
use crate::policy::argmax_lowest;

pub const TREE_FORMAT_VERSION: u32 = 1;

/// What the leaves predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    /// `mu(x, j)`: mean outcome of arm `j` among the leaf's rows.
    Outcome,
    /// `tau(x, arm)`: effect of `arm` over control.
    Effect { arm: usize },
    /// Arm with the largest importance-weight sum.
    Assignment,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Outcome => write!(f, "outcome"),
            Task::Effect { arm } => write!(f, "effect({arm})"),
            Task::Assignment => write!(f, "assignment"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_loss_reduction: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            max_depth: 4,
            min_samples_leaf: 1,
            min_loss_reduction: 0.0,
        }
    }
}

impl Hyperparams {
    pub fn new(max_depth: usize, min_samples_leaf: usize, min_loss_reduction: f64) -> Result<Self> {
        let hp = Self {
            max_depth,
            min_samples_leaf,
            min_loss_reduction,
        };
        hp.check()?;
        Ok(hp)
    }

    pub fn check(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::Config {
                field: "min_samples_leaf".into(),
                reason: "must be at least 1".into(),
            });
        }
        if !(self.min_loss_reduction >= 0.0 && self.min_loss_reduction.is_finite()) {
            return Err(Error::Config {
                field: "min_loss_reduction".into(),
                reason: "must be non-negative and finite".into(),
            });
        }
        Ok(())
    }
}

/// Transformed-outcome aggregates kept by effect trees for their own arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedStats {
    pub arm: usize,
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafStats {
    pub n: Vec<u64>,
    pub sum_y: Vec<f64>,
    pub sum_y2: Vec<f64>,
    /// Per-arm sum of `y / P(t)`.
    pub sum_w: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transformed: Option<TransformedStats>,
}

impl LeafStats {
    pub fn empty(arm_count: usize) -> Self {
        Self {
            n: vec![0; arm_count],
            sum_y: vec![0.0; arm_count],
            sum_y2: vec![0.0; arm_count],
            sum_w: vec![0.0; arm_count],
            transformed: None,
        }
    }

    pub fn rows(&self) -> u64 {
        self.n.iter().sum()
    }

    pub fn mean(&self, arm: usize) -> Option<f64> {
        (self.n[arm] > 0).then(|| self.sum_y[arm] / self.n[arm] as f64)
    }

    /// Arm with the largest weight sum, lowest index on ties.
    pub fn best_arm(&self) -> usize {
        argmax_lowest(&self.sum_w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] == category` go left. `feature ==
    /// feature_count` denotes the treatment pseudo-feature.
    Split {
        feature: usize,
        category: u32,
        left: usize,
        right: usize,
    },
    Leaf { stats: LeafStats },
}

/// Query for [`DecisionTree::predict`]; must match the tree's task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Query {
    Outcome { arm: usize },
    Effect { arm: usize },
    Assignment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Value(f64),
    Arm(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub format_version: u32,
    /// Leaf function currently in use.
    pub task: Task,
    /// Task the structure was grown for.
    pub trained_for: Task,
    pub schema: Schema,
    pub propensities: Vec<f64>,
    pub schema_hash: String,
    pub hyperparams: Hyperparams,
    /// Global per-arm training means, used where a leaf has no rows of an arm.
    pub training_fallback: Vec<f64>,
    /// Node 0 is the root; children are referenced by index.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn arm_count(&self) -> usize {
        self.schema.arm_count
    }

    pub fn feature_count(&self) -> usize {
        self.schema.feature_count()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn splits_on_treatment(&self) -> bool {
        let t = self.feature_count();
        self.nodes
            .iter()
            .any(|n| matches!(n, Node::Split { feature, .. } if *feature == t))
    }

    /// Leaf node index reached by features from `code` and treatment `arm`.
    #[inline]
    pub fn leaf_index_by(&self, code: impl Fn(usize) -> u32, arm: usize) -> usize {
        let t = self.feature_count();
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    category,
                    left,
                    right,
                } => {
                    let v = if *feature == t { arm as u32 } else { code(*feature) };
                    i = if v == *category { *left } else { *right };
                }
            }
        }
    }

    #[inline]
    pub fn leaf_index(&self, x: &[u32], arm: usize) -> usize {
        self.leaf_index_by(|f| x[f], arm)
    }

    #[inline]
    pub fn leaf_stats(&self, node: usize) -> &LeafStats {
        match &self.nodes[node] {
            Node::Leaf { stats } => stats,
            Node::Split { .. } => panic!("node {node} is not a leaf"),
        }
    }

    pub fn leaf(&self, x: &[u32], arm: usize) -> &LeafStats {
        self.leaf_stats(self.leaf_index(x, arm))
    }

    /// Outcome leaf function: mean of arm `arm` in the leaf reached with
    /// treatment `arm`, or the global training mean if the leaf has none.
    pub fn outcome_value_by(&self, code: impl Fn(usize) -> u32, arm: usize) -> f64 {
        self.leaf_stats(self.leaf_index_by(code, arm))
            .mean(arm)
            .unwrap_or(self.training_fallback[arm])
    }

    /// Effect leaf function: the transformed-outcome mean when the leaf
    /// carries it for `arm`, otherwise the difference of outcome means.
    pub fn effect_value_by(&self, code: impl Fn(usize) -> u32 + Copy, arm: usize) -> f64 {
        let leaf = self.leaf_stats(self.leaf_index_by(code, arm));
        if let Some(t) = &leaf.transformed {
            if t.arm == arm && t.count > 0 {
                return t.sum / t.count as f64;
            }
        }
        self.outcome_value_by(code, arm) - self.outcome_value_by(code, 0)
    }

    /// Assignment leaf function: the arm with the largest weight sum. When
    /// the path splits on treatment (outcome trees), arms land in different
    /// leaves and the arm with the largest outcome mean is used instead.
    pub fn assigned_arm_by(&self, code: impl Fn(usize) -> u32 + Copy) -> usize {
        let k = self.arm_count();
        let first = self.leaf_index_by(code, 0);
        if !self.splits_on_treatment() || (1..k).all(|j| self.leaf_index_by(code, j) == first) {
            return self.leaf_stats(first).best_arm();
        }
        let scores: Vec<f64> = (0..k).map(|j| self.outcome_value_by(code, j)).collect();
        argmax_lowest(&scores)
    }

    pub fn outcome_value(&self, x: &[u32], arm: usize) -> f64 {
        self.outcome_value_by(|f| x[f], arm)
    }

    pub fn effect_value(&self, x: &[u32], arm: usize) -> f64 {
        self.effect_value_by(|f| x[f], arm)
    }

    pub fn assigned_arm(&self, x: &[u32]) -> usize {
        self.assigned_arm_by(|f| x[f])
    }

    /// Prediction for `x` under the tree's current leaf function.
    pub fn predict(&self, x: &[u32], query: Query) -> Result<Prediction> {
        self.schema.conforms(x)?;
        let k = self.arm_count();
        let arm_ok = |arm: usize| {
            if arm < k {
                Ok(())
            } else {
                Err(Error::FeatureMismatch(format!("arm {arm} outside [0, {k})")))
            }
        };
        match (self.task, query) {
            (Task::Outcome, Query::Outcome { arm }) => {
                arm_ok(arm)?;
                Ok(Prediction::Value(self.outcome_value(x, arm)))
            }
            (Task::Effect { arm: own }, Query::Effect { arm }) if own == arm => {
                arm_ok(arm)?;
                Ok(Prediction::Value(self.effect_value(x, arm)))
            }
            (Task::Assignment, Query::Assignment) => Ok(Prediction::Arm(self.assigned_arm(x))),
            (task, q) => Err(Error::TaskMismatch {
                expected: match q {
                    Query::Outcome { .. } => "outcome".into(),
                    Query::Effect { arm } => format!("effect({arm})"),
                    Query::Assignment => "assignment".into(),
                },
                found: task.to_string(),
            }),
        }
    }

    /// Same structure and leaf statistics with another leaf function.
    pub fn swap_leaf_function(&self, task: Task) -> DecisionTree {
        DecisionTree {
            task,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s)?;
        if t.format_version != TREE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported tree format version {}",
                t.format_version
            )));
        }
        t.check_structure()?;
        Ok(t)
    }

    fn check_structure(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::Format("tree has no nodes".into()));
        }
        let k = self.arm_count();
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } => {
                    if *left <= i || *right <= i || *left >= n || *right >= n {
                        return Err(Error::Format(format!("node {i} has invalid children")));
                    }
                    if *feature > self.feature_count() {
                        return Err(Error::Format(format!("node {i} splits on unknown feature")));
                    }
                }
                Node::Leaf { stats } => {
                    if [stats.n.len(), stats.sum_y.len(), stats.sum_y2.len(), stats.sum_w.len()]
                        .iter()
                        .any(|&l| l != k)
                    {
                        return Err(Error::Format(format!("leaf {i} has wrong arm count")));
                    }
                }
            }
        }
        if self.training_fallback.len() != k {
            return Err(Error::Format("fallback has wrong arm count".into()));
        }
        Ok(())
    }
}

/// Free-function form of [`DecisionTree::swap_leaf_function`].
pub fn swap_leaf_function(tree: &DecisionTree, task: Task) -> DecisionTree {
    tree.swap_leaf_function(task)
}
