use super::table::{CellTable, Unit};
use super::Hyperparams;

/// Gains at or below this fraction of the parent loss count as zero.
const GAIN_REL_TOL: f64 = 1e-12;

/// Per-arm `[n, sum_y, sum_y2, sum_w]`.
pub(crate) type ArmStats = [f64; 4];

#[derive(Debug, Clone, Copy)]
pub(crate) enum SplitLoss {
    /// Squared error of `y` around the pooled node mean; treatment splittable.
    Outcome,
    /// Squared error of the transformed outcome of `arm` against control.
    Effect { arm: usize, p_star: f64 },
    /// Weighted misclassification: total weight minus the best arm's weight.
    Assignment,
}

impl SplitLoss {
    pub fn uses_arm(&self, arm: usize) -> bool {
        match self {
            SplitLoss::Effect { arm: j, .. } => arm == 0 || arm == *j,
            _ => true,
        }
    }

    pub fn splits_treatment(&self) -> bool {
        matches!(self, SplitLoss::Outcome)
    }

    pub fn rows(&self, s: &[ArmStats]) -> f64 {
        match self {
            SplitLoss::Effect { arm, .. } => s[0][0] + s[*arm][0],
            _ => s.iter().map(|a| a[0]).sum(),
        }
    }

    pub fn loss(&self, s: &[ArmStats]) -> f64 {
        match *self {
            SplitLoss::Outcome => {
                let (mut n, mut sy, mut sy2) = (0.0, 0.0, 0.0);
                for a in s {
                    n += a[0];
                    sy += a[1];
                    sy2 += a[2];
                }
                sse(n, sy, sy2)
            }
            SplitLoss::Effect { arm, p_star } => {
                let (c, t) = (&s[0], &s[arm]);
                let q = 1.0 - p_star;
                let n = c[0] + t[0];
                let sz = t[1] / p_star - c[1] / q;
                let sz2 = t[2] / (p_star * p_star) + c[2] / (q * q);
                sse(n, sz, sz2)
            }
            SplitLoss::Assignment => {
                let mut total = 0.0;
                let mut best = f64::NEG_INFINITY;
                for a in s {
                    total += a[3];
                    best = best.max(a[3]);
                }
                (total - best).max(0.0)
            }
        }
    }
}

fn sse(n: f64, s: f64, s2: f64) -> f64 {
    if n > 0.0 {
        (s2 - s * s / n).max(0.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum GrowNode {
    Split {
        feature: usize,
        category: u32,
        left: usize,
        right: usize,
    },
    Leaf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BestSplit {
    pub feature: usize,
    pub category: u32,
    pub gain: f64,
}

pub(crate) struct Grower<'t, 'a> {
    pub table: &'t CellTable<'a>,
    pub loss: SplitLoss,
    pub hp: Hyperparams,
    pub cardinalities: &'t [u32],
}

impl Grower<'_, '_> {
    fn arm_count(&self) -> usize {
        self.table.arm_count
    }

    /// Candidate features with their cardinality; the treatment
    /// pseudo-feature comes last.
    fn candidate_cards(&self) -> Vec<usize> {
        let mut cards: Vec<usize> = self.cardinalities.iter().map(|&c| c as usize).collect();
        if self.loss.splits_treatment() {
            cards.push(self.arm_count());
        }
        cards
    }

    #[inline]
    fn value(&self, u: &Unit, feature: usize) -> u32 {
        if feature == self.cardinalities.len() {
            u.arm
        } else {
            self.table.index.code(u.cell, feature)
        }
    }

    fn node_stats(&self, units: &[u32]) -> Vec<ArmStats> {
        let mut s = vec![[0.0; 4]; self.arm_count()];
        for &ui in units {
            let u = &self.table.units[ui as usize];
            let a = &mut s[u.arm as usize];
            a[0] += u.n;
            a[1] += u.sum_y;
            a[2] += u.sum_y2;
            a[3] += u.sum_w;
        }
        s
    }

    /// Highest-gain `(feature, category)` split of `units`, scanning features
    /// then categories in ascending order so the lowest pair wins ties.
    pub fn best_split(&self, units: &[u32], parent_loss: f64) -> Option<BestSplit> {
        let k = self.arm_count();
        let cards = self.candidate_cards();
        let msl = self.hp.min_samples_leaf as f64;
        let mut best: Option<BestSplit> = None;
        let mut right = vec![[0.0; 4]; k];
        for (f, &card) in cards.iter().enumerate() {
            let mut hist = vec![[0.0f64; 4]; card * k];
            for &ui in units {
                let u = &self.table.units[ui as usize];
                let slot = &mut hist[self.value(u, f) as usize * k + u.arm as usize];
                slot[0] += u.n;
                slot[1] += u.sum_y;
                slot[2] += u.sum_y2;
                slot[3] += u.sum_w;
            }
            for c in 0..card {
                let left = &hist[c * k..(c + 1) * k];
                if self.loss.rows(left) < msl {
                    continue;
                }
                right.iter_mut().for_each(|r| *r = [0.0; 4]);
                for other in (0..card).filter(|&o| o != c) {
                    for (r, h) in right.iter_mut().zip(&hist[other * k..(other + 1) * k]) {
                        for v in 0..4 {
                            r[v] += h[v];
                        }
                    }
                }
                if self.loss.rows(&right) < msl {
                    continue;
                }
                let gain = parent_loss - (self.loss.loss(left) + self.loss.loss(&right));
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature: f,
                        category: c as u32,
                        gain,
                    });
                }
            }
        }
        best
    }

    pub fn grow(&self) -> Vec<GrowNode> {
        let root: Vec<u32> = self
            .table
            .units
            .iter()
            .enumerate()
            .filter(|(_, u)| self.loss.uses_arm(u.arm as usize))
            .map(|(i, _)| i as u32)
            .collect();
        let mut nodes = Vec::new();
        self.grow_node(root, 0, &mut nodes);
        nodes
    }

    fn grow_node(&self, units: Vec<u32>, depth: usize, nodes: &mut Vec<GrowNode>) -> usize {
        let id = nodes.len();
        nodes.push(GrowNode::Leaf);
        if depth >= self.hp.max_depth {
            return id;
        }
        let parent_loss = self.loss.loss(&self.node_stats(&units));
        let Some(best) = self.best_split(&units, parent_loss) else {
            return id;
        };
        if !(best.gain > self.hp.min_loss_reduction && best.gain > GAIN_REL_TOL * parent_loss) {
            return id;
        }
        let (left, right): (Vec<u32>, Vec<u32>) = units.into_iter().partition(|&ui| {
            self.value(&self.table.units[ui as usize], best.feature) == best.category
        });
        let l = self.grow_node(left, depth + 1, nodes);
        let r = self.grow_node(right, depth + 1, nodes);
        nodes[id] = GrowNode::Split {
            feature: best.feature,
            category: best.category,
            left: l,
            right: r,
        };
        id
    }
}
