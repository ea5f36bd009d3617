//! Sufficient statistics per (feature vector, arm).
//!
//! Every split loss and every leaf function used by the trees is a function
//! of per-arm counts and sums over the rows that reach a node. Rows sharing
//! a feature vector and an arm are therefore interchangeable, and training
//! runs over these "units" instead of raw rows.

use crate::dataset::Dataset;

/// Dense key tables are used while `product(cardinalities)` stays below this.
const DENSE_KEY_LIMIT: u64 = 1 << 22;
/// Dense accumulation is used while `cells * arms` stays below this.
const DENSE_STATS_LIMIT: usize = 1 << 18;

/// Maps every row of a dataset to the id of its distinct feature vector.
/// Cell ids follow the lexicographic order of the feature vectors.
#[derive(Debug, Clone)]
pub struct CellIndex {
    feature_count: usize,
    row_cell: Vec<u32>,
    /// Row-major `n_cells x feature_count` codes.
    codes: Vec<u32>,
}

impl CellIndex {
    pub fn new(d: &Dataset) -> Self {
        let m = d.feature_count();
        let n = d.n_rows();
        let product = d
            .schema()
            .cardinalities
            .iter()
            .try_fold(1u64, |acc, &c| acc.checked_mul(c as u64));
        match product {
            Some(p) if p <= DENSE_KEY_LIMIT => {
                let cards = &d.schema().cardinalities;
                let key = |i: usize| {
                    let mut k = 0u64;
                    for (f, &c) in cards.iter().enumerate() {
                        k = k * c as u64 + d.code(i, f) as u64;
                    }
                    k as usize
                };
                let mut present = vec![false; p as usize];
                for i in 0..n {
                    present[key(i)] = true;
                }
                let mut id_of = vec![u32::MAX; p as usize];
                let mut next = 0u32;
                let mut codes = Vec::new();
                for (k, _) in present.iter().enumerate().filter(|(_, &b)| b) {
                    id_of[k] = next;
                    next += 1;
                    let mut rem = k as u64;
                    let mut x = vec![0u32; m];
                    for f in (0..m).rev() {
                        let c = cards[f] as u64;
                        x[f] = (rem % c) as u32;
                        rem /= c;
                    }
                    codes.extend_from_slice(&x);
                }
                let row_cell = (0..n).map(|i| id_of[key(i)]).collect();
                Self {
                    feature_count: m,
                    row_cell,
                    codes,
                }
            }
            _ => {
                let mut order: Vec<usize> = (0..n).collect();
                let cmp = |a: &usize, b: &usize| {
                    (0..m)
                        .map(|f| d.code(*a, f).cmp(&d.code(*b, f)))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                };
                order.sort_by(cmp);
                let mut row_cell = vec![0u32; n];
                let mut codes = Vec::new();
                let mut next = 0u32;
                for (pos, &i) in order.iter().enumerate() {
                    if pos == 0 || cmp(&order[pos - 1], &i).is_ne() {
                        if pos > 0 {
                            next += 1;
                        }
                        codes.extend((0..m).map(|f| d.code(i, f)));
                    }
                    row_cell[i] = next;
                }
                Self {
                    feature_count: m,
                    row_cell,
                    codes,
                }
            }
        }
    }

    pub fn n_cells(&self) -> usize {
        if self.feature_count == 0 {
            return usize::from(!self.row_cell.is_empty());
        }
        self.codes.len() / self.feature_count
    }

    #[inline]
    pub fn cell_of(&self, row: usize) -> u32 {
        self.row_cell[row]
    }

    #[inline]
    pub fn cell_codes(&self, cell: u32) -> &[u32] {
        let m = self.feature_count;
        &self.codes[cell as usize * m..(cell as usize + 1) * m]
    }

    #[inline]
    pub fn code(&self, cell: u32, feature: usize) -> u32 {
        self.codes[cell as usize * self.feature_count + feature]
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }
}

/// Aggregate over all rows with one feature vector and one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub cell: u32,
    pub arm: u32,
    pub n: f64,
    pub sum_y: f64,
    pub sum_y2: f64,
    /// Sum of importance weights `y / P(t)`.
    pub sum_w: f64,
}

/// Units of a row subset, ordered by `(cell, arm)`. Sums accumulate in the
/// order rows were supplied.
#[derive(Debug, Clone)]
pub struct CellTable<'a> {
    pub index: &'a CellIndex,
    pub arm_count: usize,
    pub units: Vec<Unit>,
}

impl<'a> CellTable<'a> {
    pub fn build(index: &'a CellIndex, d: &Dataset, rows: &[usize]) -> Self {
        let dense = index.n_cells() * d.arm_count() <= DENSE_STATS_LIMIT;
        Self::build_with(index, d, rows, dense)
    }

    fn build_with(index: &'a CellIndex, d: &Dataset, rows: &[usize], dense: bool) -> Self {
        let k = d.arm_count();
        let n_cells = index.n_cells();
        let units = if dense {
            let mut acc = vec![[0.0f64; 4]; n_cells * k];
            for &i in rows {
                let slot = &mut acc[index.cell_of(i) as usize * k + d.treatment(i)];
                let y = d.outcome(i);
                slot[0] += 1.0;
                slot[1] += y;
                slot[2] += y * y;
                slot[3] += y / d.propensity(i);
            }
            acc.iter()
                .enumerate()
                .filter(|(_, s)| s[0] > 0.0)
                .map(|(key, s)| Unit {
                    cell: (key / k) as u32,
                    arm: (key % k) as u32,
                    n: s[0],
                    sum_y: s[1],
                    sum_y2: s[2],
                    sum_w: s[3],
                })
                .collect()
        } else {
            let mut keyed: Vec<(u64, u32)> = rows
                .iter()
                .enumerate()
                .map(|(pos, &i)| {
                    (
                        index.cell_of(i) as u64 * k as u64 + d.treatment(i) as u64,
                        pos as u32,
                    )
                })
                .collect();
            keyed.sort_unstable();
            let mut units: Vec<Unit> = Vec::new();
            let mut last = u64::MAX;
            for (key, pos) in keyed {
                let i = rows[pos as usize];
                if key != last {
                    units.push(Unit {
                        cell: (key / k as u64) as u32,
                        arm: (key % k as u64) as u32,
                        n: 0.0,
                        sum_y: 0.0,
                        sum_y2: 0.0,
                        sum_w: 0.0,
                    });
                    last = key;
                }
                let u = units.last_mut().unwrap();
                let y = d.outcome(i);
                u.n += 1.0;
                u.sum_y += y;
                u.sum_y2 += y * y;
                u.sum_w += y / d.propensity(i);
            }
            units
        };
        Self {
            index,
            arm_count: k,
            units,
        }
    }

    pub fn row_count(&self) -> f64 {
        self.units.iter().map(|u| u.n).sum()
    }

    /// Per-arm `(n, sum_y)`.
    pub fn arm_totals(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0); self.arm_count];
        for u in &self.units {
            out[u.arm as usize].0 += u.n;
            out[u.arm as usize].1 += u.sum_y;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Schema;

    fn data(cards: Vec<u32>) -> Dataset {
        let schema = Schema::new(cards, 2).unwrap();
        Dataset::from_columns(
            schema,
            vec![0.5, 0.5],
            vec![vec![1, 0, 1, 1, 0], vec![2, 2, 2, 0, 2]],
            vec![0, 1, 0, 1, 1],
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
        )
        .unwrap()
    }

    #[test]
    fn cells_are_lexicographic() {
        let d = data(vec![2, 3]);
        let idx = CellIndex::new(&d);
        assert_eq!(idx.n_cells(), 3);
        assert_eq!(idx.cell_codes(0), &[0, 2]);
        assert_eq!(idx.cell_codes(1), &[1, 0]);
        assert_eq!(idx.cell_codes(2), &[1, 2]);
        assert_eq!(idx.cell_of(0), 2);
        assert_eq!(idx.cell_of(3), 1);
    }

    #[test]
    fn dense_and_sorted_paths_agree() {
        // Cardinalities large enough to force the sort-based paths.
        let small = data(vec![2, 3]);
        let big = data(vec![1 << 12, 1 << 12]);
        let a = CellIndex::new(&small);
        let b = CellIndex::new(&big);
        assert_eq!(a.row_cell, b.row_cell);
        assert_eq!(a.codes, b.codes);
        let rows = [4, 0, 2, 1];
        let ta = CellTable::build_with(&a, &small, &rows, true);
        let tb = CellTable::build_with(&b, &big, &rows, false);
        assert_eq!(ta.units, tb.units);
        let u = ta.units.iter().find(|u| u.cell == 2 && u.arm == 0).unwrap();
        assert_eq!((u.n, u.sum_y, u.sum_y2, u.sum_w), (2.0, 4.0, 10.0, 8.0));
    }
}
