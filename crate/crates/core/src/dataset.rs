//! Experiment logs: schema, observations and the columnar dataset.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance on the propensity table summing to one.
pub const PROPENSITY_SUM_TOL: f64 = 1e-9;

/// Categorical feature space plus the number of arms. Arm 0 is the control.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub cardinalities: Vec<u32>,
    pub arm_count: usize,
}

impl Schema {
    pub fn new(cardinalities: Vec<u32>, arm_count: usize) -> Result<Self> {
        let s = Self {
            cardinalities,
            arm_count,
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.arm_count < 2 {
            return Err(Error::Schema("arm count must be at least 2".into()));
        }
        if let Some(f) = self.cardinalities.iter().position(|&c| c == 0) {
            return Err(Error::Schema(format!("feature {f} has cardinality 0")));
        }
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        self.cardinalities.len()
    }

    /// Checks that `x` has one in-range code per feature.
    pub fn conforms(&self, x: &[u32]) -> Result<()> {
        if x.len() != self.cardinalities.len() {
            return Err(Error::FeatureMismatch(format!(
                "expected {} features, got {}",
                self.cardinalities.len(),
                x.len()
            )));
        }
        for (f, (&code, &card)) in x.iter().zip(&self.cardinalities).enumerate() {
            if code >= card {
                return Err(Error::FeatureMismatch(format!(
                    "feature {f} code {code} outside [0, {card})"
                )));
            }
        }
        Ok(())
    }
}

/// Short stable digest of a schema together with its design propensities.
/// Every serialized artifact carries it; mismatches are hard errors.
pub fn schema_hash(schema: &Schema, propensities: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update(b"tapol-schema-v1");
    h.update((schema.cardinalities.len() as u64).to_le_bytes());
    for c in &schema.cardinalities {
        h.update(c.to_le_bytes());
    }
    h.update((schema.arm_count as u64).to_le_bytes());
    for p in propensities {
        h.update(p.to_bits().to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// A single logged decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<u32>,
    pub t: usize,
    pub y: f64,
    pub p: f64,
}

/// One broken invariant. `row` is `None` for table-level rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub row: Option<usize>,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.row {
            Some(r) => write!(f, "row {r}: {}", self.rule),
            None => write!(f, "{}", self.rule),
        }
    }
}

/// Randomized-experiment log stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    propensities: Vec<f64>,
    features: Vec<Vec<u32>>,
    treatment: Vec<u32>,
    outcome: Vec<f64>,
    propensity: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from columns; each row's propensity is taken from
    /// the design table. Only structural problems (ragged columns, a
    /// treatment with no table entry) are errors here; everything else is
    /// reported by [`Dataset::validate`].
    pub fn from_columns(
        schema: Schema,
        propensities: Vec<f64>,
        features: Vec<Vec<u32>>,
        treatment: Vec<u32>,
        outcome: Vec<f64>,
    ) -> Result<Self> {
        let n = treatment.len();
        if features.len() != schema.feature_count() {
            return Err(Error::InvalidData(format!(
                "expected {} feature columns, got {}",
                schema.feature_count(),
                features.len()
            )));
        }
        if features.iter().any(|c| c.len() != n) || outcome.len() != n {
            return Err(Error::InvalidData("columns have different lengths".into()));
        }
        let propensity = treatment
            .iter()
            .map(|&t| propensities.get(t as usize).copied().unwrap_or(f64::NAN))
            .collect();
        Ok(Self {
            schema,
            propensities,
            features,
            treatment,
            outcome,
            propensity,
        })
    }

    /// Builds a dataset from row records, keeping each row's logged
    /// propensity as given so that [`Dataset::validate`] can report it.
    pub fn from_rows(schema: Schema, propensities: Vec<f64>, rows: &[Observation]) -> Result<Self> {
        let m = schema.feature_count();
        let mut features = vec![Vec::with_capacity(rows.len()); m];
        let mut treatment = Vec::with_capacity(rows.len());
        let mut outcome = Vec::with_capacity(rows.len());
        let mut propensity = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if r.x.len() != m {
                return Err(Error::InvalidData(format!(
                    "row {i}: expected {m} features, got {}",
                    r.x.len()
                )));
            }
            for (col, &code) in features.iter_mut().zip(&r.x) {
                col.push(code);
            }
            let t = u32::try_from(r.t)
                .map_err(|_| Error::InvalidData(format!("row {i}: treatment {} too large", r.t)))?;
            treatment.push(t);
            outcome.push(r.y);
            propensity.push(r.p);
        }
        Ok(Self {
            schema,
            propensities,
            features,
            treatment,
            outcome,
            propensity,
        })
    }

    /// Like [`Dataset::from_columns`] but rejects any invariant violation.
    pub fn new(
        schema: Schema,
        propensities: Vec<f64>,
        features: Vec<Vec<u32>>,
        treatment: Vec<u32>,
        outcome: Vec<f64>,
    ) -> Result<Self> {
        let d = Self::from_columns(schema, propensities, features, treatment, outcome)?;
        d.ensure_valid()?;
        Ok(d)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            return Ok(());
        }
        let shown: Vec<String> = v.iter().take(5).map(|v| v.to_string()).collect();
        let more = if v.len() > 5 {
            format!(" (and {} more)", v.len() - 5)
        } else {
            String::new()
        };
        Err(Error::InvalidData(format!("{}{more}", shown.join("; "))))
    }

    /// Every broken invariant, table-level first, then by row.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let table = |rule: &str| Violation {
            row: None,
            rule: rule.to_string(),
        };
        if self.schema.arm_count < 2 {
            out.push(table("arm count must be at least 2"));
        }
        if self.schema.cardinalities.contains(&0) {
            out.push(table("every feature cardinality must be at least 1"));
        }
        if self.propensities.len() != self.schema.arm_count {
            out.push(table("propensity table must have one entry per arm"));
        }
        if self.propensities.iter().any(|&p| !(p > 0.0)) {
            out.push(table("propensity table entries must be positive"));
        }
        let total: f64 = self.propensities.iter().sum();
        if !((total - 1.0).abs() <= PROPENSITY_SUM_TOL) {
            out.push(table("propensities must sum to 1"));
        }
        if self.n_rows() == 0 {
            out.push(table("dataset must contain at least one row"));
        }

        for i in 0..self.n_rows() {
            let row = |rule: &str| Violation {
                row: Some(i),
                rule: rule.to_string(),
            };
            for (f, col) in self.features.iter().enumerate() {
                if col[i] >= self.schema.cardinalities[f] {
                    out.push(row(&format!("feature {f} code out of range")));
                }
            }
            let t = self.treatment[i] as usize;
            if t >= self.schema.arm_count {
                out.push(row("treatment out of range"));
            }
            let y = self.outcome[i];
            if !y.is_finite() || y < 0.0 {
                out.push(row("outcome must be a non-negative finite number"));
            }
            let p = self.propensity[i];
            if !(p > 0.0) {
                out.push(row("propensity must be positive"));
            } else if p > 1.0 {
                out.push(row("propensity must not exceed 1"));
            } else if let Some(&design) = self.propensities.get(t) {
                if p != design {
                    out.push(row("propensity must equal the design propensity of its arm"));
                }
            }
        }
        out
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn arm_count(&self) -> usize {
        self.schema.arm_count
    }

    pub fn feature_count(&self) -> usize {
        self.schema.feature_count()
    }

    /// Design propensity of every arm.
    pub fn propensities(&self) -> &[f64] {
        &self.propensities
    }

    pub fn n_rows(&self) -> usize {
        self.treatment.len()
    }

    pub fn feature_column(&self, f: usize) -> &[u32] {
        &self.features[f]
    }

    pub fn feature_columns(&self) -> &[Vec<u32>] {
        &self.features
    }

    #[inline]
    pub fn code(&self, row: usize, feature: usize) -> u32 {
        self.features[feature][row]
    }

    pub fn treatments(&self) -> &[u32] {
        &self.treatment
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcome
    }

    pub fn row_propensities(&self) -> &[f64] {
        &self.propensity
    }

    #[inline]
    pub fn treatment(&self, row: usize) -> usize {
        self.treatment[row] as usize
    }

    #[inline]
    pub fn outcome(&self, row: usize) -> f64 {
        self.outcome[row]
    }

    #[inline]
    pub fn propensity(&self, row: usize) -> f64 {
        self.propensity[row]
    }

    /// Feature vector of one row.
    pub fn x(&self, row: usize) -> Vec<u32> {
        self.features.iter().map(|c| c[row]).collect()
    }

    pub fn x_into(&self, row: usize, buf: &mut [u32]) {
        for (b, c) in buf.iter_mut().zip(&self.features) {
            *b = c[row];
        }
    }

    pub fn observation(&self, row: usize) -> Observation {
        Observation {
            x: self.x(row),
            t: self.treatment(row),
            y: self.outcome(row),
            p: self.propensity(row),
        }
    }

    /// Row indices grouped by logged arm, ascending within each arm.
    pub fn rows_by_arm(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.arm_count()];
        for (i, &t) in self.treatment.iter().enumerate() {
            if let Some(v) = out.get_mut(t as usize) {
                v.push(i);
            }
        }
        out
    }

    pub fn arm_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.arm_count()];
        for &t in &self.treatment {
            if let Some(c) = out.get_mut(t as usize) {
                *c += 1;
            }
        }
        out
    }

    /// Sample mean outcome per arm (`None` for arms with no rows).
    pub fn arm_means(&self) -> Vec<Option<f64>> {
        let mut sum = vec![0.0; self.arm_count()];
        let mut cnt = vec![0usize; self.arm_count()];
        for (&t, &y) in self.treatment.iter().zip(&self.outcome) {
            sum[t as usize] += y;
            cnt[t as usize] += 1;
        }
        sum.iter()
            .zip(&cnt)
            .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
            .collect()
    }

    /// New dataset holding the given rows in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            propensities: self.propensities.clone(),
            features: self
                .features
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            treatment: rows.iter().map(|&i| self.treatment[i]).collect(),
            outcome: rows.iter().map(|&i| self.outcome[i]).collect(),
            propensity: rows.iter().map(|&i| self.propensity[i]).collect(),
        }
    }

    /// Same rows with every outcome replaced by `f(y)`.
    pub fn map_outcomes(&self, f: impl Fn(f64) -> f64) -> Dataset {
        let mut d = self.clone();
        d.outcome.iter_mut().for_each(|y| *y = f(*y));
        d
    }

    pub fn schema_hash(&self) -> String {
        schema_hash(&self.schema, &self.propensities)
    }

    /// SHA-256 over the canonical binary encoding, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        crate::io::write_binary_to(self, &mut HashWriter(&mut h)).expect("hashing cannot fail");
        hex::encode(h.finalize())
    }
}

struct HashWriter<'a>(&'a mut Sha256);

impl std::io::Write for HashWriter<'_> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_arm() -> Dataset {
        let schema = Schema::new(vec![2, 3], 4).unwrap();
        let props = vec![0.4, 0.2, 0.2, 0.2];
        Dataset::new(
            schema,
            props,
            vec![vec![0, 1, 0, 1], vec![2, 1, 0, 0]],
            vec![0, 1, 2, 3],
            vec![1.0, 0.0, 3.5, 2.0],
        )
        .unwrap()
    }

    #[test]
    fn well_formed_dataset_has_no_violations() {
        assert!(four_arm().validate().is_empty());
    }

    #[test]
    fn zero_propensity_row_is_one_violation() {
        let schema = Schema::new(vec![2], 2).unwrap();
        let rows = vec![
            Observation { x: vec![0], t: 0, y: 1.0, p: 0.5 },
            Observation { x: vec![1], t: 1, y: 1.0, p: 0.0 },
        ];
        let d = Dataset::from_rows(schema, vec![0.5, 0.5], &rows).unwrap();
        let v = d.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].row, Some(1));
        assert_eq!(v[0].rule, "propensity must be positive");
    }

    #[test]
    fn propensity_table_not_summing_to_one() {
        let schema = Schema::new(vec![2], 2).unwrap();
        let d = Dataset::from_columns(schema, vec![0.9, 0.2], vec![vec![0, 1]], vec![0, 1], vec![1.0, 2.0])
            .unwrap();
        let v = d.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].row, None);
        assert_eq!(v[0].rule, "propensities must sum to 1");
    }

    #[test]
    fn row_rules_are_reported_with_index() {
        let schema = Schema::new(vec![2], 2).unwrap();
        let rows = vec![
            Observation { x: vec![5], t: 0, y: 1.0, p: 0.5 },
            Observation { x: vec![1], t: 7, y: -1.0, p: 0.5 },
        ];
        let d = Dataset::from_rows(schema, vec![0.5, 0.5], &rows).unwrap();
        let v = d.validate();
        assert_eq!(v[0].row, Some(0));
        assert!(v.iter().any(|v| v.row == Some(1) && v.rule == "treatment out of range"));
        assert!(v.iter().any(|v| v.row == Some(1) && v.rule.starts_with("outcome")));
    }

    #[test]
    fn schema_rejects_single_arm() {
        assert!(Schema::new(vec![2], 1).is_err());
        assert!(Schema::new(vec![0], 2).is_err());
    }

    #[test]
    fn subset_and_hashes() {
        let d = four_arm();
        let s = d.subset(&[3, 1]);
        assert_eq!(s.treatments(), &[3, 1]);
        assert_eq!(s.x(0), vec![1, 0]);
        assert_eq!(s.schema_hash(), d.schema_hash());
        assert_ne!(s.content_hash(), d.content_hash());
        assert_eq!(d.content_hash(), d.clone().content_hash());
    }

    #[test]
    fn arm_means_skip_empty_arms() {
        let schema = Schema::new(vec![1], 3).unwrap();
        let d = Dataset::from_columns(schema, vec![0.5, 0.25, 0.25], vec![vec![0; 3]], vec![0, 0, 2], vec![1.0, 3.0, 4.0])
            .unwrap();
        assert_eq!(d.arm_means(), vec![Some(2.0), None, Some(4.0)]);
    }
}
