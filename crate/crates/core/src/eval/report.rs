use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::Hyperparams;

/// Policy-producing approaches compared by the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    Op,
    Cp,
    Tp,
    BestOnAverage,
    Control,
}

impl Approach {
    pub const LEARNED: [Approach; 3] = [Approach::Op, Approach::Cp, Approach::Tp];

    pub fn name(self) -> &'static str {
        match self {
            Approach::Op => "op",
            Approach::Cp => "cp",
            Approach::Tp => "tp",
            Approach::BestOnAverage => "best-on-average",
            Approach::Control => "control",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Approach::Op | Approach::Cp | Approach::Tp)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "op" => Ok(Approach::Op),
            "cp" => Ok(Approach::Cp),
            "tp" => Ok(Approach::Tp),
            "best-on-average" | "boa" => Ok(Approach::BestOnAverage),
            "control" => Ok(Approach::Control),
            other => Err(Error::Config {
                field: "approach".into(),
                reason: format!("unknown approach `{other}` (expected op, cp, tp, best-on-average or control)"),
            }),
        }
    }

    /// Comma-separated list, duplicates removed, order kept.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let a = Self::parse(part)?;
            if !out.contains(&a) {
                out.push(a);
            }
        }
        if out.is_empty() {
            return Err(Error::Config {
                field: "approach".into(),
                reason: "at least one approach is required".into(),
            });
        }
        Ok(out)
    }
}

impl std::fmt::Display for Approach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Metrics of one outer fold, measured on its test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Selected hyperparameters, one per tree (CP: arms `1..K` in order).
    pub hyperparams: Vec<Hyperparams>,
    pub ips_value: f64,
    pub lift_vs_control: f64,
    pub wmr: f64,
    pub entropy_bits: f64,
    pub shares: Vec<f64>,
    pub mse_outcome: Option<f64>,
    pub mse_effect_proxy: Option<f64>,
    /// Against the true effects; generated data only.
    pub mse_effect_exact: Option<f64>,
    pub regret: Option<f64>,
    pub true_value: Option<f64>,
}

/// Scalar metrics in report order.
pub const METRICS: [&str; 9] = [
    "ips_value",
    "lift_vs_control",
    "wmr",
    "entropy_bits",
    "mse_outcome",
    "mse_effect_proxy",
    "mse_effect_exact",
    "regret",
    "true_value",
];

impl FoldMetrics {
    pub fn get(&self, metric: &str) -> Option<f64> {
        match metric {
            "ips_value" => Some(self.ips_value),
            "lift_vs_control" => Some(self.lift_vs_control),
            "wmr" => Some(self.wmr),
            "entropy_bits" => Some(self.entropy_bits),
            "mse_outcome" => self.mse_outcome,
            "mse_effect_proxy" => self.mse_effect_proxy,
            "mse_effect_exact" => self.mse_effect_exact,
            "regret" => self.regret,
            "true_value" => self.true_value,
            _ => None,
        }
    }

    /// Present metrics as `(name, value)` pairs in [`METRICS`] order.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        METRICS
            .iter()
            .filter_map(|&m| self.get(m).map(|v| (m, v)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// `mean +- 1.96 sd / sqrt(n)` with the sample standard deviation.
pub fn ci95(values: &[f64]) -> Interval {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let half_width = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        1.96 * var.sqrt() / n.sqrt()
    } else {
        0.0
    };
    Interval {
        mean,
        half_width,
        lower: mean - half_width,
        upper: mean + half_width,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub approach: Approach,
    pub arm_count: usize,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    /// Training rows per outer fold when subsampled.
    pub train_size: Option<usize>,
    pub ips_value: f64,
    pub lift_vs_control: f64,
    pub wmr: f64,
    pub entropy_bits: f64,
    pub mse_outcome: Option<f64>,
    pub mse_effect_proxy: Option<f64>,
    pub mse_effect_exact: Option<f64>,
    pub regret: Option<f64>,
    /// Fold-averaged assignment shares per arm.
    pub shares: Vec<f64>,
    pub per_fold: Vec<FoldMetrics>,
    pub ci95: BTreeMap<String, Interval>,
}

impl EvalReport {
    pub(crate) fn aggregate(
        approach: Approach,
        arm_count: usize,
        inner_folds: usize,
        seed: u64,
        train_size: Option<usize>,
        per_fold: Vec<FoldMetrics>,
    ) -> Self {
        let mut ci = BTreeMap::new();
        for m in METRICS {
            let vals: Vec<f64> = per_fold.iter().filter_map(|f| f.get(m)).collect();
            if !vals.is_empty() && vals.len() == per_fold.len() {
                ci.insert(m.to_string(), ci95(&vals));
            }
        }
        let mean = |m: &str| ci.get(m).map(|i: &Interval| i.mean);
        let mut shares = vec![0.0; arm_count];
        for f in &per_fold {
            for (s, v) in shares.iter_mut().zip(&f.shares) {
                *s += v;
            }
        }
        shares.iter_mut().for_each(|s| *s /= per_fold.len() as f64);
        Self {
            approach,
            arm_count,
            outer_folds: per_fold.len(),
            inner_folds,
            seed,
            train_size,
            ips_value: mean("ips_value").unwrap_or(f64::NAN),
            lift_vs_control: mean("lift_vs_control").unwrap_or(f64::NAN),
            wmr: mean("wmr").unwrap_or(f64::NAN),
            entropy_bits: mean("entropy_bits").unwrap_or(f64::NAN),
            mse_outcome: mean("mse_outcome"),
            mse_effect_proxy: mean("mse_effect_proxy"),
            mse_effect_exact: mean("mse_effect_exact"),
            regret: mean("regret"),
            shares,
            per_fold,
            ci95: ci,
        }
    }

    pub fn interval(&self, metric: &str) -> Option<Interval> {
        self.ci95.get(metric).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per outer fold; absent metrics are empty cells.
    pub fn per_fold_csv(&self) -> String {
        let mut out = String::from("approach,fold,train_rows,test_rows");
        for m in METRICS {
            write!(out, ",{m}").unwrap();
        }
        for a in 0..self.arm_count {
            write!(out, ",share_{a}").unwrap();
        }
        out.push('\n');
        for f in &self.per_fold {
            write!(out, "{},{},{},{}", self.approach, f.fold, f.train_rows, f.test_rows).unwrap();
            for m in METRICS {
                match f.get(m) {
                    Some(v) => write!(out, ",{v}").unwrap(),
                    None => out.push(','),
                }
            }
            for s in &f.shares {
                write!(out, ",{s}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Table of average assignment shares and entropy, one row per report.
pub fn share_table_csv(reports: &[EvalReport]) -> String {
    let k = reports.first().map_or(0, |r| r.arm_count);
    let mut out = String::from("approach");
    for a in 0..k {
        write!(out, ",share_{a}").unwrap();
    }
    out.push_str(",entropy_bits\n");
    for r in reports {
        out.push_str(r.approach.name());
        for s in &r.shares {
            write!(out, ",{s}").unwrap();
        }
        writeln!(out, ",{}", r.entropy_bits).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_uses_sample_sd() {
        let i = ci95(&[1.0, 2.0, 3.0, 4.0]);
        let sd = (5.0f64 / 3.0).sqrt();
        assert_eq!(i.mean, 2.5);
        assert!((i.half_width - 1.96 * sd / 2.0).abs() < 1e-15);
        assert!(i.contains(2.5) && !i.contains(4.0));
        assert_eq!(ci95(&[7.0, 7.0]).half_width, 0.0);
    }

    #[test]
    fn approach_names_round_trip() {
        for a in [
            Approach::Op,
            Approach::Cp,
            Approach::Tp,
            Approach::BestOnAverage,
            Approach::Control,
        ] {
            assert_eq!(Approach::parse(a.name()).unwrap(), a);
        }
        assert_eq!(
            Approach::parse_list("op, tp,op").unwrap(),
            vec![Approach::Op, Approach::Tp]
        );
        assert!(Approach::parse("xx").is_err());
        assert!(Approach::parse_list(" ,").is_err());
    }
}
