//! Learning curves: nested CV repeated at increasing training sizes.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{nested_cv_many, CvConfig};
use super::report::{Approach, EvalReport};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::synth::SyntheticTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub approach: Approach,
    pub size: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub sizes: Vec<usize>,
    /// Ordered by size, then by approach as requested.
    pub points: Vec<CurvePoint>,
}

/// `count` sizes spaced geometrically from `min` to `max`, rounded,
/// deduplicated and ascending.
pub fn geometric_sizes(min: usize, max: usize, count: usize) -> Vec<usize> {
    if count <= 1 || min >= max {
        return vec![max.max(min)];
    }
    let ratio = (max as f64 / min as f64).powf(1.0 / (count - 1) as f64);
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            if i == count - 1 {
                max
            } else {
                (min as f64 * ratio.powi(i as i32)).round() as usize
            }
        })
        .collect();
    out.dedup();
    out
}

/// Runs nested CV at every size for every approach; the best-on-average
/// baseline is always included.
pub fn learning_curve(
    d: &Dataset,
    approaches: &[Approach],
    sizes: &[usize],
    cfg: &CvConfig,
    truth: Option<&SyntheticTruth>,
) -> Result<LearningCurve> {
    if sizes.is_empty() {
        return Err(Error::Config {
            field: "sizes".into(),
            reason: "at least one training size is required".into(),
        });
    }
    for &s in sizes {
        if s == 0 {
            return Err(Error::Config {
                field: "sizes".into(),
                reason: "sizes must be positive".into(),
            });
        }
        if s > d.n_rows() {
            return Err(Error::SizeTooLarge {
                requested: s,
                available: d.n_rows(),
            });
        }
    }
    let mut all = approaches.to_vec();
    if !all.contains(&Approach::BestOnAverage) {
        all.push(Approach::BestOnAverage);
    }
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let per_size = sorted
        .par_iter()
        .map(|&s| nested_cv_many(d, &all, cfg, truth, Some(s)))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    for (&size, reports) in sorted.iter().zip(per_size) {
        for report in reports {
            points.push(CurvePoint {
                approach: report.approach,
                size,
                report,
            });
        }
    }
    Ok(LearningCurve {
        sizes: sorted,
        points,
    })
}

const PALETTE: [(Approach, &str); 5] = [
    (Approach::Op, "#1f77b4"),
    (Approach::Cp, "#ff7f0e"),
    (Approach::Tp, "#2ca02c"),
    (Approach::BestOnAverage, "#7f7f7f"),
    (Approach::Control, "#d62728"),
];

impl LearningCurve {
    pub fn approaches(&self) -> Vec<Approach> {
        let mut out = Vec::new();
        for p in &self.points {
            if !out.contains(&p.approach) {
                out.push(p.approach);
            }
        }
        out
    }

    pub fn point(&self, approach: Approach, size: usize) -> Option<&CurvePoint> {
        self.points
            .iter()
            .find(|p| p.approach == approach && p.size == size)
    }

    /// Long format: `approach,size,fold,metric,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("approach,size,fold,metric,value\n");
        for p in &self.points {
            for f in &p.report.per_fold {
                for (m, v) in f.values() {
                    writeln!(out, "{},{},{},{m},{v}", p.approach, p.size, f.fold).unwrap();
                }
            }
        }
        out
    }

    /// Static line chart of `metric` against training size (log scale) with
    /// shaded 95% intervals, one line per approach.
    pub fn to_svg(&self, metric: &str) -> String {
        let (w, h) = (760.0, 460.0);
        let (ml, mr, mt, mb) = (80.0, 190.0, 40.0, 60.0);
        let pw = w - ml - mr;
        let ph = h - mt - mb;

        let series: Vec<(Approach, Vec<(usize, f64, f64, f64)>)> = self
            .approaches()
            .into_iter()
            .map(|a| {
                let pts = self
                    .sizes
                    .iter()
                    .filter_map(|&s| {
                        let iv = self.point(a, s)?.report.interval(metric)?;
                        Some((s, iv.mean, iv.lower, iv.upper))
                    })
                    .collect();
                (a, pts)
            })
            .collect();

        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (_, pts) in &series {
            for &(_, _, l, u) in pts {
                lo = lo.min(l);
                hi = hi.max(u);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            (lo, hi) = (lo - 0.5, hi + 0.5);
        }
        let pad = 0.05 * (hi - lo);
        let (lo, hi) = (lo - pad, hi + pad);

        let xmin = (*self.sizes.first().unwrap_or(&1) as f64).max(1.0).log10();
        let xmax = (*self.sizes.last().unwrap_or(&1) as f64).max(1.0).log10();
        let xs = |s: usize| {
            if xmax > xmin {
                ml + pw * ((s as f64).log10() - xmin) / (xmax - xmin)
            } else {
                ml + pw / 2.0
            }
        };
        let ys = |v: f64| mt + ph * (1.0 - (v - lo) / (hi - lo));
        let percent = metric == "lift_vs_control";
        let label = |v: f64| {
            if percent {
                format!("{:.2}%", 100.0 * v)
            } else {
                format!("{v:.4}")
            }
        };

        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{metric} by training size (95% CI)</text>"#,
            ml + pw / 2.0
        )
        .unwrap();
        writeln!(
            s,
            r##"<rect x="{ml:.2}" y="{mt:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#333"/>"##
        )
        .unwrap();
        for i in 0..=5 {
            let v = lo + (hi - lo) * i as f64 / 5.0;
            let y = ys(v);
            writeln!(
                s,
                r##"<line x1="{ml:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                ml + pw,
                ml - 6.0,
                y + 4.0,
                label(v)
            )
            .unwrap();
        }
        if lo < 0.0 && hi > 0.0 {
            let y = ys(0.0);
            writeln!(
                s,
                r##"<line x1="{ml:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#333" stroke-dasharray="2,3"/>"##,
                ml + pw
            )
            .unwrap();
        }
        for &size in &self.sizes {
            let x = xs(size);
            writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{size}</text>"##,
                mt + ph,
                mt + ph + 5.0,
                mt + ph + 20.0
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">training rows per outer fold (log scale)</text>"#,
            ml + pw / 2.0,
            h - 15.0
        )
        .unwrap();

        for (k, (a, pts)) in series.iter().enumerate() {
            let color = PALETTE
                .iter()
                .find(|(p, _)| p == a)
                .map_or("#000000", |(_, c)| c);
            let dash = if a.is_learned() { "" } else { r#" stroke-dasharray="6,4""# };
            if pts.len() > 1 {
                let mut band = String::new();
                for &(sz, _, _, u) in pts {
                    write!(band, "{:.2},{:.2} ", xs(sz), ys(u)).unwrap();
                }
                for &(sz, _, l, _) in pts.iter().rev() {
                    write!(band, "{:.2},{:.2} ", xs(sz), ys(l)).unwrap();
                }
                writeln!(
                    s,
                    r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                    band.trim_end()
                )
                .unwrap();
                let line: Vec<String> = pts
                    .iter()
                    .map(|&(sz, m, _, _)| format!("{:.2},{:.2}", xs(sz), ys(m)))
                    .collect();
                writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
                    line.join(" ")
                )
                .unwrap();
            }
            for &(sz, m, l, u) in pts {
                let x = xs(sz);
                writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/><circle cx="{x:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    ys(l),
                    ys(u),
                    ys(m)
                )
                .unwrap();
            }
            let ly = mt + 10.0 + 22.0 * k as f64;
            let lx = ml + pw + 16.0;
            writeln!(
                s,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 24.0,
                lx + 30.0,
                ly + 4.0,
                a.name()
            )
            .unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::cv::Grid;
    use crate::synth::{generate, scenario_preset};

    #[test]
    fn geometric_schedule() {
        assert_eq!(geometric_sizes(1000, 10000, 3), vec![1000, 3162, 10000]);
        assert_eq!(geometric_sizes(10, 10, 4), vec![10]);
        assert_eq!(geometric_sizes(2, 4, 5), vec![2, 3, 4]);
    }

    #[test]
    fn curve_shape_and_reproducibility() {
        let mut sc = scenario_preset("level-dominant").unwrap();
        sc.n_rows = 3000;
        sc.seed = 2;
        let (d, t) = generate(&sc).unwrap();
        let cfg = CvConfig {
            outer_folds: 3,
            inner_folds: 2,
            grid: Grid {
                max_depth: vec![1, 2],
                min_samples_leaf: vec![1],
                min_loss_reduction: vec![0.0],
            },
            seed: 4,
        };
        let c = learning_curve(&d, &[Approach::Tp, Approach::Op], &[1500, 600], &cfg, Some(&t)).unwrap();
        assert_eq!(c.sizes, vec![600, 1500]);
        assert_eq!(c.approaches(), vec![Approach::Tp, Approach::Op, Approach::BestOnAverage]);
        assert_eq!(c.points.len(), 6);
        let csv = c.to_csv();
        let lifts = csv.lines().filter(|l| l.contains(",lift_vs_control,")).count();
        assert_eq!(lifts, 2 * 3 * 3);
        let again = learning_curve(&d, &[Approach::Tp, Approach::Op], &[600, 1500], &cfg, Some(&t)).unwrap();
        assert_eq!(again.to_csv(), csv);
        assert_eq!(again.to_svg("lift_vs_control"), c.to_svg("lift_vs_control"));
        assert!(c.to_svg("lift_vs_control").starts_with("<svg"));
        assert!(matches!(
            learning_curve(&d, &[Approach::Tp], &[3001], &cfg, None),
            Err(Error::SizeTooLarge { .. })
        ));
    }
}
