//! Monte Carlo check of a preset against the directional replication
//! targets: diagonal dominance of the cross-task table over sampling seeds,
//! TP's regret advantage, and the learning-curve trend.

use clap::Parser;
use tapol_bench::{cross_task_seed, curve_study, preset_with, StudySummary};
use tapol_core::eval::{geometric_sizes, Approach, Grid};

#[derive(Debug, Parser)]
struct Args {
    #[arg(long, default_value = "level-dominant")]
    preset: String,
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    first_seed: u64,
    #[arg(long)]
    base_scale: Option<f64>,
    #[arg(long)]
    effect_scale: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    effect_features: Option<Vec<usize>>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    structure_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    max_depth: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    min_samples_leaf: Option<Vec<usize>>,
    /// Also run one learning curve with this many geometric sizes.
    #[arg(long, default_value_t = 0)]
    curve_sizes: usize,
    /// Skip the cross-task seeds.
    #[arg(long)]
    no_crosstask: bool,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = Args::parse();
    let mut sc = preset_with(&a.preset, a.n, a.first_seed)?;
    if let Some(v) = a.base_scale {
        sc.base_scale = v;
    }
    if let Some(v) = a.effect_scale {
        sc.effect_scale = v;
    }
    if let Some(v) = a.effect_features {
        sc.effect_features = v;
    }
    if let Some(v) = a.level {
        sc.level = v;
    }
    if let Some(v) = a.structure_seed {
        sc.structure_seed = v;
    }
    let mut grid = Grid::default();
    if let Some(v) = a.max_depth {
        grid.max_depth = v;
    }
    if let Some(v) = a.min_samples_leaf {
        grid.min_samples_leaf = v;
    }
    sc.validate()?;
    eprintln!("scenario:\n{}", sc.to_toml());

    if !a.no_crosstask {
        let mut outcomes = Vec::new();
        for seed in a.first_seed..a.first_seed + a.seeds {
            let o = cross_task_seed(&sc, seed, &grid)?;
            let f = o.flags;
            println!(
                "seed {seed:>3}  mse_mu {:.5}/{:.5}/{:.5}  proxy {:.4}/{:.4}/{:.4}  lift {:.4}/{:.4}/{:.4}  regret {:.5}/{:.5}/{:.5}  flags {}{}{}{}",
                o.rows[0].mse_outcome, o.rows[1].mse_outcome, o.rows[2].mse_outcome,
                o.rows[0].mse_effect_proxy, o.rows[1].mse_effect_proxy, o.rows[2].mse_effect_proxy,
                o.rows[0].lift_vs_control, o.rows[1].lift_vs_control, o.rows[2].lift_vs_control,
                o.rows[0].regret.unwrap_or(f64::NAN), o.rows[1].regret.unwrap_or(f64::NAN),
                o.rows[2].regret.unwrap_or(f64::NAN),
                u8::from(f.op_lowest_mse_outcome), u8::from(f.cp_lowest_mse_effect_proxy),
                u8::from(f.tp_highest_lift), u8::from(f.tp_lowest_regret == Some(true)),
            );
            let hp: Vec<String> = o
                .first_fold_hyperparams
                .iter()
                .map(|v| {
                    v.iter()
                        .map(|h| format!("{}/{}", h.max_depth, h.min_samples_leaf))
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect();
            println!(
                "          exact_tau {:.5}/{:.5}/{:.5}  hp {}",
                o.mse_effect_exact[0],
                o.mse_effect_exact[1],
                o.mse_effect_exact[2],
                hp.join(" | ")
            );
            outcomes.push(o);
        }
        println!("{}", serde_json::to_string_pretty(&StudySummary::of(&outcomes))?);
    }

    if a.curve_sizes > 0 {
        let max = a.n - a.n.div_ceil(10);
        let sizes = geometric_sizes(max / 100, max, a.curve_sizes);
        let lc = curve_study(&sc, &sizes, &grid)?;
        for &s in &lc.sizes {
            for ap in [Approach::Op, Approach::Cp, Approach::Tp, Approach::BestOnAverage] {
                let r = &lc.point(ap, s).expect("point exists").report;
                let i = r.interval("lift_vs_control").expect("lift interval");
                println!(
                    "size {s:>7} {:<16} lift {:+.4} [{:+.4}, {:+.4}]",
                    ap.name(),
                    i.mean,
                    i.lower,
                    i.upper
                );
            }
        }
    }
    Ok(())
}
