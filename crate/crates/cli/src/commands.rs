use std::path::{Path, PathBuf};

use serde_json::json;
use tapol_core::balance::{balance_check, DEFAULT_BALANCE_THRESHOLD};
use tapol_core::eval::{
    cross_task_table, evaluate_policy, geometric_sizes, learning_curve, nested_cv_many,
    share_table_csv, train_policy, Approach, CvConfig, EvalReport, Grid, METRICS,
};
use tapol_core::io::{load_dataset, read_binary, read_csv, read_truth, write_binary, write_csv, write_truth};
use tapol_core::synth::{generate, scenario_preset};
use tapol_core::{Dataset, Policy, ScenarioConfig, SyntheticTruth};

use crate::config::FileConfig;
use crate::error::{usage, CliError, CliResult};
use crate::manifest::Manifest;
use crate::{
    Cli, Command, CrossTaskArgs, CurveArgs, CvArgs, DataArgs, EvalArgs, GenArgs, TrainArgs,
    ValidateArgs, OUT_ENV,
};

struct Ctx {
    file: FileConfig,
    out: PathBuf,
    manifest: Manifest,
}

pub fn run(cli: Cli) -> CliResult<Manifest> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let threads = match cli.threads.or(file.threads) {
        Some(0) => return Err(usage("--threads must be at least 1")),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| file.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let name = match &cli.command {
        Command::Gen(_) => "gen",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Curve(_) => "curve",
        Command::Crosstask(_) => "crosstask",
        Command::Validate(_) => "validate",
    };
    let mut ctx = Ctx {
        file,
        out,
        manifest: Manifest::new(name, threads),
    };
    if let Some(p) = &cli.config {
        ctx.manifest.input("config", p)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Gen(a) => gen(&mut ctx, a),
        Command::Train(a) => train(&mut ctx, a),
        Command::Eval(a) => eval(&mut ctx, a),
        Command::Curve(a) => curve(&mut ctx, a),
        Command::Crosstask(a) => crosstask(&mut ctx, a),
        Command::Validate(a) => validate(&mut ctx, a),
    })?;
    Ok(ctx.manifest)
}

impl Ctx {
    fn seed(&mut self, flag: Option<u64>) -> CliResult<u64> {
        let s = flag
            .or(self.file.seed)
            .ok_or_else(|| usage("--seed is required for this command"))?;
        self.manifest.seed = Some(s);
        Ok(s)
    }

    fn out_dir(&self) -> CliResult<&Path> {
        std::fs::create_dir_all(&self.out).map_err(|e| {
            CliError::Invalid(format!("cannot create output directory {}: {e}", self.out.display()))
        })?;
        Ok(&self.out)
    }

    fn write(&mut self, role: &str, file: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.out_dir()?.join(file);
        std::fs::write(&path, contents)?;
        self.manifest.output(role, &path)?;
        Ok(path)
    }

    fn data_path(&self, a: &DataArgs) -> CliResult<PathBuf> {
        a.data
            .clone()
            .or_else(|| self.file.data.clone())
            .ok_or_else(|| usage("--data is required"))
    }

    fn dataset(&mut self, a: &DataArgs) -> CliResult<Dataset> {
        let path = self.data_path(a)?;
        let d = load_dataset(&path)?;
        self.manifest.input("dataset", &path)?;
        self.manifest.schema_hash = Some(d.schema_hash());
        Ok(d)
    }

    fn truth(&mut self, a: &DataArgs, d: &Dataset) -> CliResult<Option<SyntheticTruth>> {
        match a.truth.clone().or_else(|| self.file.truth.clone()) {
            Some(p) => {
                let t = read_truth(&p, d)?;
                self.manifest.input("truth", &p)?;
                Ok(Some(t))
            }
            None => Ok(None),
        }
    }

    fn approaches(&self, flag: &Option<String>, default: &str) -> CliResult<Vec<Approach>> {
        let s = flag
            .clone()
            .or_else(|| self.file.approach.clone())
            .unwrap_or_else(|| default.to_string());
        Ok(Approach::parse_list(&s)?)
    }

    fn cv_config(&self, a: CvArgs, seed: u64) -> CliResult<CvConfig> {
        let f = &self.file;
        let dflt = CvConfig::default();
        let cfg = CvConfig {
            outer_folds: a.outer_folds.or(f.outer_folds).unwrap_or(dflt.outer_folds),
            inner_folds: a.inner_folds.or(f.inner_folds).unwrap_or(dflt.inner_folds),
            grid: Grid {
                max_depth: a
                    .max_depth
                    .or_else(|| f.max_depth.clone())
                    .unwrap_or(dflt.grid.max_depth),
                min_samples_leaf: a
                    .min_samples_leaf
                    .or_else(|| f.min_samples_leaf.clone())
                    .unwrap_or(dflt.grid.min_samples_leaf),
                min_loss_reduction: a
                    .min_loss_reduction
                    .or_else(|| f.min_loss_reduction.clone())
                    .unwrap_or(dflt.grid.min_loss_reduction),
            },
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn load_policies(&mut self, flag: Option<Vec<PathBuf>>, d: &Dataset) -> CliResult<Vec<(String, Policy)>> {
        let paths = flag.or_else(|| self.file.policy.clone()).unwrap_or_default();
        let mut out = Vec::new();
        for p in paths {
            let policy = Policy::from_json(&std::fs::read_to_string(&p)?)?;
            policy.check_dataset(d)?;
            self.manifest.input("policy", &p)?;
            let label = p
                .file_name()
                .map(|s| s.to_string_lossy().trim_end_matches(".policy.json").to_string())
                .unwrap_or_else(|| policy.name().to_string());
            out.push((label, policy));
        }
        Ok(out)
    }
}

fn hashes(d: &Dataset) -> serde_json::Value {
    json!({ "schema_hash": d.schema_hash(), "dataset_hash": d.content_hash() })
}

fn to_pretty(v: &impl serde::Serialize) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v).map_err(tapol_core::Error::from)? + "\n")
}

fn gen(ctx: &mut Ctx, a: GenArgs) -> CliResult<()> {
    let seed = ctx.seed(a.seed)?;
    let (preset, scenario) = match (a.preset, a.scenario) {
        (Some(_), Some(_)) => return Err(usage("--preset and --scenario are mutually exclusive")),
        (None, None) => match (ctx.file.preset.clone(), ctx.file.scenario.clone()) {
            (Some(_), Some(_)) => {
                return Err(usage("config sets both `preset` and `scenario`"))
            }
            pair => pair,
        },
        pair => pair,
    };
    let mut cfg: ScenarioConfig = match (&preset, &scenario) {
        (Some(name), _) => scenario_preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            ctx.manifest.input("scenario", path)?;
            ScenarioConfig::from_toml(&text)?
        }
        (None, None) => return Err(usage("one of --preset or --scenario is required")),
    };
    cfg.seed = seed;
    if let Some(n) = a.n.or(ctx.file.n) {
        cfg.n_rows = n;
    }
    if let Some(s) = a.structure_seed.or(ctx.file.structure_seed) {
        cfg.structure_seed = s;
    }
    cfg.validate()?;
    let (d, truth) = generate(&cfg)?;

    let name = a
        .name
        .or_else(|| ctx.file.name.clone())
        .or(preset.clone())
        .unwrap_or_else(|| "data".to_string());
    let dir = ctx.out_dir()?.to_path_buf();
    let csv = dir.join(format!("{name}.csv"));
    write_csv(&d, &csv)?;
    ctx.manifest.output("dataset-csv", &csv)?;
    ctx.manifest.output("dataset-meta", &tapol_core::io::meta_path(&csv))?;
    let bin = dir.join(format!("{name}.bin"));
    write_binary(&d, &bin)?;
    ctx.manifest.output("dataset-bin", &bin)?;
    let tr = dir.join(format!("{name}.truth"));
    write_truth(&truth, &d, &tr)?;
    ctx.manifest.output("truth", &tr)?;
    ctx.write("scenario", &format!("{name}.scenario.toml"), &cfg.to_toml())?;

    let n = d.n_rows() as f64;
    let counts = d.arm_counts();
    let shares: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let max_dev = shares
        .iter()
        .zip(d.propensities())
        .map(|(s, p)| (s - p).abs())
        .fold(0.0, f64::max);
    let balance = match balance_check(&d, DEFAULT_BALANCE_THRESHOLD) {
        Ok(b) => json!({
            "threshold": b.threshold,
            "max_distance": b.max_distance(),
            "flagged": b.any_flagged(),
        }),
        Err(e) => json!({ "skipped": e.to_string() }),
    };
    eprintln!("generated {} rows ({})", d.n_rows(), preset.as_deref().unwrap_or("custom scenario"));
    for (arm, (s, p)) in shares.iter().zip(d.propensities()).enumerate() {
        eprintln!("  arm {arm}: share {s:.4} (design {p:.4})");
    }
    eprintln!("  balance: {balance}");
    ctx.manifest.schema_hash = Some(d.schema_hash());
    ctx.manifest.settings = serde_json::to_value(&cfg).map_err(tapol_core::Error::from)?;
    ctx.manifest.summary = json!({
        "n_rows": d.n_rows(),
        "arm_counts": counts,
        "arm_shares": shares,
        "max_share_deviation": max_dev,
        "balance": balance,
        "dataset_hash": d.content_hash(),
    });
    Ok(())
}

fn train(ctx: &mut Ctx, a: TrainArgs) -> CliResult<()> {
    let seed = ctx.seed(a.seed)?;
    let approaches = ctx.approaches(&a.approach, "op,cp,tp")?;
    let cfg = ctx.cv_config(a.cv, seed)?;
    let d = ctx.dataset(&a.data)?;
    let mut trained = Vec::new();
    for &ap in &approaches {
        let policy = train_policy(&d, ap, &cfg)?;
        ctx.write("policy", &format!("{}.policy.json", ap.name()), &(policy.to_json()? + "\n"))?;
        trained.push(json!({
            "approach": ap,
            "hyperparams": policy.provenance.hyperparams,
        }));
    }
    ctx.manifest.settings = json!({ "approaches": approaches, "cv": cfg });
    ctx.manifest.summary = json!({ "policies": trained, "data": hashes(&d) });
    Ok(())
}

fn report_lines(reports: &[EvalReport]) {
    for r in reports {
        let lift = r.interval("lift_vs_control");
        eprintln!(
            "{:<16} lift {:+.4} [{:+.4}, {:+.4}]  ips {:.5}  entropy {:.4}",
            r.approach.name(),
            r.lift_vs_control,
            lift.map_or(f64::NAN, |i| i.lower),
            lift.map_or(f64::NAN, |i| i.upper),
            r.ips_value,
            r.entropy_bits
        );
    }
}

fn eval(ctx: &mut Ctx, a: EvalArgs) -> CliResult<()> {
    let policy_mode = a.policy.is_some() || (a.approach.is_none() && ctx.file.policy.is_some());
    if policy_mode {
        if a.approach.is_some() {
            return Err(usage("--policy and --approach are mutually exclusive"));
        }
        let d = ctx.dataset(&a.data)?;
        let truth = ctx.truth(&a.data, &d)?;
        let policies = ctx.load_policies(a.policy, &d)?;
        if policies.is_empty() {
            return Err(usage("--policy needs at least one file"));
        }
        let mut rows = Vec::new();
        let mut shares = String::from("policy");
        for arm in 0..d.arm_count() {
            shares.push_str(&format!(",share_{arm}"));
        }
        shares.push_str(",entropy_bits\n");
        for (label, p) in &policies {
            let m = evaluate_policy(p, &d, truth.as_ref())?;
            eprintln!(
                "{label:<16} lift {:+.4}  ips {:.5}  entropy {:.4}",
                m.lift_vs_control, m.ips_value, m.entropy_bits
            );
            shares.push_str(label);
            for s in &m.shares {
                shares.push_str(&format!(",{s}"));
            }
            shares.push_str(&format!(",{}\n", m.entropy_bits));
            rows.push(json!({ "policy": label, "kind": p.name(), "metrics": m }));
        }
        let doc = json!({ "data": hashes(&d), "policies": rows });
        ctx.write("report", "eval.json", &to_pretty(&doc)?)?;
        ctx.write("shares", "shares.csv", &shares)?;
        ctx.manifest.settings = json!({ "mode": "policies" });
        return Ok(());
    }

    let seed = ctx.seed(a.seed)?;
    let approaches = ctx.approaches(&a.approach, "op,cp,tp,best-on-average")?;
    let cfg = ctx.cv_config(a.cv, seed)?;
    let d = ctx.dataset(&a.data)?;
    let truth = ctx.truth(&a.data, &d)?;
    let reports = nested_cv_many(&d, &approaches, &cfg, truth.as_ref(), None)?;
    report_lines(&reports);
    let doc = json!({ "data": hashes(&d), "reports": reports });
    ctx.write("report", "eval.json", &to_pretty(&doc)?)?;
    let mut folds = String::new();
    for (i, r) in reports.iter().enumerate() {
        let csv = r.per_fold_csv();
        let body = if i == 0 { &csv[..] } else { csv.split_once('\n').map_or("", |(_, b)| b) };
        folds.push_str(body);
    }
    ctx.write("per-fold", "eval_folds.csv", &folds)?;
    ctx.write("shares", "shares.csv", &share_table_csv(&reports))?;
    ctx.manifest.settings = json!({ "mode": "nested-cv", "approaches": approaches, "cv": cfg });
    ctx.manifest.summary = json!(reports
        .iter()
        .map(|r| json!({
            "approach": r.approach,
            "lift_vs_control": r.lift_vs_control,
            "ips_value": r.ips_value,
            "entropy_bits": r.entropy_bits,
        }))
        .collect::<Vec<_>>());
    Ok(())
}

fn curve(ctx: &mut Ctx, a: CurveArgs) -> CliResult<()> {
    let seed = ctx.seed(a.seed)?;
    let approaches = ctx.approaches(&a.approach, "op,cp,tp")?;
    let cfg = ctx.cv_config(a.cv, seed)?;
    let metric = a
        .metric
        .or_else(|| ctx.file.metric.clone())
        .unwrap_or_else(|| "lift_vs_control".to_string());
    if !METRICS.contains(&metric.as_str()) {
        return Err(usage(format!("unknown metric `{metric}`; expected one of {}", METRICS.join(", "))));
    }
    let d = ctx.dataset(&a.data)?;
    let truth = ctx.truth(&a.data, &d)?;
    let sizes = match a.sizes.or_else(|| ctx.file.sizes.clone()) {
        Some(s) => s,
        None => {
            let max = d.n_rows() - d.n_rows().div_ceil(cfg.outer_folds);
            let min = a
                .min_size
                .or(ctx.file.min_size)
                .unwrap_or_else(|| (max / 100).max(1));
            geometric_sizes(min, max, a.size_count.or(ctx.file.size_count).unwrap_or(5))
        }
    };
    let lc = learning_curve(&d, &approaches, &sizes, &cfg, truth.as_ref())?;
    let doc = json!({ "data": hashes(&d), "curve": lc });
    ctx.write("curve-csv", "curve.csv", &lc.to_csv())?;
    ctx.write("curve-svg", "curve.svg", &lc.to_svg(&metric))?;
    ctx.write("curve-json", "curve.json", &to_pretty(&doc)?)?;
    for &s in &lc.sizes {
        eprintln!("size {s}");
        let reports: Vec<EvalReport> = lc
            .points
            .iter()
            .filter(|p| p.size == s)
            .map(|p| p.report.clone())
            .collect();
        report_lines(&reports);
    }
    ctx.manifest.settings = json!({
        "approaches": lc.approaches(),
        "sizes": lc.sizes,
        "metric": metric,
        "cv": cfg,
    });
    Ok(())
}

fn crosstask(ctx: &mut Ctx, a: CrossTaskArgs) -> CliResult<()> {
    let seed = ctx.seed(a.seed)?;
    let approaches = ctx.approaches(&a.approach, "op,cp,tp")?;
    let cfg = ctx.cv_config(a.cv, seed)?;
    let d = ctx.dataset(&a.data)?;
    let truth = ctx.truth(&a.data, &d)?;
    let table = cross_task_table(&d, &approaches, &cfg, truth.as_ref())?;
    let text = table.to_text();
    eprint!("{text}");
    let doc = json!({ "data": hashes(&d), "table": table });
    ctx.write("crosstask-json", "crosstask.json", &to_pretty(&doc)?)?;
    ctx.write("crosstask-csv", "crosstask.csv", &table.to_csv())?;
    ctx.write("crosstask-text", "crosstask.txt", &text)?;
    ctx.manifest.settings = json!({ "approaches": approaches, "cv": cfg });
    ctx.manifest.summary = json!({ "flags": table.flags });
    Ok(())
}

fn validate(ctx: &mut Ctx, a: ValidateArgs) -> CliResult<()> {
    let path = ctx.data_path(&a.data)?;
    let d = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(&path)?
    } else {
        read_binary(&path)?
    };
    ctx.manifest.input("dataset", &path)?;
    ctx.manifest.schema_hash = Some(d.schema_hash());
    let violations = d.validate();
    if !violations.is_empty() {
        for v in violations.iter().take(20) {
            eprintln!("  {v}");
        }
        if violations.len() > 20 {
            eprintln!("  ... {} more", violations.len() - 20);
        }
        return Err(CliError::Invalid(format!(
            "{} has {} invariant violation(s)",
            path.display(),
            violations.len()
        )));
    }
    ctx.truth(&a.data, &d)?;
    let policies = ctx.load_policies(a.policy, &d)?;
    let balance = balance_check(&d, DEFAULT_BALANCE_THRESHOLD)?;
    eprintln!(
        "{}: {} rows valid; balance max distance {:.4}{}",
        path.display(),
        d.n_rows(),
        balance.max_distance(),
        if balance.any_flagged() { " (flagged)" } else { "" }
    );
    ctx.manifest.summary = json!({
        "n_rows": d.n_rows(),
        "arm_counts": d.arm_counts(),
        "policies_checked": policies.len(),
        "balance": balance,
        "data": hashes(&d),
    });
    Ok(())
}
