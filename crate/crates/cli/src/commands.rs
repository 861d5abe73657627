use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use mipgnn::bias::{compute_bias, threshold_bias};
use mipgnn::bnb::{collect_pool, primal_integral, solve, PoolConfig, SolveConfig, Strategy};
use mipgnn::eval::{compare_metric, MetricComparison};
use mipgnn::generate::{gen_gisp_er, gen_random_blp, GispParams};
use mipgnn::gnn::{train, Architecture, GnnModel, TrainConfig, TrainingExample};
use mipgnn::io::{self, LabelFile};
use mipgnn::model::{featurized_graph, BlpInstance};
use mipgnn::mwu::{mwu_solve, verify_mae_bound, FeasibilitySystem, MwuConfig};

use crate::artifacts::{
    ExperimentManifest, ManifestEntry, PredictionFile, ReportFile, RunLog, SolveSettings,
};
use crate::{
    Cli, Command, EvalArgs, Family, GenerateArgs, LabelArgs, MwuArgs, PredictArgs, SolveArgs,
    TrainArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    fs::create_dir_all(&cli.out).with_context(|| format!("cannot create {}", cli.out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build()
        .context("cannot start worker pool")?;
    pool.install(|| match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Label(a) => label(cli, a),
        Command::Train(a) => train_cmd(cli, a),
        Command::Predict(a) => predict(cli, a),
        Command::Solve(a) => solve_cmd(cli, a),
        Command::Mwu(a) => mwu_cmd(cli, a),
        Command::Eval(a) => eval_cmd(cli, a),
    })
}

fn write_log<C: Serialize>(
    cli: &Cli,
    command: &'static str,
    config: &C,
    start: Instant,
    outputs: Vec<PathBuf>,
) -> Result<()> {
    let log = RunLog {
        command,
        seed: cli.seed,
        threads: cli.threads,
        config,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        outputs,
    };
    let path = cli.out.join(format!("{command}.log.json"));
    io::write_json_file(&path, &log).with_context(|| format!("cannot write {}", path.display()))
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))
}

/// Expands directories to their `.blp` files, sorted by name.
fn instance_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("cannot read {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "blp"))
                .collect();
            found.sort();
            files.extend(found);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            bail!("no such file or directory: {}", p.display());
        }
    }
    if files.is_empty() {
        bail!("no .blp instances found");
    }
    Ok(files)
}

fn instance_id(path: &Path) -> String {
    path.file_stem().map_or_else(
        || "instance".to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

fn load_instance(path: &Path) -> Result<BlpInstance> {
    io::read_instance_file(path).with_context(|| format!("cannot load instance {}", path.display()))
}

fn load_model(path: &Path) -> Result<GnnModel> {
    io::read_model_file(path).with_context(|| format!("cannot load model {}", path.display()))
}

fn generate(cli: &Cli, args: &GenerateArgs) -> Result<()> {
    let start = Instant::now();
    let dir = cli.out.join("instances");
    ensure_dir(&dir)?;
    let width = args.count.max(1).to_string().len();
    let entries: Vec<(ManifestEntry, BlpInstance)> = (0..args.count)
        .into_par_iter()
        .map(|k| {
            let seed = cli.seed.wrapping_add(k as u64);
            let inst = match args.family {
                Family::GispEr => gen_gisp_er(&GispParams {
                    alpha: args.alpha,
                    ..GispParams::set2(args.n, args.p, seed)
                })?,
                Family::RandomBlp => gen_random_blp(args.n, args.rows, args.p, seed)?,
            };
            let id = format!("inst_{k:0width$}");
            let file = dir.join(format!("{id}.blp"));
            Ok((ManifestEntry { id, file, seed }, inst))
        })
        .collect::<mipgnn::Result<_>>()?;
    let mut outputs = Vec::new();
    for (e, inst) in &entries {
        io::write_instance_file(&e.file, inst)
            .with_context(|| format!("cannot write {}", e.file.display()))?;
        outputs.push(e.file.clone());
    }
    let manifest = ExperimentManifest {
        command: "generate",
        seed: cli.seed,
        config: args,
        instances: entries.into_iter().map(|(e, _)| e).collect(),
    };
    let path = cli.out.join("manifest.json");
    io::write_json_file(&path, &manifest)?;
    outputs.push(path);
    log::info!("wrote {} instances to {}", args.count, dir.display());
    write_log(cli, "generate", args, start, outputs)
}

fn label(cli: &Cli, args: &LabelArgs) -> Result<()> {
    let start = Instant::now();
    let files = instance_files(&args.instances)?;
    let dir = cli.out.join("labels");
    ensure_dir(&dir)?;
    let cfg = PoolConfig {
        epsilon: args.epsilon,
        target: Some(args.target),
        time_limit: args.time_limit.map(Duration::from_secs_f64),
    };
    let outputs = files
        .par_iter()
        .map(|f| -> Result<PathBuf> {
            let inst = load_instance(f)?;
            let id = instance_id(f);
            let pool = collect_pool(&inst, &cfg)
                .with_context(|| format!("pool collection failed for {id}"))?;
            let bias = compute_bias(&pool)?;
            let lf = LabelFile::new(&id, &inst, &bias.biases, bias.epsilon, bias.pool_size)?;
            let path = dir.join(format!("{id}.labels.json"));
            io::write_json_file(&path, &lf)?;
            log::info!("{id}: pool of {} (complete: {})", pool.len(), pool.complete);
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    write_log(cli, "label", args, start, outputs)
}

fn train_cmd(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let arch: Architecture = args.arch.parse()?;
    let files = instance_files(&args.instances)?;
    let dataset = files
        .par_iter()
        .map(|f| -> Result<TrainingExample> {
            let inst = load_instance(f)?;
            let lpath = args.labels.join(format!("{}.labels.json", instance_id(f)));
            let lf: LabelFile = io::read_json_file(&lpath)
                .with_context(|| format!("cannot load labels {}", lpath.display()))?;
            let labels = threshold_bias(&lf.biases_for(&inst)?, args.tau)?;
            Ok(TrainingExample {
                graph: featurized_graph(&inst),
                labels: labels.as_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        validation_fraction: args.validation_fraction,
        seed: cli.seed,
        init_seed: cli.seed,
        class_weighting: args.class_weighting,
        batch_size: args.batch_size,
        early_stop_patience: args.early_stop_patience,
        ..TrainConfig::default()
    };
    let (mut model, log) = train(arch, &dataset, &cfg)?;
    model.set_tau(args.tau);
    let model_path = cli.out.join("model.gnn");
    io::write_model_file(&model_path, &model)?;
    let log_path = cli.out.join("train_log.json");
    #[derive(Serialize)]
    struct TrainArtifact<'a> {
        config: &'a TrainConfig,
        architecture: &'a str,
        tau: f64,
        log: &'a mipgnn::gnn::TrainingLog,
    }
    io::write_json_file(
        &log_path,
        &TrainArtifact {
            config: &cfg,
            architecture: arch.tag(),
            tau: args.tau,
            log: &log,
        },
    )?;
    log::info!(
        "trained {arch} on {} instances, best epoch {}",
        dataset.len(),
        log.best_epoch
    );
    write_log(cli, "train", args, start, vec![model_path, log_path])
}

fn predict_one(model: &GnnModel, inst: &BlpInstance) -> Result<(Vec<f64>, f64)> {
    let t = Instant::now();
    let p = model.forward(&featurized_graph(inst))?;
    Ok((p, t.elapsed().as_secs_f64()))
}

fn predict(cli: &Cli, args: &PredictArgs) -> Result<()> {
    let start = Instant::now();
    let model = load_model(&args.model)?;
    let files = instance_files(&args.instances)?;
    let dir = cli.out.join("predictions");
    ensure_dir(&dir)?;
    let outputs = files
        .par_iter()
        .map(|f| -> Result<PathBuf> {
            let inst = load_instance(f)?;
            let id = instance_id(f);
            let (predictions, inference_seconds) = predict_one(&model, &inst)?;
            let path = dir.join(format!("{id}.pred.json"));
            let pf = PredictionFile {
                instance_id: id,
                model: args.model.clone(),
                architecture: model.architecture().tag().to_string(),
                var_names: inst.var_names().to_vec(),
                predictions,
                inference_seconds,
            };
            io::write_json_file(&path, &pf)?;
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    write_log(cli, "predict", args, start, outputs)
}

fn solve_cmd(cli: &Cli, args: &SolveArgs) -> Result<()> {
    let start = Instant::now();
    let strategy: Strategy = args.strategy.parse()?;
    let model = match (&args.model, strategy.needs_predictions()) {
        (Some(p), _) => Some(load_model(p)?),
        (None, true) => bail!("strategy {} needs --model", strategy.name()),
        (None, false) => None,
    };
    let files = instance_files(&args.instances)?;
    let dir = cli.out.join("reports");
    ensure_dir(&dir)?;
    let settings = SolveSettings {
        strategy: strategy.name().to_string(),
        time_limit: args.time_limit,
        node_limit: args.node_limit,
        model: args.model.clone(),
        charge_inference: args.charge_inference,
    };
    let outputs = files
        .par_iter()
        .map(|f| -> Result<PathBuf> {
            let inst = load_instance(f)?;
            let id = instance_id(f);
            let mut cfg = SolveConfig {
                strategy,
                time_limit: args.time_limit.map(Duration::from_secs_f64),
                node_limit: args.node_limit,
                ..SolveConfig::default()
            };
            let mut inference_seconds = None;
            if let (Some(m), true) = (&model, strategy.needs_predictions()) {
                let (p, secs) = predict_one(m, &inst)?;
                cfg.predictions = Some(p);
                inference_seconds = Some(secs);
                if args.charge_inference {
                    cfg.time_offset = Duration::from_secs_f64(secs);
                }
            }
            let report = solve(&inst, &cfg).with_context(|| format!("solve failed for {id}"))?;
            log::info!(
                "{id}: {:?} best {:?} after {} nodes",
                report.termination,
                report.best_objective(),
                report.nodes_processed
            );
            let path = dir.join(format!("{id}.report.json"));
            let rf = ReportFile {
                instance_id: id,
                seed: cli.seed,
                settings: settings.clone(),
                inference_seconds,
                report,
            };
            io::write_json_file(&path, &rf)?;
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    write_log(cli, "solve", args, start, outputs)
}

fn mwu_cmd(cli: &Cli, args: &MwuArgs) -> Result<()> {
    let start = Instant::now();
    let inst = load_instance(&args.instance)?;
    let id = instance_id(&args.instance);
    let path = cli.out.join(format!("{id}.mwu.json"));
    match &args.bias {
        Some(bpath) => {
            let lf: LabelFile = io::read_json_file(bpath)
                .with_context(|| format!("cannot load labels {}", bpath.display()))?;
            let report = verify_mae_bound(&inst, &lf.biases_for(&inst)?, args.epsilon)?;
            log::info!(
                "{id}: MAE {:.6} against bound {:.6}: {}",
                report.mae,
                report.delta + report.epsilon,
                if report.passed { "pass" } else { "fail" }
            );
            io::write_json_file(&path, &report)?;
        }
        None => {
            let system = FeasibilitySystem::from_instance(&inst);
            let outcome = mwu_solve(&system, &MwuConfig::new(args.epsilon))?;
            io::write_json_file(&path, &outcome)?;
        }
    }
    write_log(cli, "mwu", args, start, vec![path])
}

fn read_reports(dir: &Path) -> Result<BTreeMap<String, ReportFile>> {
    let entries = fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))?;
    let mut out = BTreeMap::new();
    for e in entries {
        let p = e?.path();
        if p.to_string_lossy().ends_with(".report.json") {
            let rf: ReportFile = io::read_json_file(&p)
                .with_context(|| format!("cannot load report {}", p.display()))?;
            out.insert(rf.instance_id.clone(), rf);
        }
    }
    if out.is_empty() {
        bail!("no reports in {}", dir.display());
    }
    Ok(out)
}

/// Per-instance primal integral, best objective and gap for both sides.
pub fn paired_metrics(
    a: &BTreeMap<String, ReportFile>,
    b: &BTreeMap<String, ReportFile>,
    horizon: f64,
) -> [(BTreeMap<String, f64>, BTreeMap<String, f64>); 3] {
    let mut out: [(BTreeMap<String, f64>, BTreeMap<String, f64>); 3] = Default::default();
    let best = |r: &ReportFile| r.report.best_objective().unwrap_or(f64::INFINITY);
    for (side, mine, other) in [(0, a, b), (1, b, a)] {
        for (id, r) in mine {
            let reference = other.get(id).map_or(best(r), |o| best(r).min(best(o)));
            let pi = if reference.is_finite() {
                primal_integral(&r.report, reference, horizon)
            } else {
                horizon
            };
            let m = [pi, best(r), r.report.gap];
            for (k, v) in m.into_iter().enumerate() {
                let map = if side == 0 {
                    &mut out[k].0
                } else {
                    &mut out[k].1
                };
                map.insert(id.clone(), v);
            }
        }
    }
    out
}

fn eval_cmd(cli: &Cli, args: &EvalArgs) -> Result<()> {
    let start = Instant::now();
    let a = read_reports(&args.a)?;
    let b = read_reports(&args.b)?;
    let horizon = match args.horizon {
        Some(h) => h,
        None => a
            .values()
            .chain(b.values())
            .filter_map(|r| r.settings.time_limit)
            .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))))
            .context("reports carry no time limit; pass --horizon")?,
    };
    let metrics = paired_metrics(&a, &b, horizon);
    let names = ["primal_integral", "best_objective", "gap"];
    let table: Vec<MetricComparison> = names
        .iter()
        .zip(&metrics)
        .map(|(n, (ma, mb))| compare_metric(n, ma, mb))
        .collect::<mipgnn::Result<_>>()?;
    println!(
        "{:<16} {:>5} {:>5} {:>6} {:>14} {:>14} {:>10}",
        "metric", "wins", "ties", "losses", "mean A", "mean B", "p-value"
    );
    for c in &table {
        let p = c
            .wilcoxon
            .as_ref()
            .map_or("n/a".to_string(), |w| format!("{:.3e}", w.p_value));
        println!(
            "{:<16} {:>5} {:>5} {:>6} {:>14.6} {:>14.6} {:>10}",
            c.metric, c.wins, c.ties, c.losses, c.a.mean, c.b.mean, p
        );
    }
    #[derive(Serialize)]
    struct EvalArtifact<'a> {
        a: &'a Path,
        b: &'a Path,
        horizon: f64,
        instances: usize,
        metrics: &'a [MetricComparison],
    }
    let path = cli.out.join("eval.json");
    io::write_json_file(
        &path,
        &EvalArtifact {
            a: &args.a,
            b: &args.b,
            horizon,
            instances: a.len(),
            metrics: &table,
        },
    )?;
    write_log(cli, "eval", args, start, vec![path])
}
