//! The `forcecast` command line: gen-data, train, eval, ablate, infer, plot.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 I/O or data error,
//! 3 training divergence, 4 checkpoint missing, corrupt or incompatible.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{self, RunConfig, KEYS, MODEL_KEYS};
use crate::error::{Error, Result};
use crate::eval::ablation::{run_ablation, score, split_centers, Experiment};
use crate::eval::plot::{bin_chart, prediction_plot};
use crate::eval::report::{
    append_history_csv, read_bins_csv, write_features_csv, read_predictions_csv, write_bins_csv, write_history_csv, write_metrics_csv,
    write_predictions_csv, PredictionRow,
};
use crate::io::dataset::load_dataset;
use crate::nn::checkpoint::Checkpoint;
use crate::synthgen::generate_dataset;
use crate::tcn::net::ForceNet;
use crate::tcn::store::FrameStore;
use crate::tcn::train::train;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_CHECKPOINT: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "forcecast",
    about = "Force regression from synchronized RGB and depth sequences",
    after_help = "Any config key can also be given as `--key value` and overrides the config file."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Single-threaded, fixed-order run; wall-clock columns are written as 0.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset to `data_dir`.
    GenData(Common),
    /// Train a model and write `checkpoint` and `history_csv`.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from an existing checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Score a checkpoint on one split and write metrics, bins and plots to `out_dir`.
    Eval(Common),
    /// Train and score all four variants on a shared split.
    Ablate(Common),
    /// Predict every window of a dataset into `out_dir/predictions.csv`.
    Infer(Common),
    /// Render SVG charts from `predictions_csv` and/or `bins_csv`.
    Plot(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::GenData(c) | Command::Eval(c) | Command::Ablate(c) | Command::Infer(c) | Command::Plot(c) => c,
            Command::Train { common, .. } => common,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Shape(_) | Error::State(_) | Error::UndefinedCorrelation => EXIT_CONFIG,
        Error::Io { .. }
        | Error::Format(_)
        | Error::Parse { .. }
        | Error::NonMonotone { .. }
        | Error::Validation(_)
        | Error::EmptyCloud => EXIT_IO,
        Error::Diverged { .. } | Error::NonFinite(_) => EXIT_DIVERGED,
        Error::Checkpoint(_) => EXIT_CHECKPOINT,
    }
}

/// Pulls `--key value` / `--key=value` pairs for config keys out of `args`.
fn split_overrides(args: &[String]) -> Result<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.iter().peekable();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            rest.push(a.clone());
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (flag, None),
        };
        let key = name.replace('-', "_");
        if !KEYS.iter().any(|(k, _)| *k == key) {
            rest.push(a.clone());
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .cloned()
                .ok_or_else(|| Error::Config(format!("--{name} needs a value")))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run_with(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (rest, overrides) = match split_overrides(args) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let cli = match Cli::try_parse_from(&rest) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli.command, &overrides, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(args: &[String]) -> i32 {
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

fn load_config(common: &Common, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("{}: {source}", path.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

fn setup_threads(common: &Common) -> Result<()> {
    let threads = if common.deterministic { Some(1) } else { common.threads };
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn execute(cmd: &Command, overrides: &[(String, String)], out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let common = cmd.common();
    let cfg = load_config(common, overrides)?;
    setup_threads(common)?;
    match cmd {
        Command::GenData(_) => gen_data(&cfg, out),
        Command::Train { resume, .. } => train_cmd(&cfg, *resume, common.deterministic, out, err),
        Command::Eval(_) => eval_cmd(&cfg, out),
        Command::Ablate(_) => ablate_cmd(&cfg, common.deterministic, out, err),
        Command::Infer(_) => infer_cmd(&cfg, out),
        Command::Plot(_) => plot_cmd(&cfg, out),
    }
}

fn stdout_line(out: &mut dyn Write, line: String) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn path_key(cfg: &RunConfig, key: &str) -> Result<PathBuf> {
    cfg.require::<String>(key).map(PathBuf::from)
}

fn gen_data(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    cfg.require_keys(&["data_dir", "seed"])?;
    let scene = config::scene_config(cfg)?;
    let g = generate_dataset(&scene, path_key(cfg, "data_dir")?)?;
    stdout_line(out, format!("frames {}", g.frames))?;
    stdout_line(out, format!("checksum {}", g.checksum))
}

fn load_store(cfg: &RunConfig, num_points: usize) -> Result<FrameStore> {
    let ds = load_dataset(path_key(cfg, "data_dir")?, config::sync_tolerance(cfg)?)?;
    let first = ds
        .frames
        .first()
        .ok_or_else(|| Error::Validation("dataset has no synchronized frames".into()))?;
    let k = config::intrinsics(cfg, first.depth.width(), first.depth.height())?;
    FrameStore::from_dataset(&ds, &k, num_points)
}

fn checkpoint_meta(net: &ForceNet, seed: u64, epochs: usize, best_epoch: usize, best_val: f64) -> Vec<(String, String)> {
    vec![
        ("variant".into(), net.variant.name().into()),
        ("seed".into(), seed.to_string()),
        ("epochs_completed".into(), epochs.to_string()),
        ("best_epoch".into(), best_epoch.to_string()),
        ("best_val_mse".into(), best_val.to_string()),
    ]
}

/// Loads a checkpoint and rebuilds its network. Every failure, including a
/// config that disagrees with the checkpoint's layout, is a checkpoint error.
fn load_model(cfg: &RunConfig) -> Result<(ForceNet, Checkpoint, RunConfig)> {
    let path = path_key(cfg, "checkpoint")?;
    let ckpt = Checkpoint::load(&path).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(m),
        other => Error::Checkpoint(format!("{}: {other}", path.display())),
    })?;
    let saved = RunConfig::parse(&ckpt.config)
        .map_err(|e| Error::Checkpoint(format!("embedded config: {e}")))?;
    let conflicts = layout_conflicts(cfg, &saved)?;
    if !conflicts.is_empty() {
        return Err(Error::Checkpoint(format!(
            "config disagrees with checkpoint on: {}",
            conflicts.join(", ")
        )));
    }
    let net_cfg = config::net_config(&saved).map_err(|e| Error::Checkpoint(format!("embedded config: {e}")))?;
    let mut net = ForceNet::new(&net_cfg, 0).map_err(|e| Error::Checkpoint(e.to_string()))?;
    ckpt.apply_to(&mut net)?;
    Ok((net, ckpt, saved))
}

/// Model keys (and `seed`) set in `cfg` whose value changes the network the
/// checkpoint was built with. Keys the checkpoint left at their default count
/// as set to that default.
fn layout_conflicts(cfg: &RunConfig, saved: &RunConfig) -> Result<Vec<String>> {
    let base = config::net_config(saved).map_err(|e| Error::Checkpoint(format!("embedded config: {e}")))?;
    let mut out = Vec::new();
    for key in MODEL_KEYS {
        let Some(value) = cfg.raw(key) else { continue };
        let mut merged = saved.clone();
        merged.set(key, value)?;
        if config::net_config(&merged)? != base {
            out.push(key.to_string());
        }
    }
    if !cfg.conflicts(saved, &["seed"]).is_empty() {
        out.push("seed".to_string());
    }
    Ok(out)
}

fn train_cmd(cfg: &RunConfig, resume: bool, deterministic: bool, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    cfg.require_keys(&["data_dir", "seed", "checkpoint", "history_csv"])?;
    let tc = config::train_config(cfg, deterministic)?;
    let net_cfg = config::net_config(cfg)?;
    let ckpt_path = path_key(cfg, "checkpoint")?;
    let history_path = path_key(cfg, "history_csv")?;
    let store = load_store(cfg, net_cfg.points.num_points)?;
    let (net, start) = if resume && ckpt_path.exists() {
        let (net, ckpt, _) = load_model(cfg)?;
        let done: usize = ckpt
            .meta("epochs_completed")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Checkpoint("missing epochs_completed".into()))?;
        (net, done)
    } else {
        (ForceNet::new(&net_cfg, tc.seed)?, 0)
    };
    let mut net = net;
    let centers = split_centers(&store, &net, tc.seed)?;
    if start == 0 {
        let labels: Vec<f64> = centers.train.iter().map(|&c| store.labels[c]).collect();
        net.fit_target(&labels);
    }
    let _ = writeln!(
        err,
        "split seed {}: {} train / {} val / {} test windows",
        tc.seed,
        centers.train.len(),
        centers.val.len(),
        centers.test.len()
    );
    let outcome = train(net, &store, &centers.train, &centers.val, &tc, start, |r| {
        let _ = writeln!(
            err,
            "epoch {} lr {} train_mse {} val_mse {}",
            r.epoch, r.lr, r.train_mse, r.val_mse
        );
    })?;
    let meta = checkpoint_meta(&outcome.best, tc.seed, tc.epochs, outcome.best_epoch, outcome.best_val_mse);
    Checkpoint::from_model(&outcome.best, cfg.to_text(), meta).save(&ckpt_path)?;
    if start > 0 {
        append_history_csv(&history_path, &cfg.echo(), &outcome.history)?;
    } else {
        write_history_csv(&history_path, &cfg.echo(), &outcome.history)?;
    }
    stdout_line(out, format!("best_epoch {}", outcome.best_epoch))?;
    stdout_line(out, format!("best_val_mse {}", outcome.best_val_mse))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = path_key(cfg, "out_dir")?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn prediction_rows(store: &FrameStore, centers: &[usize], pred: &[f64]) -> Vec<PredictionRow> {
    centers
        .iter()
        .zip(pred)
        .map(|(&c, &p)| PredictionRow {
            frame: c,
            t: store.times[c],
            reference: store.labels[c],
            prediction: p,
        })
        .collect()
}

fn eval_cmd(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    cfg.require_keys(&["data_dir", "checkpoint", "out_dir"])?;
    let (net, _, saved) = load_model(cfg)?;
    let seed: u64 = saved.require("seed").map_err(|e| Error::Checkpoint(e.to_string()))?;
    let store = load_store(cfg, net.points.as_ref().map_or(config::net_config(&saved)?.points.num_points, |p| p.num_points))?;
    let centers = split_centers(&store, &net, seed)?;
    let split: String = cfg.get_or("split", "test".to_string())?;
    let chosen = match split.as_str() {
        "train" => centers.train,
        "val" => centers.val,
        "test" => centers.test,
        "all" => net.valid_centers(store.len()).collect(),
        other => return Err(Error::Config(format!("unknown split `{other}`"))),
    };
    let report = score(&net, &store, &chosen)?;
    let pred = net.predict_centers(&store, &chosen)?;
    let dir = out_dir(cfg)?;
    let echo = cfg.echo();
    let name = net.variant.name().to_string();
    write_metrics_csv(dir.join("metrics.csv"), &echo, &[(name.clone(), &report)])?;
    write_bins_csv(dir.join("bins.csv"), &echo, &[(name.clone(), &report.per_bin)])?;
    let rows = prediction_rows(&store, &chosen, &pred);
    write_predictions_csv(dir.join("predictions.csv"), &echo, &rows)?;
    render_predictions(&dir, &format!("{name} on {split} split"), &rows)?;
    write_svg(&dir.join("bins.svg"), &bin_chart("per-bin absolute error", &[(name, report.per_bin.clone())]))?;
    stdout_line(out, format!("mae_n {}", report.mae))?;
    stdout_line(out, format!("pct_error {}", report.pct_error))?;
    stdout_line(out, format!("pearson_r {}", report.pearson_r))?;
    stdout_line(out, format!("n_samples {}", report.n_samples))
}

fn render_predictions(dir: &Path, title: &str, rows: &[PredictionRow]) -> Result<()> {
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let reference: Vec<f64> = rows.iter().map(|r| r.reference).collect();
    let pred: Vec<f64> = rows.iter().map(|r| r.prediction).collect();
    write_svg(&dir.join("predictions.svg"), &prediction_plot(title, &t, &reference, &pred))
}

fn ablate_cmd(cfg: &RunConfig, deterministic: bool, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    cfg.require_keys(&["data_dir", "seed", "out_dir"])?;
    let exp = Experiment {
        net: config::net_config(cfg)?,
        train: config::train_config(cfg, deterministic)?,
    };
    let store = load_store(cfg, exp.net.points.num_points)?;
    let results = run_ablation(&store, &exp, exp.train.seed, |v, r| {
        let _ = writeln!(err, "{v} epoch {} train_mse {} val_mse {}", r.epoch, r.train_mse, r.val_mse);
    })?;
    let split = &results[0].split;
    let _ = writeln!(
        err,
        "shared split seed {}: {} train / {} val / {} test frames",
        split.seed,
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    let dir = out_dir(cfg)?;
    let mut echo = cfg.echo();
    echo.push(("split_sizes".into(), format!("{} {} {}", split.train.len(), split.val.len(), split.test.len())));
    let rows: Vec<(String, &crate::eval::MetricsReport)> =
        results.iter().map(|r| (r.variant.name().to_string(), &r.report)).collect();
    write_metrics_csv(dir.join("ablation.csv"), &echo, &rows)?;
    let bins: Vec<(String, Vec<crate::eval::BinStats>)> = results
        .iter()
        .map(|r| (r.variant.name().to_string(), r.report.per_bin.clone()))
        .collect();
    let bin_refs: Vec<(String, &[crate::eval::BinStats])> = bins.iter().map(|(n, b)| (n.clone(), b.as_slice())).collect();
    write_bins_csv(dir.join("ablation_bins.csv"), &echo, &bin_refs)?;
    write_svg(&dir.join("ablation_bins.svg"), &bin_chart("per-bin absolute error by variant", &bins))?;
    for r in &results {
        write_history_csv(dir.join(format!("history_{}.csv", r.variant.name())), &echo, &r.history)?;
        stdout_line(
            out,
            format!(
                "{} mae_n {} pct_error {} pearson_r {}",
                r.variant.name(),
                r.report.mae,
                r.report.pct_error,
                r.report.pearson_r
            ),
        )?;
    }
    Ok(())
}

fn infer_cmd(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    cfg.require_keys(&["data_dir", "checkpoint", "out_dir"])?;
    let (net, _, saved) = load_model(cfg)?;
    let store = load_store(cfg, config::net_config(&saved)?.points.num_points)?;
    let centers: Vec<usize> = net.valid_centers(store.len()).collect();
    let pred = net.predict_centers(&store, &centers)?;
    let dir = out_dir(cfg)?;
    let rows = prediction_rows(&store, &centers, &pred);
    write_predictions_csv(dir.join("predictions.csv"), &cfg.echo(), &rows)?;
    if cfg.contains("features_csv") {
        let frames: Vec<usize> = (0..store.len()).collect();
        let feats = net.frame_features(&store, &frames)?;
        let stamps: Vec<(usize, f64)> = frames.iter().map(|&i| (i, store.times[i])).collect();
        write_features_csv(path_key(cfg, "features_csv")?, &cfg.echo(), &stamps, &feats)?;
    }
    stdout_line(out, format!("predictions {}", rows.len()))
}

fn plot_cmd(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    cfg.require_keys(&["out_dir"])?;
    if !cfg.contains("predictions_csv") && !cfg.contains("bins_csv") {
        return Err(Error::Config("plot needs `predictions_csv` or `bins_csv`".into()));
    }
    let dir = out_dir(cfg)?;
    if cfg.contains("predictions_csv") {
        let rows = read_predictions_csv(path_key(cfg, "predictions_csv")?)?;
        render_predictions(&dir, "prediction vs reference", &rows)?;
        stdout_line(out, format!("wrote {}", dir.join("predictions.svg").display()))?;
    }
    if cfg.contains("bins_csv") {
        let bins = read_bins_csv(path_key(cfg, "bins_csv")?)?;
        write_svg(&dir.join("bins.svg"), &bin_chart("per-bin absolute error", &bins))?;
        stdout_line(out, format!("wrote {}", dir.join("bins.svg").display()))?;
    }
    Ok(())
}
