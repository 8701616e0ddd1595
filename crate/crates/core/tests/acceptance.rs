//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the binary
//! exits non-zero if any criterion fails.
//!
//! Set `FORCECAST_ACCEPT=A1,A3` to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use forcecast::encoders::points::PointEncoder;
use forcecast::encoders::rgb::RgbEncoder;
use forcecast::encoders::{encode_points, PointEncoderConfig, RgbEncoderConfig};
use forcecast::eval::ablation::{run_ablation, score, train_variant, Experiment};
use forcecast::eval::metrics::{reference_table_check, LIVER_MAX_FORCE, PHANTOM_MAX_FORCE, REFERENCE_TABLE};
use forcecast::geometry::{downsample_uniform, normalize_unit_sphere, unproject, CameraIntrinsics, PointCloud};
use forcecast::io::{load_dataset, DepthImage};
use forcecast::nn::gradcheck::{check_gradients, check_gradients_sampled, relative_error};
use forcecast::nn::{mse_grad, mse_loss, BatchNorm, Conv1d, Conv2d, Linear, Mode, Params, Schedule, Tensor};
use forcecast::synthgen::{generate_dataset, SceneConfig};
use forcecast::tcn::{FrameStore, NetConfig, TcnConfig, TcnModel, TrainConfig, Variant};
use forcecast::tcn::ForceNet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const GRAD_DRAWS: u64 = 10;
const GRAD_BUDGET: Duration = Duration::from_secs(30);

const GEOMETRY_IMAGES: usize = 100;
const GEOMETRY_TOL: f64 = 1e-9;
const GEOMETRY_BUDGET: Duration = Duration::from_secs(5);

const PERM_CLOUDS: usize = 10;
const PERM_ROUNDS: usize = 100;

const E2E_FRAMES: usize = 4200;
const E2E_MIN_FRAMES: usize = 4000;
const E2E_MIN_R: f64 = 0.95;
const E2E_MAX_PCT: f64 = 2.0;
const E2E_SEED: u64 = 7;
const E2E_EPOCHS: usize = 40;

const ABLATION_SEEDS: [u64; 3] = [1, 2, 3];
const ABLATION_EPOCHS: usize = E2E_EPOCHS;
const ABLATION_RATIO: f64 = 1.10;

const TABLE_TOL_PP: f64 = 0.1;

const SYNC_TOLERANCE: f64 = 0.010;
const SYNC_LOW_JITTER: f64 = 0.003;
const SYNC_HIGH_JITTER: f64 = 0.012;

type Check = fn() -> Result<String, String>;

fn main() {
    let only: Option<Vec<String>> = std::env::var("FORCECAST_ACCEPT")
        .ok()
        .map(|v| v.split(',').map(|s| s.trim().to_uppercase()).collect());
    let checks: [(&str, &str, Check); 9] = [
        ("A1", "gradient integrity", a1_gradients),
        ("A2", "geometry oracle", a2_geometry),
        ("A3", "permutation invariance", a3_permutation),
        ("A4", "end-to-end synthetic regression", a4_end_to_end),
        ("A5", "ablation ordering", a5_ablation),
        ("A6", "reference table arithmetic", a6_table),
        ("A7", "full-width smoke test", a7_full_width),
        ("A8", "determinism", a8_determinism),
        ("A9", "synchronization contract", a9_sync),
    ];
    let mut failed = 0;
    for (id, name, check) in checks {
        if only.as_ref().is_some_and(|o| !o.iter().any(|s| s == id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id} PASS {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn half_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| 0.5 * x * x).sum()
}

/// Finite-difference check on the input of `f`, whose analytic input gradient is `dx`.
fn input_error(x: &[f64], dx: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut xp = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        xp[i] = x[i] + GRAD_H;
        let lp = f(&xp);
        xp[i] = x[i] - GRAD_H;
        let lm = f(&xp);
        xp[i] = x[i];
        worst = worst.max(relative_error(dx[i], (lp - lm) / (2.0 * GRAD_H)));
    }
    worst
}

/// Zero-initialized biases put whole rows on a ReLU kink, where finite differences are meaningless.
fn jitter_biases<M: Params>(m: &mut M, rng: &mut ChaCha8Rng) {
    m.visit_mut(&mut |name, p| {
        if name.ends_with("bias") || name.ends_with("beta") {
            p.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        }
    });
}

fn a1_gradients() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut record = |name: &'static str, e: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some(w) => w.1 = w.1.max(e),
        None => worst.push((name, e)),
    };
    for draw in 0..GRAD_DRAWS {
        // linear
        let lin = Linear::init(5, 4, &mut rng).map_err(|e| e.to_string())?;
        let x = uniform(&mut rng, 3 * 5, -1.0, 1.0);
        let y = lin.forward_rows(&x).unwrap();
        let mut g = lin.zeros_like();
        let dx = lin.backward_rows(&x, &y, &mut g, true).unwrap();
        record("linear", check_gradients(&lin, &g, GRAD_H, |m| half_sq(&m.forward_rows(&x).unwrap())).max_rel_error);
        record("linear.input", input_error(&x, &dx, |xi| half_sq(&lin.forward_rows(xi).unwrap())));

        // temporal convolution
        let conv = Conv1d::init(3, 4, 3, &mut rng).unwrap();
        let xt = Tensor::new(vec![2, 6, 3], uniform(&mut rng, 36, -1.0, 1.0)).unwrap();
        let (y, cache) = conv.forward(&xt).unwrap();
        let mut g = conv.zeros_like();
        let dx = conv.backward(&cache, &y, &mut g);
        record("conv1d", check_gradients(&conv, &g, GRAD_H, |m| half_sq(m.forward(&xt).unwrap().0.data())).max_rel_error);
        record(
            "conv1d.input",
            input_error(xt.data(), dx.data(), |xi| {
                half_sq(conv.forward(&Tensor::new(vec![2, 6, 3], xi.to_vec()).unwrap()).unwrap().0.data())
            }),
        );

        // image convolution
        let conv = Conv2d::init(2, 3, 3, 2, 1, &mut rng).unwrap();
        let xi = Tensor::new(vec![2, 5, 5, 2], uniform(&mut rng, 100, -1.0, 1.0)).unwrap();
        let (y, cache) = conv.forward(&xi).unwrap();
        let mut g = conv.zeros_like();
        let dx = conv.backward(&cache, y.data(), &mut g, true).unwrap();
        record("conv2d", check_gradients(&conv, &g, GRAD_H, |m| half_sq(m.forward(&xi).unwrap().0.data())).max_rel_error);
        record(
            "conv2d.input",
            input_error(xi.data(), dx.data(), |v| {
                half_sq(conv.forward(&Tensor::new(vec![2, 5, 5, 2], v.to_vec()).unwrap()).unwrap().0.data())
            }),
        );

        // batch norm with batch statistics; a weighted loss keeps gradients away from zero
        let mut bn = BatchNorm::new(3);
        bn.gamma = uniform(&mut rng, 3, 0.5, 1.5);
        bn.beta = uniform(&mut rng, 3, -0.5, 0.5);
        let xb = Tensor::new(vec![4, 2, 3], uniform(&mut rng, 24, -2.0, 2.0)).unwrap();
        let w = uniform(&mut rng, 24, -1.0, 1.0);
        let weighted = |y: &Tensor| y.data().iter().zip(&w).map(|(a, b)| a * b + 0.25 * a * a).sum::<f64>();
        let (y, cache, _) = bn.forward_batch(&xb).unwrap();
        let dy: Vec<f64> = y.data().iter().zip(&w).map(|(a, b)| b + 0.5 * a).collect();
        let mut g = bn.zeros_like();
        let dx = bn.backward(&cache, &Tensor::new(vec![4, 2, 3], dy).unwrap(), &mut g);
        record("batchnorm", check_gradients(&bn, &g, GRAD_H, |m| weighted(&m.forward_batch(&xb).unwrap().0)).max_rel_error);
        record(
            "batchnorm.input",
            input_error(xb.data(), dx.data(), |v| {
                weighted(&bn.forward_batch(&Tensor::new(vec![4, 2, 3], v.to_vec()).unwrap()).unwrap().0)
            }),
        );

        // mean squared error
        let p = uniform(&mut rng, 6, -2.0, 2.0);
        let t = uniform(&mut rng, 6, -2.0, 2.0);
        let dp = mse_grad(&p, &t).unwrap();
        record("mse", input_error(&p, &dp, |v| mse_loss(v, &t).unwrap()));

        // encoders; ReLU and max pooling are exercised inside them
        let mut rgb = RgbEncoder::new(
            &RgbEncoderConfig { height: 8, width: 8, channels: vec![3, 4], out_width: 5 },
            &mut rng,
        )
        .unwrap();
        jitter_biases(&mut rgb, &mut rng);
        let xr = Tensor::new(vec![2, 8, 8, 3], uniform(&mut rng, 384, -0.5, 0.5)).unwrap();
        let (y, cache) = rgb.forward(&xr).unwrap();
        let mut g = rgb.zeros_like();
        rgb.backward(&cache, y.data(), &mut g);
        record("rgb_encoder", check_gradients(&rgb, &g, GRAD_H, |m| half_sq(m.forward(&xr).unwrap().0.data())).max_rel_error);

        let mut pts = PointEncoder::new(&PointEncoderConfig { num_points: 16, hidden: vec![6, 8], out_width: 4 }, &mut rng).unwrap();
        jitter_biases(&mut pts, &mut rng);
        let xp = uniform(&mut rng, 2 * 16 * 3, -1.0, 1.0);
        let (y, cache) = pts.forward(&xp, 2).unwrap();
        let mut g = pts.zeros_like();
        pts.backward(&cache, &y, &mut g);
        record("point_encoder", check_gradients(&pts, &g, GRAD_H, |m| half_sq(&m.forward(&xp, 2).unwrap().0)).max_rel_error);

        // temporal block on its own, train mode
        let mut tcn = TcnModel::new(&TcnConfig { input_width: 4, window_len: 5, kernel: 3, widths: vec![5, 3] }, &mut rng).unwrap();
        jitter_biases(&mut tcn, &mut rng);
        let xw = Tensor::new(vec![6, 5, 4], uniform(&mut rng, 120, -1.0, 1.0)).unwrap();
        let target = uniform(&mut rng, 6, -1.0, 1.0);
        let (pred, cache, _) = tcn.forward_train(&xw).unwrap();
        let mut g = tcn.zeros_like();
        tcn.backward(&cache, &mse_grad(&pred, &target).unwrap(), &mut g);
        record(
            "tcn",
            check_gradients(&tcn, &g, GRAD_H, |m| mse_loss(&m.forward_train(&xw).unwrap().0, &target).unwrap()).max_rel_error,
        );

        // encoders and temporal block together on one window with running statistics
        record("full_stack", full_stack_error(draw, &mut rng));
    }
    let elapsed = start.elapsed();
    let (name, err) = worst.iter().fold(("", 0.0), |a, &(n, e)| if e > a.1 { (n, e) } else { a });
    let summary = format!("{} checks x {GRAD_DRAWS} draws, max rel error {err:.2e} ({name}) in {:.1} s", worst.len(), elapsed.as_secs_f64());
    ensure(err < GRAD_TOL, || format!("{summary}; tolerance {GRAD_TOL:e}"))?;
    ensure(elapsed < GRAD_BUDGET, || format!("{summary}; over the {GRAD_BUDGET:?} budget"))?;
    Ok(summary)
}

fn small_net_config(variant: Variant) -> NetConfig {
    NetConfig {
        variant,
        rgb: RgbEncoderConfig { height: 8, width: 8, channels: vec![3], out_width: 5 },
        points: PointEncoderConfig { num_points: 12, hidden: vec![6, 8], out_width: 4 },
        kernel: 3,
        widths: vec![4, 3],
        half_width: 2,
    }
}

fn random_store(frames: usize, rgb: (usize, usize), num_points: usize, rng: &mut ChaCha8Rng) -> FrameStore {
    FrameStore::from_parts(
        (0..frames).map(|i| i as f64 / 30.0).collect(),
        uniform(rng, frames, -1.0, 1.0),
        rgb,
        uniform(rng, frames * rgb.0 * rgb.1 * 3, -0.5, 0.5),
        num_points,
        uniform(rng, frames * num_points * 3, -1.0, 1.0),
    )
    .unwrap()
}

fn full_stack_error(draw: u64, rng: &mut ChaCha8Rng) -> f64 {
    let store = random_store(7, (8, 8), 12, rng);
    let mut net = ForceNet::new(&small_net_config(Variant::RpcTcn), draw).unwrap();
    jitter_biases(&mut net, rng);
    net.visit_buffers_mut(&mut |name, p| {
        if name.ends_with("running_mean") {
            p.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        } else if name.ends_with("running_var") {
            p.iter_mut().for_each(|v| *v = rng.random_range(0.5..2.0));
        }
    });
    net.target = vec![-0.1, 0.3];
    let center = [3];
    let target = [store.labels[3]];
    let (pred, _) = net.forward_recorded(&store, &center, Mode::Eval).unwrap();
    let mut g = net.zeros_like();
    net.backward(&mse_grad(&pred, &target).unwrap(), &mut g).unwrap();
    check_gradients_sampled(&net, &g, GRAD_H, 400, draw, |m| {
        let mut m = m.clone();
        mse_loss(&m.forward_recorded(&store, &center, Mode::Eval).unwrap().0, &target).unwrap()
    })
    .max_rel_error
}

/// Scalar reference for unproject followed by unit-sphere normalization.
fn geometry_oracle(depth: &[f64], w: usize, h: usize, fx: f64, fy: f64, cx: f64, cy: f64) -> Vec<[f64; 3]> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut zs = Vec::new();
    for idx in 0..w * h {
        let (u, v) = ((idx % w) as f64, (idx / w) as f64);
        let z = depth[idx];
        if z > 0.0 {
            xs.push((u - cx) * z / fx);
            ys.push((v - cy) * z / fy);
            zs.push(z);
        }
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mz = zs.iter().sum::<f64>() / n;
    let centered: Vec<[f64; 3]> = (0..xs.len()).map(|i| [xs[i] - mx, ys[i] - my, zs[i] - mz]).collect();
    let s = centered
        .iter()
        .map(|p| (p[0].powi(2) + p[1].powi(2) + p[2].powi(2)).sqrt())
        .fold(0.0, f64::max);
    if s == 0.0 {
        return centered;
    }
    centered.iter().map(|p| [p[0] / s, p[1] / s, p[2] / s]).collect()
}

fn a2_geometry() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut worst: f64 = 0.0;
    for i in 0..GEOMETRY_IMAGES {
        let depth: Vec<f64> = (0..64)
            .map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(300.0..2000.0) })
            .collect();
        let (fx, fy) = (rng.random_range(2.0..20.0), rng.random_range(2.0..20.0));
        let (cx, cy) = (rng.random_range(0.0..8.0), rng.random_range(0.0..8.0));
        let img = DepthImage::new(8, 8, depth.clone()).unwrap();
        let k = CameraIntrinsics::new(fx, fy, cx, cy).unwrap();
        let got = match unproject(&img, &k) {
            Ok(pc) => normalize_unit_sphere(&pc).unwrap(),
            Err(e) => return Err(format!("image {i}: {e}")),
        };
        let want = geometry_oracle(&depth, 8, 8, fx, fy, cx, cy);
        ensure(got.points.len() == want.len(), || format!("image {i}: {} vs {} points", got.points.len(), want.len()))?;
        for (a, b) in got.points.iter().zip(&want) {
            for ax in 0..3 {
                worst = worst.max((a[ax] - b[ax]).abs() / a[ax].abs().max(b[ax].abs()).max(1e-12));
            }
        }
    }
    ensure(worst <= GEOMETRY_TOL, || format!("max relative deviation {worst:.2e}"))?;
    for (n, m) in [(22801usize, 2048usize), (10, 3), (2048, 2048), (100, 7), (5, 9), (1000, 999)] {
        let pc = PointCloud {
            points: (0..n).map(|i| [i as f64, 0.0, 0.0]).collect(),
            centroid: [0.0; 3],
            scale: 1.0,
            normalized: false,
        };
        let out = downsample_uniform(&pc, m).unwrap();
        let expect: Vec<usize> = if n <= m { (0..n).collect() } else { (0..m).map(|k| k * n / m).collect() };
        let got: Vec<usize> = out.points.iter().map(|p| p[0] as usize).collect();
        ensure(got == expect, || format!("stride mismatch for n={n}, m={m}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < GEOMETRY_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{GEOMETRY_IMAGES} images, max relative deviation {worst:.2e}; stride formula exact"))
}

fn a3_permutation() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 64;
    let enc = PointEncoder::new(&PointEncoderConfig { num_points: m, ..PointEncoderConfig::default() }, &mut rng).unwrap();
    for c in 0..PERM_CLOUDS {
        let pc = PointCloud {
            points: (0..m).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect(),
            centroid: [0.0; 3],
            scale: 1.0,
            normalized: true,
        };
        let base = encode_points(&pc, &enc).unwrap();
        let mut shuffled = pc.clone();
        for r in 0..PERM_ROUNDS {
            shuffled.points.shuffle(&mut rng);
            let got = encode_points(&shuffled, &enc).unwrap();
            let same = got.iter().zip(&base).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || format!("cloud {c}, permutation {r} changed the encoding"))?;
        }
    }
    Ok(format!("{PERM_CLOUDS} clouds x {PERM_ROUNDS} permutations bitwise identical"))
}

fn e2e_scene(seed: u64) -> SceneConfig {
    SceneConfig {
        duration_s: E2E_FRAMES as f64 / 30.0,
        seed,
        ..SceneConfig::default()
    }
}

fn e2e_store(dir: &Path) -> FrameStore {
    let scene = e2e_scene(E2E_SEED);
    generate_dataset(&scene, dir).unwrap();
    let ds = load_dataset(dir, SYNC_TOLERANCE).unwrap();
    let k = CameraIntrinsics::centered(scene.depth_size, scene.depth_size, 133.3);
    FrameStore::from_dataset(&ds, &k, PointEncoderConfig::default().num_points).unwrap()
}

fn desk_experiment(epochs: usize) -> Experiment {
    Experiment {
        net: NetConfig {
            variant: Variant::RpcTcn,
            rgb: RgbEncoderConfig::default(),
            points: PointEncoderConfig::default(),
            kernel: 3,
            widths: vec![96, 64, 32],
            half_width: 7,
        },
        train: TrainConfig {
            epochs,
            batch_size: 128,
            group: 8,
            schedule: Schedule { base_lr: 4e-3, decay_every: epochs * 2 / 3, decay_factor: 0.1 },
            momentum: 0.9,
            seed: 0,
            record_wall_time: false,
        },
    }
}

fn a4_end_to_end() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let store = e2e_store(dir.path());
    ensure(store.len() >= E2E_MIN_FRAMES, || format!("only {} frames", store.len()))?;
    let exp = desk_experiment(E2E_EPOCHS);
    let start = Instant::now();
    let trained = train_variant(&store, &exp, Variant::RpcTcn, &exp.net, E2E_SEED, |_| {}).map_err(|e| e.to_string())?;
    let train_secs = start.elapsed().as_secs_f64();
    let report = score(&trained.outcome.best, &store, &trained.centers.test).map_err(|e| e.to_string())?;
    let summary = format!(
        "{} frames, {} test windows: r {:.4}, MAE {:.2} N, {:.2}% of {:.0} N, trained {train_secs:.0} s",
        store.len(),
        report.n_samples,
        report.pearson_r,
        report.mae,
        report.pct_error,
        report.max_abs_force
    );
    ensure(report.pearson_r >= E2E_MIN_R && report.pct_error <= E2E_MAX_PCT, || {
        format!("{summary}; need r >= {E2E_MIN_R} and <= {E2E_MAX_PCT}%")
    })?;
    Ok(summary)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn a5_ablation() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let store = e2e_store(dir.path());
    let exp = desk_experiment(ABLATION_EPOCHS);
    let mut maes: Vec<Vec<f64>> = vec![Vec::new(); 4];
    for seed in ABLATION_SEEDS {
        let results = run_ablation(&store, &exp, seed, |_, _| {}).map_err(|e| e.to_string())?;
        for (k, r) in results.iter().enumerate() {
            maes[k].push(r.report.mae);
        }
    }
    let med: Vec<f64> = maes.iter().map(|m| median(m.clone())).collect();
    let (single, rgb, pc, rpc) = (med[0], med[1], med[2], med[3]);
    let per_seed: Vec<String> = maes.iter().map(|m| format!("{m:.2?}")).collect();
    let summary = format!(
        "median test MAE over seeds {ABLATION_SEEDS:?}: single_frame_rgb {single:.2}, rgb_tcn {rgb:.2}, pc_tcn {pc:.2}, rpc_tcn {rpc:.2} N (per seed {})",
        per_seed.join(" / ")
    );
    ensure(single > rgb && single > pc && single > rpc, || format!("{summary}; single frame is not the worst"))?;
    ensure(rpc <= ABLATION_RATIO * rgb.min(pc), || format!("{summary}; rpc_tcn above {ABLATION_RATIO} x best single modality"))?;
    Ok(summary)
}

fn a6_table() -> Result<String, String> {
    let checks = reference_table_check(TABLE_TOL_PP);
    ensure(checks.len() == 8 && REFERENCE_TABLE.len() == 8, || format!("{} rows", checks.len()))?;
    ensure(PHANTOM_MAX_FORCE == 239.0 && LIVER_MAX_FORCE == 190.0, || "maxima changed".into())?;
    let worst = checks.iter().map(|c| (c.recomputed_pct - c.row.printed_pct).abs()).fold(0.0, f64::max);
    let bad: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| format!("{}/{}", c.row.algorithm, c.row.study)).collect();
    ensure(bad.is_empty(), || format!("mismatched rows: {}", bad.join(", ")))?;
    Ok(format!("8 rows within {TABLE_TOL_PP} pp, largest deviation {worst:.3} pp"))
}

fn a7_full_width() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4608);
    let cfg = NetConfig {
        variant: Variant::RpcTcn,
        rgb: RgbEncoderConfig { out_width: 4096, ..RgbEncoderConfig::default() },
        points: PointEncoderConfig { out_width: 512, ..PointEncoderConfig::default() },
        kernel: 3,
        widths: vec![96, 64, 32],
        half_width: 7,
    };
    let mut net = ForceNet::new(&cfg, 1).map_err(|e| e.to_string())?;
    ensure(net.tcn.input_width() == 4608 && net.window_len() == 15, || {
        format!("input width {} window {}", net.tcn.input_width(), net.window_len())
    })?;
    let store = random_store(16, (cfg.rgb.height, cfg.rgb.width), cfg.points.num_points, &mut rng);
    let centers = [7, 8];
    let target = [store.labels[7], store.labels[8]];
    let (pred, _) = net.forward_recorded(&store, &centers, Mode::Train).map_err(|e| e.to_string())?;
    let loss = mse_loss(&pred, &target).unwrap();
    let mut g = net.zeros_like();
    net.backward(&mse_grad(&pred, &target).unwrap(), &mut g).map_err(|e| e.to_string())?;
    let flat = g.flatten();
    ensure(loss.is_finite(), || format!("loss {loss}"))?;
    ensure(flat.iter().all(|v| v.is_finite()), || "non-finite gradient".into())?;
    Ok(format!("4096 + 512 = 4608 features x 15 frames, loss {loss:.4}, {} finite gradients", flat.len()))
}

fn forcecast(cwd: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_forcecast"))
        .current_dir(cwd)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("`forcecast {}` exited {:?}: {}", args.join(" "), out.status.code(), String::from_utf8_lossy(&out.stderr))
    })
}

fn a8_determinism() -> Result<String, String> {
    let config = "seed = 11\nduration_s = 6\nrgb_size = 16\ndepth_size = 12\nnum_points = 64\n\
                  rgb_features = 16\npoint_hidden = 8,16\npoint_features = 8\ntcn_widths = 8,8\nhalf_width = 3\n\
                  epochs = 3\nbatch_size = 8\nlr = 0.001\ndata_dir = data\ncheckpoint = model.ckpt\n\
                  history_csv = history.csv\nout_dir = eval\n";
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.cfg"), config).unwrap();
        for cmd in ["gen-data", "train", "eval"] {
            forcecast(dir.path(), &[cmd, "--config", "run.cfg", "--deterministic"])?;
        }
        let metrics = std::fs::read(dir.path().join("eval/metrics.csv")).map_err(|e| e.to_string())?;
        let history = std::fs::read(dir.path().join("history.csv")).map_err(|e| e.to_string())?;
        outputs.push((metrics, history));
    }
    ensure(outputs[0].0 == outputs[1].0, || "metrics.csv differs between runs".into())?;
    ensure(outputs[0].1 == outputs[1].1, || "history.csv differs between runs".into())?;
    Ok(format!("two gen-data/train/eval runs, metrics.csv byte-identical ({} bytes)", outputs[0].0.len()))
}

fn dropped_with_jitter(jitter_s: f64) -> (usize, usize) {
    let dir = tempfile::tempdir().unwrap();
    let scene = SceneConfig {
        duration_s: 5.0,
        jitter_s,
        rgb_size: 8,
        depth_size: 8,
        seed: 3,
        ..SceneConfig::default()
    };
    let g = generate_dataset(&scene, dir.path()).unwrap();
    let ds = load_dataset(dir.path(), SYNC_TOLERANCE).unwrap();
    (ds.dropped, g.frames)
}

fn a9_sync() -> Result<String, String> {
    let (low, total) = dropped_with_jitter(SYNC_LOW_JITTER);
    ensure(low == 0, || format!("{low} of {total} frames dropped at {SYNC_LOW_JITTER} s jitter"))?;
    let (high, total_high) = dropped_with_jitter(SYNC_HIGH_JITTER);
    ensure(high == total_high, || format!("{high} of {total_high} frames dropped at {SYNC_HIGH_JITTER} s jitter"))?;
    Ok(format!(
        "{SYNC_LOW_JITTER} s jitter: 0/{total} dropped; {SYNC_HIGH_JITTER} s jitter: {high}/{total_high} dropped at {SYNC_TOLERANCE} s tolerance"
    ))
}
