//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::params::Params;

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is ~0 are judged on absolute error.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compare every coordinate of `analytic` against `(L(p + h) - L(p - h)) / 2h`.
pub fn check_gradients<M: Params>(model: &M, analytic: &M, h: f64, loss: impl FnMut(&M) -> f64) -> GradCheckReport {
    let n = model.num_params();
    check_coordinates(model, analytic, h, (0..n).collect(), loss)
}

/// Like [`check_gradients`] but on at most `max_coords` coordinates drawn with `seed`.
pub fn check_gradients_sampled<M: Params>(
    model: &M,
    analytic: &M,
    h: f64,
    max_coords: usize,
    seed: u64,
    loss: impl FnMut(&M) -> f64,
) -> GradCheckReport {
    let n = model.num_params();
    let coords = if n <= max_coords {
        (0..n).collect()
    } else {
        let mut v = sample(&mut ChaCha8Rng::seed_from_u64(seed), n, max_coords).into_vec();
        v.sort_unstable();
        v
    };
    check_coordinates(model, analytic, h, coords, loss)
}

fn check_coordinates<M: Params>(
    model: &M,
    analytic: &M,
    h: f64,
    coords: Vec<usize>,
    mut loss: impl FnMut(&M) -> f64,
) -> GradCheckReport {
    let base = model.flatten();
    let grad = analytic.flatten();
    assert_eq!(base.len(), grad.len(), "gradient layout differs from model");
    let names = param_labels(model);
    let mut probe = model.clone();
    let mut flat = base.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    for &i in &coords {
        flat[i] = base[i] + h;
        probe.set_flat(&flat);
        let lp = loss(&probe);
        flat[i] = base[i] - h;
        probe.set_flat(&flat);
        let lm = loss(&probe);
        flat[i] = base[i];
        let numeric = (lp - lm) / (2.0 * h);
        let err = relative_error(grad[i], numeric);
        if err > report.max_rel_error || err.is_nan() {
            report.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
            report.worst = format!("{} (analytic {:e}, numeric {:e})", names[i], grad[i], numeric);
        }
        report.checked += 1;
    }
    report
}

fn param_labels<M: Params>(model: &M) -> Vec<String> {
    let mut out = Vec::new();
    model.visit(&mut |name, p| {
        for j in 0..p.len() {
            out.push(format!("{name}[{j}]"));
        }
    });
    out
}
