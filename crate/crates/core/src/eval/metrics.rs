//! Error metrics over predicted and reference forces.

use crate::error::{Error, Result};

fn check_pair(pred: &[f64], reference: &[f64]) -> Result<()> {
    if pred.len() != reference.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} references",
            pred.len(),
            reference.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Validation("no samples".into()));
    }
    Ok(())
}

/// Mean absolute error in newtons.
pub fn mae(pred: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(pred, reference)?;
    Ok(pred.iter().zip(reference).map(|(p, r)| (p - r).abs()).sum::<f64>() / pred.len() as f64)
}

/// `100 * mae / max_abs_force`, in percent.
pub fn percentage_error(mae: f64, max_abs_force: f64) -> Result<f64> {
    if !(max_abs_force > 0.0) {
        return Err(Error::Validation(format!(
            "maximum force magnitude {max_abs_force} must be positive"
        )));
    }
    Ok(100.0 * mae / max_abs_force)
}

/// Sample Pearson correlation.
pub fn pearson_r(pred: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(pred, reference)?;
    if pred.len() < 2 {
        return Err(Error::UndefinedCorrelation);
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mr = reference.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, r) in pred.iter().zip(reference) {
        let (a, b) = (p - mp, r - mr);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinStats {
    /// Lower edge of |reference|, newtons.
    pub lo: f64,
    /// Upper edge, `None` for the last bin which also takes everything above.
    pub hi: Option<f64>,
    pub count: usize,
    /// Mean of |pred - ref| within the bin; `None` when empty.
    pub mae: Option<f64>,
    /// Population standard deviation of |pred - ref| within the bin.
    pub std: Option<f64>,
}

/// Absolute errors grouped by reference magnitude into `num_bins` bins of
/// `bin_width` newtons; the last bin is open-ended.
pub fn bin_errors(pred: &[f64], reference: &[f64], bin_width: f64, num_bins: usize) -> Result<Vec<BinStats>> {
    if pred.len() != reference.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} references",
            pred.len(),
            reference.len()
        )));
    }
    if !(bin_width > 0.0) || num_bins == 0 {
        return Err(Error::Validation(format!(
            "need positive bin width and at least one bin, got {bin_width} x {num_bins}"
        )));
    }
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); num_bins];
    for (p, r) in pred.iter().zip(reference) {
        let k = ((r.abs() / bin_width).floor() as usize).min(num_bins - 1);
        errors[k].push((p - r).abs());
    }
    Ok(errors
        .into_iter()
        .enumerate()
        .map(|(k, e)| {
            let count = e.len();
            let (mae, std) = if count == 0 {
                (None, None)
            } else {
                let m = e.iter().sum::<f64>() / count as f64;
                let v = e.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / count as f64;
                (Some(m), Some(v.sqrt()))
            };
            BinStats {
                lo: k as f64 * bin_width,
                hi: (k + 1 < num_bins).then(|| (k + 1) as f64 * bin_width),
                count,
                mae,
                std,
            }
        })
        .collect())
}

pub const DEFAULT_BIN_WIDTH: f64 = 20.0;
pub const DEFAULT_NUM_BINS: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub mae: f64,
    pub pct_error: f64,
    pub pearson_r: f64,
    pub max_abs_force: f64,
    pub n_samples: usize,
    pub per_bin: Vec<BinStats>,
}

impl MetricsReport {
    /// `max_abs_force` is the dataset-wide maximum |fz|, not the evaluated subset's.
    pub fn compute(pred: &[f64], reference: &[f64], max_abs_force: f64) -> Result<Self> {
        let mae = mae(pred, reference)?;
        Ok(Self {
            mae,
            pct_error: percentage_error(mae, max_abs_force)?,
            pearson_r: pearson_r(pred, reference)?,
            max_abs_force,
            n_samples: pred.len(),
            per_bin: bin_errors(pred, reference, DEFAULT_BIN_WIDTH, DEFAULT_NUM_BINS)?,
        })
    }
}

/// A row of the reference ablation table: MAE in newtons and the printed percentage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub algorithm: &'static str,
    pub study: &'static str,
    pub mae: f64,
    pub printed_pct: f64,
}

/// Maximum force magnitudes of the two reference studies, newtons.
pub const PHANTOM_MAX_FORCE: f64 = 239.0;
pub const LIVER_MAX_FORCE: f64 = 190.0;

pub const REFERENCE_TABLE: [ReferenceRow; 8] = [
    ReferenceRow { algorithm: "single_frame_rgb", study: "phantom", mae: 7.06, printed_pct: 3.01 },
    ReferenceRow { algorithm: "single_frame_rgb", study: "ex_vivo_liver", mae: 10.4, printed_pct: 5.45 },
    ReferenceRow { algorithm: "rgb_tcn", study: "phantom", mae: 2.51, printed_pct: 1.05 },
    ReferenceRow { algorithm: "rgb_tcn", study: "ex_vivo_liver", mae: 1.74, printed_pct: 0.913 },
    ReferenceRow { algorithm: "pc_tcn", study: "phantom", mae: 2.14, printed_pct: 0.896 },
    ReferenceRow { algorithm: "pc_tcn", study: "ex_vivo_liver", mae: 1.87, printed_pct: 0.983 },
    ReferenceRow { algorithm: "rpc_tcn", study: "phantom", mae: 1.45, printed_pct: 0.604 },
    ReferenceRow { algorithm: "rpc_tcn", study: "ex_vivo_liver", mae: 0.814, printed_pct: 0.427 },
];

#[derive(Debug, Clone, PartialEq)]
pub struct TableCheck {
    pub row: ReferenceRow,
    pub recomputed_pct: f64,
    pub passed: bool,
}

/// Recomputes every reference percentage from its MAE and study maximum and
/// compares to the printed value within `tolerance_pp` percentage points.
pub fn reference_table_check(tolerance_pp: f64) -> Vec<TableCheck> {
    REFERENCE_TABLE
        .iter()
        .map(|row| {
            let max = if row.study == "phantom" { PHANTOM_MAX_FORCE } else { LIVER_MAX_FORCE };
            let recomputed_pct = percentage_error(row.mae, max).expect("positive maximum");
            TableCheck {
                row: *row,
                recomputed_pct,
                passed: (recomputed_pct - row.printed_pct).abs() <= tolerance_pp,
            }
        })
        .collect()
}
