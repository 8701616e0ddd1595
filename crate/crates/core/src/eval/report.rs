//! CSV outputs. Every file starts with `# key = value` lines echoing the run
//! configuration, then a header row.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::metrics::{BinStats, MetricsReport};
use crate::tcn::train::EpochRecord;

pub const METRICS_COLUMNS: [&str; 5] = ["variant", "mae_n", "pct_error", "pearson_r", "n_samples"];
pub const BIN_COLUMNS: [&str; 6] = ["variant", "bin_lo_n", "bin_hi_n", "count", "mae_n", "std_n"];
pub const HISTORY_COLUMNS: [&str; 5] = ["epoch", "lr", "train_mse", "val_mse", "wall_seconds"];
pub const PREDICTION_COLUMNS: [&str; 4] = ["frame", "t", "reference_n", "prediction_n"];

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

fn echo(config: &[(String, String)]) -> String {
    config.iter().map(|(k, v)| format!("# {k} = {v}\n")).collect()
}

fn write_table(path: &Path, config: &[(String, String)], header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut bytes = echo(config).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut bytes);
        w.write_record(header).map_err(|e| csv_error(path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_rows(rows: &[(String, &MetricsReport)]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|(name, m)| {
            vec![
                name.clone(),
                m.mae.to_string(),
                m.pct_error.to_string(),
                m.pearson_r.to_string(),
                m.n_samples.to_string(),
            ]
        })
        .collect()
}

pub fn write_metrics_csv(path: impl AsRef<Path>, config: &[(String, String)], rows: &[(String, &MetricsReport)]) -> Result<()> {
    write_table(path.as_ref(), config, &METRICS_COLUMNS, &metrics_rows(rows))
}

pub fn write_bins_csv(path: impl AsRef<Path>, config: &[(String, String)], rows: &[(String, &[BinStats])]) -> Result<()> {
    let mut out = Vec::new();
    for (name, bins) in rows {
        for b in bins.iter() {
            out.push(vec![
                name.clone(),
                b.lo.to_string(),
                opt(b.hi),
                b.count.to_string(),
                opt(b.mae),
                opt(b.std),
            ]);
        }
    }
    write_table(path.as_ref(), config, &BIN_COLUMNS, &out)
}

fn history_row(r: &EpochRecord) -> Vec<String> {
    vec![
        r.epoch.to_string(),
        r.lr.to_string(),
        r.train_mse.to_string(),
        r.val_mse.to_string(),
        r.wall_seconds.to_string(),
    ]
}

pub fn write_history_csv(path: impl AsRef<Path>, config: &[(String, String)], history: &[EpochRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = history.iter().map(history_row).collect();
    write_table(path.as_ref(), config, &HISTORY_COLUMNS, &rows)
}

/// Appends rows to an existing history file, or creates it when missing.
pub fn append_history_csv(path: impl AsRef<Path>, config: &[(String, String)], history: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    if !path.exists() {
        return write_history_csv(path, config, history);
    }
    let mut bytes = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut bytes);
        for r in history {
            w.write_record(history_row(r)).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let mut f = OpenOptions::new().append(true).open(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub frame: usize,
    pub t: f64,
    pub reference: f64,
    pub prediction: f64,
}

pub fn write_predictions_csv(path: impl AsRef<Path>, config: &[(String, String)], rows: &[PredictionRow]) -> Result<()> {
    let out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.frame.to_string(), r.t.to_string(), r.reference.to_string(), r.prediction.to_string()])
        .collect();
    write_table(path.as_ref(), config, &PREDICTION_COLUMNS, &out)
}

/// Header and data rows of one of our CSV files, skipping the config echo.
/// One row per frame: `frame, t, f0, f1, ...`.
pub fn write_features_csv(
    path: impl AsRef<Path>,
    config: &[(String, String)],
    frames: &[(usize, f64)],
    features: &[Vec<f64>],
) -> Result<()> {
    let width = features.first().map_or(0, Vec::len);
    let mut header: Vec<String> = vec!["frame".into(), "t".into()];
    header.extend((0..width).map(|i| format!("f{i}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = frames
        .iter()
        .zip(features)
        .map(|(&(i, t), f)| {
            let mut row = vec![i.to_string(), t.to_string()];
            row.extend(f.iter().map(f64::to_string));
            row
        })
        .collect();
    write_table(path.as_ref(), config, &header_refs, &rows)
}

pub fn read_table(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Format(format!("{}: missing column `{name}`", path.display())))
}

fn number(s: &str, path: &Path) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Format(format!("{}: `{s}` is not a number", path.display())))
}

pub fn read_predictions_csv(path: impl AsRef<Path>) -> Result<Vec<PredictionRow>> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    let idx: Vec<usize> = PREDICTION_COLUMNS
        .iter()
        .map(|c| column(&header, c, path))
        .collect::<Result<_>>()?;
    rows.iter()
        .map(|r| {
            Ok(PredictionRow {
                frame: number(&r[idx[0]], path)? as usize,
                t: number(&r[idx[1]], path)?,
                reference: number(&r[idx[2]], path)?,
                prediction: number(&r[idx[3]], path)?,
            })
        })
        .collect()
}

/// Per-variant bins from a file written by [`write_bins_csv`], in file order.
pub fn read_bins_csv(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<BinStats>)>> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    let idx: Vec<usize> = BIN_COLUMNS.iter().map(|c| column(&header, c, path)).collect::<Result<_>>()?;
    let optional = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { number(s, path).map(Some) } };
    let mut out: Vec<(String, Vec<BinStats>)> = Vec::new();
    for r in &rows {
        let bin = BinStats {
            lo: number(&r[idx[1]], path)?,
            hi: optional(&r[idx[2]])?,
            count: number(&r[idx[3]], path)? as usize,
            mae: optional(&r[idx[4]])?,
            std: optional(&r[idx[5]])?,
        };
        match out.last_mut() {
            Some((name, bins)) if *name == r[idx[0]] => bins.push(bin),
            _ => out.push((r[idx[0]].clone(), vec![bin])),
        }
    }
    Ok(out)
}
