//! `manifest.jsonl`: one JSON object per line describing a single stream record.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Rgb,
    Depth,
    Force,
}

impl StreamKind {
    pub fn name(self) -> &'static str {
        match self {
            StreamKind::Rgb => "rgb",
            StreamKind::Depth => "depth",
            StreamKind::Force => "force",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Path relative to the dataset directory.
    File(PathBuf),
    /// Inline z-force in newtons.
    Force(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub kind: StreamKind,
    pub t: f64,
    pub payload: Payload,
}

impl StreamRecord {
    pub fn file(kind: StreamKind, t: f64, path: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            t,
            payload: Payload::File(path.into()),
        }
    }

    pub fn force(t: f64, fz: f64) -> Self {
        Self {
            kind: StreamKind::Force,
            t,
            payload: Payload::Force(fz),
        }
    }

    pub fn fz(&self) -> Option<f64> {
        match self.payload {
            Payload::Force(v) => Some(v),
            Payload::File(_) => None,
        }
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.payload {
            Payload::File(p) => Some(p),
            Payload::Force(_) => None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    kind: StreamKind,
    t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fz: Option<f64>,
}

/// The three time-ordered streams of a dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Streams {
    pub rgb: Vec<StreamRecord>,
    pub depth: Vec<StreamRecord>,
    pub force: Vec<StreamRecord>,
}

impl Streams {
    pub fn validate(&self) -> Result<()> {
        for (name, stream) in [("rgb", &self.rgb), ("depth", &self.depth), ("force", &self.force)] {
            for (i, pair) in stream.windows(2).enumerate() {
                if pair[1].t <= pair[0].t {
                    return Err(Error::NonMonotone {
                        stream: name,
                        index: i + 1,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn push(&mut self, record: StreamRecord) {
        match record.kind {
            StreamKind::Rgb => self.rgb.push(record),
            StreamKind::Depth => self.depth.push(record),
            StreamKind::Force => self.force.push(record),
        }
    }

    /// Serialize in the line format, interleaving rgb/depth/force per index.
    pub fn to_jsonl(&self) -> String {
        let n = self.rgb.len().max(self.depth.len()).max(self.force.len());
        let mut out = String::new();
        for i in 0..n {
            for stream in [&self.rgb, &self.depth, &self.force] {
                if let Some(r) = stream.get(i) {
                    out.push_str(&record_line(r));
                    out.push('\n');
                }
            }
        }
        out
    }
}

fn record_line(r: &StreamRecord) -> String {
    let line = match &r.payload {
        Payload::File(p) => Line {
            kind: r.kind,
            t: r.t,
            file: Some(p.to_string_lossy().into_owned()),
            fz: None,
        },
        Payload::Force(fz) => Line {
            kind: r.kind,
            t: r.t,
            file: None,
            fz: Some(*fz),
        },
    };
    serde_json::to_string(&line).expect("manifest line serializes")
}

/// Parse manifest text. Line numbers in errors are 1-based; blank lines are skipped.
pub fn parse_manifest(text: &str) -> Result<Streams> {
    let mut streams = Streams::default();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let bad = |msg: &str| Error::Parse {
            line: lineno,
            msg: msg.to_string(),
        };
        if !line.t.is_finite() {
            return Err(bad("timestamp is not finite"));
        }
        let record = match (line.kind, line.file, line.fz) {
            (StreamKind::Force, None, Some(fz)) => {
                if !fz.is_finite() {
                    return Err(bad("fz is not finite"));
                }
                StreamRecord::force(line.t, fz)
            }
            (StreamKind::Force, _, _) => return Err(bad("force record needs exactly an inline `fz`")),
            (kind, Some(file), None) => {
                if file.is_empty() {
                    return Err(bad("empty `file`"));
                }
                StreamRecord::file(kind, line.t, file)
            }
            (kind, _, _) => {
                return Err(bad(&format!("{} record needs exactly a `file`", kind.name())));
            }
        };
        streams.push(record);
    }
    streams.validate()?;
    Ok(streams)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Streams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn write_manifest(streams: &Streams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, streams.to_jsonl()).map_err(|e| Error::io(path, e))
}
