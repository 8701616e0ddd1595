//! Model checkpoint container.
//!
//! ```text
//! FORCECAST-CHECKPOINT 1
//! meta <key> <value>            zero or more
//! config <n>                    followed by n bytes of config text and '\n'
//! array <name> <len>            one per array; parameters, then buffers
//! data <bytes>                  followed by the arrays as little-endian f64
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::params::Params;

pub const MAGIC: &str = "FORCECAST-CHECKPOINT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub config: String,
    pub arrays: Vec<(String, Vec<f64>)>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn valid_token(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_graphic())
}

impl Checkpoint {
    pub fn from_model<M: Params>(model: &M, config: String, meta: Vec<(String, String)>) -> Self {
        let mut arrays = Vec::new();
        model.visit(&mut |name, p| arrays.push((format!("param.{name}"), p.to_vec())));
        model.visit_buffers(&mut |name, p| arrays.push((format!("buffer.{name}"), p.to_vec())));
        Self { meta, config, arrays }
    }

    /// Copy arrays into `model`, requiring names and lengths to match its layout exactly.
    pub fn apply_to<M: Params>(&self, model: &mut M) -> Result<()> {
        let mut expected = Vec::new();
        model.visit(&mut |name, p| expected.push((format!("param.{name}"), p.len())));
        model.visit_buffers(&mut |name, p| expected.push((format!("buffer.{name}"), p.len())));
        if expected.len() != self.arrays.len() {
            return Err(bad(format!(
                "checkpoint has {} arrays, model expects {}",
                self.arrays.len(),
                expected.len()
            )));
        }
        for ((name, len), (got_name, data)) in expected.iter().zip(&self.arrays) {
            if name != got_name || *len != data.len() {
                return Err(bad(format!(
                    "array mismatch: model has {name}[{len}], checkpoint has {got_name}[{}]",
                    data.len()
                )));
            }
        }
        let mut it = self.arrays.iter();
        model.visit_mut(&mut |_, p| p.copy_from_slice(&it.next().expect("checked").1));
        model.visit_buffers_mut(&mut |_, p| p.copy_from_slice(&it.next().expect("checked").1));
        Ok(())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = format!("{MAGIC} {VERSION}\n").into_bytes();
        for (k, v) in &self.meta {
            if !valid_token(k) || v.contains('\n') {
                return Err(bad(format!("invalid meta entry {k:?}")));
            }
            out.extend_from_slice(format!("meta {k} {v}\n").as_bytes());
        }
        out.extend_from_slice(format!("config {}\n", self.config.len()).as_bytes());
        out.extend_from_slice(self.config.as_bytes());
        out.push(b'\n');
        let mut total = 0usize;
        for (name, data) in &self.arrays {
            if !valid_token(name) {
                return Err(bad(format!("invalid array name {name:?}")));
            }
            out.extend_from_slice(format!("array {name} {}\n", data.len()).as_bytes());
            total += data.len() * 8;
        }
        out.extend_from_slice(format!("data {total}\n").as_bytes());
        for (_, data) in &self.arrays {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let next_line = |pos: &mut usize| -> Result<&str> {
            let rest = &bytes[*pos..];
            let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header"))?;
            *pos += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8"))
        };
        let first = next_line(&mut pos)?;
        let version = first
            .strip_prefix(MAGIC)
            .and_then(|v| v.strip_prefix(' '))
            .ok_or_else(|| bad("missing checkpoint magic"))?;
        if version != VERSION.to_string() {
            return Err(bad(format!("unsupported checkpoint version {version:?}")));
        }
        let mut meta = Vec::new();
        let mut config = None;
        let mut arrays: Vec<(String, usize)> = Vec::new();
        let data_len = loop {
            let line = next_line(&mut pos)?;
            let (tag, rest) = line.split_once(' ').ok_or_else(|| bad(format!("malformed line {line:?}")))?;
            match tag {
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    if !valid_token(k) {
                        return Err(bad("invalid meta key"));
                    }
                    meta.push((k.to_string(), v.to_string()));
                }
                "config" => {
                    if config.is_some() || !arrays.is_empty() {
                        return Err(bad("config section out of order"));
                    }
                    let n: usize = rest.parse().map_err(|_| bad("bad config length"))?;
                    let end = pos.checked_add(n).filter(|&e| e < bytes.len()).ok_or_else(|| bad("truncated config"))?;
                    let text = std::str::from_utf8(&bytes[pos..end]).map_err(|_| bad("config is not UTF-8"))?;
                    if bytes[end] != b'\n' {
                        return Err(bad("config section not terminated"));
                    }
                    config = Some(text.to_string());
                    pos = end + 1;
                }
                "array" => {
                    let (name, len) = rest.rsplit_once(' ').ok_or_else(|| bad("malformed array line"))?;
                    let len: usize = len.parse().map_err(|_| bad("bad array length"))?;
                    if !valid_token(name) {
                        return Err(bad("invalid array name"));
                    }
                    arrays.push((name.to_string(), len));
                }
                "data" => break rest.parse::<usize>().map_err(|_| bad("bad data length"))?,
                _ => return Err(bad(format!("unknown section {tag:?}"))),
            }
        };
        let config = config.ok_or_else(|| bad("missing config section"))?;
        let declared = arrays
            .iter()
            .try_fold(0usize, |acc, (_, n)| n.checked_mul(8).and_then(|b| acc.checked_add(b)))
            .ok_or_else(|| bad("array sizes overflow"))?;
        if declared != data_len {
            return Err(bad(format!("arrays declare {declared} bytes, data section says {data_len}")));
        }
        let payload = &bytes[pos..];
        if payload.len() != data_len {
            return Err(bad(format!(
                "data section holds {} bytes, expected {data_len}",
                payload.len()
            )));
        }
        let mut chunks = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let arrays = arrays
            .into_iter()
            .map(|(name, n)| (name, chunks.by_ref().take(n).collect()))
            .collect();
        Ok(Self { meta, config, arrays })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}
