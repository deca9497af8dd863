//! Binary checkpoint format.
//!
//! ```text
//! "GBLD"                       magic
//! u32 LE                       format version
//! u32 LE + UTF-8               config block (key=value lines)
//! repeated per parameter, in architecture order:
//!   u32 LE + UTF-8             name
//!   u64 LE                     element count
//!   f32 LE * count             values
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::config::AutoencoderConfig;
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 4] = b"GBLD";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingMeta {
    pub steps: u64,
    pub final_loss: Option<f32>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub version: u32,
    pub config: AutoencoderConfig,
    /// Parameter tensors in [`crate::model::Architecture::param_layout`] order.
    pub params: Vec<Tensor<f32>>,
    pub meta: TrainingMeta,
}

impl ModelCheckpoint {
    pub fn param_names(&self) -> Vec<String> {
        match self.config.architecture() {
            Ok(arch) => arch.param_layout().into_iter().map(|(n, _)| n).collect(),
            Err(_) => (0..self.params.len()).map(|i| format!("#{i}")).collect(),
        }
    }

    /// True when both checkpoints hold the same bits, not just equal values.
    pub fn bit_identical(&self, other: &ModelCheckpoint) -> bool {
        self.to_bytes() == other.to_bytes()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut text = self.config.to_text();
        text.push_str(&format!("meta.steps={}\n", self.meta.steps));
        match self.meta.final_loss {
            Some(l) => text.push_str(&format!("meta.final_loss={l}\n")),
            None => text.push_str("meta.final_loss=none\n"),
        }
        text.push_str(&format!("meta.seed={}\n", self.meta.seed));

        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&self.version.to_le_bytes());
        buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
        buf.extend_from_slice(text.as_bytes());
        for (name, p) in self.param_names().iter().zip(&self.params) {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(p.len() as u64).to_le_bytes());
            for v in p.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        r.take(4, "magic")?;
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let text_len = r.u32("config length")? as usize;
        let text = std::str::from_utf8(r.take(text_len, "config block")?)
            .map_err(|_| Error::Checkpoint("config block is not UTF-8".into()))?;

        let mut config = AutoencoderConfig {
            encoder: Vec::new(),
            lstm_hidden: Vec::new(),
            ..AutoencoderConfig::default()
        };
        let mut meta = TrainingMeta {
            steps: 0,
            final_loss: None,
            seed: 0,
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Checkpoint(format!("config line without '=': {line:?}")))?;
            let bad = || Error::Checkpoint(format!("bad value in config line {line:?}"));
            match key {
                "meta.steps" => meta.steps = value.parse().map_err(|_| bad())?,
                "meta.seed" => meta.seed = value.parse().map_err(|_| bad())?,
                "meta.final_loss" => {
                    meta.final_loss = match value {
                        "none" => None,
                        v => Some(v.parse().map_err(|_| bad())?),
                    }
                }
                _ => config.set(key, value).map_err(|e| Error::Checkpoint(e.to_string()))?,
            }
        }
        let arch = config
            .architecture()
            .map_err(|e| Error::Checkpoint(format!("stored config is invalid: {e}")))?;

        let mut params = Vec::new();
        for (expected_name, shape) in arch.param_layout() {
            let name_len = r.u32("parameter name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "parameter name")?)
                .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
            if name != expected_name {
                return Err(Error::Checkpoint(format!(
                    "expected parameter {expected_name:?}, found {name:?}"
                )));
            }
            let count = r.u64("element count")? as usize;
            let expected: usize = shape.iter().product();
            if count != expected {
                return Err(Error::Checkpoint(format!(
                    "{name}: {count} elements stored, architecture needs {expected}"
                )));
            }
            let raw = r.take(count * 4, name)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            params.push(Tensor::new(shape, data)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after last parameter",
                bytes.len() - r.pos
            )));
        }
        Ok(ModelCheckpoint {
            version,
            config,
            params,
            meta,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "file ends inside {what} at byte {}",
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}

pub fn save_checkpoint(checkpoint: &ModelCheckpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelCheckpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelCheckpoint::from_bytes(&bytes)
}
