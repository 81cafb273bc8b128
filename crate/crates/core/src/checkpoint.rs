//! Single-file checkpoints: a JSON header line followed by raw tensors.
//!
//! The header is `{format_version, config, manifest, meta}` where the manifest
//! lists `{name, shape, offset}` per tensor, offsets counted in bytes from the
//! first byte after the header's terminating newline. Tensor data follows in
//! manifest order as little-endian `f64`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::params::{Optimizer, ParamSet};
use crate::stein::TrainState;

pub const CHECKPOINT_FORMAT_VERSION: u64 = 1;

const THETA: &str = "theta/";
const PSI: &str = "psi/";
const GEN_M: &str = "generator_opt.first/";
const GEN_V: &str = "generator_opt.second/";
const CRIT_M: &str = "critic_opt.first/";
const CRIT_V: &str = "critic_opt.second/";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub iteration: u64,
    pub generator_step: u64,
    pub critic_step: u64,
    /// Node counts of the training graphs, the sampler's size distribution.
    pub train_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub meta: CheckpointMeta,
    pub tensors: ParamSet,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u64,
    config: RunConfig,
    manifest: Vec<Entry>,
    meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn from_state(config: &RunConfig, state: &TrainState, train_sizes: Vec<usize>) -> Self {
        let mut tensors = state.theta.with_prefix(THETA);
        tensors.extend(state.psi.with_prefix(PSI));
        tensors.extend(state.generator_opt.first.with_prefix(GEN_M));
        tensors.extend(state.generator_opt.second.with_prefix(GEN_V));
        tensors.extend(state.critic_opt.first.with_prefix(CRIT_M));
        tensors.extend(state.critic_opt.second.with_prefix(CRIT_V));
        Checkpoint {
            config: config.clone(),
            meta: CheckpointMeta {
                iteration: state.iteration,
                generator_step: state.generator_opt.step,
                critic_step: state.critic_opt.step,
                train_sizes,
            },
            tensors,
        }
    }

    pub fn theta(&self) -> ParamSet {
        self.tensors.strip_prefix(THETA)
    }

    /// Training state for continuing the run; optimizer settings come from
    /// the stored config.
    pub fn to_state(&self) -> Result<TrainState> {
        let train = self.config.train();
        let opt = |lr, step, m, v| Optimizer {
            kind: train.optimizer,
            lr,
            step,
            first: self.tensors.strip_prefix(m),
            second: self.tensors.strip_prefix(v),
        };
        let state = TrainState {
            iteration: self.meta.iteration,
            theta: self.theta(),
            psi: self.tensors.strip_prefix(PSI),
            generator_opt: opt(train.generator_lr, self.meta.generator_step, GEN_M, GEN_V),
            critic_opt: opt(train.critic_lr, self.meta.critic_step, CRIT_M, CRIT_V),
        };
        let same_names = |a: &ParamSet, b: &ParamSet| a.names().eq(b.names());
        if !same_names(&state.theta, &state.generator_opt.first)
            || !same_names(&state.theta, &state.generator_opt.second)
            || !same_names(&state.psi, &state.critic_opt.first)
            || !same_names(&state.psi, &state.critic_opt.second)
        {
            return Err(Error::Format("optimizer state does not match parameters".into()));
        }
        Ok(state)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut manifest = Vec::with_capacity(self.tensors.len());
        let mut offset = 0u64;
        for (name, t) in self.tensors.iter() {
            manifest.push(Entry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
            });
            offset += 8 * t.numel() as u64;
        }
        let header = Header {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: self.config.clone(),
            manifest,
            meta: self.meta.clone(),
        };
        let mut out = serde_json::to_vec(&header)?;
        out.push(b'\n');
        out.reserve(offset as usize);
        for (_, t) in self.tensors.iter() {
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("checkpoint header is not terminated".into()))?;
        let raw: serde_json::Value = serde_json::from_slice(&bytes[..split])?;
        let found = raw
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Format("checkpoint header lacks format_version".into()))?;
        if found != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        let header: Header = serde_json::from_value(raw)?;
        let body = &bytes[split + 1..];
        let mut tensors = BTreeMap::new();
        let mut expected = 0u64;
        for e in header.manifest {
            let numel: usize = e.shape.iter().product();
            let len = 8 * numel as u64;
            if e.offset != expected || e.offset + len > body.len() as u64 {
                return Err(Error::Format(format!("tensor `{}` has a bad offset", e.name)));
            }
            let start = e.offset as usize;
            let data = body[start..start + 8 * numel]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            if tensors.insert(e.name.clone(), Tensor::new(e.shape, data)?).is_some() {
                return Err(Error::Format(format!("tensor `{}` listed twice", e.name)));
            }
            expected += len;
        }
        if expected != body.len() as u64 {
            return Err(Error::Format(format!(
                "checkpoint has {} data bytes, manifest covers {expected}",
                body.len()
            )));
        }
        Ok(Checkpoint {
            config: header.config,
            meta: header.meta,
            tensors: ParamSet::from_map(tensors),
        })
    }

    /// Writes to a temporary sibling and renames, so a crash never leaves a
    /// truncated checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("ckpt.tmp");
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
