//! Checkpoint persistence: a JSON manifest describing the run plus a
//! binary payload of little-endian 64-bit reals, row-major.
//!
//! A checkpoint is a directory holding `manifest.json` and `payload.bin`.
//! The manifest records the format version, the model shape, a tensor
//! index (name, dims, byte offset, element count), the training-loop RNG
//! state, optimizer counters, and a SHA-256 digest of the payload. Loads
//! are bit-exact inverses of saves, and the three ways an artifact can be
//! bad — wrong version, corrupted bytes, missing bytes — surface as
//! distinct errors.

use std::path::Path;

use mpdbm_core::model::{FullState, Gradient, ModelShape, Offsets, Params};
use mpdbm_core::mp::TrainerState;
use mpdbm_core::numerics::Rng;
use mpdbm_core::pcd::ChainPool;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::Method;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint version {found} (this build reads version {expected})")]
    UnsupportedVersion { found: u64, expected: u64 },
    #[error("checkpoint checksum mismatch: manifest says {expected}, payload hashes to {actual}")]
    ChecksumMismatch { expected: String, actual: String },
    #[error("checkpoint payload truncated: needs {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type CkptResult<T> = Result<T, CheckpointError>;

/// Everything a training run needs to continue exactly where it stopped.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub method: Method,
    pub params: Params,
    pub opt: TrainerState,
    /// Training-loop RNG, captured at the epoch boundary.
    pub rng: Rng,
    /// Persistent sampler state; present only for the generative method.
    pub chains: Option<ChainPool>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u64,
    method: String,
    shape: ManifestShape,
    epoch: usize,
    step: usize,
    /// Best early-stopping metric so far; absent until first measured.
    best_metric: Option<f64>,
    epochs_since_best: usize,
    rng: RngRecord,
    chain_rngs: Vec<RngRecord>,
    tensors: Vec<TensorEntry>,
    payload_sha256: String,
}

#[derive(Serialize, Deserialize)]
struct ManifestShape {
    d: usize,
    layers: Vec<usize>,
    k: usize,
}

#[derive(Serialize, Deserialize)]
struct RngRecord {
    seed: String,
    word_pos: String,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    dims: Vec<usize>,
    /// Byte offset into the payload.
    offset: usize,
    /// Element count (64-bit reals).
    len: usize,
}

impl RngRecord {
    fn of(rng: &Rng) -> RngRecord {
        let (seed, word_pos) = rng.state();
        RngRecord {
            seed: hex::encode(seed),
            word_pos: word_pos.to_string(),
        }
    }

    fn restore(&self) -> CkptResult<Rng> {
        let bytes = hex::decode(&self.seed)
            .map_err(|e| CheckpointError::Malformed(format!("rng seed hex: {e}")))?;
        let seed: [u8; 32] = bytes
            .try_into()
            .map_err(|_| CheckpointError::Malformed("rng seed must be 32 bytes".into()))?;
        let word_pos: u128 = self
            .word_pos
            .parse()
            .map_err(|e| CheckpointError::Malformed(format!("rng word_pos: {e}")))?;
        Ok(Rng::from_state(seed, word_pos))
    }
}

/// Serialize-side tensor accumulator.
struct PayloadBuilder {
    bytes: Vec<u8>,
    tensors: Vec<TensorEntry>,
}

impl PayloadBuilder {
    fn new() -> Self {
        PayloadBuilder {
            bytes: Vec::new(),
            tensors: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, dims: Vec<usize>, data: &[f64]) {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        self.tensors.push(TensorEntry {
            name: name.to_string(),
            dims,
            offset: self.bytes.len(),
            len: data.len(),
        });
        for x in data {
            self.bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
}

fn tensor_dims(shape: &ModelShape, id: mpdbm_core::model::TensorId) -> Vec<usize> {
    use mpdbm_core::model::TensorId::*;
    let nl = shape.layer_sizes.len();
    match id {
        W(0) => vec![shape.d, shape.layer_sizes[0]],
        W(l) => vec![shape.layer_sizes[l - 1], shape.layer_sizes[l]],
        Wy => vec![shape.layer_sizes[nl - 1], shape.k],
        BiasV => vec![shape.d],
        BiasH(l) => vec![shape.layer_sizes[l]],
        BiasY => vec![shape.k],
    }
}

pub fn save_checkpoint(dir: &Path, ckpt: &Checkpoint) -> CkptResult<()> {
    std::fs::create_dir_all(dir)?;
    let shape = &ckpt.params.shape;
    let mut pb = PayloadBuilder::new();

    for id in ckpt.params.tensor_ids() {
        pb.push(&id.to_string(), tensor_dims(shape, id), ckpt.params.tensor(id));
    }
    if let Some(off) = &ckpt.params.offsets {
        pb.push("off_v", vec![shape.d], &off.v);
        for (l, o) in off.h.iter().enumerate() {
            pb.push(&format!("off_h[{l}]"), vec![o.len()], o);
        }
        if let Some(oy) = &off.y {
            pb.push("off_y", vec![oy.len()], oy);
        }
    }
    for id in ckpt.params.tensor_ids() {
        pb.push(
            &format!("vel_{id}"),
            tensor_dims(shape, id),
            ckpt.opt.velocity.tensor(id),
        );
    }
    if let Some(chains) = &ckpt.chains {
        let n = chains.len();
        let flat_v: Vec<f64> = chains.states.iter().flat_map(|s| s.v.clone()).collect();
        pb.push("chain_v", vec![n, shape.d], &flat_v);
        for (l, &sz) in shape.layer_sizes.iter().enumerate() {
            let flat: Vec<f64> = chains
                .states
                .iter()
                .flat_map(|s| s.h[l].clone())
                .collect();
            pb.push(&format!("chain_h[{l}]"), vec![n, sz], &flat);
        }
        if shape.has_label() {
            let flat: Vec<f64> = chains
                .states
                .iter()
                .map(|s| s.y.expect("labeled model chain missing label") as f64)
                .collect();
            pb.push("chain_y", vec![n], &flat);
        }
    }

    let manifest = Manifest {
        version: FORMAT_VERSION,
        method: match ckpt.method {
            Method::Mp => "mp".into(),
            Method::PcdCentered => "pcd_centered".into(),
        },
        shape: ManifestShape {
            d: shape.d,
            layers: shape.layer_sizes.clone(),
            k: shape.k,
        },
        epoch: ckpt.opt.epoch,
        step: ckpt.opt.step,
        best_metric: if ckpt.opt.best_loss.is_finite() {
            Some(ckpt.opt.best_loss)
        } else {
            None
        },
        epochs_since_best: ckpt.opt.epochs_since_best,
        rng: RngRecord::of(&ckpt.rng),
        chain_rngs: ckpt
            .chains
            .as_ref()
            .map(|c| c.rngs.iter().map(RngRecord::of).collect())
            .unwrap_or_default(),
        tensors: pb.tensors,
        payload_sha256: hex::encode(Sha256::digest(&pb.bytes)),
    };

    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?,
    )?;
    std::fs::write(dir.join("payload.bin"), &pb.bytes)?;
    Ok(())
}

/// Load-side view over the payload with dimension checking.
struct PayloadReader<'a> {
    bytes: &'a [u8],
    tensors: &'a [TensorEntry],
}

impl PayloadReader<'_> {
    fn read(&self, name: &str, dims: &[usize]) -> CkptResult<Vec<f64>> {
        let entry = self
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| CheckpointError::Malformed(format!("tensor `{name}` missing")))?;
        if entry.dims != dims {
            return Err(CheckpointError::Malformed(format!(
                "tensor `{name}` has dims {:?}, expected {:?}",
                entry.dims, dims
            )));
        }
        if entry.len != dims.iter().product::<usize>() {
            return Err(CheckpointError::Malformed(format!(
                "tensor `{name}` length {} does not match dims {:?}",
                entry.len, entry.dims
            )));
        }
        let end = entry.offset + entry.len * 8;
        let slice = &self.bytes[entry.offset..end];
        Ok(slice
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn has(&self, name: &str) -> bool {
        self.tensors.iter().any(|t| t.name == name)
    }
}

pub fn load_checkpoint(dir: &Path) -> CkptResult<Checkpoint> {
    let manifest_text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| CheckpointError::Malformed(format!("manifest: {e}")))?;
    if manifest.version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion {
            found: manifest.version,
            expected: FORMAT_VERSION,
        });
    }
    let payload = std::fs::read(dir.join("payload.bin"))?;
    let needed = manifest
        .tensors
        .iter()
        .map(|t| t.offset + t.len * 8)
        .max()
        .unwrap_or(0);
    if payload.len() < needed {
        return Err(CheckpointError::Truncated {
            needed,
            found: payload.len(),
        });
    }
    let actual = hex::encode(Sha256::digest(&payload));
    if actual != manifest.payload_sha256 {
        return Err(CheckpointError::ChecksumMismatch {
            expected: manifest.payload_sha256,
            actual,
        });
    }

    let method = match manifest.method.as_str() {
        "mp" => Method::Mp,
        "pcd_centered" => Method::PcdCentered,
        other => {
            return Err(CheckpointError::Malformed(format!(
                "unknown method `{other}`"
            )))
        }
    };
    let shape = ModelShape::new(
        manifest.shape.d,
        manifest.shape.layers.clone(),
        manifest.shape.k,
    )
    .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    let reader = PayloadReader {
        bytes: &payload,
        tensors: &manifest.tensors,
    };

    let mut params = Params::zeros(shape.clone());
    for id in params.tensor_ids() {
        let data = reader.read(&id.to_string(), &tensor_dims(&shape, id))?;
        params.tensor_mut(id).copy_from_slice(&data);
    }
    if reader.has("off_v") {
        let v = reader.read("off_v", &[shape.d])?;
        let mut h = Vec::new();
        for (l, &sz) in shape.layer_sizes.iter().enumerate() {
            h.push(reader.read(&format!("off_h[{l}]"), &[sz])?);
        }
        let y = if shape.has_label() {
            Some(reader.read("off_y", &[shape.k])?)
        } else {
            None
        };
        params.offsets = Some(Offsets { v, h, y });
    }

    let mut velocity = Gradient::zeros(&shape);
    for id in params.tensor_ids() {
        let data = reader.read(&format!("vel_{id}"), &tensor_dims(&shape, id))?;
        velocity.tensor_mut(id).copy_from_slice(&data);
    }

    let chains = if manifest.chain_rngs.is_empty() {
        None
    } else {
        let n = manifest.chain_rngs.len();
        let flat_v = reader.read("chain_v", &[n, shape.d])?;
        let mut flat_h = Vec::new();
        for (l, &sz) in shape.layer_sizes.iter().enumerate() {
            flat_h.push(reader.read(&format!("chain_h[{l}]"), &[n, sz])?);
        }
        let flat_y = if shape.has_label() {
            Some(reader.read("chain_y", &[n])?)
        } else {
            None
        };
        let mut states = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = FullState::zeros(&shape);
            s.v.copy_from_slice(&flat_v[i * shape.d..(i + 1) * shape.d]);
            for (l, &sz) in shape.layer_sizes.iter().enumerate() {
                s.h[l].copy_from_slice(&flat_h[l][i * sz..(i + 1) * sz]);
            }
            if let Some(fy) = &flat_y {
                let c = fy[i];
                if c < 0.0 || c.fract() != 0.0 || c as usize >= shape.k {
                    return Err(CheckpointError::Malformed(format!(
                        "chain {i} label {c} out of range"
                    )));
                }
                s.y = Some(c as usize);
            }
            states.push(s);
        }
        let rngs = manifest
            .chain_rngs
            .iter()
            .map(|r| r.restore())
            .collect::<CkptResult<Vec<_>>>()?;
        Some(ChainPool { states, rngs })
    };

    Ok(Checkpoint {
        method,
        params,
        opt: TrainerState {
            velocity,
            epoch: manifest.epoch,
            step: manifest.step,
            best_loss: manifest.best_metric.unwrap_or(f64::INFINITY),
            epochs_since_best: manifest.epochs_since_best,
        },
        rng: manifest.rng.restore()?,
        chains,
    })
}
