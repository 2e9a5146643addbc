//! Model checkpoint container.
//!
//! ```text
//! magic          8 bytes  "SPARKCK1"
//! version        u32      (1)
//! dft tag        u32 length + UTF-8
//! config         u32 length + UTF-8 TOML snapshot
//! channels       u32      observation channels d
//! param_dim      u32      physical-parameter length
//! tensor count   u32
//! table of contents, per tensor:
//!   name         u32 length + UTF-8
//!   section      u8       (0 frozen, 1 trainable)
//!   rank         u32, then rank × u32 extents
//! frozen crc     u32      CRC32 over the payload bytes of frozen tensors
//! payload        f64 data of every tensor in table order
//! crc32          u32      over every preceding byte
//! ```
//! Frozen tensors are the pretrained encoder, reconstruction decoder and
//! codebook; the trainable section holds the dynamics weights.

use std::path::Path;

use crate::codebook::Codebook;
use crate::codec::{ByteReader, ByteWriter};
use crate::config::ExperimentConfig;
use crate::dynamics::DynamicsModel;
use crate::encoder::Upstream;
use crate::error::{Result, SparkError};
use crate::fft::DFT_CONVENTION;
use crate::grid::GridGraph;
use crate::params::ParamSet;
use crate::rng::SeedStream;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"SPARKCK1";
pub const VERSION: u32 = 1;

const UPSTREAM: &str = "upstream/";
const DYNAMICS: &str = "dynamics/";
const CODEBOOK_ENTRIES: &str = "codebook/entries";
const CODEBOOK_USAGE: &str = "codebook/usage";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Section {
    Frozen,
    Trainable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub section: Section,
    pub tensor: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub dft_convention: String,
    pub config: ExperimentConfig,
    pub channels: usize,
    pub param_dim: usize,
    pub tensors: Vec<NamedTensor>,
}

/// Configuration as stored in a checkpoint: run-environment keys (output
/// directory, thread count) are reset so they do not leak into the payload.
fn snapshot(config: &ExperimentConfig) -> ExperimentConfig {
    let base = ExperimentConfig::default();
    ExperimentConfig {
        output_dir: base.output_dir,
        threads: base.threads,
        ..config.clone()
    }
}

fn frozen_crc(tensors: &[NamedTensor]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    for t in tensors.iter().filter(|t| t.section == Section::Frozen) {
        for v in t.tensor.data() {
            h.update(&v.to_le_bytes());
        }
    }
    h.finalize()
}

impl Checkpoint {
    /// Checkpoint with the frozen components only.
    pub fn pretrained(
        config: &ExperimentConfig,
        upstream: &Upstream,
        codebook: &Codebook,
        channels: usize,
        param_dim: usize,
    ) -> Self {
        let mut tensors: Vec<NamedTensor> = upstream
            .params
            .iter()
            .map(|(_, name, t)| NamedTensor {
                name: format!("{UPSTREAM}{name}"),
                section: Section::Frozen,
                tensor: t.clone(),
            })
            .collect();
        tensors.push(NamedTensor {
            name: CODEBOOK_ENTRIES.into(),
            section: Section::Frozen,
            tensor: codebook.entries.clone(),
        });
        tensors.push(NamedTensor {
            name: CODEBOOK_USAGE.into(),
            section: Section::Frozen,
            tensor: Tensor::vector(codebook.usage.iter().map(|&u| u as f64).collect()),
        });
        Self {
            dft_convention: DFT_CONVENTION.into(),
            config: snapshot(config),
            channels,
            param_dim,
            tensors,
        }
    }

    pub fn with_dynamics(mut self, config: &ExperimentConfig, model: &DynamicsModel) -> Self {
        self.tensors.retain(|t| t.section == Section::Frozen);
        self.config = snapshot(config);
        self.tensors.extend(model.params.iter().map(|(_, name, t)| NamedTensor {
            name: format!("{DYNAMICS}{name}"),
            section: Section::Trainable,
            tensor: t.clone(),
        }));
        self
    }

    pub fn has_dynamics(&self) -> bool {
        self.tensors.iter().any(|t| t.section == Section::Trainable)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name).map(|t| &t.tensor)
    }

    pub fn grid(&self) -> Result<GridGraph> {
        GridGraph::new(self.config.grid)
    }

    fn fill(&self, params: &mut ParamSet, prefix: &str) -> Result<()> {
        for id in params.ids().collect::<Vec<_>>() {
            let name = format!("{prefix}{}", params.name(id));
            let t = self
                .get(&name)
                .ok_or_else(|| SparkError::Format(format!("checkpoint lacks tensor {name}")))?;
            if t.shape() != params.get(id).shape() {
                return Err(SparkError::Incompatible(format!(
                    "tensor {name} has shape {:?}, configuration expects {:?}",
                    t.shape(),
                    params.get(id).shape()
                )));
            }
            params.set(id, t.clone())?;
        }
        Ok(())
    }

    pub fn upstream(&self) -> Result<Upstream> {
        let grid = self.grid()?;
        let mut up = Upstream::new(
            &self.config.pretrain.encoder,
            &grid,
            self.channels,
            self.param_dim,
            &mut SeedStream::new(0),
        )?;
        self.fill(&mut up.params, UPSTREAM)?;
        Ok(up)
    }

    pub fn codebook(&self) -> Result<Codebook> {
        let entries = self
            .get(CODEBOOK_ENTRIES)
            .ok_or_else(|| SparkError::Format("checkpoint lacks the codebook".into()))?;
        let mut cb = Codebook::new(entries.clone())?;
        if let Some(u) = self.get(CODEBOOK_USAGE) {
            cb.usage = u.data().iter().map(|&v| v as u64).collect();
        }
        Ok(cb)
    }

    pub fn dynamics(&self) -> Result<DynamicsModel> {
        if !self.has_dynamics() {
            return Err(SparkError::Incompatible(
                "checkpoint holds no dynamics weights (pretraining only)".into(),
            ));
        }
        let grid = self.grid()?;
        let mut model = DynamicsModel::new(
            &self.config.dynamics,
            &grid,
            self.config.pretrain.encoder.latent_dim,
            self.channels,
            &mut SeedStream::new(0),
        )?;
        self.fill(&mut model.params, DYNAMICS)?;
        Ok(model)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.str(&self.dft_convention);
        w.str(&self.config.to_toml());
        w.u32(self.channels as u32);
        w.u32(self.param_dim as u32);
        w.u32(self.tensors.len() as u32);
        for t in &self.tensors {
            w.str(&t.name);
            w.u8(match t.section {
                Section::Frozen => 0,
                Section::Trainable => 1,
            });
            w.u32(t.tensor.shape().len() as u32);
            for &e in t.tensor.shape() {
                w.u32(e as u32);
            }
        }
        w.u32(frozen_crc(&self.tensors));
        for t in &self.tensors {
            w.f64s(t.tensor.data());
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(8, "magic")? != MAGIC {
            return Err(SparkError::Format("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(SparkError::Version {
                found: version,
                expected: VERSION,
            });
        }
        let dft_convention = r.str("DFT convention tag")?;
        if dft_convention != DFT_CONVENTION {
            return Err(SparkError::Incompatible(format!(
                "checkpoint uses DFT convention {dft_convention:?}, this build uses {DFT_CONVENTION:?}"
            )));
        }
        let config = ExperimentConfig::from_toml(&r.str("config snapshot")?)?;
        let channels = r.u32("channel count")? as usize;
        let param_dim = r.u32("parameter length")? as usize;
        let count = r.u32("tensor count")? as usize;
        let mut toc = Vec::with_capacity(count.min(1 << 12));
        for _ in 0..count {
            let name = r.str("tensor name")?;
            let section = match r.u8("tensor section")? {
                0 => Section::Frozen,
                1 => Section::Trainable,
                s => return Err(SparkError::Format(format!("unknown section tag {s} for {name}"))),
            };
            let rank = r.u32("tensor rank")? as usize;
            let shape = (0..rank)
                .map(|_| r.u32("tensor extent").map(|e| e as usize))
                .collect::<Result<Vec<_>>>()?;
            toc.push((name, section, shape));
        }
        let stored_frozen = r.u32("frozen checksum")?;
        let mut tensors = Vec::with_capacity(toc.len());
        for (name, section, shape) in toc {
            let n: usize = shape.iter().product();
            let data = r.f64s(n, "tensor payload")?;
            let tensor =
                Tensor::new(shape, data).map_err(|_| SparkError::Format(format!("tensor {name} has a zero extent")))?;
            tensors.push(NamedTensor { name, section, tensor });
        }
        r.verify_trailer()?;
        let computed = frozen_crc(&tensors);
        if computed != stored_frozen {
            return Err(SparkError::Checksum {
                stored: stored_frozen,
                computed,
            });
        }
        Ok(Self {
            dft_convention,
            config,
            channels,
            param_dim,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}
