use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochRecord, TrainConfig};
use crate::encoder::{Encoder, EncoderConfig, EncoderParams, Head, LabelSpace};
use crate::error::{Error, Result};
use crate::json;
use crate::losses::PhaseKind;
use crate::protopool::PrototypePool;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume training or to predict: label space, encoder,
/// head, prototype pool and the training record.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub label_space: LabelSpace,
    pub encoder: Encoder,
    pub head: Head,
    pub pool: PrototypePool,
    pub train_config: TrainConfig,
    pub phase: PhaseKind,
    pub seed: u64,
    pub loss_trace: Vec<EpochRecord>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    label_space: LabelSpace,
    encoder_config: EncoderConfig,
    encoder_params: EncoderParams,
    head_params: Head,
    pool: PrototypePool,
    train_config: TrainConfig,
    phase: PhaseKind,
    seed: u64,
    loss_trace: Vec<EpochRecord>,
}

impl Checkpoint {
    /// Checks the cross-field invariants: head rows match the label space,
    /// pool dimension matches H, pool slots follow the label space.
    pub fn validate(&self) -> Result<()> {
        let h = self.encoder.hidden_dim();
        self.head.check(&self.label_space, h)?;
        if self.pool.dim() != h {
            return Err(Error::Checkpoint(format!(
                "pool dimension {} differs from hidden_dim {h}",
                self.pool.dim()
            )));
        }
        if !self
            .pool
            .classes()
            .eq(self.label_space.classes().iter().copied())
        {
            return Err(Error::Checkpoint(
                "pool classes differ from the label space".into(),
            ));
        }
        if !self.head.w.is_finite() || !self.head.b.iter().all(|b| b.is_finite()) {
            return Err(Error::Numerics("head parameters are not finite".into()));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            label_space: self.label_space.clone(),
            encoder_config: self.encoder.config.clone(),
            encoder_params: self.encoder.params.clone(),
            head_params: self.head.clone(),
            pool: self.pool.clone(),
            train_config: self.train_config.clone(),
            phase: self.phase,
            seed: self.seed,
            loss_trace: self.loss_trace.clone(),
        };
        json::to_writer(&mut w, &file)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(r)?;
        let version = value.get("version").and_then(serde_json::Value::as_u64);
        if version != Some(CHECKPOINT_VERSION as u64) {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version:?}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let file: CheckpointFile = serde_json::from_value(value)?;
        let ckpt = Checkpoint {
            label_space: file.label_space,
            encoder: Encoder::from_parts(file.encoder_config, file.encoder_params)?,
            head: file.head_params,
            pool: file.pool,
            train_config: file.train_config,
            phase: file.phase,
            seed: file.seed,
            loss_trace: file.loss_trace,
        };
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
