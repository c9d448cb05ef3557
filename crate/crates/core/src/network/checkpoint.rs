//! Binary model checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "CHRCKPT1" | u32 version = 1 | u8 depth | u16 base_filters |
//! u8 num_classes | u8 has_optimizer_state | u64 param_count |
//! f32 params in model order | optional f32 m array, f32 v array
//! ```
//!
//! Parameters follow the [`super::ModelParams`] kernel order, weights
//! before bias within each kernel; optimizer moment arrays use the same
//! flat order. The Adam step counter is not part of the format, so a
//! resumed run restarts bias correction.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::train::AdamState;
use super::{param_count, ModelParams, NetConfig, NetworkError};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CHRCKPT1";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found}")]
    UnsupportedVersion { found: u32 },
    #[error("checkpoint truncated: need {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checkpoint has {extra} trailing byte(s)")]
    TrailingBytes { extra: usize },
    #[error("header invalid: {what}")]
    InvalidHeader { what: &'static str },
    #[error("header declares {header} parameters but the config implies {computed}")]
    ParamCountMismatch { header: u64, computed: usize },
    #[error("checkpoint contains non-finite parameter values")]
    NonFinite,
    #[error("model: {0}")]
    Network(#[from] NetworkError),
}

fn push_f32s(out: &mut Vec<u8>, values: &[f32]) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes params (and, when given, Adam moment arrays) to `path`.
pub fn save_checkpoint(
    params: &ModelParams<f32>,
    optimizer: Option<&AdamState>,
    path: &Path,
) -> Result<(), CheckpointError> {
    let cfg = params.config();
    if cfg.in_channels != 1 {
        return Err(CheckpointError::InvalidHeader { what: "only 1-channel models are stored" });
    }
    if cfg.depth > u8::MAX as usize
        || cfg.base_filters > u16::MAX as usize
        || cfg.num_classes > u8::MAX as usize
    {
        return Err(CheckpointError::InvalidHeader { what: "config exceeds header field range" });
    }
    let flat = params.flatten();
    let mut out = Vec::with_capacity(25 + 4 * flat.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(cfg.depth as u8);
    out.extend_from_slice(&(cfg.base_filters as u16).to_le_bytes());
    out.push(cfg.num_classes as u8);
    out.push(u8::from(optimizer.is_some()));
    out.extend_from_slice(&(flat.len() as u64).to_le_bytes());
    push_f32s(&mut out, &flat);
    if let Some(state) = optimizer {
        if state.m.len() != flat.len() || state.v.len() != flat.len() {
            return Err(CheckpointError::InvalidHeader {
                what: "optimizer state length differs from parameter count",
            });
        }
        push_f32s(&mut out, &state.m);
        push_f32s(&mut out, &state.v);
    }
    fs::write(path, out)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    expected: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.at + n > self.bytes.len() {
            return Err(CheckpointError::Truncated {
                expected: self.expected.max(self.at + n),
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, CheckpointError> {
        let raw = self.take(n * 4)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Reads a checkpoint back into params and optional optimizer state.
pub fn load_checkpoint(
    path: &Path,
) -> Result<(ModelParams<f32>, Option<AdamState>), CheckpointError> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, at: 0, expected: 25 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion { found: version });
    }
    let depth = r.u8()? as usize;
    let base_filters = r.u16()? as usize;
    let num_classes = r.u8()? as usize;
    let has_optimizer = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(CheckpointError::InvalidHeader { what: "optimizer flag" }),
    };
    let declared = r.u64()?;
    let config = NetConfig { depth, base_filters, num_classes, in_channels: 1 };
    config.validate().map_err(|_| CheckpointError::InvalidHeader { what: "config fields" })?;
    let computed = param_count(&config);
    if declared != computed as u64 {
        return Err(CheckpointError::ParamCountMismatch { header: declared, computed });
    }
    r.expected = 25 + 4 * computed * if has_optimizer { 3 } else { 1 };
    let flat = r.f32s(computed)?;
    let optimizer = if has_optimizer {
        let m = r.f32s(computed)?;
        let v = r.f32s(computed)?;
        Some(AdamState { m, v, t: 0 })
    } else {
        None
    };
    if r.at != bytes.len() {
        return Err(CheckpointError::TrailingBytes { extra: bytes.len() - r.at });
    }
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(CheckpointError::NonFinite);
    }
    let mut params = ModelParams::from_kernels(
        config,
        super::kernel_shapes(&config)
            .iter()
            .map(|&(oc, ic, kh, kw)| crate::tensor::ConvKernel::zeros(oc, ic, kh, kw))
            .collect(),
    )?;
    params.load_flat(&flat)?;
    Ok((params, optimizer))
}
