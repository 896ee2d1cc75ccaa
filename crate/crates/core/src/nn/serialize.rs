use base64::Engine;
use base64::engine::general_purpose::STANDARD;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layers::Dense;
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// One parameter tensor: shape plus base64 of little-endian `f32` data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorBlock {
    pub name: String,
    pub shape: [usize; 2],
    pub data: String,
}

impl TensorBlock {
    pub fn encode(name: impl Into<String>, m: &Matrix<f32>) -> Self {
        Self {
            name: name.into(),
            shape: [m.rows(), m.cols()],
            data: STANDARD.encode(m.to_le_bytes()),
        }
    }

    pub fn decode(&self) -> Result<Matrix<f32>> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Decode(format!("{}: {e}", self.name)))?;
        let [rows, cols] = self.shape;
        if bytes.len() != rows * cols * 4 {
            return Err(Error::Decode(format!(
                "{}: {} bytes for shape {rows}x{cols}",
                self.name,
                bytes.len()
            )));
        }
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("decoded tensor"));
        }
        Matrix::new(rows, cols, data)
    }
}

pub fn encode_dense(prefix: &str, layer: &Dense<f32>) -> [TensorBlock; 2] {
    [
        TensorBlock::encode(format!("{prefix}.weight"), &layer.weight),
        TensorBlock::encode(format!("{prefix}.bias"), &layer.bias),
    ]
}

/// Pops `{prefix}.weight` and `{prefix}.bias` from `blocks`.
pub fn decode_dense(prefix: &str, blocks: &[TensorBlock]) -> Result<Dense<f32>> {
    let find = |suffix: &str| {
        let name = format!("{prefix}.{suffix}");
        blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Decode(format!("missing tensor {name}")))
            .and_then(TensorBlock::decode)
    };
    Dense::from_params(find("weight")?, find("bias")?)
}

/// SHA-256 over the raw bytes of `tensors`, in order, as lowercase hex.
pub fn params_digest<'a>(tensors: impl IntoIterator<Item = &'a Matrix<f32>>) -> String {
    let mut h = Sha256::new();
    for t in tensors {
        h.update((t.rows() as u64).to_le_bytes());
        h.update((t.cols() as u64).to_le_bytes());
        h.update(t.to_le_bytes());
    }
    hex(&h.finalize())
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
