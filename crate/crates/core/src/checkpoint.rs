//! Binary checkpoint format.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "EMN1" | u32 version | u32 hidden | u32 alphabet | f64 lambda
//! | tensors as row-major f64 arrays, canonical order
//!   (w_beat[0..3], u_i, w_f, u_f, w_o, u_o, w_c, u_c, w_p, b_p)
//! | u32 crc32 of all preceding bytes
//! ```
//!
//! Version 1 is the standard layout. Version 2 appends the optional gate
//! bias vectors (b_e, b_f, b_o, b_c) after b_p and exists only for models
//! trained with the gate-bias flag on.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::cell::{EmuParams, GateBiases};
use crate::num::Scalar;

const MAGIC: &[u8; 4] = b"EMN1";
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic (not a checkpoint file)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    VersionMismatch(u32),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("file truncated or size inconsistent with header")]
    Truncated,
    #[error("checksum mismatch (corrupted file)")]
    CrcMismatch,
}

/// Header fields recovered from a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointMeta {
    pub version: u32,
    pub hidden: usize,
    pub alphabet: usize,
    pub lambda: f64,
}

fn tensor_scalar_count(hidden: u128, alphabet: u128, version: u32) -> u128 {
    let base = 8 * hidden * alphabet + 4 * hidden * hidden + alphabet;
    if version == 2 {
        base + 4 * hidden
    } else {
        base
    }
}

/// Serializes params plus the training λ into checkpoint bytes.
pub fn encode_checkpoint<T: Scalar>(params: &EmuParams<T>, lambda: f64) -> Vec<u8> {
    let version: u32 = if params.gate_biases.is_some() { 2 } else { 1 };
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&version.to_le_bytes());
    buf.extend_from_slice(&(params.hidden() as u32).to_le_bytes());
    buf.extend_from_slice(&(params.alphabet() as u32).to_le_bytes());
    buf.extend_from_slice(&lambda.to_le_bytes());
    for (_, tensor) in params.tensors() {
        for x in tensor {
            let v = x.to_f64().expect("scalar convertible to f64");
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

/// Parses checkpoint bytes. No partial results: any structural problem,
/// version/dimension mismatch, or checksum failure rejects the whole file.
pub fn decode_checkpoint<T: Scalar>(
    bytes: &[u8],
) -> Result<(EmuParams<T>, CheckpointMeta), CheckpointError> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(CheckpointError::Truncated);
    }
    if &bytes[0..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != 1 && version != 2 {
        return Err(CheckpointError::VersionMismatch(version));
    }
    let hidden = u32_at(8) as usize;
    let alphabet = u32_at(12) as usize;
    if hidden == 0 || alphabet == 0 {
        return Err(CheckpointError::DimensionMismatch(format!(
            "hidden {} alphabet {}",
            hidden, alphabet
        )));
    }
    let lambda = f64::from_le_bytes(bytes[16..24].try_into().unwrap());

    let expected = HEADER_LEN as u128
        + 8 * tensor_scalar_count(hidden as u128, alphabet as u128, version)
        + 4;
    if bytes.len() as u128 != expected {
        return Err(CheckpointError::Truncated);
    }
    let body_end = bytes.len() - 4;
    let stored_crc = u32::from_le_bytes(bytes[body_end..].try_into().unwrap());
    if crc32fast::hash(&bytes[..body_end]) != stored_crc {
        return Err(CheckpointError::CrcMismatch);
    }

    let mut params = EmuParams::<T>::zeros(hidden, alphabet);
    if version == 2 {
        params.gate_biases = Some(GateBiases {
            b_e: vec![T::zero(); hidden],
            b_f: vec![T::zero(); hidden],
            b_o: vec![T::zero(); hidden],
            b_c: vec![T::zero(); hidden],
        });
    }
    let mut off = HEADER_LEN;
    for (_, tensor) in params.tensors_mut() {
        for x in tensor.iter_mut() {
            let v = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            *x = T::from(v).ok_or_else(|| {
                CheckpointError::DimensionMismatch("value not representable".into())
            })?;
            off += 8;
        }
    }
    debug_assert_eq!(off, body_end);

    Ok((
        params,
        CheckpointMeta {
            version,
            hidden,
            alphabet,
            lambda,
        },
    ))
}

pub fn save_checkpoint<T: Scalar>(
    params: &EmuParams<T>,
    lambda: f64,
    path: &Path,
) -> Result<(), CheckpointError> {
    fs::write(path, encode_checkpoint(params, lambda))?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(
    path: &Path,
) -> Result<(EmuParams<T>, CheckpointMeta), CheckpointError> {
    let bytes = fs::read(path)?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(gate_biases: bool) -> EmuParams<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        EmuParams::init(6, 9, gate_biases, &mut rng)
    }

    #[test]
    fn roundtrip_is_bitwise_identity() {
        let params = random_params(false);
        let bytes = encode_checkpoint(&params, 0.5);
        let (back, meta) = decode_checkpoint::<f64>(&bytes).unwrap();
        assert_eq!(back, params);
        assert_eq!(meta, CheckpointMeta { version: 1, hidden: 6, alphabet: 9, lambda: 0.5 });
        // Deterministic serialization.
        assert_eq!(bytes, encode_checkpoint(&params, 0.5));
    }

    #[test]
    fn gate_bias_models_use_version_two() {
        let mut params = random_params(true);
        if let Some(b) = &mut params.gate_biases {
            b.b_e[0] = 0.25;
            b.b_c[5] = -1.5;
        }
        let bytes = encode_checkpoint(&params, 0.3);
        let (back, meta) = decode_checkpoint::<f64>(&bytes).unwrap();
        assert_eq!(meta.version, 2);
        assert_eq!(back, params);
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = encode_checkpoint(&random_params(false), 0.5);
        bytes[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            decode_checkpoint::<f64>(&bytes),
            Err(CheckpointError::BadMagic)
        ));
    }

    #[test]
    fn truncation_rejected_without_partial_load() {
        let bytes = encode_checkpoint(&random_params(false), 0.5);
        for cut in [1, 100, bytes.len() - 1] {
            assert!(matches!(
                decode_checkpoint::<f64>(&bytes[..cut]),
                Err(CheckpointError::Truncated)
            ));
        }
    }

    #[test]
    fn unknown_version_rejected() {
        let mut bytes = encode_checkpoint(&random_params(false), 0.5);
        bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            decode_checkpoint::<f64>(&bytes),
            Err(CheckpointError::VersionMismatch(99))
        ));
    }

    #[test]
    fn flipped_byte_fails_checksum() {
        let mut bytes = encode_checkpoint(&random_params(false), 0.5);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(
            decode_checkpoint::<f64>(&bytes),
            Err(CheckpointError::CrcMismatch)
        ));
    }

    #[test]
    fn zero_dimensions_rejected() {
        let mut bytes = encode_checkpoint(&random_params(false), 0.5);
        bytes[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            decode_checkpoint::<f64>(&bytes),
            Err(CheckpointError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.emn");
        let params = random_params(false);
        save_checkpoint(&params, 0.7, &path).unwrap();
        let (back, meta) = load_checkpoint::<f64>(&path).unwrap();
        assert_eq!(back, params);
        assert_eq!(meta.lambda, 0.7);
    }
}
