//! Binary checkpoint format.
//!
//! ```text
//! "KWS1" | version: u32 LE | header_len: u32 LE | header (UTF-8 JSON) | f32 LE values
//! ```
//!
//! The header names the network spec, class names, training metadata and
//! the shape of every tensor. Values follow in canonical order: per layer,
//! weights then biases; batch-norm layers store γ, β, moving mean, moving
//! variance.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{Network, NetworkSpec};

pub const MAGIC: [u8; 4] = *b"KWS1";
pub const VERSION: u32 = 1;
const PREAMBLE: usize = 12;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint header is not valid: {0}")]
    BadHeader(String),
    #[error("checkpoint does not describe the expected network: {0}")]
    SpecMismatch(String),
    #[error("checkpoint payload truncated: expected {expected} values, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("checkpoint has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub epochs_completed: usize,
    pub best_val_accuracy: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub spec: NetworkSpec,
    pub class_names: Vec<String>,
    pub metadata: Metadata,
    pub tensors: Vec<TensorInfo>,
}

impl Header {
    pub fn value_count(&self) -> usize {
        self.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum()
    }
}

pub fn to_bytes(network: &Network<f32>, metadata: &Metadata) -> Vec<u8> {
    let tensors = network.tensors();
    let header = Header {
        spec: network.spec().clone(),
        class_names: network.spec().class_names.clone(),
        metadata: metadata.clone(),
        tensors: tensors
            .iter()
            .map(|(name, shape, _)| TensorInfo {
                name: name.clone(),
                shape: shape.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(PREAMBLE + json.len() + 4 * header.value_count());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, _, values) in &tensors {
        for v in values.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Parses and validates the header without touching the payload.
/// Returns the header and the payload offset.
pub fn read_header(bytes: &[u8]) -> Result<(Header, usize), CheckpointError> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < PREAMBLE {
        return Err(CheckpointError::BadHeader("file ends inside the preamble".into()));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let len = u32_at(bytes, 8) as usize;
    let end = PREAMBLE
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| CheckpointError::BadHeader("file ends inside the header".into()))?;
    let header: Header =
        serde_json::from_slice(&bytes[PREAMBLE..end]).map_err(|e| CheckpointError::BadHeader(e.to_string()))?;

    let expected = NetworkSpec::reference();
    if header.spec != expected {
        return Err(CheckpointError::SpecMismatch("layer list differs from the reference architecture".into()));
    }
    if header.class_names != expected.class_names {
        return Err(CheckpointError::SpecMismatch(format!("class names {:?}", header.class_names)));
    }
    let reference = Network::<f32>::zeros(expected).expect("reference spec is valid");
    let shapes: Vec<TensorInfo> = reference
        .tensors()
        .into_iter()
        .map(|(name, shape, _)| TensorInfo { name, shape })
        .collect();
    if header.tensors != shapes {
        return Err(CheckpointError::SpecMismatch("tensor list differs from the architecture".into()));
    }
    Ok((header, end))
}

pub fn from_bytes(bytes: &[u8]) -> Result<(Network<f32>, Metadata), CheckpointError> {
    let (header, offset) = read_header(bytes)?;
    let payload = &bytes[offset..];
    let expected = header.value_count();
    let found = payload.len() / 4;
    if found < expected {
        return Err(CheckpointError::TruncatedPayload { expected, found });
    }
    if payload.len() > expected * 4 {
        return Err(CheckpointError::TrailingBytes(payload.len() - expected * 4));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let mut network = Network::<f32>::zeros(header.spec).map_err(|e| CheckpointError::SpecMismatch(e.to_string()))?;
    network
        .load_tensors(&values)
        .map_err(|e| CheckpointError::SpecMismatch(e.to_string()))?;
    Ok((network, header.metadata))
}

pub fn save(network: &Network<f32>, metadata: &Metadata, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(network, metadata)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<(Network<f32>, Metadata), CheckpointError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Network<f32>, Metadata) {
        let meta = Metadata {
            epochs_completed: 3,
            best_val_accuracy: Some(0.5),
            seed: 17,
        };
        (Network::reference(4), meta)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let (net, meta) = sample();
        let bytes = to_bytes(&net, &meta);
        let (back, m) = from_bytes(&bytes).unwrap();
        assert_eq!(m, meta);
        let a: Vec<u32> = net.tensors().iter().flat_map(|t| t.2.iter().map(|v| v.to_bits())).collect();
        let b: Vec<u32> = back.tensors().iter().flat_map(|t| t.2.iter().map(|v| v.to_bits())).collect();
        assert_eq!(a, b);
        assert_eq!(to_bytes(&back, &m), bytes);
    }

    #[test]
    fn payload_holds_every_value() {
        let (net, meta) = sample();
        let bytes = to_bytes(&net, &meta);
        let (header, offset) = read_header(&bytes).unwrap();
        assert_eq!(header.value_count(), 22657);
        assert_eq!(bytes.len() - offset, 4 * 22657);
        assert_eq!(header.tensors[0].name, "conv1.weights");
        assert_eq!(header.tensors[0].shape, [10, 7, 1, 8]);
    }

    #[test]
    fn rejects_corruption() {
        let (net, meta) = sample();
        let bytes = to_bytes(&net, &meta);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(CheckpointError::BadMagic)));

        let mut v2 = bytes.clone();
        v2[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(from_bytes(&v2), Err(CheckpointError::UnsupportedVersion(2))));

        let short = &bytes[..bytes.len() - 4];
        assert!(matches!(
            from_bytes(short),
            Err(CheckpointError::TruncatedPayload { expected: 22657, found: 22656 })
        ));

        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(from_bytes(&long), Err(CheckpointError::TrailingBytes(1))));
    }

    #[test]
    fn rejects_other_architectures() {
        let (net, meta) = sample();
        let bytes = to_bytes(&net, &meta);
        let (mut header, offset) = read_header(&bytes).unwrap();
        header.class_names.swap(0, 1);
        header.spec.class_names.swap(0, 1);
        let json = serde_json::to_vec(&header).unwrap();
        let mut edited = Vec::new();
        edited.extend_from_slice(&MAGIC);
        edited.extend_from_slice(&VERSION.to_le_bytes());
        edited.extend_from_slice(&(json.len() as u32).to_le_bytes());
        edited.extend_from_slice(&json);
        edited.extend_from_slice(&bytes[offset..]);
        assert!(matches!(from_bytes(&edited), Err(CheckpointError::SpecMismatch(_))));
    }
}
