//! Versioned weights container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"AGGR" | u32 version | u64 header_len | header (UTF-8 JSON) | f32 payload
//! ```
//!
//! The header maps each tensor name to `{"dtype": "f32", "shape": [..],
//! "offset": <byte offset into the payload>}`; free-form metadata lives
//! under the reserved key `__metadata__`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{NumericsError, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"AGGR";
pub const FORMAT_VERSION: u32 = 1;
pub const METADATA_KEY: &str = "__metadata__";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightsFile {
    pub metadata: Value,
    /// Tensors in payload order.
    pub tensors: Vec<(String, Tensor<f32>)>,
}

pub fn encode_weights(metadata: &Value, tensors: &[(&str, &Tensor<f32>)]) -> Result<Vec<u8>> {
    let mut header = Map::new();
    header.insert(METADATA_KEY.to_string(), metadata.clone());
    let mut offset = 0u64;
    for (name, t) in tensors {
        if *name == METADATA_KEY || header.contains_key(*name) {
            return Err(NumericsError::invalid(
                "encode_weights",
                format!("duplicate or reserved name `{name}`"),
            ));
        }
        let entry = TensorEntry {
            dtype: "f32".into(),
            shape: t.shape().to_vec(),
            offset,
        };
        header.insert(
            name.to_string(),
            serde_json::to_value(entry).expect("plain struct"),
        );
        offset += 4 * t.len() as u64;
    }
    let header = serde_json::to_vec(&Value::Object(header)).expect("json value");
    let mut out = Vec::with_capacity(16 + header.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, t) in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_weights(bytes: &[u8], path: &Path) -> Result<WeightsFile> {
    let fail = |reason: String| NumericsError::WeightsFormat {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 16 {
        return Err(fail("file shorter than the fixed preamble".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fail("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(fail(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let header_end = 16u64
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len() as u64)
        .ok_or_else(|| fail("truncated header".into()))? as usize;
    let header: Value = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| fail(format!("invalid header: {e}")))?;
    let Value::Object(mut header) = header else {
        return Err(fail("header is not a JSON object".into()));
    };
    let metadata = header.remove(METADATA_KEY).unwrap_or(Value::Null);
    let payload = &bytes[header_end..];

    let mut entries = Vec::with_capacity(header.len());
    for (name, v) in header {
        let entry: TensorEntry =
            serde_json::from_value(v).map_err(|e| fail(format!("tensor `{name}`: {e}")))?;
        if entry.dtype != "f32" {
            return Err(fail(format!(
                "tensor `{name}`: unsupported dtype {}",
                entry.dtype
            )));
        }
        entries.push((name, entry));
    }
    entries.sort_by_key(|(_, e)| e.offset);

    let mut expected_offset = 0u64;
    let mut tensors = Vec::with_capacity(entries.len());
    for (name, entry) in entries {
        if entry.offset != expected_offset {
            return Err(fail(format!(
                "tensor `{name}`: offset {} breaks contiguity",
                entry.offset
            )));
        }
        let numel = entry
            .shape
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
            .ok_or_else(|| fail(format!("tensor `{name}`: shape overflow")))?;
        let end = entry
            .offset
            .checked_add(numel * 4)
            .filter(|&e| e <= payload.len() as u64)
            .ok_or_else(|| fail(format!("tensor `{name}`: truncated payload")))?;
        let data = payload[entry.offset as usize..end as usize]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push((name, Tensor::new(entry.shape, data)?));
        expected_offset = end;
    }
    if expected_offset != payload.len() as u64 {
        return Err(fail(format!(
            "payload has {} bytes, header describes {expected_offset}",
            payload.len()
        )));
    }
    Ok(WeightsFile { metadata, tensors })
}

pub fn save_weights(path: &Path, metadata: &Value, tensors: &[(&str, &Tensor<f32>)]) -> Result<()> {
    let bytes = encode_weights(metadata, tensors)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<WeightsFile> {
    let bytes = fs::read(path)?;
    decode_weights(&bytes, path)
}
