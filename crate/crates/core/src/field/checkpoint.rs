//! Field checkpoints: config as JSON, parameters as raw little-endian
//! doubles, one CRC over the whole payload. Loading rebuilds the
//! quadrature and layer shapes from the config, so a checkpoint restores
//! the field bit for bit.

use std::fs;
use std::path::Path;

use crate::dataset::crc32;
use crate::field::net::FieldConfig;
use crate::field::AcousticField;
use crate::types::{Error, Result};

const MAGIC: &[u8; 4] = b"RVCK";
const FORMAT_VERSION: u32 = 1;

pub fn save_field(path: &Path, field: &AcousticField) -> Result<()> {
    let config = serde_json::to_vec(&field.config)
        .map_err(|e| Error::Config(format!("field config does not serialize: {e}")))?;
    let mut payload = Vec::with_capacity(config.len() + field.net.params.len() * 8 + 32);
    payload.extend_from_slice(&(config.len() as u64).to_le_bytes());
    payload.extend_from_slice(&config);
    payload.extend_from_slice(&(field.net.params.len() as u64).to_le_bytes());
    for p in &field.net.params {
        payload.extend_from_slice(&p.to_le_bytes());
    }
    let mut out = Vec::with_capacity(payload.len() + 12);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32(&payload).to_le_bytes());
    fs::write(path, out)?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<AcousticField> {
    let bytes = fs::read(path)?;
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::Corrupt("not a field checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Corrupt(format!("unsupported checkpoint version {version}")));
    }
    let payload = &bytes[8..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    if crc32(payload) != stored {
        return Err(Error::Corrupt("checkpoint checksum mismatch".into()));
    }
    let mut cursor = payload;
    let take = |cursor: &mut &[u8], n: usize| -> Result<Vec<u8>> {
        if cursor.len() < n {
            return Err(Error::Corrupt("checkpoint truncated".into()));
        }
        let (head, tail) = cursor.split_at(n);
        *cursor = tail;
        Ok(head.to_vec())
    };
    let config_len = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
    let config: FieldConfig = serde_json::from_slice(&take(&mut cursor, config_len)?)
        .map_err(|e| Error::Corrupt(format!("bad checkpoint config: {e}")))?;
    let n_params = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
    if cursor.len() != n_params * 8 {
        return Err(Error::Corrupt("checkpoint parameter block truncated".into()));
    }
    let mut params = Vec::with_capacity(n_params);
    for chunk in cursor.chunks_exact(8) {
        params.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    AcousticField::from_parts(config, params)
}
