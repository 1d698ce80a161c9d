use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureError, FeatureMatrix};

pub const FEATURE_MAGIC: &[u8; 8] = b"SSTDFEAT";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 * 5;

/// Serialize as little-endian: magic, version, frames, dim, frame shift,
/// frame length, then `frames * dim` f32 values row-major.
pub fn write_features<W: Write>(features: &FeatureMatrix, mut out: W) -> Result<(), FeatureError> {
    let mut buf = Vec::with_capacity(HEADER_LEN + features.as_flat().len() * 4);
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(features.num_frames() as u32).to_le_bytes());
    buf.extend_from_slice(&(features.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(features.frame_shift_s as f32).to_le_bytes());
    buf.extend_from_slice(&(features.frame_length_s as f32).to_le_bytes());
    for &v in features.as_flat() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Read a feature file; the utterance id is the file stem.
pub fn read_features(path: &Path) -> Result<FeatureMatrix, FeatureError> {
    if !path.exists() {
        return Err(FeatureError::FileNotFound(path.to_path_buf()));
    }
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode(&bytes, id)
}

fn decode(bytes: &[u8], id: String) -> Result<FeatureMatrix, FeatureError> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != FEATURE_MAGIC {
        return Err(FeatureError::MalformedFile("missing SSTDFEAT header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    // timings come back as the shortest decimal that round-trips through f32,
    // so a stored 0.01 reads as 0.01 rather than 0.0099999998
    let float = |i: usize| -> f64 {
        let v = f32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        v.to_string().parse().unwrap_or(f64::from(v))
    };
    let version = word(8);
    if version != FEATURE_VERSION {
        return Err(FeatureError::MalformedFile(format!("unsupported version {version}")));
    }
    let frames = word(12) as usize;
    let dim = word(16) as usize;
    if dim == 0 {
        return Err(FeatureError::MalformedFile("zero dimension".into()));
    }
    let expected = HEADER_LEN + frames * dim * 4;
    if bytes.len() != expected {
        return Err(FeatureError::MalformedFile(format!(
            "expected {expected} bytes for {frames}x{dim}, found {}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(FeatureMatrix::from_flat(id, dim, data).with_timing(float(20), float(24)))
}
