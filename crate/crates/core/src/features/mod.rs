//! Acoustic front end for the DTW route: WAV decoding, MFCC extraction,
//! per-utterance cepstral mean and variance normalization, and the binary
//! feature file format.

mod cmvn;
mod file;
mod mfcc;
mod wav;

use std::path::PathBuf;

use thiserror::Error;

pub use cmvn::{cmvn, VARIANCE_FLOOR};
pub use file::{read_features, write_features, FEATURE_MAGIC, FEATURE_VERSION};
pub use mfcc::{deltas, mfcc};
pub use wav::load_audio;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("clip has {samples} samples, fewer than one {window}-sample window")]
    ClipTooShort { samples: usize, window: usize },
    #[error("cmvn needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("invalid feature configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed feature file: {0}")]
    MalformedFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono audio normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub id: String,
    pub speaker: String,
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

/// Analysis parameters for [`mfcc`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub pre_emphasis: f64,
    pub num_filters: usize,
    pub num_coefficients: usize,
    pub low_freq_hz: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub high_freq_hz: Option<f64>,
    /// Append delta and delta-delta coefficients.
    pub deltas: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window_s: 0.025,
            hop_s: 0.010,
            pre_emphasis: 0.97,
            num_filters: 26,
            num_coefficients: 13,
            low_freq_hz: 0.0,
            high_freq_hz: None,
            deltas: false,
        }
    }
}

impl FeatureConfig {
    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (self.window_s * sample_rate as f64).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop_s * sample_rate as f64).round() as usize
    }
}

/// Number of analysis frames for a signal, `0` when it is shorter than a window.
pub fn frame_count(num_samples: usize, window: usize, hop: usize) -> usize {
    if num_samples < window || window == 0 || hop == 0 {
        0
    } else {
        1 + (num_samples - window) / hop
    }
}

/// Row-major sequence of fixed-dimension feature frames for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub utterance_id: String,
    pub speaker: Option<String>,
    pub frame_shift_s: f64,
    pub frame_length_s: f64,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Build from a flat row-major buffer. Panics if `data.len()` is not a multiple of `dim`.
    pub fn from_flat(utterance_id: impl Into<String>, dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0, "feature dimension must be positive");
        assert_eq!(data.len() % dim, 0, "buffer length not a multiple of dim");
        Self {
            utterance_id: utterance_id.into(),
            speaker: None,
            frame_shift_s: 0.010,
            frame_length_s: 0.025,
            dim,
            data,
        }
    }

    /// Build from per-frame rows. Panics on ragged input.
    pub fn from_rows(utterance_id: impl Into<String>, rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(1, Vec::len).max(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            assert_eq!(row.len(), dim, "ragged feature rows");
            data.extend_from_slice(row);
        }
        Self::from_flat(utterance_id, dim, data)
    }

    pub fn with_timing(mut self, frame_shift_s: f64, frame_length_s: f64) -> Self {
        self.frame_shift_s = frame_shift_s;
        self.frame_length_s = frame_length_s;
        self
    }

    pub fn with_speaker(mut self, speaker: impl Into<String>) -> Self {
        self.speaker = Some(speaker.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Copy of frames `[start, end)` keeping metadata.
    pub fn slice(&self, start: usize, end: usize) -> FeatureMatrix {
        FeatureMatrix {
            utterance_id: self.utterance_id.clone(),
            speaker: self.speaker.clone(),
            frame_shift_s: self.frame_shift_s,
            frame_length_s: self.frame_length_s,
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }

    pub(crate) fn map_data(mut self, data: Vec<f64>, dim: usize) -> Self {
        self.data = data;
        self.dim = dim;
        self
    }
}

/// Decode, extract MFCCs and normalize in one call; the featurize pipeline.
pub fn featurize(clip: &AudioClip, config: &FeatureConfig) -> Result<FeatureMatrix, FeatureError> {
    cmvn(&mfcc(clip, config)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_matches_formula() {
        assert_eq!(frame_count(400, 400, 160), 1);
        assert_eq!(frame_count(16000, 400, 160), 98);
        assert_eq!(frame_count(399, 400, 160), 0);
        for n in 400..2000 {
            assert_eq!(frame_count(n, 400, 160), 1 + (n - 400) / 160);
        }
    }

    #[test]
    fn slice_keeps_metadata() {
        let m = FeatureMatrix::from_rows("u", &[vec![1.0], vec![2.0], vec![3.0]]).with_speaker("s");
        let s = m.slice(1, 3);
        assert_eq!(s.num_frames(), 2);
        assert_eq!(s.frame(0), &[2.0]);
        assert_eq!(s.speaker.as_deref(), Some("s"));
    }
}
