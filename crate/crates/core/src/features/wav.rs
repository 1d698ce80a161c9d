use std::path::Path;

use hound::{SampleFormat, WavReader};

use super::{AudioClip, FeatureError};

/// Read a RIFF/WAVE file as mono `[-1, 1]` samples.
///
/// Accepts 16-bit integer PCM (scaled by 1/32768) and 32-bit float PCM.
/// Multichannel input is averaged to mono. The clip id is the file stem;
/// the speaker is left empty for the caller to fill in.
pub fn load_audio(path: &Path) -> Result<AudioClip, FeatureError> {
    if !path.exists() {
        return Err(FeatureError::FileNotFound(path.to_path_buf()));
    }
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => FeatureError::Io(io),
        other => FeatureError::UnsupportedFormat(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.sample_rate == 0 {
        return Err(FeatureError::UnsupportedFormat("sample rate 0".into()));
    }
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<Result<_, _>>(),
        (SampleFormat::Float, 32) => reader.into_samples::<f32>().collect::<Result<_, _>>(),
        (format, bits) => {
            return Err(FeatureError::UnsupportedFormat(format!(
                "{bits}-bit {format:?} samples"
            )))
        }
    }
    .map_err(|e| FeatureError::UnsupportedFormat(e.to_string()))?;

    if interleaved.len() < channels {
        return Err(FeatureError::UnsupportedFormat("empty data chunk".into()));
    }
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f32>() / channels as f32)
            .collect()
    };
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(AudioClip {
        id,
        speaker: String::new(),
        sample_rate: spec.sample_rate,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use hound::{WavSpec, WavWriter};

    fn write_i16(path: &Path, channels: u16, samples: &[i16]) {
        let spec = WavSpec {
            channels,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn zero_signal() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.wav");
        write_i16(&p, 1, &[0; 400]);
        let clip = load_audio(&p).unwrap();
        assert_eq!(clip.sample_rate, 16000);
        assert_eq!(clip.samples.len(), 400);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
        assert_eq!(clip.id, "z");
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let data: Vec<i16> = (0..200).flat_map(|_| [16384i16, -16384]).collect();
        write_i16(&p, 2, &data);
        let clip = load_audio(&p).unwrap();
        assert_eq!(clip.samples.len(), 200);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn pcm_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.wav");
        write_i16(&p, 1, &[i16::MIN, 16384, i16::MAX]);
        let clip = load_audio(&p).unwrap();
        assert_eq!(clip.samples[0], -1.0);
        assert_eq!(clip.samples[1], 0.5);
        assert!(clip.samples[2] < 1.0);
    }

    #[test]
    fn float_pcm() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        for s in [0.25f32, -0.5] {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        let clip = load_audio(&p).unwrap();
        assert_eq!(clip.samples, vec![0.25, -0.5]);
        assert_eq!(clip.sample_rate, 8000);
    }

    #[test]
    fn missing_and_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_audio(&dir.path().join("nope.wav")),
            Err(FeatureError::FileNotFound(_))
        ));
        let empty = dir.path().join("empty.wav");
        write_i16(&empty, 1, &[]);
        assert!(matches!(load_audio(&empty), Err(FeatureError::UnsupportedFormat(_))));

        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"not a riff file at all").unwrap();
        assert!(matches!(load_audio(&junk), Err(FeatureError::UnsupportedFormat(_))));

        let p24 = dir.path().join("i24.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p24, spec).unwrap();
        w.write_sample(5i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_audio(&p24), Err(FeatureError::UnsupportedFormat(_))));
    }
}
