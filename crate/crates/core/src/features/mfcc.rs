use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};

use super::{frame_count, AudioClip, FeatureConfig, FeatureError, FeatureMatrix};

const LOG_FLOOR: f64 = 1e-10;
const DELTA_WINDOW: usize = 2;

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Triangular filters over `fft_size / 2 + 1` bins, evenly spaced on the mel scale.
fn mel_filterbank(
    num_filters: usize,
    fft_size: usize,
    sample_rate: f64,
    low_hz: f64,
    high_hz: f64,
) -> Vec<Vec<f64>> {
    let bins = fft_size / 2 + 1;
    let low = hz_to_mel(low_hz);
    let high = hz_to_mel(high_hz);
    let edges: Vec<f64> = (0..num_filters + 2)
        .map(|i| mel_to_hz(low + (high - low) * i as f64 / (num_filters + 1) as f64))
        .collect();
    let bin_hz = sample_rate / fft_size as f64;
    (0..num_filters)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= left || f >= right {
                        0.0
                    } else if f <= center {
                        (f - left) / (center - left)
                    } else {
                        (right - f) / (right - center)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II basis, `num_coefficients` rows by `num_inputs` columns.
fn dct_basis(num_coefficients: usize, num_inputs: usize) -> Vec<Vec<f64>> {
    let n = num_inputs as f64;
    (0..num_coefficients)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            (0..num_inputs)
                .map(|i| scale * (PI * k as f64 * (i as f64 + 0.5) / n).cos())
                .collect()
        })
        .collect()
}

fn validate(config: &FeatureConfig, sample_rate: u32) -> Result<(usize, usize, f64), FeatureError> {
    let window = config.window_samples(sample_rate);
    let hop = config.hop_samples(sample_rate);
    if window == 0 || hop == 0 {
        return Err(FeatureError::InvalidConfig(
            "window and hop must cover at least one sample".into(),
        ));
    }
    if config.num_filters == 0 || config.num_coefficients == 0 {
        return Err(FeatureError::InvalidConfig("empty filterbank or cepstrum".into()));
    }
    if config.num_coefficients > config.num_filters {
        return Err(FeatureError::InvalidConfig(format!(
            "{} coefficients requested from {} filters",
            config.num_coefficients, config.num_filters
        )));
    }
    let nyquist = sample_rate as f64 / 2.0;
    let high = config.high_freq_hz.unwrap_or(nyquist).min(nyquist);
    if !(config.low_freq_hz >= 0.0 && config.low_freq_hz < high) {
        return Err(FeatureError::InvalidConfig(format!(
            "filterbank range {}..{high} Hz is empty",
            config.low_freq_hz
        )));
    }
    Ok((window, hop, high))
}

/// MFCC analysis of a clip: pre-emphasis, Hamming-windowed framing,
/// magnitude spectrum, mel filterbank, log, and DCT-II.
///
/// No normalization is applied; see [`super::cmvn`].
pub fn mfcc(clip: &AudioClip, config: &FeatureConfig) -> Result<FeatureMatrix, FeatureError> {
    let (window, hop, high_hz) = validate(config, clip.sample_rate)?;
    let num_frames = frame_count(clip.samples.len(), window, hop);
    if num_frames == 0 {
        return Err(FeatureError::ClipTooShort {
            samples: clip.samples.len(),
            window,
        });
    }

    let emphasized: Vec<f64> = clip
        .samples
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let prev = if i == 0 { 0.0 } else { clip.samples[i - 1] as f64 };
            s as f64 - config.pre_emphasis * prev
        })
        .collect();

    let fft_size = window.next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let taper = hamming(window);
    let filters = mel_filterbank(
        config.num_filters,
        fft_size,
        clip.sample_rate as f64,
        config.low_freq_hz,
        high_hz,
    );
    let dct = dct_basis(config.num_coefficients, config.num_filters);

    let mut buffer = vec![Complex::new(0.0, 0.0); fft_size];
    let mut log_energies = vec![0.0; config.num_filters];
    let mut data = Vec::with_capacity(num_frames * config.num_coefficients);
    for f in 0..num_frames {
        let start = f * hop;
        for (slot, (x, w)) in buffer
            .iter_mut()
            .zip(emphasized[start..start + window].iter().zip(&taper))
        {
            *slot = Complex::new(x * w, 0.0);
        }
        for slot in &mut buffer[window..] {
            *slot = Complex::new(0.0, 0.0);
        }
        fft.process(&mut buffer);
        for (energy, filter) in log_energies.iter_mut().zip(&filters) {
            let e: f64 = filter.iter().zip(&buffer).map(|(w, c)| w * c.norm()).sum();
            *energy = e.max(LOG_FLOOR).ln();
        }
        data.extend(
            dct.iter()
                .map(|row| row.iter().zip(&log_energies).map(|(a, b)| a * b).sum::<f64>()),
        );
    }

    let matrix = FeatureMatrix::from_flat(clip.id.clone(), config.num_coefficients, data)
        .with_timing(
            hop as f64 / clip.sample_rate as f64,
            window as f64 / clip.sample_rate as f64,
        );
    let matrix = if clip.speaker.is_empty() {
        matrix
    } else {
        matrix.with_speaker(clip.speaker.clone())
    };
    Ok(if config.deltas { deltas(&matrix) } else { matrix })
}

/// Append first- and second-order regression deltas (window 2, edge frames replicated).
pub fn deltas(features: &FeatureMatrix) -> FeatureMatrix {
    let d = features.dim();
    let first = regression(features.as_flat(), d);
    let second = regression(&first, d);
    let mut data = Vec::with_capacity(features.as_flat().len() * 3);
    for t in 0..features.num_frames() {
        data.extend_from_slice(features.frame(t));
        data.extend_from_slice(&first[t * d..(t + 1) * d]);
        data.extend_from_slice(&second[t * d..(t + 1) * d]);
    }
    features.clone().map_data(data, d * 3)
}

fn regression(flat: &[f64], dim: usize) -> Vec<f64> {
    let frames = flat.len() / dim;
    if frames == 0 {
        return Vec::new();
    }
    let norm: f64 = 2.0 * (1..=DELTA_WINDOW).map(|n| (n * n) as f64).sum::<f64>();
    let at = |t: isize, k: usize| flat[(t.clamp(0, frames as isize - 1) as usize) * dim + k];
    let mut out = Vec::with_capacity(flat.len());
    for t in 0..frames as isize {
        for k in 0..dim {
            let num: f64 = (1..=DELTA_WINDOW as isize)
                .map(|n| n as f64 * (at(t + n, k) - at(t - n, k)))
                .sum();
            out.push(num / norm);
        }
    }
    out
}
