use super::{FeatureError, FeatureMatrix};

/// Standard deviations below this are replaced by it.
pub const VARIANCE_FLOOR: f64 = 1e-10;

/// Per-utterance cepstral mean and variance normalization (population std).
pub fn cmvn(features: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
    let frames = features.num_frames();
    if frames < 2 {
        return Err(FeatureError::TooFewFrames(frames));
    }
    let dim = features.dim();
    let n = frames as f64;
    let mut mean = vec![0.0; dim];
    for frame in features.frames() {
        for (m, v) in mean.iter_mut().zip(frame) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; dim];
    for frame in features.frames() {
        for ((s, v), m) in std.iter_mut().zip(frame).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if *s < VARIANCE_FLOOR {
            *s = VARIANCE_FLOOR;
        }
    }
    let data = features
        .frames()
        .flat_map(|frame| {
            frame
                .iter()
                .zip(&mean)
                .zip(&std)
                .map(|((v, m), s)| (v - m) / s)
        })
        .collect();
    Ok(features.clone().map_data(data, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn column(m: &FeatureMatrix, k: usize) -> Vec<f64> {
        m.frames().map(|f| f[k]).collect()
    }

    #[test]
    fn hand_computed() {
        let m = FeatureMatrix::from_rows("u", &[vec![1.0, 0.0], vec![3.0, 0.0]]);
        let out = cmvn(&m).unwrap();
        assert_eq!(column(&out, 0), vec![-1.0, 1.0]);
        assert_eq!(column(&out, 1), vec![0.0, 0.0]);
    }

    #[test]
    fn constant_dimension_goes_to_zero() {
        let m = FeatureMatrix::from_rows("u", &[vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 4.0]]);
        let out = cmvn(&m).unwrap();
        assert!(column(&out, 0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn needs_two_frames() {
        let m = FeatureMatrix::from_rows("u", &[vec![1.0]]);
        assert!(matches!(cmvn(&m), Err(FeatureError::TooFewFrames(1))));
    }

    fn matrix() -> impl Strategy<Value = FeatureMatrix> {
        (1usize..5, 2usize..40).prop_flat_map(|(dim, frames)| {
            proptest::collection::vec(-50.0f64..50.0, dim * frames)
                .prop_map(move |data| FeatureMatrix::from_flat("p", dim, data))
        })
    }

    proptest! {
        #[test]
        fn zero_mean_unit_variance(m in matrix()) {
            let out = cmvn(&m).unwrap();
            for k in 0..m.dim() {
                let col = column(&out, k);
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                prop_assert!(mean.abs() <= 1e-6);
                let raw = column(&m, k);
                let raw_mean = raw.iter().sum::<f64>() / n;
                let raw_var = raw.iter().map(|v| (v - raw_mean).powi(2)).sum::<f64>() / n;
                if raw_var.sqrt() > 1e-6 {
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    prop_assert!((var - 1.0).abs() <= 1e-4);
                }
            }
        }

        #[test]
        fn idempotent(m in matrix()) {
            let spread = (0..m.dim()).all(|k| {
                let col = column(&m, k);
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                hi - lo > 1e-3
            });
            prop_assume!(spread);
            let once = cmvn(&m).unwrap();
            let twice = cmvn(&once).unwrap();
            for (a, b) in once.as_flat().iter().zip(twice.as_flat()) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }
    }
}
