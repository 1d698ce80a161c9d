mod common;

use common::{brute_dtw, brute_span, random_matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sstd_core::{dtw_distance, subsequence_search, DtwParams};

#[test]
fn full_distance_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = DtwParams::default();
    for case in 0..250 {
        let (n, m) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let dim = rng.random_range(1..=3);
        let a = random_matrix(&mut rng, "a", n, dim);
        let b = random_matrix(&mut rng, "b", m, dim);
        assert_eq!(dtw_distance(&a, &b, &params).unwrap(), brute_dtw(&a, &b, None), "case {case}: {n}x{m}");
    }
}

#[test]
fn banded_distance_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..150 {
        let (n, m) = (rng.random_range(2..=7), rng.random_range(2..=7));
        let r = rng.random_range(1..=3);
        let a = random_matrix(&mut rng, "a", n, 2);
        let b = random_matrix(&mut rng, "b", m, 2);
        let (ni, mi, ri) = (n as isize, m as isize, r as isize);
        let limits = if m >= n { (-ri, mi - ni + ri) } else { (mi - ni - ri, ri) };
        let params = DtwParams { band_width: Some(r), ..DtwParams::default() };
        assert_eq!(dtw_distance(&a, &b, &params).unwrap(), brute_dtw(&a, &b, Some(limits)), "case {case}");
    }
}

#[test]
fn subsequence_matches_span_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let params = DtwParams::default();
    for case in 0..220 {
        let qn = rng.random_range(1..=4);
        let q = random_matrix(&mut rng, "q", qn, 2);
        let un = rng.random_range(1..=12);
        let u = random_matrix(&mut rng, "u", un, 2);
        let got = subsequence_search(&q, &u, &params).unwrap();
        let (score, start, end) = brute_span(&q, &u, None).unwrap();
        assert_eq!((got.score, got.start_frame, got.end_frame), (score, start, end), "case {case}");
    }
}

#[test]
fn banded_subsequence_matches_span_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for case in 0..120 {
        let qn = rng.random_range(1..=4);
        let q = random_matrix(&mut rng, "q", qn, 2);
        let un = rng.random_range(1..=10);
        let u = random_matrix(&mut rng, "u", un, 2);
        let r = rng.random_range(1..=3);
        let params = DtwParams { band_width: Some(r), ..DtwParams::default() };
        let got = subsequence_search(&q, &u, &params).ok().map(|m| (m.score, m.start_frame, m.end_frame));
        assert_eq!(got, brute_span(&q, &u, Some(r)), "case {case}");
    }
}
