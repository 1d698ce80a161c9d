//! Brute-force reference implementations and random instance generators.
#![allow(dead_code)]

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use sstd_core::{ConfusionNetwork, FeatureMatrix, Hypothesis, LexiconEntry, PhoneSeq, Slot};

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Visit every monotone warping path from `(0, from)` to `(n - 1, to - 1)`.
fn walk(
    cost: &dyn Fn(usize, usize) -> f64,
    allowed: &dyn Fn(usize, usize) -> bool,
    (n, to): (usize, usize),
    path: &mut Vec<(usize, usize)>,
    best: &mut Option<(f64, usize, usize)>,
) {
    let &(i, j) = path.last().unwrap();
    if i == n - 1 && j == to - 1 {
        let total: f64 = path.iter().map(|&(a, b)| cost(a, b)).sum();
        let ratio = total / path.len() as f64;
        if best.is_none_or(|(r, _, _)| ratio < r) {
            *best = Some((ratio, path[0].1, j + 1));
        }
        return;
    }
    for (di, dj) in [(1, 1), (1, 0), (0, 1)] {
        let (a, b) = (i + di, j + dj);
        if a < n && b < to && allowed(a, b) {
            path.push((a, b));
            walk(cost, allowed, (n, to), path, best);
            path.pop();
        }
    }
}

/// Minimum path-length-normalized cost over all full alignments, optionally
/// restricted to diagonals `j - i` in `[lo, hi]`.
pub fn brute_dtw(a: &FeatureMatrix, b: &FeatureMatrix, band: Option<(isize, isize)>) -> f64 {
    let cost = |i: usize, j: usize| euclid(a.frame(i), b.frame(j));
    let allowed = |i: usize, j: usize| {
        band.is_none_or(|(lo, hi)| (lo..=hi).contains(&(j as isize - i as isize)))
    };
    let mut best = None;
    if allowed(0, 0) {
        walk(&cost, &allowed, (a.num_frames(), b.num_frames()), &mut vec![(0, 0)], &mut best);
    }
    best.expect("band admits a path").0
}

/// Best `(score, start, end)` over every span of `utt` and every alignment of
/// `query` to it; with a radius, every cell must stay within `r` diagonals of
/// the starting one. `None` when no span admits an alignment.
pub fn brute_span(query: &FeatureMatrix, utt: &FeatureMatrix, radius: Option<usize>) -> Option<(f64, usize, usize)> {
    let cost = |i: usize, j: usize| euclid(query.frame(i), utt.frame(j));
    let mut best: Option<(f64, usize, usize)> = None;
    for start in 0..utt.num_frames() {
        let allowed = |i: usize, j: usize| {
            radius.is_none_or(|r| ((j as isize - i as isize) - start as isize).unsigned_abs() <= r)
        };
        for end in start + 1..=utt.num_frames() {
            let mut here = None;
            walk(&cost, &allowed, (query.num_frames(), end), &mut vec![(0, start)], &mut here);
            if let Some(h) = here {
                if best.is_none_or(|b| h.0 < b.0) {
                    best = Some(h);
                }
            }
        }
    }
    best
}

pub fn random_matrix<R: Rng>(rng: &mut R, id: &str, frames: usize, dim: usize) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> =
        (0..frames).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    FeatureMatrix::from_rows(id, &rows)
}

/// Minimal edit cost by trying every edit script.
pub fn brute_edit<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    match (a, b) {
        ([], _) => b.len(),
        (_, []) => a.len(),
        ([x, ra @ ..], [y, rb @ ..]) => {
            let sub = brute_edit(ra, rb) + usize::from(x != y);
            let del = brute_edit(ra, b) + 1;
            let ins = brute_edit(a, rb) + 1;
            sub.min(del).min(ins)
        }
    }
}

pub const PHONES: [&str; 5] = ["a", "b", "c", "d", "e"];

/// Up to 20 distinct words of 2 to 5 phones over a small alphabet.
pub fn random_lexicon<R: Rng>(rng: &mut R) -> Vec<LexiconEntry> {
    let size = rng.random_range(1..=20);
    let mut entries: Vec<LexiconEntry> = Vec::new();
    while entries.len() < size {
        let len = rng.random_range(2..=5);
        let phones: PhoneSeq = (0..len).map(|_| PHONES.choose(rng).unwrap().to_string()).collect();
        let name = format!("w{}", entries.len());
        // some homophones on purpose
        if entries.iter().any(|e| e.phones == phones) && rng.random_bool(0.7) {
            continue;
        }
        entries.push(LexiconEntry::new(name, phones));
    }
    entries
}

/// A valid network of up to `max_slots` slots, each with 1 to 5 hypotheses.
pub fn random_network<R: Rng>(rng: &mut R, max_slots: usize) -> ConfusionNetwork {
    let n = rng.random_range(1..=max_slots);
    let slots = (0..n)
        .map(|_| {
            let k = rng.random_range(1..=5);
            let mut phones = PHONES.to_vec();
            phones.shuffle(rng);
            let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
            let total: f64 = weights.iter().sum::<f64>() * rng.random_range(1.0..1.3);
            let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
            probs.sort_by(|a, b| b.total_cmp(a));
            Slot::new(phones.iter().zip(probs).map(|(p, q)| Hypothesis::new(*p, q)).collect())
        })
        .collect();
    ConfusionNetwork::new("u", slots)
}
