//! Query-by-example search with dynamic time warping.
//!
//! Costs are normalized by path length (number of aligned cell pairs) and the
//! path minimizing that *ratio* is found exactly: each Dinkelbach step solves
//! an ordinary DTW recursion with per-cell weight `d - lambda`, and lambda is
//! lowered to the ratio of the returned path until it stops improving. This
//! typically converges in three to six passes.

use std::cmp::Ordering;

use rayon::prelude::*;
use thiserror::Error;

use crate::features::FeatureMatrix;

const MAX_RATIO_STEPS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum DtwError {
    #[error("feature dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("empty feature matrix")]
    EmptyInput,
    #[error("empty utterance collection")]
    EmptyCollection,
    #[error("no alignment fits within band width {0}")]
    NoAlignment(usize),
    #[error("invalid DTW parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distance {
    #[default]
    Euclidean,
    /// `1 - cos(a, b)`; zero vectors are at distance 1 from anything non-zero.
    Cosine,
}

impl Distance {
    pub fn between(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Distance::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                match (na == 0.0, nb == 0.0) {
                    (true, true) => 0.0,
                    (true, false) | (false, true) => 1.0,
                    _ => (1.0 - dot / (na * nb)).clamp(0.0, 2.0),
                }
            }
        }
    }
}

impl std::str::FromStr for Distance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(Distance::Euclidean),
            "cosine" => Ok(Distance::Cosine),
            other => Err(format!("unknown distance '{other}' (euclidean|cosine)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwParams {
    /// How many candidates [`rank_candidates`] keeps.
    pub n_best: usize,
    /// Sakoe-Chiba radius in frames.
    pub band_width: Option<usize>,
    pub distance: Distance,
    /// Drop candidates scoring above this.
    pub max_score: Option<f64>,
    /// Keep only the best span of each utterance; otherwise non-overlapping
    /// runner-up spans compete for the top-n too.
    pub one_per_utterance: bool,
}

impl Default for DtwParams {
    fn default() -> Self {
        Self {
            n_best: 5,
            band_width: None,
            distance: Distance::Euclidean,
            max_score: None,
            one_per_utterance: true,
        }
    }
}

impl DtwParams {
    pub fn validate(&self) -> Result<(), DtwError> {
        if self.n_best == 0 {
            return Err(DtwError::InvalidParams("n_best must be at least 1".into()));
        }
        if self.band_width == Some(0) {
            return Err(DtwError::InvalidParams("band width must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwMatch {
    pub query_id: String,
    pub utterance_id: String,
    /// Inclusive start frame in the utterance.
    pub start_frame: usize,
    /// Exclusive end frame.
    pub end_frame: usize,
    pub score: f64,
    pub frame_shift_s: f64,
    pub query_speaker: Option<String>,
    pub matched_speaker: Option<String>,
}

impl DtwMatch {
    pub fn start_s(&self) -> f64 {
        self.start_frame as f64 * self.frame_shift_s
    }

    pub fn end_s(&self) -> f64 {
        self.end_frame as f64 * self.frame_shift_s
    }
}

/// Pairwise frame distances, `rows` query frames by `cols` reference frames.
struct CostGrid {
    rows: usize,
    cols: usize,
    cost: Vec<f64>,
}

impl CostGrid {
    fn new(a: &FeatureMatrix, b: &FeatureMatrix, distance: Distance) -> Self {
        let (rows, cols) = (a.num_frames(), b.num_frames());
        let mut cost = Vec::with_capacity(rows * cols);
        for fa in a.frames() {
            cost.extend(b.frames().map(|fb| distance.between(fa, fb)));
        }
        Self { rows, cols, cost }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.cols + j]
    }

    /// Mean cell cost along a path, summed in path order.
    fn ratio(&self, path: &[(usize, usize)]) -> f64 {
        let total: f64 = path.iter().map(|&(i, j)| self.at(i, j)).sum();
        total / path.len() as f64
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Step {
    Start,
    Diagonal,
    Up,
    Left,
}

fn check_pair(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<(), DtwError> {
    if a.is_empty() || b.is_empty() {
        return Err(DtwError::EmptyInput);
    }
    if a.dim() != b.dim() {
        return Err(DtwError::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(())
}

/// Pick the cheapest predecessor; ties prefer diagonal, then up, then left.
#[inline]
fn best_of(options: [(Step, f64); 3]) -> (Step, f64) {
    let mut best = (Step::Start, f64::INFINITY);
    for (step, value) in options {
        if value < best.1 {
            best = (step, value);
        }
    }
    best
}

/// Minimize the path ratio given a solver for the parametric problem. The
/// solver returns an empty path when no alignment is admissible.
fn minimize_ratio<F>(grid: &CostGrid, solve: F) -> Option<(f64, Vec<(usize, usize)>)>
where
    F: Fn(f64) -> Vec<(usize, usize)>,
{
    let mut path = solve(0.0);
    if path.is_empty() {
        return None;
    }
    let mut best = grid.ratio(&path);
    for _ in 0..MAX_RATIO_STEPS {
        let candidate = solve(best);
        let ratio = grid.ratio(&candidate);
        if ratio < best {
            best = ratio;
            path = candidate;
        } else {
            break;
        }
    }
    Some((best, path))
}

/// Allowed diagonal offsets `j - i` for a band of radius `r` on an `n x m` grid.
fn band_limits(n: usize, m: usize, r: usize) -> (isize, isize) {
    let (n, m, r) = (n as isize, m as isize, r as isize);
    if m >= n {
        (-r, m - n + r)
    } else {
        (m - n - r, r)
    }
}

fn full_path(grid: &CostGrid, lambda: f64, band: Option<usize>) -> Vec<(usize, usize)> {
    let (n, m) = (grid.rows, grid.cols);
    let limits = band.map(|r| band_limits(n, m, r));
    let inside = |i: usize, j: usize| {
        limits.is_none_or(|(lo, hi)| {
            let d = j as isize - i as isize;
            d >= lo && d <= hi
        })
    };
    let mut acc = vec![f64::INFINITY; n * m];
    let mut step = vec![Step::Start; n * m];
    for i in 0..n {
        for j in 0..m {
            if !inside(i, j) {
                continue;
            }
            let w = grid.at(i, j) - lambda;
            if i == 0 && j == 0 {
                acc[0] = w;
                continue;
            }
            let diag = if i > 0 && j > 0 { acc[(i - 1) * m + j - 1] } else { f64::INFINITY };
            let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
            let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
            let (s, v) = best_of([(Step::Diagonal, diag), (Step::Up, up), (Step::Left, left)]);
            acc[i * m + j] = v + w;
            step[i * m + j] = s;
        }
    }
    trace(&step, m, n - 1, m - 1)
}

fn trace(step: &[Step], m: usize, mut i: usize, mut j: usize) -> Vec<(usize, usize)> {
    let mut path = vec![(i, j)];
    loop {
        match step[i * m + j] {
            Step::Start => break,
            Step::Diagonal => {
                i -= 1;
                j -= 1;
            }
            Step::Up => i -= 1,
            Step::Left => j -= 1,
        }
        path.push((i, j));
    }
    path.reverse();
    path
}

/// Accumulated weight and length of a partial path. Lower weight wins; equal
/// weights go to the longer path, so that among equally good spans (exact
/// copies, say) the widest one is reported.
#[derive(Clone, Copy, PartialEq)]
struct Acc {
    weight: f64,
    len: usize,
}

impl Acc {
    const NONE: Acc = Acc { weight: f64::INFINITY, len: 0 };

    fn beats(self, other: Acc) -> bool {
        self.weight < other.weight || (self.weight == other.weight && self.len > other.len)
    }

    fn then(self, w: f64) -> Acc {
        Acc { weight: self.weight + w, len: self.len + 1 }
    }
}

/// Like [`best_of`] for subsequence states, with the length tie-break.
#[inline]
fn best_acc(options: [(Step, Acc); 3]) -> (Step, Acc) {
    let mut best = (Step::Start, Acc::NONE);
    for (step, value) in options {
        if value.weight.is_finite() && value.beats(best.1) {
            best = (step, value);
        }
    }
    best
}

/// Open-begin/open-end recursion: the first query frame may align anywhere.
fn subsequence_path(grid: &CostGrid, lambda: f64) -> Vec<(usize, usize)> {
    let (n, m) = (grid.rows, grid.cols);
    let mut acc = vec![Acc::NONE; n * m];
    let mut step = vec![Step::Start; n * m];
    for j in 0..m {
        let w = grid.at(0, j) - lambda;
        let fresh = Acc { weight: w, len: 1 };
        if j > 0 && acc[j - 1].then(w).beats(fresh) {
            acc[j] = acc[j - 1].then(w);
            step[j] = Step::Left;
        } else {
            acc[j] = fresh;
        }
    }
    for i in 1..n {
        for j in 0..m {
            let w = grid.at(i, j) - lambda;
            let diag = if j > 0 { acc[(i - 1) * m + j - 1] } else { Acc::NONE };
            let up = acc[(i - 1) * m + j];
            let left = if j > 0 { acc[i * m + j - 1] } else { Acc::NONE };
            let (s, v) = best_acc([(Step::Diagonal, diag), (Step::Up, up), (Step::Left, left)]);
            acc[i * m + j] = v.then(w);
            step[i * m + j] = s;
        }
    }
    let last = &acc[(n - 1) * m..];
    let mut end = 0;
    for (j, a) in last.iter().enumerate() {
        if a.beats(last[end]) {
            end = j;
        }
    }
    trace(&step, m, n - 1, end)
}

/// Banded open-begin/open-end recursion: the path stays within `r` diagonals
/// of the one it started on. State is `(i, j, o)` with `o = (j - i) - start + r`.
fn banded_subsequence_path(grid: &CostGrid, lambda: f64, r: usize) -> Vec<(usize, usize)> {
    let (n, m) = (grid.rows, grid.cols);
    let width = 2 * r + 1;
    let idx = |i: usize, j: usize, o: usize| (i * m + j) * width + o;
    let mut acc = vec![Acc::NONE; n * m * width];
    let mut step = vec![Step::Start; n * m * width];
    for i in 0..n {
        for j in 0..m {
            let w = grid.at(i, j) - lambda;
            for o in 0..width {
                let diag = if i > 0 && j > 0 { acc[idx(i - 1, j - 1, o)] } else { Acc::NONE };
                let up = if i > 0 && o + 1 < width { acc[idx(i - 1, j, o + 1)] } else { Acc::NONE };
                let left = if j > 0 && o > 0 { acc[idx(i, j - 1, o - 1)] } else { Acc::NONE };
                let mut best = best_acc([(Step::Diagonal, diag), (Step::Up, up), (Step::Left, left)]);
                if i == 0 && o == r {
                    let fresh = (Step::Start, Acc { weight: 0.0, len: 0 });
                    if !best.1.then(w).beats(fresh.1.then(w)) {
                        best = fresh;
                    }
                }
                if best.1.weight.is_finite() {
                    acc[idx(i, j, o)] = best.1.then(w);
                    step[idx(i, j, o)] = best.0;
                }
            }
        }
    }
    let mut end = (0, r, Acc::NONE);
    for j in 0..m {
        for o in 0..width {
            let v = acc[idx(n - 1, j, o)];
            if v.beats(end.2) {
                end = (j, o, v);
            }
        }
    }
    if end.2.weight.is_infinite() {
        return Vec::new();
    }
    let (mut i, mut j, mut o) = (n - 1, end.0, end.1);
    let mut path = vec![(i, j)];
    loop {
        match step[idx(i, j, o)] {
            Step::Start => break,
            Step::Diagonal => {
                i -= 1;
                j -= 1;
            }
            Step::Up => {
                i -= 1;
                o += 1;
            }
            Step::Left => {
                j -= 1;
                o -= 1;
            }
        }
        path.push((i, j));
    }
    path.reverse();
    path
}

/// Length-normalized DTW cost over the full grid of both sequences.
pub fn dtw_distance(
    a: &FeatureMatrix,
    b: &FeatureMatrix,
    params: &DtwParams,
) -> Result<f64, DtwError> {
    check_pair(a, b)?;
    params.validate()?;
    let grid = CostGrid::new(a, b, params.distance);
    // a single row or column leaves no room for a band
    let band = params
        .band_width
        .filter(|_| grid.rows > 1 && grid.cols > 1);
    let (score, _) = minimize_ratio(&grid, |lambda| full_path(&grid, lambda, band))
        .expect("the full band always admits a path");
    Ok(score)
}

/// Best-matching span of `utterance` for `query`. With a band, the query may
/// be at most `band_width` frames longer than the utterance.
pub fn subsequence_search(
    query: &FeatureMatrix,
    utterance: &FeatureMatrix,
    params: &DtwParams,
) -> Result<DtwMatch, DtwError> {
    check_pair(query, utterance)?;
    params.validate()?;
    search_segment(query, utterance, 0, utterance.num_frames(), params)
        .ok_or(DtwError::NoAlignment(params.band_width.unwrap_or(0)))
}

fn search_segment(
    query: &FeatureMatrix,
    utterance: &FeatureMatrix,
    from: usize,
    to: usize,
    params: &DtwParams,
) -> Option<DtwMatch> {
    let segment;
    let target = if from == 0 && to == utterance.num_frames() {
        utterance
    } else {
        segment = utterance.slice(from, to);
        &segment
    };
    let grid = CostGrid::new(query, target, params.distance);
    let (score, path) = match params.band_width {
        Some(r) => minimize_ratio(&grid, |lambda| banded_subsequence_path(&grid, lambda, r))?,
        None => minimize_ratio(&grid, |lambda| subsequence_path(&grid, lambda))?,
    };
    Some(DtwMatch {
        query_id: query.utterance_id.clone(),
        utterance_id: utterance.utterance_id.clone(),
        start_frame: from + path[0].1,
        end_frame: from + path[path.len() - 1].1 + 1,
        score,
        frame_shift_s: utterance.frame_shift_s,
        query_speaker: query.speaker.clone(),
        matched_speaker: utterance.speaker.clone(),
    })
}

/// Up to `limit` non-overlapping spans of one utterance, best first.
fn utterance_candidates(
    query: &FeatureMatrix,
    utterance: &FeatureMatrix,
    limit: usize,
    params: &DtwParams,
) -> Vec<DtwMatch> {
    let mut open = Vec::new();
    let mut bounds = Vec::new();
    let whole = (0, utterance.num_frames());
    if let Some(m) = search_segment(query, utterance, whole.0, whole.1, params) {
        open.push(m);
        bounds.push(whole);
    }
    let mut out = Vec::new();
    while out.len() < limit && !open.is_empty() {
        let pick = (0..open.len())
            .min_by(|&x, &y| compare_matches(&open[x], &open[y]))
            .unwrap();
        let found = open.swap_remove(pick);
        let (from, to) = bounds.swap_remove(pick);
        for (lo, hi) in [(from, found.start_frame), (found.end_frame, to)] {
            if hi > lo {
                if let Some(m) = search_segment(query, utterance, lo, hi, params) {
                    open.push(m);
                    bounds.push((lo, hi));
                }
            }
        }
        out.push(found);
    }
    out
}

fn compare_matches(a: &DtwMatch, b: &DtwMatch) -> Ordering {
    a.score
        .total_cmp(&b.score)
        .then_with(|| a.utterance_id.cmp(&b.utterance_id))
        .then_with(|| a.start_frame.cmp(&b.start_frame))
}

/// The `n_best` lowest-cost spans across a collection, ascending by score with
/// ties broken by utterance id then start frame. Utterances are searched in parallel.
pub fn rank_candidates(
    query: &FeatureMatrix,
    collection: &[FeatureMatrix],
    params: &DtwParams,
) -> Result<Vec<DtwMatch>, DtwError> {
    params.validate()?;
    if collection.is_empty() {
        return Err(DtwError::EmptyCollection);
    }
    for utterance in collection {
        check_pair(query, utterance)?;
    }
    let per_utterance = if params.one_per_utterance { 1 } else { params.n_best };
    let mut matches: Vec<DtwMatch> = collection
        .par_iter()
        .flat_map_iter(|u| utterance_candidates(query, u, per_utterance, params))
        .filter(|m| params.max_score.is_none_or(|cap| m.score <= cap))
        .collect();
    matches.sort_by(compare_matches);
    matches.truncate(params.n_best);
    Ok(matches)
}
