//! Scoring detections against a time-aligned word reference.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confnet::ConfnetMatch;
use crate::dtw::DtwMatch;
use crate::lexicon::LexiconEntry;
use crate::p2w::StreamMatch;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reference sequence is empty")]
    EmptyReference,
    #[error("no speaker metadata for query word {0:?}")]
    MissingSpeakerMetadata(String),
    #[error("invalid reference: {0}")]
    InvalidReference(String),
    #[error("invalid detections: {0}")]
    InvalidDetections(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "dtw")]
    Dtw,
    #[serde(rename = "p2w_1best")]
    P2wOneBest,
    #[serde(rename = "p2w_confnet")]
    P2wConfnet,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dtw => "dtw",
            Method::P2wOneBest => "p2w_1best",
            Method::P2wConfnet => "p2w_confnet",
        }
    }

    /// Only DTW consumes spoken exemplars, so only it has a recall without them.
    pub fn uses_exemplars(self) -> bool {
        self == Method::Dtw
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dtw" => Ok(Method::Dtw),
            "p2w_1best" => Ok(Method::P2wOneBest),
            "p2w_confnet" => Ok(Method::P2wConfnet),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceToken {
    pub utterance_id: String,
    pub word: String,
    pub start_s: f64,
    pub end_s: f64,
    pub speaker: String,
    /// This token was clipped out as a spoken query exemplar.
    #[serde(default)]
    pub from_lexicon: bool,
}

pub fn parse_reference(text: &str) -> Result<Vec<ReferenceToken>, EvalError> {
    let refs: Vec<ReferenceToken> =
        serde_json::from_str(text).map_err(|e| EvalError::InvalidReference(e.to_string()))?;
    for (i, r) in refs.iter().enumerate() {
        if r.start_s >= r.end_s || r.start_s.is_nan() || r.end_s.is_nan() {
            return Err(EvalError::InvalidReference(format!(
                "token {i} ({} in {}) has start {} >= end {}",
                r.word, r.utterance_id, r.start_s, r.end_s
            )));
        }
    }
    Ok(refs)
}

pub fn load_reference(path: &Path) -> Result<Vec<ReferenceToken>, EvalError> {
    parse_reference(&std::fs::read_to_string(path)?)
}

/// Keep only tokens of words that were queried.
pub fn restrict_to_lexicon(refs: &[ReferenceToken], lexicon: &[LexiconEntry]) -> Vec<ReferenceToken> {
    let words: HashSet<&str> = lexicon.iter().map(|e| e.orthography.as_str()).collect();
    refs.iter().filter(|r| words.contains(r.word.as_str())).cloned().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub word: String,
    pub utterance_id: String,
    /// `(start_s, end_s)`; absent for matches without timing.
    pub span: Option<(f64, f64)>,
    pub score: f64,
    pub method: Method,
    pub query_speaker: Option<String>,
}

impl Detection {
    /// The query id names the word.
    pub fn from_dtw(m: &DtwMatch) -> Self {
        Self {
            word: m.query_id.clone(),
            utterance_id: m.utterance_id.clone(),
            span: Some((m.start_s(), m.end_s())),
            score: m.score,
            method: Method::Dtw,
            query_speaker: m.query_speaker.clone(),
        }
    }

    pub fn from_stream(m: &StreamMatch) -> Self {
        Self {
            word: m.word.clone(),
            utterance_id: m.utterance_id.clone(),
            span: m.start_s.zip(m.end_s),
            score: 1.0,
            method: Method::P2wOneBest,
            query_speaker: None,
        }
    }

    pub fn from_confnet(m: &ConfnetMatch) -> Self {
        Self {
            word: m.word.clone(),
            utterance_id: m.utterance_id.clone(),
            span: m.start_s.zip(m.end_s).filter(|(a, b)| a < b),
            score: m.score,
            method: Method::P2wConfnet,
            query_speaker: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionRow {
    method: Method,
    word: String,
    utterance_id: String,
    start_s: Option<f64>,
    end_s: Option<f64>,
    score: f64,
}

/// Write `method,word,utterance_id,start_s,end_s,score` rows; untimed spans are empty fields.
pub fn write_detections<W: Write>(dets: &[Detection], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    for d in dets {
        w.serialize(DetectionRow {
            method: d.method,
            word: d.word.clone(),
            utterance_id: d.utterance_id.clone(),
            start_s: d.span.map(|s| s.0),
            end_s: d.span.map(|s| s.1),
            score: d.score,
        })
        .map_err(|e| EvalError::InvalidDetections(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_detections<R: Read>(input: R) -> Result<Vec<Detection>, EvalError> {
    let mut out = Vec::new();
    for (i, row) in csv::Reader::from_reader(input).deserialize::<DetectionRow>().enumerate() {
        let row = row.map_err(|e| EvalError::InvalidDetections(format!("row {}: {e}", i + 1)))?;
        let span = match (row.start_s, row.end_s) {
            (Some(a), Some(b)) if a < b => Some((a, b)),
            (None, None) => None,
            _ => {
                return Err(EvalError::InvalidDetections(format!(
                    "row {}: span must have start < end or be empty",
                    i + 1
                )))
            }
        };
        out.push(Detection {
            word: row.word,
            utterance_id: row.utterance_id,
            span,
            score: row.score,
            method: row.method,
            query_speaker: None,
        });
    }
    Ok(out)
}

/// Intersection over union of two time spans.
pub fn overlap_ratio(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Outcome of [`match_detections`], as indices into the inputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// `(detection, reference)` pairs.
    pub true_positives: Vec<(usize, usize)>,
    pub false_positives: Vec<usize>,
    pub false_negatives: Vec<usize>,
}

/// One-to-one assignment of detections to reference tokens of the same word
/// and utterance.
///
/// Timed detections pair greedily in descending overlap order and need an
/// overlap ratio of at least `overlap_min`. Untimed detections of a word in an
/// utterance are then paired in order with the still unmatched tokens of that
/// word, sorted by time.
pub fn match_detections(dets: &[Detection], refs: &[ReferenceToken], overlap_min: f64) -> Assignment {
    let mut by_key: HashMap<(&str, &str), Vec<usize>> = HashMap::new();
    for (r, tok) in refs.iter().enumerate() {
        by_key.entry((tok.utterance_id.as_str(), tok.word.as_str())).or_default().push(r);
    }
    for list in by_key.values_mut() {
        list.sort_by(|&a, &b| refs[a].start_s.total_cmp(&refs[b].start_s).then(a.cmp(&b)));
    }

    let mut candidates = Vec::new();
    for (d, det) in dets.iter().enumerate() {
        let Some(span) = det.span else { continue };
        for &r in by_key.get(&(det.utterance_id.as_str(), det.word.as_str())).into_iter().flatten() {
            let ratio = overlap_ratio(span, (refs[r].start_s, refs[r].end_s));
            if ratio >= overlap_min && ratio > 0.0 {
                candidates.push((ratio, d, r));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut det_done = vec![false; dets.len()];
    let mut ref_done = vec![false; refs.len()];
    let mut tps = Vec::new();
    for (_, d, r) in candidates {
        if !det_done[d] && !ref_done[r] {
            det_done[d] = true;
            ref_done[r] = true;
            tps.push((d, r));
        }
    }

    let mut untimed: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (d, det) in dets.iter().enumerate() {
        if det.span.is_none() {
            untimed.entry((det.utterance_id.as_str(), det.word.as_str())).or_default().push(d);
        }
    }
    for (key, ds) in untimed {
        let open: Vec<usize> = by_key
            .get(&key)
            .into_iter()
            .flatten()
            .copied()
            .filter(|&r| !ref_done[r])
            .collect();
        for (&d, &r) in ds.iter().zip(&open) {
            det_done[d] = true;
            ref_done[r] = true;
            tps.push((d, r));
        }
    }

    tps.sort_unstable();
    Assignment {
        true_positives: tps,
        false_positives: (0..dets.len()).filter(|&d| !det_done[d]).collect(),
        false_negatives: (0..refs.len()).filter(|&r| !ref_done[r]).collect(),
    }
}

/// Precision, recall and F-score, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub recall_no_lex: f64,
    pub f_score: f64,
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; zero when both are.
pub fn harmonic_f(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// F-score uses the regular recall (the one that counts exemplar tokens).
pub fn compute_prf(tp: usize, fp: usize, fn_: usize, fn_no_lex: usize, tp_no_lex: usize) -> Prf {
    let precision = percent(tp, tp + fp);
    let recall = percent(tp, tp + fn_);
    Prf {
        precision,
        recall,
        recall_no_lex: percent(tp_no_lex, tp_no_lex + fn_no_lex),
        f_score: harmonic_f(precision, recall),
    }
}

/// Levenshtein distance with unit costs.
pub fn edit_distance<T: PartialEq>(hyp: &[T], reference: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=hyp.len()).collect();
    let mut cur = vec![0; hyp.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        cur[0] = i + 1;
        for (j, h) in hyp.iter().enumerate() {
            let sub = prev[j] + usize::from(r != h);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[hyp.len()]
}

/// Phone error rate in percent.
pub fn per<T: PartialEq>(hyp: &[T], reference: &[T]) -> Result<f64, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    Ok(100.0 * edit_distance(hyp, reference) as f64 / reference.len() as f64)
}

/// Same/different-speaker split of true positives, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerBreakdown {
    pub same: Option<f64>,
    pub different: Option<f64>,
    /// Same-speaker share among all retrievable reference tokens.
    pub reference_same: Option<f64>,
}

fn exemplar_speakers(lexicon: &[LexiconEntry]) -> HashMap<&str, BTreeSet<&str>> {
    lexicon
        .iter()
        .map(|e| (e.orthography.as_str(), e.exemplar_speakers().collect()))
        .collect()
}

/// A token counts as same-speaker when its speaker is one of the query's
/// exemplar speakers: the detection's own query speaker when known, otherwise
/// the lexicon entry's.
pub fn speaker_breakdown(
    tps: &[(&Detection, &ReferenceToken)],
    lexicon: &[LexiconEntry],
    refs: &[ReferenceToken],
) -> Result<SpeakerBreakdown, EvalError> {
    let speakers = exemplar_speakers(lexicon);
    let known = |word: &str| -> Result<&BTreeSet<&str>, EvalError> {
        speakers
            .get(word)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| EvalError::MissingSpeakerMetadata(word.to_owned()))
    };
    let mut same = 0;
    for (det, tok) in tps {
        let hit = match &det.query_speaker {
            Some(q) => *q == tok.speaker,
            None => known(&det.word)?.contains(tok.speaker.as_str()),
        };
        same += usize::from(hit);
    }
    let mut ref_same = 0;
    for tok in refs {
        ref_same += usize::from(known(&tok.word)?.contains(tok.speaker.as_str()));
    }
    let share = |n: usize, d: usize| (d > 0).then(|| percent(n, d));
    Ok(SpeakerBreakdown {
        same: share(same, tps.len()),
        different: share(tps.len() - same, tps.len()),
        reference_same: share(ref_same, refs.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOverlap {
    pub method_a: String,
    pub method_b: String,
    pub only_a: usize,
    pub only_b: usize,
    pub both: usize,
    /// Share of reference tokens found by either method, in percent.
    pub coverage: f64,
}

/// Compare two methods' true positives, identified by reference token index.
pub fn method_overlap(
    method_a: &str,
    tps_a: &[usize],
    method_b: &str,
    tps_b: &[usize],
    reference_count: usize,
) -> MethodOverlap {
    let a: BTreeSet<usize> = tps_a.iter().copied().collect();
    let b: BTreeSet<usize> = tps_b.iter().copied().collect();
    let both = a.intersection(&b).count();
    let union = a.union(&b).count();
    MethodOverlap {
        method_a: method_a.to_owned(),
        method_b: method_b.to_owned(),
        only_a: a.len() - both,
        only_b: b.len() - both,
        both,
        coverage: percent(union, reference_count),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordScore {
    pub word: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub recall_no_lex: Option<f64>,
    pub recall: f64,
    pub precision: f64,
    pub f_score: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Detections in utterances that have no in-lexicon reference token.
    pub unknown_utterances: usize,
    pub speakers: Option<SpeakerBreakdown>,
    pub per_word: Vec<WordScore>,
}

/// Score one method. `refs` should already be restricted to the lexicon.
/// Returns the report and the reference indices it retrieved.
pub fn evaluate(
    method: Method,
    dets: &[Detection],
    refs: &[ReferenceToken],
    lexicon: &[LexiconEntry],
    overlap_min: f64,
) -> (EvalReport, Vec<usize>) {
    let assignment = match_detections(dets, refs, overlap_min);
    let tp = assignment.true_positives.len();
    let tp_no_lex = assignment.true_positives.iter().filter(|&&(_, r)| !refs[r].from_lexicon).count();
    let fn_no_lex = assignment.false_negatives.iter().filter(|&&r| !refs[r].from_lexicon).count();
    let prf = compute_prf(tp, assignment.false_positives.len(), assignment.false_negatives.len(), fn_no_lex, tp_no_lex);

    let pairs: Vec<(&Detection, &ReferenceToken)> =
        assignment.true_positives.iter().map(|&(d, r)| (&dets[d], &refs[r])).collect();
    let speakers = speaker_breakdown(&pairs, lexicon, refs).ok();

    let mut per_word: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    for &(d, _) in &assignment.true_positives {
        per_word.entry(dets[d].word.as_str()).or_default()[0] += 1;
    }
    for &d in &assignment.false_positives {
        per_word.entry(dets[d].word.as_str()).or_default()[1] += 1;
    }
    for &r in &assignment.false_negatives {
        per_word.entry(refs[r].word.as_str()).or_default()[2] += 1;
    }

    let utterances: HashSet<&str> = refs.iter().map(|r| r.utterance_id.as_str()).collect();
    let report = EvalReport {
        method,
        recall_no_lex: method.uses_exemplars().then_some(prf.recall_no_lex),
        recall: prf.recall,
        precision: prf.precision,
        f_score: prf.f_score,
        tp,
        fp: assignment.false_positives.len(),
        fn_: assignment.false_negatives.len(),
        unknown_utterances: dets.iter().filter(|d| !utterances.contains(d.utterance_id.as_str())).count(),
        speakers,
        per_word: per_word
            .into_iter()
            .map(|(word, [tp, fp, fn_])| WordScore { word: word.to_owned(), tp, fp, fn_ })
            .collect(),
    };
    let retrieved = assignment.true_positives.iter().map(|&(_, r)| r).collect();
    (report, retrieved)
}

/// Everything `evaluate` produces for a set of methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub reference_tokens: usize,
    pub reports: Vec<EvalReport>,
    pub overlaps: Vec<MethodOverlap>,
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.2}%"))
}

/// Text table with columns recall-no-lex, recall, precision, F-score.
pub fn render_table(summary: &EvaluationSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} | {:>13} | {:>8} | {:>9} | {:>8}",
        "method", "recall-no-lex", "recall", "precision", "F-score"
    );
    let _ = writeln!(out, "{}", "-".repeat(62));
    for r in &summary.reports {
        let _ = writeln!(
            out,
            "{:<12} | {:>13} | {:>8} | {:>9} | {:>8}",
            r.method.as_str(),
            pct(r.recall_no_lex),
            pct(Some(r.recall)),
            pct(Some(r.precision)),
            pct(Some(r.f_score)),
        );
    }
    let with_speakers: Vec<_> = summary.reports.iter().filter_map(|r| r.speakers.as_ref().map(|s| (r.method, s))).collect();
    if !with_speakers.is_empty() {
        let _ = writeln!(out, "\n{:<12} | {:>8} | {:>9} | {:>9}", "speaker", "same", "different", "reference");
        for (m, s) in with_speakers {
            let _ = writeln!(
                out,
                "{:<12} | {:>8} | {:>9} | {:>9}",
                m.as_str(),
                pct(s.same),
                pct(s.different),
                pct(s.reference_same)
            );
        }
    }
    if !summary.overlaps.is_empty() {
        let _ = writeln!(out, "\n{:<26} | {:>6} | {:>6} | {:>6} | {:>8}", "overlap", "only a", "only b", "both", "coverage");
        for o in &summary.overlaps {
            let _ = writeln!(
                out,
                "{:<26} | {:>6} | {:>6} | {:>6} | {:>8}",
                format!("{} vs {}", o.method_a, o.method_b),
                o.only_a,
                o.only_b,
                o.both,
                pct(Some(o.coverage))
            );
        }
    }
    out
}
