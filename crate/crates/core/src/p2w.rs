//! Matching lexicon words inside a recognizer's unsegmented 1-best phone stream.

use std::path::Path;

use thiserror::Error;

use crate::g2p::{text_to_phones, G2PTable, G2pError, PhoneSeq};
use crate::lexicon::LexiconTrie;

#[derive(Debug, Error, PartialEq)]
pub enum StreamError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhoneStream {
    pub utterance_id: String,
    pub speaker: String,
    pub phones: PhoneSeq,
    /// Per-symbol `(start_s, end_s)`, when the recognizer provides them.
    pub times: Option<Vec<(f64, f64)>>,
    /// Utterance length, used to interpolate match times when `times` is absent.
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamMatch {
    pub word: String,
    pub start_index: usize,
    /// Exclusive.
    pub end_index: usize,
    pub utterance_id: String,
    pub start_s: Option<f64>,
    pub end_s: Option<f64>,
}

impl PhoneStream {
    fn span_seconds(&self, start: usize, end: usize) -> (Option<f64>, Option<f64>) {
        if let Some(times) = &self.times {
            if end <= times.len() {
                return (Some(times[start].0), Some(times[end - 1].1));
            }
        }
        match self.duration_s {
            Some(d) if !self.phones.is_empty() => {
                let n = self.phones.len() as f64;
                (Some(d * start as f64 / n), Some(d * end as f64 / n))
            }
            _ => (None, None),
        }
    }

    fn matches_at<'a>(&'a self, start: usize, end: usize, words: &'a [String]) -> impl Iterator<Item = StreamMatch> + 'a {
        let (start_s, end_s) = self.span_seconds(start, end);
        words.iter().cloned().map(move |word| StreamMatch {
            word,
            start_index: start,
            end_index: end,
            utterance_id: self.utterance_id.clone(),
            start_s,
            end_s,
        })
    }
}

/// Longest word ending reachable from `start`, as `(end, node words)`.
fn longest_from<'t>(phones: &[String], start: usize, trie: &'t LexiconTrie) -> Option<(usize, &'t [String])> {
    let mut cursor = trie.cursor();
    let mut last = None;
    for (k, p) in phones[start..].iter().enumerate() {
        if !cursor.step(p) {
            break;
        }
        if cursor.is_word() {
            last = Some((start + k + 1, cursor.words()));
        }
    }
    last
}

/// Left-to-right leftmost-longest scan. A match consumes its symbols;
/// otherwise the scan advances by one.
pub fn longest_match_scan(stream: &PhoneStream, trie: &LexiconTrie) -> Vec<StreamMatch> {
    let phones = stream.phones.as_slice();
    let mut out = Vec::new();
    let mut i = 0;
    while i < phones.len() {
        match longest_from(phones, i, trie) {
            Some((end, words)) => {
                out.extend(stream.matches_at(i, end, words));
                i = end;
            }
            None => i += 1,
        }
    }
    out
}

/// Every occurrence of every word, overlaps included; for analysis.
pub fn all_occurrences_scan(stream: &PhoneStream, trie: &LexiconTrie) -> Vec<StreamMatch> {
    let phones = stream.phones.as_slice();
    let mut out = Vec::new();
    for i in 0..phones.len() {
        let mut cursor = trie.cursor();
        for (k, p) in phones[i..].iter().enumerate() {
            if !cursor.step(p) {
                break;
            }
            if cursor.is_word() {
                out.extend(stream.matches_at(i, i + k + 1, cursor.words()));
            }
        }
    }
    out
}

/// Transliterate a transcript into one unsegmented stream; word boundaries are dropped.
pub fn stream_from_text(transcript: &str, table: &G2PTable) -> Result<PhoneStream, G2pError> {
    let words = text_to_phones(transcript, table)?;
    Ok(PhoneStream {
        phones: PhoneSeq(words.into_iter().flat_map(|w| w.0).collect()),
        ..PhoneStream::default()
    })
}

/// Parse `utterance_id<TAB>speaker<TAB>phones` lines.
pub fn parse_streams(text: &str) -> Result<Vec<PhoneStream>, StreamError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 || cols[0].trim().is_empty() {
            return Err(StreamError::Parse {
                line: n + 1,
                message: "expected utterance_id<TAB>speaker<TAB>phones".into(),
            });
        }
        out.push(PhoneStream {
            utterance_id: cols[0].trim().to_owned(),
            speaker: cols[1].trim().to_owned(),
            phones: PhoneSeq::parse(cols[2]),
            ..PhoneStream::default()
        });
    }
    Ok(out)
}

pub fn load_streams(path: &Path) -> Result<Vec<PhoneStream>, StreamError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| StreamError::Io(format!("{}: {e}", path.display())))?;
    parse_streams(&text)
}

pub fn format_stream(stream: &PhoneStream) -> String {
    format!("{}\t{}\t{}", stream.utterance_id, stream.speaker, stream.phones)
}
