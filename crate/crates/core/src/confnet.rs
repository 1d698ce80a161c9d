//! Phone confusion networks and lexicon search over them.
//!
//! [`greedy_search`] walks the network left to right following the lexicon
//! trie, at each slot taking the most probable hypothesis that extends the
//! current path. [`oracle_search`] enumerates every hypothesis choice over
//! every span and is the reference the greedy search is checked against.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::g2p::PhoneSeq;
use crate::lexicon::LexiconTrie;

const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ConfnetError {
    #[error("malformed confusion network: {0}")]
    Parse(String),
    #[error("slot {slot}: {reason}")]
    InvariantViolation { slot: usize, reason: String },
    #[error("network has {slots} slots, oracle limit is {limit}")]
    NetworkTooLarge { slots: usize, limit: usize },
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub phone: String,
    pub prob: f64,
}

impl Hypothesis {
    pub fn new(phone: impl Into<String>, prob: f64) -> Self {
        Self { phone: phone.into(), prob }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_s: Option<f64>,
    /// Sorted by probability, most likely first.
    pub hyps: Vec<Hypothesis>,
}

impl Slot {
    pub fn new(hyps: Vec<Hypothesis>) -> Self {
        Self { start_s: None, end_s: None, hyps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionNetwork {
    pub utterance_id: String,
    #[serde(default)]
    pub speaker: String,
    pub slots: Vec<Slot>,
}

impl ConfusionNetwork {
    pub fn new(utterance_id: impl Into<String>, slots: Vec<Slot>) -> Self {
        Self { utterance_id: utterance_id.into(), speaker: String::new(), slots }
    }

    /// Shorthand for tests and tools: each slot as `(phone, prob)` pairs.
    pub fn from_pairs(utterance_id: impl Into<String>, slots: &[&[(&str, f64)]]) -> Self {
        Self::new(
            utterance_id,
            slots
                .iter()
                .map(|s| Slot::new(s.iter().map(|&(p, q)| Hypothesis::new(p, q)).collect()))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<(), ConfnetError> {
        for (slot, s) in self.slots.iter().enumerate() {
            let violation = |reason: String| ConfnetError::InvariantViolation { slot, reason };
            if s.hyps.is_empty() {
                return Err(violation("no hypotheses".into()));
            }
            let mut phones = HashSet::new();
            let mut total = 0.0;
            for (k, h) in s.hyps.iter().enumerate() {
                if !(h.prob > 0.0 && h.prob <= 1.0) {
                    return Err(violation(format!("probability {} outside (0, 1]", h.prob)));
                }
                if h.phone.is_empty() {
                    return Err(violation("empty phone".into()));
                }
                if k > 0 && h.prob > s.hyps[k - 1].prob {
                    return Err(violation("hypotheses not sorted by descending probability".into()));
                }
                if !phones.insert(h.phone.as_str()) {
                    return Err(violation(format!("phone {:?} listed twice", h.phone)));
                }
                total += h.prob;
            }
            if total > 1.0 + PROB_SUM_TOLERANCE {
                return Err(violation(format!("probabilities sum to {total}")));
            }
            if let (Some(a), Some(b)) = (s.start_s, s.end_s) {
                if a > b {
                    return Err(violation(format!("start {a} after end {b}")));
                }
            }
        }
        Ok(())
    }

    /// The most probable phone of every slot.
    pub fn one_best(&self) -> PhoneSeq {
        self.slots.iter().filter_map(|s| s.hyps.first()).map(|h| h.phone.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }
}

/// Parse and validate a network; unsorted slots are rejected, never re-sorted.
pub fn parse_confnet(text: &str) -> Result<ConfusionNetwork, ConfnetError> {
    let net: ConfusionNetwork =
        serde_json::from_str(text).map_err(|e| ConfnetError::Parse(e.to_string()))?;
    net.validate()?;
    Ok(net)
}

pub fn load_confnet(path: &Path) -> Result<ConfusionNetwork, ConfnetError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfnetError::Io(format!("{}: {e}", path.display())))?;
    parse_confnet(&text)
}

/// Drop hypotheses below `threshold`, always keeping each slot's top one.
pub fn prune(net: &ConfusionNetwork, threshold: f64) -> ConfusionNetwork {
    let slots = net
        .slots
        .iter()
        .map(|s| Slot {
            hyps: s
                .hyps
                .iter()
                .enumerate()
                .filter(|(k, h)| *k == 0 || h.prob >= threshold)
                .map(|(_, h)| h.clone())
                .collect(),
            ..s.clone()
        })
        .collect();
    ConfusionNetwork { slots, ..net.clone() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams {
    pub prune_threshold: f64,
    /// Hypotheses considered per slot.
    pub top_k: usize,
    /// Shorter lexicon words are never reported.
    pub min_word_phones: usize,
    /// [`oracle_search`] refuses longer networks.
    pub oracle_max_slots: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { prune_threshold: 0.2, top_k: 5, min_word_phones: 2, oracle_max_slots: 64 }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<(), ConfnetError> {
        if !(0.0..=1.0).contains(&self.prune_threshold) {
            return Err(ConfnetError::InvalidParams(format!(
                "threshold {} outside [0, 1]",
                self.prune_threshold
            )));
        }
        if self.top_k == 0 || self.min_word_phones == 0 {
            return Err(ConfnetError::InvalidParams(
                "top_k and min_word_phones must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfnetMatch {
    pub word: String,
    pub phones: PhoneSeq,
    /// First slot of the match.
    pub start_slot: usize,
    /// Last slot of the match, inclusive.
    pub end_slot: usize,
    pub utterance_id: String,
    /// Product of the chosen hypotheses' probabilities.
    pub score: f64,
    pub start_s: Option<f64>,
    pub end_s: Option<f64>,
}

impl ConfnetMatch {
    /// Identity used to compare match sets across searches.
    pub fn key(&self) -> (String, usize, usize, PhoneSeq) {
        (self.word.clone(), self.start_slot, self.end_slot, self.phones.clone())
    }
}

fn make_match(
    net: &ConfusionNetwork,
    word: &str,
    start: usize,
    chosen: &[(String, f64)],
) -> ConfnetMatch {
    let end = start + chosen.len() - 1;
    ConfnetMatch {
        word: word.to_owned(),
        phones: chosen.iter().map(|(p, _)| p.clone()).collect(),
        start_slot: start,
        end_slot: end,
        utterance_id: net.utterance_id.clone(),
        score: chosen.iter().map(|(_, q)| q).product(),
        start_s: net.slots[start].start_s,
        end_s: net.slots[end].end_s,
    }
}

/// Trie-guided greedy search of a (pruned) network.
///
/// From the current trie node, slot `i` contributes its first hypothesis among
/// the top `top_k` that has an outgoing edge. Reaching a word node records it
/// as the current candidate and the path keeps extending. When no hypothesis
/// extends the path, or the network ends, the candidate (if any) is emitted
/// and the scan resumes after its last slot; without a candidate it resumes
/// one slot after the path began. Homophones are emitted together.
pub fn greedy_search(
    net: &ConfusionNetwork,
    trie: &LexiconTrie,
    params: &SearchParams,
) -> Vec<ConfnetMatch> {
    let n = net.slots.len();
    let mut out = Vec::new();
    let mut cursor = trie.cursor();
    let mut token: Vec<(String, f64)> = Vec::new();
    // (token length, words) of the longest completed word on the current path
    let mut valid: Option<(usize, &[String])> = None;
    let mut save_point: Option<usize> = None;
    let mut i = 0;
    loop {
        let extension = net.slots.get(i).and_then(|slot| {
            slot.hyps
                .iter()
                .take(params.top_k)
                .find(|h| cursor.can_step(&h.phone))
        });
        match extension {
            Some(h) => {
                cursor.step(&h.phone);
                token.push((h.phone.clone(), h.prob));
                save_point.get_or_insert(i);
                if cursor.is_word() && cursor.depth() >= params.min_word_phones {
                    valid = Some((token.len(), cursor.words()));
                }
                i += 1;
            }
            None if cursor.at_root() => {
                if i >= n {
                    break;
                }
                i += 1;
            }
            None => {
                let start = save_point.expect("path in progress has a start");
                i = match valid.take() {
                    Some((len, words)) => {
                        out.extend(words.iter().map(|w| make_match(net, w, start, &token[..len])));
                        start + len
                    }
                    None => start + 1,
                };
                cursor.reset();
                token.clear();
                save_point = None;
            }
        }
    }
    out
}

/// Every lexicon word readable off any span by any choice of hypotheses
/// (top `top_k` per slot), sorted by start slot, end slot, word.
pub fn oracle_search(
    net: &ConfusionNetwork,
    trie: &LexiconTrie,
    params: &SearchParams,
) -> Result<Vec<ConfnetMatch>, ConfnetError> {
    if net.slots.len() > params.oracle_max_slots {
        return Err(ConfnetError::NetworkTooLarge {
            slots: net.slots.len(),
            limit: params.oracle_max_slots,
        });
    }
    let mut words: HashMap<Vec<String>, Vec<String>> = HashMap::new();
    let mut prefixes: HashSet<Vec<String>> = HashSet::new();
    for (phones, ws) in trie.entries() {
        for k in 1..=phones.len() {
            prefixes.insert(phones.0[..k].to_vec());
        }
        words.insert(phones.0, ws);
    }
    let mut found = BTreeMap::new();
    let mut chosen = Vec::new();
    for start in 0..net.slots.len() {
        extend(net, start, start, &prefixes, &words, params, &mut chosen, &mut found);
    }
    Ok(found.into_values().collect())
}

#[allow(clippy::too_many_arguments)]
fn extend(
    net: &ConfusionNetwork,
    start: usize,
    slot: usize,
    prefixes: &HashSet<Vec<String>>,
    words: &HashMap<Vec<String>, Vec<String>>,
    params: &SearchParams,
    chosen: &mut Vec<(String, f64)>,
    found: &mut BTreeMap<(usize, usize, String, PhoneSeq), ConfnetMatch>,
) {
    let Some(s) = net.slots.get(slot) else { return };
    for h in s.hyps.iter().take(params.top_k) {
        chosen.push((h.phone.clone(), h.prob));
        let phones: Vec<String> = chosen.iter().map(|(p, _)| p.clone()).collect();
        if prefixes.contains(&phones) {
            if phones.len() >= params.min_word_phones {
                for w in words.get(&phones).into_iter().flatten() {
                    let m = make_match(net, w, start, chosen);
                    found
                        .entry((m.start_slot, m.end_slot, m.word.clone(), m.phones.clone()))
                        .or_insert(m);
                }
            }
            extend(net, start, slot + 1, prefixes, words, params, chosen, found);
        }
        chosen.pop();
    }
}
