//! Seeded synthetic corpora with known word positions.
//!
//! Each phone gets a random template vector; an utterance's features repeat
//! the template of every phone for a random number of frames. Recognizer
//! output is simulated by corrupting the true phone sequence.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confnet::{ConfusionNetwork, Hypothesis, Slot};
use crate::eval::ReferenceToken;
use crate::features::{write_features, FeatureMatrix};
use crate::g2p::PhoneSeq;
use crate::lexicon::{Exemplar, LexiconEntry};
use crate::p2w::{format_stream, PhoneStream};

pub const FRAME_SHIFT_S: f64 = 0.01;
pub const FRAME_LENGTH_S: f64 = 0.025;
const MIN_PHONE_FRAMES: usize = 3;
const MAX_PHONE_FRAMES: usize = 10;
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub substitution_rate: f64,
    pub deletion_rate: f64,
    pub insertion_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub lexicon_size: usize,
    pub utterance_count: usize,
    /// Number of phones, named `a`, `b`, ... (at most 26).
    pub phones_inventory: usize,
    pub noise: NoiseSpec,
    pub confusion_k: usize,
    pub seed: u64,
    pub feature_dim: usize,
    pub speakers: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            lexicon_size: 20,
            utterance_count: 200,
            phones_inventory: 20,
            noise: NoiseSpec::default(),
            confusion_k: 5,
            seed: 0,
            feature_dim: 13,
            speakers: 3,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_owned()));
        if self.lexicon_size == 0 || self.utterance_count == 0 {
            return bad("lexicon_size and utterance_count must be positive");
        }
        if !(3..=26).contains(&self.phones_inventory) {
            return bad("phones_inventory must be between 3 and 26");
        }
        if self.confusion_k == 0 || self.confusion_k > self.phones_inventory {
            return bad("confusion_k must be between 1 and phones_inventory");
        }
        if self.feature_dim == 0 || self.speakers == 0 {
            return bad("feature_dim and speakers must be positive");
        }
        let n = self.noise;
        for (name, r) in [
            ("substitution_rate", n.substitution_rate),
            ("deletion_rate", n.deletion_rate),
            ("insertion_rate", n.insertion_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(SynthError::InvalidSpec(format!("{name} must be in [0, 1]")));
            }
        }
        if n.insertion_rate >= 1.0 {
            return bad("insertion_rate must be below 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub id: String,
    pub speaker: String,
    pub phones: PhoneSeq,
    pub features: FeatureMatrix,
    pub stream: PhoneStream,
    pub confnet: ConfusionNetwork,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    /// Exemplar paths are relative to the output directory.
    pub lexicon: Vec<LexiconEntry>,
    /// One feature matrix per lexicon entry, in lexicon order, id = word.
    pub queries: Vec<FeatureMatrix>,
    pub utterances: Vec<SynthUtterance>,
    pub reference: Vec<ReferenceToken>,
}

fn phone_name(p: usize) -> String {
    char::from(b'a' + p as u8).to_string()
}

fn contains(hay: &[usize], needle: &[usize]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}

fn positions(hay: &[usize], needle: &[usize]) -> Vec<usize> {
    hay.windows(needle.len()).enumerate().filter(|(_, w)| *w == needle).map(|(i, _)| i).collect()
}

fn random_run(rng: &mut ChaCha8Rng, len: usize, inventory: usize, prev: Option<usize>) -> Vec<usize> {
    let mut out = Vec::with_capacity(len);
    let mut last = prev;
    for _ in 0..len {
        let p = loop {
            let p = rng.random_range(0..inventory);
            if Some(p) != last {
                break p;
            }
        };
        out.push(p);
        last = Some(p);
    }
    out
}

fn make_words(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>, SynthError> {
    let mut words: Vec<Vec<usize>> = Vec::new();
    let mut attempts = 0;
    while words.len() < spec.lexicon_size {
        attempts += 1;
        if attempts > MAX_ATTEMPTS * spec.lexicon_size {
            return Err(SynthError::InvalidSpec("phone inventory too small for the lexicon".into()));
        }
        let len = rng.random_range(3..=5);
        let w = random_run(rng, len, spec.phones_inventory, None);
        if words.iter().all(|o| !contains(o, &w) && !contains(&w, o)) {
            words.push(w);
        }
    }
    Ok(words)
}

/// A phone sequence with the given words planted, and their start positions.
/// Resampled until no lexicon word occurs anywhere but where it was planted.
fn make_utterance(
    rng: &mut ChaCha8Rng,
    planted: &[usize],
    words: &[Vec<usize>],
    inventory: usize,
) -> Result<(Vec<usize>, Vec<usize>), SynthError> {
    'attempt: for _ in 0..MAX_ATTEMPTS {
        let mut seq = Vec::new();
        let mut starts = Vec::new();
        // utterances without planted words are filler only
        let lead = if planted.is_empty() { rng.random_range(4..=10) } else { rng.random_range(0..=3) };
        seq.extend(random_run(rng, lead, inventory, None));
        for (n, &w) in planted.iter().enumerate() {
            if n > 0 {
                let gap = rng.random_range(1..=4);
                let filler = random_run(rng, gap, inventory, seq.last().copied());
                seq.extend(filler);
            }
            if seq.last() == words[w].first() {
                continue 'attempt;
            }
            starts.push(seq.len());
            seq.extend(&words[w]);
        }
        let tail = rng.random_range(0..=3);
        let filler = random_run(rng, tail, inventory, seq.last().copied());
        seq.extend(filler);

        for (w, word) in words.iter().enumerate() {
            let expected: Vec<usize> =
                planted.iter().zip(&starts).filter(|(&p, _)| p == w).map(|(_, &s)| s).collect();
            if positions(&seq, word) != expected {
                continue 'attempt;
            }
        }
        return Ok((seq, starts));
    }
    Err(SynthError::InvalidSpec("could not place words without accidental occurrences".into()))
}

fn round4(x: f64) -> f64 {
    ((x * 1e4).round() / 1e4).max(1e-4)
}

/// `count` distinct phones other than those in `exclude`, with probabilities
/// summing to `mass` in descending order, each at most `cap`.
fn filler_hyps(
    rng: &mut ChaCha8Rng,
    count: usize,
    mass: f64,
    cap: f64,
    exclude: &[usize],
    inventory: usize,
) -> Vec<Hypothesis> {
    let mut pool: Vec<usize> = (0..inventory).filter(|p| !exclude.contains(p)).collect();
    pool.shuffle(rng);
    pool.truncate(count);
    let weights: Vec<f64> = (0..pool.len()).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut probs: Vec<f64> = weights.iter().map(|w| round4((mass * w / total).min(cap))).collect();
    probs.sort_by(|a, b| b.total_cmp(a));
    pool.into_iter().zip(probs).map(|(p, prob)| Hypothesis::new(phone_name(p), prob)).collect()
}

fn make_slot(rng: &mut ChaCha8Rng, truth: usize, substituted: bool, spec: &SynthSpec) -> Slot {
    let k = spec.confusion_k;
    let inv = spec.phones_inventory;
    let mut hyps;
    if substituted {
        let wrong = loop {
            let p = rng.random_range(0..inv);
            if p != truth {
                break p;
            }
        };
        let q1 = round4(rng.random_range(0.4..0.6));
        hyps = vec![Hypothesis::new(phone_name(wrong), q1)];
        if k >= 2 {
            let q2 = round4(rng.random_range(0.15..q1.min(1.0 - q1)));
            hyps.push(Hypothesis::new(phone_name(truth), q2));
            let rest = rng.random_range(0.0..=(1.0 - q1 - q2 - 1e-3).max(0.0));
            hyps.extend(filler_hyps(rng, k - 2, rest, q2, &[wrong, truth], inv));
        }
    } else {
        let m = rng.random_range(0.05..0.45);
        hyps = vec![Hypothesis::new(phone_name(truth), round4(1.0 - m))];
        hyps.extend(filler_hyps(rng, k - 1, m - 1e-3 * (k - 1) as f64, 1.0 - m, &[truth], inv));
    }
    Slot::new(hyps)
}

fn recognize(rng: &mut ChaCha8Rng, truth: &[usize], spec: &SynthSpec) -> Vec<Slot> {
    let n = spec.noise;
    let mut slots = Vec::new();
    for &p in truth {
        if rng.random_bool(n.deletion_rate) {
        } else {
            let substituted = rng.random_bool(n.substitution_rate);
            slots.push(make_slot(rng, p, substituted, spec));
        }
        if rng.random_bool(n.insertion_rate) {
            let extra = rng.random_range(0..spec.phones_inventory);
            slots.push(make_slot(rng, extra, false, spec));
        }
    }
    slots
}

/// Build a corpus in memory. The same spec always yields the same corpus.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let templates: Vec<Vec<f64>> = (0..spec.phones_inventory)
        .map(|_| {
            (0..spec.feature_dim)
                .map(|_| {
                    let v: f32 = StandardNormal.sample(&mut rng);
                    f64::from(v)
                })
                .collect()
        })
        .collect();
    let words = make_words(spec, &mut rng)?;
    let speakers: Vec<String> = (0..spec.speakers).map(|s| format!("spk{s}")).collect();

    let mut plan: Vec<Vec<usize>> = vec![Vec::new(); spec.utterance_count];
    for w in 0..words.len() {
        plan[w % spec.utterance_count].push(w);
    }
    for planted in plan.iter_mut() {
        let extra = rng.random_range(0..=2);
        for _ in 0..extra {
            let w = rng.random_range(0..words.len());
            if !planted.contains(&w) {
                planted.push(w);
            }
        }
        planted.shuffle(&mut rng);
    }

    let mut utterances = Vec::with_capacity(spec.utterance_count);
    let mut reference = Vec::new();
    let mut queries: Vec<Option<FeatureMatrix>> = vec![None; words.len()];
    let mut exemplar_speaker: Vec<String> = vec![String::new(); words.len()];
    for (u, planted) in plan.iter().enumerate() {
        let id = format!("utt{u:04}");
        let speaker = speakers.choose(&mut rng).cloned().unwrap_or_default();
        let (seq, starts) = make_utterance(&mut rng, planted, &words, spec.phones_inventory)?;

        let mut rows = Vec::new();
        let mut phone_frame = Vec::with_capacity(seq.len() + 1);
        for &p in &seq {
            phone_frame.push(rows.len());
            let dur = rng.random_range(MIN_PHONE_FRAMES..=MAX_PHONE_FRAMES);
            rows.extend(std::iter::repeat_n(templates[p].clone(), dur));
        }
        phone_frame.push(rows.len());
        let features = FeatureMatrix::from_rows(id.clone(), &rows)
            .with_timing(FRAME_SHIFT_S, FRAME_LENGTH_S)
            .with_speaker(speaker.clone());

        for (&w, &s) in planted.iter().zip(&starts) {
            let (f0, f1) = (phone_frame[s], phone_frame[s + words[w].len()]);
            let first = queries[w].is_none();
            if first {
                let mut query = features.slice(f0, f1);
                query.utterance_id = word_name(&words[w]);
                queries[w] = Some(query);
                exemplar_speaker[w] = speaker.clone();
            }
            reference.push(ReferenceToken {
                utterance_id: id.clone(),
                word: word_name(&words[w]),
                start_s: f0 as f64 * FRAME_SHIFT_S,
                end_s: f1 as f64 * FRAME_SHIFT_S,
                speaker: speaker.clone(),
                from_lexicon: first,
            });
        }

        let confnet = ConfusionNetwork {
            utterance_id: id.clone(),
            speaker: speaker.clone(),
            slots: recognize(&mut rng, &seq, spec),
        };
        let stream = PhoneStream {
            utterance_id: id.clone(),
            speaker: speaker.clone(),
            phones: confnet.one_best(),
            ..PhoneStream::default()
        };
        utterances.push(SynthUtterance {
            id,
            speaker,
            phones: seq.iter().map(|&p| phone_name(p)).collect(),
            features,
            stream,
            confnet,
        });
    }
    reference.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id).then(a.start_s.total_cmp(&b.start_s)));

    let lexicon = words
        .iter()
        .zip(&exemplar_speaker)
        .map(|(w, spk)| {
            let name = word_name(w);
            let mut entry = LexiconEntry::new(name.clone(), w.iter().map(|&p| phone_name(p)).collect());
            entry.exemplars.push(Exemplar {
                audio: Some(PathBuf::from("queries").join(format!("{name}.feat"))),
                speaker: Some(spk.clone()),
            });
            entry
        })
        .collect();
    Ok(SynthCorpus {
        spec: spec.clone(),
        lexicon,
        queries: queries.into_iter().map(|q| q.expect("every word is planted")).collect(),
        utterances,
        reference,
    })
}

/// Orthography of a synthetic word: its phone names run together.
fn word_name(word: &[usize]) -> String {
    word.iter().map(|&p| phone_name(p)).collect()
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SynthError {
    SynthError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), SynthError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Write the corpus under `dir`:
/// `manifest.json`, `reference.json`, `lexicon.tsv`, `streams.tsv`,
/// `speakers.tsv`, `features/<utt>.feat`, `queries/<word>.feat` and
/// `confnets/<utt>.json`.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<(), SynthError> {
    for sub in ["features", "queries", "confnets"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| io_err(&p, e))?;
    }
    write_file(&dir.join("manifest.json"), pretty_json(&corpus.spec).as_bytes())?;
    write_file(&dir.join("reference.json"), pretty_json(&corpus.reference).as_bytes())?;

    let mut lex = String::new();
    for e in &corpus.lexicon {
        let ex = &e.exemplars[0];
        let audio = ex.audio.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        lex.push_str(&format!("{}\t{}\t{}\t{}\n", e.orthography, e.phones, audio, ex.speaker.as_deref().unwrap_or("")));
    }
    write_file(&dir.join("lexicon.tsv"), lex.as_bytes())?;

    let mut streams = String::new();
    let mut speakers = String::new();
    for u in &corpus.utterances {
        streams.push_str(&format_stream(&u.stream));
        streams.push('\n');
        speakers.push_str(&format!("{}\t{}\n", u.id, u.speaker));

        let path = dir.join("features").join(format!("{}.feat", u.id));
        let mut buf = Vec::new();
        write_features(&u.features, &mut buf).map_err(|e| io_err(&path, e))?;
        write_file(&path, &buf)?;
        let path = dir.join("confnets").join(format!("{}.json", u.id));
        write_file(&path, u.confnet.to_json().as_bytes())?;
    }
    write_file(&dir.join("streams.tsv"), streams.as_bytes())?;
    write_file(&dir.join("speakers.tsv"), speakers.as_bytes())?;

    for q in &corpus.queries {
        let path = dir.join("queries").join(format!("{}.feat", q.utterance_id));
        let mut file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut buf = Vec::new();
        write_features(q, &mut buf).map_err(|e| io_err(&path, e))?;
        file.write_all(&buf).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}
