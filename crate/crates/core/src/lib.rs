//! Spoken term detection for low-resource transcription: query-by-example
//! DTW over MFCC features, and lexicon matching over phone recognizer output
//! (1-best streams and confusion networks), with scoring.

pub mod confnet;
pub mod dtw;
pub mod eval;
pub mod features;
pub mod g2p;
pub mod lexicon;
pub mod p2w;
pub mod synth;

pub use confnet::{
    greedy_search, load_confnet, oracle_search, parse_confnet, prune, ConfnetError, ConfnetMatch,
    ConfusionNetwork, Hypothesis, SearchParams, Slot,
};
pub use dtw::{dtw_distance, rank_candidates, subsequence_search, Distance, DtwError, DtwMatch, DtwParams};
pub use eval::{
    compute_prf, evaluate, match_detections, method_overlap, per, speaker_breakdown, Detection, EvalError,
    EvalReport, Method, ReferenceToken,
};
pub use features::{
    cmvn, featurize, load_audio, mfcc, read_features, write_features, AudioClip, FeatureConfig, FeatureError,
    FeatureMatrix,
};
pub use g2p::{to_graphemes, to_phones, G2PTable, G2pError, PhoneSeq, UnknownPolicy};
pub use lexicon::{build_trie, load_lexicon, LexiconEntry, LexiconError, LexiconTrie, TrieCursor};
pub use p2w::{longest_match_scan, PhoneStream, StreamMatch};
pub use synth::{generate, write_corpus, NoiseSpec, SynthCorpus, SynthSpec};
