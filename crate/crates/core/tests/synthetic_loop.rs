use sstd_core::eval::restrict_to_lexicon;
use sstd_core::synth::{generate, NoiseSpec, SynthSpec};
use sstd_core::{
    build_trie, evaluate, greedy_search, longest_match_scan, prune, rank_candidates, Detection, DtwParams,
    Method, SearchParams,
};

fn spec(noise: NoiseSpec, seed: u64) -> SynthSpec {
    SynthSpec { lexicon_size: 10, utterance_count: 40, noise, seed, ..SynthSpec::default() }
}

#[test]
fn noiseless_corpus_is_fully_recovered() {
    let corpus = generate(&spec(NoiseSpec::default(), 3)).unwrap();
    let refs = restrict_to_lexicon(&corpus.reference, &corpus.lexicon);
    let trie = build_trie(&corpus.lexicon);

    let p2w: Vec<Detection> = corpus
        .utterances
        .iter()
        .flat_map(|u| longest_match_scan(&u.stream, &trie))
        .map(|m| Detection::from_stream(&m))
        .collect();
    let (report, _) = evaluate(Method::P2wOneBest, &p2w, &refs, &corpus.lexicon, 0.5);
    assert_eq!((report.precision, report.recall), (100.0, 100.0));

    let features: Vec<_> = corpus.utterances.iter().map(|u| u.features.clone()).collect();
    let params = DtwParams { n_best: features.len(), max_score: Some(1e-9), ..DtwParams::default() };
    let mut dtw = Vec::new();
    for q in &corpus.queries {
        let ranked = rank_candidates(q, &features, &params).unwrap();
        assert_eq!(ranked[0].score, 0.0);
        dtw.extend(ranked.iter().map(Detection::from_dtw));
    }
    let (report, _) = evaluate(Method::Dtw, &dtw, &refs, &corpus.lexicon, 0.5);
    assert_eq!((report.precision, report.recall, report.recall_no_lex), (100.0, 100.0, Some(100.0)));
    assert!(report.speakers.unwrap().same.is_some());
}

#[test]
fn opening_the_network_raises_recall() {
    let noise = NoiseSpec { substitution_rate: 0.15, ..NoiseSpec::default() };
    let corpus = generate(&spec(noise, 4)).unwrap();
    let refs = restrict_to_lexicon(&corpus.reference, &corpus.lexicon);
    let trie = build_trie(&corpus.lexicon);
    let one_best: Vec<Detection> = corpus
        .utterances
        .iter()
        .flat_map(|u| longest_match_scan(&u.stream, &trie))
        .map(|m| Detection::from_stream(&m))
        .collect();
    let params = SearchParams { prune_threshold: 0.1, ..SearchParams::default() };
    let confnet: Vec<Detection> = corpus
        .utterances
        .iter()
        .flat_map(|u| greedy_search(&prune(&u.confnet, params.prune_threshold), &trie, &params))
        .map(|m| Detection::from_confnet(&m))
        .collect();
    let (a, _) = evaluate(Method::P2wOneBest, &one_best, &refs, &corpus.lexicon, 0.5);
    let (b, _) = evaluate(Method::P2wConfnet, &confnet, &refs, &corpus.lexicon, 0.5);
    assert!(b.recall > a.recall, "1-best {} vs confnet {}", a.recall, b.recall);
}
