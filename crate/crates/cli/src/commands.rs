use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use sstd_core::confnet::{greedy_search, load_confnet, oracle_search, prune, ConfnetMatch, SearchParams};
use sstd_core::dtw::{rank_candidates, DtwMatch, DtwParams};
use sstd_core::eval::{
    evaluate, load_reference, method_overlap, read_detections, render_table, restrict_to_lexicon, write_detections,
    Detection, EvaluationSummary, Method,
};
use sstd_core::features::{featurize, load_audio, mfcc, read_features, write_features, FeatureConfig, FeatureMatrix};
use sstd_core::g2p::{text_to_phones, to_graphemes, G2PTable, UnknownPolicy};
use sstd_core::lexicon::{build_trie, load_lexicon, LexiconEntry};
use sstd_core::p2w::{all_occurrences_scan, load_streams, longest_match_scan};
use sstd_core::synth::{generate, write_corpus, NoiseSpec, SynthSpec};

use crate::{
    Command, ConfnetSearchArgs, DtwSearchArgs, EvaluateArgs, FeatureArgs, FeaturizeArgs, G2pArgs, LexiconArgs,
    P2wMatchArgs, ReportArgs, SynthArgs,
};

/// Run one subcommand; the returned text goes to stdout.
pub fn run(command: Command) -> Result<String> {
    match command {
        Command::Featurize(a) => featurize_cmd(a),
        Command::G2p(a) => g2p_cmd(a),
        Command::DtwSearch(a) => dtw_search_cmd(a),
        Command::P2wMatch(a) => p2w_match_cmd(a),
        Command::ConfnetSearch(a) => confnet_search_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn feature_config(a: &FeatureArgs) -> FeatureConfig {
    FeatureConfig {
        window_s: a.window_s,
        hop_s: a.hop_s,
        pre_emphasis: a.pre_emphasis,
        num_filters: a.num_filters,
        num_coefficients: a.num_coefficients,
        low_freq_hz: a.low_freq_hz,
        high_freq_hz: a.high_freq_hz,
        deltas: a.deltas,
    }
}

/// Files in `dir` with extension `ext`, sorted by name; a plain file is
/// returned as is.
fn list_files(path: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading directory {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .{ext} files in {}", path.display());
    }
    Ok(files)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load_table(spec: Option<&str>) -> Result<Option<G2PTable>> {
    Ok(match spec {
        None => None,
        Some("kunwinjku") => Some(G2PTable::kunwinjku()),
        Some(path) => Some(G2PTable::load(Path::new(path))?),
    })
}

fn lexicon(a: &LexiconArgs) -> Result<Vec<LexiconEntry>> {
    let table = load_table(a.table.as_deref())?;
    let entries = load_lexicon(&a.lexicon, table.as_ref())?;
    if entries.is_empty() {
        bail!("lexicon {} has no entries", a.lexicon.display());
    }
    Ok(entries)
}

fn featurize_cmd(a: FeaturizeArgs) -> Result<String> {
    let cfg = feature_config(&a.features);
    let inputs = list_files(&a.input, "wav")?;
    fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    let frames: Vec<usize> = inputs
        .par_iter()
        .map(|path| -> Result<usize> {
            let clip = load_audio(path)?;
            let feats = if a.no_cmvn { mfcc(&clip, &cfg)? } else { featurize(&clip, &cfg)? };
            let out = a.output.join(format!("{}.feat", clip.id));
            let mut buf = Vec::new();
            write_features(&feats, &mut buf)?;
            write_output(&out, &buf)?;
            Ok(feats.num_frames())
        })
        .collect::<Result<_>>()?;
    Ok(format!(
        "featurize: {} files, {} frames -> {}",
        frames.len(),
        frames.iter().sum::<usize>(),
        a.output.display()
    ))
}

fn read_input(path: &Path) -> Result<String> {
    let mut text = String::new();
    if path == Path::new("-") {
        io::stdin().read_to_string(&mut text)?;
    } else {
        text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    }
    Ok(text)
}

fn g2p_cmd(a: G2pArgs) -> Result<String> {
    let mut table = load_table(a.table.as_deref())?.unwrap_or_else(|| G2PTable::identity("identity"));
    if let Some(p) = &a.policy {
        table = table.with_policy(p.parse::<UnknownPolicy>().map_err(anyhow::Error::msg)?);
    }
    let text = read_input(&a.input)?;
    let mut out = String::new();
    for line in text.lines() {
        let converted = if a.reverse {
            let mut words = Vec::new();
            for word in line.split('|') {
                let phones: Vec<String> = word.split_whitespace().map(str::to_owned).collect();
                if !phones.is_empty() {
                    words.push(to_graphemes(&phones, &table)?);
                }
            }
            words.join(" ")
        } else {
            let words: Vec<String> = text_to_phones(line, &table)?.iter().map(ToString::to_string).collect();
            words.join(" | ")
        };
        out.push_str(&converted);
        out.push('\n');
    }
    match &a.output {
        Some(path) => {
            write_output(path, out.as_bytes())?;
            Ok(format!("g2p: {} lines -> {}", text.lines().count(), path.display()))
        }
        None => Ok(out.trim_end_matches('\n').to_owned()),
    }
}

fn load_speakers(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((utt, spk)) = line.split_once('\t') else {
            bail!("{}:{}: expected utterance<TAB>speaker", path.display(), n + 1);
        };
        out.insert(utt.trim().to_owned(), spk.trim().to_owned());
    }
    Ok(out)
}

/// Feature file, or WAV audio featurized with `cfg`.
fn load_query(path: &Path, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    let is_wav = path.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav"));
    Ok(if is_wav { featurize(&load_audio(path)?, cfg)? } else { read_features(path)? })
}

fn dtw_queries(a: &DtwSearchArgs) -> Result<Vec<FeatureMatrix>> {
    let cfg = feature_config(&a.features_config);
    if let Some(lex) = &a.lexicon {
        let mut queries = Vec::new();
        for entry in load_lexicon(lex, None)? {
            for ex in &entry.exemplars {
                let Some(audio) = &ex.audio else { continue };
                let mut q = load_query(audio, &cfg)?;
                q.utterance_id = entry.orthography.clone();
                q.speaker = ex.speaker.clone();
                queries.push(q);
            }
        }
        if queries.is_empty() {
            bail!("lexicon {} lists no exemplar files", lex.display());
        }
        return Ok(queries);
    }
    let dir = a.queries.as_ref().expect("clap requires --queries without --lexicon");
    let mut queries = Vec::new();
    for path in list_files(dir, "feat")? {
        queries.push(read_features(&path)?);
    }
    Ok(queries)
}

fn dtw_search_cmd(a: DtwSearchArgs) -> Result<String> {
    let params = DtwParams {
        n_best: a.n_best,
        band_width: a.band_width,
        distance: a.distance.parse().map_err(anyhow::Error::msg)?,
        max_score: a.max_score,
        one_per_utterance: !a.all_spans,
    };
    params.validate()?;
    let speakers = a.speakers.as_deref().map(load_speakers).transpose()?;
    let mut utterances = Vec::new();
    for path in list_files(&a.features, "feat")? {
        let mut f = read_features(&path)?;
        if let Some(spk) = speakers.as_ref().and_then(|s| s.get(&f.utterance_id)) {
            f.speaker = Some(spk.clone());
        }
        utterances.push(f);
    }
    let queries = dtw_queries(&a)?;

    let mut matches: Vec<DtwMatch> = Vec::new();
    for q in &queries {
        matches.extend(rank_candidates(q, &utterances, &params).with_context(|| format!("query {}", q.utterance_id))?);
    }
    let mut csv = String::from("query_id,utterance_id,start_s,end_s,score\n");
    for m in &matches {
        csv.push_str(&format!("{},{},{},{},{}\n", m.query_id, m.utterance_id, m.start_s(), m.end_s(), m.score));
    }
    write_output(&a.output, csv.as_bytes())?;
    if let Some(path) = &a.detections {
        let dets: Vec<Detection> = matches.iter().map(Detection::from_dtw).collect();
        let mut buf = Vec::new();
        write_detections(&dets, &mut buf)?;
        write_output(path, &buf)?;
    }
    Ok(format!(
        "dtw-search: {} queries x {} utterances, {} matches -> {}",
        queries.len(),
        utterances.len(),
        matches.len(),
        a.output.display()
    ))
}

fn p2w_match_cmd(a: P2wMatchArgs) -> Result<String> {
    let trie = build_trie(&lexicon(&a.lexicon)?);
    let mut streams = load_streams(&a.streams)?;
    streams.sort_by(|x, y| x.utterance_id.cmp(&y.utterance_id));
    let mut dets = Vec::new();
    for s in &streams {
        let found = if a.all_occurrences { all_occurrences_scan(s, &trie) } else { longest_match_scan(s, &trie) };
        dets.extend(found.iter().map(Detection::from_stream));
    }
    let mut buf = Vec::new();
    write_detections(&dets, &mut buf)?;
    write_output(&a.output, &buf)?;
    Ok(format!("p2w-match: {} streams, {} matches -> {}", streams.len(), dets.len(), a.output.display()))
}

fn confnet_search_cmd(a: ConfnetSearchArgs) -> Result<String> {
    let params = SearchParams {
        prune_threshold: a.threshold,
        top_k: a.top_k,
        min_word_phones: a.min_word_phones,
        oracle_max_slots: a.oracle_max_slots,
    };
    params.validate()?;
    let trie = build_trie(&lexicon(&a.lexicon)?);
    let files = list_files(&a.confnets, "json")?;
    let mut per_net: Vec<(String, Vec<ConfnetMatch>)> = files
        .par_iter()
        .map(|path| -> Result<(String, Vec<ConfnetMatch>)> {
            let net = load_confnet(path)?;
            net.validate().with_context(|| path.display().to_string())?;
            let pruned = prune(&net, params.prune_threshold);
            let found = if a.oracle { oracle_search(&pruned, &trie, &params)? } else { greedy_search(&pruned, &trie, &params) };
            Ok((net.utterance_id, found))
        })
        .collect::<Result<_>>()?;
    per_net.sort_by(|x, y| x.0.cmp(&y.0));
    let dets: Vec<Detection> = per_net.iter().flat_map(|(_, ms)| ms.iter().map(Detection::from_confnet)).collect();
    let mut buf = Vec::new();
    write_detections(&dets, &mut buf)?;
    write_output(&a.output, &buf)?;
    Ok(format!(
        "confnet-search ({}): {} networks, {} matches -> {}",
        if a.oracle { "oracle" } else { "greedy" },
        per_net.len(),
        dets.len(),
        a.output.display()
    ))
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<String> {
    if !(a.overlap_min > 0.0 && a.overlap_min <= 1.0) {
        bail!("--overlap-min must be in (0, 1]");
    }
    let lex = lexicon(&a.lexicon)?;
    let refs = restrict_to_lexicon(&load_reference(&a.reference)?, &lex);
    let mut by_method: BTreeMap<Method, Vec<Detection>> = BTreeMap::new();
    for path in &a.detections {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        for d in read_detections(file).with_context(|| path.display().to_string())? {
            by_method.entry(d.method).or_default().push(d);
        }
    }
    if by_method.is_empty() {
        bail!("no detections in the given files");
    }
    let mut reports = Vec::new();
    let mut retrieved = Vec::new();
    let mut unknown = 0;
    for (method, dets) in &by_method {
        let (report, tps) = evaluate(*method, dets, &refs, &lex, a.overlap_min);
        unknown += report.unknown_utterances;
        reports.push(report);
        retrieved.push((method.as_str(), tps));
    }
    let mut overlaps = Vec::new();
    for i in 0..retrieved.len() {
        for j in i + 1..retrieved.len() {
            let (a_name, a_tps) = &retrieved[i];
            let (b_name, b_tps) = &retrieved[j];
            overlaps.push(method_overlap(a_name, a_tps, b_name, b_tps, refs.len()));
        }
    }
    let summary = EvaluationSummary { reference_tokens: refs.len(), reports, overlaps };
    if let Some(path) = &a.output {
        let mut json = serde_json::to_string_pretty(&summary)?;
        json.push('\n');
        write_output(path, json.as_bytes())?;
    }
    let mut text = render_table(&summary);
    text.push_str(&format!(
        "\nevaluate: {} methods against {} reference tokens",
        summary.reports.len(),
        summary.reference_tokens
    ));
    if unknown > 0 {
        text.push_str(&format!("; {unknown} detections fall in utterances without reference tokens (all false positives)"));
    }
    Ok(text)
}

fn synth_cmd(a: SynthArgs) -> Result<String> {
    let spec = SynthSpec {
        lexicon_size: a.lexicon_size,
        utterance_count: a.utterances,
        phones_inventory: a.phones,
        noise: NoiseSpec {
            substitution_rate: a.substitution_rate,
            deletion_rate: a.deletion_rate,
            insertion_rate: a.insertion_rate,
        },
        confusion_k: a.confusion_k,
        seed: a.seed,
        feature_dim: a.feature_dim,
        speakers: a.speakers,
    };
    let corpus = generate(&spec)?;
    write_corpus(&corpus, &a.output)?;
    Ok(format!(
        "synth: {} utterances, {} words, {} planted tokens -> {}",
        corpus.utterances.len(),
        corpus.lexicon.len(),
        corpus.reference.len(),
        a.output.display()
    ))
}

fn report_cmd(a: ReportArgs) -> Result<String> {
    let text = fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let summary: EvaluationSummary =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.input.display()))?;
    let table = render_table(&summary);
    match &a.output {
        Some(path) => {
            write_output(path, table.as_bytes())?;
            Ok(format!("report: {} methods -> {}", summary.reports.len(), path.display()))
        }
        None => Ok(table.trim_end().to_owned()),
    }
}
