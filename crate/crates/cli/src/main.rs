//! `sstd`: spoken term detection from the command line.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "sstd", version, about = "Spoken term detection for sparse transcription")]
pub struct Cli {
    /// `key = value` file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for the parallel searches.
    #[arg(long, global = true, env = "SSTD_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute CMVN-normalized MFCC feature files from WAV audio.
    Featurize(FeaturizeArgs),
    /// Convert orthography to phones, or phones back to orthography.
    G2p(G2pArgs),
    /// Query-by-example search with subsequence DTW.
    DtwSearch(DtwSearchArgs),
    /// Longest-match lexicon lookup over 1-best phone streams.
    P2wMatch(P2wMatchArgs),
    /// Lexicon search over phone confusion networks.
    ConfnetSearch(ConfnetSearchArgs),
    /// Score detection files against a reference alignment.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus with known word positions.
    Synth(SynthArgs),
    /// Render an evaluation JSON report as a table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    #[arg(long, default_value_t = 0.025)]
    pub window_s: f64,
    #[arg(long, default_value_t = 0.010)]
    pub hop_s: f64,
    #[arg(long, default_value_t = 0.97)]
    pub pre_emphasis: f64,
    #[arg(long, default_value_t = 26)]
    pub num_filters: usize,
    #[arg(long, default_value_t = 13)]
    pub num_coefficients: usize,
    #[arg(long, default_value_t = 0.0)]
    pub low_freq_hz: f64,
    /// Defaults to the Nyquist frequency.
    #[arg(long)]
    pub high_freq_hz: Option<f64>,
    /// Append delta and delta-delta coefficients.
    #[arg(long)]
    pub deltas: bool,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// A WAV file or a directory of them.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for `<stem>.feat` files.
    #[arg(long)]
    pub output: PathBuf,
    /// Skip mean and variance normalization.
    #[arg(long)]
    pub no_cmvn: bool,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct G2pArgs {
    /// Mapping TSV, or `kunwinjku` for the built-in table. Without it phones
    /// are the characters themselves.
    #[arg(long)]
    pub table: Option<String>,
    /// Text file, one utterance per line; `-` for stdin.
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Map phones (space separated, `|` between words) back to orthography.
    #[arg(long)]
    pub reverse: bool,
    /// What to do with unmapped characters: error, skip or passthrough.
    #[arg(long)]
    pub policy: Option<String>,
}

#[derive(Debug, Args)]
pub struct LexiconArgs {
    /// Lexicon TSV: orthography, phones, exemplar, speaker.
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Mapping used for entries without phones (`kunwinjku` or a TSV path).
    #[arg(long)]
    pub table: Option<String>,
}

#[derive(Debug, Args)]
pub struct DtwSearchArgs {
    /// Lexicon whose exemplar files are the queries.
    #[arg(long, conflicts_with = "queries")]
    pub lexicon: Option<PathBuf>,
    /// Directory of query `.feat` files (id = file stem).
    #[arg(long, required_unless_present = "lexicon")]
    pub queries: Option<PathBuf>,
    /// Directory of utterance `.feat` files.
    #[arg(long)]
    pub features: PathBuf,
    /// `utterance<TAB>speaker` lines.
    #[arg(long)]
    pub speakers: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub n_best: usize,
    /// Diagonal band radius in frames; unbanded when absent.
    #[arg(long)]
    pub band_width: Option<usize>,
    /// euclidean or cosine.
    #[arg(long, default_value = "euclidean")]
    pub distance: String,
    /// Drop matches scoring above this.
    #[arg(long)]
    pub max_score: Option<f64>,
    /// Allow several non-overlapping matches per utterance.
    #[arg(long)]
    pub all_spans: bool,
    /// Match CSV: query_id,utterance_id,start_s,end_s,score.
    #[arg(long)]
    pub output: PathBuf,
    /// Detections CSV for `evaluate`.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[command(flatten)]
    pub features_config: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct P2wMatchArgs {
    #[command(flatten)]
    pub lexicon: LexiconArgs,
    /// `utterance<TAB>speaker<TAB>phones` lines.
    #[arg(long)]
    pub streams: PathBuf,
    /// Report every occurrence instead of the longest-match segmentation.
    #[arg(long)]
    pub all_occurrences: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfnetSearchArgs {
    #[command(flatten)]
    pub lexicon: LexiconArgs,
    /// Directory of confusion network `.json` files, or a single file.
    #[arg(long)]
    pub confnets: PathBuf,
    /// Hypotheses below this probability are pruned (top-1 always kept).
    #[arg(long, default_value_t = 0.2)]
    pub threshold: f64,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long, default_value_t = 2)]
    pub min_word_phones: usize,
    /// Exhaustive search instead of the greedy one.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 64)]
    pub oracle_max_slots: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference alignment JSON.
    #[arg(long)]
    pub reference: PathBuf,
    #[command(flatten)]
    pub lexicon: LexiconArgs,
    /// Detection CSV files; repeat for several.
    #[arg(long, required = true, action = clap::ArgAction::Append)]
    pub detections: Vec<PathBuf>,
    /// Minimum intersection over union for a timed hit.
    #[arg(long, default_value_t = 0.5)]
    pub overlap_min: f64,
    /// Report JSON; the table always goes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub lexicon_size: usize,
    #[arg(long, default_value_t = 200)]
    pub utterances: usize,
    #[arg(long, default_value_t = 20)]
    pub phones: usize,
    #[arg(long, default_value_t = 0.0)]
    pub substitution_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub deletion_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub insertion_rate: f64,
    #[arg(long, default_value_t = 5)]
    pub confusion_k: usize,
    #[arg(long, default_value_t = 13)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 3)]
    pub speakers: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON written by `evaluate`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn main() -> ExitCode {
    let mut argv: Vec<OsString> = std::env::args_os().collect();
    if let Some(path) = config_path(&argv) {
        let merged = config::load_config(&path).and_then(|cfg| config::merge_args(&Cli::command(), argv, &cfg));
        match merged {
            Ok(m) => argv = m,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    if let Some(jobs) = cli.jobs.filter(|&j| j > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
