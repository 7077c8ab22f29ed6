//! Command-line flags. Every flag is optional so that values from
//! `--config` survive unless overridden; documented defaults live in the
//! option structs.

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ctxdrop::context::{ContextConfig, ContextMode};
use ctxdrop::corpus::{SplitName, SplitRatio};
use ctxdrop::evaluation::ReportLayout;
use ctxdrop::training::Method;

use crate::options::*;

#[derive(Debug, Parser)]
#[command(name = "ctxdrop", version, about = "Action item detection for meeting transcripts")]
pub struct Cli {
    /// Output directory (must be new or empty). Default: runs/<command>-<timestamp>.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,

    /// Options from an earlier config.resolved; explicit flags override them.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a transcript JSONL file (or generate a synthetic corpus) and
    /// write it in canonical form.
    Ingest(IngestArgs),
    /// Corpus statistics: meetings, utterances, action items, kappa.
    Stats(StatsArgs),
    /// Partition a corpus into train/dev/test.
    Split(SplitArgs),
    /// Lexicon-based candidate pre-selection.
    Candidates(CandidatesArgs),
    /// Local/global context plans for every sentence.
    Context(ContextArgs),
    /// Grid-search training over seeds, learning rates and epochs.
    Train(TrainArgs),
    /// Score a checkpoint (or a prediction dump) with positive F1.
    Evaluate(EvaluateArgs),
    /// Combine the encoder of one checkpoint with the pooler of another.
    EnsembleInit(EnsembleArgs),
    /// Render training results as a markdown table.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Stats(_) => "stats",
            Command::Split(_) => "split",
            Command::Candidates(_) => "candidates",
            Command::Context(_) => "context",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::EnsembleInit(_) => "ensemble-init",
            Command::Report(_) => "report",
        }
    }
}

fn parse_ratio(s: &str) -> Result<SplitRatio, String> {
    s.parse().map_err(|e: ctxdrop::corpus::CorpusError| e.to_string())
}

fn set<T>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Transcript JSONL [default: $CTXDROP_DATA_DIR/corpus.jsonl].
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Generate this many synthetic meetings instead of reading --data.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Synthetic: sentences per meeting [default: 20].
    #[arg(long)]
    pub sentences_per_meeting: Option<usize>,
    /// Synthetic: share of action-item sentences [default: 0.25].
    #[arg(long)]
    pub positive_rate: Option<f64>,
    /// Synthetic: annotators per sentence [default: 0].
    #[arg(long)]
    pub annotators: Option<usize>,
    /// Synthetic: annotator label noise [default: 0.1].
    #[arg(long)]
    pub annotator_noise: Option<f64>,
    /// Synthetic: generator seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

impl IngestArgs {
    pub fn apply(self, o: &mut IngestOptions) {
        if self.data.is_some() {
            o.data = self.data;
        }
        set(&mut o.synthetic_meetings, self.synthetic);
        set(&mut o.sentences_per_meeting, self.sentences_per_meeting);
        set(&mut o.positive_rate, self.positive_rate);
        set(&mut o.annotators, self.annotators);
        set(&mut o.annotator_noise, self.annotator_noise);
        set(&mut o.seed, self.seed);
    }
}

#[derive(Debug, Args)]
pub struct SplitFlags {
    /// Split manifest: one `meeting_id<TAB>train|dev|test` per line.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Shuffle seed when no manifest is given [default: 0].
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// train,dev,test percentages [default: 70,15,15].
    #[arg(long, value_parser = parse_ratio)]
    pub ratio: Option<SplitRatio>,
}

impl SplitFlags {
    fn apply(self, o: &mut SplitOptions) {
        if self.manifest.is_some() {
            o.manifest = self.manifest;
        }
        set(&mut o.seed, self.split_seed);
        set(&mut o.ratio, self.ratio);
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Transcript JSONL [default: $CTXDROP_DATA_DIR/corpus.jsonl].
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Add train/dev/test rows.
    #[arg(long)]
    pub by_split: bool,
    #[command(flatten)]
    pub split: SplitFlags,
}

impl StatsArgs {
    pub fn apply(self, o: &mut StatsOptions) {
        if self.data.is_some() {
            o.data = self.data;
        }
        o.by_split |= self.by_split || self.split.manifest.is_some();
        self.split.apply(&mut o.split);
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Transcript JSONL [default: $CTXDROP_DATA_DIR/corpus.jsonl].
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitFlags,
}

impl SplitArgs {
    pub fn apply(self, o: &mut SplitCommandOptions) {
        if self.data.is_some() {
            o.data = self.data;
        }
        self.split.apply(&mut o.split);
    }
}

#[derive(Debug, Args)]
pub struct CandidatesArgs {
    /// Transcript JSONL [default: $CTXDROP_DATA_DIR/corpus.jsonl].
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Temporal-expression lexicon [default: built-in].
    #[arg(long, requires = "verb_lexicon")]
    pub temporal_lexicon: Option<PathBuf>,
    /// Action-verb lexicon [default: built-in].
    #[arg(long, requires = "temporal_lexicon")]
    pub verb_lexicon: Option<PathBuf>,
}

impl CandidatesArgs {
    pub fn apply(self, o: &mut CandidatesOptions) {
        if self.data.is_some() {
            o.data = self.data;
        }
        if self.temporal_lexicon.is_some() {
            o.temporal_lexicon = self.temporal_lexicon;
            o.verb_lexicon = self.verb_lexicon;
        }
    }
}

#[derive(Debug, Args)]
pub struct ContextFlags {
    /// sentence | local | global | local_and_global [default: local_and_global].
    #[arg(long = "context")]
    pub mode: Option<ContextMode>,
    /// Preceding sentences in the local window [default: 1].
    #[arg(long)]
    pub num_preceding: Option<usize>,
    /// Following sentences in the local window [default: 1].
    #[arg(long)]
    pub num_following: Option<usize>,
    /// Global context size [default: 2].
    #[arg(long)]
    pub global_top_k: Option<usize>,
    /// N-gram orders for global similarity [default: 1,2].
    #[arg(long, value_delimiter = ',')]
    pub ngram_orders: Vec<usize>,
    /// Prefix sentences with the speaker [default: true].
    #[arg(long)]
    pub include_speaker: Option<bool>,
}

impl ContextFlags {
    fn apply(self, c: &mut ContextConfig) {
        set(&mut c.mode, self.mode);
        set(&mut c.num_preceding, self.num_preceding);
        set(&mut c.num_following, self.num_following);
        set(&mut c.global_top_k, self.global_top_k);
        if !self.ngram_orders.is_empty() {
            c.ngram_orders = self.ngram_orders.into_iter().collect::<BTreeSet<_>>();
        }
        set(&mut c.render.include_speaker, self.include_speaker);
    }
}

#[derive(Debug, Args)]
pub struct ContextArgs {
    /// Transcript JSONL [default: $CTXDROP_DATA_DIR/corpus.jsonl].
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub context: ContextFlags,
}

impl ContextArgs {
    pub fn apply(self, o: &mut ContextOptions) {
        if self.data.is_some() {
            o.data = self.data;
        }
        self.context.apply(&mut o.context);
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Transcript JSONL [default: $CTXDROP_DATA_DIR/corpus.jsonl].
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitFlags,
    #[command(flatten)]
    pub context: ContextFlags,
    /// ce_only | r_drop_sentence | r_drop_context | context_drop_fixed |
    /// context_drop_dynamic [default: context_drop_dynamic].
    #[arg(long)]
    pub method: Option<Method>,
    /// Consistency weight [default: 4.0 for R-Drop, 1.0 for Context-Drop].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Context keep probability [default: 0.7 for local_and_global, else 0.5].
    #[arg(long)]
    pub keep_prob: Option<f64>,
    /// Learning-rate grid [default: 1e-5,2e-5].
    #[arg(long, value_delimiter = ',')]
    pub learning_rates: Vec<f64>,
    /// Epoch grid [default: 2,3].
    #[arg(long, value_delimiter = ',')]
    pub epochs: Vec<usize>,
    /// [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// [default: 0.3]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Number of seeds [default: 5].
    #[arg(long)]
    pub num_seeds: Option<usize>,
    /// First seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid cells trained in parallel [default: 1].
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Start from this classifier checkpoint's backbone (e.g. from ensemble-init).
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Encoder name [default: toy].
    #[arg(long)]
    pub encoder: Option<String>,
    /// Toy encoder hidden size [default: 32].
    #[arg(long)]
    pub hidden_size: Option<usize>,
    /// Toy encoder hashed feature buckets [default: 1024].
    #[arg(long)]
    pub feature_buckets: Option<usize>,
    /// Input truncation in units [default: 128].
    #[arg(long)]
    pub max_input_units: Option<usize>,
}

impl TrainArgs {
    pub fn apply(self, o: &mut TrainOptions) {
        if self.data.is_some() {
            o.data = self.data;
        }
        if self.init.is_some() {
            o.init = self.init;
        }
        set(&mut o.jobs, self.jobs);
        self.split.apply(&mut o.split);

        let e = &mut o.experiment;
        if let Some(m) = self.method {
            e.loss.method = m;
            e.loss.alpha = m.default_alpha();
        }
        set(&mut e.loss.alpha, self.alpha);
        let mode_flag = self.context.mode;
        self.context.apply(&mut e.context);
        if let Some(mode) = mode_flag {
            e.loss.context_mode = mode;
            e.loss.keep_prob = mode.default_keep_prob();
        }
        set(&mut e.loss.keep_prob, self.keep_prob);
        e.context.keep_prob = e.loss.keep_prob;

        if !self.learning_rates.is_empty() {
            e.run.learning_rates = self.learning_rates;
        }
        if !self.epochs.is_empty() {
            e.run.epochs_options = self.epochs;
        }
        set(&mut e.run.batch_size, self.batch_size);
        set(&mut e.run.dropout, self.dropout);
        e.model.dropout = e.run.dropout;
        set(&mut e.run.num_seeds, self.num_seeds);
        set(&mut e.run.seed, self.seed);
        set(&mut e.model.encoder, self.encoder);
        set(&mut e.model.hidden_size, self.hidden_size);
        set(&mut e.model.feature_buckets, self.feature_buckets);
        set(&mut e.model.max_input_units, self.max_input_units);
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Prediction JSONL to score; skips running a model.
    #[arg(long, conflicts_with_all = ["checkpoint", "data"])]
    pub predictions: Option<PathBuf>,
    /// Classifier checkpoint (JSON) written by train or ensemble-init.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Transcript JSONL [default: $CTXDROP_DATA_DIR/corpus.jsonl].
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Evaluate only this split (train | dev | test) [default: all meetings].
    #[arg(long)]
    pub subset: Option<SplitName>,
    #[command(flatten)]
    pub split: SplitFlags,
    /// Method the checkpoint was trained with; decides whether inputs carry
    /// context [default: context_drop_dynamic].
    #[arg(long)]
    pub method: Option<Method>,
    #[command(flatten)]
    pub context: ContextFlags,
}

impl EvaluateArgs {
    pub fn apply(self, o: &mut EvaluateOptions) {
        if self.predictions.is_some() {
            o.predictions = self.predictions;
        }
        if self.checkpoint.is_some() {
            o.checkpoint = self.checkpoint;
        }
        if self.data.is_some() {
            o.data = self.data;
        }
        if self.subset.is_some() {
            o.subset = self.subset;
        }
        self.split.apply(&mut o.split);
        set(&mut o.method, self.method);
        self.context.apply(&mut o.context);
    }
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// TOML with `encoder_layers`, `pooler_layer` and optional `head_seed`.
    #[arg(long, conflicts_with_all = ["encoder_from", "pooler_from"])]
    pub manifest: Option<PathBuf>,
    /// Checkpoint providing the encoder layers.
    #[arg(long, requires = "pooler_from")]
    pub encoder_from: Option<PathBuf>,
    /// Checkpoint providing the pooler layer.
    #[arg(long, requires = "encoder_from")]
    pub pooler_from: Option<PathBuf>,
    /// Seed of the fresh classification head [default: 0].
    #[arg(long)]
    pub head_seed: Option<u64>,
}

impl EnsembleArgs {
    pub fn apply(self, o: &mut EnsembleOptions) {
        if self.manifest.is_some() {
            o.manifest = self.manifest;
        }
        if self.encoder_from.is_some() {
            o.encoder_from = self.encoder_from;
            o.pooler_from = self.pooler_from;
        }
        set(&mut o.head_seed, self.head_seed);
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// results.json files written by train.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    /// Row keys `key1|key2` for each input, in order.
    #[arg(long = "label")]
    pub labels: Vec<String>,
    /// table2 | table3 | table4 [default: table3].
    #[arg(long)]
    pub layout: Option<ReportLayout>,
}

impl ReportArgs {
    pub fn apply(self, o: &mut ReportOptions) {
        if !self.inputs.is_empty() {
            o.inputs = self.inputs;
        }
        if !self.labels.is_empty() {
            o.labels = self.labels;
        }
        set(&mut o.layout, self.layout);
    }
}
