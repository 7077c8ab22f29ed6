use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use ctxdrop::context::{plan_meeting, ContextPlan};
use ctxdrop::corpus::synthetic::{generate, SyntheticConfig};
use ctxdrop::corpus::{
    corpus_stats, ingest_transcripts, select_candidates, split_corpus, write_transcripts, CandidateLexicons,
    CorpusSplit, Meeting, SplitManifest, SplitName, TranscriptFormat,
};
use ctxdrop::evaluation::{
    positive_f1, read_predictions, render_report, AggregateReport, MetricReport, PredictionRecord, ReportLayout,
    ResultRow,
};
use ctxdrop::model::{
    ensemble_init, load_backbone, load_json_checkpoint, save_json_checkpoint, save_safetensors, ClassifierModel,
    EncoderRegistry, EnsembleManifest,
};
use ctxdrop::training::{
    CellSummary, Dataset, LossConfig, Method, StrategyRegistry, TrainError, TrainRunConfig, Trainer,
};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, runtime, CliError};
use crate::options::*;
use crate::rundir::RunDir;

fn load_corpus(data: Option<PathBuf>) -> Result<(PathBuf, Vec<Meeting>), CliError> {
    let path = resolve_data(data)?;
    let meetings = ingest_transcripts(&path, TranscriptFormat::Jsonl)?;
    if meetings.is_empty() {
        return Err(invalid(format!("{} contains no meetings", path.display())));
    }
    Ok((path, meetings))
}

fn make_split(meetings: &[Meeting], opts: &mut SplitOptions) -> Result<CorpusSplit, CliError> {
    let manifest = match &opts.manifest {
        Some(p) => {
            let p = resolve_input(p);
            let m = SplitManifest::load(&p)?;
            opts.manifest = Some(p);
            Some(m)
        }
        None => None,
    };
    Ok(split_corpus(meetings, opts.ratio, opts.seed, manifest.as_ref())?)
}

/// Creates the run directory and records the options that produced it.
fn start_run<T: Serialize>(run_dir: Option<&Path>, command: &str, options: &T) -> Result<RunDir, CliError> {
    let config = render_config(command, options)?;
    let dir = RunDir::create(run_dir, command)?;
    dir.write(CONFIG_FILE, config)?;
    Ok(dir)
}

pub fn ingest(mut o: IngestOptions, run_dir: Option<&Path>) -> Result<(), CliError> {
    let meetings = if o.synthetic_meetings > 0 {
        o.data = None;
        for (name, p) in [("positive_rate", o.positive_rate), ("annotator_noise", o.annotator_noise)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} must lie in [0,1]")));
            }
        }
        let cfg = SyntheticConfig {
            meetings: o.synthetic_meetings,
            sentences_per_meeting: o.sentences_per_meeting,
            positive_rate: o.positive_rate,
            annotators: o.annotators,
            annotator_noise: o.annotator_noise,
            ..SyntheticConfig::default()
        };
        generate(&cfg, o.seed)
    } else {
        let (path, meetings) = load_corpus(o.data.take())?;
        o.data = Some(path);
        meetings
    };
    let dir = start_run(run_dir, "ingest", &o)?;
    let mut f = dir.create_file("corpus.jsonl")?;
    write_transcripts(&mut f, &meetings)?;
    let sentences: usize = meetings.iter().map(Meeting::len).sum();
    let positives: usize = meetings.iter().map(Meeting::positives).sum();
    println!(
        "{} meetings, {sentences} sentences, {positives} action items -> {}",
        meetings.len(),
        dir.path("corpus.jsonl").display()
    );
    Ok(())
}

pub fn stats(mut o: StatsOptions, run_dir: Option<&Path>) -> Result<(), CliError> {
    let (path, meetings) = load_corpus(o.data.take())?;
    o.data = Some(path);
    let split = if o.by_split {
        Some(make_split(&meetings, &mut o.split)?)
    } else {
        None
    };
    let stats = corpus_stats(&meetings, split.as_ref());
    let dir = start_run(run_dir, "stats", &o)?;
    let table = stats.to_string();
    dir.write("stats.txt", &table)?;
    dir.write_json("stats.json", &stats)?;
    print!("{table}");
    Ok(())
}

pub fn split(mut o: SplitCommandOptions, run_dir: Option<&Path>) -> Result<(), CliError> {
    let (path, meetings) = load_corpus(o.data.take())?;
    o.data = Some(path);
    let split = make_split(&meetings, &mut o.split)?;
    let dir = start_run(run_dir, "split", &o)?;
    dir.write("split.tsv", SplitManifest::from_split(&split).render())?;
    for name in SplitName::ALL {
        let mut f = dir.create_file(&format!("{name}.jsonl"))?;
        write_transcripts(&mut f, &split.select_owned(&meetings, name))?;
    }
    let (a, b, c) = split.sizes();
    println!("train {a} / dev {b} / test {c} meetings -> {}", dir.path("split.tsv").display());
    Ok(())
}

#[derive(Serialize)]
struct CandidateLine<'a> {
    meeting_id: &'a str,
    sentence_ids: Vec<usize>,
}

pub fn candidates(mut o: CandidatesOptions, run_dir: Option<&Path>) -> Result<(), CliError> {
    let (path, meetings) = load_corpus(o.data.take())?;
    o.data = Some(path);
    let lexicons = match (&o.temporal_lexicon, &o.verb_lexicon) {
        (Some(t), Some(v)) => {
            let (t, v) = (resolve_input(t), resolve_input(v));
            let lex = CandidateLexicons::load(&t, &v)?;
            o.temporal_lexicon = Some(t);
            o.verb_lexicon = Some(v);
            lex
        }
        (None, None) => CandidateLexicons::builtin(),
        _ => return Err(invalid("give both --temporal-lexicon and --verb-lexicon, or neither")),
    };
    let dir = start_run(run_dir, "candidates", &o)?;
    let mut lines = Vec::with_capacity(meetings.len());
    let (mut total, mut selected, mut positives, mut covered) = (0, 0, 0, 0);
    for m in &meetings {
        let ids = select_candidates(m, &lexicons);
        total += m.len();
        selected += ids.len();
        positives += m.positives();
        covered += m.sentences.iter().filter(|s| s.label.is_positive() && ids.contains(&s.sentence_id)).count();
        lines.push(CandidateLine {
            meeting_id: &m.meeting_id,
            sentence_ids: ids.into_iter().collect(),
        });
    }
    dir.write_jsonl("candidates.jsonl", &lines)?;
    println!("{selected} of {total} sentences are candidates; they contain {covered} of {positives} labelled action items");
    Ok(())
}

pub fn context(mut o: ContextOptions, run_dir: Option<&Path>) -> Result<(), CliError> {
    let (path, meetings) = load_corpus(o.data.take())?;
    o.data = Some(path);
    o.context.validate()?;
    let plans: Vec<ContextPlan> = meetings
        .iter()
        .map(|m| plan_meeting(m, &o.context))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let dir = start_run(run_dir, "context", &o)?;
    let mut f = dir.create_file("plans.jsonl")?;
    ctxdrop::context::write_plans(&mut f, &plans)?;
    println!(
        "{} context plans ({}) -> {}",
        plans.len(),
        o.context.mode,
        dir.path("plans.jsonl").display()
    );
    Ok(())
}

/// Summary of a train run, read back by `report`.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrainResults {
    pub method: Method,
    pub context_mode: ctxdrop::context::ContextMode,
    pub alpha: f64,
    pub encoder: String,
    pub init: Option<PathBuf>,
    pub seeds: Vec<SeedSummary>,
    pub dev: AggregateReport,
    pub test: Option<AggregateReport>,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub dev_positive_f1: f64,
    pub test: Option<MetricReport>,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CellResult {
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
    pub log: PathBuf,
}

fn cell_log_name(c: &CellSummary) -> String {
    format!(
        "logs/seed-{}_lr-{:e}_epochs-{}.jsonl",
        c.cell.seed, c.cell.learning_rate, c.cell.epochs
    )
}

pub fn train(mut o: TrainOptions, run_dir: Option<&Path>) -> Result<(), CliError> {
    if o.jobs == 0 {
        return Err(invalid("--jobs must be at least 1"));
    }
    let (path, meetings) = load_corpus(o.data.take())?;
    o.data = Some(path);
    let split = make_split(&meetings, &mut o.split)?;
    let registry = EncoderRegistry::default();

    let init = match &o.init {
        Some(p) => {
            let p = resolve_input(p);
            let ckpt = load_json_checkpoint(&p)?;
            o.experiment.model = ckpt.spec.clone();
            o.experiment.model.dropout = o.experiment.run.dropout;
            o.init = Some(p);
            Some(ckpt)
        }
        None => None,
    };
    o.experiment.validate()?;
    let e = &o.experiment;
    let trainer = Trainer::new(&StrategyRegistry::default(), e.loss.clone(), e.context.clone(), e.run.clone())?;
    let (train, dev, test) = (
        split.select_owned(&meetings, SplitName::Train),
        split.select_owned(&meetings, SplitName::Dev),
        split.select_owned(&meetings, SplitName::Test),
    );
    if dev.is_empty() {
        return Err(invalid("the dev split is empty; use more meetings or another ratio"));
    }
    let spec = e.model.clone();
    let make_model = |seed: u64| -> Result<ClassifierModel, TrainError> {
        Ok(match &init {
            Some(ckpt) => ClassifierModel::with_backbone(&registry, spec.clone(), ckpt.backbone.clone(), seed)?,
            None => ClassifierModel::new(&registry, spec.clone(), seed)?,
        })
    };
    // Fail on a bad spec before creating the run directory.
    make_model(e.run.seed)?;

    let dir = start_run(run_dir, "train", &o)?;
    let data = Dataset {
        train: &train,
        dev: &dev,
        test: &test,
    };
    let outcome = trainer.grid_search(make_model, &data, o.jobs)?;

    let mut cells = Vec::new();
    for c in &outcome.cells {
        let name = cell_log_name(c);
        dir.write_jsonl(&name, &c.log)?;
        cells.push(CellResult {
            seed: c.cell.seed,
            learning_rate: c.cell.learning_rate,
            epochs: c.cell.epochs,
            best_epoch: c.best_epoch,
            best_dev_f1: c.best_dev_f1,
            log: PathBuf::from(name),
        });
    }
    let mut seeds = Vec::new();
    for s in &outcome.seeds {
        let ckpt = PathBuf::from(format!("checkpoints/seed-{}.json", s.cell.seed));
        dir.create_file(&ckpt.to_string_lossy())?;
        save_json_checkpoint(&s.model.checkpoint(), &dir.path(&ckpt.to_string_lossy())).map_err(runtime)?;
        if !s.test_predictions.is_empty() {
            dir.write_jsonl(&format!("predictions/seed-{}.test.jsonl", s.cell.seed), &s.test_predictions)?;
        }
        println!(
            "seed {}: lr {:e}, {} epochs (best epoch {}), dev F1 {:.4}{}",
            s.cell.seed,
            s.cell.learning_rate,
            s.cell.epochs,
            s.best_epoch,
            s.dev_f1,
            s.test.as_ref().map(|t| format!(", test F1 {:.4}", t.positive_f1)).unwrap_or_default()
        );
        seeds.push(SeedSummary {
            seed: s.cell.seed,
            learning_rate: s.cell.learning_rate,
            epochs: s.cell.epochs,
            best_epoch: s.best_epoch,
            dev_positive_f1: s.dev_f1,
            test: s.test.clone(),
            checkpoint: ckpt,
        });
    }
    let results = TrainResults {
        method: e.loss.method,
        context_mode: e.loss.context_mode,
        alpha: e.loss.effective_alpha(),
        encoder: e.model.encoder.clone(),
        init: o.init.clone(),
        seeds,
        dev: outcome.dev_aggregate.clone(),
        test: outcome.test_aggregate.clone(),
        cells,
    };
    dir.write_json("results.json", &results)?;
    println!("dev positive F1 {}", outcome.dev_aggregate.render_percent());
    if let Some(t) = &outcome.test_aggregate {
        println!("test positive F1 {}", t.render_percent());
    }
    println!("outputs in {}", dir.root().display());
    Ok(())
}

fn print_metrics(m: &MetricReport) {
    let c = &m.support;
    println!(
        "precision {:.4} recall {:.4} positive F1 {:.4} (tp {} fp {} fn {} tn {}){}",
        m.precision,
        m.recall,
        m.positive_f1,
        c.tp,
        c.fp,
        c.fn_,
        c.tn,
        if m.zero_division { " [zero division]" } else { "" }
    );
}

pub fn evaluate(mut o: EvaluateOptions, run_dir: Option<&Path>) -> Result<(), CliError> {
    let records: Vec<PredictionRecord> = if let Some(p) = o.predictions.take() {
        let p = resolve_input(&p);
        let f = File::open(&p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
        o.predictions = Some(p);
        read_predictions(BufReader::new(f))?
    } else {
        let ckpt_path = o
            .checkpoint
            .as_ref()
            .map(|p| resolve_input(p))
            .ok_or_else(|| invalid("give --checkpoint (with --data) or --predictions"))?;
        let ckpt = load_json_checkpoint(&ckpt_path)?;
        o.checkpoint = Some(ckpt_path);
        let model = ClassifierModel::from_checkpoint(&EncoderRegistry::default(), ckpt)?;
        let (path, meetings) = load_corpus(o.data.take())?;
        o.data = Some(path);
        let meetings = match o.subset {
            Some(name) => make_split(&meetings, &mut o.split)?.select_owned(&meetings, name),
            None => meetings,
        };
        let loss = LossConfig::new(o.method, o.context.mode);
        let run = TrainRunConfig::default();
        let trainer = Trainer::new(&StrategyRegistry::default(), loss, o.context.clone(), run)?;
        let split = trainer.prepare(&meetings)?;
        trainer.predict(&model, &split)?
    };
    let metrics = positive_f1(&records)?;
    let dir = start_run(run_dir, "evaluate", &o)?;
    dir.write_jsonl("predictions.jsonl", &records)?;
    dir.write_json("metrics.json", &metrics)?;
    print_metrics(&metrics);
    Ok(())
}

#[derive(Serialize)]
struct EnsembleSummary {
    encoder_from: PathBuf,
    pooler_from: PathBuf,
    encoder_tensors: usize,
    pooler_tensors: usize,
    parameters: usize,
    output: PathBuf,
}

pub fn ensemble(mut o: EnsembleOptions, run_dir: Option<&Path>) -> Result<(), CliError> {
    let (enc_path, pool_path) = match (&o.manifest, &o.encoder_from, &o.pooler_from) {
        (Some(m), None, None) => {
            let m = resolve_input(m);
            let manifest = EnsembleManifest::load(&m)?;
            o.manifest = Some(m);
            o.head_seed = manifest.head_seed;
            (manifest.encoder_layers, manifest.pooler_layer)
        }
        (None, Some(a), Some(b)) => (resolve_input(a), resolve_input(b)),
        _ => return Err(invalid("give --manifest, or both --encoder-from and --pooler-from")),
    };
    if o.manifest.is_none() {
        o.encoder_from = Some(enc_path.clone());
        o.pooler_from = Some(pool_path.clone());
    }
    let a = load_backbone(&enc_path)?;
    let b = load_backbone(&pool_path)?;
    let theta_c = ensemble_init(&a.backbone, &b.backbone)?;
    let summary = |output: &str| EnsembleSummary {
        encoder_from: enc_path.clone(),
        pooler_from: pool_path.clone(),
        encoder_tensors: theta_c.group(ctxdrop::model::Group::Encoder).len(),
        pooler_tensors: theta_c.group(ctxdrop::model::Group::Pooler).len(),
        parameters: theta_c.num_parameters(),
        output: PathBuf::from(output),
    };
    let dir;
    let written = match a.spec {
        Some(spec) => {
            let model = ClassifierModel::with_backbone(&EncoderRegistry::default(), spec, theta_c.clone(), o.head_seed)?;
            dir = start_run(run_dir, "ensemble-init", &o)?;
            save_json_checkpoint(&model.checkpoint(), &dir.path("ensemble.json")).map_err(runtime)?;
            "ensemble.json"
        }
        None => {
            dir = start_run(run_dir, "ensemble-init", &o)?;
            save_safetensors(&theta_c, &dir.path("ensemble.safetensors")).map_err(runtime)?;
            "ensemble.safetensors"
        }
    };
    let s = summary(written);
    dir.write_json("ensemble_summary.json", &s)?;
    println!(
        "encoder layers ({} tensors) from {}, pooler ({} tensors) from {}; {} backbone parameters -> {}",
        s.encoder_tensors,
        enc_path.display(),
        s.pooler_tensors,
        pool_path.display(),
        s.parameters,
        dir.path(written).display()
    );
    Ok(())
}

fn derived_keys(r: &TrainResults, layout: ReportLayout) -> [String; 2] {
    match layout {
        ReportLayout::Table2 => [r.encoder.clone(), "sentence classification".into()],
        ReportLayout::Table3 => {
            let no_kl = r.alpha == 0.0 && r.method != Method::CeOnly;
            let method = format!("{}{}", r.method, if no_kl { "_no_kl" } else { "" });
            [r.context_mode.to_string(), method]
        }
        ReportLayout::Table4 => [
            r.encoder.clone(),
            r.init
                .as_ref()
                .and_then(|p| p.file_stem())
                .map_or_else(|| "default".to_string(), |s| s.to_string_lossy().into_owned()),
        ],
    }
}

pub fn report(mut o: ReportOptions, run_dir: Option<&Path>) -> Result<(), CliError> {
    if !o.labels.is_empty() && o.labels.len() != o.inputs.len() {
        return Err(invalid(format!(
            "{} --label values for {} --input files",
            o.labels.len(),
            o.inputs.len()
        )));
    }
    let mut rows = Vec::new();
    for (i, p) in o.inputs.iter_mut().enumerate() {
        *p = resolve_input(p);
        let text = std::fs::read_to_string(&*p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
        let r: TrainResults = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
        let result = r
            .test
            .clone()
            .ok_or_else(|| invalid(format!("{} has no test scores", p.display())))?;
        let keys = match o.labels.get(i) {
            Some(l) => {
                let (a, b) = l.split_once('|').unwrap_or((l.as_str(), ""));
                [a.to_string(), b.to_string()]
            }
            None => derived_keys(&r, o.layout),
        };
        rows.push(ResultRow { keys, result });
    }
    let table = render_report(&rows, o.layout);
    let dir = start_run(run_dir, "report", &o)?;
    dir.write("report.md", &table)?;
    print!("{table}");
    Ok(())
}
