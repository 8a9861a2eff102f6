//! The `subvox` command-line tool.
//!
//! Subcommands cover the full workflow: `gen-synth` writes a labeled
//! corpus, `train` fits a model on one, `transcribe` / `translate` run
//! the long-form decoder over a WAV and emit subtitles plus a JSON
//! session dump, `eval` scores one manifest against another, and
//! `mock-decode` drives the decode loop with a scripted generator for
//! inspection and testing.
//!
//! Exit codes: 0 success; 1 usage (bad flags); 2 data error (unreadable
//! or malformed inputs); 3 model or decode error.

use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use subvox_core::longform::{
    decode_long, DecodeOptions, DecodeSession, ModelGenerator, ScriptedGenerator,
};
use subvox_core::metrics::{self, ErrorRateReport, Unit};
use subvox_core::model::{train, GenerateOptions, TrainSchedule};
use subvox_core::prompt::{Stage, TaskKind};
use subvox_core::synth::{gen_corpus, CorpusSpec, Lexicon};
use subvox_core::timestamp::TimedSegment;

use crate::config::FileConfig;
use crate::report::{error_rate_scores, prf_scores, Report, UtteranceScores};
use crate::{checkpoint, manifest, subtitle, wav};

// ---------------------------------------------------------------------------
// Failure classification (drives the exit code)
// ---------------------------------------------------------------------------

/// A failed command, split by exit code: data errors (2) are problems
/// with inputs on disk; model errors (3) are training, checkpoint
/// validation or decode failures.
#[derive(Debug)]
pub enum Failure {
    Data(anyhow::Error),
    Model(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Data(_) => 2,
            Failure::Model(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Data(e) | Failure::Model(e) => e,
        }
    }
}

fn data<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Data(e.into())
}

fn model_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Model(e.into())
}

/// Checkpoint problems split by whether the *file* or the *model* is
/// bad: unreadable or corrupt bytes are data errors, while a
/// well-formed file whose contents fail model validation is a model
/// error.
fn checkpoint_err(e: checkpoint::CheckpointError) -> Failure {
    use checkpoint::CheckpointError as E;
    match e {
        E::Io { .. } | E::BadMagic | E::Corrupt(_) | E::BadConfigJson(_) => data(e),
        E::Model(_) | E::Vocab(_) => model_err(e),
    }
}

type CmdResult = Result<(), Failure>;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "subvox", version, about = "Long-form speech translation toolkit")]
pub struct Cli {
    /// Config file supplying flag defaults (else $SUBVOX_CONFIG).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus: WAV files, manifest.jsonl, spec.json.
    GenSynth(GenSynthArgs),
    /// Train a model on a generated corpus and write a checkpoint.
    Train(TrainArgs),
    /// Long-form speech recognition over a WAV file.
    Transcribe(DecodeArgs),
    /// Long-form speech translation over a WAV file.
    Translate(DecodeArgs),
    /// Score a hypothesis manifest against a reference manifest.
    Eval(EvalArgs),
    /// Run the long-form decode loop with a scripted generator.
    MockDecode(MockDecodeArgs),
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// Output directory for the corpus tree.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Corpus seed (else config `seed`, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of utterances.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Source vocabulary size, digit words included.
    #[arg(long, default_value_t = 20)]
    pub vocab: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus manifest written by gen-synth (spec.json must sit beside it).
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Where to write the trained checkpoint.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Optimizer steps (else config `steps`, else 300).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Examples per step (else config `batch_size`, else 4).
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Peak learning rate (else config `peak_lr`, else 3e-3).
    #[arg(long)]
    pub peak_lr: Option<f64>,
    /// Linear warmup steps (else config `warmup_steps`, else steps/10).
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    /// Training seed (else config `seed`, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print progress every N steps (0 silences progress).
    #[arg(long, default_value_t = 50)]
    pub log_every: usize,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Trained checkpoint.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Input WAV (16 kHz mono PCM16).
    #[arg(long, value_name = "FILE")]
    pub audio: PathBuf,
    /// Directory for the SRT/VTT/JSON outputs.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Translate via chain-of-thought (transcribe first). Default.
    #[arg(long, conflicts_with = "direct")]
    pub cot: bool,
    /// Translate directly, without the transcription stage.
    #[arg(long)]
    pub direct: bool,
    /// Feed previously decoded sentences to the next window. Default.
    #[arg(long, conflicts_with = "no_context")]
    pub context: bool,
    #[arg(long)]
    pub no_context: bool,
    /// Ask for timestamp tokens (required for subtitle output). Default.
    #[arg(long, conflicts_with = "no_timestamps")]
    pub timestamps: bool,
    #[arg(long)]
    pub no_timestamps: bool,
    /// Window length in seconds (else config `window_seconds`, else 30).
    #[arg(long)]
    pub window_seconds: Option<f64>,
    /// Sentences of rolling context (else config `context_depth`, else 2).
    #[arg(long)]
    pub context_depth: Option<usize>,
    /// Token budget per window (else config `max_new_tokens`, else 128).
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Metric {
    Wer,
    Cer,
    Bleu,
    Vad,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Metric to compute.
    #[arg(long, value_enum)]
    pub metric: Metric,
    /// Reference manifest.
    #[arg(long = "ref", value_name = "FILE")]
    pub reference: PathBuf,
    /// Hypothesis manifest (same record count and order).
    #[arg(long, value_name = "FILE")]
    pub hyp: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MockDecodeArgs {
    /// Script file: one window's raw output per line.
    #[arg(long, value_name = "FILE")]
    pub script: PathBuf,
    /// Length of the (silent) input audio in seconds.
    #[arg(long)]
    pub duration: f64,
    /// Task whose chain the script follows.
    #[arg(long, default_value = "ts-asr", value_parser = parse_task)]
    pub task: TaskKind,
    /// Window length in seconds (else config `window_seconds`, else 30).
    #[arg(long)]
    pub window_seconds: Option<f64>,
    /// Write the JSON session here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn parse_task(name: &str) -> Result<TaskKind, String> {
    TaskKind::from_name(name).ok_or_else(|| {
        let names: Vec<&str> =
            subvox_core::prompt::ALL_KINDS.iter().map(|k| k.name()).collect();
        format!("unknown task {name:?}; expected one of {}", names.join(", "))
    })
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

pub fn run(cli: Cli) -> CmdResult {
    let config = FileConfig::discover(cli.config.as_deref()).map_err(data)?;
    match cli.command {
        Command::GenSynth(args) => gen_synth(&args, &config),
        Command::Train(args) => run_train(&args, &config),
        Command::Transcribe(args) => decode(&args, &config, false),
        Command::Translate(args) => decode(&args, &config, true),
        Command::Eval(args) => eval(&args),
        Command::MockDecode(args) => mock_decode(&args, &config),
    }
}

fn gen_synth(args: &GenSynthArgs, config: &FileConfig) -> CmdResult {
    let seed = match args.seed {
        Some(s) => s,
        None => config.seed().map_err(data)?.unwrap_or(0),
    };
    let spec = CorpusSpec::new(seed, args.n, args.vocab).map_err(data)?;
    let examples = gen_corpus(&spec).map_err(data)?;
    let manifest_path = manifest::save_corpus(&args.out, &examples).map_err(data)?;
    manifest::save_spec(&args.out, &spec).map_err(data)?;
    println!("wrote {} utterances to {}", examples.len(), manifest_path.display());
    Ok(())
}

fn run_train(args: &TrainArgs, config: &FileConfig) -> CmdResult {
    let or_int = |flag: Option<usize>, key: &str| -> Result<Option<usize>, Failure> {
        Ok(flag.or(config.int(key).map_err(data)?))
    };
    let examples = manifest::load_corpus(&args.manifest).map_err(data)?;
    let spec = manifest::load_spec(&args.manifest).map_err(data)?;
    let lex = Lexicon::from_spec(&spec).map_err(data)?;

    let steps = or_int(args.steps, "steps")?.unwrap_or(300);
    let mut schedule = TrainSchedule::new(steps);
    if let Some(b) = or_int(args.batch_size, "batch_size")? {
        schedule.batch_size = b;
    }
    if let Some(lr) = args.peak_lr.or(config.float("peak_lr").map_err(data)?) {
        schedule.peak_lr = lr;
    }
    if let Some(w) = or_int(args.warmup_steps, "warmup_steps")? {
        schedule.warmup_steps = w;
    }
    let seed = match args.seed {
        Some(s) => s,
        None => config.seed().map_err(data)?.unwrap_or(0),
    };
    schedule.seed = seed;
    let model_config = subvox_core::model::ModelConfig::small(2, seed);

    let log_every = args.log_every;
    let trained = train(&examples, &lex, model_config, &schedule, |p| {
        if log_every > 0 && (p.step % log_every == 0 || p.step == p.steps) {
            println!("step {:>5}/{} loss {:.4} lr {:.2e}", p.step, p.steps, p.loss, p.lr);
        }
    });
    let trained = match trained {
        Ok(m) => m,
        Err(subvox_core::model::TrainError::Diverged { step, last_good }) => {
            // The last finite-loss parameters are still worth keeping.
            checkpoint::save(&args.out, &last_good).map_err(checkpoint_err)?;
            return Err(model_err(anyhow::anyhow!(
                "training diverged at step {step}; last finite-loss checkpoint saved to {} — \
                 retry with a lower --peak-lr",
                args.out.display()
            )));
        }
        Err(e) => return Err(model_err(e)),
    };
    checkpoint::save(&args.out, &trained).map_err(checkpoint_err)?;
    println!("saved checkpoint to {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// Decoding (transcribe / translate) and the session dump
// ---------------------------------------------------------------------------

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::Transcription => "transcription",
        Stage::Smoothed => "smoothed",
        Stage::Pronunciation => "pronunciation",
        Stage::Translation => "translation",
        Stage::Explanation => "explanation",
    }
}

#[derive(Serialize)]
struct SegmentDump {
    start: f64,
    end: f64,
    text: String,
}

#[derive(Serialize)]
struct StageDump {
    stage: &'static str,
    text: String,
    segments: Vec<SegmentDump>,
}

#[derive(Serialize)]
struct WindowDump {
    cursor: f64,
    length: f64,
    advanced_by: f64,
    fallback: bool,
}

#[derive(Serialize)]
struct SessionDump {
    task: &'static str,
    duration: f64,
    cursors: Vec<f64>,
    windows: Vec<WindowDump>,
    stages: Vec<StageDump>,
    diagnostics: Vec<String>,
}

impl SessionDump {
    fn new(session: &DecodeSession) -> Self {
        Self {
            task: session.task.name(),
            duration: session.duration,
            cursors: session.cursors.clone(),
            windows: session
                .windows
                .iter()
                .map(|w| WindowDump {
                    cursor: w.cursor,
                    length: w.length,
                    advanced_by: w.advanced_by,
                    fallback: w.fallback,
                })
                .collect(),
            stages: session
                .stages
                .iter()
                .map(|t| StageDump {
                    stage: stage_name(t.stage),
                    text: t.text(),
                    segments: t
                        .segments
                        .iter()
                        .map(|s| SegmentDump {
                            start: s.start,
                            end: s.end,
                            text: s.text.clone(),
                        })
                        .collect(),
                })
                .collect(),
            diagnostics: session.diagnostics.iter().map(|d| d.to_string()).collect(),
        }
    }

    fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("session serializes");
        out.push('\n');
        out
    }
}

/// Task selection shared by `transcribe` and `translate`.
fn pick_task(translate: bool, args: &DecodeArgs) -> TaskKind {
    let timestamps = !args.no_timestamps;
    if !translate {
        return if timestamps { TaskKind::TsAsr } else { TaskKind::Asr };
    }
    let cot = !args.direct;
    match (cot, timestamps) {
        (true, true) => TaskKind::CotTsSt,
        (true, false) => TaskKind::CotSt,
        (false, true) => TaskKind::TsSt,
        (false, false) => TaskKind::StDirect,
    }
}

fn decode(args: &DecodeArgs, config: &FileConfig, translate: bool) -> CmdResult {
    let task = pick_task(translate, args);
    let mut opts = DecodeOptions::new(task);
    opts.window_seconds = match args.window_seconds {
        Some(w) => w,
        None => config.float("window_seconds").map_err(data)?.unwrap_or(opts.window_seconds),
    };
    opts.use_context = if args.no_context {
        false
    } else if args.context {
        true
    } else {
        config.bool("context").map_err(data)?.unwrap_or(true)
    };
    if let Some(depth) =
        args.context_depth.or(config.int("context_depth").map_err(data)?)
    {
        opts.context_depth = depth;
    }
    let mut gen_opts = GenerateOptions::default();
    if let Some(budget) =
        args.max_new_tokens.or(config.int("max_new_tokens").map_err(data)?)
    {
        gen_opts.max_new_tokens = budget;
    }

    let model = checkpoint::load(&args.model).map_err(checkpoint_err)?;
    let audio = wav::read_wav(&args.audio).map_err(data)?;
    let mut generator = ModelGenerator::new(&model, gen_opts);
    let session = decode_long(&mut generator, &audio, &opts).map_err(model_err)?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| data(anyhow::anyhow!("{}: {e}", args.out_dir.display())))?;
    let stem = args
        .audio
        .file_stem()
        .map_or_else(|| "decode".to_string(), |s| s.to_string_lossy().into_owned());
    let write = |name: String, text: &str| -> CmdResult {
        let path = args.out_dir.join(name);
        std::fs::write(&path, text)
            .map_err(|e| data(anyhow::anyhow!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok(())
    };

    write(format!("{stem}.json"), &SessionDump::new(&session).to_json())?;
    let final_segments = session.final_segments();
    if task.chain().last().is_some_and(|(_, timestamped)| *timestamped) {
        write(format!("{stem}.srt"), &subtitle::to_srt(final_segments).map_err(data)?)?;
        write(format!("{stem}.vtt"), &subtitle::to_vtt(final_segments).map_err(data)?)?;
    } else {
        println!("no timestamps requested; skipping subtitle output");
    }
    for d in &session.diagnostics {
        eprintln!("note: {d}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn eval(args: &EvalArgs) -> CmdResult {
    let refs = manifest::read_records(&args.reference).map_err(data)?;
    let hyps = manifest::read_records(&args.hyp).map_err(data)?;
    if refs.len() != hyps.len() {
        return Err(data(anyhow::anyhow!(
            "manifest sizes differ: {} reference vs {} hypothesis records",
            refs.len(),
            hyps.len()
        )));
    }
    if refs.is_empty() {
        return Err(data(anyhow::anyhow!("empty manifests")));
    }

    let report = match args.metric {
        Metric::Wer => error_rate_report("wer", &refs, &hyps, Unit::Word).map_err(data)?,
        Metric::Cer => error_rate_report("cer", &refs, &hyps, Unit::Char).map_err(data)?,
        Metric::Bleu => bleu_report(&refs, &hyps).map_err(data)?,
        Metric::Vad => vad_report(&refs, &hyps).map_err(data)?,
    };
    match &args.out {
        Some(path) => {
            report.write(path).map_err(data)?;
            println!("wrote {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(report.to_json().as_bytes()).map_err(data)?;
        }
    }
    Ok(())
}

fn error_rate_report(
    metric: &str,
    refs: &[manifest::Record],
    hyps: &[manifest::Record],
    unit: Unit,
) -> anyhow::Result<Report> {
    let mut report = Report::new(metric);
    let mut pooled = ErrorRateReport { substitutions: 0, insertions: 0, deletions: 0, ref_len: 0 };
    for (r, h) in refs.iter().zip(hyps) {
        let scores = metrics::edit_error_rate(&r.transcript, &h.transcript, unit)
            .map_err(|e| anyhow::anyhow!("{}: {e}", r.audio_path))?;
        pooled.substitutions += scores.substitutions;
        pooled.insertions += scores.insertions;
        pooled.deletions += scores.deletions;
        pooled.ref_len += scores.ref_len;
        report.utterances.push(UtteranceScores {
            id: r.audio_path.clone(),
            scores: error_rate_scores(&scores),
        });
    }
    report.corpus = error_rate_scores(&pooled);
    Ok(report)
}

fn bleu_report(refs: &[manifest::Record], hyps: &[manifest::Record]) -> anyhow::Result<Report> {
    let ref_texts: Vec<&str> = refs.iter().map(|r| r.translation.as_str()).collect();
    let hyp_texts: Vec<&str> = hyps.iter().map(|h| h.translation.as_str()).collect();
    let corpus = metrics::corpus_bleu(&ref_texts, &hyp_texts)
        .map_err(|e| anyhow::anyhow!("corpus BLEU: {e}"))?;
    let mut report = Report::new("bleu");
    report.corpus.insert("bleu".to_string(), corpus);
    for (r, h) in refs.iter().zip(hyps) {
        // Sentence-level BLEU of the pair on its own; zero when the
        // sentence has no matching 4-grams (no smoothing).
        let score = metrics::corpus_bleu(&[&r.translation], &[&h.translation])
            .map_err(|e| anyhow::anyhow!("{}: {e}", r.audio_path))?;
        report.utterances.push(UtteranceScores {
            id: r.audio_path.clone(),
            scores: std::collections::BTreeMap::from([("bleu".to_string(), score)]),
        });
    }
    Ok(report)
}

fn vad_report(refs: &[manifest::Record], hyps: &[manifest::Record]) -> anyhow::Result<Report> {
    let spans = |r: &manifest::Record| -> Vec<TimedSegment> {
        r.word_spans.iter().map(TimedSegment::from).collect()
    };
    let mut report = Report::new("vad");
    // Corpus pooling: lay utterances end to end on a shared timeline so
    // one frame count covers them all.
    let mut offset = 0.0;
    let mut all_ref = Vec::new();
    let mut all_hyp = Vec::new();
    for (r, h) in refs.iter().zip(hyps) {
        let (r_spans, h_spans) = (spans(r), spans(h));
        let duration = r_spans
            .iter()
            .chain(&h_spans)
            .map(|s| s.end)
            .fold(0.0, f64::max);
        let scores = metrics::vad_prf(&h_spans, &r_spans, duration)
            .map_err(|e| anyhow::anyhow!("{}: {e}", r.audio_path))?;
        report
            .utterances
            .push(UtteranceScores { id: r.audio_path.clone(), scores: prf_scores(&scores) });
        all_ref.extend(r_spans.iter().map(|s| s.offset(offset)));
        all_hyp.extend(h_spans.iter().map(|s| s.offset(offset)));
        offset += duration;
    }
    let pooled = metrics::vad_prf(&all_hyp, &all_ref, offset)
        .map_err(|e| anyhow::anyhow!("pooled VAD: {e}"))?;
    report.corpus = prf_scores(&pooled);
    Ok(report)
}

// ---------------------------------------------------------------------------
// Mock decode
// ---------------------------------------------------------------------------

fn mock_decode(args: &MockDecodeArgs, config: &FileConfig) -> CmdResult {
    let text = std::fs::read_to_string(&args.script)
        .map_err(|e| data(anyhow::anyhow!("{}: {e}", args.script.display())))?;
    let mut generator = ScriptedGenerator::new(text.lines());
    let mut opts = DecodeOptions::new(args.task);
    opts.window_seconds = match args.window_seconds {
        Some(w) => w,
        None => config.float("window_seconds").map_err(data)?.unwrap_or(opts.window_seconds),
    };
    let audio = subvox_core::audio::Audio::silence(args.duration, subvox_core::audio::SAMPLE_RATE);
    let session = decode_long(&mut generator, &audio, &opts).map_err(model_err)?;
    if generator.exhausted() {
        eprintln!(
            "note: script exhausted; {} windows decoded from {} scripted lines",
            generator.served(),
            text.lines().count()
        );
    }
    let dump = SessionDump::new(&session).to_json();
    match &args.out {
        Some(path) => {
            std::fs::write(path, dump)
                .map_err(|e| data(anyhow::anyhow!("{}: {e}", path.display())))?;
            println!("wrote {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(dump.as_bytes()).map_err(data)?;
        }
    }
    Ok(())
}
