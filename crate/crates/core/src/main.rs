use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use nodule_extract::corpus::{
    filter_reports, read_conll, read_json, read_standoff, split_corpus, synth_generate, to_json_lines, write_conll,
    write_json, write_standoff, CorpusSplit, Loaded, ReportStyle, SplitRatios, SynthConfig,
};
use nodule_extract::eval::{
    render_relations, render_report, report_json, score_ner, score_relations, EvalOptions, MatchMode,
};
use nodule_extract::linker::{train_linker, LinkerConfig, LinkerModel};
use nodule_extract::pipeline::{MentionSource, Pipeline};
use nodule_extract::schema::AnnotatedDocument;
use nodule_extract::tagger::{import_predictions, train_tagger, ImportFormat, Lexicon, TaggerModel};
use nodule_extract::tirads::PointTable;

const LEXICON_ENV: &str = "NODULE_EXTRACT_LEXICON";

/// Thyroid ultrasound report extraction: synthesize corpora, train the
/// tagger and linker, extract nodule profiles, and score predictions.
#[derive(Parser)]
#[command(name = "nodule-extract", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic annotated corpus as JSON lines.
    Synth {
        #[arg(long)]
        seed: u64,
        /// Number of documents (at least 1).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long)]
        out: PathBuf,
        /// Chance that a slot uses an off-lexicon surface variant.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, value_enum, default_value_t = StyleArg::Post)]
        style: StyleArg,
    },
    /// Train the mention tagger, and optionally the relation linker.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Train on the train part of a seeded train/dev/test split, e.g. 0.8/0.1/0.1.
        #[arg(long)]
        split: Option<SplitRatios>,
        /// Where to write the split document ids (JSON).
        #[arg(long, requires = "split")]
        split_out: Option<PathBuf>,
        /// Also train the linker; requires --linker-out.
        #[arg(long, requires = "linker_out")]
        relations: bool,
        #[arg(long)]
        linker_out: Option<PathBuf>,
    },
    /// Tag, link, assemble profiles, and score them.
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        /// Tagger model file.
        #[arg(long, required_unless_present = "lexicon_only", conflicts_with = "lexicon_only")]
        model: Option<PathBuf>,
        /// Use the lexicon tagger instead of a model.
        #[arg(long)]
        lexicon_only: bool,
        /// Linker model file; without it each characteristic goes to its nearest anchor.
        #[arg(long)]
        linker_model: Option<PathBuf>,
        /// TI-RADS point table file, or `builtin`; without it scoring is skipped.
        #[arg(long)]
        tirads_table: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Score predictions against gold annotations.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_enum, default_value_t = PredFormat::Json)]
        pred_format: PredFormat,
        /// Also score relations.
        #[arg(long)]
        relations: bool,
        /// How relation endpoints are matched.
        #[arg(long, value_enum, default_value_t = ModeArg::Strict)]
        endpoint_mode: ModeArg,
        /// Write the text table here, and its JSON twin next to it (.json).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Fail when a document is present on one side only.
        #[arg(long)]
        strict_ids: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Keep reports that mention a keyword and have the given note type.
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "keyword")]
        keywords: Vec<String>,
        #[arg(long, default_value = "IMAGING")]
        note_type: String,
    },
    /// Convert a corpus between JSON lines, CoNLL and standoff.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        from: FormatArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        to: FormatArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Pre,
    Post,
    Mixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredFormat {
    Json,
    Conll,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Lenient,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Conll,
    Standoff,
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

type Res<T> = Result<T, Failure>;

fn data<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Data(format!("{context}: {e}"))
}

fn plain<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

fn pool(jobs: usize) -> Res<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Failure::Internal(e.to_string()))
}

/// Reads a JSON-lines corpus; any invalid document is an error.
fn load_strict(path: &Path) -> Res<Vec<AnnotatedDocument>> {
    let loaded = read_json(path).map_err(plain)?;
    strict(loaded, path)
}

fn strict(loaded: Loaded, path: &Path) -> Res<Vec<AnnotatedDocument>> {
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(bad) = loaded.invalid.first() {
        let first = bad.violations.first().map(|v| v.to_string()).unwrap_or_default();
        return Err(Failure::Data(format!(
            "{}: {} invalid document(s); first is {}: {first}",
            path.display(),
            loaded.invalid.len(),
            bad.id
        )));
    }
    Ok(loaded.documents)
}

fn write_file(path: &Path, contents: &str) -> Res<()> {
    fs::write(path, contents).map_err(data(&path.display().to_string()))
}

fn synth(seed: u64, count: u64, out: &Path, noise: f64, style: StyleArg) -> Res<()> {
    let cfg = SynthConfig {
        seed,
        doc_count: count as usize,
        noise,
        style: match style {
            StyleArg::Pre => ReportStyle::PreTirads,
            StyleArg::Post => ReportStyle::PostTirads,
            StyleArg::Mixed => ReportStyle::Mixed,
        },
        ..SynthConfig::default()
    };
    let docs = synth_generate(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    write_json(out, &docs).map_err(plain)?;
    let mentions: usize = docs.iter().map(|d| d.mentions.len()).sum();
    let relations: usize = docs.iter().map(|d| d.relations.len()).sum();
    println!("documents: {}\nmentions: {mentions}\nrelations: {relations}", docs.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    input: &Path,
    model_out: &Path,
    epochs: usize,
    seed: u64,
    split: Option<SplitRatios>,
    split_out: Option<&Path>,
    relations: bool,
    linker_out: Option<&Path>,
) -> Res<()> {
    let docs = load_strict(input)?;
    if docs.is_empty() {
        return Err(Failure::Data(format!("{}: corpus is empty", input.display())));
    }
    let train_docs: Vec<AnnotatedDocument> = match split {
        Some(r) => {
            let s = split_corpus(&docs, r, seed).map_err(|e| Failure::Usage(e.to_string()))?;
            eprintln!("split: train {} / dev {} / test {}", s.train.len(), s.dev.len(), s.test.len());
            if let Some(p) = split_out {
                let text = serde_json::to_string_pretty(&s).map_err(|e| Failure::Internal(e.to_string()))?;
                write_file(p, &(text + "\n"))?;
            }
            CorpusSplit::select(&docs, &s.train).into_iter().cloned().collect()
        }
        None => docs,
    };
    if train_docs.is_empty() {
        return Err(Failure::Data("training split is empty".into()));
    }
    let report = train_tagger(&train_docs, epochs, seed).map_err(data("training"))?;
    report.model.save(model_out).map_err(data(&model_out.display().to_string()))?;
    println!("sentences: {}", report.sentences);
    println!("tokens: {}", report.tokens);
    println!("features: {}", report.model.feature_count());
    println!("self-accuracy: {:.4}", report.self_accuracy);
    if report.dropped_mentions > 0 {
        eprintln!("warning: {} overlapping gold mention(s) dropped from BIO encoding", report.dropped_mentions);
    }
    if relations {
        let out = linker_out.ok_or_else(|| Failure::Usage("--relations needs --linker-out".into()))?;
        let config = LinkerConfig::default();
        let lr = train_linker(&train_docs, &config, epochs, seed).map_err(data("linker training"))?;
        lr.model.save(out).map_err(data(&out.display().to_string()))?;
        println!("linker candidates: {} ({} positive)", lr.candidates, lr.positives);
        println!("linker unreachable gold relations: {} (scope {})", lr.unreachable.len(), config.scope);
    }
    Ok(())
}

fn lexicon() -> Res<Lexicon> {
    match std::env::var_os(LEXICON_ENV) {
        Some(p) => {
            let path = PathBuf::from(p);
            eprintln!("using lexicon {}", path.display());
            Lexicon::load(&path).map_err(data(LEXICON_ENV))
        }
        None => Ok(Lexicon::builtin()),
    }
}

#[allow(clippy::too_many_arguments)]
fn extract(
    input: &Path,
    model: Option<&Path>,
    lexicon_only: bool,
    linker_model: Option<&Path>,
    tirads_table: Option<&str>,
    out: &Path,
    jobs: usize,
) -> Res<()> {
    let pool = pool(jobs)?;
    let tagger = if lexicon_only {
        MentionSource::Lexicon(lexicon()?)
    } else {
        let p = model.ok_or_else(|| Failure::Usage("--model or --lexicon-only is required".into()))?;
        MentionSource::Model(Box::new(TaggerModel::load(p).map_err(data(&p.display().to_string()))?))
    };
    let mut pipeline = Pipeline::new(tagger);
    if let Some(p) = linker_model {
        pipeline.linker = LinkerModel::load(p).map_err(data(&p.display().to_string()))?;
    }
    pipeline.table = match tirads_table {
        None => {
            eprintln!("TI-RADS scoring skipped: no --tirads-table given");
            None
        }
        Some("builtin") => Some(PointTable::acr_default()),
        Some(p) => Some(PointTable::load(Path::new(p)).map_err(plain)?),
    };
    let docs = load_strict(input)?;
    let lines: Vec<String> = pool.install(|| {
        docs.par_iter()
            .map(|d| serde_json::to_string(&pipeline.extract(d)).expect("extraction serializes"))
            .collect()
    });
    let mut text = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for l in &lines {
        text.push_str(l);
        text.push('\n');
    }
    write_file(out, &text)?;
    eprintln!("extracted {} document(s)", docs.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval(
    gold: &Path,
    pred: &Path,
    pred_format: PredFormat,
    relations: bool,
    endpoint_mode: ModeArg,
    report: Option<&Path>,
    strict_ids: bool,
    jobs: usize,
) -> Res<()> {
    let pool = pool(jobs)?;
    let gold_docs = load_strict(gold)?;
    let format = match pred_format {
        PredFormat::Json => ImportFormat::Json,
        PredFormat::Conll => ImportFormat::Conll,
    };
    let imported = import_predictions(pred, format).map_err(plain)?;
    if imported.repairs > 0 {
        eprintln!("repaired {} BIO tag(s) in predictions", imported.repairs);
    }
    let mut pred_docs = strict(
        Loaded { documents: imported.documents, invalid: imported.invalid, warnings: imported.warnings },
        pred,
    )?;
    if let PredFormat::Conll = pred_format {
        // CoNLL keeps offsets but not the whitespace between tokens
        let texts: HashMap<&str, &str> = gold_docs.iter().map(|d| (d.id.as_str(), d.text.as_str())).collect();
        for d in &mut pred_docs {
            if let Some(t) = texts.get(d.id.as_str()) {
                d.text = t.to_string();
            }
        }
    }
    let options = EvalOptions { strict_ids };
    let mode = match endpoint_mode {
        ModeArg::Strict => MatchMode::Strict,
        ModeArg::Lenient => MatchMode::Lenient,
    };
    let (ner, rel) = pool.install(|| -> Res<_> {
        let ner = score_ner(&gold_docs, &pred_docs, options).map_err(data("evaluation"))?;
        let rel = if relations {
            Some(score_relations(&gold_docs, &pred_docs, mode, options).map_err(data("relation evaluation"))?)
        } else {
            None
        };
        Ok((ner, rel))
    })?;
    for (ids, side) in [(&ner.missing_pred, "prediction"), (&ner.missing_gold, "gold")] {
        if let Some(first) = ids.first() {
            eprintln!("warning: {} document(s) have no {side} and were scored as empty (first: {first})", ids.len());
        }
    }
    let mut text = render_report(&ner);
    if let Some(r) = &rel {
        text.push('\n');
        text.push_str(&render_relations(r));
    }
    print!("{text}");
    let _ = std::io::stdout().flush();
    if let Some(p) = report {
        write_file(p, &text)?;
        let json = serde_json::to_string_pretty(&report_json(&ner, rel.as_ref())).map_err(|e| Failure::Internal(e.to_string()))?;
        write_file(&p.with_extension("json"), &(json + "\n"))?;
    }
    Ok(())
}

fn filter(input: &Path, out: &Path, keywords: &[String], note_type: &str) -> Res<()> {
    let docs = load_strict(input)?;
    let kept = filter_reports(&docs, keywords, note_type);
    write_file(out, &to_json_lines(&kept))?;
    println!("kept {} of {} document(s)", kept.len(), docs.len());
    Ok(())
}

fn convert(input: &Path, from: FormatArg, out: &Path, to: FormatArg) -> Res<()> {
    let docs = match from {
        FormatArg::Json => load_strict(input)?,
        FormatArg::Conll => {
            let c = read_conll(input).map_err(plain)?;
            if c.repairs > 0 {
                eprintln!("repaired {} BIO tag(s)", c.repairs);
            }
            strict(c.loaded, input)?
        }
        FormatArg::Standoff => strict(read_standoff(input).map_err(plain)?, input)?,
    };
    match to {
        FormatArg::Json => write_json(out, &docs).map_err(plain)?,
        FormatArg::Conll => write_conll(out, &docs).map_err(plain)?,
        FormatArg::Standoff => write_standoff(out, &docs).map_err(plain)?,
    }
    println!("converted {} document(s)", docs.len());
    Ok(())
}

fn run(cli: Cli) -> Res<()> {
    match cli.command {
        Command::Synth { seed, count, out, noise, style } => synth(seed, count, &out, noise, style),
        Command::Train { input, model_out, epochs, seed, split, split_out, relations, linker_out } => train(
            &input,
            &model_out,
            epochs,
            seed,
            split,
            split_out.as_deref(),
            relations,
            linker_out.as_deref(),
        ),
        Command::Extract { input, model, lexicon_only, linker_model, tirads_table, out, jobs } => extract(
            &input,
            model.as_deref(),
            lexicon_only,
            linker_model.as_deref(),
            tirads_table.as_deref(),
            &out,
            jobs,
        ),
        Command::Eval { gold, pred, pred_format, relations, endpoint_mode, report, strict_ids, jobs } => {
            eval(&gold, &pred, pred_format, relations, endpoint_mode, report.as_deref(), strict_ids, jobs)
        }
        Command::Filter { input, out, keywords, note_type } => filter(&input, &out, &keywords, &note_type),
        Command::Convert { input, from, out, to } => convert(&input, from, &out, to),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = std::panic::catch_unwind(|| run(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(3)
        }
    }
}
