//! Command-line front end: ingest corpora, run fact-tampering attacks,
//! evaluate detectors, train the naive Bayes model, and manage fact files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use veritas::attacks::{
    confound_causes, distort_facts, load_edit_log, save_edit_log, swap_subject_object,
    AttackConfig, AttackError, AttackResult, EditLogEntry,
};
use veritas::corpus::{
    corpus_stats, load_corpus, save_corpus, split_corpus, Article, Corpus, CorpusFormat, TruthLabel,
};
use veritas::detectors::{
    nb_check, train_nb, Detector, DetectorError, NBModel, RemoteDetector, RemoteEndpoint,
    StyleModel, Verdict,
};
use veritas::evalharness::{
    attack_delta_report, compute_metrics, render_report, tally, AttackReport, ConfusionCounts,
    EvalError, MetricsReport, ReportFormat,
};
use veritas::factcheck::{verify_article, FactCheckedDetector, FactTriple, KnowledgeGraph};
use veritas::textkit::Lexicons;

const EXIT_OK: u8 = 0;
const EXIT_FAILURE: u8 = 2;
const EXIT_NO_EDITS: u8 = 3;
const EXIT_REMOTE_UNAVAILABLE: u8 = 4;
const EXIT_CONTRADICTION: u8 = 5;

#[derive(Parser)]
#[command(
    name = "veritas",
    version,
    about = "Fact-tampering attacks and bias detection for news corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a corpus and print label statistics.
    Ingest(IngestArgs),
    /// Apply a fact-tampering attack and write the attacked corpus.
    Attack(AttackArgs),
    /// Score a corpus with a detector and report confusion metrics.
    Evaluate(EvaluateArgs),
    /// Train the naive Bayes detector and report held-out metrics.
    Train(TrainArgs),
    /// Maintain fact files and verify articles against them.
    #[command(subcommand)]
    Facts(FactsCommand),
}

#[derive(Args)]
struct IngestArgs {
    /// Corpus CSV with title and text columns.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    input: PathBuf,
    /// Attacked corpus CSV; the edit log lands next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Multiplier for numeric distortion.
    #[arg(long, default_value_t = 2.0)]
    factor: f64,
    /// Cap on edits per article.
    #[arg(long)]
    max_edits: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shuffle the corpus before pairing articles for confound attacks.
    #[arg(long)]
    pair_seed: Option<u64>,
    /// Directory of lexicon files; built-in tables when absent.
    #[arg(long, env = "VERITAS_LEXICONS")]
    lexicons: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DetectorArg::Style)]
    detector: DetectorArg,
    /// Saved naive Bayes model, required for --detector nb.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Remote service base URL, required for --detector remote.
    #[arg(long)]
    url: Option<String>,
    #[arg(long, default_value_t = 5000)]
    timeout_ms: u64,
    /// Fact file; wraps the detector so contradictions override its verdicts.
    #[arg(long)]
    factcheck: Option<PathBuf>,
    /// Attacked corpus paired with the originals in --input; reports score deltas.
    #[arg(long)]
    attacked: Option<PathBuf>,
    #[arg(long, env = "VERITAS_LEXICONS")]
    lexicons: Option<PathBuf>,
    /// Worker threads for scoring.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// Where the trained model JSON is written.
    #[arg(long)]
    out: PathBuf,
    /// Laplace smoothing strength.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Train fraction of the corpus; the rest is held out.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Subcommand)]
enum FactsCommand {
    /// Append one normalized fact to a fact file.
    Add(FactsAddArgs),
    /// Load a fact file and print how many distinct facts it holds.
    Import(FactsImportArgs),
    /// Check one article's extracted claims against a fact file.
    Verify(FactsVerifyArgs),
}

#[derive(Args)]
struct FactsAddArgs {
    /// Fact file to append to; created when missing.
    #[arg(long)]
    out: PathBuf,
    subject: String,
    action: String,
    object: String,
    #[arg(long)]
    time: Option<String>,
    #[arg(long)]
    location: Option<String>,
    /// Quantity as "<value> <unit>", e.g. "12 people".
    #[arg(long)]
    quantity: Option<String>,
}

#[derive(Args)]
struct FactsImportArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct FactsVerifyArgs {
    /// Corpus holding the article to verify.
    #[arg(long)]
    input: PathBuf,
    /// Fact file to check against.
    #[arg(long)]
    factcheck: PathBuf,
    /// Article id; the first article when absent.
    #[arg(long)]
    id: Option<String>,
    #[arg(long, env = "VERITAS_LEXICONS")]
    lexicons: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Distortion,
    Swap,
    Confound,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectorArg {
    Style,
    Nb,
    Remote,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

#[derive(Serialize)]
struct EvalEnvelope<'a> {
    counts: &'a ConfusionCounts,
    metrics: &'a MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<usize>,
}

#[derive(Serialize)]
struct AttackEnvelope<'a> {
    attack: &'a AttackReport,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Train(args) => cmd_train(args),
        Command::Facts(FactsCommand::Add(args)) => cmd_facts_add(args),
        Command::Facts(FactsCommand::Import(args)) => cmd_facts_import(args),
        Command::Facts(FactsCommand::Verify(args)) => cmd_facts_verify(args),
    }
}

fn cmd_ingest(args: IngestArgs) -> Result<u8> {
    let corpus = read_corpus(&args.input)?;
    println!("{}", serde_json::to_string(&corpus_stats(&corpus))?);
    Ok(EXIT_OK)
}

fn cmd_attack(args: AttackArgs) -> Result<u8> {
    let lexicons = load_lexicons(args.lexicons.as_deref())?;
    let corpus = read_corpus(&args.input)?;
    let mut config = AttackConfig::new(&lexicons);
    config.numeric_factor = args.factor;
    config.max_edits = args.max_edits;
    config.seed = args.seed;

    let mut outputs: Vec<Article> = Vec::new();
    let mut log: Vec<EditLogEntry> = Vec::new();
    let mut attacked = 0usize;
    let mut copied = 0usize;
    let mut keep = |result: Result<AttackResult, AttackError>,
                    originals: &[&Article]|
     -> Result<(), AttackError> {
        match result {
            Ok(result) => {
                log.push(EditLogEntry::from_result(&result));
                outputs.push(result.article);
                attacked += 1;
                Ok(())
            }
            Err(AttackError::NoEditApplicable) => {
                outputs.extend(originals.iter().map(|a| (*a).clone()));
                copied += originals.len();
                Ok(())
            }
            Err(error) => Err(error),
        }
    };

    match args.kind {
        KindArg::Distortion => {
            for article in &corpus.articles {
                keep(distort_facts(article, &config), &[article])?;
            }
        }
        KindArg::Swap => {
            for article in &corpus.articles {
                keep(swap_subject_object(article, &lexicons), &[article])?;
            }
        }
        KindArg::Confound => {
            let mut order: Vec<usize> = (0..corpus.len()).collect();
            if let Some(pair_seed) = args.pair_seed {
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(pair_seed));
            }
            let mut pairs = order.chunks_exact(2);
            for pair in &mut pairs {
                let (a, b) = (&corpus.articles[pair[0]], &corpus.articles[pair[1]]);
                keep(confound_causes(a, b, &lexicons, 0), &[a, b])?;
            }
            for &index in pairs.remainder() {
                outputs.push(corpus.articles[index].clone());
                copied += 1;
            }
        }
    }

    let out_corpus = Corpus { articles: outputs, source: args.out.display().to_string() };
    save_corpus(&out_corpus, &args.out)?;
    save_edit_log(&edit_log_path(&args.out), &log)?;
    eprintln!(
        "attacked {attacked} of {} articles, copied {copied} through unchanged",
        corpus.len()
    );
    Ok(if attacked > 0 { EXIT_OK } else { EXIT_NO_EDITS })
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<u8> {
    let lexicons = load_lexicons(args.lexicons.as_deref())?;
    let corpus = read_corpus(&args.input)?;
    let detector = build_detector(&args, &lexicons)?;

    if let Some(attacked_path) = &args.attacked {
        let results = load_attack_results(attacked_path)?;
        let report = match attack_delta_report(detector.as_ref(), &corpus, &results) {
            Ok(report) => report,
            Err(EvalError::Detector(error)) if remote_unavailable(&error) => {
                eprintln!("error: {error}");
                return Ok(EXIT_REMOTE_UNAVAILABLE);
            }
            Err(error) => return Err(error.into()),
        };
        let output = match args.format {
            FormatArg::Json => to_pretty_json(&AttackEnvelope { attack: &report })?,
            FormatArg::Text => render_attack_text(&report),
        };
        write_output(args.out.as_deref(), &output)?;
        return Ok(EXIT_OK);
    }

    let labeled: Vec<&Article> = corpus.articles.iter().filter(|a| a.label.is_some()).collect();
    let outcomes = check_all(detector.as_ref(), &labeled, args.jobs);
    let mut labels = Vec::new();
    let mut verdicts = Vec::new();
    let mut skipped = 0usize;
    for (article, outcome) in labeled.iter().zip(outcomes) {
        match outcome {
            Ok(verdict) => {
                labels.push(article.label.expect("only labeled articles are scored"));
                verdicts.push(verdict);
            }
            Err(error) => {
                eprintln!("skipping {}: {error}", article.id);
                skipped += 1;
            }
        }
    }
    if skipped > 0 && verdicts.is_empty() {
        eprintln!("error: every article failed, detector unavailable");
        return Ok(EXIT_REMOTE_UNAVAILABLE);
    }

    let counts = tally(&labels, &verdicts)?;
    let metrics = compute_metrics(&counts);
    let output = match args.format {
        FormatArg::Json => to_pretty_json(&EvalEnvelope {
            counts: &counts,
            metrics: &metrics,
            skipped: (skipped > 0).then_some(skipped),
        })?,
        FormatArg::Text => {
            let mut text = render_report(&metrics, &counts, ReportFormat::Text);
            if skipped > 0 {
                text.push_str(&format!("\nskipped articles      {skipped}\n"));
            }
            text
        }
    };
    write_output(args.out.as_deref(), &output)?;
    Ok(EXIT_OK)
}

fn cmd_train(args: TrainArgs) -> Result<u8> {
    let corpus = read_corpus(&args.input)?;
    let (train, test) = split_corpus(&corpus, args.split, args.seed)?;
    let model = train_nb(&train, args.alpha, args.seed)?;
    model.save(&args.out)?;

    let labeled: Vec<&Article> = test.articles.iter().filter(|a| a.label.is_some()).collect();
    let labels: Vec<TruthLabel> =
        labeled.iter().map(|a| a.label.expect("filtered to labeled")).collect();
    let verdicts: Vec<Verdict> = labeled.iter().map(|a| nb_check(a, &model)).collect();
    let counts = tally(&labels, &verdicts)?;
    let metrics = compute_metrics(&counts);
    print!("{}", render_report(&metrics, &counts, report_format(args.format)));
    eprintln!(
        "trained on {} articles, held out {}, model written to {}",
        train.len(),
        test.len(),
        args.out.display()
    );
    Ok(EXIT_OK)
}

fn cmd_facts_add(args: FactsAddArgs) -> Result<u8> {
    let mut triple = FactTriple::new(&args.subject, &args.action, &args.object)?;
    if let Some(time) = &args.time {
        triple = triple.with_time(time);
        if triple.time.is_none() {
            return Err(anyhow!("--time must not be blank"));
        }
    }
    if let Some(location) = &args.location {
        triple = triple.with_location(location);
        if triple.location.is_none() {
            return Err(anyhow!("--location must not be blank"));
        }
    }
    if let Some(quantity) = &args.quantity {
        let (value, unit) = quantity
            .trim()
            .split_once(' ')
            .ok_or_else(|| anyhow!("--quantity wants \"<value> <unit>\", got {quantity:?}"))?;
        let value: f64 =
            value.parse().map_err(|error| anyhow!("bad quantity value {value:?}: {error}"))?;
        triple = triple.with_quantity(value, unit.trim())?;
    }

    let mut line = format!("{}\t{}\t{}", triple.subject, triple.action, triple.object);
    if let Some(time) = &triple.time {
        line.push_str(&format!("\ttime={time}"));
    }
    if let Some(location) = &triple.location {
        line.push_str(&format!("\tlocation={location}"));
    }
    if let Some(quantity) = &triple.quantity {
        line.push_str(&format!("\tquantity={} {}", quantity.value, quantity.unit_noun));
    }
    line.push('\n');
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&args.out)
        .map_err(|error| anyhow!("cannot open {}: {error}", args.out.display()))?;
    file.write_all(line.as_bytes())
        .map_err(|error| anyhow!("cannot write {}: {error}", args.out.display()))?;
    println!("{}", serde_json::to_string(&triple)?);
    Ok(EXIT_OK)
}

fn cmd_facts_import(args: FactsImportArgs) -> Result<u8> {
    let mut graph = KnowledgeGraph::new();
    graph.import_facts(&args.input)?;
    println!("{}", serde_json::json!({ "facts": graph.len() }));
    Ok(EXIT_OK)
}

fn cmd_facts_verify(args: FactsVerifyArgs) -> Result<u8> {
    let lexicons = load_lexicons(args.lexicons.as_deref())?;
    let corpus = read_corpus(&args.input)?;
    let article = match &args.id {
        Some(id) => corpus
            .by_id(id)
            .ok_or_else(|| anyhow!("no article with id {id:?} in {}", args.input.display()))?,
        None => corpus
            .articles
            .first()
            .ok_or_else(|| anyhow!("{} holds no articles", args.input.display()))?,
    };
    let mut graph = KnowledgeGraph::new();
    graph.import_facts(&args.factcheck)?;
    let report = verify_article(&graph, article, &lexicons);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.contradicted > 0 { EXIT_CONTRADICTION } else { EXIT_OK })
}

fn build_detector(args: &EvaluateArgs, lexicons: &Lexicons) -> Result<Box<dyn Detector>> {
    let base: Box<dyn Detector> = match args.detector {
        DetectorArg::Style => Box::new(StyleModel::new(lexicons.clone())),
        DetectorArg::Nb => {
            let path =
                args.model.as_deref().ok_or_else(|| anyhow!("--detector nb requires --model"))?;
            Box::new(NBModel::load(path)?)
        }
        DetectorArg::Remote => {
            let base_url =
                args.url.clone().ok_or_else(|| anyhow!("--detector remote requires --url"))?;
            Box::new(RemoteDetector::new(RemoteEndpoint {
                base_url,
                timeout_ms: args.timeout_ms,
                max_in_flight: args.jobs.max(1),
            })?)
        }
    };
    match &args.factcheck {
        Some(path) => {
            let mut graph = KnowledgeGraph::new();
            graph.import_facts(path)?;
            Ok(Box::new(FactCheckedDetector::new(base, graph, lexicons.clone())))
        }
        None => Ok(base),
    }
}

/// Scores articles on a small worker pool; results keep input order.
fn check_all(
    detector: &dyn Detector,
    articles: &[&Article],
    jobs: usize,
) -> Vec<Result<Verdict, DetectorError>> {
    let jobs = jobs.max(1).min(articles.len().max(1));
    if jobs == 1 {
        return articles.iter().map(|article| detector.check(article)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<Verdict, DetectorError>>>> =
        articles.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                let Some(article) = articles.get(index) else { break };
                *slots[index].lock().expect("no panics while scoring") =
                    Some(detector.check(article));
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("no panics while scoring").expect("slot filled"))
        .collect()
}

fn load_attack_results(attacked_path: &Path) -> Result<Vec<AttackResult>> {
    let attacked = read_corpus(attacked_path)?;
    let log = load_edit_log(&edit_log_path(attacked_path))?;
    let by_id: BTreeMap<&str, &Article> =
        attacked.articles.iter().map(|a| (a.id.as_str(), a)).collect();
    log.into_iter()
        .map(|entry| {
            let article = by_id.get(entry.article_id.as_str()).copied().ok_or_else(|| {
                anyhow!(
                    "edit log names article {:?} which is missing from {}",
                    entry.article_id,
                    attacked_path.display()
                )
            })?;
            Ok(AttackResult {
                article: article.clone(),
                edits: entry.edits,
                kind: entry.kind,
                parent_ids: entry.parent_ids,
            })
        })
        .collect()
}

fn render_attack_text(report: &AttackReport) -> String {
    let mut out = String::from("attack score deltas\n");
    for row in &report.rows {
        out.push_str(&format!(
            "  {}  {}  {:.4} -> {:.4}  delta {:+.4}  {}\n",
            row.article_id,
            row.kind.as_str(),
            row.score_before,
            row.score_after,
            row.delta,
            if row.flipped { "flipped" } else { "held" },
        ));
    }
    match (report.mean_abs_delta, report.flip_rate) {
        (Some(mean), Some(rate)) => {
            out.push_str(&format!("mean abs delta  {mean:.4}\n"));
            out.push_str(&format!("flip rate       {rate:.4}\n"));
        }
        _ => out.push_str("no attacked articles\n"),
    }
    out
}

fn remote_unavailable(error: &DetectorError) -> bool {
    matches!(
        error,
        DetectorError::Timeout
            | DetectorError::Transport(_)
            | DetectorError::HttpStatus(_)
            | DetectorError::MalformedResponse(_)
    )
}

fn load_lexicons(dir: Option<&Path>) -> Result<Lexicons> {
    match dir {
        Some(dir) => Ok(Lexicons::load_dir(dir)?),
        None => Ok(Lexicons::builtin()),
    }
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    Ok(load_corpus(path, CorpusFormat::CsvWithHeader)?)
}

fn edit_log_path(corpus_path: &Path) -> PathBuf {
    corpus_path.with_extension("edits.json")
}

fn report_format(format: FormatArg) -> ReportFormat {
    match format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Text => ReportFormat::Text,
    }
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut output = serde_json::to_string_pretty(value)?;
    output.push('\n');
    Ok(output)
}

fn write_output(path: Option<&Path>, output: &str) -> Result<()> {
    match path {
        Some(path) => fs::write(path, output)
            .map_err(|error| anyhow!("cannot write {}: {error}", path.display()))?,
        None => print!("{output}"),
    }
    Ok(())
}
