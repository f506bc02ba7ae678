//! `aggrolab`: ingest corpora, extract features, train, evaluate, predict
//! and verify gradients from the command line.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 runtime
//! failure. Errors go to standard error as `code=<n> <kind>: <message>`.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use aggrolab_core::bundle::ModelBundle;
use aggrolab_core::corpus::{
    class_distribution, load_documents, make_split, write_canonical, DatasetSplit, DocFormat,
    Document, Source,
};
use aggrolab_core::ensemble::predict_label;
use aggrolab_core::features::emoticon::EmoticonTfidfModel;
use aggrolab_core::features::FeatureProfile;
use aggrolab_core::models::Architecture;
use aggrolab_core::pipeline::{process, raw_features};
use aggrolab_core::resources::Resources;
use aggrolab_core::trainer::{ensemble_probabilities, evaluate, prepare, train_prepared, TrainLog};
use aggrolab_core::verify::full_suite;
use aggrolab_core::CoreError;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{LabelSet, RunConfig};

/// Bad input or configuration; maps to exit code 1.
#[derive(Debug)]
pub struct Invalid(pub String);

impl Invalid {
    pub fn new(msg: impl Into<String>) -> Self {
        Invalid(msg.into())
    }
}

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Exit code for an error: validation failures anywhere in the chain give 1.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if cause.downcast_ref::<Invalid>().is_some() {
            return EXIT_INVALID;
        }
        if let Some(c) = cause.downcast_ref::<CoreError>() {
            return if c.is_validation() {
                EXIT_INVALID
            } else {
                EXIT_RUNTIME
            };
        }
    }
    EXIT_RUNTIME
}

#[derive(Debug, Parser)]
#[command(
    name = "aggrolab",
    version,
    about = "Aggression identification with DPCNN, DRNN and Pooled BiLSTM ensembles"
)]
struct Cli {
    /// Log progress at info level (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
    /// Lexicon directory [default: resources.lexicons, else $AGGROLAB_RESOURCES, else bundled].
    #[arg(long, global = true, value_name = "DIR")]
    resources: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a raw corpus to the canonical `id,text,label,source` CSV.
    Ingest(IngestArgs),
    /// Write the unscaled handcrafted features of each document as CSV.
    Features(FeaturesArgs),
    /// Train one architecture or all three and save their bundles.
    Train(TrainArgs),
    /// Score one to three bundles (probabilities averaged) on labelled documents.
    Evaluate(EvaluateArgs),
    /// Print the predicted class and class probabilities for each text.
    Predict(PredictArgs),
    /// Run the finite-difference gradient suite on every layer and architecture.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Input format: trac_csv, kaggle_jsonl or canonical_csv.
    #[arg(long, default_value = "trac_csv")]
    format: DocFormat,
    /// Raw corpus file.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Canonical CSV to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Label schema: trac (OAG, CAG, NAG) or kaggle (NAG, AGG) [default: kaggle for kaggle_jsonl, else trac].
    #[arg(long)]
    labels: Option<String>,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    /// Run configuration JSON [default: built-in defaults].
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Canonical CSV of documents.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Feature CSV to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Input format [default: data.format, canonical_csv].
    #[arg(long)]
    format: Option<DocFormat>,
    /// Feature profile, trac (24) or kaggle (20) [default: train.profile, trac].
    #[arg(long)]
    profile: Option<FeatureProfile>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Run configuration JSON [default: built-in defaults].
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// dpcnn, drnn, pooled_bilstm or all.
    #[arg(long, default_value = "all")]
    arch: String,
    /// Output directory [default: output.dir, runs].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Train the architectures concurrently when --arch all.
    #[arg(long)]
    parallel: bool,
    /// Training pool [default: data.train].
    #[arg(long, value_name = "FILE")]
    train: Option<PathBuf>,
    /// Input format [default: data.format, canonical_csv].
    #[arg(long)]
    format: Option<DocFormat>,
    /// [default: train.epochs, 50]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: train.seed, 0]
    #[arg(long)]
    seed: Option<u64>,
    /// [default: train.batch_size, 32]
    #[arg(long)]
    batch_size: Option<usize>,
    /// [default: train.lr, 0.001]
    #[arg(long)]
    lr: Option<f64>,
    /// [default: train.patience, 10]
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Comma-separated bundle files sharing one label schema.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..=3)]
    bundles: Vec<PathBuf>,
    /// Labelled test documents.
    #[arg(long, value_name = "FILE")]
    test: PathBuf,
    /// Format of the test file.
    #[arg(long, default_value = "canonical_csv")]
    format: DocFormat,
    /// Report JSON path.
    #[arg(long, value_name = "FILE")]
    report: PathBuf,
    /// Confusion matrix CSV [default: the report path with a `.confusion.csv` suffix].
    #[arg(long, value_name = "FILE")]
    confusion: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Comma-separated bundle files sharing one label schema.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..=3)]
    bundles: Vec<PathBuf>,
    /// Text to classify; repeat for several.
    #[arg(long, required = true)]
    text: Vec<String>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Number of seeds, starting at 0.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Entries sampled from each architecture tensor.
    #[arg(long, default_value_t = 3)]
    sample: usize,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let msg = e.to_string();
            eprintln!(
                "code={EXIT_INVALID} usage: {}",
                msg.trim_start_matches("error: ").trim_end()
            );
            return EXIT_INVALID;
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = exit_code(&e);
            let kind = if code == EXIT_INVALID {
                "invalid"
            } else {
                "runtime"
            };
            eprintln!("code={code} {kind}: {}", describe(&e));
            code
        }
    }
}

/// The error and its causes, skipping causes already quoted by an outer message.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
    }
    msg
}

/// Fails with a validation error when a user-supplied input path does not exist.
fn existing(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Invalid::new(format!("{}: no such file", path.display())).into())
    }
}

fn run(cli: Cli) -> Result<()> {
    let resources = cli.resources;
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Features(a) => features(a, resources),
        Command::Train(a) => train(a, resources),
        Command::Evaluate(a) => evaluate_cmd(a, resources),
        Command::Predict(a) => predict(a, resources),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

fn parse_labels(s: &str) -> Result<LabelSet> {
    match s {
        "trac" => Ok(LabelSet::Trac),
        "kaggle" => Ok(LabelSet::Kaggle),
        other => Err(Invalid::new(format!("labels `{other}` (expected trac or kaggle)")).into()),
    }
}

fn load_resources(flag: Option<PathBuf>, config: &RunConfig) -> Result<Resources> {
    let dir = flag.or_else(|| config.resources.lexicons.clone());
    Ok(Resources::locate(dir.as_deref())?)
}

fn ingest(a: IngestArgs) -> Result<()> {
    let labels = match &a.labels {
        Some(s) => parse_labels(s)?,
        None if a.format == DocFormat::KaggleJsonl => LabelSet::Kaggle,
        None => LabelSet::Trac,
    };
    let schema = labels.schema();
    let docs = load_documents(existing(&a.input)?, a.format, &schema)?;
    write_canonical(&a.out, &docs, &schema)?;
    let labelled: Vec<Document> = docs.iter().filter(|d| d.label.is_some()).cloned().collect();
    let counts = class_distribution(&labelled, &schema)?;
    let summary: Vec<String> = schema
        .names()
        .iter()
        .zip(&counts)
        .map(|(n, c)| format!("{n} {c}"))
        .collect();
    println!(
        "{} documents ({}, {} unlabelled) -> {}",
        docs.len(),
        summary.join(", "),
        docs.len() - labelled.len(),
        a.out.display()
    );
    Ok(())
}

fn features(a: FeaturesArgs, resources: Option<PathBuf>) -> Result<()> {
    let config = RunConfig::load_or_default(a.config.as_deref())?;
    let res = load_resources(resources, &config)?;
    let schema = config.data.labels.schema();
    let format = a.format.unwrap_or(config.data.format);
    let profile = a.profile.unwrap_or(config.train.profile);
    let docs = load_documents(existing(&a.input)?, format, &schema)?;
    let processed = process(&docs, &res.rules().with_max_len(config.train.max_len));
    let emoticons = if profile.uses_emoticons() {
        let labelled = docs
            .iter()
            .zip(&processed)
            .filter(|(d, _)| d.label.is_some())
            .map(|(d, p)| (d.id.as_str(), d.label, p.snapshot_text.as_str()));
        Some(EmoticonTfidfModel::fit(
            labelled,
            schema.k(),
            &res.emoticons,
        )?)
    } else {
        None
    };
    let rows = raw_features(&processed, &res, profile, emoticons.as_ref())?;
    let mut w = csv::Writer::from_path(&a.out).with_context(|| a.out.display().to_string())?;
    let mut header = vec!["id".to_string()];
    header.extend(profile.names());
    w.write_record(&header)?;
    for (d, row) in docs.iter().zip(&rows) {
        let mut rec = vec![d.id.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().with_context(|| a.out.display().to_string())?;
    println!(
        "{} documents x {} features -> {}",
        rows.len(),
        profile.dim(),
        a.out.display()
    );
    Ok(())
}

fn architectures(arg: &str) -> Result<Vec<Architecture>> {
    if arg == "all" {
        return Ok(Architecture::ALL.to_vec());
    }
    Ok(vec![arg.parse::<Architecture>()?])
}

fn train(a: TrainArgs, resources: Option<PathBuf>) -> Result<()> {
    let mut config = RunConfig::load_or_default(a.config.as_deref())?;
    let archs = architectures(&a.arch)?;
    if let Some(p) = a.train {
        config.data.train = Some(p);
    }
    if let Some(f) = a.format {
        config.data.format = f;
    }
    if let Some(d) = a.out {
        config.output.dir = d;
    }
    let t = &mut config.train;
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.seed = a.seed.unwrap_or(t.seed);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.lr = a.lr.unwrap_or(t.lr);
    t.patience = a.patience.unwrap_or(t.patience);
    config.train.validate()?;
    for arch in &archs {
        config.model.for_arch(*arch).validate()?;
    }

    let train_path = config
        .data
        .train
        .clone()
        .ok_or_else(|| Invalid::new("no training data: set data.train or pass --train"))?;
    let schema = config.data.labels.schema();
    let pool = load_documents(existing(&train_path)?, config.data.format, &schema)?;
    let split = match &config.data.validation {
        Some(v) => DatasetSplit {
            train: pool,
            validation: load_documents(existing(v)?, config.data.format, &schema)?,
            test: Vec::new(),
            seed: config.data.split_seed,
        },
        None => make_split(
            pool,
            config.data.validation_fraction,
            config.data.split_seed,
        )?,
    };
    log::info!(
        "{} training and {} validation documents",
        split.train.len(),
        split.validation.len()
    );
    let res = load_resources(resources, &config)?;
    let source = config.resources.embedding_source()?;
    let data = prepare(&split, &schema, &res, &source, &config.train)?;

    let out = config.output.dir.clone();
    fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
    write_text(
        &out.join("run_config.json"),
        &serde_json::to_string_pretty(&config)?,
    )?;

    let jobs: Vec<_> = archs
        .iter()
        .map(|&arch| (arch, config.model.for_arch(arch)))
        .collect();
    let results: Vec<_> = if a.parallel && jobs.len() > 1 {
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|(_, cfg)| s.spawn(|| train_prepared(cfg, &data, &config.train)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training thread panicked"))
                .collect()
        })
    } else {
        jobs.iter()
            .map(|(_, cfg)| train_prepared(cfg, &data, &config.train))
            .collect()
    };
    for ((arch, _), result) in jobs.iter().zip(results) {
        let (bundle, log) = result.with_context(|| format!("training {arch}"))?;
        let path = out.join(format!("{arch}.aggr"));
        bundle.save(&path)?;
        write_text(&out.join(format!("{arch}_log.jsonl")), &log.to_json_lines())?;
        print_training(&log, &path);
    }
    Ok(())
}

fn print_training(log: &TrainLog, path: &Path) {
    let best = log.best().expect("checkpoint is a logged epoch");
    println!(
        "{}: {} epochs{}, checkpoint epoch {} (validation weighted F1 {:.4}, loss {:.4}) -> {}",
        log.arch,
        log.epochs.len(),
        if log.stopped_early {
            " (stopped early)"
        } else {
            ""
        },
        best.epoch,
        best.val_f1,
        best.val_loss,
        path.display()
    );
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| path.display().to_string())
}

fn load_bundles(paths: &[PathBuf]) -> Result<Vec<ModelBundle>> {
    if paths.is_empty() || paths.len() > 3 {
        return Err(Invalid::new(format!("{} bundles given, expected 1 to 3", paths.len())).into());
    }
    paths
        .iter()
        .map(|p| Ok(ModelBundle::load(existing(p)?)?))
        .collect()
}

fn evaluate_cmd(a: EvaluateArgs, resources: Option<PathBuf>) -> Result<()> {
    let bundles = load_bundles(&a.bundles)?;
    let res = load_resources(resources, &RunConfig::default())?;
    let schema = bundles[0].schema()?;
    let docs = load_documents(existing(&a.test)?, a.format, &schema)?;
    let report = evaluate(&bundles, &docs, &res)?;
    write_text(&a.report, &serde_json::to_string_pretty(&report)?)?;
    let confusion = a.confusion.unwrap_or_else(|| {
        let mut name = a.report.file_stem().unwrap_or_default().to_os_string();
        name.push(".confusion.csv");
        a.report.with_file_name(name)
    });
    write_text(&confusion, &report.confusion_csv())?;
    println!(
        "{} documents: weighted F1 {:.4}, accuracy {:.4}",
        report.documents, report.weighted_f1, report.accuracy
    );
    for c in &report.per_class {
        println!(
            "  {:<6} precision {:.4} recall {:.4} f1 {:.4} support {}",
            c.label, c.precision, c.recall, c.f1, c.support
        );
    }
    print!("{}", report.confusion_csv());
    println!(
        "report -> {}, confusion -> {}",
        a.report.display(),
        confusion.display()
    );
    Ok(())
}

fn predict(a: PredictArgs, resources: Option<PathBuf>) -> Result<()> {
    let bundles = load_bundles(&a.bundles)?;
    let res = load_resources(resources, &RunConfig::default())?;
    if let Some(i) = a.text.iter().position(|t| t.trim().is_empty()) {
        return Err(Invalid::new(format!("text {} is empty", i + 1)).into());
    }
    let docs: Vec<Document> = a
        .text
        .iter()
        .enumerate()
        .map(|(i, t)| Document {
            id: format!("text_{}", i + 1),
            raw_text: t.clone(),
            label: None,
            source: Source::Other,
        })
        .collect();
    let probs = ensemble_probabilities(&bundles, &docs, &res)?;
    let labels = &bundles[0].meta.labels;
    for p in &probs {
        let cells: Vec<String> = labels
            .iter()
            .zip(p)
            .map(|(l, v)| format!("{l}={v:.6}"))
            .collect();
        println!("{}\t{}", labels[predict_label(p)], cells.join("\t"));
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    if a.seeds == 0 || a.sample == 0 {
        return Err(Invalid::new("--seeds and --sample must be at least 1").into());
    }
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let rows = full_suite(&seeds, a.sample)?;
    println!("{:<24} {:>4} {:>12}  status", "case", "seed", "max_rel_err");
    for r in &rows {
        println!(
            "{:<24} {:>4} {:>12.3e}  {}",
            r.case,
            r.seed,
            r.max_rel_err,
            if r.passed { "ok" } else { "FAIL" }
        );
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        anyhow::bail!("{failed} of {} gradient checks failed", rows.len());
    }
    println!("{} checks passed", rows.len());
    Ok(())
}
