//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error. Failures are
//! written to stderr as a single JSON object.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    self, anova_oneway, carbon_estimate, classify_corpus, error_breakdown, iaa, records_to_jsonl,
};
use crate::corpus::{
    check_class_counts, class_counts, export_canonical, lint_dataset, CorpusError, Dataset,
    DatasetFormat, RepairPolicy, SnapPolicy, PSYNIT_CLASS_COUNTS,
};
use crate::experiments::{self, load_plan, run_plan, split, write_run_dir, SplitSpec};
use crate::metrics::{self, evaluate, EvalMode};
use crate::tagger::{
    self, continue_training, load_predictions, predict_file, train, ExternalTrainerConfig,
    TaggerModel, TrainConfig,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    Tagger(#[from] tagger::TaggerError),
    #[error(transparent)]
    Experiment(#[from] experiments::ExperimentError),
    #[error("{0}")]
    Check(String),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Corpus(_) => "corpus",
            Self::Metrics(_) => "metrics",
            Self::Analysis(_) => "analysis",
            Self::Tagger(_) => "tagger",
            Self::Experiment(_) => "experiment",
            Self::Check(_) => "check_failed",
            Self::Input(_) => "input",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Table,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "mcner",
    version,
    about = "Multicenter NER evaluation and experiment harness"
)]
pub struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Report format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    pub output: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset file.
    pub path: PathBuf,
    /// annotator-json, conll or canonical; detected when omitted.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<DatasetFormat>,
    /// Dataset name (defaults to the file stem).
    #[arg(long)]
    pub name: Option<String>,
}

fn parse_format(s: &str) -> Result<DatasetFormat, String> {
    s.parse().map_err(|e: CorpusError| e.to_string())
}

fn parse_snap(s: &str) -> Result<SnapPolicy, String> {
    s.parse().map_err(|e: CorpusError| e.to_string())
}

fn parse_mode(s: &str) -> Result<EvalMode, String> {
    s.parse().map_err(|e: CorpusError| e.to_string())
}

fn parse_repair(s: &str) -> Result<RepairPolicy, String> {
    s.parse().map_err(|e: CorpusError| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a dataset to canonical JSON and print its class counts.
    Ingest {
        #[command(flatten)]
        input: DatasetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check annotation rules; exits 1 when violations remain.
    Lint {
        #[command(flatten)]
        input: DatasetArgs,
        #[arg(long, value_parser = parse_snap, default_value = "expand")]
        snap: SnapPolicy,
        /// Write the snapped dataset here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against gold annotations.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_parser = parse_format)]
        gold_format: Option<DatasetFormat>,
        /// Prediction file (JSON lines: doc_id, tags).
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_parser = parse_mode, default_value = "token_strict")]
        mode: EvalMode,
        #[arg(long, value_parser = parse_repair)]
        repair: Option<RepairPolicy>,
        #[arg(long, value_parser = parse_snap, default_value = "expand")]
        snap: SnapPolicy,
    },
    /// Type 1-4 error breakdown of predictions.
    Errors {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_parser = parse_format)]
        gold_format: Option<DatasetFormat>,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_parser = parse_repair)]
        repair: Option<RepairPolicy>,
        #[arg(long, value_parser = parse_snap, default_value = "expand")]
        snap: SnapPolicy,
        /// Write one JSON record per mismatching token here.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Inter-annotator agreement of a second annotation against a reference.
    Iaa {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        other: PathBuf,
        #[arg(long, value_parser = parse_format)]
        format: Option<DatasetFormat>,
        #[arg(long, value_parser = parse_mode, default_value = "token_strict")]
        mode: EvalMode,
        #[arg(long, value_parser = parse_snap, default_value = "expand")]
        snap: SnapPolicy,
    },
    /// Train the baseline tagger.
    Train {
        #[command(flatten)]
        input: DatasetArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_shuffle: bool,
        #[arg(long, value_parser = parse_snap, default_value = "expand")]
        snap: SnapPolicy,
    },
    /// Continue training a model on a tune set, replaying earlier data.
    Tune {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tune: PathBuf,
        #[arg(long)]
        prev: PathBuf,
        #[arg(long, value_parser = parse_format)]
        format: Option<DatasetFormat>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.25)]
        rehearsal_fraction: f64,
        #[arg(long, value_parser = parse_snap, default_value = "expand")]
        snap: SnapPolicy,
    },
    /// Tag a dataset with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: DatasetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment plan into a run directory.
    Experiment {
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-way ANOVA over score lists (JSON array of arrays or object of arrays).
    Anova { scores: PathBuf },
    /// Carbon footprint: GPU hours x average power x grid intensity.
    Carbon {
        #[arg(long)]
        gpu_hours: f64,
        #[arg(long)]
        power_kw: f64,
        /// kgCO2 per kWh.
        #[arg(long)]
        intensity: f64,
    },
    /// Seeded train/val/test split plus an external trainer config.
    Split {
        #[command(flatten)]
        input: DatasetArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare a local copy of the public PsyNIT release with its published
    /// class counts.
    VerifyTable3 {
        #[command(flatten)]
        input: DatasetArgs,
        /// Expected sha256 of the file.
        #[arg(long)]
        sha256: Option<String>,
    },
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load(
    path: &Path,
    format: Option<DatasetFormat>,
    name: Option<&str>,
) -> Result<Dataset, CliError> {
    let bytes = read(path)?;
    let format = format.unwrap_or_else(|| DatasetFormat::detect(path, &bytes));
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset");
    let mut ds = format.ingest(name.unwrap_or(stem), &bytes)?;
    if let Some(n) = name {
        ds.name = n.to_string();
    }
    Ok(ds)
}

/// Loads a dataset and requires it to be lint-clean after snapping.
fn load_clean(
    path: &Path,
    format: Option<DatasetFormat>,
    name: Option<&str>,
    snap: SnapPolicy,
) -> Result<Dataset, CliError> {
    let ds = load(path, format, name)?;
    let (clean, report) = lint_dataset(&ds, snap);
    match report.violations.first() {
        None => Ok(clean),
        Some(v) => Err(CliError::Check(format!(
            "{}: {} lint violation(s), first: document {} {:?} ({},{},{}) {}",
            path.display(),
            report.violations.len(),
            v.doc_id,
            v.kind,
            v.span.start,
            v.span.end,
            v.span.label,
            v.detail
        ))),
    }
}

struct Out {
    format: OutputFormat,
    buf: String,
}

impl Out {
    fn emit<T: Serialize>(&mut self, value: &T, table: impl FnOnce() -> String) {
        match self.format {
            OutputFormat::Json => {
                self.buf
                    .push_str(&serde_json::to_string_pretty(value).expect("serializes"));
                self.buf.push('\n');
            }
            OutputFormat::Table => self.buf.push_str(&table()),
        }
    }
}

fn parse_scores(bytes: &[u8]) -> Result<Vec<Vec<f64>>, CliError> {
    let value: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| CliError::Corpus(crate::corpus::json_error(bytes, e)))?;
    let groups: Vec<&serde_json::Value> = match &value {
        serde_json::Value::Array(items) => items.iter().collect(),
        serde_json::Value::Object(map) => map.values().collect(),
        _ => {
            return Err(CliError::Input(
                "scores must be an array or object of arrays".into(),
            ))
        }
    };
    groups
        .into_iter()
        .map(|g| {
            g.as_array()
                .and_then(|xs| xs.iter().map(|x| x.as_f64()).collect::<Option<Vec<_>>>())
                .ok_or_else(|| CliError::Input("every group must be an array of numbers".into()))
        })
        .collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn execute(cli: Cli, out: &mut Out) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { input, out: dest } => {
            let ds = load(&input.path, input.format, input.name.as_deref())?;
            write(&dest, &export_canonical(&ds))?;
            let counts = class_counts(&ds);
            out.emit(&counts, || counts.render_table());
        }
        Command::Lint {
            input,
            snap,
            out: dest,
        } => {
            let ds = load(&input.path, input.format, input.name.as_deref())?;
            let (fixed, report) = lint_dataset(&ds, snap);
            if let Some(dest) = dest {
                write(&dest, &export_canonical(&fixed))?;
            }
            out.emit(&report, || {
                let mut s = String::new();
                for v in &report.violations {
                    s.push_str(&format!(
                        "{}\t{:?}\t({},{},{})\t{}\n",
                        v.doc_id, v.kind, v.span.start, v.span.end, v.span.label, v.detail
                    ));
                }
                s.push_str(&format!(
                    "violations: {}  snapped: {}  dropped: {}\n",
                    report.violations.len(),
                    report.snapped_count,
                    report.dropped_count
                ));
                s
            });
            if !report.is_clean() {
                return Err(CliError::Check(format!(
                    "{} lint violation(s)",
                    report.violations.len()
                )));
            }
        }
        Command::Eval {
            gold,
            gold_format,
            pred,
            mode,
            repair,
            snap,
        } => {
            let ds = load_clean(&gold, gold_format, None, snap)?;
            let preds = load_predictions(&read(&pred)?, &ds, repair)?;
            let mut report = evaluate(&ds.tag_sequences()?, &preds, mode)?;
            report.repair = repair;
            out.emit(&report, || report.render_table());
        }
        Command::Errors {
            gold,
            gold_format,
            pred,
            repair,
            snap,
            records,
        } => {
            let ds = load_clean(&gold, gold_format, None, snap)?;
            let preds = load_predictions(&read(&pred)?, &ds, repair)?;
            let recs = classify_corpus(&ds.tag_sequences()?, &preds)?;
            if let Some(path) = records {
                write(&path, &records_to_jsonl(&recs))?;
            }
            let mut breakdown = error_breakdown(&recs);
            breakdown.repair = repair;
            out.emit(&breakdown, || breakdown.render_table());
        }
        Command::Iaa {
            reference,
            other,
            format,
            mode,
            snap,
        } => {
            let a = load_clean(&reference, format, None, snap)?;
            let b = load_clean(&other, format, None, snap)?;
            let report = iaa(&a, &b, mode)?;
            out.emit(&report, || report.render_table());
        }
        Command::Train {
            input,
            out: dest,
            epochs,
            seed,
            no_shuffle,
            snap,
        } => {
            let ds = load_clean(&input.path, input.format, input.name.as_deref(), snap)?;
            let cfg = TrainConfig {
                epochs,
                seed,
                shuffle: !no_shuffle,
                ..Default::default()
            };
            let model = train(&ds, &cfg)?;
            write(&dest, &model.to_json())?;
            let meta = model.train_meta().cloned();
            out.emit(&meta, || {
                format!(
                    "trained on {} documents, {} features, {} tags -> {}\n",
                    ds.documents.len(),
                    model.feature_count(),
                    model.tags().len(),
                    dest.display()
                )
            });
        }
        Command::Tune {
            model,
            tune,
            prev,
            format,
            out: dest,
            epochs,
            seed,
            rehearsal_fraction,
            snap,
        } => {
            let base = TaggerModel::from_json(&read(&model)?)?;
            let tune = load_clean(&tune, format, None, snap)?;
            let prev = load_clean(&prev, format, None, snap)?;
            let cfg = TrainConfig {
                epochs,
                seed,
                shuffle: true,
                rehearsal_fraction,
            };
            let updated = continue_training(&base, &tune, &prev, &cfg)?;
            write(&dest, &updated.to_json())?;
            let meta = updated.train_meta().cloned();
            out.emit(&meta, || {
                format!(
                    "continued training on {} documents -> {}\n",
                    tune.documents.len(),
                    dest.display()
                )
            });
        }
        Command::Predict {
            model,
            input,
            out: dest,
        } => {
            let model = TaggerModel::from_json(&read(&model)?)?;
            let ds = load(&input.path, input.format, input.name.as_deref())?;
            write(&dest, &predict_file(&model, &ds))?;
            let summary =
                json!({ "documents": ds.documents.len(), "out": dest.display().to_string() });
            out.emit(&summary, || {
                format!(
                    "tagged {} documents -> {}\n",
                    ds.documents.len(),
                    dest.display()
                )
            });
        }
        Command::Experiment { plan, out: dest } => {
            let plan = load_plan(&plan)?;
            let datasets = plan.load_datasets()?;
            let outcome = run_plan(&plan, &datasets)?;
            write_run_dir(&dest, &plan, &datasets, &outcome)?;
            let summary_path = dest.join("summary.txt");
            let text = String::from_utf8_lossy(&read(&summary_path)?).into_owned();
            let json_summary: serde_json::Value =
                serde_json::from_slice(&read(&dest.join("summary.json"))?)
                    .map_err(|e| CliError::Input(e.to_string()))?;
            out.emit(&json_summary, || text);
        }
        Command::Anova { scores } => {
            let groups = parse_scores(&read(&scores)?)?;
            let result = anova_oneway(&groups)?;
            out.emit(&result, || {
                format!(
                    "F({}, {}) = {}\np = {}\n",
                    result.df_between, result.df_within, result.f, result.p
                )
            });
        }
        Command::Carbon {
            gpu_hours,
            power_kw,
            intensity,
        } => {
            let est = carbon_estimate(gpu_hours, power_kw, intensity)?;
            out.emit(&est, || format!("{} kgCO2-eq\n", est.total));
        }
        Command::Split {
            input,
            seed,
            out_dir,
        } => {
            let ds = load(&input.path, input.format, input.name.as_deref())?;
            let spec = SplitSpec {
                seed,
                ..Default::default()
            };
            let parts = split(&ds, &spec)?;
            for (name, part) in [
                ("train", &parts.train),
                ("val", &parts.val),
                ("test", &parts.test),
            ] {
                write(
                    &out_dir.join(format!("{name}.json")),
                    &export_canonical(part),
                )?;
            }
            let trainer = ExternalTrainerConfig::default();
            trainer.validate()?;
            write(&out_dir.join("trainer_config.json"), &trainer.to_json())?;
            let sizes = json!({
                "seed": seed,
                "train": parts.train.documents.len(),
                "val": parts.val.documents.len(),
                "test": parts.test.documents.len(),
            });
            out.emit(&sizes, || {
                format!(
                    "train {}  val {}  test {}  (seed {seed}) -> {}\n",
                    parts.train.documents.len(),
                    parts.val.documents.len(),
                    parts.test.documents.len(),
                    out_dir.display()
                )
            });
        }
        Command::VerifyTable3 { input, sha256 } => {
            let bytes = read(&input.path)?;
            let digest = sha256_hex(&bytes);
            if let Some(want) = sha256 {
                if !want.eq_ignore_ascii_case(&digest) {
                    return Err(CliError::Check(format!(
                        "sha256 mismatch: expected {want}, file has {digest}"
                    )));
                }
            }
            let ds = load(&input.path, input.format, input.name.as_deref())?;
            let check = check_class_counts(&class_counts(&ds), &PSYNIT_CLASS_COUNTS);
            let value = json!({ "sha256": digest, "check": check });
            out.emit(&value, || check.render_table());
            if !check.matches {
                let deltas: Vec<String> = check
                    .rows
                    .iter()
                    .filter(|r| r.delta != 0)
                    .map(|r| format!("{} {:+}", r.label, r.delta))
                    .collect();
                return Err(CliError::Check(format!(
                    "class counts differ: {}",
                    deltas.join(", ")
                )));
            }
        }
    }
    Ok(())
}

fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let message = if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                "a subcommand is required; see --help".to_string()
            } else {
                e.to_string().trim().to_string()
            };
            eprintln!("{}", error_json("usage", &message));
            return 2;
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("{}", error_json("usage", "--jobs must be at least 1"));
            return 2;
        }
        // fails only when the pool already exists, e.g. on a second call
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let mut out = Out {
        format: cli.output,
        buf: String::new(),
    };
    let result = execute(cli, &mut out);
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(out.buf.as_bytes());
    let _ = stdout.flush();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            1
        }
    }
}
