//! The command-line front door: ingest → featurize → train → evaluate →
//! predict → explain, plus synthetic cohort generation.
//!
//! One TOML config file drives everything; flags override individual
//! fields (flag > config > default). Every artifact write is atomic
//! (temp file + rename), all randomness flows from the single global
//! seed, and outputs are byte-identical across reruns of the same
//! inputs. Exit codes are stable: 0 success, 1 computation failure,
//! 2 input or configuration failure.

use std::ffi::OsString;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{CliConfig, ConfigError, TargetChoice};
use crate::counterfactual::{diff_report, generate, CfConstraints, CfError};
use crate::ensemble::{soft_vote_predict, EnsembleError, SoftVoteEnsemble};
use crate::eval::{
    fit_classifier, fit_regressor, render_report, run_experiment, run_training_size_sweep,
    synth_cohort, EvalError, ExperimentConfig, ExperimentTask, MetricsReport,
};
use crate::features::{
    assemble_dataset, standardize, Dataset, FeatureError, FeatureSetKind, Scaler,
};
use crate::ingest::{
    assemble_participant, parse_activity_events, parse_cgm, parse_food_log, parse_work_log,
    write_activity_csv, write_cgm_csv, write_food_csv, write_work_csv, IngestError,
    ParticipantData,
};
use crate::models::{AnyModel, ForestConfig, ForestModel, ModelError};
use crate::rng::derive_seed;

/// Version tag of the saved-predictor artifact.
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

// Per-stage streams derived from the global seed.
const STAGE_TRAIN: u64 = 1;
const STAGE_EXPLAIN_MODEL: u64 = 2;
const STAGE_EXPLAIN_SEARCH: u64 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    // Input and configuration problems (exit code 2).
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid input {}", path.display())]
    InputFile {
        path: PathBuf,
        #[source]
        source: IngestError,
    },
    #[error("cannot read {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {}", path.display())]
    WriteIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} line {line}: {detail}", path.display())]
    Roster {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("artifact {} is not usable: {detail}", path.display())]
    Artifact { path: PathBuf, detail: String },
    #[error("{0}")]
    Usage(String),
    // Computation failures (exit code 1).
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Counterfactual(#[from] CfError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

impl CliError {
    /// Stable exit-code contract: 2 for bad inputs or configuration,
    /// 1 for failures inside the computation itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::InputFile { .. }
            | CliError::Io { .. }
            | CliError::WriteIo { .. }
            | CliError::Roster { .. }
            | CliError::Artifact { .. }
            | CliError::Usage(_) => 2,
            CliError::Feature(_)
            | CliError::Model(_)
            | CliError::Eval(_)
            | CliError::Counterfactual(_)
            | CliError::Ensemble(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "glucolens",
    version,
    about = "Postprandial glucose analytics: ingest lifestyle data, build \
             feature sets, train and evaluate predictors, and explain \
             hyperglycemia classifications."
)]
pub struct Cli {
    /// TOML config file; flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for artifacts (default `out` or the config value).
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Global seed; every stage derives its own stream from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and merge the raw data sources into a cohort artifact.
    Ingest(IngestArgs),
    /// Build the per-lunch feature matrix from a cohort artifact.
    Featurize(FeaturizeArgs),
    /// Fit a predictor on a feature matrix and save it.
    Train(TrainArgs),
    /// Run the seeded multi-repetition evaluation.
    Evaluate(EvaluateArgs),
    /// Score feature rows with a saved predictor.
    Predict(PredictArgs),
    /// Search for counterfactual explanations of one feature row.
    Explain(ExplainArgs),
    /// Generate a synthetic cohort with a planted response.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Roster CSV: participant_id,bmi,cgm_file,activity_file (paths
    /// relative to the roster's directory).
    #[arg(long, value_name = "FILE")]
    pub participants: Option<PathBuf>,
    /// Shared food log CSV.
    #[arg(long, value_name = "FILE")]
    pub food_log: Option<PathBuf>,
    /// Shared work log CSV.
    #[arg(long, value_name = "FILE")]
    pub work_log: Option<PathBuf>,
    /// Cohort artifact to write (default <out-dir>/cohort.json).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Cohort artifact (default <out-dir>/cohort.json).
    #[arg(long, value_name = "FILE")]
    pub cohort: Option<PathBuf>,
    /// Feature set: sensor_gl, sensor_macro, self_gl, self_macro, all.
    #[arg(long, value_name = "SET")]
    pub feature_set: Option<String>,
    /// Feature matrix to write (default <out-dir>/features.csv).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature matrix (default <out-dir>/features.csv).
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    /// Expected feature set; errors if the matrix holds a different one.
    #[arg(long, value_name = "SET")]
    pub feature_set: Option<String>,
    /// Prediction target: auc, iauc, max_bgl, or hyper.
    #[arg(long, value_name = "TARGET")]
    pub target: Option<String>,
    /// Model kind: rf, gbt, mlp, ridge, or (hyper only) vote.
    #[arg(long, value_name = "KIND")]
    pub model: Option<String>,
    /// Random-forest tree count.
    #[arg(long, value_name = "N")]
    pub n_est: Option<usize>,
    /// Ridge regularization strength.
    #[arg(long, value_name = "ALPHA")]
    pub alpha: Option<f64>,
    /// Perceptron architecture variation (1-13).
    #[arg(long, value_name = "ID")]
    pub variation: Option<u8>,
    /// Predictor artifact to write (default <out-dir>/predictor.json).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Feature matrix (default <out-dir>/features.csv).
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    /// Prediction target: auc, iauc, max_bgl, or hyper.
    #[arg(long, value_name = "TARGET")]
    pub target: Option<String>,
    /// Model kind: rf, gbt, mlp, ridge, or (hyper only) vote.
    #[arg(long, value_name = "KIND")]
    pub model: Option<String>,
    /// Random-forest tree count.
    #[arg(long, value_name = "N")]
    pub n_est: Option<usize>,
    /// Ridge regularization strength.
    #[arg(long, value_name = "ALPHA")]
    pub alpha: Option<f64>,
    /// Perceptron architecture variation (1-13).
    #[arg(long, value_name = "ID")]
    pub variation: Option<u8>,
    /// Seeded repetitions to aggregate.
    #[arg(long, value_name = "N")]
    pub n_seeds: Option<usize>,
    /// Hold out this fraction of rows per repetition.
    #[arg(long, value_name = "FRACTION")]
    pub test_fraction: Option<f64>,
    /// Hold out this many rows of each class per repetition.
    #[arg(long, value_name = "N")]
    pub n_per_class: Option<usize>,
    /// Named preset; `training-size-sweep` runs all six split ratios.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Report file to write (default <out-dir>/report.json).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Predictor artifact (default <out-dir>/predictor.json).
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Feature matrix to score (default <out-dir>/features.csv).
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    /// Predictions CSV to write (default <out-dir>/predictions.csv).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Feature matrix (default <out-dir>/features.csv).
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    /// Row to explain (0-based).
    #[arg(long, default_value_t = 0, value_name = "INDEX")]
    pub row: usize,
    /// Number of diverse counterfactuals to search for.
    #[arg(long, value_name = "K")]
    pub k: Option<usize>,
    /// Model-evaluation budget for the search.
    #[arg(long, value_name = "N")]
    pub budget: Option<usize>,
    /// Counterfactual report to write (default <out-dir>/counterfactuals.json).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of participants to generate.
    #[arg(long, value_name = "N")]
    pub participants: Option<usize>,
    /// Also write the four raw CSV sources under <out-dir>/raw/.
    #[arg(long)]
    pub csv: bool,
    /// Cohort artifact to write (default <out-dir>/cohort.json).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Parse arguments, run the chosen command, and return the process exit
/// code. Errors go to standard error with their cause chain.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = err.exit_code();
            let _ = err.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            let mut cause = std::error::Error::source(&err);
            while let Some(inner) = cause {
                eprintln!("  caused by: {inner}");
                cause = inner.source();
            }
            err.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.output_dir = dir.clone();
    }
    match &cli.command {
        Command::Ingest(args) => cmd_ingest(&config, args),
        Command::Featurize(args) => cmd_featurize(&config, args),
        Command::Train(args) => cmd_train(&config, args),
        Command::Evaluate(args) => cmd_evaluate(&config, args),
        Command::Predict(args) => cmd_predict(&config, args),
        Command::Explain(args) => cmd_explain(&config, args),
        Command::Synth(args) => cmd_synth(&config, args),
    }
}

// ---------------------------------------------------------------------------
// Artifact plumbing
// ---------------------------------------------------------------------------

/// A trained predictor with everything needed to score raw feature rows:
/// the fitted scaler, the backbone (or voting members), and the schema
/// they expect.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictorBundle {
    pub format_version: u32,
    pub feature_set: FeatureSetKind,
    pub feature_names: Vec<String>,
    pub target: TargetChoice,
    /// Global seed the model seed was derived from.
    pub seed: u64,
    pub scaler: Scaler,
    /// One backbone for regression; one or more voting members for
    /// classification.
    pub models: Vec<AnyModel>,
}

fn out_path(config: &CliConfig, chosen: &Option<PathBuf>, name: &str) -> PathBuf {
    chosen
        .clone()
        .unwrap_or_else(|| config.output_dir.join(name))
}

/// Write via a temp file in the same directory plus a rename, so readers
/// never observe a half-written artifact.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| CliError::WriteIo {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    fs::write(&tmp, bytes).map_err(|source| CliError::WriteIo {
        path: tmp.clone(),
        source,
    })?;
    fs::rename(&tmp, path).map_err(|source| CliError::WriteIo {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_cohort(path: &Path) -> Result<Vec<ParticipantData>, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Artifact {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let text = read_to_string(path)?;
    Dataset::read_csv(text.as_bytes()).map_err(|e| CliError::Artifact {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

fn load_bundle(path: &Path) -> Result<PredictorBundle, CliError> {
    let text = read_to_string(path)?;
    let bundle: PredictorBundle =
        serde_json::from_str(&text).map_err(|e| CliError::Artifact {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
    if bundle.format_version != BUNDLE_FORMAT_VERSION {
        return Err(CliError::Artifact {
            path: path.to_path_buf(),
            detail: format!(
                "unsupported format version {} (expected {BUNDLE_FORMAT_VERSION})",
                bundle.format_version
            ),
        });
    }
    Ok(bundle)
}

fn parse_feature_set(token: &str) -> Result<FeatureSetKind, CliError> {
    FeatureSetKind::parse(token).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown feature set `{token}` (expected sensor_gl, sensor_macro, \
             self_gl, self_macro, or all)"
        ))
    })
}

fn parse_target(token: &str) -> Result<TargetChoice, CliError> {
    TargetChoice::parse(token).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown target `{token}` (expected auc, iauc, max_bgl, or hyper)"
        ))
    })
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct RosterEntry {
    id: String,
    bmi: f64,
    cgm: PathBuf,
    activity: PathBuf,
}

fn parse_roster(path: &Path) -> Result<Vec<RosterEntry>, CliError> {
    let file = fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let expected = ["participant_id", "bmi", "cgm_file", "activity_file"];
    let headers = reader.headers().map_err(|e| CliError::Roster {
        path: path.to_path_buf(),
        line: 1,
        detail: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CliError::Roster {
            path: path.to_path_buf(),
            line: 1,
            detail: format!("expected header {}", expected.join(",")),
        });
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries: Vec<RosterEntry> = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let line = index + 2;
        let roster_err = |detail: String| CliError::Roster {
            path: path.to_path_buf(),
            line,
            detail,
        };
        let record = record.map_err(|e| roster_err(e.to_string()))?;
        if record.len() != expected.len() {
            return Err(roster_err(format!(
                "expected {} fields, found {}",
                expected.len(),
                record.len()
            )));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(roster_err("empty participant id".to_string()));
        }
        if entries.iter().any(|e| e.id == id) {
            return Err(roster_err(format!("duplicate participant id `{id}`")));
        }
        let bmi: f64 = record[1]
            .parse()
            .map_err(|_| roster_err(format!("unparseable bmi `{}`", &record[1])))?;
        entries.push(RosterEntry {
            id,
            bmi,
            cgm: base.join(&record[2]),
            activity: base.join(&record[3]),
        });
    }
    if entries.is_empty() {
        return Err(CliError::Roster {
            path: path.to_path_buf(),
            line: 1,
            detail: "roster lists no participants".to_string(),
        });
    }
    Ok(entries)
}

fn cmd_ingest(config: &CliConfig, args: &IngestArgs) -> Result<(), CliError> {
    let inputs = config.inputs.as_ref();
    let pick = |flag: &Option<PathBuf>, from_config: Option<&PathBuf>, name: &str| {
        flag.clone()
            .or_else(|| from_config.cloned())
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "ingest needs --{name} (or the [inputs] config section)"
                ))
            })
    };
    let roster_path = pick(
        &args.participants,
        inputs.map(|i| &i.participants),
        "participants",
    )?;
    let food_path = pick(&args.food_log, inputs.map(|i| &i.food_log), "food-log")?;
    let work_path = pick(&args.work_log, inputs.map(|i| &i.work_log), "work-log")?;

    let roster = parse_roster(&roster_path)?;
    let open = |path: &Path| {
        fs::File::open(path)
            .map(BufReader::new)
            .map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })
    };
    let in_file = |path: &Path| {
        let path = path.to_path_buf();
        move |source: IngestError| CliError::InputFile {
            path: path.clone(),
            source,
        }
    };
    let meals = parse_food_log(open(&food_path)?).map_err(in_file(&food_path))?;
    let workdays = parse_work_log(open(&work_path)?).map_err(in_file(&work_path))?;

    let mut participants = Vec::with_capacity(roster.len());
    let mut cgm_samples = 0usize;
    for entry in &roster {
        let cgm = parse_cgm(open(&entry.cgm)?, &entry.id).map_err(in_file(&entry.cgm))?;
        let activity =
            parse_activity_events(open(&entry.activity)?, &entry.id).map_err(in_file(&entry.activity))?;
        let own_meals: Vec<_> = meals
            .iter()
            .filter(|m| m.participant_id == entry.id)
            .cloned()
            .collect();
        let own_workdays: Vec<_> = workdays
            .iter()
            .filter(|w| w.participant_id == entry.id)
            .cloned()
            .collect();
        cgm_samples += cgm.samples().len();
        let participant = assemble_participant(
            &entry.id,
            entry.bmi,
            cgm,
            activity,
            own_meals,
            own_workdays,
        )
        .map_err(in_file(&roster_path))?;
        participants.push(participant);
    }

    let known: Vec<&str> = roster.iter().map(|e| e.id.as_str()).collect();
    let orphan_meals = meals
        .iter()
        .filter(|m| !known.contains(&m.participant_id.as_str()))
        .count();
    let orphan_work = workdays
        .iter()
        .filter(|w| !known.contains(&w.participant_id.as_str()))
        .count();

    let out = out_path(config, &args.out, "cohort.json");
    let encoded = serde_json::to_string_pretty(&participants).expect("cohort serializes");
    write_atomic(&out, encoded.as_bytes())?;
    let total_meals: usize = participants.iter().map(|p| p.meals.len()).sum();
    let total_workdays: usize = participants.iter().map(|p| p.workdays.len()).sum();
    println!(
        "ingested {} participants: {} CGM samples, {} meals, {} workdays",
        participants.len(),
        cgm_samples,
        total_meals,
        total_workdays
    );
    if orphan_meals + orphan_work > 0 {
        println!(
            "note: skipped {orphan_meals} meal and {orphan_work} workday rows \
             for participants not in the roster"
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// featurize
// ---------------------------------------------------------------------------

fn cmd_featurize(config: &CliConfig, args: &FeaturizeArgs) -> Result<(), CliError> {
    let cohort_path = out_path(config, &args.cohort, "cohort.json");
    let cohort = load_cohort(&cohort_path)?;
    let set = match &args.feature_set {
        Some(token) => parse_feature_set(token)?,
        None => config.feature_set,
    };
    let (dataset, skipped) =
        assemble_dataset(&cohort, set, &config.targets.to_target_config());

    let mut buf = Vec::new();
    dataset.write_csv(&mut buf)?;
    let out = out_path(config, &args.out, "features.csv");
    write_atomic(&out, &buf)?;

    let mut skip_csv = String::from("participant_id,meal_time,reason\n");
    for entry in &skipped {
        skip_csv.push_str(&format!(
            "{},{},{}\n",
            entry.participant_id,
            entry.meal_time.format("%Y-%m-%d %H:%M"),
            entry.reason
        ));
    }
    let skip_path = out.with_file_name("skipped.csv");
    write_atomic(&skip_path, skip_csv.as_bytes())?;

    println!(
        "feature set {}: {} rows ({} lunches skipped)",
        set.as_str(),
        dataset.len(),
        skipped.len()
    );
    println!("wrote {} and {}", out.display(), skip_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Apply the shared model flags on top of the config's model section.
fn model_overrides(
    config: &CliConfig,
    model: &Option<String>,
    n_est: Option<usize>,
    alpha: Option<f64>,
    variation: Option<u8>,
) -> crate::config::ModelSection {
    let mut section = config.model.clone();
    if let Some(kind) = model {
        section.kind = kind.clone();
    }
    if let Some(n) = n_est {
        section.n_est = n;
    }
    if let Some(a) = alpha {
        section.alpha = a;
    }
    if let Some(v) = variation {
        section.variation = v;
    }
    section
}

fn cmd_train(config: &CliConfig, args: &TrainArgs) -> Result<(), CliError> {
    let features_path = out_path(config, &args.features, "features.csv");
    let dataset = load_dataset(&features_path)?;
    if let Some(token) = &args.feature_set {
        let wanted = parse_feature_set(token)?;
        if wanted != dataset.set_kind() {
            return Err(CliError::Artifact {
                path: features_path.clone(),
                detail: format!(
                    "holds the {} feature set but {} was requested; re-run featurize",
                    dataset.set_kind().as_str(),
                    wanted.as_str()
                ),
            });
        }
    }
    let target = match &args.target {
        Some(token) => parse_target(token)?,
        None => config.target,
    };
    let section = model_overrides(config, &args.model, args.n_est, args.alpha, args.variation);

    let (scaler, scaled) = standardize(&dataset)?;
    let model_seed = derive_seed(config.seed, STAGE_TRAIN);
    let models = if target.is_classification() {
        let spec = section.to_classifier_spec()?;
        fit_classifier(&spec, scaled.features(), &scaled.labels(), model_seed)?.into_models()
    } else {
        let kind = target
            .regression_target()
            .expect("non-classification target maps to a regression kind");
        let spec = section.to_regressor_spec()?;
        vec![fit_regressor(
            &spec,
            scaled.features(),
            &scaled.target_column(kind),
            model_seed,
        )?]
    };

    let bundle = PredictorBundle {
        format_version: BUNDLE_FORMAT_VERSION,
        feature_set: dataset.set_kind(),
        feature_names: dataset.feature_names().to_vec(),
        target,
        seed: config.seed,
        scaler,
        models,
    };
    let out = out_path(config, &args.out, "predictor.json");
    let encoded = serde_json::to_string_pretty(&bundle).expect("bundle serializes");
    write_atomic(&out, encoded.as_bytes())?;
    println!(
        "seed {}: trained {} `{}` on {} rows of {}",
        config.seed,
        target.as_str(),
        section.kind,
        dataset.len(),
        dataset.set_kind().as_str()
    );
    println!("wrote {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

fn cmd_evaluate(config: &CliConfig, args: &EvaluateArgs) -> Result<(), CliError> {
    let features_path = out_path(config, &args.features, "features.csv");
    let dataset = load_dataset(&features_path)?;
    let target = match &args.target {
        Some(token) => parse_target(token)?,
        None => config.target,
    };
    let section = model_overrides(config, &args.model, args.n_est, args.alpha, args.variation);

    let task = if target.is_classification() {
        ExperimentTask::Classification {
            model: section.to_classifier_spec()?,
        }
    } else {
        ExperimentTask::Regression {
            target: target
                .regression_target()
                .expect("non-classification target maps to a regression kind"),
            model: section.to_regressor_spec()?,
        }
    };

    let mut split_section = config.split;
    match (args.test_fraction, args.n_per_class) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "pass either --test-fraction or --n-per-class, not both".to_string(),
            ))
        }
        (Some(fraction), None) => {
            if !fraction.is_finite() || fraction <= 0.0 || fraction >= 1.0 {
                return Err(CliError::Usage(format!(
                    "--test-fraction {fraction} must lie in (0, 1)"
                )));
            }
            split_section.test_fraction = Some(fraction);
            split_section.n_per_class = None;
        }
        (None, Some(count)) => {
            if count == 0 {
                return Err(CliError::Usage(
                    "--n-per-class must be at least 1".to_string(),
                ));
            }
            split_section.n_per_class = Some(count);
            split_section.test_fraction = None;
        }
        (None, None) => {}
    }

    let experiment = ExperimentConfig {
        task,
        split: split_section.to_split_kind()?,
        n_seeds: args.n_seeds.unwrap_or(config.n_seeds),
        base_seed: config.seed,
        balance: if target.is_classification() {
            config.resampling.balance_spec()
        } else {
            None
        },
        augment: config.resampling.augment_spec(),
        resplit_per_seed: true,
    };

    match args.preset.as_deref() {
        None => {
            let report = run_experiment(&dataset, &experiment)?;
            let out = out_path(config, &args.out, "report.json");
            write_report(&out, &report)?;
            print!("{}", render_report(&report));
            println!("wrote {}", out.display());
        }
        Some("training-size-sweep") => {
            if args.out.is_some() {
                return Err(CliError::Usage(
                    "the sweep writes one report per ratio; --out is not applicable"
                        .to_string(),
                ));
            }
            let reports = run_training_size_sweep(&dataset, &experiment)?;
            for (label, report) in &reports {
                println!("== split {label} ==");
                print!("{}", render_report(report));
                let name = format!("report-{}.json", label.replace('/', "-"));
                let out = config.output_dir.join(name);
                write_report(&out, report)?;
                println!("wrote {}", out.display());
            }
        }
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown preset `{other}` (expected training-size-sweep)"
            )))
        }
    }
    Ok(())
}

fn write_report(path: &Path, report: &MetricsReport) -> Result<(), CliError> {
    write_atomic(path, report.to_json().as_bytes())
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

fn cmd_predict(config: &CliConfig, args: &PredictArgs) -> Result<(), CliError> {
    let bundle_path = out_path(config, &args.model, "predictor.json");
    let bundle = load_bundle(&bundle_path)?;
    let features_path = out_path(config, &args.features, "features.csv");
    let dataset = load_dataset(&features_path)?;
    if dataset.set_kind() != bundle.feature_set {
        return Err(CliError::Artifact {
            path: features_path.clone(),
            detail: format!(
                "holds the {} feature set but the predictor expects {}",
                dataset.set_kind().as_str(),
                bundle.feature_set.as_str()
            ),
        });
    }
    let scaled = bundle.scaler.transform_dataset(&dataset)?;

    let mut csv = String::new();
    if bundle.target.is_classification() {
        let ensemble = SoftVoteEnsemble::new(bundle.models.clone())?;
        let (labels, probas) = soft_vote_predict(&ensemble, scaled.features())?;
        csv.push_str("row,label,p_normal,p_hyper\n");
        for (i, (label, proba)) in labels.iter().zip(&probas).enumerate() {
            let digit = if *label { 1 } else { 0 };
            csv.push_str(&format!("{i},{digit},{},{}\n", proba[0], proba[1]));
        }
    } else {
        let model = bundle.models.first().ok_or_else(|| CliError::Artifact {
            path: bundle_path.clone(),
            detail: "bundle holds no model".to_string(),
        })?;
        let predictions = model.predict(scaled.features())?;
        csv.push_str("row,prediction\n");
        for (i, value) in predictions.iter().enumerate() {
            csv.push_str(&format!("{i},{value}\n"));
        }
    }
    let out = out_path(config, &args.out, "predictions.csv");
    write_atomic(&out, csv.as_bytes())?;
    println!(
        "scored {} rows for {} with the saved `{}` predictor",
        dataset.len(),
        bundle.target.as_str(),
        if bundle.models.len() > 1 { "vote" } else { "single" }
    );
    println!("wrote {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

fn cmd_explain(config: &CliConfig, args: &ExplainArgs) -> Result<(), CliError> {
    let features_path = out_path(config, &args.features, "features.csv");
    let dataset = load_dataset(&features_path)?;
    if args.row >= dataset.len() {
        return Err(CliError::Usage(format!(
            "--row {} is out of range; the feature matrix holds {} rows",
            args.row,
            dataset.len()
        )));
    }

    // A forest fitted on raw features: per-feature standardization is
    // monotone, so the raw-space forest makes the same decisions as a
    // scaled-space one while keeping the search (and the report) in
    // natural units where integer and immutability constraints mean
    // something.
    let labels = dataset.labels();
    let forest = ForestModel::fit_classification(
        dataset.features(),
        &labels,
        &ForestConfig {
            n_estimators: config.model.n_est,
            max_leaf_nodes: config.model.max_leaf_nodes,
            seed: derive_seed(config.seed, STAGE_EXPLAIN_MODEL),
        },
    )?;
    let model = AnyModel::Forest(forest);

    let instance = dataset.features()[args.row].clone();
    let proba = model.predict_proba(std::slice::from_ref(&instance))?[0];
    let current = proba[1] > proba[0];

    let as_config_error = |e: CfError| {
        CliError::Config(ConfigError::Invalid(format!(
            "counterfactual constraints do not fit this feature set: {e}"
        )))
    };
    let constraints = CfConstraints::from_training(dataset.feature_names(), dataset.features())?
        .with_immutable(config.counterfactual.immutable.iter().map(String::as_str))
        .map_err(as_config_error)?
        .with_integer(config.counterfactual.integer.iter().map(String::as_str))
        .map_err(as_config_error)?;

    let mut request = config
        .counterfactual
        .to_request(!current, derive_seed(config.seed, STAGE_EXPLAIN_SEARCH));
    if let Some(k) = args.k {
        if k == 0 {
            return Err(CliError::Usage("--k must be at least 1".to_string()));
        }
        request.k = k;
    }
    if let Some(budget) = args.budget {
        request.budget = budget;
    }

    let set = generate(&model, &instance, &constraints, &request)?;
    println!(
        "row {}: classified {} (p_hyper {:.3}); searching for {}",
        args.row,
        if current { "hyperglycemic" } else { "normal" },
        proba[1],
        if current { "normal" } else { "hyperglycemic" },
    );
    print!("{}", diff_report(&set));
    let out = out_path(config, &args.out, "counterfactuals.json");
    let encoded = serde_json::to_string_pretty(&set).expect("counterfactual set serializes");
    write_atomic(&out, encoded.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

fn cmd_synth(config: &CliConfig, args: &SynthArgs) -> Result<(), CliError> {
    let mut spec = config.synth.to_spec(config.seed);
    if let Some(n) = args.participants {
        if n == 0 {
            return Err(CliError::Usage(
                "--participants must be at least 1".to_string(),
            ));
        }
        spec.n_participants = n;
    }
    let cohort = synth_cohort(&spec);
    let out = out_path(config, &args.out, "cohort.json");
    let encoded = serde_json::to_string_pretty(&cohort).expect("cohort serializes");
    write_atomic(&out, encoded.as_bytes())?;
    let total_meals: usize = cohort.iter().map(|p| p.meals.len()).sum();
    println!(
        "seed {}: generated {} participants with {} lunches",
        config.seed,
        cohort.len(),
        total_meals
    );
    println!("wrote {}", out.display());
    if args.csv {
        let raw_dir = config.output_dir.join("raw");
        write_raw_sources(&raw_dir, &cohort)?;
        println!("wrote raw CSV sources under {}", raw_dir.display());
    }
    Ok(())
}

/// Dump a cohort back out as the four raw CSV sources plus a roster, so
/// the ingest path can be exercised end to end on generated data.
fn write_raw_sources(dir: &Path, cohort: &[ParticipantData]) -> Result<(), CliError> {
    let io_err = |source: std::io::Error| CliError::WriteIo {
        path: dir.to_path_buf(),
        source,
    };
    let mut roster = String::from("participant_id,bmi,cgm_file,activity_file\n");
    let mut all_meals = Vec::new();
    let mut all_workdays = Vec::new();
    for participant in cohort {
        let id = &participant.participant_id;
        let cgm_name = format!("{id}-cgm.csv");
        let activity_name = format!("{id}-activity.csv");

        let mut buf = Vec::new();
        write_cgm_csv(&participant.cgm, &mut buf).map_err(io_err)?;
        write_atomic(&dir.join(&cgm_name), &buf)?;

        buf.clear();
        write_activity_csv(&participant.activity, &mut buf).map_err(io_err)?;
        write_atomic(&dir.join(&activity_name), &buf)?;

        roster.push_str(&format!(
            "{id},{},{cgm_name},{activity_name}\n",
            participant.bmi
        ));
        all_meals.extend(participant.meals.iter().cloned());
        all_workdays.extend(participant.workdays.iter().cloned());
    }
    let mut buf = Vec::new();
    write_food_csv(&all_meals, &mut buf).map_err(io_err)?;
    write_atomic(&dir.join("food_log.csv"), &buf)?;
    buf.clear();
    write_work_csv(&all_workdays, &mut buf).map_err(io_err)?;
    write_atomic(&dir.join("work_log.csv"), &buf)?;
    write_atomic(&dir.join("participants.csv"), roster.as_bytes())?;
    Ok(())
}
