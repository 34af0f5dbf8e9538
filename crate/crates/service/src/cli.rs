//! `agritwin` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use agritwin_core::analytics::{
    emit_plot_data, evaluate_model, histogram, pearson_matrix, ModelEvaluation, PlotArtifact,
};
use agritwin_core::recommender::{
    recommend_top_k, synthetic_dataset, train, Hyperparams, LabeledDataset, Recommendation,
    RecommendationModel,
};
use agritwin_core::simulation::{simulate_with, CropParamsTable, ScenarioSpec};
use agritwin_core::twin::{feature_vector, FeatureVector, FieldId, SnapshotPolicy, TwinStore, FEATURE_NAMES};

use crate::api::Api;
use crate::config::{report_path_for, AppConfig};
use crate::http::HttpServer;
use crate::ServiceError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Rows per crop when no dataset is given.
pub const SYNTHETIC_PER_CLASS: usize = 100;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Parser)]
#[command(name = "agritwin", version, about = "Field digital twin: ingest, recommend, simulate, serve")]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a crop recommendation model and write it with its evaluation report.
    Train(TrainArgs),
    /// Print the classification report of a model on a held-out split.
    Evaluate(EvaluateArgs),
    /// Rank crops for a feature vector or a stored field snapshot.
    Recommend(RecommendArgs),
    /// Run a growth scenario and write the result as JSON.
    Simulate(SimulateArgs),
    /// Load a `date,n,p,k,temperature,humidity,ph,rainfall` CSV into a field.
    IngestCsv(IngestArgs),
    /// Serve the JSON API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Labelled CSV (`N,P,K,temperature,humidity,ph,rainfall,label`). A seeded
    /// synthetic set is used when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Split and synthetic-data seed.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    pub test_fraction: f64,
    /// Directory for CSV/JSON plot data.
    #[arg(long)]
    pub plots: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model output path; defaults to the configured model path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = Hyperparams::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = Hyperparams::default().learning_rate)]
    pub lr: f64,
    #[arg(long, default_value_t = Hyperparams::default().l2)]
    pub l2: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    /// Seven comma-separated values: n,p,k,temperature,humidity,ph,rainfall.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "field")]
    pub features: Option<Vec<f64>>,
    /// Stored field to snapshot instead of raw features.
    #[arg(long, requires = "date")]
    pub field: Option<String>,
    #[arg(long)]
    pub date: Option<NaiveDate>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Print the recommendation as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub spec: PathBuf,
    /// Result path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Crop parameter CSV overriding the configured table.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub field: String,
    #[arg(long)]
    pub csv: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: Option<String>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<AppConfig, ServiceError> {
    match path {
        Some(p) => AppConfig::load(p),
        None => Ok(AppConfig::default()),
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), ServiceError> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Train(a) => cmd_train(&config, a, out),
        Command::Evaluate(a) => cmd_evaluate(&config, a, out),
        Command::Recommend(a) => cmd_recommend(&config, a, out),
        Command::Simulate(a) => cmd_simulate(&config, a, out),
        Command::IngestCsv(a) => cmd_ingest(&config, a, out),
        Command::Serve(a) => cmd_serve(config, a, out),
    }
}

/// The labelled data named by `args`, or the synthetic set for its seed.
pub fn load_dataset(args: &DataArgs) -> Result<LabeledDataset, ServiceError> {
    match &args.data {
        Some(p) => Ok(LabeledDataset::from_csv_path(p)?),
        None => Ok(synthetic_dataset(args.seed, SYNTHETIC_PER_CLASS)),
    }
}

fn split(args: &DataArgs) -> Result<(LabeledDataset, LabeledDataset), ServiceError> {
    if !(args.test_fraction > 0.0 && args.test_fraction < 1.0) {
        return Err(ServiceError::Usage(format!(
            "--test-fraction must lie in (0, 1), got {}",
            args.test_fraction
        )));
    }
    let data = load_dataset(args)?;
    Ok(data.stratified_split(args.test_fraction, args.seed))
}

fn write_plots(
    dir: &Path,
    eval: &ModelEvaluation,
    data: &LabeledDataset,
) -> Result<Vec<PathBuf>, ServiceError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    written.extend(emit_plot_data(PlotArtifact::Report(&eval.report), &dir.join("report.csv"))?);
    written.extend(emit_plot_data(PlotArtifact::Confusion(&eval.confusion), &dir.join("confusion.csv"))?);
    written.extend(emit_plot_data(PlotArtifact::Roc(&eval.roc), &dir.join("roc"))?);
    if data.len() >= 2 {
        let corr = pearson_matrix(data)?;
        written.extend(emit_plot_data(PlotArtifact::Correlation(&corr), &dir.join("correlation.csv"))?);
    }
    let hists = FEATURE_NAMES.iter().map(|f| histogram(data, f, 20)).collect::<Result<Vec<_>, _>>()?;
    written.extend(emit_plot_data(PlotArtifact::Histograms(&hists), &dir.join("histograms.csv"))?);
    Ok(written)
}

fn cmd_train(config: &AppConfig, a: TrainArgs, out: &mut dyn Write) -> Result<(), ServiceError> {
    let (train_set, test_set) = split(&a.data)?;
    let hyper = Hyperparams { learning_rate: a.lr, epochs: a.epochs, seed: a.data.seed, l2: a.l2 };
    let model = train(&train_set, &hyper)?;
    let eval = evaluate_model(&model, &test_set)?;
    let path = a.out.unwrap_or_else(|| config.model_path.clone());
    model.save(&path)?;
    let report_path = report_path_for(&path);
    let report = serde_json::to_string_pretty(&eval.report).map_err(|e| ServiceError::Io(e.to_string()))?;
    std::fs::write(&report_path, report)?;
    write!(out, "{}", eval.report.render())?;
    writeln!(out)?;
    writeln!(out, "model: {}", path.display())?;
    writeln!(out, "report: {}", report_path.display())?;
    if let Some(dir) = &a.data.plots {
        let all = LabeledDataset::new(train_set.rows.iter().chain(&test_set.rows).cloned().collect());
        let files = write_plots(dir, &eval, &all)?;
        writeln!(out, "plot files: {}", files.len())?;
    }
    Ok(())
}

fn model_at(path: Option<PathBuf>, config: &AppConfig) -> Result<RecommendationModel, ServiceError> {
    let path = path.unwrap_or_else(|| config.model_path.clone());
    Ok(RecommendationModel::load(path)?)
}

fn cmd_evaluate(config: &AppConfig, a: EvaluateArgs, out: &mut dyn Write) -> Result<(), ServiceError> {
    let model = model_at(a.model, config)?;
    let (_, test_set) = split(&a.data)?;
    let eval = evaluate_model(&model, &test_set)?;
    write!(out, "{}", eval.report.render())?;
    if let Some(dir) = &a.data.plots {
        let files = write_plots(dir, &eval, &test_set)?;
        writeln!(out)?;
        writeln!(out, "plot files: {}", files.len())?;
    }
    Ok(())
}

/// Ranked list, one crop per line.
pub fn render_recommendation(rec: &Recommendation) -> String {
    rec.crops
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}. {} {:.4}\n", i + 1, c.crop, c.probability))
        .collect()
}

fn cmd_recommend(config: &AppConfig, a: RecommendArgs, out: &mut dyn Write) -> Result<(), ServiceError> {
    let vector = match (a.features, a.field, a.date) {
        (Some(values), None, _) => FeatureVector::try_from(values.as_slice())
            .map_err(|e| ServiceError::Usage(format!("--features: {e}")))?,
        (None, Some(field), Some(date)) => {
            let store = TwinStore::open(&config.store_path)?;
            let field = FieldId::new(field)?;
            let policy = SnapshotPolicy { carry_forward: config.carry_forward };
            feature_vector(&store.snapshot(&field, date, policy)?)
        }
        _ => return Err(ServiceError::Usage("give --features or --field with --date".into())),
    };
    let model = model_at(a.model, config)?;
    let rec = recommend_top_k(&model, &vector, a.k.unwrap_or(config.default_top_k))?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string(&rec).map_err(|e| ServiceError::Io(e.to_string()))?)?;
    } else {
        write!(out, "{}", render_recommendation(&rec))?;
    }
    Ok(())
}

fn cmd_simulate(config: &AppConfig, a: SimulateArgs, out: &mut dyn Write) -> Result<(), ServiceError> {
    let text = std::fs::read_to_string(&a.spec)
        .map_err(|e| ServiceError::Io(format!("{}: {e}", a.spec.display())))?;
    let spec: ScenarioSpec =
        serde_json::from_str(&text).map_err(|e| ServiceError::Usage(format!("{}: {e}", a.spec.display())))?;
    let table = match a.params.as_ref().or(config.crop_params_path.as_ref()) {
        Some(p) => CropParamsTable::from_path(p)?,
        None => CropParamsTable::builtin(),
    };
    let result = simulate_with(&spec, &table)?;
    let json = serde_json::to_string_pretty(&result).map_err(|e| ServiceError::Io(e.to_string()))?;
    match a.out {
        Some(p) => std::fs::write(p, json)?,
        None => writeln!(out, "{json}")?,
    }
    Ok(())
}

fn cmd_ingest(config: &AppConfig, a: IngestArgs, out: &mut dyn Write) -> Result<(), ServiceError> {
    let store = TwinStore::open(&config.store_path)?;
    let field = FieldId::new(a.field)?;
    let file =
        std::fs::File::open(&a.csv).map_err(|e| ServiceError::Io(format!("{}: {e}", a.csv.display())))?;
    let n = store.ingest_csv(&field, file)?;
    writeln!(out, "ingested {n} readings into {field}")?;
    Ok(())
}

fn cmd_serve(mut config: AppConfig, a: ServeArgs, out: &mut dyn Write) -> Result<(), ServiceError> {
    if let Some(bind) = a.bind {
        config.bind = bind;
        config.validate()?;
    }
    let api = Arc::new(Api::from_config(&config)?);
    let server = HttpServer::start(api, &config.bind, config.workers)?;
    writeln!(out, "listening on http://{}", server.local_addr())?;
    out.flush()?;
    server.join();
    Ok(())
}
