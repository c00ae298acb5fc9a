use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use rankroute::analysis::regression_report;
use rankroute::estimation::{
    fit_marginal, models_in_records, train_provider, FitConfig, TrainConfig,
};
use rankroute::formats::{
    parse_prompts, parse_table, parse_votes, Anchor, CategoryFile, LeaderboardDoc,
};
use rankroute::providers::{FeatureLinearProvider, HashingFeaturizer, DEFAULT_FEATURE_DIM};
use rankroute::simulation::Scenario;
use rankroute::{Error, FeedbackKind, ModelCatalog};

use crate::api::{render, Engine, PromptInput, RouteRequest};
use crate::config::ServiceConfig;
use crate::provider_spec::{ProviderSpec, RemoteOptions};
use crate::service;

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or arguments: exit 1.
    Usage(String),
    /// Unreadable or invalid input data: exit 2.
    Data(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "rankroute",
    version,
    about = "Prompt-conditional leaderboards and cost-aware routing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a marginal leaderboard to pairwise votes.
    Fit(FitArgs),
    /// Train a hashed-feature linear provider on votes.
    Train(TrainArgs),
    /// Aggregate per-prompt leaderboards over a set of prompts.
    Aggregate(AggregateArgs),
    /// Pick a model for one prompt under a cost budget.
    Route(RouteArgs),
    /// Per-category regression report against a reference model.
    Analyze(AnalyzeArgs),
    /// Run a synthetic routing scenario.
    Simulate(SimulateArgs),
    /// Start the HTTP routing service.
    Serve(ServeArgs),
    /// Check an input file and report the first problem.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
pub struct ProviderArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    /// constant | constant:FILE | table:FILE | category:FILE | linear:FILE | remote:URL
    #[arg(long, default_value = "constant")]
    pub provider: String,
    /// Feedback model of a remote provider.
    #[arg(long, default_value = "bt")]
    pub remote_kind: String,
    #[arg(long, default_value_t = 5000)]
    pub remote_timeout_ms: u64,
}

impl ProviderArgs {
    fn engine(&self, default_budget: f64) -> CliResult<Engine> {
        let spec: ProviderSpec = self.provider.parse().map_err(CliError::Usage)?;
        let kind: FeedbackKind = self
            .remote_kind
            .parse()
            .map_err(|e: Error| CliError::Usage(e.to_string()))?;
        let catalog = ModelCatalog::load(&self.catalog).map_err(|e| in_file(&self.catalog, e))?;
        let remote = RemoteOptions {
            kind,
            timeout: std::time::Duration::from_millis(self.remote_timeout_ms),
            ..RemoteOptions::default()
        };
        let provider = spec.load(&catalog, &remote)?;
        Ok(Engine {
            catalog,
            provider,
            default_budget,
        })
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub votes: PathBuf,
    #[arg(long, default_value = "bt")]
    pub kind: String,
    /// sum_zero | fix:MODEL | none (default: none for grounded_rk, else sum_zero)
    #[arg(long)]
    pub anchor: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    /// Fix the model order to a catalog's.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Start from a seeded random point instead of zeros.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub votes: PathBuf,
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long, default_value = "bt")]
    pub kind: String,
    #[arg(long, default_value_t = DEFAULT_FEATURE_DIM)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AggregateArgs {
    /// Prompts JSONL (vote lines are accepted).
    #[arg(long, alias = "votes")]
    pub prompts: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RouteArgs {
    #[arg(long)]
    pub prompt: String,
    #[arg(long)]
    pub prompt_id: Option<String>,
    /// Category path, outermost first; repeat for deeper levels.
    #[arg(long)]
    pub category: Vec<String>,
    /// Expected cost budget; `inf` or omitted for none.
    #[arg(long)]
    pub budget: Option<String>,
    /// Sample from the policy instead of taking its argmax.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub prompts: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[arg(long)]
    pub reference: String,
    /// Models to compare; defaults to every other catalog model.
    #[arg(long, value_delimiter = ',')]
    pub candidates: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub level: usize,
    /// JSON report path; the text table always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario's deployment seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, env = "RANKROUTE_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "RANKROUTE_LISTEN")]
    pub listen: Option<String>,
    /// Used when no config file is given.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub provider: Option<String>,
    #[arg(long)]
    pub budget: Option<f64>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct ValidateArgs {
    #[arg(long)]
    pub votes: Option<PathBuf>,
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub leaderboard: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub categories: Option<PathBuf>,
    #[arg(long)]
    pub linear: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

pub fn run(command: Command) -> CliResult {
    match command {
        Command::Fit(a) => fit(a),
        Command::Train(a) => train(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Route(a) => route(a),
        Command::Analyze(a) => analyze(a),
        Command::Simulate(a) => simulate(a),
        Command::Serve(a) => serve(a),
        Command::Validate(a) => validate(a),
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn in_file(path: &Path, e: Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn emit(out: Option<&Path>, body: &str) -> CliResult {
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Data(e.to_string()))
        }
    }
}

fn parse_kind(s: &str) -> CliResult<FeedbackKind> {
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

fn fit(a: FitArgs) -> CliResult {
    let kind = parse_kind(&a.kind)?;
    let anchor = match &a.anchor {
        Some(s) => s
            .parse::<Anchor>()
            .map_err(|e| CliError::Usage(e.to_string()))?,
        None if kind == FeedbackKind::GroundedRk => Anchor::None,
        None => Anchor::SumZero,
    };
    let records = parse_votes(&read(&a.votes)?).map_err(|e| in_file(&a.votes, e))?;
    let models = match &a.catalog {
        Some(p) => ModelCatalog::load(p)
            .map_err(|e| in_file(p, e))?
            .models()
            .to_vec(),
        None => models_in_records(&records),
    };
    let config = FitConfig {
        l2_regularization: a.l2,
        anchor,
        seed: a.seed,
        ..FitConfig::default()
    };
    let report = fit_marginal(&records, &models, kind, &config)?;
    eprintln!(
        "fit {} votes ({} excluded): nll {:.6} (mean {:.6}), {} iterations, converged: {}",
        records.len(),
        report.excluded,
        report.final_nll,
        report.mean_nll,
        report.iterations,
        report.converged
    );
    let doc = LeaderboardDoc::new(&report.leaderboard, &report.models, Some(&report.anchor));
    emit(a.out.as_deref(), &render(&doc))
}

fn train(a: TrainArgs) -> CliResult {
    let kind = parse_kind(&a.kind)?;
    let catalog = ModelCatalog::load(&a.catalog).map_err(|e| in_file(&a.catalog, e))?;
    let records = parse_votes(&read(&a.votes)?).map_err(|e| in_file(&a.votes, e))?;
    let featurizer = HashingFeaturizer::new(a.dim).map_err(|e| CliError::Usage(e.to_string()))?;
    let init = FeatureLinearProvider::zeros(featurizer, kind, catalog.len())?;
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        l2: a.l2,
        seed: a.seed,
    };
    let trained = train_provider(&records, init, catalog.models(), &config)?;
    if let Some(last) = trained.loss_history.last() {
        eprintln!(
            "trained on {} votes, {} steps, last batch loss {last:.6}",
            records.len(),
            trained.loss_history.len()
        );
    }
    let mut body = trained.provider.to_json_string(catalog.models())?;
    body.push('\n');
    std::fs::write(&a.out, body).map_err(|e| CliError::Data(format!("{}: {e}", a.out.display())))
}

fn prompt_inputs(path: &Path) -> CliResult<Vec<PromptInput>> {
    let prompts = parse_prompts(&read(path)?).map_err(|e| in_file(path, e))?;
    Ok(prompts
        .into_iter()
        .map(|p| PromptInput {
            prompt: p.text,
            prompt_id: p.id,
            category_path: p.category_path,
        })
        .collect())
}

fn aggregate(a: AggregateArgs) -> CliResult {
    let engine = a.provider.engine(f64::INFINITY)?;
    let prompts = prompt_inputs(&a.prompts)?;
    let doc = engine.aggregate(&prompts)?;
    emit(a.out.as_deref(), &render(&doc))
}

fn parse_budget(s: Option<&str>) -> CliResult<Option<f64>> {
    match s {
        None | Some("inf") | Some("none") => Ok(None),
        Some(v) => v
            .parse::<f64>()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("invalid budget `{v}`"))),
    }
}

fn route(a: RouteArgs) -> CliResult {
    let budget = parse_budget(a.budget.as_deref())?;
    let engine = a.provider.engine(f64::INFINITY)?;
    let req = RouteRequest {
        prompt: PromptInput {
            prompt: a.prompt,
            prompt_id: a.prompt_id,
            category_path: (!a.category.is_empty()).then_some(a.category),
        },
        budget: Some(budget),
        seed: a.seed,
    };
    let resp = engine.route(&req)?;
    emit(a.out.as_deref(), &render(&resp))
}

fn analyze(a: AnalyzeArgs) -> CliResult {
    let engine = a.provider.engine(f64::INFINITY)?;
    let prompts = parse_prompts(&read(&a.prompts)?).map_err(|e| in_file(&a.prompts, e))?;
    let models = engine.catalog.models().to_vec();
    let candidates = if a.candidates.is_empty() {
        models
            .iter()
            .filter(|m| **m != a.reference)
            .cloned()
            .collect()
    } else {
        a.candidates
    };
    let report = regression_report(
        engine.provider.as_ref(),
        &models,
        &prompts,
        &candidates,
        &a.reference,
        a.level,
        &FitConfig::default(),
    )?;
    if let Some(out) = &a.out {
        let mut body = report.to_json_string();
        body.push('\n');
        emit(Some(out), &body)?;
    }
    emit(None, &report.render_text())
}

fn simulate(a: SimulateArgs) -> CliResult {
    let mut scenario =
        Scenario::from_json_str(&read(&a.scenario)?).map_err(|e| in_file(&a.scenario, e))?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let result = scenario.run()?;
    emit(a.out.as_deref(), &render(&result))
}

fn serve(a: ServeArgs) -> CliResult {
    let mut config = match &a.config {
        Some(path) => ServiceConfig::load(path).map_err(|e| in_file(path, e))?,
        None => ServiceConfig {
            catalog: a
                .catalog
                .clone()
                .ok_or_else(|| CliError::Usage("serve needs --config or --catalog".into()))?,
            ..ServiceConfig::default()
        },
    };
    if let Some(listen) = a.listen {
        config.listen = listen;
    }
    if let Some(catalog) = a.catalog {
        config.catalog = catalog;
    }
    if let Some(provider) = a.provider {
        config.provider = provider;
    }
    if a.budget.is_some() {
        config.default_budget = a.budget;
    }
    let engine = Arc::new(config.build_engine().map_err(CliError::Data)?);
    init_tracing();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&config.listen)
            .await
            .map_err(|e| CliError::Data(format!("cannot listen on {}: {e}", config.listen)))?;
        let addr = listener.local_addr().map_err(|e| CliError::Data(e.to_string()))?;
        tracing::info!(%addr, models = engine.catalog.len(), provider = %config.provider, "listening");
        let app = service::app(engine, config.max_concurrent_requests, config.request_timeout());
        service::run(listener, app, service::shutdown_signal())
            .await
            .map_err(|e| CliError::Data(e.to_string()))
    })
}

fn init_tracing() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn validate(a: ValidateArgs) -> CliResult {
    let check = |path: &Path, f: &dyn Fn(&str) -> rankroute::Result<String>| -> CliResult {
        let summary = f(&read(path)?).map_err(|e| in_file(path, e))?;
        println!("{}: ok, {summary}", path.display());
        Ok(())
    };
    if let Some(p) = &a.votes {
        check(p, &|t| parse_votes(t).map(|v| format!("{} votes", v.len())))
    } else if let Some(p) = &a.prompts {
        check(p, &|t| {
            parse_prompts(t).map(|v| format!("{} prompts", v.len()))
        })
    } else if let Some(p) = &a.catalog {
        check(p, &|t| {
            ModelCatalog::from_json_str(t).map(|c| format!("{} models", c.len()))
        })
    } else if let Some(p) = &a.leaderboard {
        check(p, &|t| {
            let doc = LeaderboardDoc::from_json_str(t)?;
            doc.leaderboard()?;
            doc.anchor()?;
            Ok(format!(
                "{} leaderboard over {} models",
                doc.kind,
                doc.models.len()
            ))
        })
    } else if let Some(p) = &a.table {
        check(p, &|t| {
            let table = parse_table(t)?;
            rankroute::providers::TableProvider::from_table(table.clone())?;
            Ok(format!("{} entries", table.entries.len()))
        })
    } else if let Some(p) = &a.categories {
        check(p, &|t| {
            CategoryFile::from_json_str(t).map(|c| format!("{} categories", c.categories.len()))
        })
    } else if let Some(p) = &a.linear {
        check(p, &|t| {
            FeatureLinearProvider::from_json_str(t)
                .map(|(_, m)| format!("linear provider over {} models", m.len()))
        })
    } else if let Some(p) = &a.scenario {
        check(p, &|t| {
            Scenario::from_json_str(t).map(|s| format!("{} budgets", s.budgets.len()))
        })
    } else {
        Err(CliError::Usage("nothing to validate".into()))
    }
}
