//! `rehabxai`: generate synthetic data, train and evaluate models, dump
//! explanations, analyze study logs, and run the HTTP service.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure.

mod text;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rehabxai_core::dataset::{dataset_from_json, generate_synthetic, loso_splits, save_dataset, SynthConfig};
use rehabxai_core::explain::{
    build_embedding_space, explain_case, AttributionMode, ComponentInputs, ExplainOptions, Metric,
    NeighborEmbeddingParams, ProjectionMethod, Representation, SpaceKind, DEFAULT_K,
};
use rehabxai_core::model::{
    evaluate_loso_on, fold_model, grid_search, Grid, GridSearchResult, LabeledSet, LosoOptions,
};
use rehabxai_core::study::{analyze_events, parse_events, render_report, Condition};
use rehabxai_core::{Component, Dataset, Error, LosoReport, ModelConfig};

#[derive(Parser)]
#[command(name = "rehabxai", version, about = "Motion-quality assessment with example- and feature-based explanations")]
struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Store directory for `serve`.
    #[arg(long, global = true, env = rehabxai_service::STORE_ENV)]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Generate {
        #[arg(long, default_value_t = 15)]
        subjects: usize,
        #[arg(long, default_value_t = 10)]
        trials_per_side: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate with leave-one-subject-out, fit on all data, and save the model.
    Train {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-one-subject-out evaluation only.
    Evaluate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Explanation payload for one case, both components.
    Explain(ExplainArgs),
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 2)]
        workers: usize,
    },
    /// Performance and reliance tables from a JSONL assessment log.
    Analyze {
        #[arg(long)]
        sessions: PathBuf,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    component: Component,
    /// Search layers × units × learning rate before the final evaluation.
    #[arg(long)]
    grid: bool,
    #[arg(long)]
    epochs: Option<usize>,
    /// Train folds on all cores.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    case: String,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
    #[arg(long, default_value = "projected_2d")]
    space: SpaceKind,
    #[arg(long, default_value = "neighbor_embedding")]
    method: ProjectionMethod,
    #[arg(long, default_value = "EXAMPLES_FEATURES")]
    condition: Condition,
    /// Use sampled attributions with this many permutations.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    parallel: bool,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Diverged { .. } | Error::NonConvergence(_) | Error::Geometry(_) => {
                Failure::Runtime(e.to_string())
            }
            _ => Failure::Validation(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Inputs that cannot be read are the caller's mistake, not a runtime fault.
fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Dataset, Failure> {
    Ok(dataset_from_json(&read_input(path)?)?)
}

fn emit<T: Serialize>(value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct GenerateSummary {
    path: PathBuf,
    subjects: usize,
    trials: usize,
    seed: u64,
}

fn generate(cli: &Cli, subjects: usize, trials_per_side: u32, out: &Path) -> Outcome {
    if subjects == 0 {
        return Err(Failure::Validation("--subjects must be at least 1".into()));
    }
    let config = SynthConfig { n_subjects: subjects, trials_per_side, ..Default::default() };
    let d = generate_synthetic(&config, cli.seed)?;
    save_dataset(&d, out)?;
    let summary =
        GenerateSummary { path: out.to_path_buf(), subjects: d.subjects.len(), trials: d.trials.len(), seed: cli.seed };
    if cli.json {
        emit(&summary)
    } else {
        println!("wrote {} trials from {} subjects to {}", summary.trials, summary.subjects, out.display());
        Ok(())
    }
}

#[derive(Serialize)]
struct ModelReport {
    component: Component,
    config: ModelConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridSearchResult>,
    loso: LosoReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_path: Option<PathBuf>,
}

fn train_or_evaluate(cli: &Cli, args: &ModelArgs, out: Option<&Path>) -> Outcome {
    let d = load(&args.data)?;
    let set = LabeledSet::from_dataset(&d, args.component)?;
    let splits = loso_splits(&d)?;
    let mut config = ModelConfig::default_for(args.component).with_seed(cli.seed);
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    config.validate()?;
    let options = LosoOptions { parallel: args.parallel };
    let grid = if args.grid { Some(grid_search(&set, &Grid::full(), &splits, &config, options)?) } else { None };
    if let Some(g) = &grid {
        config = g.best.clone();
    }
    let loso = evaluate_loso_on(&set, &splits, &config, options)?;
    if let Some(path) = out {
        let model = set.fit_all(&config)?;
        fs::write(path, model.to_json()?)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    let report = ModelReport { component: args.component, config, grid, loso, model_path: out.map(Path::to_path_buf) };
    if cli.json {
        emit(&report)
    } else {
        print!("{}", text::model_report(&report.config, report.grid.as_ref(), &report.loso, out));
        Ok(())
    }
}

struct Built {
    set: LabeledSet,
    model: rehabxai_core::TrainedModel,
    space: rehabxai_core::explain::EmbeddingSpace,
    loso: LosoReport,
    case_model: rehabxai_core::TrainedModel,
}

fn explain(cli: &Cli, args: &ExplainArgs) -> Outcome {
    let d = load(&args.data)?;
    let trial = d.trial(&args.case).ok_or_else(|| Failure::Validation(format!("unknown case `{}`", args.case)))?;
    let subject = trial.subject_id.clone();
    let splits = loso_splits(&d)?;
    let params = NeighborEmbeddingParams { seed: cli.seed, ..Default::default() };
    let options = LosoOptions { parallel: args.parallel };
    let mut built = Vec::new();
    for c in Component::ALL {
        let set = LabeledSet::from_dataset(&d, c)?;
        let config = ModelConfig::default_for(c).with_seed(cli.seed);
        let loso = evaluate_loso_on(&set, &splits, &config, options)?;
        let model = set.fit_all(&config)?;
        let space = build_embedding_space(&model, c.as_str(), &set, args.method, Representation::FirstHidden, &params)?;
        let case_model = fold_model(&set, &splits, &subject, &config)?;
        built.push(Built { set, model, space, loso, case_model });
    }
    let inputs: Vec<ComponentInputs> = built
        .iter()
        .zip(Component::ALL)
        .map(|(b, c)| ComponentInputs {
            model_id: c.as_str(),
            set: &b.set,
            space_model: &b.model,
            space: &b.space,
            loso: &b.loso,
            case_model: &b.case_model,
        })
        .collect();
    let attribution = match args.samples {
        Some(n_permutations) => AttributionMode::Sampled { n_permutations, seed: cli.seed },
        None => AttributionMode::Exact,
    };
    let options = ExplainOptions {
        k: args.k,
        metric: args.metric,
        space: args.space,
        include_examples: args.condition.shows_examples(),
        attribution,
    };
    let payload = explain_case(&d, &args.case, &inputs[0], &inputs[1], &options)?;
    if cli.json {
        emit(&payload)
    } else {
        print!("{}", text::explanation(&payload));
        Ok(())
    }
}

fn analyze(cli: &Cli, sessions: &Path) -> Outcome {
    let events = parse_events(&read_input(sessions)?)?;
    let report = analyze_events(&events)?;
    if cli.json {
        emit(&report)
    } else {
        print!("{}", render_report(&report));
        Ok(())
    }
}

fn serve(cli: &Cli, port: u16, workers: usize) -> Outcome {
    let root = cli
        .store
        .clone()
        .ok_or_else(|| Failure::Validation(format!("serve needs --store or {}", rehabxai_service::STORE_ENV)))?;
    if workers == 0 {
        return Err(Failure::Validation("--workers must be at least 1".into()));
    }
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let mut config = rehabxai_service::ServiceConfig::new(root);
    config.port = port;
    config.seed = cli.seed;
    config.workers = workers;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    rt.block_on(rehabxai_service::serve(config)).map_err(|e| Failure::Runtime(e.to_string()))
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Generate { subjects, trials_per_side, out } => generate(cli, *subjects, *trials_per_side, out),
        Command::Train { model, out } => train_or_evaluate(cli, model, Some(out)),
        Command::Evaluate { model } => train_or_evaluate(cli, model, None),
        Command::Explain(args) => explain(cli, args),
        Command::Serve { port, workers } => serve(cli, *port, *workers),
        Command::Analyze { sessions } => analyze(cli, sessions),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
