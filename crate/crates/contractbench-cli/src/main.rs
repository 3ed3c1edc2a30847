//! Command-line pipeline for docstring-to-contract benchmarking: ingest a
//! task bundle, sample contracts, validate them with verification-guided
//! checks, and render metric reports.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use contractbench::client::{ClientError, LiveConfig};
use contractbench::harness::HarnessError;
use contractbench::model::PromptKind;
use contractbench::runtime::{PythonRuntime, RuntimeError};

use contractbench_cli::bundle;
use contractbench_cli::pipeline::{self, RunConfig, VerifierChoice};
use contractbench_cli::records::{RecordStore, RunRecord};

#[derive(Parser)]
#[command(
    name = "contractbench",
    about = "Infer functional contracts from docstrings and validate them against reference implementations and mutants",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GenerateArgs {
    /// Task bundle (JSONL, one task per line).
    #[arg(long)]
    bundle: PathBuf,
    /// Output directory for run records and reports.
    #[arg(long)]
    out: PathBuf,
    /// Model identifiers, comma separated or repeated.
    #[arg(long, value_delimiter = ',', default_value = "replay-model")]
    models: Vec<String>,
    /// Prompt kinds to run.
    #[arg(long, value_delimiter = ',', default_values = ["nl2contract", "nl2postcond"])]
    prompts: Vec<PromptKind>,
    /// Samples per (task, model, prompt).
    #[arg(long, default_value_t = 10)]
    n_samples: usize,
    #[arg(long, default_value_t = 0.7)]
    temperature: f64,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Completion store directory; defaults to <out>/replay.
    #[arg(long)]
    replay_store: Option<PathBuf>,
    /// Chat-completions endpoint URL; omit to run purely from the store.
    #[arg(long)]
    live_endpoint: Option<String>,
    /// Environment variable holding the API key for live sampling.
    #[arg(long, default_value = "CONTRACTBENCH_API_KEY")]
    api_key_env: String,
    /// Provider rate limit, requests per minute.
    #[arg(long)]
    requests_per_minute: Option<u32>,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    /// Skip work already present in the record store.
    #[arg(long)]
    resume: bool,
}

#[derive(Args, Clone)]
struct ValidateArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Verifier backend: exhaustive (built-in oracle) or crosshair.
    #[arg(long, default_value = "exhaustive")]
    backend: VerifierChoice,
    /// Also drive the search-based tester (requires pynguin).
    #[arg(long)]
    tester: bool,
    /// Per-candidate soundness budget, seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout_soundness: f64,
    /// Per-mutant completeness budget, seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout_mutant: f64,
    /// Search budget for the tester, seconds.
    #[arg(long, default_value_t = 600.0)]
    tester_budget: f64,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long)]
    resume: bool,
}

#[derive(Args, Clone)]
struct ReportArgs {
    /// Directory holding run records (an <out> directory or its records/).
    #[arg(long)]
    runs: PathBuf,
    /// Bundle used for task ordering; optional.
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long, default_value = "table")]
    format: String,
    /// k values for sound@k / accept@k.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10])]
    ks: Vec<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a bundle: schemas, sources, and reference semantics.
    IngestCheck {
        #[arg(long)]
        bundle: PathBuf,
        /// Skip executing reference implementations against test inputs.
        #[arg(long)]
        skip_exec: bool,
    },
    /// Sample completions and shape-check candidates.
    Generate(GenerateArgs),
    /// Run verification-guided validation over generated candidates.
    Validate(ValidateArgs),
    /// Render metric reports from run records.
    Report(ReportArgs),
    /// Full pipeline: generate, validate, report.
    Run {
        #[command(flatten)]
        generate: GenerateArgs,
        #[command(flatten)]
        validate: ValidateOnlyArgs,
        /// k values for sound@k / accept@k.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10])]
        ks: Vec<usize>,
    },
}

/// Validation flags without the bundle/out duplicates of [`GenerateArgs`].
#[derive(Args, Clone)]
struct ValidateOnlyArgs {
    #[arg(long, default_value = "exhaustive")]
    backend: VerifierChoice,
    #[arg(long)]
    tester: bool,
    #[arg(long, default_value_t = 60.0)]
    timeout_soundness: f64,
    #[arg(long, default_value_t = 60.0)]
    timeout_mutant: f64,
    #[arg(long, default_value_t = 600.0)]
    tester_budget: f64,
}

fn live_config(args: &GenerateArgs) -> Option<LiveConfig> {
    args.live_endpoint.as_ref().map(|endpoint| {
        let mut config = LiveConfig::new(endpoint.clone(), args.api_key_env.clone());
        config.requests_per_minute = args.requests_per_minute;
        config
    })
}

fn run_config(generate: &GenerateArgs, validate: &ValidateOnlyArgs, ks: &[usize]) -> RunConfig {
    RunConfig {
        bundle_path: generate.bundle.clone(),
        out_dir: generate.out.clone(),
        models: generate.models.clone(),
        prompt_kinds: generate.prompts.clone(),
        n_samples: generate.n_samples,
        temperature: generate.temperature,
        max_tokens: generate.max_tokens,
        seed: generate.seed,
        verifier: validate.backend,
        tester_enabled: validate.tester,
        timeout_soundness: Duration::from_secs_f64(validate.timeout_soundness),
        timeout_mutant: Duration::from_secs_f64(validate.timeout_mutant),
        tester_budget: Duration::from_secs_f64(validate.tester_budget),
        concurrency: generate.concurrency.max(1),
        resume: generate.resume,
        replay_dir: generate
            .replay_store
            .clone()
            .unwrap_or_else(|| generate.out.join("replay")),
        live: live_config(generate),
        ks: ks.to_vec(),
    }
}

/// Records may live in <runs> or <runs>/records.
fn locate_records(runs: &Path) -> PathBuf {
    let nested = runs.join("records");
    if nested.is_dir() {
        nested
    } else {
        runs.to_path_buf()
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(error) => {
            eprintln!("error: {error:#}");
            std::process::exit(exit_code(&error));
        }
    }
}

/// 1 for user/configuration errors, 2 for backend failures.
fn exit_code(error: &anyhow::Error) -> i32 {
    for cause in error.chain() {
        if let Some(harness) = cause.downcast_ref::<HarnessError>() {
            if matches!(harness, HarnessError::Backend { .. }) {
                return 2;
            }
        }
        if cause.downcast_ref::<RuntimeError>().is_some() {
            return 2;
        }
        if let Some(client) = cause.downcast_ref::<ClientError>() {
            if matches!(
                client,
                ClientError::Provider { .. } | ClientError::Transport(_)
            ) {
                return 2;
            }
        }
    }
    1
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::IngestCheck { bundle, skip_exec } => {
            let runtime = PythonRuntime::new();
            let tasks = bundle::ingest_bundle(&bundle, &runtime, !skip_exec)?;
            let mutants: usize = tasks.iter().map(|t| t.task.mutants.len()).sum();
            println!(
                "bundle ok: {} task(s), {} mutant(s), {} with enumeration domains",
                tasks.len(),
                mutants,
                tasks.iter().filter(|t| t.domain.is_some()).count()
            );
            Ok(())
        }
        Command::Generate(args) => {
            let cfg = run_config(
                &args,
                &ValidateOnlyArgs {
                    backend: VerifierChoice::Exhaustive,
                    tester: false,
                    timeout_soundness: 60.0,
                    timeout_mutant: 60.0,
                    tester_budget: 600.0,
                },
                &[1, 5, 10],
            );
            if cfg.live.is_some() {
                let store = contractbench::client::ReplayStore::open(&cfg.replay_dir)?;
                contractbench::client::CompletionClient::live(
                    store,
                    cfg.live.clone().expect("live config"),
                )?;
            }
            let runtime = PythonRuntime::new();
            let tasks = bundle::ingest_bundle(&cfg.bundle_path, &runtime, true)?;
            let store = RecordStore::open(cfg.records_dir())?;
            let existing = load_existing(&store, cfg.resume)?;
            let generated = pipeline::generate_stage(&cfg, &tasks, &store, &existing)?;
            println!(
                "generated {} candidate(s) ({} shape-conformant)",
                generated.candidates.len(),
                generated.candidates.iter().filter(|c| c.shape_ok).count()
            );
            Ok(())
        }
        Command::Validate(args) => {
            let cfg = RunConfig {
                bundle_path: args.bundle.clone(),
                out_dir: args.out.clone(),
                models: vec![],
                prompt_kinds: vec![],
                n_samples: 0,
                temperature: 0.0,
                max_tokens: None,
                seed: None,
                verifier: args.backend,
                tester_enabled: args.tester,
                timeout_soundness: Duration::from_secs_f64(args.timeout_soundness),
                timeout_mutant: Duration::from_secs_f64(args.timeout_mutant),
                tester_budget: Duration::from_secs_f64(args.tester_budget),
                concurrency: args.concurrency.max(1),
                resume: true,
                replay_dir: args.out.join("replay"),
                live: None,
                ks: vec![1, 5, 10],
            };
            let runtime = PythonRuntime::new();
            let tasks = bundle::ingest_bundle(&cfg.bundle_path, &runtime, true)?;
            let store = RecordStore::open(cfg.records_dir())?;
            let records = store.load_all()?;
            if records.is_empty() {
                anyhow::bail!(
                    "no candidate records under {}; run `generate` first",
                    cfg.records_dir().display()
                );
            }
            let candidates = pipeline::rebuild_candidates(&records);
            // Validation always keys off the record store; --resume is
            // accepted for symmetry with the other stages.
            let _ = args.resume;
            let existing: HashMap<String, RunRecord> =
                records.into_iter().map(|r| (r.key(), r)).collect();
            pipeline::validate_stage(&cfg, &tasks, &candidates, &store, &existing)?;
            println!("validated {} candidate(s)", candidates.len());
            Ok(())
        }
        Command::Report(args) => {
            let store = RecordStore::open(locate_records(&args.runs))?;
            let records = store.load_all()?;
            if records.is_empty() {
                anyhow::bail!("no records under {}", args.runs.display());
            }
            let tasks = match &args.bundle {
                Some(path) => {
                    let runtime = PythonRuntime::new();
                    Some(bundle::ingest_bundle(path, &runtime, false)?)
                }
                None => None,
            };
            let out_dir = if args.runs.join("records").is_dir() {
                args.runs.clone()
            } else {
                args.runs
                    .parent()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| args.runs.clone())
            };
            let table = pipeline::report_stage(&records, tasks.as_deref(), &args.ks, &out_dir)?;
            let format: contractbench::metrics::ReportFormat =
                args.format.parse().map_err(anyhow::Error::msg)?;
            match format {
                contractbench::metrics::ReportFormat::TableText => print!("{table}"),
                other => {
                    let rebuilt = std::fs::read_to_string(match other {
                        contractbench::metrics::ReportFormat::Csv => out_dir.join("report.csv"),
                        _ => out_dir.join("report.json"),
                    })?;
                    print!("{rebuilt}");
                }
            }
            Ok(())
        }
        Command::Run {
            generate,
            validate,
            ks,
        } => {
            let cfg = run_config(&generate, &validate, &ks);
            let table = pipeline::run_pipeline(&cfg)?;
            print!("{table}");
            Ok(())
        }
    }
}

fn load_existing(store: &RecordStore, resume: bool) -> anyhow::Result<HashMap<String, RunRecord>> {
    if !resume {
        if store.has_any_records() {
            anyhow::bail!(
                "record store {} is not empty; pass --resume to continue",
                store.dir().display()
            );
        }
        return Ok(HashMap::new());
    }
    Ok(store
        .load_all()?
        .into_iter()
        .map(|r| (r.key(), r))
        .collect())
}
