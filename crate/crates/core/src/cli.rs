//! The `bias-probe` command line: generate manifests, run backends, classify
//! completions and aggregate reports, each stage reading the previous stage's
//! files under one output directory.
//!
//! ```text
//! <out>/manifests/<experiment>.jsonl
//! <out>/manifests/generate.json
//! <out>/runs/<backend>/<experiment>.jsonl
//! <out>/classifications/<backend>/<experiment>.jsonl
//! <out>/reports/<experiment>.csv, <experiment>_long.csv, summary.json
//! ```

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backends::{
    run_batch, Backend, BackendSpec, BatchOptions, CompletionRecord, HttpBackend, RateLimiter, ReplayBackend,
    RetryPolicy, SyntheticBackend,
};
use crate::classify::{classify_all, Classification};
use crate::corpus::{filter_by_solution_length, load_problems, CodeProblem};
use crate::jsonl;
use crate::report::{aggregate, to_json, write_csv, write_long_csv};
use crate::sandbox::SandboxClient;
use crate::transforms::anchoring::{anchoring_prompts, AnchoringConfig, MAX_ANCHOR_LINES};
use crate::transforms::arithmetic::{attribute_prompts, matheq_prompts};
use crate::transforms::deletion::deletion_prompts;
use crate::transforms::framing::framing_prompts;
use crate::transforms::gpt3::{gpt3_anchoring_prompts, gpt3_framing_prompts, STANDARD_P};
use crate::transforms::{
    read_manifest, validate_manifest, write_manifest, DeletionStyle, Experiment, FramingLine, MathOrder, MathStyle,
    Placement, TransformError, TransformedPrompt,
};

pub const DEFAULT_FAILURE_BUDGET: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "bias-probe", version, about = "Generate, run, classify and report failure-elicitation probes")]
pub struct Cli {
    /// TOML file with defaults for any flag; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one probe manifest per selected experiment.
    Generate(StageArgs),
    /// Query backends for every probe in the manifests.
    Run(StageArgs),
    /// Execute and classify completions.
    Classify(StageArgs),
    /// Aggregate classifications into tables.
    Report(StageArgs),
    /// generate, run, classify and report in sequence.
    All(StageArgs),
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageArgs {
    /// Problem file (JSON lines, optionally gzip-compressed).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Experiments to include (repeatable or comma-separated; `all` for every one).
    #[arg(long = "experiment", value_delimiter = ',')]
    #[serde(default, alias = "experiment")]
    pub experiments: Vec<String>,
    /// synthetic:<profile>, replay:<store> or http:<model>@<url> (repeatable).
    #[arg(long = "backend")]
    #[serde(default, alias = "backend")]
    pub backends: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue an interrupted run, keeping completed records.
    #[arg(long)]
    #[serde(default)]
    pub resume: bool,
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Per-request timeout for HTTP backends, in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Command starting the execution runner, e.g. "python3 runner.py".
    #[arg(long)]
    pub sandbox: Option<String>,
    /// Fraction of failed requests tolerated before `run` exits with status 3.
    #[arg(long)]
    pub failure_budget: Option<f64>,
    /// Requests per minute cap for each backend.
    #[arg(long)]
    pub requests_per_minute: Option<usize>,
    /// Base delay for exponential retry backoff, in milliseconds.
    #[arg(long)]
    pub retry_base_ms: Option<u64>,
    /// Canonical-line counts for anchoring (default 0..=8).
    #[arg(long = "n-lines", value_delimiter = ',')]
    #[serde(default)]
    pub n_lines: Vec<usize>,
    /// Adjustment percentages for numeric anchoring (default 20,50).
    #[arg(long = "p", value_delimiter = ',')]
    #[serde(default)]
    pub p: Vec<u32>,
    /// Accept adjustment percentages other than 20 and 50.
    #[arg(long)]
    #[serde(default)]
    pub allow_nonstandard_p: bool,
}

impl StageArgs {
    /// Fills every unset field from `file`.
    fn merged_with(self, file: StageArgs) -> StageArgs {
        fn pick<T>(a: Option<T>, b: Option<T>) -> Option<T> {
            a.or(b)
        }
        fn pick_vec<T>(a: Vec<T>, b: Vec<T>) -> Vec<T> {
            if a.is_empty() {
                b
            } else {
                a
            }
        }
        StageArgs {
            corpus: pick(self.corpus, file.corpus),
            experiments: pick_vec(self.experiments, file.experiments),
            backends: pick_vec(self.backends, file.backends),
            seed: pick(self.seed, file.seed),
            out: pick(self.out, file.out),
            resume: self.resume || file.resume,
            parallelism: pick(self.parallelism, file.parallelism),
            timeout: pick(self.timeout, file.timeout),
            sandbox: pick(self.sandbox, file.sandbox),
            failure_budget: pick(self.failure_budget, file.failure_budget),
            requests_per_minute: pick(self.requests_per_minute, file.requests_per_minute),
            retry_base_ms: pick(self.retry_base_ms, file.retry_base_ms),
            n_lines: pick_vec(self.n_lines, file.n_lines),
            p: pick_vec(self.p, file.p),
            allow_nonstandard_p: self.allow_nonstandard_p || file.allow_nonstandard_p,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("{failed} of {total} requests failed for {backend}, over the {budget} failure budget")]
    BudgetExceeded {
        backend: String,
        failed: usize,
        total: usize,
        budget: f64,
    },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Failed(_) => 1,
            CliError::MissingInput(_) => 2,
            CliError::BudgetExceeded { .. } => 3,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub experiments: Vec<Experiment>,
    pub backends: Vec<BackendSpec>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub resume: bool,
    pub parallelism: usize,
    pub timeout: Duration,
    pub sandbox: Option<String>,
    pub failure_budget: f64,
    pub requests_per_minute: Option<usize>,
    pub retry_base: Duration,
    pub n_lines: Vec<usize>,
    pub p: Vec<u32>,
    pub allow_nonstandard_p: bool,
}

fn parse_experiments(names: &[String]) -> Result<Vec<Experiment>, CliError> {
    let mut out = Vec::new();
    for name in names {
        let name = name.trim();
        if name == "all" {
            out.extend_from_slice(Experiment::ALL);
        } else if !name.is_empty() {
            out.push(name.parse().map_err(CliError::Usage)?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

impl RunConfig {
    pub fn resolve(args: StageArgs, config_file: Option<&Path>) -> Result<Self, CliError> {
        let args = match config_file {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
                let file: StageArgs =
                    toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
                args.merged_with(file)
            }
            None => args,
        };
        let backends = args
            .backends
            .iter()
            .map(|b| b.parse().map_err(CliError::Usage))
            .collect::<Result<_, _>>()?;
        let failure_budget = args.failure_budget.unwrap_or(DEFAULT_FAILURE_BUDGET);
        if !(0.0..=1.0).contains(&failure_budget) {
            return Err(CliError::Usage(format!("failure budget {failure_budget} outside [0, 1]")));
        }
        let timeout = args.timeout.unwrap_or(60.0);
        if !(timeout > 0.0 && timeout.is_finite()) {
            return Err(CliError::Usage(format!("timeout {timeout} must be positive")));
        }
        if args.parallelism == Some(0) {
            return Err(CliError::Usage("parallelism must be at least 1".into()));
        }
        if args.requests_per_minute == Some(0) {
            return Err(CliError::Usage("requests per minute must be at least 1".into()));
        }
        Ok(Self {
            corpus: args.corpus,
            experiments: parse_experiments(&args.experiments)?,
            backends,
            seed: args.seed,
            out: args.out.unwrap_or_else(|| PathBuf::from("bias-probe-out")),
            resume: args.resume,
            parallelism: args.parallelism.unwrap_or(4),
            timeout: Duration::from_secs_f64(timeout),
            sandbox: args.sandbox,
            failure_budget,
            requests_per_minute: args.requests_per_minute,
            retry_base: Duration::from_millis(args.retry_base_ms.unwrap_or(500)),
            n_lines: if args.n_lines.is_empty() {
                (0..=MAX_ANCHOR_LINES).collect()
            } else {
                args.n_lines
            },
            p: if args.p.is_empty() { STANDARD_P.to_vec() } else { args.p },
            allow_nonstandard_p: args.allow_nonstandard_p,
        })
    }

    fn manifest_path(&self, e: Experiment) -> PathBuf {
        self.out.join("manifests").join(format!("{e}.jsonl"))
    }

    fn run_path(&self, backend: &str, e: Experiment) -> PathBuf {
        self.out.join("runs").join(backend).join(format!("{e}.jsonl"))
    }

    fn classification_path(&self, backend: &str, e: Experiment) -> PathBuf {
        self.out.join("classifications").join(backend).join(format!("{e}.jsonl"))
    }

    fn reports_dir(&self) -> PathBuf {
        self.out.join("reports")
    }

    fn require_experiments(&self) -> Result<(), CliError> {
        if self.experiments.is_empty() {
            return Err(CliError::Usage("no experiments selected (use --experiment)".into()));
        }
        Ok(())
    }

    fn require_backends(&self) -> Result<(), CliError> {
        if self.backends.is_empty() {
            return Err(CliError::Usage("no backend selected (use --backend)".into()));
        }
        Ok(())
    }
}

/// Directory name for a backend's stores.
pub fn backend_slug(spec: &BackendSpec) -> String {
    let raw = match spec {
        BackendSpec::Synthetic(p) => format!("synthetic-{p}"),
        BackendSpec::Replay(path) => format!(
            "replay-{}",
            Path::new(path).file_stem().and_then(|s| s.to_str()).unwrap_or("store")
        ),
        BackendSpec::Http { model, .. } => format!("http-{model}"),
    };
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

/// Whether the experiment's probes are built from corpus problems.
pub fn needs_corpus(e: Experiment) -> bool {
    matches!(e, Experiment::Framing | Experiment::Anchoring)
}

/// Whether the experiment samples randomly and therefore needs a seed.
pub fn needs_seed(e: Experiment) -> bool {
    matches!(e, Experiment::Framing | Experiment::Deletion)
}

/// Parameters for [`generate_experiment`].
#[derive(Debug, Clone)]
pub struct GenerateSettings {
    pub seed: u64,
    pub n_lines: Vec<usize>,
    pub p: Vec<u32>,
    pub allow_nonstandard_p: bool,
}

impl Default for GenerateSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            n_lines: (0..=MAX_ANCHOR_LINES).collect(),
            p: STANDARD_P.to_vec(),
            allow_nonstandard_p: false,
        }
    }
}

/// Every probe of one experiment, in manifest order.
pub fn generate_experiment(
    e: Experiment,
    problems: &[CodeProblem],
    s: &GenerateSettings,
) -> Result<Vec<TransformedPrompt>, TransformError> {
    let mut out = Vec::new();
    match e {
        Experiment::Framing => out = framing_prompts(problems, FramingLine::ALL, s.seed)?,
        Experiment::Anchoring => {
            let cfg = AnchoringConfig {
                n_lines: s.n_lines.clone(),
                ..AnchoringConfig::default()
            };
            out = anchoring_prompts(problems, &cfg)?;
        }
        Experiment::MathEq => {
            for &style in MathStyle::ALL {
                for &order in MathOrder::ALL {
                    out.extend(matheq_prompts(order, style));
                }
            }
        }
        Experiment::Attribute => {
            for &placement in Placement::ALL {
                out.extend(attribute_prompts(placement));
            }
        }
        Experiment::Deletion => {
            for &style in DeletionStyle::ALL {
                out.extend(deletion_prompts(style, s.seed));
            }
        }
        Experiment::Gpt3Anchoring => {
            for &p in &s.p {
                out.extend(gpt3_anchoring_prompts(p, s.allow_nonstandard_p)?);
            }
        }
        Experiment::Gpt3Framing => out = gpt3_framing_prompts(),
    }
    Ok(out)
}

/// Run metadata written next to the manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateInfo {
    pub corpus_sha256: Option<String>,
    pub seed: Option<u64>,
    pub cardinalities: BTreeMap<String, usize>,
}

fn corpus_hash(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::MissingInput(format!("corpus {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn load_corpus(cfg: &RunConfig, required: bool) -> Result<Vec<CodeProblem>, CliError> {
    match &cfg.corpus {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::MissingInput(format!("corpus {}", path.display())));
            }
            load_problems(path).map_err(failed)
        }
        None if required => Err(CliError::Usage(
            "the selected experiments need a corpus (use --corpus)".into(),
        )),
        None => Ok(vec![]),
    }
}

pub fn generate(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.require_experiments()?;
    let problems = load_corpus(cfg, cfg.experiments.iter().any(|&e| needs_corpus(e)))?;
    if cfg.experiments.iter().any(|&e| needs_seed(e)) && cfg.seed.is_none() {
        return Err(CliError::Usage("the selected experiments sample randomly; pass --seed".into()));
    }
    let settings = GenerateSettings {
        seed: cfg.seed.unwrap_or(0),
        n_lines: cfg.n_lines.clone(),
        p: cfg.p.clone(),
        allow_nonstandard_p: cfg.allow_nonstandard_p,
    };
    let mut manifests = Vec::new();
    for &e in &cfg.experiments {
        let probes = generate_experiment(e, &problems, &settings).map_err(|err| CliError::Usage(err.to_string()))?;
        validate_manifest(&probes).map_err(failed)?;
        manifests.push((e, probes));
    }
    for (e, probes) in &manifests {
        let path = cfg.manifest_path(*e);
        let encoded = jsonl::encode(probes);
        if let Ok(existing) = fs::read(&path) {
            if existing != encoded.as_bytes() {
                return Err(CliError::Usage(format!(
                    "{} exists with different content; use a fresh --out",
                    path.display()
                )));
            }
        }
    }
    let mut cardinalities = BTreeMap::new();
    for (e, probes) in &manifests {
        write_manifest(&cfg.manifest_path(*e), probes).map_err(failed)?;
        cardinalities.insert(e.to_string(), probes.len());
        writeln!(out, "{e}: {} probes", probes.len()).map_err(failed)?;
        if *e == Experiment::Anchoring {
            writeln!(out, "  n_lines  problems").map_err(failed)?;
            for &n in &cfg.n_lines {
                writeln!(out, "  {n:>7}  {:>8}", filter_by_solution_length(&problems, n).len()).map_err(failed)?;
            }
        }
    }
    let info = GenerateInfo {
        corpus_sha256: cfg.corpus.as_deref().map(corpus_hash).transpose()?,
        seed: cfg.seed,
        cardinalities,
    };
    let info_path = cfg.out.join("manifests").join("generate.json");
    let mut merged = read_generate_info(&info_path).unwrap_or(GenerateInfo {
        cardinalities: BTreeMap::new(),
        ..info.clone()
    });
    merged.corpus_sha256 = info.corpus_sha256.or(merged.corpus_sha256);
    merged.seed = info.seed.or(merged.seed);
    merged.cardinalities.extend(info.cardinalities);
    let text = serde_json::to_string_pretty(&merged).map_err(failed)? + "\n";
    jsonl::write_bytes(&info_path, text.as_bytes()).map_err(failed)?;
    Ok(())
}

fn read_generate_info(path: &Path) -> Option<GenerateInfo> {
    serde_json::from_slice(&fs::read(path).ok()?).ok()
}

fn load_manifest(cfg: &RunConfig, e: Experiment) -> Result<Vec<TransformedPrompt>, CliError> {
    let path = cfg.manifest_path(e);
    read_manifest(&path).map_err(|err| {
        if err.is_not_found() {
            CliError::MissingInput(format!("manifest {} (run `generate` first)", path.display()))
        } else {
            failed(err)
        }
    })
}

fn build_backend(spec: &BackendSpec, cfg: &RunConfig, problems: &[CodeProblem]) -> Result<Box<dyn Backend>, CliError> {
    Ok(match spec {
        BackendSpec::Synthetic(profile) => Box::new(SyntheticBackend::new(*profile, problems)),
        BackendSpec::Replay(path) => {
            let path = Path::new(path);
            if !path.exists() {
                return Err(CliError::MissingInput(format!("replay store {}", path.display())));
            }
            Box::new(ReplayBackend::load(path).map_err(failed)?)
        }
        BackendSpec::Http { model, endpoint } => Box::new(HttpBackend::new(model, endpoint, cfg.timeout)),
    })
}

pub fn run(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.require_experiments()?;
    cfg.require_backends()?;
    let manifests: Vec<_> = cfg
        .experiments
        .iter()
        .map(|&e| load_manifest(cfg, e).map(|m| (e, m)))
        .collect::<Result<_, _>>()?;
    let problems = load_corpus(cfg, false)?;
    let mut over_budget = None;
    for spec in &cfg.backends {
        let backend = build_backend(spec, cfg, &problems)?;
        let slug = backend_slug(spec);
        let opts = BatchOptions {
            parallelism: cfg.parallelism,
            retry: RetryPolicy {
                attempts: 5,
                base_delay: cfg.retry_base,
            },
            limiter: cfg.requests_per_minute.map(|n| Arc::new(RateLimiter::per_minute(n))),
            resume: cfg.resume,
        };
        let (mut failed_total, mut total) = (0, 0);
        for (e, probes) in &manifests {
            let store = cfg.run_path(&slug, *e);
            let summary = run_batch(probes, backend.as_ref(), &store, &opts).map_err(|err| match err {
                crate::backends::RunError::Exists(p) => {
                    CliError::Usage(format!("{p} already exists; pass --resume or use a fresh --out"))
                }
                other => failed(other),
            })?;
            writeln!(
                out,
                "{slug} {e}: {} records ({} reused, {} requested, {} failed)",
                summary.total, summary.reused, summary.requested, summary.failed
            )
            .map_err(failed)?;
            failed_total += summary.failed;
            total += summary.total;
        }
        if total > 0 && failed_total as f64 > cfg.failure_budget * total as f64 && over_budget.is_none() {
            over_budget = Some(CliError::BudgetExceeded {
                backend: backend.id(),
                failed: failed_total,
                total,
                budget: cfg.failure_budget,
            });
        }
    }
    over_budget.map_or(Ok(()), Err)
}

fn backend_slugs(cfg: &RunConfig, stage_dir: &str) -> Result<Vec<String>, CliError> {
    if !cfg.backends.is_empty() {
        return Ok(cfg.backends.iter().map(backend_slug).collect());
    }
    let dir = cfg.out.join(stage_dir);
    let mut slugs: Vec<String> = fs::read_dir(&dir)
        .map_err(|_| CliError::MissingInput(format!("{} (run the previous stage first)", dir.display())))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    slugs.sort();
    if slugs.is_empty() {
        return Err(CliError::MissingInput(format!("no backend outputs under {}", dir.display())));
    }
    Ok(slugs)
}

pub fn classify(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.require_experiments()?;
    let slugs = backend_slugs(cfg, "runs")?;
    let problems = load_corpus(cfg, cfg.experiments.iter().any(|&e| needs_corpus(e)))?;
    let sandbox = cfg
        .sandbox
        .as_deref()
        .map(|cmd| SandboxClient::from_command_line(cmd).map(|c| c.with_parallelism(cfg.parallelism)))
        .transpose()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if sandbox.is_none() && cfg.experiments.iter().any(|e| e.is_code()) {
        return Err(CliError::Usage("code experiments need --sandbox".into()));
    }
    for slug in &slugs {
        for &e in &cfg.experiments {
            let probes = load_manifest(cfg, e)?;
            let store = cfg.run_path(slug, e);
            let records: Vec<CompletionRecord> = jsonl::read_all(&store).map_err(|err| {
                if err.is_not_found() {
                    CliError::MissingInput(format!("run store {} (run `run` first)", store.display()))
                } else {
                    failed(err)
                }
            })?;
            let classes = classify_all(&probes, &records, &problems, sandbox.as_ref()).map_err(failed)?;
            jsonl::write_all(&cfg.classification_path(slug, e), &classes).map_err(failed)?;
            writeln!(out, "{slug} {e}: {} classified", classes.len()).map_err(failed)?;
        }
    }
    Ok(())
}

pub fn report(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.require_experiments()?;
    let slugs = backend_slugs(cfg, "classifications")?;
    let info = read_generate_info(&cfg.out.join("manifests").join("generate.json"));
    let mut reports = serde_json::Map::new();
    let mut backends = Vec::new();
    for &e in &cfg.experiments {
        let probes = load_manifest(cfg, e)?;
        let mut classes: Vec<Classification> = Vec::new();
        for slug in &slugs {
            let path = cfg.classification_path(slug, e);
            let mut found: Vec<Classification> = jsonl::read_all(&path).map_err(|err| {
                if err.is_not_found() {
                    CliError::MissingInput(format!("classifications {} (run `classify` first)", path.display()))
                } else {
                    failed(err)
                }
            })?;
            classes.append(&mut found);
        }
        for c in &classes {
            if !backends.contains(&c.backend) {
                backends.push(c.backend.clone());
            }
        }
        let rep = aggregate(e, &probes, &classes).map_err(failed)?;
        let dir = cfg.reports_dir();
        write_csv(&rep, &dir.join(format!("{e}.csv"))).map_err(failed)?;
        write_long_csv(&rep, &dir.join(format!("{e}_long.csv"))).map_err(failed)?;
        reports.insert(e.to_string(), to_json(&rep));
        writeln!(out, "{e}: {} rows -> {}", rep.rows.len(), dir.join(format!("{e}.csv")).display()).map_err(failed)?;
    }
    backends.sort();
    let summary = serde_json::json!({
        "corpus_sha256": info.as_ref().and_then(|i| i.corpus_sha256.clone()),
        "seed": info.as_ref().and_then(|i| i.seed),
        "backends": backends,
        "cardinalities": info.map(|i| i.cardinalities).unwrap_or_default(),
        "reports": reports,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(failed)? + "\n";
    jsonl::write_bytes(&cfg.reports_dir().join("summary.json"), text.as_bytes()).map_err(failed)?;
    Ok(())
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let config = cli.config.clone();
    let (args, stage) = match cli.command {
        Command::Generate(a) => (a, "generate"),
        Command::Run(a) => (a, "run"),
        Command::Classify(a) => (a, "classify"),
        Command::Report(a) => (a, "report"),
        Command::All(a) => (a, "all"),
    };
    let cfg = RunConfig::resolve(args, config.as_deref())?;
    match stage {
        "generate" => generate(&cfg, out),
        "run" => run(&cfg, out),
        "classify" => classify(&cfg, out),
        "report" => report(&cfg, out),
        _ => {
            generate(&cfg, out)?;
            // A budget overrun still leaves complete stores; finish the
            // pipeline and report the overrun at the end.
            let budget = match run(&cfg, out) {
                Err(e @ CliError::BudgetExceeded { .. }) => Some(e),
                other => {
                    other?;
                    None
                }
            };
            classify(&cfg, out)?;
            report(&cfg, out)?;
            budget.map_or(Ok(()), Err)
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
