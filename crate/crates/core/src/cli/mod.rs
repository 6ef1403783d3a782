//! The `kic` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 bot token
//! rejected by the chat platform.

pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::bot::{self, BotApiClient, BotDeps, BotError, FileStore, PollOptions};
use crate::dataset::{build_dataset, write_dataset, SplitFractions};
use crate::eval::{self, BackendSpec, EvalPlan, Reduction};
use crate::generation::{GenerationBackend, HttpBackend, ProtocolServer, StubBackend};
use crate::harvest::{ContainerSelector, HarvestConfig, HarvestRecord, Harvester, Wordlist, DEFAULT_BASE_URL};
use crate::metrics::{BleuConfig, MeteorConfig};
use config::{Settings, UsageError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_AUTH: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kic", version, about = "Keyword-in-context toolkit: harvest, build, evaluate, serve")]
pub struct Cli {
    /// Flat key = value config file; flags and KIC_* env vars override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fetch concordance pages and extract example sentences per keyword
    Harvest(HarvestArgs),
    /// Deduplicate harvested records and split them by keyword
    Build(BuildArgs),
    /// Score generation backends against a dataset split
    Eval(EvalArgs),
    /// Run the vocabulary chat bot (token from BOT_TOKEN, API base from BOT_API_BASE)
    Bot(BotArgs),
    /// Serve the deterministic stub backend over the generation protocol
    ServeStub(ServeStubArgs),
}

#[derive(Debug, Args)]
struct HarvestArgs {
    /// Wordlist file, one word per line
    #[arg(long, value_name = "FILE")]
    wordlist: Option<String>,
    /// Maximum example sentences per keyword [default: 10]
    #[arg(long, value_name = "M")]
    top_m: Option<String>,
    /// Output JSON-lines file of records
    #[arg(long, value_name = "FILE")]
    out: Option<String>,
    /// Skip log file [default: <out> with .skips.jsonl extension]
    #[arg(long, value_name = "FILE")]
    skip_log: Option<String>,
    /// Concordance base URL; the keyword is appended as a path segment
    #[arg(long, value_name = "URL")]
    base_url: Option<String>,
    /// Requests per second across all workers [default: 2]
    #[arg(long, value_name = "RPS")]
    rate_limit: Option<String>,
    /// Per-request timeout in seconds [default: 10]
    #[arg(long, value_name = "SECS")]
    timeout: Option<String>,
    /// Retries for 429, 5xx and transport failures [default: 3]
    #[arg(long, value_name = "N")]
    max_retries: Option<String>,
    /// Keywords fetched concurrently [default: 4]
    #[arg(long, value_name = "N")]
    parallelism: Option<String>,
    /// Example container as element.class [default: div.src]
    #[arg(long, value_name = "SEL")]
    selector: Option<String>,
}

#[derive(Debug, Args)]
struct BuildArgs {
    /// Harvested records (JSON lines)
    #[arg(long = "in", value_name = "FILE")]
    input: Option<String>,
    /// Directory for train/val/test .jsonl and manifest.json
    #[arg(long, value_name = "DIR")]
    out_dir: Option<String>,
    /// Train,val,test fractions [default: 0.8,0.1,0.1]
    #[arg(long, value_name = "A,B,C")]
    splits: Option<String>,
    /// Seed for keyword assignment [default: 0]
    #[arg(long, value_name = "N")]
    seed: Option<String>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Split file to evaluate on (JSON lines of keyword/context pairs)
    #[arg(long, value_name = "FILE")]
    split: Option<String>,
    /// Backend as id=url; repeatable
    #[arg(long, value_name = "ID=URL")]
    backend: Vec<String>,
    /// Also evaluate the built-in stub backend
    #[arg(long)]
    stub: bool,
    /// Directory that receives a timestamped run directory [default: reports]
    #[arg(long, value_name = "DIR")]
    report_dir: Option<String>,
    /// best-of-prompts or mean-of-prompts [default: best-of-prompts]
    #[arg(long, value_name = "POLICY")]
    reduction: Option<String>,
    /// Parameter count for the report table as id=count; repeatable
    #[arg(long, value_name = "ID=N")]
    params: Vec<String>,
    /// Keywords evaluated concurrently per backend [default: 4]
    #[arg(long, value_name = "N")]
    parallelism: Option<String>,
    /// BLEU maximum n-gram order, uniform weights [default: 4]
    #[arg(long, value_name = "N")]
    max_order: Option<String>,
    /// METEOR recall weight in (0,1) [default: 0.9]
    #[arg(long, value_name = "X")]
    alpha: Option<String>,
    /// METEOR fragmentation penalty scale [default: 0.5]
    #[arg(long, value_name = "X")]
    penalty_gamma: Option<String>,
    /// METEOR fragmentation penalty exponent [default: 3]
    #[arg(long, value_name = "X")]
    penalty_beta: Option<String>,
}

#[derive(Debug, Args)]
struct BotArgs {
    /// Profile store file (created if missing)
    #[arg(long, value_name = "FILE")]
    store: Option<String>,
    /// Generation backend base URL
    #[arg(long, value_name = "URL")]
    backend_url: Option<String>,
    /// Use the built-in stub backend instead of --backend-url
    #[arg(long)]
    stub: bool,
    /// Concordance base URL for real-text examples
    #[arg(long, value_name = "URL")]
    harvest_base_url: Option<String>,
    /// Long-poll timeout in seconds [default: 30]
    #[arg(long, value_name = "SECS")]
    poll_timeout: Option<String>,
}

#[derive(Debug, Args)]
struct ServeStubArgs {
    /// Port to listen on; 0 picks a free port [default: 8000]
    #[arg(long, value_name = "PORT")]
    port: Option<String>,
    /// Address to bind [default: 127.0.0.1]
    #[arg(long, value_name = "ADDR")]
    host: Option<String>,
}

const HARVEST_KEYS: &[&str] = &[
    "wordlist", "top_m", "out", "skip_log", "base_url", "rate_limit", "timeout", "max_retries", "parallelism",
    "selector",
];
const BUILD_KEYS: &[&str] = &["in", "out_dir", "splits", "seed"];
const EVAL_KEYS: &[&str] = &[
    "split", "backend", "stub", "report_dir", "reduction", "params", "parallelism", "max_order", "alpha",
    "penalty_gamma", "penalty_beta",
];
const BOT_KEYS: &[&str] = &["store", "backend_url", "stub", "harvest_base_url", "poll_timeout"];
const SERVE_KEYS: &[&str] = &["port", "host"];

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
    Auth(String),
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.0)
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Help text for `kic <subcommand> --help`, or the top level when `None`.
pub fn help_text(subcommand: Option<&str>) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    match subcommand {
        None => cmd.render_long_help().to_string(),
        Some(name) => cmd
            .find_subcommand_mut(name)
            .map(|c| c.render_long_help().to_string())
            .unwrap_or_default(),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run(args, std::env::vars())
}

/// Like [`main`] with an explicit environment.
pub fn run<I, T, E>(args: I, env: E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    E: IntoIterator<Item = (String, String)>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let env: Vec<(String, String)> = env.into_iter().collect();
    let sub = subcommand_name(&cli.command);
    match dispatch(cli, &env) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, run 'kic {sub} --help'.");
            EXIT_USAGE
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {}", msg.lines().next().unwrap_or(""));
            EXIT_RUNTIME
        }
        Err(CliError::Auth(msg)) => {
            eprintln!("error: {msg}");
            EXIT_AUTH
        }
    }
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Harvest(_) => "harvest",
        Command::Build(_) => "build",
        Command::Eval(_) => "eval",
        Command::Bot(_) => "bot",
        Command::ServeStub(_) => "serve-stub",
    }
}

fn layered(keys: &'static [&'static str], config: Option<&Path>, env: &[(String, String)]) -> Result<Settings, CliError> {
    let mut s = Settings::new(keys);
    if let Some(path) = config {
        s.apply_file(path)?;
    }
    s.apply_env(env.iter().cloned());
    Ok(s)
}

fn dispatch(cli: Cli, env: &[(String, String)]) -> Result<(), CliError> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Harvest(a) => {
            let mut s = layered(HARVEST_KEYS, config, env)?;
            s.set_flag("wordlist", a.wordlist);
            s.set_flag("top_m", a.top_m);
            s.set_flag("out", a.out);
            s.set_flag("skip_log", a.skip_log);
            s.set_flag("base_url", a.base_url);
            s.set_flag("rate_limit", a.rate_limit);
            s.set_flag("timeout", a.timeout);
            s.set_flag("max_retries", a.max_retries);
            s.set_flag("parallelism", a.parallelism);
            s.set_flag("selector", a.selector);
            run_harvest(&s)
        }
        Command::Build(a) => {
            let mut s = layered(BUILD_KEYS, config, env)?;
            s.set_flag("in", a.input);
            s.set_flag("out_dir", a.out_dir);
            s.set_flag("splits", a.splits);
            s.set_flag("seed", a.seed);
            run_build(&s)
        }
        Command::Eval(a) => {
            let mut s = layered(EVAL_KEYS, config, env)?;
            s.set_flag("split", a.split);
            s.set_flag_list("backend", &a.backend);
            s.set_flag_bool("stub", a.stub);
            s.set_flag("report_dir", a.report_dir);
            s.set_flag("reduction", a.reduction);
            s.set_flag_list("params", &a.params);
            s.set_flag("parallelism", a.parallelism);
            s.set_flag("max_order", a.max_order);
            s.set_flag("alpha", a.alpha);
            s.set_flag("penalty_gamma", a.penalty_gamma);
            s.set_flag("penalty_beta", a.penalty_beta);
            run_eval(&s)
        }
        Command::Bot(a) => {
            let mut s = layered(BOT_KEYS, config, env)?;
            s.set_flag("store", a.store);
            s.set_flag("backend_url", a.backend_url);
            s.set_flag_bool("stub", a.stub);
            s.set_flag("harvest_base_url", a.harvest_base_url);
            s.set_flag("poll_timeout", a.poll_timeout);
            run_bot(&s, env)
        }
        Command::ServeStub(a) => {
            let mut s = layered(SERVE_KEYS, config, env)?;
            s.set_flag("port", a.port);
            s.set_flag("host", a.host);
            run_serve_stub(&s)
        }
    }
}

fn run_harvest(s: &Settings) -> Result<(), CliError> {
    let wordlist_path: PathBuf = s.require("wordlist")?;
    let out: PathBuf = s.require("out")?;
    let skip_log = s
        .get::<PathBuf>("skip_log")?
        .unwrap_or_else(|| out.with_extension("skips.jsonl"));
    let defaults = HarvestConfig::default();
    let config = HarvestConfig {
        top_m: s.get_or("top_m", defaults.top_m)?,
        base_url: s.get_or("base_url", DEFAULT_BASE_URL.to_string())?,
        rate_limit: s.get_or("rate_limit", defaults.rate_limit)?,
        timeout: Duration::from_secs_f64(s.get_or("timeout", defaults.timeout.as_secs_f64())?.max(0.0)),
        max_retries: s.get_or("max_retries", defaults.max_retries)?,
        parallelism: s.get_or("parallelism", defaults.parallelism)?,
        container: s.get_or("selector", ContainerSelector::default())?,
        ..defaults
    };
    config.validate().map_err(usage)?;

    let wordlist = Wordlist::from_file(&wordlist_path).map_err(runtime)?;
    let harvester = Harvester::new(config).map_err(usage)?;
    let output = harvester.harvest(&wordlist).map_err(runtime)?;
    crate::jsonl::write_file(&out, &output.records).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    crate::jsonl::write_file(&skip_log, &output.skipped)
        .map_err(|e| runtime(format!("{}: {e}", skip_log.display())))?;
    eprintln!(
        "harvested {} records for {} keywords ({} skipped)",
        output.records.len(),
        wordlist.len(),
        output.skipped.len()
    );
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<HarvestRecord>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| runtime(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        records.push(record);
    }
    Ok(records)
}

fn run_build(s: &Settings) -> Result<(), CliError> {
    let fractions: SplitFractions = s.get_or("splits", SplitFractions::default())?;
    let seed: u64 = s.get_or("seed", 0)?;
    let input: PathBuf = s.require("in")?;
    let out_dir: PathBuf = s.require("out_dir")?;
    let records = read_records(&input)?;
    let (dataset, manifest) = build_dataset(&records, fractions, seed).map_err(runtime)?;
    write_dataset(&out_dir, &dataset, &manifest).map_err(runtime)?;
    eprintln!(
        "built {} pairs over {} keywords: train {}, val {}, test {}",
        manifest.counts.total(),
        manifest.n_keywords,
        manifest.counts.train,
        manifest.counts.val,
        manifest.counts.test
    );
    Ok(())
}

fn parse_params(entries: &[String]) -> Result<BTreeMap<String, u64>, CliError> {
    entries
        .iter()
        .map(|e| {
            let (id, n) = e
                .split_once('=')
                .ok_or_else(|| usage(format!("params entry {e:?} must look like id=count")))?;
            let n = n
                .trim()
                .parse::<u64>()
                .map_err(|_| usage(format!("params entry {e:?} has a non-integer count")))?;
            Ok((id.trim().to_string(), n))
        })
        .collect()
}

fn run_eval(s: &Settings) -> Result<(), CliError> {
    let split: PathBuf = s.require("split")?;
    let mut backends: Vec<BackendSpec> = s
        .list("backend")
        .iter()
        .map(|b| b.parse::<BackendSpec>().map_err(usage))
        .collect::<Result<_, _>>()?;
    if s.flag("stub")? {
        backends.insert(0, BackendSpec::stub());
    }
    if backends.is_empty() {
        return Err(usage("at least one --backend or --stub is required"));
    }
    let params = parse_params(&s.list("params"))?;
    let bleu_cfg = BleuConfig::uniform(s.get_or("max_order", 4usize)?).map_err(usage)?;
    let defaults = MeteorConfig::default();
    let meteor_cfg = MeteorConfig::new(
        s.get_or("alpha", defaults.alpha())?,
        s.get_or("penalty_gamma", defaults.penalty_gamma())?,
        s.get_or("penalty_beta", defaults.penalty_beta())?,
    )
    .map_err(usage)?;
    let plan = EvalPlan {
        bleu_cfg,
        meteor_cfg,
        reduction: s.get_or("reduction", Reduction::default())?,
        parallelism: s.get_or("parallelism", 4usize)?.max(1),
        ..EvalPlan::new(split, backends)
    };
    let report_dir: PathBuf = s.get_or("report_dir", PathBuf::from("reports"))?;

    let outcome = eval::evaluate(&plan).map_err(runtime)?;
    let run_dir = eval::write_run(&report_dir, &outcome, &params).map_err(runtime)?;
    let rendered = eval::render_report(&outcome.reports, &params);
    let mut stdout = std::io::stdout().lock();
    let _ = write!(stdout, "{}", rendered.text);
    let _ = writeln!(stdout, "report written to {}", run_dir.display());
    for f in &outcome.failures {
        eprintln!("backend {} failed: {}", f.backend_id, f.error);
    }
    if outcome.reports.is_empty() {
        return Err(runtime("every backend failed"));
    }
    Ok(())
}

fn run_bot(s: &Settings, env: &[(String, String)]) -> Result<(), CliError> {
    let lookup = |name: &str| env.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone());
    let token = lookup("BOT_TOKEN")
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| usage("BOT_TOKEN must be set"))?;
    let api_base = lookup("BOT_API_BASE").unwrap_or_else(|| bot::DEFAULT_API_BASE.to_string());
    let store_path: PathBuf = s.require("store")?;
    let backend: Box<dyn GenerationBackend> = match (s.flag("stub")?, s.get::<String>("backend_url")?) {
        (true, _) => Box::new(StubBackend),
        (false, Some(url)) => Box::new(HttpBackend::new("backend", url)),
        (false, None) => return Err(usage("one of --backend-url or --stub is required")),
    };
    let harvester = Harvester::new(HarvestConfig {
        top_m: bot::EXAMPLES_PER_REPLY,
        base_url: s.get_or("harvest_base_url", DEFAULT_BASE_URL.to_string())?,
        max_retries: 1,
        ..HarvestConfig::default()
    })
    .map_err(usage)?;
    let options = PollOptions {
        poll_timeout: Duration::from_secs(s.get_or("poll_timeout", 30u64)?),
        ..PollOptions::default()
    };

    let store = FileStore::open(store_path).map_err(runtime)?;
    let client = BotApiClient::new(&api_base, &token, options.poll_timeout).map_err(usage)?;
    let shutdown = Arc::new(AtomicBool::new(false));
    {
        let shutdown = shutdown.clone();
        let _ = ctrlc::set_handler(move || shutdown.store(true, Ordering::SeqCst));
    }
    let deps = BotDeps { backend: backend.as_ref(), examples: &harvester, store: &store };
    match bot::poll_loop(&client, &deps, &options, &shutdown) {
        Ok(()) => Ok(()),
        Err(e @ BotError::Auth(_)) => Err(CliError::Auth(e.to_string())),
        Err(e) => Err(runtime(e)),
    }
}

fn run_serve_stub(s: &Settings) -> Result<(), CliError> {
    let port: u16 = s.get_or("port", 8000)?;
    let host: String = s.get_or("host", "127.0.0.1".to_string())?;
    let server = ProtocolServer::start(Arc::new(StubBackend), &format!("{host}:{port}"), 4).map_err(runtime)?;
    println!("listening on {}", server.base_url());
    let _ = std::io::stdout().flush();
    let (tx, rx) = std::sync::mpsc::channel();
    let _ = ctrlc::set_handler(move || {
        let _ = tx.send(());
    });
    let _ = rx.recv();
    server.shutdown();
    Ok(())
}
