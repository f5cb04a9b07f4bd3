//! `turtle-synth`: synthesis, evaluation, model fitting and corpus tools.
//!
//! Exit codes: 0 success, 2 usage error, 3 invalid input, 4 runtime failure.

mod files;
mod manifest;

use std::net::SocketAddr;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use turtle_synth::corpus::{corpus_fingerprint, load_corpus, save_corpus};
use turtle_synth::engine::{self, SynthesisRequest};
use turtle_synth::eval::{aggregate, run_plan, write_report, EvalPlan};
use turtle_synth::models::ModelFile;
use turtle_synth::search::{DEFAULT_BUDGET, DEFAULT_COST};
use turtle_synth::{
    generate_synthetic_corpus, hausdorff, interpret, replay, Algorithm, ArgumentMode, CommandModel, RenderConfig,
    SyntheticSpec,
};
use turtle_synth_service::ServiceConfig;

use crate::manifest::RunManifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Validation(_) => "validation",
            CliError::Runtime(_) => "runtime",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "turtle-synth",
    version,
    about = "Complete and repair turtle block programs from a drawing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Args, serde::Serialize)]
struct RenderArgs {
    /// Distance covered by one Move block.
    #[arg(long, default_value_t = 50.0)]
    move_length: f64,
    /// Spacing of sampled points along drawn segments.
    #[arg(long, default_value_t = 5.0)]
    sample_step: f64,
}

impl RenderArgs {
    fn config(&self) -> Result<RenderConfig, CliError> {
        if !(self.move_length > 0.0 && self.sample_step > 0.0 && self.sample_step <= self.move_length) {
            return Err(CliError::Usage(
                "--move-length and --sample-step must be positive with sample step <= move length".into(),
            ));
        }
        Ok(RenderConfig {
            move_length: self.move_length,
            sample_step: self.sample_step,
        })
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search for a program close to a drawn trajectory.
    Synth(SynthArgs),
    /// Run the k-ahead evaluation over a corpus.
    Eval(EvalArgs),
    /// Fit a command model on a corpus.
    Fit(FitArgs),
    /// Validate or generate corpora.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Print the Hausdorff distance between two trajectory files.
    Dist {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        render: RenderArgs,
    },
    /// Draw a program and write its trajectory.
    Render {
        #[arg(long)]
        program: PathBuf,
        /// Output `.traj` file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        render: RenderArgs,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_parser = parse_algorithm)]
    algo: Algorithm,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long, default_value_t = DEFAULT_COST)]
    cost: usize,
    /// Required for the sampling algorithms.
    #[arg(long)]
    seed: Option<u64>,
    /// The current program (`.cmds`).
    #[arg(long)]
    program: PathBuf,
    /// The drawn trajectory (`.traj`).
    #[arg(long)]
    target: PathBuf,
    /// Command model (from `fit`) for the sampling algorithms; a flat
    /// model is used when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    render: RenderArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated list of idps, uniform, nonuniform.
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm, default_value = "idps,uniform,nonuniform")]
    algos: Vec<Algorithm>,
    /// A single k, a range such as `1..6`, or a comma-separated list.
    #[arg(long, value_parser = parse_ks, default_value = "1..6")]
    k: KList,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long, default_value_t = DEFAULT_COST)]
    cost: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Command model; fitted on the corpus when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    render: RenderArgs,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Argument mode recorded in the model file.
    #[arg(long, value_enum, default_value_t = ModeArg::Nonuniform)]
    mode: ModeArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Uniform,
    Nonuniform,
}

impl From<ModeArg> for ArgumentMode {
    fn from(m: ModeArg) -> ArgumentMode {
        match m {
            ModeArg::Uniform => ArgumentMode::Uniform,
            ModeArg::Nonuniform => ArgumentMode::Nonuniform,
        }
    }
}

#[derive(Debug, Subcommand)]
enum CorpusCommand {
    /// Check that every item parses and replays.
    Validate { dir: PathBuf },
    /// Write a synthetic corpus of random programs and their drawings.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Standard deviation of the Gaussian jitter added to each point.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 3)]
        min_blocks: usize,
        #[arg(long, default_value_t = 7)]
        max_blocks: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        render: RenderArgs,
    },
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "TURTLE_SYNTH_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "TURTLE_SYNTH_HOST", default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "TURTLE_SYNTH_MAX_BUDGET", default_value_t = DEFAULT_BUDGET)]
    max_budget: usize,
    #[arg(long, env = "TURTLE_SYNTH_MAX_COST", default_value_t = DEFAULT_COST)]
    max_cost: usize,
    /// Concurrent synthesis jobs.
    #[arg(long, env = "TURTLE_SYNTH_WORKERS", default_value_t = 2)]
    workers: usize,
    /// Seconds a job result is kept.
    #[arg(long, default_value_t = 600)]
    job_ttl: u64,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Browser origin allowed to call the API; repeatable. Any origin when omitted.
    #[arg(long)]
    allow_origin: Vec<String>,
}

#[derive(Debug, Clone, serde::Serialize)]
#[serde(into = "Vec<usize>")]
struct KList(Vec<usize>);

impl From<KList> for Vec<usize> {
    fn from(k: KList) -> Vec<usize> {
        k.0
    }
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn parse_ks(s: &str) -> Result<KList, String> {
    let bad = || format!("invalid k list {s:?} (examples: 3, 1..6, 1,2,4)");
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let ks: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let range: RangeInclusive<usize> = num(a)?..=num(b.trim_start_matches('='))?;
        range.collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if ks.is_empty() {
        return Err(bad());
    }
    Ok(KList(ks))
}

fn load_model(path: &Path) -> Result<CommandModel, CliError> {
    let text = files::read_text(path)?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    CommandModel::try_from(file).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serialisable output")
}

fn require_seed(seed: Option<u64>, why: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Usage(format!("--seed is required {why}")))
}

fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let seed = if args.algo.is_sampling() {
        require_seed(args.seed, "for sampling algorithms")?
    } else {
        args.seed.unwrap_or(0)
    };
    let cfg = args.render.config()?;
    let req = SynthesisRequest {
        commands: files::read_command_lines(&args.program)?,
        trajectory: files::read_trajectory(&args.target)?.points,
        algorithm: args.algo,
        budget: args.budget,
        cost: args.cost,
        seed,
        move_length: cfg.move_length,
        sample_step: cfg.sample_step,
    };
    let model = match &args.model {
        Some(p) => load_model(p)?,
        None => CommandModel::default(),
    };
    let prepared = engine::prepare(&req).map_err(|e| CliError::Validation(e.to_string()))?;
    let resp = engine::run_prepared(&prepared, &model, args.workers.max(1));
    let mut text = to_json(&resp);
    text.push('\n');
    files::write_text(&args.out, &text)?;
    let best = resp.candidates.last().expect("at least one candidate");
    println!(
        "distance {} after {} edits, {} states, {:.3}s",
        best.distance,
        best.delta.len(),
        resp.states,
        resp.elapsed
    );

    let mut params = serde_json::to_value(&req).expect("serialisable request");
    if let Some(obj) = params.as_object_mut() {
        obj.remove("commands");
        obj.remove("trajectory");
        obj.insert("workers".into(), json!(args.workers));
    }
    let mut m = RunManifest::new("synth", params);
    m.seed(seed);
    m.input(&args.program)?;
    m.input(&args.target)?;
    if let Some(p) = &args.model {
        m.input(p)?;
    }
    m.output(&args.out);
    m.write_beside(&args.out)
}

fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let seed = if args.algos.iter().any(|a| a.is_sampling()) {
        require_seed(args.seed, "when sampling algorithms are evaluated")?
    } else {
        args.seed.unwrap_or(0)
    };
    let cfg = args.render.config()?;
    let items = load_corpus(&args.corpus).map_err(|e| CliError::Validation(e.to_string()))?;
    if items.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: corpus is empty",
            args.corpus.display()
        )));
    }
    let model = match &args.model {
        Some(p) => load_model(p)?,
        None => CommandModel::fit(
            &items.iter().map(|it| it.commands.clone()).collect::<Vec<_>>(),
            ArgumentMode::Nonuniform,
        ),
    };
    let plan = EvalPlan {
        algorithms: args.algos.clone(),
        ks: args.k.0.clone(),
        budget: args.budget,
        cost: args.cost,
        seed,
        workers: args.workers.max(1),
    };
    if plan.budget == 0 || plan.cost == 0 {
        return Err(CliError::Usage("--budget and --cost must be at least 1".into()));
    }
    let results = run_plan(&items, &plan, &model, &cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    let summary = aggregate(&results)
        .ok_or_else(|| CliError::Validation("no (item, k) pair is evaluable: every item is shorter than k".into()))?;
    let outputs = write_report(&args.out, &results, &summary).map_err(|e| CliError::Runtime(e.to_string()))?;
    for row in &summary.rows {
        println!(
            "{:<10} k={} n={:<3} acc={:.3} err={:.3} delta={:.3} runtime={:.3}s",
            row.algorithm.name(),
            row.k,
            row.n,
            row.mean_acc,
            row.mean_err,
            row.mean_delta,
            row.mean_runtime
        );
    }
    println!("baseline err={:.3}", summary.baseline_mean_err);

    let mut m = RunManifest::new(
        "eval",
        json!({
            "corpus": &args.corpus,
            "algorithms": &args.algos,
            "k": &args.k,
            "budget": args.budget,
            "cost": args.cost,
            "workers": args.workers,
            "render": &args.render,
            "model": args.model.as_ref().map_or_else(|| json!("fitted on corpus"), |p| json!(p)),
        }),
    );
    m.seed(seed);
    m.fingerprint("corpus", corpus_fingerprint(&items));
    if let Some(p) = &args.model {
        m.input(p)?;
    }
    for o in &outputs {
        m.output(o);
    }
    m.write_into(&args.out)
}

fn fit(args: &FitArgs) -> Result<(), CliError> {
    let items = load_corpus(&args.corpus).map_err(|e| CliError::Validation(e.to_string()))?;
    let seqs: Vec<_> = items.iter().map(|it| it.commands.clone()).collect();
    let model = CommandModel::fit(&seqs, args.mode.into());
    let fingerprint = corpus_fingerprint(&items);
    let mut text = serde_json::to_string_pretty(&model.to_file(&fingerprint)).expect("serialisable model");
    text.push('\n');
    files::write_text(&args.out, &text)?;
    println!(
        "fitted on {} items: lambda_last={:.4} lambda_next_to_last={:.4}",
        items.len(),
        model.args.lambda_last,
        model.args.lambda_next_to_last
    );
    let mut m = RunManifest::new("fit", json!({ "corpus": &args.corpus, "mode": args.mode }));
    m.fingerprint("corpus", fingerprint);
    m.output(&args.out);
    m.write_beside(&args.out)
}

fn corpus(cmd: &CorpusCommand) -> Result<(), CliError> {
    match cmd {
        CorpusCommand::Validate { dir } => {
            let items = load_corpus(dir).map_err(|e| CliError::Validation(e.to_string()))?;
            println!("{} items ok, fingerprint {}", items.len(), corpus_fingerprint(&items));
            Ok(())
        }
        CorpusCommand::Generate {
            n,
            seed,
            noise,
            min_blocks,
            max_blocks,
            out,
            render,
        } => {
            let seed = require_seed(*seed, "to generate a corpus")?;
            if min_blocks > max_blocks || *min_blocks == 0 {
                return Err(CliError::Usage("need 1 <= --min-blocks <= --max-blocks".into()));
            }
            if !(*noise >= 0.0 && noise.is_finite()) {
                return Err(CliError::Usage("--noise must be a non-negative number".into()));
            }
            let spec = SyntheticSpec {
                seed,
                min_blocks: *min_blocks,
                max_blocks: *max_blocks,
                noise: *noise,
            };
            let items = generate_synthetic_corpus(&spec, *n, &render.config()?);
            let paths = save_corpus(out, &items).map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("wrote {} items to {}", items.len(), out.display());
            let mut m = RunManifest::new("corpus generate", json!({ "spec": spec, "n": n, "render": render }));
            m.seed(seed);
            m.fingerprint("corpus", corpus_fingerprint(&items));
            for p in &paths {
                m.output(p);
            }
            m.write_beside(out)
        }
    }
}

fn dist(a: &Path, b: &Path, render: &RenderArgs) -> Result<(), CliError> {
    let cfg = render.config()?;
    let prepare = |p: &Path| {
        let t = files::read_trajectory(p)?;
        if t.is_empty() {
            return Err(CliError::Validation(format!("{}: trajectory is empty", p.display())));
        }
        Ok(t.densified(cfg.sample_step).distinct_points())
    };
    let d = hausdorff(&prepare(a)?, &prepare(b)?).map_err(|e| CliError::Validation(e.to_string()))?;
    println!("{d}");
    Ok(())
}

fn render(program: &Path, out: Option<&Path>, render: &RenderArgs) -> Result<(), CliError> {
    let cfg = render.config()?;
    let commands = files::read_commands(program)?;
    let w = replay(&commands).map_err(|e| CliError::Validation(format!("{}: {e}", program.display())))?;
    let text = files::format_trajectory(&interpret(&w, &cfg));
    match out {
        None => print!("{text}"),
        Some(path) => {
            files::write_text(path, &text)?;
            let mut m = RunManifest::new("render", json!({ "program": program, "render": render }));
            m.input(program)?;
            m.output(path);
            m.write_beside(path)?;
        }
    }
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let model = match &args.model {
        Some(p) => load_model(p)?,
        None => CommandModel::default(),
    };
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad listen address: {e}")))?;
    let config = ServiceConfig {
        max_budget: args.max_budget,
        max_cost: args.max_cost,
        workers: args.workers.max(1),
        job_ttl: std::time::Duration::from_secs(args.job_ttl),
        model,
        allowed_origins: (!args.allow_origin.is_empty()).then(|| args.allow_origin.clone()),
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("serving on http://{addr}");
    rt.block_on(turtle_synth_service::serve(addr, config))
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a),
        Command::Fit(a) => fit(a),
        Command::Corpus(c) => corpus(c),
        Command::Dist { a, b, render: r } => dist(a, b, r),
        Command::Render {
            program,
            out,
            render: r,
        } => render(program, out.as_deref(), r),
        Command::Serve(a) => serve(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(e.code())
        }
    }
}
