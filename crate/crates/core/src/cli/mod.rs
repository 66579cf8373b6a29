//! `bsplace` command-line front end. [`run`] parses arguments, dispatches
//! to a subcommand and maps failures onto exit codes: 0 success, 2 config
//! error, 3 runtime error, 4 training divergence.

pub mod config;
pub mod record;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::agent::checkpoint::{self, CheckpointError};
use crate::agent::train::{self, curve_csv, evaluate_policy, Corpus, TrainOptions};
use crate::agent::{act_greedy, AgentError, PolicyParams};
use crate::baselines::{self, BaselineError, Metric, SearchBudget, SearchResult};
use crate::env::Episode;
use crate::metrics::{self, sig6, MetricsError};
use crate::reward::{self, Preset, RewardWeights};
use crate::rng::{self, Fnv64};
use crate::sitemap::{self, Coord, SiteMap, SiteMapError};
use crate::twin::{heatmap, Twin, TwinError};

pub use config::{ConfigError, ExperimentConfig};
pub use record::{RunRecord, RUN_HEADER};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("training diverged: {0}")]
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Diverged(_) => 4,
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    std::io::Error,
    SiteMapError,
    TwinError,
    MetricsError,
    BaselineError,
    CheckpointError,
    reward::RewardError
);

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Config(_) | AgentError::Corpus(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "bsplace", version, about = "Base-station placement with an analytic pathloss twin and a PPO agent")]
pub struct Cli {
    /// Experiment config file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for written artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 = all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Single worker, bit-reproducible outputs.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct MapArgs {
    /// Occupancy raster (binary PGM, buildings >= 128).
    #[arg(long, conflicts_with = "synth")]
    pub map: Option<PathBuf>,
    /// Deployable-set mask (PGM, non-zero = member).
    #[arg(long, requires = "map")]
    pub deployable: Option<PathBuf>,
    /// Receiver-region mask (PGM, non-zero = member).
    #[arg(long, requires = "map")]
    pub receiver: Option<PathBuf>,
    /// Generate a synthetic map from this seed and the config corpus settings.
    #[arg(long)]
    pub synth: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Pathloss heatmap of one transmitter (PGM and PPM).
    Twin {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long)]
        bs: Coord,
    },
    /// Metrics of a given placement list `i:j;i:j`.
    Eval {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long)]
        placements: String,
    },
    /// Uniform random placement.
    Heuristic {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
    },
    /// Full single-BS sweep, or budgeted joint search for n >= 2.
    Exhaustive {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        metric: Option<Metric>,
    },
    /// Sequential greedy sweeps.
    Greedy {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        metric: Option<Metric>,
    },
    /// Train the agent; writes checkpoint.absp and curve.csv.
    Train,
    /// Place base stations with a trained agent.
    Deploy {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare schemes over the test split; writes bench.csv.
    Bench {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train one agent per reward preset; writes ablation.csv.
    AblateRewards,
    /// Write synthetic maps as PGM files.
    GenMaps {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        start: Option<u64>,
    },
}

/// Resolved global settings shared by every subcommand.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: Option<PathBuf>,
    pub workers: usize,
}

impl Context {
    fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn seed(&self) -> u64 {
        self.cfg.ppo.seed
    }

    fn twin(&self) -> Result<Arc<Twin>, CliError> {
        Ok(Arc::new(Twin::with_capacity(self.cfg.radio(), self.cfg.cache_capacity)?))
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Normal output goes to stdout, diagnostics
/// to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("bsplace: {e}");
            e.exit_code()
        }
    }
}

pub fn context(cli: &Cli) -> Result<Context, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text, &path.display().to_string())?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.ppo.seed = seed;
    }
    let workers = if cli.deterministic {
        1
    } else if cli.threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        cli.threads
    };
    Ok(Context { cfg, out: cli.out.clone(), workers })
}

/// Runs a parsed command and returns its stdout text.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    let ctx = context(&cli)?;
    match cli.command {
        Command::Twin { map, bs } => cmd_twin(&ctx, &map, bs),
        Command::Eval { map, placements } => cmd_eval(&ctx, &map, &placements),
        Command::Heuristic { map, n } => {
            single_map_run(&ctx, &map, "heuristic", |twin, m| run_heuristic(&ctx, twin, m, n))
        }
        Command::Exhaustive { map, n, metric } => {
            let metric = metric.unwrap_or(ctx.cfg.metric);
            single_map_run(&ctx, &map, "exhaustive", |twin, m| run_exhaustive(&ctx, twin, m, n, metric, 1))
        }
        Command::Greedy { map, n, metric } => {
            let metric = metric.unwrap_or(ctx.cfg.metric);
            single_map_run(&ctx, &map, "greedy", |twin, m| run_greedy(twin, m, n, metric))
        }
        Command::Train => cmd_train(&ctx),
        Command::Deploy { map, n, checkpoint } => {
            let params = load_params(&ctx, checkpoint.as_deref())?;
            single_map_run(&ctx, &map, "deploy", |twin, m| run_autobs(&params, twin, m, n, 1))
        }
        Command::Bench { checkpoint } => cmd_bench(&ctx, checkpoint.as_deref()),
        Command::AblateRewards => cmd_ablate(&ctx),
        Command::GenMaps { count, start } => cmd_gen_maps(&ctx, count, start),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn load_map(ctx: &Context, args: &MapArgs) -> Result<SiteMap, CliError> {
    match (&args.map, args.synth) {
        (Some(path), _) => {
            let raster = read(path)?;
            let dep = args.deployable.as_deref().map(read).transpose()?;
            let rec = args.receiver.as_deref().map(read).transpose()?;
            Ok(sitemap::load_sitemap(&raster, ctx.cfg.cell_size, dep.as_deref(), rec.as_deref())?)
        }
        (None, Some(seed)) => Ok(sitemap::generate_synthetic(seed, &ctx.cfg.synth_params())?),
        (None, None) => Err(CliError::Config("a map is required: pass --map PATH or --synth SEED".into())),
    }
}

fn load_file_maps(ctx: &Context, files: &[PathBuf]) -> Result<Vec<Arc<SiteMap>>, CliError> {
    files.iter().map(|f| Ok(Arc::new(sitemap::load_sitemap(&read(f)?, ctx.cfg.cell_size, None, None)?))).collect()
}

fn synth_split(ctx: &Context, start: u64, count: usize) -> Result<Vec<Arc<SiteMap>>, CliError> {
    let params = ctx.cfg.synth_params();
    (start..start + count as u64).map(|seed| Ok(Arc::new(sitemap::generate_synthetic(seed, &params)?))).collect()
}

pub fn test_split(ctx: &Context) -> Result<Vec<Arc<SiteMap>>, CliError> {
    if ctx.cfg.test_map_files.is_empty() {
        synth_split(ctx, ctx.cfg.test_seed_start, ctx.cfg.test_maps)
    } else {
        load_file_maps(ctx, &ctx.cfg.test_map_files)
    }
}

pub type Split = Vec<Arc<SiteMap>>;

/// Train and test splits from map files when listed, synthetic seeds otherwise.
pub fn build_corpus(ctx: &Context) -> Result<(Split, Split), CliError> {
    let train = if ctx.cfg.train_map_files.is_empty() {
        synth_split(ctx, ctx.cfg.train_seed_start, ctx.cfg.train_maps)?
    } else {
        load_file_maps(ctx, &ctx.cfg.train_map_files)?
    };
    Ok((train, test_split(ctx)?))
}

fn single_map_run(
    ctx: &Context,
    args: &MapArgs,
    name: &str,
    run: impl FnOnce(&Arc<Twin>, &Arc<SiteMap>) -> Result<RunRecord, CliError>,
) -> Result<String, CliError> {
    let map = Arc::new(load_map(ctx, args)?);
    let twin = ctx.twin()?;
    let rec = run(&twin, &map)?;
    let text = record::csv(&[rec]);
    if ctx.out.is_some() {
        fs::write(ctx.out_dir()?.join(format!("{name}.csv")), &text)?;
    }
    Ok(text)
}

fn record_from(scheme: &str, map: &SiteMap, r: SearchResult, elapsed_s: f64) -> RunRecord {
    RunRecord {
        scheme: scheme.to_string(),
        n_bs: r.placements.len(),
        map_id: map.map_id(),
        placements: r.placements,
        metrics: r.metrics,
        elapsed_s,
        evaluations: r.evaluations,
    }
}

fn run_heuristic(ctx: &Context, twin: &Twin, map: &SiteMap, n: usize) -> Result<RunRecord, CliError> {
    let mut stream = rng::derived(ctx.seed(), map.map_id());
    let t0 = Instant::now();
    let placements = baselines::heuristic_place(map, n, &mut stream)?;
    let elapsed = t0.elapsed().as_secs_f64();
    let m = metrics::evaluate(twin, map, &placements)?;
    Ok(record_from("heuristic", map, SearchResult { placements, metrics: m, evaluations: 0 }, elapsed))
}

/// Median wall time of `repeats` runs; the result of the first run is kept.
fn timed<T>(repeats: usize, mut f: impl FnMut() -> Result<T, CliError>) -> Result<(T, f64), CliError> {
    let mut times = Vec::with_capacity(repeats);
    let mut first = None;
    for _ in 0..repeats.max(1) {
        let t0 = Instant::now();
        let v = f()?;
        times.push(t0.elapsed().as_secs_f64());
        first.get_or_insert(v);
    }
    Ok((first.expect("at least one run"), record::median(&mut times)))
}

fn run_exhaustive(
    ctx: &Context,
    twin: &Twin,
    map: &SiteMap,
    n: usize,
    metric: Metric,
    repeats: usize,
) -> Result<RunRecord, CliError> {
    let scheme = match metric {
        Metric::Coverage => "exhaustive_v",
        Metric::Capacity => "exhaustive_c",
    };
    let budget = SearchBudget { max_evaluations: ctx.cfg.budget, metric, seed: ctx.seed() ^ map.map_id() };
    let (r, elapsed) = timed(repeats, || {
        // cold cache: every candidate pays for its own prediction
        twin.cache().clear();
        Ok(if n == 1 {
            baselines::exhaustive_single(twin, map, metric)?
        } else {
            baselines::exhaustive_multi(twin, map, n, &budget)?
        })
    })?;
    Ok(record_from(scheme, map, r, elapsed))
}

fn run_greedy(twin: &Twin, map: &SiteMap, n: usize, metric: Metric) -> Result<RunRecord, CliError> {
    twin.cache().clear();
    let t0 = Instant::now();
    let r = baselines::greedy_sequential(twin, map, n, metric)?;
    Ok(record_from("greedy", map, r, t0.elapsed().as_secs_f64()))
}

/// Greedy agent rollout. Only the forward passes are timed; the
/// environment steps between them update the observation and are excluded.
pub fn deploy_timed(
    params: &PolicyParams,
    twin: &Arc<Twin>,
    map: &Arc<SiteMap>,
    n: usize,
) -> Result<(Vec<Coord>, f64), CliError> {
    let weights = reward::preset(Preset::CoverageOnly);
    let (mut ep, mut obs) =
        Episode::reset(map.clone(), twin.clone(), n).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut decision = 0.0;
    while !ep.is_done() {
        let t0 = Instant::now();
        let cell = act_greedy(params, &obs)?;
        decision += t0.elapsed().as_secs_f64();
        obs = ep.step(cell, &weights).map_err(|e| CliError::Runtime(e.to_string()))?.observation;
    }
    Ok((ep.placements().to_vec(), decision))
}

fn run_autobs(
    params: &PolicyParams,
    twin: &Arc<Twin>,
    map: &Arc<SiteMap>,
    n: usize,
    repeats: usize,
) -> Result<RunRecord, CliError> {
    if (map.width(), map.height()) != (params.width, params.height) {
        return Err(CliError::Runtime(format!(
            "checkpoint expects {}x{} maps, got {}x{}",
            params.width,
            params.height,
            map.width(),
            map.height()
        )));
    }
    let mut times = Vec::with_capacity(repeats);
    let mut placements = Vec::new();
    for _ in 0..repeats.max(1) {
        let (p, t) = deploy_timed(params, twin, map, n)?;
        placements = p;
        times.push(t);
    }
    let m = metrics::evaluate(twin, map, &placements)?;
    Ok(record_from("autobs", map, SearchResult { placements, metrics: m, evaluations: 0 }, record::median(&mut times)))
}

fn load_params(ctx: &Context, flag: Option<&Path>) -> Result<PolicyParams, CliError> {
    let path = flag
        .map(Path::to_path_buf)
        .or_else(|| ctx.cfg.checkpoint.clone())
        .ok_or_else(|| CliError::Config("no checkpoint given (--checkpoint or `checkpoint =`)".into()))?;
    Ok(checkpoint::load_checkpoint(&path)?.0)
}

fn cmd_twin(ctx: &Context, args: &MapArgs, bs: Coord) -> Result<String, CliError> {
    let map = load_map(ctx, args)?;
    if !map.in_bounds(bs) {
        return Err(CliError::Runtime(format!("{bs} is outside the {}x{} map", map.width(), map.height())));
    }
    let twin = ctx.twin()?;
    let pl = twin.pathloss(&map, bs)?;
    let (lo, hi) = heatmap::db_range(&pl.power);
    let dir = ctx.out_dir()?;
    fs::write(dir.join("pathloss.pgm"), heatmap::to_pgm(map.width(), map.height(), &pl.power, lo, hi))?;
    fs::write(dir.join("pathloss.ppm"), heatmap::to_ppm(map.width(), map.height(), &pl.power, lo, hi))?;
    Ok(format!("min_dbm={lo:.4} max_dbm={hi:.4}\n"))
}

fn cmd_eval(ctx: &Context, args: &MapArgs, placements: &str) -> Result<String, CliError> {
    let map = load_map(ctx, args)?;
    let placements = record::decode_placements(placements).map_err(CliError::Config)?;
    let twin = ctx.twin()?;
    let m = metrics::evaluate(&twin, &map, &placements)?;
    let rec = record_from("eval", &map, SearchResult { placements, metrics: m, evaluations: 1 }, 0.0);
    Ok(record::csv(&[rec]))
}

/// Pathgain scale from the configuration, else calibrated on the training
/// split.
fn reward_weights(
    ctx: &Context,
    preset: Preset,
    train: &[Arc<SiteMap>],
    twin: &Twin,
) -> Result<RewardWeights, CliError> {
    let base = reward::preset(preset);
    let scale = match ctx.cfg.pathgain_scale {
        Some(s) => s,
        None if base.nu3 > 0.0 => {
            let maps: Vec<SiteMap> = train.iter().map(|m| (**m).clone()).collect();
            reward::calibrate_pathgain_scale(&maps, twin, ctx.cfg.calibration_samples, ctx.seed())?
        }
        None => 1.0,
    };
    let w = base.with_scale(scale);
    w.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(w)
}

fn train_options(ctx: &Context) -> TrainOptions {
    TrainOptions {
        hidden: ctx.cfg.hidden_layers.clone(),
        horizon: ctx.cfg.horizon,
        workers: ctx.workers,
        ..Default::default()
    }
}

fn cmd_train(ctx: &Context) -> Result<String, CliError> {
    let (train_maps, test_maps) = build_corpus(ctx)?;
    let twin = ctx.twin()?;
    let weights = reward_weights(ctx, ctx.cfg.preset, &train_maps, &twin)?;
    let dir = ctx.out_dir()?;
    let corpus = Corpus { train: &train_maps, eval: &test_maps };
    let result = train::train_with_progress(&corpus, &twin, &weights, &ctx.cfg.ppo, &train_options(ctx), |p, s| {
        eprintln!(
            "iter {:>5} steps {:>8} reward {} eval_cov {} entropy {:.3} clip {:.3}",
            p.iteration,
            p.env_steps,
            sig6(p.mean_reward),
            sig6(p.eval_coverage),
            s.entropy,
            s.clip_fraction
        );
    });
    let ckpt = dir.join("checkpoint.absp");
    let curve_path = dir.join("curve.csv");
    match result {
        Ok(out) => {
            checkpoint::save_checkpoint(&ckpt, &out.params, &ctx.cfg.ppo)?;
            fs::write(&curve_path, curve_csv(&out.curve))?;
            let last = out.curve.last().expect("at least one iteration");
            Ok(format!(
                "trained {} iterations, {} env steps, final eval coverage {} capacity {}\ncheckpoint: {}\ncurve: {}\n",
                last.iteration,
                last.env_steps,
                sig6(last.eval_coverage),
                sig6(last.eval_capacity),
                ckpt.display(),
                curve_path.display()
            ))
        }
        Err(AgentError::Diverged { iteration, last_finite, curve }) => {
            checkpoint::save_checkpoint(&ckpt, &last_finite, &ctx.cfg.ppo)?;
            fs::write(&curve_path, curve_csv(&curve))?;
            Err(CliError::Diverged(format!(
                "iteration {iteration}; last finite parameters written to {}",
                ckpt.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn bench_map(
    ctx: &Context,
    params: Option<&PolicyParams>,
    twin: &Arc<Twin>,
    map: &Arc<SiteMap>,
) -> Result<Vec<RunRecord>, CliError> {
    let mut rows = Vec::new();
    for &n in &ctx.cfg.n_bs {
        for scheme in &ctx.cfg.schemes {
            let reps = ctx.cfg.bench_repeats;
            let rec = match scheme.as_str() {
                "heuristic" => run_heuristic(ctx, twin, map, n)?,
                "autobs" => run_autobs(params.expect("checked by caller"), twin, map, n, reps)?,
                "exhaustive_v" => run_exhaustive(ctx, twin, map, n, Metric::Coverage, reps)?,
                "exhaustive_c" => run_exhaustive(ctx, twin, map, n, Metric::Capacity, reps)?,
                "greedy" => run_greedy(twin, map, n, ctx.cfg.metric)?,
                other => return Err(CliError::Config(format!("unknown scheme {other:?}"))),
            };
            rows.push(rec);
        }
    }
    Ok(rows)
}

fn cmd_bench(ctx: &Context, flag: Option<&Path>) -> Result<String, CliError> {
    let params = if ctx.cfg.schemes.iter().any(|s| s == "autobs") { Some(load_params(ctx, flag)?) } else { None };
    let test_maps = test_split(ctx)?;
    let workers = ctx.workers.clamp(1, test_maps.len().max(1));
    let per = test_maps.len().div_ceil(workers);
    let chunks: Vec<Result<Vec<RunRecord>, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = test_maps
            .chunks(per.max(1))
            .map(|chunk| {
                let params = params.as_ref();
                s.spawn(move || -> Result<Vec<RunRecord>, CliError> {
                    // per-worker twin so that cache clears do not cross workers
                    let twin = ctx.twin()?;
                    let mut rows = Vec::new();
                    for map in chunk {
                        rows.extend(bench_map(ctx, params, &twin, map)?);
                    }
                    Ok(rows)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
    });
    let mut rows = Vec::new();
    for c in chunks {
        rows.extend(c?);
    }
    let dir = ctx.out_dir()?;
    let summary = record::summary(&rows);
    fs::write(dir.join("bench.csv"), record::csv(&rows))?;
    fs::write(dir.join("bench_summary.txt"), &summary)?;
    Ok(summary)
}

/// Hash of the map ids of both splits, identical for runs on the same corpus.
fn corpus_hash(train: &[Arc<SiteMap>], test: &[Arc<SiteMap>]) -> u64 {
    let mut h = Fnv64::default();
    for m in train.iter().chain(test) {
        h.write_u64(m.map_id());
    }
    h.finish()
}

pub const ABLATION_HEADER: &str = "preset,label,coverage,capacity,corpus";

fn cmd_ablate(ctx: &Context) -> Result<String, CliError> {
    let (train_maps, test_maps) = build_corpus(ctx)?;
    let twin = ctx.twin()?;
    let corpus = Corpus { train: &train_maps, eval: &test_maps };
    let hash = corpus_hash(&train_maps, &test_maps);
    let mut out = format!("{ABLATION_HEADER}\n");
    for preset in Preset::ALL {
        let weights = reward_weights(ctx, preset, &train_maps, &twin)?;
        let result = train::train(&corpus, &twin, &weights, &ctx.cfg.ppo, &train_options(ctx));
        let trained = match result {
            Ok(t) => t,
            Err(AgentError::Diverged { iteration, .. }) => {
                return Err(CliError::Diverged(format!("preset {preset} at iteration {iteration}")));
            }
            Err(e) => return Err(e.into()),
        };
        let eval_maps = if test_maps.is_empty() { &train_maps } else { &test_maps };
        let res = evaluate_policy(&trained.params, eval_maps, &twin, ctx.cfg.horizon)?;
        let n = res.len() as f64;
        let cov = res.iter().map(|r| r.1.coverage).sum::<f64>() / n;
        let cap = res.iter().map(|r| r.1.capacity).sum::<f64>() / n;
        out.push_str(&format!("{},{},{},{},{:016x}\n", preset.as_str(), preset.label(), sig6(cov), sig6(cap), hash));
    }
    fs::write(ctx.out_dir()?.join("ablation.csv"), &out)?;
    Ok(out)
}

fn cmd_gen_maps(ctx: &Context, count: usize, start: Option<u64>) -> Result<String, CliError> {
    let start = start.unwrap_or(ctx.cfg.test_seed_start);
    let dir = ctx.out_dir()?;
    let mut listing = String::from("seed,map_id,file\n");
    for seed in start..start + count as u64 {
        let map = sitemap::generate_synthetic(seed, &ctx.cfg.synth_params())?;
        let name = format!("map_{seed}.pgm");
        fs::write(dir.join(&name), map.to_pgm().occupancy)?;
        listing.push_str(&format!("{seed},{:016x},{name}\n", map.map_id()));
    }
    Ok(listing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Runtime("x".into()).exit_code(), 3);
        assert_eq!(CliError::Diverged("x".into()).exit_code(), 4);
        assert_eq!(run(["bsplace", "frobnicate"]), 2);
    }

    #[test]
    fn missing_map_is_config_error() {
        let cli = Cli::try_parse_from(["bsplace", "heuristic"]).unwrap();
        assert_eq!(execute(cli).unwrap_err().exit_code(), 2);
    }
}
