//! `bdbridge` command-line tool.

mod output;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use bdbridge::counting::{count_detail, log_bridge_density, BridgeSpec};
use bdbridge::data::{load_observations, shigellosis, Observations};
use bdbridge::filters::{bootstrap_filter, failure_domain_scan, igbs_filter, DEFAULT_REPLICATES};
use bdbridge::inference::{fit_mle, FitConfig, SirSetting, PROFILE_DROP_95};
use bdbridge::likelihood::{choose_bset, estimate_pij, BSet};
use bdbridge::models::SirParams;
use bdbridge::reference::{gillespie_simulate, lbdi_transition, simulate_sir_susceptibles, straight_estimate};
use bdbridge::sampler::{BridgePath, BridgeSampler, SkeletonMethod};
use bdbridge::{RngStream, DEFAULT_SEED};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::{float, to_csv, to_json};
use params::ModelKind;

/// Exit status 1 for bad invocations, 2 for inputs the model rejects.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(String),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }
}

impl From<bdbridge::Error> for Failure {
    fn from(e: bdbridge::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "bdbridge", version, about = "Birth-death transition probabilities by integer-grid bridge sampling")]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, env = "BDBRIDGE_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Write the result here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Report timing and settings on standard error.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact size and uniform log-density of a bridge space.
    Count(SpecArgs),
    /// Uniform draws from a bridge space, as CSV rows (replicate_id, k, tau_k, omega_k).
    Sample {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1)]
        n: u64,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
    },
    /// Transition probability p_ij(t).
    Transprob(TransprobArgs),
    /// Exact simulation: a jump path (lbdi, sis) or a susceptible record (sir).
    Simulate(SimulateArgs),
    /// Log-likelihood of a susceptible record under the SIR model.
    Filter(FilterArgs),
    /// Bootstrap-filter survival over a (beta, gamma) grid, as CSV.
    ScanFailure(ScanArgs),
    /// Maximum likelihood fit of (beta, gamma) to a susceptible record.
    Fit(FitArgs),
}

#[derive(Args, Debug)]
struct SpecArgs {
    #[arg(long)]
    i: i64,
    #[arg(long)]
    j: i64,
    /// Number of up-jumps.
    #[arg(long = "B")]
    ups: u32,
    /// Lower taboo bound.
    #[arg(long)]
    l: Option<i64>,
    /// Upper taboo bound.
    #[arg(long)]
    u: Option<i64>,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
}

impl SpecArgs {
    fn spec(&self) -> Result<BridgeSpec, Failure> {
        Ok(BridgeSpec::new(self.i, self.j, self.ups, self.t, self.l, self.u)?)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Auto,
    Rejection,
    Unrank,
}

impl From<Method> for SkeletonMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => SkeletonMethod::Auto,
            Method::Rejection => SkeletonMethod::Rejection,
            Method::Unrank => SkeletonMethod::Unrank,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Engine {
    Igbs,
    Straight,
    Closed,
}

#[derive(Args, Debug)]
struct TransprobArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Comma-separated key=value list, e.g. lambda=0.8,mu=0.6,nu=1.2.
    #[arg(long)]
    params: String,
    #[arg(long)]
    i: i64,
    #[arg(long)]
    j: i64,
    #[arg(long)]
    t: f64,
    #[arg(long, value_enum, default_value_t = Engine::Igbs)]
    method: Engine,
    /// Replicates for the Monte Carlo engines.
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    /// Sum over B = min..=bmax instead of choosing the set adaptively.
    #[arg(long, conflicts_with = "eps")]
    bmax: Option<u32>,
    /// Relative tolerance of the adaptive choice of B values.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    #[arg(long)]
    params: String,
    /// Initial state (initial infectives for sir).
    #[arg(long)]
    i: i64,
    /// Horizon for lbdi and sis.
    #[arg(long)]
    t: Option<f64>,
    /// Record times lo:hi:steps for sir.
    #[arg(long)]
    times: Option<String>,
    /// Number of paths for lbdi and sis.
    #[arg(long, default_value_t = 1)]
    n: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FilterKind {
    Igbs,
    Bootstrap,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Observation CSV with header `time,S`; the embedded Shigellosis record when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Infectives at the first record.
    #[arg(long, default_value_t = 1)]
    i0: u32,
}

impl DataArgs {
    fn load(&self) -> Result<Observations, Failure> {
        match &self.data {
            Some(p) => Ok(load_observations(p).map_err(|e| Failure::Domain(format!("{}: {e}", p.display())))?),
            None => Ok(shigellosis()),
        }
    }
}

#[derive(Args, Debug)]
struct FilterArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Only sir is accepted.
    #[arg(long, value_enum, default_value_t = ModelKind::Sir)]
    model: ModelKind,
    /// beta=..,gamma=..[,n0=..]; n0 defaults to S_0 + i0.
    #[arg(long)]
    params: String,
    #[arg(long, value_enum, default_value_t = FilterKind::Igbs)]
    method: FilterKind,
    /// Bridge replicates per record.
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    m: u64,
    #[arg(long, default_value_t = 100_000)]
    particles: u64,
    /// Surviving fraction below which the bootstrap run counts as failed.
    #[arg(long, default_value_t = 1e-3)]
    threshold: f64,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    n0: Option<u32>,
    /// lo:hi:steps
    #[arg(long)]
    beta_range: String,
    /// lo:hi:steps
    #[arg(long)]
    gamma_range: String,
    #[arg(long, default_value_t = 100_000)]
    particles: u64,
    /// Comma-separated surviving fractions.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 1e-4])]
    thresholds: Vec<f64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    n0: Option<u32>,
    /// lo:hi:steps
    #[arg(long)]
    beta_range: String,
    /// lo:hi:steps
    #[arg(long)]
    gamma_range: String,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    m: u64,
    #[arg(long, default_value_t = 5)]
    replications: usize,
    #[arg(long, default_value_t = 2)]
    levels: usize,
    #[arg(long, default_value_t = 5)]
    refine_steps: usize,
    #[arg(long, default_value_t = PROFILE_DROP_95)]
    drop: f64,
    /// Also write the first-level surface as CSV here.
    #[arg(long)]
    surface_csv: Option<PathBuf>,
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
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(usize::from(n))
            .build_global()
            .map_err(|e| Failure::Domain(format!("thread pool: {e}")))?;
    }
    let start = Instant::now();
    let stream = RngStream::from_seed(cli.seed);
    let text = match &cli.command {
        Command::Count(a) => count(a)?,
        Command::Sample { spec, n, method } => sample(spec, *n, *method, stream)?,
        Command::Transprob(a) => transprob(a, stream)?,
        Command::Simulate(a) => simulate(a, stream)?,
        Command::Filter(a) => filter(a, stream)?,
        Command::ScanFailure(a) => scan(a, stream)?,
        Command::Fit(a) => fit(a, stream)?,
    };
    match &cli.output {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Domain(format!("{}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    if cli.verbose {
        eprintln!("seed {} threads {} elapsed {:.3} s", cli.seed, rayon::current_num_threads(), start.elapsed().as_secs_f64());
    }
    Ok(())
}

#[derive(Serialize)]
struct CountOut {
    count: Option<u128>,
    log_count: f64,
    log_density: Option<f64>,
    jumps: i64,
    extended_series: bool,
    spec: BridgeSpec,
}

fn count(a: &SpecArgs) -> Result<String, Failure> {
    let spec = a.spec()?;
    let detail = count_detail(&spec);
    let log_density = if detail.is_empty() { None } else { Some(log_bridge_density(&spec)?) };
    Ok(to_json(&CountOut {
        count: detail.exact,
        log_count: detail.log,
        log_density,
        jumps: spec.jumps(),
        extended_series: detail.extended_series,
        spec,
    }))
}

fn sample(a: &SpecArgs, n: u64, method: Method, stream: RngStream) -> Result<String, Failure> {
    let spec = a.spec()?;
    let sampler = BridgeSampler::new(&spec, method.into())?;
    let mut rng = stream.generator();
    let mut path = BridgePath::default();
    let mut rows = Vec::new();
    for rep in 0..n {
        sampler.sample_into(&mut rng, &mut path)?;
        // the final entry of a path is the hold until t, not a jump
        for k in 0..=path.jumps() {
            rows.push(vec![rep.to_string(), k.to_string(), float(path.times[k]), path.states[k].to_string()]);
        }
    }
    Ok(to_csv(&["replicate_id", "k", "tau_k", "omega_k"], rows))
}

#[derive(Serialize)]
struct TransprobOut {
    method: &'static str,
    value: f64,
    std_error: f64,
    log_value: f64,
    log_std_error: f64,
    n: u64,
    bset: Option<Vec<u32>>,
}

fn transprob(a: &TransprobArgs, stream: RngStream) -> Result<String, Failure> {
    let out = match a.method {
        Engine::Closed => {
            if a.model != ModelKind::Lbdi {
                return Err(Failure::usage("the closed form exists only for --model lbdi"));
            }
            let value = lbdi_transition(&params::lbdi_params(&a.params)?, a.i, a.j, a.t)?;
            TransprobOut { method: "closed", value, std_error: 0.0, log_value: value.ln(), log_std_error: 0.0, n: 0, bset: None }
        }
        Engine::Straight => {
            let model = params::model(a.model, &a.params)?;
            let e = straight_estimate(&model, a.i, a.j, a.t, a.n, stream)?;
            TransprobOut {
                method: "straight",
                value: e.value,
                std_error: e.std_error,
                log_value: e.log_value,
                log_std_error: e.log_std_error,
                n: e.n,
                bset: None,
            }
        }
        Engine::Igbs => {
            let model = params::model(a.model, &a.params)?;
            let bset = match a.bmax {
                Some(b) => BSet::up_to(a.i, a.j, b)?,
                None => choose_bset(&model, a.i, a.j, a.t, a.eps.unwrap_or(1e-4), stream.split(0))?,
            };
            let e = estimate_pij(&model, a.i, a.j, a.t, &bset, a.n, stream.split(1))?;
            TransprobOut {
                method: "igbs",
                value: e.value,
                std_error: e.std_error,
                log_value: e.log_value,
                log_std_error: e.log_std_error,
                n: e.n,
                bset: Some(bset.values.clone()),
            }
        }
    };
    Ok(to_json(&out))
}

fn simulate(a: &SimulateArgs, stream: RngStream) -> Result<String, Failure> {
    if a.model == ModelKind::Sir {
        let (p, s0) = params::sir_params(&a.params)?;
        let i0 = u32::try_from(a.i).map_err(|_| Failure::usage("--i must be a nonnegative infective count"))?;
        let s0 = s0.unwrap_or(p.n0.saturating_sub(i0));
        let times = params::grid(a.times.as_deref().ok_or_else(|| Failure::usage("--model sir needs --times lo:hi:steps"))?)?.values();
        let s = simulate_sir_susceptibles(&p, s0, i0, &times, &mut stream.generator())?;
        return Ok(Observations::new(times, s)?.to_csv());
    }
    let model = params::model(a.model, &a.params)?;
    let t = a.t.ok_or_else(|| Failure::usage("--t is required for lbdi and sis"))?;
    let mut rng = stream.generator();
    let mut rows = Vec::new();
    for rep in 0..a.n {
        let path = gillespie_simulate(&model, a.i, t, &mut rng)?;
        for (time, state) in path.times.iter().zip(&path.states) {
            rows.push(vec![rep.to_string(), float(*time), state.to_string()]);
        }
        rows.push(vec![rep.to_string(), float(path.horizon), path.terminal().to_string()]);
    }
    Ok(to_csv(&["replicate_id", "time", "state"], rows))
}

fn sir_for(obs: &Observations, i0: u32, text: &str) -> Result<SirParams, Failure> {
    let p = params::parse_pairs(text, &["n0", "beta", "gamma"])?;
    let get = |k: &str| p.get(k).copied().ok_or_else(|| Failure::usage(format!("missing parameter `{k}`")));
    let n0 = match p.get("n0") {
        Some(&v) if v >= 0.0 && v.fract() == 0.0 => v as u32,
        Some(&v) => return Err(Failure::usage(format!("n0 must be a nonnegative integer, got {v}"))),
        None => obs.susceptibles()[0] + i0,
    };
    Ok(SirParams::new(n0, get("beta")?, get("gamma")?)?)
}

#[derive(Serialize)]
struct BootstrapOut {
    method: &'static str,
    loglik: f64,
    survival: Vec<f64>,
    survival_min: f64,
    failed: bool,
}

#[derive(Serialize)]
struct IgbsOut {
    method: &'static str,
    loglik: f64,
    per_step: Vec<bdbridge::filters::StepReport>,
    posterior_final: bdbridge::filters::FilterState,
}

fn filter(a: &FilterArgs, stream: RngStream) -> Result<String, Failure> {
    if a.model != ModelKind::Sir {
        return Err(Failure::usage("filter works on the sir model only"));
    }
    let obs = a.data.load()?;
    let p = sir_for(&obs, a.data.i0, &a.params)?;
    Ok(match a.method {
        FilterKind::Igbs => {
            let run = igbs_filter(&p, &obs, a.data.i0, a.m, stream)?;
            to_json(&IgbsOut { method: "igbs", loglik: run.loglik, per_step: run.steps, posterior_final: run.posterior_final })
        }
        FilterKind::Bootstrap => {
            let run = bootstrap_filter(&p, &obs, a.data.i0, a.particles, a.threshold, stream)?;
            let survival_min = run.survival_min();
            to_json(&BootstrapOut { method: "bootstrap", loglik: run.loglik, survival: run.survival, survival_min, failed: run.failed })
        }
    })
}

fn scan(a: &ScanArgs, stream: RngStream) -> Result<String, Failure> {
    let obs = a.data.load()?;
    let n0 = a.n0.unwrap_or(obs.susceptibles()[0] + a.data.i0);
    let betas = params::grid(&a.beta_range)?.values();
    let gammas = params::grid(&a.gamma_range)?.values();
    let cells = failure_domain_scan(&obs, n0, a.data.i0, &betas, &gammas, a.particles, &a.thresholds, stream)?;
    let labels: Vec<String> = a.thresholds.iter().map(|&t| format!("failed_{}", params::percent_label(t))).collect();
    let mut header = vec!["beta", "gamma", "survival_min", "loglik"];
    header.extend(labels.iter().map(String::as_str));
    let rows = cells.iter().map(|c| {
        let mut row = vec![float(c.beta), float(c.gamma), float(c.survival_min), float(c.loglik)];
        row.extend(c.failed.iter().map(|f| f.to_string()));
        row
    });
    Ok(to_csv(&header, rows))
}

fn fit(a: &FitArgs, stream: RngStream) -> Result<String, Failure> {
    let obs = a.data.load()?;
    let mut setting = SirSetting::closed(&obs, a.data.i0);
    if let Some(n0) = a.n0 {
        setting.n0 = n0;
    }
    let mut config = FitConfig::new(setting, params::grid(&a.beta_range)?, params::grid(&a.gamma_range)?);
    config.m = a.m;
    config.replications = a.replications;
    config.levels = a.levels;
    config.refine_steps = a.refine_steps;
    config.drop = a.drop;
    let result = fit_mle(&obs, &config, stream)?;
    if let Some(p) = &a.surface_csv {
        std::fs::write(p, result.surface.to_csv()).map_err(|e| Failure::Domain(format!("{}: {e}", p.display())))?;
    }
    if result.boundary_warning {
        eprintln!("warning: the maximum lies on the edge of the search grid");
    }
    Ok(to_json(&result))
}
