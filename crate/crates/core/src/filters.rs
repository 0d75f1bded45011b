//! Sequential likelihood for an SIR epidemic observed only through its
//! susceptible counts.
//!
//! Between records `k-1` and `k` the infective count moves from `i` to `j`
//! with exactly `B = S_{k-1} - S_k` up-jumps, so each step is a bridge
//! problem in `I` alone. The bridge filter draws `i` from the current
//! posterior (conditioned on `I > 0`), `j` uniformly from `{0, ..., i + B}`
//! and a uniform bridge between them; the weights
//!
//! ```text
//! q = p(path) (B + i + 1) / h(path)
//! ```
//!
//! give both the one-step predictive probability and the next posterior.
//! Once `I` hits zero the epidemic is over and `S` stays put.
//!
//! The bootstrap particle filter is included as a baseline; it weights
//! forward simulations by an exact match on `S` and so collapses whenever
//! matches become rare.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

pub use crate::data::Observations;
use crate::counting::BridgeSpec;
use crate::error::{domain, Result};
use crate::likelihood::{loglik_unchecked, sampler_for};
use crate::models::{BirthDeathModel, SirParams};
use crate::parallel::map_chunks;
use crate::reference::log_sum_exp;
use crate::rng::RngStream;
use crate::sampler::{BridgePath, BridgeSampler};

/// Replicates per step when the caller has no preference.
pub const DEFAULT_REPLICATES: u64 = 10_000;

/// Filtering distribution of the hidden infective count after `step` records.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterState {
    pub step: usize,
    /// `posterior[n] = pr(I = n | S_0..S_step)`.
    pub posterior: Vec<f64>,
    /// `pr(I > 0 | S_0..S_step)`.
    pub p_alive: f64,
}

impl FilterState {
    /// Point mass at `i0` infectives.
    pub fn initial(i0: u32) -> Self {
        let mut posterior = vec![0.0; i0 as usize + 1];
        posterior[i0 as usize] = 1.0;
        Self { step: 0, posterior, p_alive: if i0 > 0 { 1.0 } else { 0.0 } }
    }

    pub fn mean(&self) -> f64 {
        self.posterior.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    fn from_weights(step: usize, mut posterior: Vec<f64>) -> Self {
        let total: f64 = posterior.iter().sum();
        posterior.iter_mut().for_each(|p| *p /= total);
        let p_alive = posterior[1..].iter().sum::<f64>().min(1.0);
        Self { step, posterior, p_alive }
    }
}

/// Diagnostics of one filter step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub step: usize,
    /// `ln pr(S_k | S_0..S_{k-1})`.
    pub cond_loglik: f64,
    /// Monte Carlo standard error of `pr(S_k | S_0..S_{k-1})`.
    pub cond_std_error: f64,
    /// `pr(I_{k-1} > 0 | S_0..S_{k-1})` entering the step.
    pub p_alive: f64,
    /// Fraction of replicates whose weight was exactly zero.
    pub zero_weight_fraction: f64,
}

/// One step of the bridge filter from `s_prev` to `s_next` susceptibles
/// over `dt`, using `m` replicates.
pub fn igbs_filter_step(
    state: &FilterState,
    params: &SirParams,
    s_prev: u32,
    s_next: u32,
    dt: f64,
    m: u64,
    stream: RngStream,
) -> Result<(FilterState, StepReport)> {
    if s_next > s_prev {
        return Err(domain(format!("susceptibles increased from {s_prev} to {s_next}")));
    }
    if m == 0 {
        return Err(domain("replicate count must be at least 1"));
    }
    let b = s_prev - s_next;
    let step = state.step + 1;
    let p = state.p_alive;
    let mut report = StepReport { step, cond_loglik: 0.0, cond_std_error: 0.0, p_alive: p, zero_weight_fraction: 0.0 };
    let max_i = state.posterior.len() - 1;
    let support = max_i + b as usize + 1;

    if p <= 0.0 {
        if b > 0 {
            report.cond_loglik = f64::NEG_INFINITY;
            return Ok((state.clone(), report));
        }
        let mut posterior = vec![0.0; support];
        posterior[0] = 1.0;
        return Ok((FilterState { step, posterior, p_alive: 0.0 }, report));
    }

    let model = BirthDeathModel::sir_as_bd(*params, s_prev)?;
    let draw_i = WeightedIndex::new(&state.posterior[1..]).map_err(|e| domain(format!("posterior: {e}")))?;
    let chunks = map_chunks(m as usize, |c, range| -> Result<Vec<(usize, f64)>> {
        let mut rng = stream.split(c as u64).generator();
        let mut cache: HashMap<(i64, i64), Option<BridgeSampler>> = HashMap::new();
        let mut path = BridgePath::default();
        let mut out = Vec::with_capacity(range.len());
        for _ in range {
            let i = draw_i.sample(&mut rng) as i64 + 1;
            let j = rng.random_range(0..=i + i64::from(b));
            let sampler = match cache.get(&(i, j)) {
                Some(s) => s,
                None => {
                    let spec = BridgeSpec::new(i, j, b, dt, Some(0), Some(i + i64::from(b) + 1))?;
                    let s = sampler_for((spec.downs() >= 0).then_some(spec))?;
                    cache.entry((i, j)).or_insert(s)
                }
            };
            let log_q = match sampler {
                None => f64::NEG_INFINITY,
                Some(s) => {
                    s.sample_into(&mut rng, &mut path)?;
                    loglik_unchecked(&model, &path)? - s.log_density() + ((i + i64::from(b) + 1) as f64).ln()
                }
            };
            out.push((j as usize, log_q));
        }
        Ok(out)
    });
    let mut draws = Vec::with_capacity(m as usize);
    for c in chunks {
        draws.extend(c?);
    }

    let shift = draws.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
    let mf = m as f64;
    let mut weights = vec![0.0; support];
    let (mut s1, mut s2, mut zeros) = (0.0, 0.0, 0usize);
    if shift > f64::NEG_INFINITY {
        for &(j, lq) in &draws {
            let e = (lq - shift).exp();
            if lq == f64::NEG_INFINITY {
                zeros += 1;
            }
            weights[j] += e;
            s1 += e;
            s2 += e * e;
        }
    } else {
        zeros = draws.len();
    }
    report.zero_weight_fraction = zeros as f64 / mf;

    // everything below is scaled by exp(-shift)
    let dead = if b == 0 { state.posterior[0] } else { 0.0 };
    let log_alive_part = p.ln() + shift + (s1 / mf).ln();
    let log_dead_part = dead.ln();
    report.cond_loglik = log_sum_exp(&[log_alive_part, log_dead_part]);
    if m > 1 && shift > f64::NEG_INFINITY {
        let var = ((s2 - s1 * s1 / mf) / (mf - 1.0)).max(0.0);
        report.cond_std_error = p * shift.exp() * (var / mf).sqrt();
    }
    if report.cond_loglik == f64::NEG_INFINITY {
        return Ok((state.clone(), report));
    }

    // normalize against the larger of the two parts to stay finite
    let top = log_alive_part.max(log_dead_part);
    let alive_scale = (p.ln() + shift - mf.ln() - top).exp();
    weights.iter_mut().for_each(|w| *w *= alive_scale);
    weights[0] += (log_dead_part - top).exp();
    Ok((FilterState::from_weights(step, weights), report))
}

/// Full run of the bridge filter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterRun {
    pub loglik: f64,
    pub steps: Vec<StepReport>,
    pub posterior_final: FilterState,
}

fn check_start(params: &SirParams, obs: &Observations, i0: u32) -> Result<()> {
    let s0 = obs.susceptibles()[0];
    if s0 + i0 > params.n0 {
        return Err(domain(format!("S_0 + I_0 = {} exceeds population n0 = {}", s0 + i0, params.n0)));
    }
    Ok(())
}

/// Runs the bridge filter over all records, stopping early once the data
/// become impossible (log-likelihood `-inf`).
pub fn igbs_filter(params: &SirParams, obs: &Observations, i0: u32, m: u64, stream: RngStream) -> Result<FilterRun> {
    check_start(params, obs, i0)?;
    let s = obs.susceptibles();
    let mut state = FilterState::initial(i0);
    let mut steps = Vec::with_capacity(obs.steps());
    let mut loglik = 0.0;
    for k in 1..=obs.steps() {
        let (next, report) = igbs_filter_step(&state, params, s[k - 1], s[k], obs.dt(k), m, stream.split(k as u64))?;
        loglik += report.cond_loglik;
        steps.push(report);
        state = next;
        if loglik == f64::NEG_INFINITY {
            break;
        }
    }
    Ok(FilterRun { loglik, steps, posterior_final: state })
}

/// `ln L(beta, gamma | S_0..S_N)` from the bridge filter.
pub fn igbs_filter_loglik(params: &SirParams, obs: &Observations, i0: u32, m: u64, stream: RngStream) -> Result<f64> {
    Ok(igbs_filter(params, obs, i0, m, stream)?.loglik)
}

/// Outcome of a bootstrap filter run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapRun {
    pub loglik: f64,
    /// Fraction of particles matching the observed `S`, per step.
    pub survival: Vec<f64>,
    pub failed: bool,
}

impl BootstrapRun {
    pub fn survival_min(&self) -> f64 {
        self.survival.iter().copied().fold(1.0, f64::min)
    }
}

/// Propagates `(s, i)` for `dt` by exact simulation. Returns the final
/// infective count, or `None` as soon as `S` drops below `s_target`.
fn propagate_sir<R: Rng + ?Sized>(params: &SirParams, mut s: u32, mut i: u32, dt: f64, s_target: u32, rng: &mut R) -> Option<u32> {
    let mut now = 0.0;
    loop {
        let infect = params.beta * f64::from(s) * f64::from(i);
        let total = infect + params.gamma * f64::from(i);
        if total <= 0.0 {
            break;
        }
        let w: f64 = rng.sample(Exp1);
        now += w / total;
        if now >= dt {
            break;
        }
        if rng.random::<f64>() * total < infect {
            if s == s_target {
                return None;
            }
            s -= 1;
            i += 1;
        } else {
            i -= 1;
        }
    }
    (s == s_target).then_some(i)
}

/// Bootstrap (sequential importance resampling) filter with the exact 0-1
/// observation law on `S`. `failed` is set when the surviving fraction
/// drops below `threshold` at any step; a step with no survivors ends the
/// run with log-likelihood `-inf`.
pub fn bootstrap_filter(
    params: &SirParams,
    obs: &Observations,
    i0: u32,
    n_particles: u64,
    threshold: f64,
    stream: RngStream,
) -> Result<BootstrapRun> {
    if n_particles == 0 {
        return Err(domain("particle count must be at least 1"));
    }
    check_start(params, obs, i0)?;
    let s = obs.susceptibles();
    let mut hist: Vec<u64> = vec![0; i0 as usize + 1];
    hist[i0 as usize] = n_particles;
    let mut run = BootstrapRun { loglik: 0.0, survival: Vec::with_capacity(obs.steps()), failed: false };
    for k in 1..=obs.steps() {
        let (s_prev, s_next, dt) = (s[k - 1], s[k], obs.dt(k));
        let draw = WeightedIndex::new(&hist).map_err(|e| domain(format!("particle histogram: {e}")))?;
        let width = hist.len() + (s_prev - s_next) as usize;
        let step_stream = stream.split(k as u64);
        let parts = map_chunks(n_particles as usize, |c, range| {
            let mut rng = step_stream.split(c as u64).generator();
            let mut h = vec![0u64; width];
            for _ in range {
                let i = draw.sample(&mut rng) as u32;
                if let Some(j) = propagate_sir(params, s_prev, i, dt, s_next, &mut rng) {
                    h[j as usize] += 1;
                }
            }
            h
        });
        let mut next = vec![0u64; width];
        for part in parts {
            next.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
        let survivors: u64 = next.iter().sum();
        let frac = survivors as f64 / n_particles as f64;
        run.survival.push(frac);
        if frac < threshold {
            run.failed = true;
        }
        if survivors == 0 {
            run.loglik = f64::NEG_INFINITY;
            run.failed = true;
            return Ok(run);
        }
        run.loglik += frac.ln();
        hist = next;
    }
    Ok(run)
}

/// One cell of a failure-domain scan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanCell {
    pub beta: f64,
    pub gamma: f64,
    pub survival_min: f64,
    pub loglik: f64,
    /// `failed[t]` is true when `survival_min < thresholds[t]`.
    pub failed: Vec<bool>,
}

/// Runs the bootstrap filter at every `(beta, gamma)` grid point and flags
/// the points where the surviving fraction fell below each threshold.
#[allow(clippy::too_many_arguments)]
pub fn failure_domain_scan(
    obs: &Observations,
    n0: u32,
    i0: u32,
    beta_grid: &[f64],
    gamma_grid: &[f64],
    n_particles: u64,
    thresholds: &[f64],
    stream: RngStream,
) -> Result<Vec<ScanCell>> {
    let mut cells = Vec::with_capacity(beta_grid.len() * gamma_grid.len());
    for (a, &beta) in beta_grid.iter().enumerate() {
        for (g, &gamma) in gamma_grid.iter().enumerate() {
            let params = SirParams::new(n0, beta, gamma)?;
            let cell_stream = stream.split((a * gamma_grid.len() + g) as u64);
            let run = bootstrap_filter(&params, obs, i0, n_particles, 0.0, cell_stream)?;
            let survival_min = if run.loglik == f64::NEG_INFINITY { 0.0 } else { run.survival_min() };
            cells.push(ScanCell {
                beta,
                gamma,
                survival_min,
                loglik: run.loglik,
                failed: thresholds.iter().map(|&t| survival_min < t).collect(),
            });
        }
    }
    Ok(cells)
}
