//! Oracles: the closed-form linear birth-death-immigration law and exact
//! forward (Gillespie) simulation.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::likelihood::MCEstimate;
use crate::models::{BirthDeathModel, LbdiParams, SirParams};
use crate::parallel::map_chunks;
use crate::rng::RngStream;

/// `x ln y` with `0 ln 0 = 0`.
fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `ln P(Y = y)` for `Y ~ NegBin(r, a)`:
/// `Gamma(y + r) / (Gamma(r) y!) (1 - a)^r a^y`, mean `r a / (1 - a)`.
/// `r = 0` or `a = 0` is the point mass at zero.
fn ln_negbin(y: u64, r: f64, a: f64) -> f64 {
    if r == 0.0 || a == 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let yf = y as f64;
    let coef = if y == 0 { 0.0 } else { ln_gamma(yf + r) - ln_gamma(r) - ln_factorial(y) };
    coef + xlny(r, 1.0 - a) + xlny(yf, a)
}

fn ln_binom_pmf(n: u64, x: u64, p: f64) -> f64 {
    let (nf, xf) = (n as f64, x as f64);
    ln_factorial(n) - ln_factorial(x) - ln_factorial(n - x) + xlny(xf, p) + xlny(nf - xf, 1.0 - p)
}

/// `P(Y_t = j | Y_0 = i)` for the linear birth-death-immigration process.
///
/// `Y_t = X + Y` with `X ~ Binomial(i, p)` the surviving lineages of the
/// initial population and `Y | X ~ NegBin(X + nu/lambda, alpha)`, where,
/// with `c = lambda/mu` and `rho = exp(-(mu - lambda) t)`,
///
/// ```text
/// p     = rho (1 - c) / (1 - rho c)
/// alpha = (1 - rho) c / (1 - rho c)
/// ```
///
/// `mu = 0` (pure birth) and `lambda = nu = 0` (pure death) are handled
/// as limits. `lambda = mu` and `lambda = 0 < nu` are unsupported.
pub fn lbdi_transition(params: &LbdiParams, i: i64, j: i64, t: f64) -> Result<f64> {
    let LbdiParams { lambda, mu, nu } = *params;
    if !(t.is_finite() && t > 0.0) {
        return Err(domain(format!("elapsed time must be positive, got {t}")));
    }
    if i < 0 {
        return Err(domain(format!("start state {i} is negative")));
    }
    if lambda == mu {
        return Err(Error::Unsupported("closed form needs lambda != mu".into()));
    }
    if lambda == 0.0 && nu > 0.0 {
        return Err(Error::Unsupported("closed form needs lambda > 0 when nu > 0".into()));
    }
    if j < 0 {
        return Ok(0.0);
    }
    let (p, alpha, delta) = if lambda == 0.0 {
        ((-mu * t).exp(), 0.0, 0.0)
    } else if mu == 0.0 {
        (1.0, -(-lambda * t).exp_m1(), nu / lambda)
    } else {
        let c = lambda / mu;
        let rho = (-(mu - lambda) * t).exp();
        let den = 1.0 - rho * c;
        (rho * (1.0 - c) / den, (1.0 - rho) * c / den, nu / lambda)
    };
    let (i, j) = (i as u64, j as u64);
    let terms: Vec<f64> = (0..=i.min(j))
        .map(|x| ln_binom_pmf(i, x, p) + ln_negbin(j - x, x as f64 + delta, alpha))
        .collect();
    Ok(log_sum_exp(&terms).exp())
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// A forward-simulated trajectory: `states[k]` holds on `[times[k], times[k+1])`,
/// the last state holding until `horizon`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimPath {
    pub times: Vec<f64>,
    pub states: Vec<i64>,
    pub horizon: f64,
}

impl SimPath {
    pub fn terminal(&self) -> i64 {
        *self.states.last().expect("paths start with a state")
    }
}

/// One exact trajectory on `[0, t]` from `y0`: exponential holding times at
/// the total rate, then a birth with probability `birth / total`.
pub fn gillespie_simulate<R: Rng + ?Sized>(model: &BirthDeathModel, y0: i64, t: f64, rng: &mut R) -> Result<SimPath> {
    let mut path = SimPath { times: vec![0.0], states: vec![y0], horizon: t };
    run_gillespie(model, y0, t, rng, |time, state| {
        path.times.push(time);
        path.states.push(state);
    })?;
    Ok(path)
}

/// Terminal state of one trajectory, without recording the path.
pub fn simulate_terminal<R: Rng + ?Sized>(model: &BirthDeathModel, y0: i64, t: f64, rng: &mut R) -> Result<i64> {
    run_gillespie(model, y0, t, rng, |_, _| {})
}

fn run_gillespie<R: Rng + ?Sized>(
    model: &BirthDeathModel,
    y0: i64,
    t: f64,
    rng: &mut R,
    mut on_jump: impl FnMut(f64, i64),
) -> Result<i64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(domain(format!("elapsed time must be positive, got {t}")));
    }
    let mut y = y0;
    let mut now = 0.0;
    let mut ups = 0u32;
    loop {
        let r = model.rates_after(y, ups)?;
        let total = r.total();
        if total <= 0.0 {
            return Ok(y);
        }
        let wait: f64 = Exp1.sample(rng);
        now += wait / total;
        if now >= t {
            return Ok(y);
        }
        if rng.random::<f64>() * total < r.birth {
            y += 1;
            ups += 1;
        } else {
            y -= 1;
        }
        on_jump(now, y);
    }
}

/// Counts of terminal states over `n` simulated paths.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TerminalCounts {
    pub n: u64,
    pub counts: BTreeMap<i64, u64>,
}

impl TerminalCounts {
    pub fn hits(&self, j: i64) -> u64 {
        self.counts.get(&j).copied().unwrap_or(0)
    }

    pub fn estimate(&self, j: i64) -> MCEstimate {
        MCEstimate::proportion(self.hits(j), self.n)
    }
}

/// Terminal states of `n` independent trajectories from `i`.
pub fn terminal_distribution(model: &BirthDeathModel, i: i64, t: f64, n: u64, stream: RngStream) -> Result<TerminalCounts> {
    let parts = map_chunks(n as usize, |c, range| -> Result<BTreeMap<i64, u64>> {
        let mut rng = stream.split(c as u64).generator();
        let mut counts = BTreeMap::new();
        for _ in range {
            *counts.entry(simulate_terminal(model, i, t, &mut rng)?).or_insert(0) += 1;
        }
        Ok(counts)
    });
    let mut out = TerminalCounts { n, counts: BTreeMap::new() };
    for part in parts {
        for (k, v) in part? {
            *out.counts.entry(k).or_insert(0) += v;
        }
    }
    Ok(out)
}

/// The fraction of `n` trajectories from `i` that end at `j`.
pub fn straight_estimate(model: &BirthDeathModel, i: i64, j: i64, t: f64, n: u64, stream: RngStream) -> Result<MCEstimate> {
    if n == 0 {
        return Err(domain("sample size must be at least 1"));
    }
    Ok(terminal_distribution(model, i, t, n, stream)?.estimate(j))
}

/// Simulates an SIR epidemic from `(s0, i0)` and records `S` at each of
/// `times` (ascending, starting at 0 or later).
pub fn simulate_sir_susceptibles<R: Rng + ?Sized>(
    params: &SirParams,
    s0: u32,
    i0: u32,
    times: &[f64],
    rng: &mut R,
) -> Result<Vec<u32>> {
    if s0 + i0 > params.n0 {
        return Err(domain(format!("s0 + i0 = {} exceeds n0 = {}", s0 + i0, params.n0)));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(domain("observation times must be nonnegative and strictly increasing"));
    }
    let (mut s, mut i) = (s0, i0);
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    while next < times.len() {
        let infect = params.beta * f64::from(s) * f64::from(i);
        let total = infect + params.gamma * f64::from(i);
        let jump = if total > 0.0 {
            let w: f64 = Exp1.sample(rng);
            now + w / total
        } else {
            f64::INFINITY
        };
        while next < times.len() && times[next] < jump {
            out.push(s);
            next += 1;
        }
        if jump.is_infinite() {
            break;
        }
        now = jump;
        if rng.random::<f64>() * total < infect {
            s -= 1;
            i += 1;
        } else {
            i -= 1;
        }
    }
    Ok(out)
}
