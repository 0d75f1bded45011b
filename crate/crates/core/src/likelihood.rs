//! Complete-path likelihood and the bridge-sampling estimators of
//! transition probabilities.
//!
//! For a bridge space `Omega` with uniform density `h`, `p(path) / h(path)`
//! is an unbiased estimate of the probability mass of `Omega`. Summing over
//! a set of up-jump counts `B*` (drawing `B` uniformly and scaling by
//! `|B*|`) estimates `p_ij(t)` up to the mass outside `B*`.

use rand::Rng;
use serde::Serialize;

use crate::counting::BridgeSpec;
use crate::error::{domain, Error, Result};
use crate::models::BirthDeathModel;
use crate::parallel::map_chunks;
use crate::rng::RngStream;
use crate::sampler::{BridgePath, BridgeSampler, SkeletonMethod};

/// Log-likelihood of a complete path. Returns `-inf` when the path jumps in
/// a direction whose rate is zero.
pub fn path_loglik(model: &BirthDeathModel, path: &BridgePath) -> Result<f64> {
    path.check_shape()?;
    if let Some(s) = path.states.iter().find(|&&s| !model.contains(s)) {
        return Err(domain(format!("path visits state {s} outside the model's state space")));
    }
    loglik_unchecked(model, path)
}

/// Same as [`path_loglik`] without the shape checks; for paths produced by a
/// [`BridgeSampler`].
pub(crate) fn loglik_unchecked(model: &BirthDeathModel, path: &BridgePath) -> Result<f64> {
    let k = path.states.len() - 2;
    let mut ups = 0u32;
    let mut ll = 0.0;
    for step in 1..=k + 1 {
        let from = path.states[step - 1];
        let r = model.rates_after(from, ups)?;
        ll -= r.total() * (path.times[step] - path.times[step - 1]);
        if step <= k {
            if path.states[step] > from {
                ll += r.birth.ln();
                ups += 1;
            } else {
                ll += r.death.ln();
            }
        }
        if ll == f64::NEG_INFINITY {
            return Ok(ll);
        }
    }
    Ok(ll)
}

/// A Monte Carlo estimate with its standard error, in linear and log scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: u64,
    /// `ln value`; `-inf` for an exact or estimated zero.
    pub log_value: f64,
    pub log_std_error: f64,
}

impl MCEstimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0, n: 0, log_value: value.ln(), log_std_error: f64::NEG_INFINITY }
    }

    pub fn relative_error(&self) -> f64 {
        if self.value > 0.0 {
            self.std_error / self.value
        } else {
            f64::INFINITY
        }
    }

    /// From a sample proportion of `hits` in `n` trials.
    pub fn proportion(hits: u64, n: u64) -> Self {
        let nf = n as f64;
        let p = hits as f64 / nf;
        let se = (p * (1.0 - p) / nf).sqrt();
        Self { value: p, std_error: se, n, log_value: p.ln(), log_std_error: se.ln() }
    }
}

/// Running sums of `exp(w)` and `exp(2w)` relative to the largest `w` seen.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LogAccumulator {
    shift: f64,
    s1: f64,
    s2: f64,
    pub n: u64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self { shift: f64::NEG_INFINITY, s1: 0.0, s2: 0.0, n: 0 }
    }
}

impl LogAccumulator {
    pub fn push(&mut self, w: f64) {
        self.n += 1;
        if w == f64::NEG_INFINITY {
            return;
        }
        if w > self.shift {
            let r = (self.shift - w).exp();
            self.s1 *= r;
            self.s2 *= r * r;
            self.shift = w;
        }
        let e = (w - self.shift).exp();
        self.s1 += e;
        self.s2 += e * e;
    }

    pub fn merge(&mut self, other: &Self) {
        self.n += other.n;
        if other.shift == f64::NEG_INFINITY {
            return;
        }
        if other.shift > self.shift {
            let r = (self.shift - other.shift).exp();
            self.s1 = self.s1 * r + other.s1;
            self.s2 = self.s2 * r * r + other.s2;
            self.shift = other.shift;
        } else {
            let r = (other.shift - self.shift).exp();
            self.s1 += other.s1 * r;
            self.s2 += other.s2 * r * r;
        }
    }

    /// Mean of `scale * exp(w)` over the pushed values, with standard error.
    pub fn estimate(&self, scale: f64) -> MCEstimate {
        let n = self.n;
        if n == 0 || self.shift == f64::NEG_INFINITY {
            return MCEstimate { value: 0.0, std_error: 0.0, n, log_value: f64::NEG_INFINITY, log_std_error: f64::NEG_INFINITY };
        }
        let nf = n as f64;
        let log_value = scale.ln() + self.shift + self.s1.ln() - nf.ln();
        let log_std_error = if n > 1 {
            let ss = (self.s2 - self.s1 * self.s1 / nf).max(0.0);
            scale.ln() + self.shift + 0.5 * (ss / (nf - 1.0) / nf).ln()
        } else {
            f64::INFINITY
        };
        MCEstimate { value: log_value.exp(), std_error: log_std_error.exp(), n, log_value, log_std_error }
    }
}

/// The set `B*` of up-jump counts an estimate sums over.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BSet {
    pub values: Vec<u32>,
}

impl BSet {
    pub fn new(mut values: Vec<u32>) -> Result<Self> {
        values.sort_unstable();
        values.dedup();
        if values.is_empty() {
            return Err(domain("B* must not be empty"));
        }
        Ok(Self { values })
    }

    /// `{lo, ..., hi}`.
    pub fn range(lo: u32, hi: u32) -> Result<Self> {
        if hi < lo {
            return Err(domain(format!("empty range {lo}..={hi}")));
        }
        Ok(Self { values: (lo..=hi).collect() })
    }

    /// `{(j - i)^+, ..., b_max}`.
    pub fn up_to(i: i64, j: i64, b_max: u32) -> Result<Self> {
        Self::range(min_ups(i, j), b_max)
    }

    pub fn min(&self) -> u32 {
        self.values[0]
    }

    pub fn max(&self) -> u32 {
        *self.values.last().expect("nonempty")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Fewest up-jumps that can take `i` to `j`.
pub fn min_ups(i: i64, j: i64) -> u32 {
    (j - i).max(0) as u32
}

enum Shortcut {
    Value(f64),
    Bridge,
}

fn shortcut(model: &BirthDeathModel, i: i64, j: i64, t: f64) -> Result<Shortcut> {
    if !(t.is_finite() && t > 0.0) {
        return Err(domain(format!("elapsed time must be positive, got {t}")));
    }
    if !model.contains(i) {
        return Err(domain(format!("start state {i} outside the model's state space")));
    }
    if !model.contains(j) {
        return Ok(Shortcut::Value(0.0));
    }
    if model.is_absorbing(i) {
        return Ok(Shortcut::Value(if i == j { 1.0 } else { 0.0 }));
    }
    Ok(Shortcut::Bridge)
}

/// The bridge spec for `i -> j` with `ups` up-jumps under the model's
/// boundaries, or `None` if the model cannot produce such a bridge.
pub fn model_spec(model: &BirthDeathModel, i: i64, j: i64, ups: u32, t: f64) -> Result<Option<BridgeSpec>> {
    let (l, u) = model.taboo_bounds();
    let spec = BridgeSpec::new(i, j, ups, t, l, u)?;
    Ok((spec.downs() >= 0).then_some(spec))
}

/// Sampler for a spec, `None` when the space is empty.
pub(crate) fn sampler_for(spec: Option<BridgeSpec>) -> Result<Option<BridgeSampler>> {
    match spec {
        None => Ok(None),
        Some(s) => match BridgeSampler::new(&s, SkeletonMethod::Auto) {
            Ok(b) => Ok(Some(b)),
            Err(Error::EmptySpace) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

/// Estimates `p_ij(t)` from `n` uniform bridge draws with `B` uniform on
/// `bset`. Up-jump counts with an empty bridge space still count in `|B*|`.
pub fn estimate_pij(
    model: &BirthDeathModel,
    i: i64,
    j: i64,
    t: f64,
    bset: &BSet,
    n: u64,
    stream: RngStream,
) -> Result<MCEstimate> {
    if n == 0 {
        return Err(domain("sample size must be at least 1"));
    }
    if let Shortcut::Value(v) = shortcut(model, i, j, t)? {
        return Ok(MCEstimate::exact(v));
    }
    if bset.min() < min_ups(i, j) {
        return Err(domain(format!("B* starts at {} but reaching {j} from {i} needs {}", bset.min(), min_ups(i, j))));
    }
    let samplers = bset
        .values
        .iter()
        .map(|&b| sampler_for(model_spec(model, i, j, b, t)?))
        .collect::<Result<Vec<_>>>()?;
    if samplers.iter().all(Option::is_none) {
        return Ok(MCEstimate::exact(0.0));
    }
    // a single deterministic path needs no sampling
    if let [Some(s)] = samplers.as_slice() {
        if s.spec().jumps() == 0 {
            let path = BridgePath { times: vec![0.0, t], states: vec![i, i] };
            let w = loglik_unchecked(model, &path)? - s.log_density();
            return Ok(MCEstimate::exact(w.exp()));
        }
    }
    let m = samplers.len();
    let partials = map_chunks(n as usize, |c, range| -> Result<LogAccumulator> {
        let mut rng = stream.split(c as u64).generator();
        let mut acc = LogAccumulator::default();
        let mut path = BridgePath::default();
        for _ in range {
            let pick = if m == 1 { 0 } else { rng.random_range(0..m) };
            match &samplers[pick] {
                None => acc.push(f64::NEG_INFINITY),
                Some(s) => {
                    s.sample_into(&mut rng, &mut path)?;
                    acc.push(loglik_unchecked(model, &path)? - s.log_density());
                }
            }
        }
        Ok(acc)
    });
    let mut total = LogAccumulator::default();
    for p in partials {
        total.merge(&p?);
    }
    Ok(total.estimate(m as f64))
}

/// Estimates `p^B_ij(t)`, the probability of reaching `j` with exactly `B`
/// up-jumps.
pub fn estimate_pij_b(
    model: &BirthDeathModel,
    i: i64,
    j: i64,
    t: f64,
    b: u32,
    n: u64,
    stream: RngStream,
) -> Result<MCEstimate> {
    if b < min_ups(i, j) {
        shortcut(model, i, j, t)?;
        return Ok(MCEstimate::exact(0.0));
    }
    estimate_pij(model, i, j, t, &BSet { values: vec![b] }, n, stream)
}

/// Replicates per pilot estimate in [`choose_bset`].
pub const PILOT_N: u64 = 2000;

/// Most up-jump counts [`choose_bset`] will try beyond the minimum.
pub const MAX_B_GROWTH: u32 = 400;

/// Picks `B* = {(j-i)^+, ..., B_max}`, growing `B_max` until the last three
/// pilot estimates of `p^B_ij(t)` each fall below `eps` times the running
/// total. Trailing exact zeros are dropped.
pub fn choose_bset(
    model: &BirthDeathModel,
    i: i64,
    j: i64,
    t: f64,
    eps: f64,
    stream: RngStream,
) -> Result<BSet> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    let lo = min_ups(i, j);
    if let Shortcut::Value(_) = shortcut(model, i, j, t)? {
        return BSet::range(lo, lo);
    }
    let mut total = 0.0;
    let mut small_run = 0;
    let mut last_nonzero = lo;
    let mut b = lo;
    loop {
        let p = estimate_pij_b(model, i, j, t, b, PILOT_N, stream.split(u64::from(b)))?.value;
        total += p;
        if p > 0.0 {
            last_nonzero = b;
        }
        if total > 0.0 && p < eps * total {
            small_run += 1;
        } else {
            small_run = 0;
        }
        if small_run >= 3 || b - lo >= MAX_B_GROWTH {
            break;
        }
        b += 1;
    }
    BSet::range(lo, last_nonzero.max(lo).min(b))
}
