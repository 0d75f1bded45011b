//! Uniform draws from a restricted bridge space.
//!
//! A bridge path is a pair (ordered jump times, lattice skeleton). The two
//! halves are drawn independently: times as sorted i.i.d. uniforms on
//! `(0, t)`, skeletons uniformly over the corridor-restricted lattice paths.

use rand::Rng;
use serde::Serialize;

use crate::counting::{count_detail, log_simplex_density, BridgeCount, BridgeSpec, Terminal, Walk, EXACT_LIMIT};
use crate::error::{domain, Error, Result};

/// Spaces at most this large are sampled by drawing a uniform index and
/// unranking it, which never rejects.
pub const UNRANK_MAX_CARD: u128 = 4096;

/// Shuffles tried per skeleton before the rejection sampler gives up.
pub const RETRY_CAP: u64 = 1_000_000;

/// A complete bridge path: `times[0] = 0`, `times[K+1] = t`, and
/// `states[k]` is the state held on `[times[k], times[k+1])`, with
/// `states[K] = states[K+1] = j`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BridgePath {
    pub times: Vec<f64>,
    pub states: Vec<i64>,
}

impl BridgePath {
    /// Number of jumps `K`.
    pub fn jumps(&self) -> usize {
        self.states.len().saturating_sub(2)
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Structural checks that do not depend on a spec: matching lengths,
    /// `times` strictly increasing from 0, ±1 steps, and a final hold.
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN times must fail these checks
    pub fn check_shape(&self) -> Result<()> {
        let n = self.states.len();
        if n < 2 || self.times.len() != n {
            return Err(domain(format!(
                "bridge path needs K+2 times and states, got {} and {}",
                self.times.len(),
                n
            )));
        }
        if self.times[0] != 0.0 {
            return Err(domain("bridge path must start at time 0"));
        }
        let k = n - 2;
        for w in self.times[..=k].windows(2) {
            if !(w[1] > w[0]) {
                return Err(domain("jump times must be strictly increasing"));
            }
        }
        if k > 0 && !(self.times[k] < self.times[k + 1]) {
            return Err(domain("last jump must happen before the horizon"));
        }
        if !(self.times[k + 1] > 0.0 && self.times[k + 1].is_finite()) {
            return Err(domain("horizon must be positive and finite"));
        }
        for w in self.states[..=k].windows(2) {
            if (w[1] - w[0]).abs() != 1 {
                return Err(domain("consecutive skeleton states must differ by one"));
            }
        }
        if self.states[k] != self.states[k + 1] {
            return Err(domain("state after the last jump must be held to the horizon"));
        }
        Ok(())
    }

    /// Checks the path belongs to the spec's bridge space.
    pub fn check_against(&self, spec: &BridgeSpec) -> Result<()> {
        self.check_shape()?;
        let k = self.jumps();
        if k as i64 != spec.jumps() {
            return Err(domain(format!("path has {k} jumps, spec needs {}", spec.jumps())));
        }
        if self.states[0] != spec.start || self.states[k] != spec.end {
            return Err(domain("path endpoints do not match the spec"));
        }
        let ups = self.states.windows(2).take(k).filter(|w| w[1] > w[0]).count();
        if ups != spec.ups as usize {
            return Err(domain(format!("path has {ups} up-jumps, spec needs {}", spec.ups)));
        }
        if (self.horizon() - spec.t).abs() > 1e-12 * spec.t {
            return Err(domain("path horizon differs from the spec's elapsed time"));
        }
        let last_inside = if spec.terminal() == Terminal::Interior { k } else { k.saturating_sub(1) };
        let inside = |s: i64| spec.lower.is_none_or(|l| s > l) && spec.upper.is_none_or(|u| s < u);
        if !self.states[..=last_inside].iter().all(|&s| inside(s)) {
            return Err(domain("path touches a taboo bound"));
        }
        Ok(())
    }
}

/// `k` i.i.d. uniform draws on the open interval `(0, t)`, unsorted.
pub fn draw_uniform_times<R: Rng + ?Sized>(k: usize, t: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(k);
    fill_uniform_times(k, t, rng, &mut out);
    out
}

fn fill_uniform_times<R: Rng + ?Sized>(k: usize, t: f64, rng: &mut R, out: &mut Vec<f64>) {
    out.clear();
    while out.len() < k {
        let u: f64 = rng.random();
        let x = u * t;
        if x > 0.0 && x < t {
            out.push(x);
        }
    }
}

/// Ordered jump times `tau_1 < ... < tau_k` uniform on the simplex in `(0, t)`.
/// Exact ties are redrawn.
pub fn sample_times<R: Rng + ?Sized>(k: usize, t: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(t.is_finite() && t > 0.0) {
        return Err(domain(format!("elapsed time must be positive, got {t}")));
    }
    let mut out = Vec::with_capacity(k);
    sorted_times_into(k, t, rng, &mut out);
    Ok(out)
}

fn sorted_times_into<R: Rng + ?Sized>(k: usize, t: f64, rng: &mut R, out: &mut Vec<f64>) {
    loop {
        fill_uniform_times(k, t, rng, out);
        out.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite draws"));
        if out.windows(2).all(|w| w[0] < w[1]) {
            return;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SkeletonMethod {
    /// Unrank when the space is small and exactly counted, otherwise reject.
    Auto,
    /// Shuffle the ±1 steps and keep the result only if it stays in the corridor.
    Rejection,
    /// Draw a uniform index below the count and walk to the indexed path.
    Unrank,
}

/// Uniform sampler over the lattice skeletons of one bridge space.
#[derive(Clone, Debug)]
pub struct SkeletonSampler {
    spec: BridgeSpec,
    walk: Walk,
    ups: i64,
    count: BridgeCount,
    method: SkeletonMethod,
}

impl SkeletonSampler {
    pub fn new(spec: &BridgeSpec, method: SkeletonMethod) -> Result<Self> {
        let count = count_detail(spec);
        let walk = match spec.walk() {
            Some(w) if !count.is_empty() => w,
            _ => return Err(Error::EmptySpace),
        };
        let ups = (walk.steps + walk.to - walk.from) / 2;
        let method = match method {
            SkeletonMethod::Auto => match count.exact {
                Some(c) if c <= UNRANK_MAX_CARD => SkeletonMethod::Unrank,
                _ => SkeletonMethod::Rejection,
            },
            SkeletonMethod::Unrank if walk.steps > EXACT_LIMIT => {
                return Err(Error::Capacity { jumps: walk.steps, limit: EXACT_LIMIT });
            }
            m => m,
        };
        Ok(Self { spec: *spec, walk, ups, count, method })
    }

    pub fn spec(&self) -> &BridgeSpec {
        &self.spec
    }

    pub fn count(&self) -> &BridgeCount {
        &self.count
    }

    /// The strategy actually used (never `Auto`).
    pub fn method(&self) -> SkeletonMethod {
        self.method
    }

    /// Probability that one shuffle lands inside the corridor.
    pub fn acceptance_rate(&self) -> f64 {
        let n = self.walk.steps as u64;
        let b = self.ups as u64;
        let ln_all = statrs::function::factorial::ln_binomial(n, b);
        (self.count.log - ln_all).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<i64>> {
        let mut out = Vec::new();
        self.sample_into(rng, &mut out)?;
        Ok(out)
    }

    /// Like [`sample`](Self::sample), also returning the number of shuffles
    /// used (always 1 for unranking).
    pub fn sample_with_stats<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<i64>, u64)> {
        let mut out = Vec::new();
        let attempts = self.sample_into(rng, &mut out)?;
        Ok((out, attempts))
    }

    /// Writes `omega_0..=omega_K` into `out`; returns the attempts used.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<i64>) -> Result<u64> {
        out.clear();
        let attempts = match self.method {
            SkeletonMethod::Unrank => {
                self.unrank(rng, out);
                1
            }
            _ => self.reject(rng, out)?,
        };
        if self.spec.terminal() != Terminal::Interior {
            out.push(self.spec.end);
        }
        Ok(attempts)
    }

    fn unrank<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<i64>) {
        let card = self.count.exact.expect("unranking needs an exact count") as i128;
        let mut index = rng.random_range(0..card);
        let mut here = self.walk.from;
        out.push(here);
        for left in (0..self.walk.steps).rev() {
            let below = here - 1;
            let via_down = if self.walk.lower.is_none_or(|l| below > l) {
                self.walk.restarted(below, left).count_exact().0
            } else {
                0
            };
            if index < via_down {
                here = below;
            } else {
                index -= via_down;
                here += 1;
            }
            out.push(here);
        }
        debug_assert_eq!(here, self.walk.to);
    }

    fn reject<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<i64>) -> Result<u64> {
        let n = self.walk.steps as usize;
        let mut steps: Vec<i8> = Vec::with_capacity(n);
        steps.extend(std::iter::repeat_n(1i8, self.ups as usize));
        steps.resize(n, -1);
        let inside = |s: i64| self.walk.lower.is_none_or(|l| s > l) && self.walk.upper.is_none_or(|u| s < u);
        for attempt in 1..=RETRY_CAP {
            out.clear();
            let mut here = self.walk.from;
            out.push(here);
            let mut ok = true;
            // forward Fisher-Yates; each prefix is already a uniform draw, so we can stop early
            for p in 0..n {
                let q = rng.random_range(p..n);
                steps.swap(p, q);
                here += i64::from(steps[p]);
                if !inside(here) {
                    ok = false;
                    break;
                }
                out.push(here);
            }
            if ok {
                return Ok(attempt);
            }
        }
        Err(Error::RetryCap { attempts: RETRY_CAP, acceptance_rate: self.acceptance_rate() })
    }
}

/// Uniform sampler over complete bridge paths of one spec.
#[derive(Clone, Debug)]
pub struct BridgeSampler {
    skeleton: SkeletonSampler,
    log_density: f64,
}

impl BridgeSampler {
    pub fn new(spec: &BridgeSpec, method: SkeletonMethod) -> Result<Self> {
        let skeleton = SkeletonSampler::new(spec, method)?;
        let log_density = log_simplex_density(spec.jumps(), spec.t)? - skeleton.count.log;
        Ok(Self { skeleton, log_density })
    }

    pub fn spec(&self) -> &BridgeSpec {
        &self.skeleton.spec
    }

    pub fn skeleton(&self) -> &SkeletonSampler {
        &self.skeleton
    }

    /// Log of the constant density of this sampler's law.
    pub fn log_density(&self) -> f64 {
        self.log_density
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<BridgePath> {
        let mut path = BridgePath::default();
        self.sample_into(rng, &mut path)?;
        Ok(path)
    }

    /// Draws into `path`, reusing its buffers.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, path: &mut BridgePath) -> Result<()> {
        let spec = &self.skeleton.spec;
        let k = spec.jumps() as usize;
        sorted_times_into(k, spec.t, rng, &mut path.times);
        path.times.insert(0, 0.0);
        path.times.push(spec.t);
        self.skeleton.sample_into(rng, &mut path.states)?;
        path.states.push(spec.end);
        Ok(())
    }
}

/// One uniform skeleton `omega_0..=omega_K` of the spec.
pub fn sample_skeleton<R: Rng + ?Sized>(spec: &BridgeSpec, rng: &mut R) -> Result<Vec<i64>> {
    SkeletonSampler::new(spec, SkeletonMethod::Auto)?.sample(rng)
}

/// One uniform bridge path of the spec.
pub fn sample_bridge<R: Rng + ?Sized>(spec: &BridgeSpec, rng: &mut R) -> Result<BridgePath> {
    BridgeSampler::new(spec, SkeletonMethod::Auto)?.sample(rng)
}
