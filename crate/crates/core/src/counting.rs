//! Exact combinatorics of lattice bridges inside a taboo corridor.
//!
//! A bridge from `i` to `j` with `B` up-steps has `D = B + i - j` down-steps
//! and `K = B + D` steps in total. Its embedded path must keep every state
//! strictly inside `(l, u)`, except that the final state may sit on an
//! absorbing bound (first passage into that bound at step `K`).
//!
//! Counts come from the two-barrier reflection series
//!
//! ```text
//! card = sum_k [ C(K, B + k w) - C(K, B - j + u + k w) ],   w = u - l
//! ```
//!
//! with `C(K, m) = 0` outside `0..=K`. The terms `k = -1, 0, 1` (without the
//! second term at `k = 1`) are the first-order reflections plus the
//! double-reflection pair; narrow corridors need the rest of the series, and
//! [`BridgeCount::extended_series`] reports when it contributed.

use std::sync::OnceLock;

use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::error::{domain, Error, Result};

/// Largest `K` for which counts are carried as exact integers.
pub const EXACT_LIMIT: i64 = 64;

/// Default cap on `K` for [`enumerate_bridges`].
pub const ENUMERATION_LIMIT: i64 = 20;

/// Where a bridge ends relative to its bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Terminal {
    /// `l < j < u`.
    Interior,
    /// `j == l`: the last step is a down-step onto an absorbing lower bound.
    AbsorbedLower,
    /// `j == u`: the last step is an up-step onto an absorbing upper bound.
    AbsorbedUpper,
}

/// One restricted bridge space: start, end, number of up-jumps, elapsed time
/// and taboo bounds (`None` means unbounded on that side).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BridgeSpec {
    pub start: i64,
    pub end: i64,
    pub ups: u32,
    pub t: f64,
    pub lower: Option<i64>,
    pub upper: Option<i64>,
}

impl BridgeSpec {
    pub fn new(start: i64, end: i64, ups: u32, t: f64, lower: Option<i64>, upper: Option<i64>) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(domain(format!("elapsed time must be positive and finite, got {t}")));
        }
        if let (Some(l), Some(u)) = (lower, upper) {
            if u - l < 2 {
                return Err(domain(format!("corridor ({l}, {u}) holds no state")));
            }
        }
        if lower.is_some_and(|l| start <= l) || upper.is_some_and(|u| start >= u) {
            return Err(domain(format!("start {start} not strictly inside bounds {lower:?}..{upper:?}")));
        }
        if lower.is_some_and(|l| end < l) || upper.is_some_and(|u| end > u) {
            return Err(domain(format!("end {end} outside bounds {lower:?}..{upper:?}")));
        }
        Ok(Self { start, end, ups, t, lower, upper })
    }

    pub fn unbounded(start: i64, end: i64, ups: u32, t: f64) -> Result<Self> {
        Self::new(start, end, ups, t, None, None)
    }

    /// Number of down-steps `D`; negative when the spec is infeasible.
    pub fn downs(&self) -> i64 {
        i64::from(self.ups) + self.start - self.end
    }

    /// Total number of jumps `K = B + D`.
    pub fn jumps(&self) -> i64 {
        i64::from(self.ups) + self.downs()
    }

    pub fn terminal(&self) -> Terminal {
        if self.lower == Some(self.end) {
            Terminal::AbsorbedLower
        } else if self.upper == Some(self.end) {
            Terminal::AbsorbedUpper
        } else {
            Terminal::Interior
        }
    }

    /// The corridor walk whose count equals this spec's count, or `None` when
    /// the spec admits no bridge at all.
    pub(crate) fn walk(&self) -> Option<Walk> {
        let (ups, downs) = (i64::from(self.ups), self.downs());
        if downs < 0 {
            return None;
        }
        let steps = ups + downs;
        match self.terminal() {
            Terminal::Interior => Some(Walk { steps, from: self.start, to: self.end, lower: self.lower, upper: self.upper }),
            Terminal::AbsorbedLower if downs >= 1 => Some(Walk {
                steps: steps - 1,
                from: self.start,
                to: self.end + 1,
                lower: self.lower,
                upper: self.upper,
            }),
            Terminal::AbsorbedUpper if ups >= 1 => Some(Walk {
                steps: steps - 1,
                from: self.start,
                to: self.end - 1,
                lower: self.lower,
                upper: self.upper,
            }),
            _ => None,
        }
    }
}

/// `steps`-step ±1 walks from `from` to `to` staying strictly inside the bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Walk {
    pub steps: i64,
    pub from: i64,
    pub to: i64,
    pub lower: Option<i64>,
    pub upper: Option<i64>,
}

impl Walk {
    fn inside(&self, s: i64) -> bool {
        self.lower.is_none_or(|l| s > l) && self.upper.is_none_or(|u| s < u)
    }

    /// Up-steps needed, if the endpoints are reachable at all.
    fn ups(&self) -> Option<i64> {
        let diff = self.to - self.from;
        if self.steps < 0 || diff.abs() > self.steps || (self.steps + diff) % 2 != 0 {
            return None;
        }
        if !self.inside(self.from) || !self.inside(self.to) {
            return None;
        }
        Some((self.steps + diff) / 2)
    }

    /// Same walk with a different start, step budget kept consistent by the caller.
    pub(crate) fn restarted(&self, from: i64, steps: i64) -> Walk {
        Walk { steps, from, ..*self }
    }

    /// Exact count via the reflection series. `steps` must be `<= EXACT_LIMIT`.
    pub(crate) fn count_exact(&self) -> (i128, bool) {
        let Some(b) = self.ups() else { return (0, false) };
        let n = self.steps;
        let c = |m: i64| -> i128 { binomial(n, m) as i128 };
        match (self.lower, self.upper) {
            (None, None) => (c(b), false),
            (Some(l), None) => (c(b) - c(b - (self.to - l)), false),
            (None, Some(u)) => (c(b) - c(b + (u - self.to)), false),
            (Some(l), Some(u)) => {
                let w = u - l;
                let reflected = b + (u - self.to);
                let reach = n / w + 2;
                let mut total = 0i128;
                let mut extended = false;
                for k in -reach..=reach {
                    let direct = c(b + k * w);
                    let mirror = c(reflected + k * w);
                    total += direct - mirror;
                    let direct_listed = (-1..=1).contains(&k);
                    let mirror_listed = (-1..=0).contains(&k);
                    if (!direct_listed && direct != 0) || (!mirror_listed && mirror != 0) {
                        extended = true;
                    }
                }
                (total, extended)
            }
        }
    }

    /// Natural log of the count by a rescaled transfer recursion over the
    /// reachable window; every update adds nonnegative numbers.
    pub(crate) fn log_count_dp(&self) -> f64 {
        let Some(b) = self.ups() else { return f64::NEG_INFINITY };
        let d = self.steps - b;
        if self.lower.is_none() && self.upper.is_none() {
            return ln_binomial(self.steps, b);
        }
        let lo = self.lower.map_or(self.from - d, |l| (l + 1).max(self.from - d));
        let hi = self.upper.map_or(self.from + b, |u| (u - 1).min(self.from + b));
        let width = (hi - lo + 1) as usize;
        let mut cur = vec![0.0f64; width];
        let mut next = vec![0.0f64; width];
        cur[(self.from - lo) as usize] = 1.0;
        let mut log_scale = 0.0;
        for _ in 0..self.steps {
            for s in 0..width {
                let below = if s > 0 { cur[s - 1] } else { 0.0 };
                let above = if s + 1 < width { cur[s + 1] } else { 0.0 };
                next[s] = below + above;
            }
            std::mem::swap(&mut cur, &mut next);
            let peak = cur.iter().cloned().fold(0.0, f64::max);
            if peak > 1e200 {
                cur.iter_mut().for_each(|v| *v /= peak);
                log_scale += peak.ln();
            }
        }
        let v = cur[(self.to - lo) as usize];
        if v > 0.0 {
            v.ln() + log_scale
        } else {
            f64::NEG_INFINITY
        }
    }
}

fn pascal() -> &'static Vec<Vec<u128>> {
    static TABLE: OnceLock<Vec<Vec<u128>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = EXACT_LIMIT as usize;
        let mut rows: Vec<Vec<u128>> = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let mut row = vec![1u128; k + 1];
            for m in 1..k {
                row[m] = rows[k - 1][m - 1] + rows[k - 1][m];
            }
            rows.push(row);
        }
        rows
    })
}

/// `C(n, m)` for `0 <= n <= EXACT_LIMIT`; zero when `m` is outside `0..=n`.
pub fn binomial(n: i64, m: i64) -> u128 {
    assert!((0..=EXACT_LIMIT).contains(&n), "binomial row {n} outside exact table");
    if m < 0 || m > n {
        0
    } else {
        pascal()[n as usize][m as usize]
    }
}

fn ln_binomial(n: i64, m: i64) -> f64 {
    if m < 0 || m > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n as u64) - ln_factorial(m as u64) - ln_factorial((n - m) as u64)
}

/// Count of one bridge space, with the log count always available.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BridgeCount {
    /// Exact cardinality when `K <= EXACT_LIMIT`.
    pub exact: Option<u128>,
    /// Natural log of the cardinality; `-inf` for an empty space.
    pub log: f64,
    /// True when reflection terms beyond the first-order and double pair were nonzero.
    pub extended_series: bool,
}

impl BridgeCount {
    pub fn is_empty(&self) -> bool {
        self.log == f64::NEG_INFINITY
    }
}

/// Exact number of bridges in the spec's restricted space.
pub fn bridge_count(spec: &BridgeSpec) -> Result<u128> {
    count_detail(spec)
        .exact
        .ok_or(Error::Capacity { jumps: spec.jumps(), limit: EXACT_LIMIT })
}

/// Exact count when small enough, log count in any case.
pub fn count_detail(spec: &BridgeSpec) -> BridgeCount {
    let Some(walk) = spec.walk() else {
        return BridgeCount { exact: Some(0), log: f64::NEG_INFINITY, extended_series: false };
    };
    if walk.steps <= EXACT_LIMIT {
        let (count, extended_series) = walk.count_exact();
        debug_assert!(count >= 0);
        let exact = count as u128;
        let log = if exact == 0 { f64::NEG_INFINITY } else { (exact as f64).ln() };
        BridgeCount { exact: Some(exact), log, extended_series }
    } else {
        BridgeCount { exact: None, log: walk.log_count_dp(), extended_series: false }
    }
}

/// Natural log of the bridge count; `-inf` for an empty space.
pub fn log_bridge_count(spec: &BridgeSpec) -> f64 {
    count_detail(spec).log
}

/// All skeletons `omega_0..=omega_K` in the spec's space, in lexicographic
/// order (down before up). Brute force; meant for checking the counts.
pub fn enumerate_bridges(spec: &BridgeSpec) -> Result<Vec<Vec<i64>>> {
    enumerate_bridges_with_limit(spec, ENUMERATION_LIMIT)
}

pub fn enumerate_bridges_with_limit(spec: &BridgeSpec, limit: i64) -> Result<Vec<Vec<i64>>> {
    let k = spec.jumps();
    if k > limit {
        return Err(Error::EnumerationLimit { jumps: k, limit });
    }
    let Some(walk) = spec.walk() else { return Ok(Vec::new()) };
    let mut out = Vec::new();
    let mut path = vec![walk.from];
    let ups = match walk.ups() {
        Some(b) => b,
        None => return Ok(out),
    };
    extend(&walk, ups, walk.steps - ups, &mut path, &mut out);
    match spec.terminal() {
        Terminal::Interior => {}
        Terminal::AbsorbedLower | Terminal::AbsorbedUpper => {
            for p in &mut out {
                p.push(spec.end);
            }
        }
    }
    Ok(out)
}

fn extend(walk: &Walk, ups: i64, downs: i64, path: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
    let here = *path.last().expect("path starts non-empty");
    if ups == 0 && downs == 0 {
        if here == walk.to {
            out.push(path.clone());
        }
        return;
    }
    for (step, left_up, left_down) in [(-1, ups, downs - 1), (1, ups - 1, downs)] {
        if left_up < 0 || left_down < 0 || !walk.inside(here + step) {
            continue;
        }
        path.push(here + step);
        extend(walk, left_up, left_down, path, out);
        path.pop();
    }
}

/// Log density `ln(K!) - K ln t` of the uniform law on ordered jump times.
pub fn log_simplex_density(jumps: i64, t: f64) -> Result<f64> {
    if jumps < 0 {
        return Err(domain(format!("negative jump count {jumps}")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(domain(format!("elapsed time must be positive, got {t}")));
    }
    if jumps == 0 {
        return Ok(0.0);
    }
    Ok(ln_factorial(jumps as u64) - jumps as f64 * t.ln())
}

/// Log density of the uniform law on the spec's bridge paths: simplex density
/// times the reciprocal of the skeleton count.
pub fn log_bridge_density(spec: &BridgeSpec) -> Result<f64> {
    let count = count_detail(spec);
    if count.is_empty() {
        return Err(Error::EmptySpace);
    }
    Ok(log_simplex_density(spec.jumps(), spec.t)? - count.log)
}
