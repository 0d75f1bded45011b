//! Birth-death rate laws and their boundary metadata.
//!
//! Boundaries are declared, not inferred from the rates: the sampler turns
//! them into taboo bounds for the lattice bridges before any rate is
//! evaluated.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Boundary behaviour at one end of the state space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// No boundary on this side.
    Open,
    /// The process stops once it reaches this state.
    Absorbing(i64),
    /// The process can sit at this state but never crosses it.
    Reflecting(i64),
}

impl Boundary {
    fn state(self) -> Option<i64> {
        match self {
            Boundary::Open => None,
            Boundary::Absorbing(s) | Boundary::Reflecting(s) => Some(s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub birth: f64,
    pub death: f64,
}

impl Rates {
    pub const ZERO: Rates = Rates { birth: 0.0, death: 0.0 };

    pub fn total(&self) -> f64 {
        self.birth + self.death
    }
}

/// Linear birth-death with immigration: birth `lambda*y + nu`, death `mu*y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbdiParams {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
}

impl LbdiParams {
    pub fn new(lambda: f64, mu: f64, nu: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("mu", mu), ("nu", nu)] {
            check_rate(name, v)?;
        }
        Ok(Self { lambda, mu, nu })
    }
}

/// SIS epidemic on `0..=n0` infectives: birth `beta*I*(n0-I)`, death `gamma*I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SisParams {
    pub n0: u32,
    pub beta: f64,
    pub gamma: f64,
}

impl SisParams {
    pub fn new(n0: u32, beta: f64, gamma: f64) -> Result<Self> {
        if n0 < 1 {
            return Err(domain("SIS population n0 must be at least 1"));
        }
        check_rate("beta", beta)?;
        check_rate("gamma", gamma)?;
        Ok(Self { n0, beta, gamma })
    }
}

/// Closed-population SIR: infection `beta*S*I`, removal `gamma*I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    pub n0: u32,
    pub beta: f64,
    pub gamma: f64,
}

impl SirParams {
    pub fn new(n0: u32, beta: f64, gamma: f64) -> Result<Self> {
        if n0 < 1 {
            return Err(domain("SIR population n0 must be at least 1"));
        }
        check_rate("beta", beta)?;
        check_rate("gamma", gamma)?;
        Ok(Self { n0, beta, gamma })
    }

    /// Basic reproduction number `beta * n0 / gamma`.
    pub fn r0(&self) -> f64 {
        self.beta * f64::from(self.n0) / self.gamma
    }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite and >= 0, got {v}")))
    }
}

pub type RateFn = Arc<dyn Fn(i64) -> (f64, f64) + Send + Sync>;

#[derive(Clone)]
pub enum RateLaw {
    Lbdi(LbdiParams),
    Sis(SisParams),
    /// The infective count of an SIR epidemic. Each upward jump consumes one
    /// susceptible, so the birth rate depends on how many up-jumps the path
    /// has made since `s0` was recorded.
    SirInfectious { params: SirParams, s0: u32 },
    Custom(RateFn),
}

impl fmt::Debug for RateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateLaw::Lbdi(p) => f.debug_tuple("Lbdi").field(p).finish(),
            RateLaw::Sis(p) => f.debug_tuple("Sis").field(p).finish(),
            RateLaw::SirInfectious { params, s0 } => f
                .debug_struct("SirInfectious")
                .field("params", params)
                .field("s0", s0)
                .finish(),
            RateLaw::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A birth-death process: a rate law plus declared boundaries.
#[derive(Clone, Debug)]
pub struct BirthDeathModel {
    law: RateLaw,
    lower: Boundary,
    upper: Boundary,
}

impl BirthDeathModel {
    /// State 0 reflects when `nu > 0` and absorbs when `nu = 0`.
    pub fn lbdi(params: LbdiParams) -> Self {
        let lower = if params.nu > 0.0 {
            Boundary::Reflecting(0)
        } else {
            Boundary::Absorbing(0)
        };
        Self { law: RateLaw::Lbdi(params), lower, upper: Boundary::Open }
    }

    pub fn sis(params: SisParams) -> Self {
        Self {
            law: RateLaw::Sis(params),
            lower: Boundary::Absorbing(0),
            upper: Boundary::Reflecting(i64::from(params.n0)),
        }
    }

    /// The infective process of an SIR epidemic whose susceptible count is
    /// `s0` at time zero. Rates at a state also depend on the number of
    /// up-jumps taken so far; see [`BirthDeathModel::rates_after`].
    pub fn sir_as_bd(params: SirParams, s0: u32) -> Result<Self> {
        if s0 > params.n0 {
            return Err(domain(format!("s0 = {s0} exceeds population n0 = {}", params.n0)));
        }
        Ok(Self {
            law: RateLaw::SirInfectious { params, s0 },
            lower: Boundary::Absorbing(0),
            upper: Boundary::Open,
        })
    }

    /// A user-supplied time-homogeneous law. `rates(state)` returns
    /// `(birth, death)`; it must vanish as the boundary semantics require.
    pub fn custom(rates: RateFn, lower: Boundary, upper: Boundary) -> Result<Self> {
        if let (Some(lo), Some(hi)) = (lower.state(), upper.state()) {
            if lo > hi {
                return Err(domain(format!("lower boundary {lo} above upper boundary {hi}")));
            }
        }
        Ok(Self { law: RateLaw::Custom(rates), lower, upper })
    }

    pub fn law(&self) -> &RateLaw {
        &self.law
    }

    pub fn lower(&self) -> Boundary {
        self.lower
    }

    pub fn upper(&self) -> Boundary {
        self.upper
    }

    pub fn min_state(&self) -> Option<i64> {
        self.lower.state()
    }

    pub fn max_state(&self) -> Option<i64> {
        self.upper.state()
    }

    pub fn contains(&self, state: i64) -> bool {
        self.min_state().is_none_or(|lo| state >= lo) && self.max_state().is_none_or(|hi| state <= hi)
    }

    pub fn is_absorbing(&self, state: i64) -> bool {
        self.lower == Boundary::Absorbing(state) || self.upper == Boundary::Absorbing(state)
    }

    /// True when rates depend on the path's up-jump count as well as the state.
    pub fn is_path_dependent(&self) -> bool {
        matches!(self.law, RateLaw::SirInfectious { .. })
    }

    /// `(birth, death)` at `state` for a path that has not jumped up yet.
    pub fn rates(&self, state: i64) -> Result<Rates> {
        self.rates_after(state, 0)
    }

    /// `(birth, death)` at `state` after `ups` upward jumps along the path.
    pub fn rates_after(&self, state: i64, ups: u32) -> Result<Rates> {
        if !self.contains(state) {
            return Err(domain(format!("state {state} outside the model's state space")));
        }
        if self.is_absorbing(state) {
            return Ok(Rates::ZERO);
        }
        let y = state as f64;
        let mut r = match &self.law {
            RateLaw::Lbdi(p) => Rates { birth: p.lambda * y + p.nu, death: p.mu * y },
            RateLaw::Sis(p) => {
                let s = f64::from(p.n0) - y;
                Rates { birth: p.beta * y * s, death: p.gamma * y }
            }
            RateLaw::SirInfectious { params, s0 } => {
                if ups > *s0 {
                    return Err(domain(format!("{ups} infections exceed the {s0} susceptibles")));
                }
                let s = f64::from(s0 - ups);
                Rates { birth: params.beta * s * y, death: params.gamma * y }
            }
            RateLaw::Custom(f) => {
                let (birth, death) = f(state);
                if !(birth.is_finite() && birth >= 0.0 && death.is_finite() && death >= 0.0) {
                    return Err(domain(format!(
                        "custom rates at state {state} must be finite and >= 0, got ({birth}, {death})"
                    )));
                }
                Rates { birth, death }
            }
        };
        if self.lower == Boundary::Reflecting(state) {
            r.death = 0.0;
        }
        if self.upper == Boundary::Reflecting(state) {
            r.birth = 0.0;
        }
        Ok(r)
    }

    /// Taboo bounds `(l, u)` for bridges of this model. A bridge may end on an
    /// absorbing bound (first passage) but never visits a bound before its end.
    pub fn taboo_bounds(&self) -> (Option<i64>, Option<i64>) {
        let lower = match self.lower {
            Boundary::Open => None,
            Boundary::Absorbing(a) => Some(a),
            Boundary::Reflecting(r) => Some(r - 1),
        };
        let upper = match self.upper {
            Boundary::Open => None,
            Boundary::Absorbing(a) => Some(a),
            Boundary::Reflecting(r) => Some(r + 1),
        };
        (lower, upper)
    }
}
