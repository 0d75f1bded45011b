//! Grid maximum likelihood for the SIR rates `(beta, gamma)` using the
//! bridge filter, with profile-likelihood intervals and `R0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::Observations;
use crate::error::{domain, Result};
use crate::filters::igbs_filter_loglik;
use crate::models::SirParams;
use crate::rng::RngStream;

/// Half-width of a 95% chi-square(1) profile-likelihood interval, in nats.
pub const PROFILE_DROP_95: f64 = 1.92;

/// `steps` evenly spaced values from `lo` to `hi` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0) {
            return Err(domain(format!("grid bounds must be finite and >= 0, got {lo}..{hi}")));
        }
        if steps == 0 || (steps > 1 && hi <= lo) || (steps == 1 && hi < lo) {
            return Err(domain(format!("bad grid {lo}:{hi}:{steps}")));
        }
        Ok(Self { lo, hi, steps })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| if k + 1 == self.steps { self.hi } else { self.lo + h * k as f64 }).collect()
    }

    pub fn spacing(&self) -> f64 {
        if self.steps > 1 {
            (self.hi - self.lo) / (self.steps - 1) as f64
        } else {
            0.0
        }
    }
}

/// Seed-averaged log-likelihood over a `(beta, gamma)` grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Surface {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// `loglik[b][g]`, the mean over replications.
    pub loglik: Vec<Vec<f64>>,
    /// Sample standard deviation across replications (0 for one replication).
    pub spread: Vec<Vec<f64>>,
}

impl Surface {
    /// Index and value of the largest finite cell; ties go to the first.
    pub fn argmax(&self) -> Option<((usize, usize), f64)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for (b, row) in self.loglik.iter().enumerate() {
            for (g, &v) in row.iter().enumerate() {
                if v.is_finite() && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some(((b, g), v));
                }
            }
        }
        best
    }

    /// `max_gamma loglik(beta, gamma)` for each beta.
    pub fn profile_beta(&self) -> Vec<f64> {
        self.loglik.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect()
    }

    /// `max_beta loglik(beta, gamma)` for each gamma.
    pub fn profile_gamma(&self) -> Vec<f64> {
        (0..self.gammas.len())
            .map(|g| self.loglik.iter().map(|row| row[g]).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta,gamma,loglik,spread\n");
        for (b, beta) in self.betas.iter().enumerate() {
            for (g, gamma) in self.gammas.iter().enumerate() {
                out.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    beta, gamma, self.loglik[b][g], self.spread[b][g]
                ));
            }
        }
        out
    }
}

/// The model setting shared by every cell of a surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SirSetting {
    /// Closed population size.
    pub n0: u32,
    /// Infectives at the first record.
    pub i0: u32,
}

impl SirSetting {
    /// `n0 = S_0 + i0`.
    pub fn closed(obs: &Observations, i0: u32) -> Self {
        Self { n0: obs.susceptibles()[0] + i0, i0 }
    }
}

/// Log-likelihood averaged over `replications` independent filter runs at
/// each grid point. Cell `(b, g)` uses streams derived from its index only.
#[allow(clippy::too_many_arguments)]
pub fn loglik_surface(
    obs: &Observations,
    setting: SirSetting,
    betas: &[f64],
    gammas: &[f64],
    m: u64,
    replications: usize,
    stream: RngStream,
) -> Result<Surface> {
    if betas.is_empty() || gammas.is_empty() {
        return Err(domain("grids must be nonempty"));
    }
    if replications == 0 {
        return Err(domain("replications must be at least 1"));
    }
    let ng = gammas.len();
    let cells: Vec<(f64, f64)> = (0..betas.len() * ng)
        .into_par_iter()
        .map(|c| -> Result<(f64, f64)> {
            let params = SirParams::new(setting.n0, betas[c / ng], gammas[c % ng])?;
            let cell = stream.split(c as u64);
            let runs = (0..replications)
                .map(|r| igbs_filter_loglik(&params, obs, setting.i0, m, cell.split(r as u64)))
                .collect::<Result<Vec<f64>>>()?;
            Ok(mean_and_spread(&runs))
        })
        .collect::<Result<_>>()?;
    let mut loglik = vec![vec![0.0; ng]; betas.len()];
    let mut spread = vec![vec![0.0; ng]; betas.len()];
    for (c, (v, s)) in cells.into_iter().enumerate() {
        loglik[c / ng][c % ng] = v;
        spread[c / ng][c % ng] = s;
    }
    Ok(Surface { betas: betas.to_vec(), gammas: gammas.to_vec(), loglik, spread })
}

fn mean_and_spread(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if !mean.is_finite() || xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `{x : profile(x) >= max - drop}` on a sampled profile, with the crossing
/// points found by linear interpolation between grid nodes. The flags say
/// whether an end was clipped at the grid edge.
pub fn profile_interval(xs: &[f64], profile: &[f64], drop: f64) -> Option<ProfileInterval> {
    let (top, &best) = profile
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let cut = best - drop;
    let cross = |a: usize, b: usize| {
        let (fa, fb) = (profile[a], profile[b]);
        if !fb.is_finite() {
            return xs[b];
        }
        xs[a] + (xs[b] - xs[a]) * (fa - cut) / (fa - fb)
    };
    let mut lo_k = top;
    while lo_k > 0 && profile[lo_k - 1] >= cut {
        lo_k -= 1;
    }
    let mut hi_k = top;
    while hi_k + 1 < xs.len() && profile[hi_k + 1] >= cut {
        hi_k += 1;
    }
    let (lo, clipped_lo) = if lo_k == 0 { (xs[0], true) } else { (cross(lo_k, lo_k - 1), false) };
    let n = xs.len() - 1;
    let (hi, clipped_hi) = if hi_k == n { (xs[n], true) } else { (cross(hi_k, hi_k + 1), false) };
    Some(ProfileInterval { lo, hi, clipped_lo, clipped_hi })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileInterval {
    pub lo: f64,
    pub hi: f64,
    pub clipped_lo: bool,
    pub clipped_hi: bool,
}

impl ProfileInterval {
    fn cover(mut self, x: f64) -> Self {
        self.lo = self.lo.min(x);
        self.hi = self.hi.max(x);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitConfig {
    pub setting: SirSetting,
    pub beta: Grid,
    pub gamma: Grid,
    /// Total grid levels; each level after the first spans one cell of the
    /// previous level on each side of its argmax.
    pub levels: usize,
    /// Points per axis on refinement levels.
    pub refine_steps: usize,
    /// Bridge filter replicates per step.
    pub m: u64,
    pub replications: usize,
    /// Log-likelihood drop defining the profile intervals.
    pub drop: f64,
}

impl FitConfig {
    pub fn new(setting: SirSetting, beta: Grid, gamma: Grid) -> Self {
        Self {
            setting,
            beta,
            gamma,
            levels: 2,
            refine_steps: 5,
            m: crate::filters::DEFAULT_REPLICATES,
            replications: 5,
            drop: PROFILE_DROP_95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub beta_hat: f64,
    pub gamma_hat: f64,
    pub loglik_max: f64,
    pub ci_beta: ProfileInterval,
    pub ci_gamma: ProfileInterval,
    pub ci_method: String,
    /// `beta_hat * n0 / gamma_hat`.
    pub r0: f64,
    /// The argmax sits on the edge of the first-level grid.
    pub boundary_warning: bool,
    /// First-level surface, from which the intervals are profiled.
    pub surface: Surface,
    /// One surface per refinement level.
    pub refinements: Vec<Surface>,
}

/// Coarse-to-fine grid search for the maximum likelihood estimate.
pub fn fit_mle(obs: &Observations, config: &FitConfig, stream: RngStream) -> Result<FitResult> {
    if config.levels == 0 {
        return Err(domain("at least one grid level is needed"));
    }
    let coarse = loglik_surface(
        obs,
        config.setting,
        &config.beta.values(),
        &config.gamma.values(),
        config.m,
        config.replications,
        stream.split(0),
    )?;
    let ((b0, g0), mut best) = coarse.argmax().ok_or_else(|| domain("log-likelihood is -inf on the whole grid"))?;
    let boundary_warning = b0 == 0 || g0 == 0 || b0 + 1 == coarse.betas.len() || g0 + 1 == coarse.gammas.len();
    let (mut beta_hat, mut gamma_hat) = (coarse.betas[b0], coarse.gammas[g0]);
    let (mut hb, mut hg) = (config.beta.spacing(), config.gamma.spacing());
    let mut refinements = Vec::new();
    for level in 1..config.levels {
        let bg = Grid::new((beta_hat - hb).max(0.0), beta_hat + hb, config.refine_steps.max(1))?;
        let gg = Grid::new((gamma_hat - hg).max(0.0), gamma_hat + hg, config.refine_steps.max(1))?;
        let fine = loglik_surface(
            obs,
            config.setting,
            &bg.values(),
            &gg.values(),
            config.m,
            config.replications,
            stream.split(level as u64),
        )?;
        if let Some(((b, g), v)) = fine.argmax() {
            beta_hat = fine.betas[b];
            gamma_hat = fine.gammas[g];
            best = v;
        }
        hb = bg.spacing();
        hg = gg.spacing();
        refinements.push(fine);
    }
    let ci_beta = profile_interval(&coarse.betas, &coarse.profile_beta(), config.drop)
        .expect("coarse surface has a finite cell")
        .cover(beta_hat);
    let ci_gamma = profile_interval(&coarse.gammas, &coarse.profile_gamma(), config.drop)
        .expect("coarse surface has a finite cell")
        .cover(gamma_hat);
    Ok(FitResult {
        beta_hat,
        gamma_hat,
        loglik_max: best,
        ci_beta,
        ci_gamma,
        ci_method: format!("profile likelihood, drop {} (chi-square(1) 95%)", config.drop),
        r0: r0(beta_hat, gamma_hat, config.setting.n0),
        boundary_warning,
        surface: coarse,
        refinements,
    })
}

/// Basic reproduction number `beta n0 / gamma`.
pub fn r0(beta: f64, gamma: f64, n0: u32) -> f64 {
    beta * f64::from(n0) / gamma
}
