//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use bdbridge::models::BirthDeathModel;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

/// Row `i` of `exp(Q t)` for the model's generator truncated to
/// `lo..=hi` (births out of `hi` are suppressed), by uniformization.
pub fn generator_row(model: &BirthDeathModel, lo: i64, hi: i64, i: i64, t: f64) -> Vec<f64> {
    let n = (hi - lo + 1) as usize;
    let rates: Vec<(f64, f64)> = (lo..=hi)
        .map(|y| {
            let r = model.rates(y).unwrap();
            (if y == hi { 0.0 } else { r.birth }, if y == lo { 0.0 } else { r.death })
        })
        .collect();
    let lambda = rates.iter().map(|(b, d)| b + d).fold(0.0, f64::max).max(1e-12);
    let mut v = vec![0.0; n];
    v[(i - lo) as usize] = 1.0;
    let mut out = vec![0.0; n];
    uniformize(lambda * t, &mut v, &mut out, |v, next| {
        for k in 0..n {
            let (b, d) = rates[k];
            let stay = 1.0 - (b + d) / lambda;
            next[k] += v[k] * stay;
            if k + 1 < n {
                next[k + 1] += v[k] * b / lambda;
            }
            if k > 0 {
                next[k - 1] += v[k] * d / lambda;
            }
        }
    });
    out
}

/// `p^B_{i,j}(t)` for every `j` in `lo..=hi` and `B <= b_max`: the chain
/// is augmented with its up-jump count, and mass that exceeds `b_max` ups
/// is dropped. Result is indexed `[b][j - lo]`.
pub fn restricted_rows(model: &BirthDeathModel, lo: i64, hi: i64, i: i64, t: f64, b_max: usize) -> Vec<Vec<f64>> {
    let n = (hi - lo + 1) as usize;
    let rates: Vec<(f64, f64)> = (lo..=hi)
        .map(|y| {
            let r = model.rates(y).unwrap();
            (if y == hi { 0.0 } else { r.birth }, if y == lo { 0.0 } else { r.death })
        })
        .collect();
    let lambda = rates.iter().map(|(b, d)| b + d).fold(0.0, f64::max).max(1e-12);
    let width = b_max + 1;
    let mut v = vec![0.0; n * width];
    v[(i - lo) as usize] = 1.0;
    let mut out = vec![0.0; n * width];
    uniformize(lambda * t, &mut v, &mut out, |v, next| {
        for b in 0..width {
            for k in 0..n {
                let x = v[b * n + k];
                if x == 0.0 {
                    continue;
                }
                let (br, dr) = rates[k];
                next[b * n + k] += x * (1.0 - (br + dr) / lambda);
                if k + 1 < n && b + 1 < width {
                    next[(b + 1) * n + k + 1] += x * br / lambda;
                }
                if k > 0 {
                    next[b * n + k - 1] += x * dr / lambda;
                }
            }
        }
    });
    out.chunks(n).map(<[f64]>::to_vec).collect()
}

/// `out = sum_k Poisson(lt; k) v P^k`, with `step(v, next)` adding `v P` into `next`.
fn uniformize(lt: f64, v: &mut Vec<f64>, out: &mut [f64], step: impl Fn(&[f64], &mut [f64])) {
    let pois = Poisson::new(lt.max(1e-300)).unwrap();
    let kmax = (lt + 12.0 * lt.sqrt() + 40.0) as u64;
    let mut next = vec![0.0; v.len()];
    for k in 0..=kmax {
        let w = pois.pmf(k);
        out.iter_mut().zip(v.iter()).for_each(|(o, x)| *o += w * x);
        next.iter_mut().for_each(|x| *x = 0.0);
        step(v, &mut next);
        std::mem::swap(v, &mut next);
    }
}

/// Upper-tail p-value of Pearson's statistic for observed counts against
/// expected counts.
pub fn chi_square_p(observed: &[u64], expected: &[f64]) -> f64 {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let df = (observed.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

/// Two-sided one-sample Kolmogorov-Smirnov p-value (asymptotic law with
/// Stephens' small-sample correction).
pub fn ks_p(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    let lam = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        p += 2.0 * (-1f64).powi(j - 1) * (-2.0 * jf * jf * lam * lam).exp();
    }
    p.clamp(0.0, 1.0)
}

/// Exact one step of the susceptible-count filter: from the prior over
/// `I` at `S = s_prev`, the probability of observing exactly `b` new
/// infections within `dt`, and the posterior over `I` afterwards. The
/// chain on `(I, infections so far)` is the SIR chain itself.
pub fn sir_step_oracle(beta: f64, gamma: f64, s_prev: u32, prior: &[f64], b: usize, dt: f64) -> (f64, Vec<f64>) {
    let n = prior.len() + b;
    let width = b + 1;
    let rate = |i: usize, k: usize| {
        let s = f64::from(s_prev) - k as f64;
        (if k < b { beta * s * i as f64 } else { 0.0 }, gamma * i as f64)
    };
    // infections beyond b leave the tracked set, so they count as leaving mass
    let out_rate = |i: usize, k: usize| if k == b { beta * (f64::from(s_prev) - k as f64) * i as f64 } else { 0.0 };
    let lambda = (0..n)
        .flat_map(|i| (0..width).map(move |k| (i, k)))
        .map(|(i, k)| {
            let (br, dr) = rate(i, k);
            br + dr + out_rate(i, k)
        })
        .fold(0.0, f64::max)
        .max(1e-12);
    let mut v = vec![0.0; n * width];
    for (i, &p) in prior.iter().enumerate() {
        v[i] = p;
    }
    let mut out = vec![0.0; n * width];
    uniformize(lambda * dt, &mut v, &mut out, |v, next| {
        for k in 0..width {
            for i in 0..n {
                let x = v[k * n + i];
                if x == 0.0 {
                    continue;
                }
                let (br, dr) = rate(i, k);
                next[k * n + i] += x * (1.0 - (br + dr + out_rate(i, k)) / lambda);
                if br > 0.0 {
                    next[(k + 1) * n + i + 1] += x * br / lambda;
                }
                if dr > 0.0 {
                    next[k * n + i - 1] += x * dr / lambda;
                }
            }
        }
    });
    let joint: Vec<f64> = out[b * n..(b + 1) * n].to_vec();
    let total: f64 = joint.iter().sum();
    (total, joint.iter().map(|x| x / total).collect())
}
