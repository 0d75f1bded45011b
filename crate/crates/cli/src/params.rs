//! Parsing of `k=v,...` parameter lists and `a:b:steps` ranges.

use std::collections::BTreeMap;

use bdbridge::inference::Grid;
use bdbridge::models::{BirthDeathModel, LbdiParams, SirParams, SisParams};
use clap::ValueEnum;

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Lbdi,
    Sis,
    Sir,
}

/// `key=value` pairs with every key checked against `allowed`.
pub fn parse_pairs(text: &str, allowed: &[&str]) -> Result<BTreeMap<String, f64>, Failure> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("parameter `{item}` is not of the form key=value")))?;
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(Failure::usage(format!("unknown parameter `{k}`; expected one of {}", allowed.join(", "))));
        }
        let v: f64 = v.trim().parse().map_err(|_| Failure::usage(format!("parameter `{k}`: `{v}` is not a number")))?;
        if out.insert(k.to_string(), v).is_some() {
            return Err(Failure::usage(format!("parameter `{k}` given twice")));
        }
    }
    Ok(out)
}

fn required(p: &BTreeMap<String, f64>, key: &str) -> Result<f64, Failure> {
    p.get(key).copied().ok_or_else(|| Failure::usage(format!("missing parameter `{key}`")))
}

fn count(p: &BTreeMap<String, f64>, key: &str) -> Result<u32, Failure> {
    let v = required(p, key)?;
    if v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
        return Err(Failure::usage(format!("parameter `{key}` must be a nonnegative integer, got {v}")));
    }
    Ok(v as u32)
}

pub fn sir_params(text: &str) -> Result<(SirParams, Option<u32>), Failure> {
    let p = parse_pairs(text, &["n0", "beta", "gamma", "s0"])?;
    let params = SirParams::new(count(&p, "n0")?, required(&p, "beta")?, required(&p, "gamma")?)?;
    let s0 = p.contains_key("s0").then(|| count(&p, "s0")).transpose()?;
    Ok((params, s0))
}

/// The birth-death model named by `kind`. SIR needs `s0`, the susceptible
/// count at the start of the interval.
pub fn model(kind: ModelKind, text: &str) -> Result<BirthDeathModel, Failure> {
    Ok(match kind {
        ModelKind::Lbdi => {
            let p = parse_pairs(text, &["lambda", "mu", "nu"])?;
            let nu = p.get("nu").copied().unwrap_or(0.0);
            BirthDeathModel::lbdi(LbdiParams::new(required(&p, "lambda")?, required(&p, "mu")?, nu)?)
        }
        ModelKind::Sis => {
            let p = parse_pairs(text, &["n0", "beta", "gamma"])?;
            BirthDeathModel::sis(SisParams::new(count(&p, "n0")?, required(&p, "beta")?, required(&p, "gamma")?)?)
        }
        ModelKind::Sir => {
            let (params, s0) = sir_params(text)?;
            let s0 = s0.ok_or_else(|| Failure::usage("the sir model needs `s0`"))?;
            BirthDeathModel::sir_as_bd(params, s0)?
        }
    })
}

pub fn lbdi_params(text: &str) -> Result<LbdiParams, Failure> {
    let p = parse_pairs(text, &["lambda", "mu", "nu"])?;
    Ok(LbdiParams::new(required(&p, "lambda")?, required(&p, "mu")?, p.get("nu").copied().unwrap_or(0.0))?)
}

/// `lo:hi:steps`.
pub fn grid(text: &str) -> Result<Grid, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Failure::usage(format!("range `{text}` is not of the form lo:hi:steps"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(Grid::new(lo, hi, steps)?)
}

/// Column-name fragment for a threshold given as a fraction: `0.001` is
/// 0.1% and becomes `0p1`.
pub fn percent_label(fraction: f64) -> String {
    let pct = format!("{}", (fraction * 100.0 * 1e9).round() / 1e9);
    pct.replace('.', "p").replace('-', "m")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs() {
        let p = parse_pairs("lambda=0.8, mu=0.6,nu=1.2", &["lambda", "mu", "nu"]).unwrap();
        assert_eq!(p["mu"], 0.6);
        assert!(parse_pairs("rho=1", &["lambda"]).is_err());
        assert!(parse_pairs("lambda", &["lambda"]).is_err());
        assert!(parse_pairs("lambda=x", &["lambda"]).is_err());
        assert!(parse_pairs("lambda=1,lambda=2", &["lambda"]).is_err());
    }

    #[test]
    fn ranges_and_labels() {
        assert_eq!(grid("0.1:0.3:3").unwrap().values().len(), 3);
        assert!(grid("0.1:0.3").is_err());
        assert_eq!(percent_label(0.001), "0p1");
        assert_eq!(percent_label(0.0001), "0p01");
        assert_eq!(percent_label(0.05), "5");
    }

    #[test]
    fn sir_needs_s0_as_birth_death() {
        assert!(model(ModelKind::Sir, "n0=10,beta=0.1,gamma=1").is_err());
        assert!(model(ModelKind::Sir, "n0=10,beta=0.1,gamma=1,s0=8").is_ok());
        assert!(model(ModelKind::Sis, "n0=10.5,beta=0.1,gamma=1").is_err());
    }
}
