mod common;

use std::collections::HashMap;

use bdbridge::counting::{enumerate_bridges, BridgeSpec};
use bdbridge::sampler::{draw_uniform_times, sample_bridge, sample_times, SkeletonMethod, SkeletonSampler};
use bdbridge::RngStream;
use common::{chi_square_p, ks_p};
use statrs::distribution::{Beta, ContinuousCDF};

fn skeleton_frequencies(spec: &BridgeSpec, method: SkeletonMethod, draws: usize, seed: u64) -> Vec<u64> {
    let all = enumerate_bridges(spec).unwrap();
    let index: HashMap<Vec<i64>, usize> = all.iter().cloned().enumerate().map(|(k, p)| (p, k)).collect();
    let sampler = SkeletonSampler::new(spec, method).unwrap();
    let mut rng = RngStream::from_seed(seed).generator();
    let mut counts = vec![0u64; all.len()];
    for _ in 0..draws {
        counts[index[&sampler.sample(&mut rng).unwrap()]] += 1;
    }
    counts
}

#[test]
fn unbounded_skeletons_are_uniform() {
    let spec = BridgeSpec::unbounded(5, 5, 2, 1.0).unwrap();
    for method in [SkeletonMethod::Rejection, SkeletonMethod::Unrank] {
        let counts = skeleton_frequencies(&spec, method, 60_000, 21);
        assert_eq!(counts.len(), 6);
        let p = chi_square_p(&counts, &[10_000.0; 6]);
        assert!(p > 0.001, "{method:?}: p = {p}");
    }
}

#[test]
fn corridor_skeletons_are_uniform() {
    let spec = BridgeSpec::new(2, 3, 4, 1.0, Some(0), Some(5)).unwrap();
    for method in [SkeletonMethod::Rejection, SkeletonMethod::Unrank] {
        let counts = skeleton_frequencies(&spec, method, 1000 * 30, 22);
        let card = counts.len();
        let expected = vec![30_000.0 / card as f64; card];
        let p = chi_square_p(&counts, &expected);
        assert!(p > 0.001, "{method:?}: p = {p}");
    }
}

#[test]
fn order_statistics_follow_beta_marginals() {
    let (k, t) = (5usize, 2.0);
    let reps = 100_000;
    let mut rng = RngStream::from_seed(23).generator();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); k];
    for _ in 0..reps {
        let tau = sample_times(k, t, &mut rng).unwrap();
        for (c, x) in cols.iter_mut().zip(tau) {
            c.push(x);
        }
    }
    for (idx, col) in cols.iter_mut().enumerate() {
        let r = idx + 1;
        let law = Beta::new(r as f64, (k - r + 1) as f64).unwrap();
        let p = ks_p(col, |x| law.cdf(x / t));
        assert!(p > 0.001, "order statistic {r}: p = {p}");
    }
}

#[test]
fn arrival_orders_are_exchangeable() {
    for k in 2..=4usize {
        let mut rng = RngStream::from_seed(24 + k as u64).generator();
        let perms: usize = (1..=k).product();
        let reps = 2000 * perms;
        let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
        for _ in 0..reps {
            let x = draw_uniform_times(k, 1.0, &mut rng);
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
            *counts.entry(order).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), perms);
        let observed: Vec<u64> = counts.into_values().collect();
        let p = chi_square_p(&observed, &vec![reps as f64 / perms as f64; perms]);
        assert!(p > 0.001, "K={k}: p = {p}");
    }
}

#[test]
fn fixed_stream_reproduces_paths() {
    let spec = BridgeSpec::new(3, 2, 3, 1.5, Some(0), Some(7)).unwrap();
    let run = || {
        let mut rng = RngStream::new(25, 4).generator();
        (0..50).map(|_| sample_bridge(&spec, &mut rng).unwrap()).collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let bits = |v: &Vec<bdbridge::sampler::BridgePath>| v.iter().flat_map(|p| p.times.iter().map(|t| t.to_bits())).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn accepted_law_does_not_depend_on_retries() {
    // corridor {1, 2, 3}: 8 of the 70 shuffles survive
    let spec = BridgeSpec::new(1, 1, 4, 1.0, Some(0), Some(4)).unwrap();
    let all = enumerate_bridges(&spec).unwrap();
    let index: HashMap<Vec<i64>, usize> = all.iter().cloned().enumerate().map(|(k, p)| (p, k)).collect();
    let sampler = SkeletonSampler::new(&spec, SkeletonMethod::Rejection).unwrap();
    assert!((sampler.acceptance_rate() - 8.0 / 70.0).abs() < 1e-12);
    let mut rng = RngStream::from_seed(27).generator();
    let mut first = vec![0u64; all.len()];
    let mut retried = vec![0u64; all.len()];
    for _ in 0..60_000 {
        let (sk, a) = sampler.sample_with_stats(&mut rng).unwrap();
        let group = if a == 1 { &mut first } else { &mut retried };
        group[index[&sk]] += 1;
    }
    for group in [&first, &retried] {
        let n: u64 = group.iter().sum();
        assert!(n > 1000);
        let p = chi_square_p(group, &vec![n as f64 / all.len() as f64; all.len()]);
        assert!(p > 0.001, "p = {p}");
    }
}
