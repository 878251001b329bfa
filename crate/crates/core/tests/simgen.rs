mod common;

use common::{ks_critical, ks_statistic};
use statrs::distribution::{ContinuousCDF, Normal};
use tlshrink::simgen::{gen_replication, gen_truth, ScenarioConfig};
use tlshrink::RngStream;

fn phi(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

#[test]
fn sparse_signals_are_normal_around_the_mean() {
    let cfg = ScenarioConfig::sparse(1_000, 1, 0.2);
    let mut xs = Vec::new();
    for r in 0..10 {
        let t = gen_truth(&cfg, &RngStream::new(5, r)).unwrap();
        xs.extend(t.delta_0[..cfg.q()].iter().map(|d| d - 5.0));
    }
    assert!(ks_statistic(&xs, phi) < ks_critical(xs.len()));
}

#[test]
fn bounded_radius_fills_the_ball_uniformly() {
    // ‖δ⁰‖/R = U^{1/p}, so (‖δ⁰‖/R)^p is uniform.
    let cfg = ScenarioConfig::bounded(20, 1, 0.2);
    let us: Vec<f64> = (0..2_000)
        .map(|r| {
            let t = gen_truth(&cfg, &RngStream::new(6, r)).unwrap();
            let norm = t.delta_0.iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm / cfg.radius()).powi(20)
        })
        .collect();
    assert!(ks_statistic(&us, |u| u.clamp(0.0, 1.0)) < ks_critical(us.len()));
}

#[test]
fn sample_means_have_the_stated_variances() {
    let cfg = ScenarioConfig::sparse(500, 5, 0.2);
    let (truth, stats) = gen_replication(&cfg, &RngStream::new(7, 0)).unwrap();
    let s1 = (cfg.n1() as f64).sqrt();
    let s2 = (cfg.n2 as f64).sqrt();
    let e1: Vec<f64> = stats
        .ybar1
        .iter()
        .zip(&truth.beta1_0)
        .map(|(y, b)| (y - b) * s1)
        .collect();
    let e2: Vec<f64> = stats
        .ybar2
        .iter()
        .zip(&truth.beta2_0)
        .map(|(y, b)| (y - b) * s2)
        .collect();
    assert!(ks_statistic(&e1, phi) < ks_critical(e1.len()));
    assert!(ks_statistic(&e2, phi) < ks_critical(e2.len()));
}

#[test]
fn source_coefficients_are_uniform_on_the_range() {
    let cfg = ScenarioConfig::sparse(2_000, 1, 0.2);
    let t = gen_truth(&cfg, &RngStream::new(8, 0)).unwrap();
    assert!(ks_statistic(&t.beta1_0, |x| ((x + 3.0) / 6.0).clamp(0.0, 1.0)) < ks_critical(2_000));
}

#[test]
fn permuted_signals_keep_the_count() {
    let cfg = ScenarioConfig {
        permute: true,
        ..ScenarioConfig::sparse(100, 1, 0.2)
    };
    let t = gen_truth(&cfg, &RngStream::new(9, 0)).unwrap();
    assert_eq!(t.delta_0.iter().filter(|d| **d != 0.0).count(), 40);
    assert!(t.delta_0[40..].iter().any(|d| *d != 0.0));
}
