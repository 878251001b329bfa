//! Shared machinery for the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tlshrink::hs_gibbs::{hs_gibbs_step, HsOptions, HsState};
use tlshrink::pcp::{pcp_gibbs_step, pcp_prior_sample, PcpOptions, PcpState};
use tlshrink::regression::RegressionTask;
use tlshrink::rng::{inv_gamma, std_normal};
use tlshrink::summary::{mcse, mean, variance};
use tlshrink::{RngStream, SufficientStats};

/// (name, z) per test function: the marginal-conditional mean against the
/// successive-conditional mean, scaled by both standard errors.
pub type Geweke = Vec<(&'static str, f64)>;

fn geweke_z(names: &[&'static str], forward: &[Vec<f64>], chain: &[Vec<f64>]) -> Geweke {
    names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let se_mc = (variance(&forward[k]) / forward[k].len() as f64).sqrt();
            let se_sc = mcse(&chain[k]).unwrap();
            (
                *name,
                (mean(&forward[k]) - mean(&chain[k])) / (se_mc * se_mc + se_sc * se_sc).sqrt(),
            )
        })
        .collect()
}

pub fn max_abs_z(g: &Geweke) -> f64 {
    g.iter().map(|(_, z)| z.abs()).fold(0.0, f64::max)
}

const HS_NAMES: [&str; 5] = [
    "atan(delta_0)",
    "atan(delta_0)^2",
    "ln tau2",
    "kappa_0",
    "ln sigma2",
];

fn hs_functions(s: &HsState) -> [f64; 5] {
    let a = s.delta[0].atan();
    [
        a,
        a * a,
        s.tau2.ln(),
        1.0 / (1.0 + s.lambda2[0] * s.tau2),
        s.sigma2.ln(),
    ]
}

fn hs_prior<R: Rng>(
    p: usize,
    noise_factor: f64,
    opts: &HsOptions,
    rng: &mut R,
) -> (HsState, Vec<f64>) {
    let nu = inv_gamma(rng, 0.5, 1.0);
    let tau2 = inv_gamma(rng, 0.5, 1.0 / nu);
    let sigma2 = match opts.fix_sigma {
        Some(s) => s * s,
        None => inv_gamma(rng, opts.a, opts.b),
    };
    let zeta: Vec<f64> = (0..p).map(|_| inv_gamma(rng, 0.5, 1.0)).collect();
    let lambda2: Vec<f64> = zeta.iter().map(|z| inv_gamma(rng, 0.5, 1.0 / z)).collect();
    let delta: Vec<f64> = lambda2
        .iter()
        .map(|l| (l * tau2 * sigma2 * noise_factor).sqrt() * std_normal(rng))
        .collect();
    let z = hs_data(&delta, sigma2 * noise_factor, rng);
    (
        HsState {
            delta,
            lambda2,
            tau2,
            sigma2,
            zeta,
            nu,
        },
        z,
    )
}

fn hs_data<R: Rng>(delta: &[f64], sigma_n2: f64, rng: &mut R) -> Vec<f64> {
    delta
        .iter()
        .map(|d| d + sigma_n2.sqrt() * std_normal(rng))
        .collect()
}

/// Geweke's two simulators for the horseshoe difference model.
pub fn geweke_hs(
    p: usize,
    noise_factor: f64,
    opts: &HsOptions,
    sweeps: usize,
    seed: u64,
) -> Geweke {
    let mut rng: ChaCha8Rng = RngStream::new(seed, 1).rng();
    let mut forward = vec![Vec::with_capacity(sweeps); 5];
    for _ in 0..sweeps {
        let (s, _) = hs_prior(p, noise_factor, opts, &mut rng);
        hs_functions(&s)
            .iter()
            .zip(forward.iter_mut())
            .for_each(|(v, col)| col.push(*v));
    }
    let mut chain = vec![Vec::with_capacity(sweeps); 5];
    let (mut state, mut z) = hs_prior(p, noise_factor, opts, &mut rng);
    for _ in 0..sweeps {
        hs_gibbs_step(&mut state, &z, noise_factor, opts, &mut rng).unwrap();
        z = hs_data(&state.delta, state.sigma2 * noise_factor, &mut rng);
        hs_functions(&state)
            .iter()
            .zip(chain.iter_mut())
            .for_each(|(v, col)| col.push(*v));
    }
    geweke_z(&HS_NAMES, &forward, &chain)
}

const PCP_NAMES: [&str; 5] = [
    "beta2_0",
    "beta2_0^2",
    "sigma2",
    "ln sigma2",
    "ln tilde_tau2",
];

fn pcp_functions(s: &PcpState) -> [f64; 5] {
    let b = s.beta2[0];
    [b, b * b, s.sigma2, s.sigma2.ln(), s.tilde_tau2.ln()]
}

fn pcp_prior<R: Rng>(stats: &mut SufficientStats, opts: &PcpOptions, rng: &mut R) -> PcpState {
    let n1 = stats.n1 as f64;
    let tilde_tau2 = pcp_prior_sample(opts.lambda, rng);
    let sigma2 = match opts.fix_sigma {
        Some(s) => s * s,
        None => inv_gamma(rng, opts.a, opts.b),
    };
    let sd = (sigma2 * (1.0 + tilde_tau2) / n1).sqrt();
    let beta2: Vec<f64> = stats
        .ybar1
        .iter()
        .map(|y| y + sd * std_normal(rng))
        .collect();
    pcp_data(stats, &beta2, sigma2, rng);
    PcpState {
        beta2,
        sigma2,
        tilde_tau2,
        mh_log_scale: 0.0,
        accept_count: 0,
        proposal_count: 0,
        error_count: 0,
    }
}

fn pcp_data<R: Rng>(stats: &mut SufficientStats, beta2: &[f64], sigma2: f64, rng: &mut R) {
    let sd = (sigma2 / stats.n2 as f64).sqrt();
    stats.ybar2 = beta2.iter().map(|b| b + sd * std_normal(rng)).collect();
}

/// Geweke's two simulators for the bounded-difference model. Ȳ₁ is held
/// fixed (the model conditions on it); Ȳ₂ is the simulated data. The
/// proposal scale is not adapted.
pub fn geweke_pcp(
    ybar1: &[f64],
    n1: u64,
    n2: u64,
    opts: &PcpOptions,
    sweeps: usize,
    seed: u64,
) -> Geweke {
    let mut rng: ChaCha8Rng = RngStream::new(seed, 2).rng();
    let mut stats = SufficientStats::new(ybar1.to_vec(), ybar1.to_vec(), n1, n2, 1.0).unwrap();
    let mut forward = vec![Vec::with_capacity(sweeps); 5];
    for _ in 0..sweeps {
        let s = pcp_prior(&mut stats, opts, &mut rng);
        pcp_functions(&s)
            .iter()
            .zip(forward.iter_mut())
            .for_each(|(v, col)| col.push(*v));
    }
    let mut chain = vec![Vec::with_capacity(sweeps); 5];
    let mut state = pcp_prior(&mut stats, opts, &mut rng);
    for _ in 0..sweeps {
        pcp_gibbs_step(&mut state, &stats, opts, &mut rng, None).unwrap();
        pcp_data(&mut stats, &state.beta2, state.sigma2, &mut rng);
        pcp_functions(&state)
            .iter()
            .zip(chain.iter_mut())
            .for_each(|(v, col)| col.push(*v));
    }
    geweke_z(&PCP_NAMES, &forward, &chain)
}

/// One-sample Kolmogorov–Smirnov statistic against `cdf`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Critical value at the 0.1% level for large n.
pub fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

/// Synthetic second-stage regression: Gaussian design, sparse δ⁰, source
/// coefficients estimated from `n1` observations with Σ̂ = σ²/n₁·I.
pub struct RegressionCase {
    pub task: RegressionTask,
    pub x_test: DMatrix<f64>,
    /// Test responses from the same β₂ as the training data.
    pub y_test: DVector<f64>,
    /// Test responses drawn as the covariance model states them:
    /// x*ᵀ(β̂₁ + δ⁰) plus N(0, σ²(1 + x*ᵀΣ̂x*)) noise, independent of the
    /// training data.
    pub y_test_model: DVector<f64>,
    pub beta2: DVector<f64>,
}

/// `nonzero` leading differences drawn N(2, 1).
pub fn regression_case(
    n: usize,
    p: usize,
    nonzero: usize,
    n1: usize,
    n_test: usize,
    seed: u64,
) -> RegressionCase {
    regression_case_with(n, p, n1, n_test, seed, |j, rng| {
        if j < nonzero {
            2.0 + std_normal(rng)
        } else {
            0.0
        }
    })
}

pub fn regression_case_with(
    n: usize,
    p: usize,
    n1: usize,
    n_test: usize,
    seed: u64,
    mut delta_j: impl FnMut(usize, &mut ChaCha8Rng) -> f64,
) -> RegressionCase {
    let mut rng: ChaCha8Rng = RngStream::new(seed, 3).rng();
    let beta1: DVector<f64> = DVector::from_fn(p, |_, _| rng.random_range(-3.0..3.0));
    let delta: DVector<f64> = DVector::from_fn(p, |j, _| delta_j(j, &mut rng));
    let beta2 = &beta1 + &delta;
    let s1 = (1.0 / n1 as f64).sqrt();
    let beta1_hat = beta1.map(|b| b + s1 * std_normal(&mut rng));
    let x = DMatrix::from_fn(n, p, |_, _| std_normal(&mut rng));
    let y = &x * &beta2 + DVector::from_fn(n, |_, _| std_normal(&mut rng));
    let x_test = DMatrix::from_fn(n_test, p, |_, _| std_normal(&mut rng));
    let y_test = &x_test * &beta2 + DVector::from_fn(n_test, |_, _| std_normal(&mut rng));
    let sigma_hat = DMatrix::identity(p, p) / n1 as f64;
    let centre = &x_test * (&beta1_hat + &delta);
    let y_test_model = DVector::from_fn(n_test, |i, _| {
        let row = x_test.row(i);
        let var = 1.0 + (row * &sigma_hat * row.transpose())[(0, 0)];
        centre[i] + var.sqrt() * std_normal(&mut rng)
    });
    let task = RegressionTask::new(x, y, beta1_hat, sigma_hat, None).unwrap();
    RegressionCase {
        task,
        x_test,
        y_test,
        y_test_model,
        beta2,
    }
}

/// Fraction of components whose Gibbs posterior mean (τ = 0.1, σ = 1 held
/// fixed, 10⁴ kept draws) lies within 4 MCSE of w(Zⱼ)·Zⱼ.
pub fn gibbs_matches_analytic(seed: u64) -> f64 {
    use tlshrink::hs_gibbs::hs_gibbs_run_z;
    use tlshrink::shrinkage::{shrinkage_weight, WeightParams};
    let p = 50;
    let mut rng: ChaCha8Rng = RngStream::new(seed, 4).rng();
    let z: Vec<f64> = (0..p)
        .map(|j| if j < 10 { 3.0 } else { 0.0 } + std_normal(&mut rng))
        .collect();
    let opts = HsOptions {
        iterations: 12_000,
        burn_in: 2_000,
        fix_tau: Some(0.1),
        fix_sigma: Some(1.0),
        ..HsOptions::default()
    };
    let draws = hs_gibbs_run_z(&z, 1.0, &opts, &RngStream::new(seed, 5)).unwrap();
    assert_eq!(draws.iterations(), 10_000);
    let params = WeightParams::new(0.1, 1.0).unwrap();
    let hits = (0..p)
        .filter(|&j| {
            let col = draws.column(j);
            let target = shrinkage_weight(z[j], &params) * z[j];
            (mean(&col) - target).abs() <= 4.0 * mcse(&col).unwrap()
        })
        .count();
    hits as f64 / p as f64
}

/// Weight properties on a 500-point grid of |z| ≤ 50 for τ = 1/p over the
/// simulation grid: range, symmetry, strict monotonicity, stability under a
/// finer rule and tighter tolerance, and finiteness at |z| = 200. Returns the
/// first violation.
pub fn quadrature_suite() -> Result<(), String> {
    use tlshrink::quadrature::GaussLegendre;
    use tlshrink::shrinkage::{log_ik, WeightParams, WeightQuadrature};
    let fine_rule = GaussLegendre::new(32);
    let fine = WeightQuadrature {
        rule: &fine_rule,
        rel_tol: 1e-14,
    };
    let coarse = WeightQuadrature::default();
    for p in [100usize, 500, 1000, 5000, 10_000] {
        for sigma_n2 in [1.0, 1.0 + 1.0 / p as f64] {
            let params = WeightParams::new(1.0 / p as f64, sigma_n2).map_err(|e| e.to_string())?;
            let mut prev = -1.0;
            for i in 0..500 {
                let z = 50.0 * i as f64 / 499.0;
                let w = coarse.weight(z, &params);
                if !(w > 0.0 && w < 1.0) {
                    return Err(format!("w({z}) = {w} outside (0,1) at p={p}"));
                }
                if w != coarse.weight(-z, &params) {
                    return Err(format!("w not even at z={z}, p={p}"));
                }
                if w <= prev {
                    return Err(format!("w not increasing at z={z}, p={p}: {prev} then {w}"));
                }
                prev = w;
                if i % 10 == 0 {
                    let d = (w - fine.weight(z, &params)).abs();
                    if d > 1e-8 {
                        return Err(format!("refinement moved w({z}) by {d} at p={p}"));
                    }
                }
            }
            for k in [-0.5, 0.5, 1.5] {
                let v = log_ik(k, 200.0, &params).map_err(|e| e.to_string())?;
                if !v.is_finite() {
                    return Err(format!("log I_{k}(200) = {v} at p={p}"));
                }
            }
            let w = coarse.weight(200.0, &params);
            if !(w.is_finite() && w > 0.99 && w < 1.0) {
                return Err(format!("w(200) = {w} at p={p}"));
            }
        }
    }
    Ok(())
}

pub struct RegressionCheck {
    /// Coverage of `y_test_model`.
    pub coverage: Vec<f64>,
    /// Coverage of `y_test`, where the target data also inform β₁.
    pub coverage_shared_source: Vec<f64>,
    pub hs_mse: Vec<f64>,
    pub ols_mse: Vec<f64>,
}

impl RegressionCheck {
    pub fn hs_wins(&self) -> usize {
        self.hs_mse
            .iter()
            .zip(&self.ols_mse)
            .filter(|(h, o)| h <= o)
            .count()
    }
}

/// HS regression against OLS on `seeds` synthetic problems with n₂ = 500,
/// p = 50 and five nonzero differences.
pub fn regression_check(seeds: std::ops::Range<u64>) -> RegressionCheck {
    use tlshrink::regression::{hs_regression_fit, ols_fit, predict, OlsOptions};
    let opts = HsOptions {
        iterations: 3_000,
        burn_in: 1_000,
        ..HsOptions::default()
    };
    let mut out = RegressionCheck {
        coverage: vec![],
        coverage_shared_source: vec![],
        hs_mse: vec![],
        ols_mse: vec![],
    };
    for seed in seeds {
        let case = regression_case(500, 50, 5, 1_000, 2_000, seed);
        let y_test: Vec<f64> = case.y_test.iter().copied().collect();
        let fit = hs_regression_fit(&case.task, &opts, &RngStream::new(seed, 6)).unwrap();
        let pred = predict(&case.task, &fit.draws, &case.x_test).unwrap();
        let (_, ols) = ols_fit(&case.task, &case.x_test, &OlsOptions::default()).unwrap();
        let y_model: Vec<f64> = case.y_test_model.iter().copied().collect();
        out.coverage.push(pred.coverage(&y_model).unwrap());
        out.coverage_shared_source
            .push(pred.coverage(&y_test).unwrap());
        out.hs_mse.push(pred.mse(&y_test).unwrap());
        out.ols_mse.push(ols.mse(&y_test).unwrap());
    }
    out
}

/// Regression with X = I, Σ̂ = 0 and β̂₁ = 0 must replay the means sampler
/// draw for draw.
pub fn identity_design_replays_means_chain(seed: u64) -> bool {
    use tlshrink::hs_gibbs::hs_gibbs_run_z;
    use tlshrink::regression::hs_regression_fit;
    let p = 12;
    let mut rng: ChaCha8Rng = RngStream::new(seed, 7).rng();
    let z: Vec<f64> = (0..p)
        .map(|j| if j < 3 { 4.0 } else { 0.0 } + std_normal(&mut rng))
        .collect();
    let task = RegressionTask::exact_source(
        DMatrix::identity(p, p),
        DVector::from_vec(z.clone()),
        DVector::zeros(p),
    )
    .unwrap();
    let opts = HsOptions {
        iterations: 600,
        burn_in: 100,
        ..HsOptions::default()
    };
    let stream = RngStream::new(seed, 8);
    let fit = hs_regression_fit(&task, &opts, &stream).unwrap();
    let means = hs_gibbs_run_z(&z, 1.0, &opts, &stream).unwrap();
    fit.draws.draws == means.draws
        && fit.draws.scalar("sigma2") == means.scalar("sigma2")
        && fit.draws.scalar("tau2") == means.scalar("tau2")
}
