//! Bounded-difference model with a penalized-complexity prior.
//!
//! The second stage is β₂ | Ȳ₁, σ², τ̃² ~ N(Ȳ₁, σ²(1+τ̃²)/n₁) with
//! Ȳ₂ | β₂, σ² ~ N(β₂, σ²/n₂), where τ̃² = τ²/(σ²/n₁). The base model τ̃² = 0
//! pools the two tasks. The prior puts an Exp(λ) law on the scaled
//! Kullback–Leibler distance d(τ̃²) = √(τ̃² − log(1+τ̃²)).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{inv_gamma, std_normal, RngStream};
use crate::summary::summarize;
use crate::types::{EstimateResult, Method, PosteriorDraws, SufficientStats};

/// Below this τ̃² the distance and density use their series expansions.
pub const SERIES_SWITCH: f64 = 1e-4;

/// x − log(1+x), accurate for small x.
fn excess(x: f64) -> f64 {
    if x < SERIES_SWITCH {
        x * x * (0.5 - x * (1.0 / 3.0 - x * (0.25 - x / 5.0)))
    } else {
        x - x.ln_1p()
    }
}

pub fn kl_distance(tilde_tau2: f64) -> Result<f64> {
    if !(tilde_tau2 >= 0.0) {
        return Err(invalid(format!(
            "tilde_tau2 must be nonnegative, got {tilde_tau2}"
        )));
    }
    Ok(excess(tilde_tau2).sqrt())
}

/// Log density of τ̃² induced by d(τ̃²) ~ Exp(λ):
/// log{λ τ̃²/(1+τ̃²)} − λ d − log(2 d). The ratio τ̃²/d has the finite limit √2
/// at zero, so the density tends to λ/√2.
pub fn pcp_log_density(tilde_tau2: f64, lambda: f64) -> f64 {
    let x = tilde_tau2;
    if !(x >= 0.0) || x.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let d = excess(x).sqrt();
    let log_ratio = if x < SERIES_SWITCH {
        // τ̃²/d = 1/√(1/2 − x/3 + x²/4 − x³/5)
        -0.5 * (0.5 - x * (1.0 / 3.0 - x * (0.25 - x / 5.0))).ln()
    } else {
        x.ln() - d.ln()
    };
    lambda.ln() + log_ratio - x.ln_1p() - lambda * d - std::f64::consts::LN_2
}

/// Invert d(τ̃²) = d by safeguarded Newton iteration.
pub fn tilde_tau2_from_distance(d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    let target = d * d;
    let (mut lo, mut hi) = (0.0, target + (1.0 + target).ln() + 2.0);
    let mut x = if d < 0.1 {
        std::f64::consts::SQRT_2 * d
    } else {
        target + (1.0 + target).ln()
    };
    for _ in 0..200 {
        let f = excess(x) - target;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = f * (1.0 + x) / x;
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-300) {
            return next;
        }
        x = next;
    }
    x
}

/// Draw τ̃² from the prior by sampling the distance and inverting it.
pub fn pcp_prior_sample<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    let d: f64 = Exp::new(lambda).expect("positive rate").sample(rng);
    tilde_tau2_from_distance(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Shape {
    /// p + a: what conditioning on β₂ and Ȳ₂ yields.
    Derived,
    /// 2p + a: the shape as it is usually printed for this sampler.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalTuning {
    /// Robbins–Monro on the log proposal scale toward `target_accept`.
    RobbinsMonro,
    /// Scale set from the curvature of the log target at the current point.
    Hessian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcpOptions {
    pub lambda: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub a: f64,
    pub b: f64,
    pub target_accept: f64,
    pub sigma2_shape: Sigma2Shape,
    pub tuning: ProposalTuning,
    pub fix_tilde_tau2: Option<f64>,
    pub fix_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_path: Option<PathBuf>,
}

impl Default for PcpOptions {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            iterations: 10_000,
            burn_in: 2_000,
            thin: 1,
            a: 0.5,
            b: 0.5,
            target_accept: 0.44,
            sigma2_shape: Sigma2Shape::Derived,
            tuning: ProposalTuning::RobbinsMonro,
            fix_tilde_tau2: None,
            fix_sigma: None,
            dump_path: None,
        }
    }
}

impl PcpOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.iterations <= self.burn_in {
            return Err(invalid("iterations must exceed burn_in"));
        }
        if self.thin == 0 {
            return Err(invalid("thin must be at least 1"));
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(invalid("inverse-gamma prior needs a > 0 and b > 0"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(invalid("target_accept must lie in (0,1)"));
        }
        if let Some(t) = self.fix_tilde_tau2 {
            if !(t >= 0.0) {
                return Err(invalid("fix_tilde_tau2 must be nonnegative"));
            }
        }
        if let Some(s) = self.fix_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("fix_sigma must be positive"));
            }
        }
        Ok(())
    }

    pub fn sigma2_shape_value(&self, p: usize) -> f64 {
        match self.sigma2_shape {
            Sigma2Shape::Derived => p as f64 + self.a,
            Sigma2Shape::Printed => 2.0 * p as f64 + self.a,
        }
    }

    fn is_kept(&self, iter: usize) -> bool {
        iter >= self.burn_in && (iter - self.burn_in) % self.thin == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcpState {
    pub beta2: Vec<f64>,
    pub sigma2: f64,
    pub tilde_tau2: f64,
    pub mh_log_scale: f64,
    pub accept_count: u64,
    pub proposal_count: u64,
    pub error_count: u64,
}

impl PcpState {
    /// β₂ = Ȳ₂, τ̃² = 1 and σ² at the supplied noise level.
    pub fn initial(stats: &SufficientStats, opts: &PcpOptions) -> Self {
        let sigma = opts.fix_sigma.unwrap_or(stats.sigma);
        Self {
            beta2: stats.ybar2.clone(),
            sigma2: sigma * sigma,
            tilde_tau2: opts.fix_tilde_tau2.unwrap_or(1.0),
            mh_log_scale: 0.0,
            accept_count: 0,
            proposal_count: 0,
            error_count: 0,
        }
    }
}

/// Weight on Ȳ₂ − Ȳ_T and the variance factor of the β₂ conditional:
/// mean = Ȳ_T + w(Ȳ₂ − Ȳ_T), variance = σ²·v.
pub fn beta2_conditional_factors(n1: f64, n2: f64, tilde_tau2: f64) -> (f64, f64) {
    let nt = n1 + n2;
    if tilde_tau2.is_infinite() {
        return (1.0, 1.0 / n2);
    }
    let denom = nt + n2 * tilde_tau2;
    (n2 * tilde_tau2 / denom, (1.0 + tilde_tau2) / denom)
}

/// Conditional mean and variance of β₂ⱼ written in the original scale τ²:
/// μⱼ = Ȳ_Tⱼ + κ(1−q_n)(Ȳ₂ⱼ − Ȳ₁ⱼ), vⱼ = (σ²/n₂)(q_n + τ²/σ_n²)/(1 + τ²/σ_n²),
/// with κ = (τ²/σ_n²)/(1+τ²/σ_n²) and q_n = n₂/n_T.
pub fn beta2_conditional_tau_scale(
    ybar1: f64,
    ybar2: f64,
    n1: f64,
    n2: f64,
    sigma2: f64,
    tau2: f64,
) -> (f64, f64) {
    let nt = n1 + n2;
    let qn = n2 / nt;
    let sigma_n2 = sigma2 * (1.0 / n1 + 1.0 / n2);
    let r = tau2 / sigma_n2;
    let kappa = r / (1.0 + r);
    let ybar_t = (n1 * ybar1 + n2 * ybar2) / nt;
    (
        ybar_t + kappa * (1.0 - qn) * (ybar2 - ybar1),
        sigma2 / n2 * (qn + r) / (1.0 + r),
    )
}

struct TauTarget {
    lambda: f64,
    p: f64,
    n1: f64,
    source_ss: f64,
    sigma2: f64,
}

impl TauTarget {
    /// Log full conditional of η = log τ̃², Jacobian included.
    fn log_density(&self, eta: f64) -> f64 {
        let t = eta.exp();
        if t.is_infinite() {
            return f64::NEG_INFINITY;
        }
        pcp_log_density(t, self.lambda)
            - 0.5 * self.p * t.ln_1p()
            - self.n1 * self.source_ss / (2.0 * self.sigma2 * (1.0 + t))
            + eta
    }
}

pub(crate) struct MhOutcome {
    pub eta: f64,
    pub accepted: bool,
    pub nan: bool,
}

/// Random-walk Metropolis step on a log-scale parameter. During burn-in
/// (`adapt_iter` set) the proposal scale is tuned per `opts.tuning`.
pub(crate) fn mh_log_step<R: Rng + ?Sized, F: Fn(f64) -> f64>(
    eta: f64,
    log_target: &F,
    log_scale: &mut f64,
    adapt_iter: Option<usize>,
    opts: &PcpOptions,
    rng: &mut R,
) -> MhOutcome {
    if let (Some(_), ProposalTuning::Hessian) = (adapt_iter, opts.tuning) {
        let h = 1e-3;
        let c = (log_target(eta + h) - 2.0 * log_target(eta) + log_target(eta - h)) / (h * h);
        if c < 0.0 && c.is_finite() {
            *log_scale = (2.4 / (-c).sqrt()).ln();
        }
    }
    let proposal = eta + log_scale.exp() * std_normal(rng);
    let log_ratio = log_target(proposal) - log_target(eta);
    let nan = log_ratio.is_nan();
    let accept_prob = if nan { 0.0 } else { log_ratio.min(0.0).exp() };
    let u: f64 = rng.random();
    let accepted = u < accept_prob;
    if let (Some(t), ProposalTuning::RobbinsMonro) = (adapt_iter, opts.tuning) {
        let gain = 1.0 / (t as f64 + 1.0).powf(0.6);
        *log_scale += gain * (accept_prob - opts.target_accept);
    }
    MhOutcome {
        eta: if accepted { proposal } else { eta },
        accepted,
        nan,
    }
}

/// One sweep: β₂, then σ², then a Metropolis update of log τ̃². When
/// `adapt_iter` is `Some(t)` the proposal scale is tuned (burn-in only).
pub fn pcp_gibbs_step<R: Rng + ?Sized>(
    state: &mut PcpState,
    stats: &SufficientStats,
    opts: &PcpOptions,
    rng: &mut R,
    adapt_iter: Option<usize>,
) -> Result<()> {
    let p = stats.p();
    let (n1, n2) = (stats.n1 as f64, stats.n2 as f64);
    let nt = n1 + n2;

    // β₂
    let (w, vf) = beta2_conditional_factors(n1, n2, state.tilde_tau2);
    let sd = (state.sigma2 * vf).sqrt();
    for j in 0..p {
        let (y1, y2) = (stats.ybar1[j], stats.ybar2[j]);
        let yt = (n1 * y1 + n2 * y2) / nt;
        state.beta2[j] = yt + w * (y2 - yt) + sd * std_normal(rng);
    }

    let target_ss: f64 = stats
        .ybar2
        .iter()
        .zip(&state.beta2)
        .map(|(y, b)| (y - b).powi(2))
        .sum();
    let source_ss: f64 = stats
        .ybar1
        .iter()
        .zip(&state.beta2)
        .map(|(y, b)| (y - b).powi(2))
        .sum();

    // σ²
    if opts.fix_sigma.is_none() {
        let rate =
            n2 * target_ss / 2.0 + n1 * source_ss / (2.0 * (1.0 + state.tilde_tau2)) + opts.b;
        state.sigma2 = inv_gamma(rng, opts.sigma2_shape_value(p), rate);
    }

    // τ̃²
    if opts.fix_tilde_tau2.is_none() {
        let target = TauTarget {
            lambda: opts.lambda,
            p: p as f64,
            n1,
            source_ss,
            sigma2: state.sigma2,
        };
        let log_target = |eta: f64| target.log_density(eta);
        let out = mh_log_step(
            state.tilde_tau2.ln(),
            &log_target,
            &mut state.mh_log_scale,
            adapt_iter,
            opts,
            rng,
        );
        if out.accepted {
            state.tilde_tau2 = out.eta.exp();
        }
        state.proposal_count += 1;
        state.accept_count += out.accepted as u64;
        state.error_count += out.nan as u64;
    }

    if state.beta2.iter().any(|b| !b.is_finite())
        || !(state.sigma2 > 0.0 && state.sigma2.is_finite())
    {
        return Err(crate::error::Error::NonFinite(format!(
            "pcp state: sigma2 = {}, tilde_tau2 = {}",
            state.sigma2, state.tilde_tau2
        )));
    }
    Ok(())
}

fn run_chain<F: FnMut(&PcpState)>(
    stats: &SufficientStats,
    opts: &PcpOptions,
    stream: &RngStream,
    mut keep: F,
) -> Result<PcpState> {
    opts.validate()?;
    stats.validate()?;
    let mut rng = stream.rng();
    let mut state = PcpState::initial(stats, opts);
    let mut dump = match &opts.dump_path {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            writeln!(w, "iter,j,beta2,tilde_tau2,sigma2")?;
            Some(w)
        }
        None => None,
    };
    let mut kept_accepts = 0u64;
    let mut kept_proposals = 0u64;
    for iter in 0..opts.iterations {
        let adapt = (iter < opts.burn_in).then_some(iter);
        let before = (state.accept_count, state.proposal_count);
        pcp_gibbs_step(&mut state, stats, opts, &mut rng, adapt)?;
        if iter >= opts.burn_in {
            kept_accepts += state.accept_count - before.0;
            kept_proposals += state.proposal_count - before.1;
        }
        if opts.is_kept(iter) {
            keep(&state);
            if let Some(w) = dump.as_mut() {
                for (j, b) in state.beta2.iter().enumerate() {
                    writeln!(w, "{iter},{j},{b},{},{}", state.tilde_tau2, state.sigma2)?;
                }
            }
        }
    }
    if let Some(mut w) = dump {
        w.flush()?;
    }
    // Post-burn-in counts only.
    state.accept_count = kept_accepts;
    state.proposal_count = kept_proposals;
    Ok(state)
}

fn accept_rate(state: &PcpState) -> f64 {
    if state.proposal_count == 0 {
        1.0
    } else {
        state.accept_count as f64 / state.proposal_count as f64
    }
}

pub fn pcp_run(
    stats: &SufficientStats,
    opts: &PcpOptions,
    stream: &RngStream,
) -> Result<PosteriorDraws> {
    let mut draws = PosteriorDraws::new(stats.p(), opts.burn_in, opts.thin);
    let end = run_chain(stats, opts, stream, |s| {
        draws.push(&s.beta2);
        draws.push_scalar("sigma2", s.sigma2);
        draws.push_scalar("tilde_tau2", s.tilde_tau2);
    })?;
    draws
        .diagnostics
        .insert("accept_rate".into(), accept_rate(&end));
    draws
        .diagnostics
        .insert("mh_errors".into(), end.error_count as f64);
    draws
        .diagnostics
        .insert("mh_log_scale".into(), end.mh_log_scale);
    Ok(draws)
}

/// Posterior mean and 95% intervals for β₂.
pub fn pcp_estimate(
    stats: &SufficientStats,
    opts: &PcpOptions,
    stream: &RngStream,
) -> Result<EstimateResult> {
    let draws = pcp_run(stats, opts, stream)?;
    summarize(&draws, 0.95, Method::Pcp)
}

/// Posterior mean of β₂ without storing the chain.
pub fn pcp_mean(
    stats: &SufficientStats,
    opts: &PcpOptions,
    stream: &RngStream,
) -> Result<EstimateResult> {
    let mut sum = vec![0.0; stats.p()];
    let mut kept = 0usize;
    let mut tt_sum = 0.0;
    let end = run_chain(stats, opts, stream, |s| {
        sum.iter_mut().zip(&s.beta2).for_each(|(a, b)| *a += b);
        tt_sum += s.tilde_tau2;
        kept += 1;
    })?;
    let k = kept as f64;
    Ok(
        EstimateResult::point(Method::Pcp, sum.into_iter().map(|s| s / k).collect())
            .with_diagnostic("accept_rate", accept_rate(&end))
            .with_diagnostic("tilde_tau2_mean", tt_sum / k)
            .with_diagnostic("draws", k),
    )
}
