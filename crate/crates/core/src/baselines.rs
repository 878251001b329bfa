//! Competing transfer methods for the means problem: Trans-Lasso reduced to
//! soft thresholding, and soft parameter sharing (joint ridge on δ).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::types::{EstimateResult, Method, SufficientStats};

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    x.signum() * (x.abs() - t).max(0.0)
}

/// How the two thresholds are picked when `auto` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// σ·√(2 log p / n).
    Universal,
    /// Minimise Stein's unbiased risk estimate for soft thresholding.
    #[default]
    Sure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransLassoConfig {
    pub lambda_w: f64,
    pub lambda_delta: f64,
    pub auto: bool,
    pub rule: ThresholdRule,
}

impl Default for TransLassoConfig {
    fn default() -> Self {
        Self {
            lambda_w: 0.0,
            lambda_delta: 0.0,
            auto: true,
            rule: ThresholdRule::Sure,
        }
    }
}

impl TransLassoConfig {
    pub fn fixed(lambda_w: f64, lambda_delta: f64) -> Self {
        Self {
            lambda_w,
            lambda_delta,
            auto: false,
            rule: ThresholdRule::Universal,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda_w >= 0.0 && self.lambda_delta >= 0.0) {
            return Err(invalid("Trans-Lasso penalties must be nonnegative"));
        }
        Ok(())
    }
}

/// SURE for soft thresholding x ~ N(θ, v I) at threshold t:
/// Σ v − 2v·1{|xⱼ| ≤ t} + min(xⱼ², t²).
pub fn sure_soft(x: &[f64], v: f64, t: f64) -> f64 {
    x.iter()
        .map(|xj| {
            let a = xj.abs();
            v - if a <= t { 2.0 * v } else { 0.0 } + a.min(t).powi(2)
        })
        .sum()
}

/// Threshold minimising SURE. The risk is piecewise smooth with minima at
/// t = 0 or at one of the |xⱼ|, so scanning the sorted magnitudes is exact.
pub fn sure_threshold(x: &[f64], v: f64) -> f64 {
    let mut a: Vec<f64> = x.iter().map(|xj| xj.abs()).collect();
    a.sort_by(f64::total_cmp);
    let p = a.len() as f64;
    // At t = a[k]: k+1 entries at or below t, the rest contribute t².
    let mut best = (p * v, 0.0);
    let mut below_sq = 0.0;
    for (k, &t) in a.iter().enumerate() {
        below_sq += t * t;
        let below = (k + 1) as f64;
        let risk = p * v - 2.0 * v * below + below_sq + (p - below) * t * t;
        if risk < best.0 {
            best = (risk, t);
        }
    }
    best.1
}

/// Pool the two tasks and soft-threshold the pooled mean, then soft-threshold
/// the target residual; the estimate is the sum of the two fits.
pub fn trans_lasso_means(
    stats: &SufficientStats,
    cfg: &TransLassoConfig,
) -> Result<EstimateResult> {
    stats.validate()?;
    cfg.validate()?;
    let pooled = stats.pooled_mean();
    let s2 = stats.sigma * stats.sigma;
    let p = stats.p() as f64;
    let lambda_w = match (cfg.auto, cfg.rule) {
        (false, _) => cfg.lambda_w,
        (true, ThresholdRule::Universal) => (2.0 * p.ln() * s2 / stats.n_total()).sqrt(),
        (true, ThresholdRule::Sure) => sure_threshold(&pooled, s2 / stats.n_total()),
    };
    let w: Vec<f64> = pooled
        .iter()
        .map(|&x| soft_threshold(x, lambda_w))
        .collect();
    let resid: Vec<f64> = stats.ybar2.iter().zip(&w).map(|(y, w)| y - w).collect();
    let lambda_delta = match (cfg.auto, cfg.rule) {
        (false, _) => cfg.lambda_delta,
        (true, ThresholdRule::Universal) => (2.0 * p.ln() * s2 / stats.n2 as f64).sqrt(),
        (true, ThresholdRule::Sure) => sure_threshold(&resid, s2 / stats.n2 as f64),
    };
    let point = w
        .iter()
        .zip(&resid)
        .map(|(w, r)| w + soft_threshold(*r, lambda_delta))
        .collect();
    Ok(EstimateResult::point(Method::TransLasso, point)
        .with_diagnostic("lambda_w", lambda_w)
        .with_diagnostic("lambda_delta", lambda_delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpsConfig {
    /// Ridge penalty on δ; `None` picks it by SURE over a log grid.
    pub lambda_ridge: Option<f64>,
}

impl Default for SpsConfig {
    fn default() -> Self {
        Self { lambda_ridge: None }
    }
}

/// Closed-form minimiser of n₁‖Ȳ₁−β₁‖² + n₂‖Ȳ₂−β₁−δ‖² + λ‖δ‖², returned as
/// β̂₁ + δ̂.
pub fn sps_fit(stats: &SufficientStats, lambda: f64) -> Vec<f64> {
    let (n1, n2) = (stats.n1 as f64, stats.n2 as f64);
    let nt = n1 + n2;
    let h = n1 * n2 / nt;
    let k = if lambda.is_infinite() {
        0.0
    } else {
        h / (h + lambda)
    };
    stats
        .ybar1
        .iter()
        .zip(&stats.ybar2)
        .map(|(y1, y2)| {
            let delta = (y2 - y1) * k;
            let beta1 = (n1 * y1 + n2 * (y2 - delta)) / nt;
            beta1 + delta
        })
        .collect()
}

/// The fit equals Ȳ₂ − a·Z with a = (1−k)·n₁/n_T, whose risk for β₂ has the
/// unbiased estimate pσ²/n₂·(1 − 2a) + a²‖Z‖².
pub fn sps_sure(stats: &SufficientStats, lambda: f64) -> f64 {
    let (n1, n2) = (stats.n1 as f64, stats.n2 as f64);
    let nt = n1 + n2;
    let h = n1 * n2 / nt;
    let a = lambda / (h + lambda) * n1 / nt;
    let z2: f64 = stats.z().iter().map(|z| z * z).sum();
    let v = stats.p() as f64 * stats.sigma * stats.sigma / n2;
    v * (1.0 - 2.0 * a) + a * a * z2
}

const SPS_GRID: usize = 161;

/// λ on a log grid spanning h·10⁻⁴ … h·10⁴, h = n₁n₂/n_T.
pub fn sps_select_lambda(stats: &SufficientStats) -> f64 {
    let h = stats.n1 as f64 * stats.n2 as f64 / stats.n_total();
    let mut best = (f64::INFINITY, h);
    for i in 0..SPS_GRID {
        let lambda = h * 10f64.powf(-4.0 + 8.0 * i as f64 / (SPS_GRID - 1) as f64);
        let r = sps_sure(stats, lambda);
        if r < best.0 {
            best = (r, lambda);
        }
    }
    best.1
}

pub fn sps_ridge(stats: &SufficientStats, cfg: &SpsConfig) -> Result<EstimateResult> {
    stats.validate()?;
    let lambda = match cfg.lambda_ridge {
        Some(l) if l >= 0.0 => l,
        Some(l) => {
            return Err(invalid(format!(
                "lambda_ridge must be nonnegative, got {l}"
            )))
        }
        None => sps_select_lambda(stats),
    };
    Ok(EstimateResult::point(Method::Sps, sps_fit(stats, lambda))
        .with_diagnostic("lambda_ridge", lambda))
}
