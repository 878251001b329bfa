//! Closed-form estimators and their assembly into two-stage estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hs_gibbs::{hs_gibbs_mean_z, HsOptions};
use crate::rng::RngStream;
use crate::shrinkage::{shrinkage_weight, WeightParams};
use crate::types::{EstimateResult, Method, SufficientStats};

/// James–Stein shrinkage toward zero with the plain factor
/// 1 − (p−2)·noise_var/‖est‖². No positive-part clamp: when ‖est‖² is below
/// (p−2)·noise_var the factor is negative and the sign of `est` flips.
pub fn js_shrink(est: &[f64], noise_var: f64) -> Result<Vec<f64>> {
    let p = est.len();
    if p < 3 {
        return Err(Error::JsDimension(p));
    }
    let norm2: f64 = est.iter().map(|x| x * x).sum();
    if norm2 == 0.0 {
        return Err(Error::JsZeroNorm);
    }
    let factor = 1.0 - (p as f64 - 2.0) * noise_var / norm2;
    Ok(est.iter().map(|x| factor * x).collect())
}

/// δ̂ = Z, so β̂₂ = Ȳ₂.
pub fn mle_target(stats: &SufficientStats) -> EstimateResult {
    EstimateResult::point(Method::Mle, stats.ybar2.clone())
}

/// James–Stein on the target mean alone.
pub fn target_only_js(stats: &SufficientStats) -> Result<EstimateResult> {
    let var = stats.sigma * stats.sigma / stats.n2 as f64;
    Ok(EstimateResult::point(
        Method::Js,
        js_shrink(&stats.ybar2, var)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FirstStage {
    Mle,
    Js,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SecondStage {
    Mle,
    Js,
    HsAnalytic,
    HsGibbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    pub first_stage: FirstStage,
    pub second_stage: SecondStage,
}

/// Settings consumed by the horseshoe second stages.
#[derive(Debug, Clone, Default)]
pub struct HsSettings {
    /// Global scale for the analytic weight; defaults to 1/p.
    pub tau: Option<f64>,
    pub gibbs: HsOptions,
    pub stream: Option<RngStream>,
    /// Sample σ² instead of holding it at the known `stats.sigma`. Ignored
    /// when `gibbs.fix_sigma` is set.
    pub sample_sigma: bool,
}

pub fn first_stage_estimate(stats: &SufficientStats, stage: FirstStage) -> Result<Vec<f64>> {
    match stage {
        FirstStage::Mle => Ok(stats.ybar1.clone()),
        FirstStage::Js => js_shrink(&stats.ybar1, stats.sigma * stats.sigma / stats.n1 as f64),
    }
}

/// β̂₂ = β̂₁ + δ̂, with δ̂ computed from Z = Ȳ₂ − β̂₁ for the chosen β̂₁.
pub fn two_stage_estimate(
    stats: &SufficientStats,
    cfg: TwoStageConfig,
    hs: Option<&HsSettings>,
) -> Result<EstimateResult> {
    stats.validate()?;
    let beta1 = first_stage_estimate(stats, cfg.first_stage)?;
    let z: Vec<f64> = stats.ybar2.iter().zip(&beta1).map(|(y, b)| y - b).collect();
    let sigma_n2 = stats.sigma_n2();
    let default_hs = HsSettings::default();
    let hs = hs.unwrap_or(&default_hs);

    let (delta, method) = match cfg.second_stage {
        SecondStage::Mle => (EstimateResult::point(Method::Mle, z), Method::Mle),
        SecondStage::Js => (
            EstimateResult::point(Method::Js, js_shrink(&z, sigma_n2)?),
            Method::Js,
        ),
        SecondStage::HsAnalytic => {
            let tau = hs
                .tau
                .unwrap_or_else(|| WeightParams::default_tau(stats.p(), None));
            let params = WeightParams::new(tau, sigma_n2)?;
            let point = z
                .iter()
                .map(|&zj| shrinkage_weight(zj, &params) * zj)
                .collect();
            (
                EstimateResult::point(Method::HsAnalytic, point).with_diagnostic("tau", tau),
                Method::HsAnalytic,
            )
        }
        SecondStage::HsGibbs => {
            let stream = hs.stream.unwrap_or_else(|| RngStream::new(0, 0));
            let mut opts = hs.gibbs.clone();
            if opts.fix_sigma.is_none() && !hs.sample_sigma {
                opts.fix_sigma = Some(stats.sigma);
            }
            (
                hs_gibbs_mean_z(&z, stats.noise_factor(), &opts, &stream)?,
                Method::HsGibbs,
            )
        }
    };
    let mut out = delta.shifted(&beta1);
    out.method = method;
    Ok(out)
}
