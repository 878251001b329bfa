//! Checks of the sparse-case risk bound and of the sign of the cross term
//! between the source error and the difference estimate.

use serde::Serialize;

use crate::error::Result;
use crate::rng::RngStream;
use crate::shrinkage::{cross_term_mc, WeightParams};
use crate::simgen::{Case, ScenarioConfig};

/// Allowance for the {1 + o(1)} factor at finite p.
pub const BOUND_SLACK: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub rhs: f64,
    /// p × per-component MSE.
    pub total_risk: f64,
    pub tau: f64,
    /// total_risk ≤ BOUND_SLACK · rhs; `None` when the assumptions fail.
    pub satisfied: Option<bool>,
    pub unmet: Option<String>,
}

/// (p/n₁)σ² + σ_n²·q·log(p/q) − (σ²/n₁){q + (p−q)τ√log(1/τ)}.
pub fn risk_bound_rhs(p: usize, q: usize, n1: u64, n2: u64, sigma: f64, tau: f64) -> f64 {
    let (pf, qf, n1f) = (p as f64, q as f64, n1 as f64);
    let s2 = sigma * sigma;
    let sigma_n2 = s2 * (1.0 / n1f + 1.0 / n2 as f64);
    pf / n1f * s2 + sigma_n2 * qf * (pf / qf).ln()
        - s2 / n1f * (qf + (pf - qf) * tau * (1.0 / tau).ln().sqrt())
}

/// Compare an empirical per-component risk of the horseshoe estimator with
/// the bound at τ = q/p.
pub fn risk_bound_check(scenario: &ScenarioConfig, empirical_risk: f64) -> Result<BoundCheck> {
    scenario.validate()?;
    let (p, q, n1) = (scenario.p, scenario.q(), scenario.n1());
    let tau = q as f64 / p as f64;
    let rhs = risk_bound_rhs(p, q, n1, scenario.n2, scenario.sigma, tau);
    let total_risk = empirical_risk * p as f64;
    let sigma_n2 = scenario.sigma.powi(2) * (1.0 / n1 as f64 + 1.0 / scenario.n2 as f64);
    let threshold = (2.0 * sigma_n2 * (p as f64 / q as f64).ln()).sqrt();
    let unmet = if scenario.case != Case::Sparse {
        Some("bound applies to the sparse case".to_string())
    } else if q >= p {
        Some(format!("q = {q} is not small relative to p = {p}"))
    } else if scenario.signal_mean < threshold {
        Some(format!(
            "signal mean {} is below the recovery threshold {threshold:.3}",
            scenario.signal_mean
        ))
    } else {
        None
    };
    let satisfied = unmet.is_none().then_some(total_risk <= BOUND_SLACK * rhs);
    Ok(BoundCheck {
        rhs,
        total_risk,
        tau,
        satisfied,
        unmet,
    })
}

/// Default bound M on |β₂ⱼ| for the Pinsker reference; matches the range
/// the source coefficients are drawn from.
pub const PINSKER_M: f64 = 3.0;

/// Pinsker's per-component minimax risk for target-only estimation over
/// the ball ‖β₂‖² ≤ pM²: σ_t²M²/(σ_t² + M²) with σ_t² = σ²/n₂.
pub fn pinsker_risk(sigma: f64, n2: u64, m: f64) -> f64 {
    let st2 = sigma * sigma / n2 as f64;
    st2 * m * m / (st2 + m * m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeRisk {
    pub p: usize,
    pub q: usize,
    pub n2: u64,
    pub case: Case,
    /// MSE over the target-only JS MSE of the same cell; `None` without a
    /// TARGET_JS row.
    pub vs_target_js: Option<f64>,
    /// MSE over `pinsker_risk`; report only.
    pub vs_pinsker: f64,
}

/// Risk of `method` relative to target-only estimation, one entry per cell
/// where it ran without error. The claim to check is that the ratio falls
/// as p grows.
pub fn relative_risk(
    rows: &[super::ExperimentRow],
    method: &str,
    sigma: f64,
    m: f64,
) -> Vec<RelativeRisk> {
    let same = |a: &super::ExperimentRow, b: &super::ExperimentRow| {
        a.p == b.p && a.q == b.q && a.n1 == b.n1 && a.n2 == b.n2 && a.case == b.case
    };
    rows.iter()
        .filter(|r| r.method == method && r.error.is_none())
        .map(|r| {
            let tjs = rows
                .iter()
                .find(|t| t.method == "TARGET_JS" && t.error.is_none() && same(r, t));
            RelativeRisk {
                p: r.p,
                q: r.q,
                n2: r.n2,
                case: r.case,
                vs_target_js: tjs.map(|t| r.mse / t.mse),
                vs_pinsker: r.mse / pinsker_risk(sigma, r.n2, m),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CrossTermCase {
    /// δ⁰ = 0.
    Zero,
    /// q leading entries at half the recovery threshold.
    HalfThreshold,
    /// q leading entries at twice the recovery threshold.
    SupraThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossTermResult {
    pub case: CrossTermCase,
    /// Σⱼ E[(Zⱼ − δⱼ⁰)(w(Zⱼ)Zⱼ − δⱼ⁰)].
    pub estimate: f64,
    pub se: f64,
    pub stein_estimate: f64,
    pub stein_se: f64,
    /// −estimate/(1+n₁): the sign the cross term carries in the risk.
    pub signed_cross_term: f64,
    /// estimate − 3·se > 0.
    pub negative_with_margin: bool,
    /// |estimate − stein_estimate| ≤ 3·√(se² + stein_se²).
    pub stein_agrees: bool,
}

/// Cross-term Monte Carlo for the three δ⁰ patterns at dimension `p`, with
/// q = ⌈p^0.8⌉ and τ = q/p.
pub fn cross_term_check(
    p: usize,
    n1: u64,
    n2: u64,
    sigma: f64,
    reps: usize,
    stream: &RngStream,
) -> Result<Vec<CrossTermResult>> {
    let cfg = ScenarioConfig {
        p,
        n2,
        n1: Some(n1),
        sigma,
        ..ScenarioConfig::default()
    };
    cfg.validate()?;
    let q = cfg.q();
    let sigma_n2 = sigma * sigma * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    let threshold = (2.0 * sigma_n2 * (p as f64 / q as f64).ln()).sqrt();
    let params = WeightParams::new(q as f64 / p as f64, sigma_n2)?;
    let mut out = Vec::new();
    for (k, case) in [
        CrossTermCase::Zero,
        CrossTermCase::HalfThreshold,
        CrossTermCase::SupraThreshold,
    ]
    .into_iter()
    .enumerate()
    {
        let level = match case {
            CrossTermCase::Zero => 0.0,
            CrossTermCase::HalfThreshold => 0.5 * threshold,
            CrossTermCase::SupraThreshold => 2.0 * threshold,
        };
        let delta0: Vec<f64> = (0..p).map(|j| if j < q { level } else { 0.0 }).collect();
        let ct = cross_term_mc(&delta0, &params, reps, &stream.child(k as u64))?;
        let combined = (ct.se * ct.se + ct.stein_se * ct.stein_se).sqrt();
        out.push(CrossTermResult {
            case,
            estimate: ct.estimate,
            se: ct.se,
            stein_estimate: ct.stein_estimate,
            stein_se: ct.stein_se,
            signed_cross_term: -ct.estimate / (1.0 + n1 as f64),
            negative_with_margin: ct.estimate - 3.0 * ct.se > 0.0,
            stein_agrees: (ct.estimate - ct.stein_estimate).abs() <= 3.0 * combined,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_hand_value() {
        // 100/252 + (1 + 1/252)·40·ln 2.5 − (1/252)(40 + 60·0.4·√ln 2.5)
        let rhs = risk_bound_rhs(100, 40, 252, 1, 1.0, 0.4);
        assert!((rhs - 36.944_002_651_890_9).abs() < 1e-6, "{rhs}");
    }

    #[test]
    fn pinsker_reference() {
        // σ_t² = 1: 9/10
        assert!((pinsker_risk(1.0, 1, 3.0) - 0.9).abs() < 1e-15);
        assert!((pinsker_risk(2.0, 4, 3.0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn dense_differences_are_flagged() {
        let cfg = ScenarioConfig {
            alpha: 1e-9,
            ..ScenarioConfig::sparse(50, 1, 0.2)
        };
        assert_eq!(cfg.q(), 50);
        let c = risk_bound_check(&cfg, 0.5).unwrap();
        assert!(c.satisfied.is_none() && c.unmet.is_some());
    }
}
