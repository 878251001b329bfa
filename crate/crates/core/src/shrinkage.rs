//! Horseshoe shrinkage weight and its Stein-identity companions.
//!
//! With s = z²/(2σ_n²) and g(u) = 1/(τ² + (1−τ²)u), the weight is
//! w(z) = I_{1/2}(z) / I_{−1/2}(z) where I_k(z) = ∫₀¹ u^k g(u) e^{su} du.
//! The factor e^s is pulled out analytically, leaving
//! J_k = ∫₀¹ u^k g(u) e^{−s(1−u)} du ∈ (0, ∞) for every finite z, and the
//! substitution u = v² removes the u^{−1/2} endpoint singularity.
//! Breakpoints are placed geometrically near v = 0 (the g peak, width ≈ τ)
//! and near v = 1 (the exponential peak, width ≈ 1/s).

use rand::Rng;

use crate::error::{invalid, Result};
use crate::quadrature::{adaptive, default_rule, GaussLegendre};
use crate::rng::{std_normal, RngStream};
use crate::types::{EstimateResult, Method, SufficientStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams {
    pub tau: f64,
    pub sigma_n2: f64,
}

impl WeightParams {
    pub fn new(tau: f64, sigma_n2: f64) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(invalid(format!("tau must lie in (0, 1], got {tau}")));
        }
        if !(sigma_n2 > 0.0 && sigma_n2.is_finite()) {
            return Err(invalid(format!(
                "sigma_n2 must be positive, got {sigma_n2}"
            )));
        }
        Ok(Self { tau, sigma_n2 })
    }

    /// Parameters for the Z-model of `stats` at global scale `tau`.
    pub fn for_stats(stats: &SufficientStats, tau: f64) -> Result<Self> {
        Self::new(tau, stats.sigma_n2())
    }

    /// τ = q/p when the number of nonzero differences is known, else 1/p.
    pub fn default_tau(p: usize, q: Option<usize>) -> f64 {
        match q {
            Some(q) if q >= 1 && q <= p => q as f64 / p as f64,
            _ => 1.0 / p as f64,
        }
    }

    fn g(&self, u: f64) -> f64 {
        let t2 = self.tau * self.tau;
        1.0 / (t2 + (1.0 - t2) * u)
    }
}

/// Which quadrature rule and tolerance the weight integrals use.
#[derive(Debug, Clone, Copy)]
pub struct WeightQuadrature<'a> {
    pub rule: &'a GaussLegendre,
    pub rel_tol: f64,
}

impl Default for WeightQuadrature<'static> {
    fn default() -> Self {
        Self {
            rule: default_rule(),
            rel_tol: 1e-12,
        }
    }
}

// Below this v the factor e^{−s(1−v²)} is under e^{−800} and contributes nothing.
fn lower_cutoff(s: f64) -> f64 {
    if s > 800.0 {
        (1.0 - 800.0 / s).sqrt()
    } else {
        0.0
    }
}

fn breakpoints(tau: f64, s: f64) -> Vec<f64> {
    let lo = lower_cutoff(s);
    let mut pts = vec![lo, 1.0];
    if lo < 0.5 {
        pts.push(0.5);
    }
    let mut x = tau / 8.0;
    while x < 0.5 {
        if x > lo {
            pts.push(x);
        }
        x *= 4.0;
    }
    if s > 1.0 {
        let mut d = 1.0 / (8.0 * s);
        while d < 0.5 && 1.0 - d > lo {
            pts.push(1.0 - d);
            d *= 4.0;
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

impl WeightQuadrature<'_> {
    /// J = ∫₀¹ m(u, 1−u) g(u) e^{−s(1−u)} u^{−1/2} du written in v = √u.
    /// The moment also receives 1 − u formed as (1−v)(1+v), which keeps its
    /// relative precision near u = 1.
    fn scaled_integral<M: Fn(f64, f64) -> f64>(
        &self,
        moment: M,
        s: f64,
        params: &WeightParams,
    ) -> f64 {
        let f = |v: f64| {
            let u = v * v;
            let one_minus_u = (1.0 - v) * (1.0 + v);
            2.0 * moment(u, one_minus_u) * params.g(u) * (-s * one_minus_u).exp()
        };
        adaptive(self.rule, &f, &breakpoints(params.tau, s), self.rel_tol)
    }

    pub fn log_ik(&self, k: f64, z: f64, params: &WeightParams) -> Result<f64> {
        if !z.is_finite() {
            return Err(invalid(format!("z must be finite, got {z}")));
        }
        let s = z * z / (2.0 * params.sigma_n2);
        let shift = k + 0.5;
        let j = self.scaled_integral(|u, _| u.powf(shift), s, params);
        Ok(s + j.ln())
    }

    pub fn weight(&self, z: f64, params: &WeightParams) -> f64 {
        let s = z * z / (2.0 * params.sigma_n2);
        let j_lo = self.scaled_integral(|_, _| 1.0, s, params);
        let j_hi = self.scaled_integral(|u, _| u, s, params);
        (j_hi / j_lo).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
    }

    /// h′(z) for h(z) = z·w(z): w(z) + (z²/σ_n²)·Var(u), where the variance is
    /// taken under the density ∝ u^{−1/2} g(u) e^{su} on (0, 1). This equals
    /// (I_{3/2} I_{−1/2} − I_{1/2}²)/I_{−1/2}² but is computed as a centered
    /// second moment so it never goes negative through cancellation.
    pub fn h_prime(&self, z: f64, params: &WeightParams) -> f64 {
        let s = z * z / (2.0 * params.sigma_n2);
        let j_lo = self.scaled_integral(|_, _| 1.0, s, params);
        let w = self.scaled_integral(|u, _| u, s, params) / j_lo;
        if s == 0.0 {
            return w;
        }
        // Centre on E[1 − u] rather than w: near u = 1 the difference u − w
        // would be pure rounding noise.
        let m = self.scaled_integral(|_, r| r, s, params) / j_lo;
        let var = self.scaled_integral(|_, r| (r - m) * (r - m), s, params) / j_lo;
        w + 2.0 * s * var
    }
}

/// log I_k(z), for k ∈ {−1/2, 1/2, 3/2}.
pub fn log_ik(k: f64, z: f64, params: &WeightParams) -> Result<f64> {
    WeightQuadrature::default().log_ik(k, z, params)
}

/// Posterior mean of 1 − κ given z: the multiplier applied to z.
pub fn shrinkage_weight(z: f64, params: &WeightParams) -> f64 {
    WeightQuadrature::default().weight(z, params)
}

pub fn stein_h_prime(z: f64, params: &WeightParams) -> f64 {
    WeightQuadrature::default().h_prime(z, params)
}

/// β̂₂ = Ȳ₁ + w(Z)·Z with τ and σ held fixed.
pub fn hs_posterior_mean_fixed_tau(
    stats: &SufficientStats,
    params: &WeightParams,
) -> EstimateResult {
    let point = stats
        .ybar1
        .iter()
        .zip(&stats.ybar2)
        .map(|(y1, y2)| {
            let z = y2 - y1;
            y1 + shrinkage_weight(z, params) * z
        })
        .collect();
    EstimateResult::point(Method::HsAnalytic, point)
        .with_diagnostic("tau", params.tau)
        .with_diagnostic("sigma_n2", params.sigma_n2)
}

/// Monte Carlo estimate of Σⱼ E[(Zⱼ − δⱼ⁰)(w(Zⱼ)Zⱼ − δⱼ⁰)], Zⱼ ~ N(δⱼ⁰, σ_n²),
/// together with the Stein-identity route σ_n²·Σⱼ E[h′(Zⱼ)] on the same draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossTerm {
    pub estimate: f64,
    pub se: f64,
    pub stein_estimate: f64,
    pub stein_se: f64,
}

pub fn cross_term_mc(
    delta0: &[f64],
    params: &WeightParams,
    reps: usize,
    stream: &RngStream,
) -> Result<CrossTerm> {
    if reps < 100 {
        return Err(invalid(format!(
            "cross_term_mc needs at least 100 replications, got {reps}"
        )));
    }
    let quad = WeightQuadrature::default();
    let sd = params.sigma_n2.sqrt();
    let mut rng = stream.rng();
    let mut direct = Vec::with_capacity(reps);
    let mut stein = Vec::with_capacity(reps);
    for _ in 0..reps {
        let (mut a, mut b) = (0.0, 0.0);
        for &d in delta0 {
            let z = d + sd * std_normal(&mut rng);
            a += (z - d) * (quad.weight(z, params) * z - d);
            b += quad.h_prime(z, params);
        }
        direct.push(a);
        stein.push(params.sigma_n2 * b);
    }
    let (estimate, se) = mean_se(&direct);
    let (stein_estimate, stein_se) = mean_se(&stein);
    Ok(CrossTerm {
        estimate,
        se,
        stein_estimate,
        stein_se,
    })
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = crate::summary::mean(xs);
    (m, (crate::summary::variance(xs) / xs.len() as f64).sqrt())
}

/// Draw a Z vector from N(δ⁰, σ_n² I); exposed for harness checks.
pub fn draw_z<R: Rng + ?Sized>(delta0: &[f64], sigma_n2: f64, rng: &mut R) -> Vec<f64> {
    let sd = sigma_n2.sqrt();
    delta0.iter().map(|d| d + sd * std_normal(rng)).collect()
}
