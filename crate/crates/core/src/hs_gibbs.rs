//! Gibbs sampler for the horseshoe difference model
//!
//! ```text
//! Z_j | δ_j, σ²        ~ N(δ_j, σ² c)            c = 1/n₁ + 1/n₂
//! δ_j | λ_j², τ², σ²   ~ N(0, λ_j² τ² σ² c)
//! λ_j² | ζ_j ~ IG(1/2, 1/ζ_j),   ζ_j ~ IG(1/2, 1)
//! τ²   | ν   ~ IG(1/2, 1/ν),     ν   ~ IG(1/2, 1)
//! σ²         ~ IG(a, b)
//! ```
//!
//! The inverse-gamma augmentation makes every full conditional conjugate.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{inv_gamma, std_normal, RngStream};
use crate::summary::{quantile, summarize};
use crate::types::{EstimateResult, Method, PosteriorDraws, SufficientStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HsOptions {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub a: f64,
    pub b: f64,
    pub fix_tau: Option<f64>,
    pub fix_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_path: Option<PathBuf>,
}

impl Default for HsOptions {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burn_in: 2_000,
            thin: 1,
            a: 0.5,
            b: 0.5,
            fix_tau: None,
            fix_sigma: None,
            dump_path: None,
        }
    }
}

impl HsOptions {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(invalid(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(invalid("thin must be at least 1"));
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(invalid("inverse-gamma prior needs a > 0 and b > 0"));
        }
        for (name, v) in [("fix_tau", self.fix_tau), ("fix_sigma", self.fix_sigma)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_kept(&self, iter: usize) -> bool {
        iter >= self.burn_in && (iter - self.burn_in) % self.thin == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsState {
    pub delta: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub tau2: f64,
    pub sigma2: f64,
    pub zeta: Vec<f64>,
    pub nu: f64,
}

impl HsState {
    /// δ = Z/2, λ² = 1, τ² = max(1/p², 10⁻⁶), ζ = ν = 1 and σ² from the
    /// median of Z² (robust to the nonzero differences).
    pub fn initial(z: &[f64], noise_factor: f64, opts: &HsOptions) -> Self {
        let p = z.len();
        let tau2 = match opts.fix_tau {
            Some(t) => t * t,
            None => (1.0 / (p * p) as f64).max(1e-6),
        };
        let sigma2 = match opts.fix_sigma {
            Some(s) => s * s,
            None => initial_sigma2(z, noise_factor),
        };
        Self {
            delta: z.iter().map(|v| 0.5 * v).collect(),
            lambda2: vec![1.0; p],
            tau2,
            sigma2,
            zeta: vec![1.0; p],
            nu: 1.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |name: &str, j: Option<usize>, v: f64| {
            let loc = j
                .map(|j| format!("{name}[{j}]"))
                .unwrap_or_else(|| name.to_string());
            Error::NonFinite(format!("{loc} = {v}"))
        };
        for (j, &v) in self.delta.iter().enumerate() {
            if !v.is_finite() {
                return Err(bad("delta", Some(j), v));
            }
        }
        for (name, xs) in [("lambda2", &self.lambda2), ("zeta", &self.zeta)] {
            for (j, &v) in xs.iter().enumerate() {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(bad(name, Some(j), v));
                }
            }
        }
        for (name, v) in [
            ("tau2", self.tau2),
            ("sigma2", self.sigma2),
            ("nu", self.nu),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(name, None, v));
            }
        }
        Ok(())
    }
}

/// median(Z²)/(0.4549·c): the median of a χ²₁ variable is 0.4549, and the
/// median ignores the few large differences. Falls back to 1.
pub(crate) fn initial_sigma2(z: &[f64], noise_factor: f64) -> f64 {
    let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
    let est = quantile(&z2, 0.5) / (0.454_936_4 * noise_factor);
    if est > 0.0 && est.is_finite() {
        est
    } else {
        1.0
    }
}

/// Mean and variance of δ_j given the rest: shrink Z_j by τ²λ²/(1+τ²λ²).
#[inline]
pub fn delta_conditional(z: f64, lambda2: f64, tau2: f64, sigma_n2: f64) -> (f64, f64) {
    let tl = tau2 * lambda2;
    let shrink = tl / (1.0 + tl);
    (shrink * z, sigma_n2 * shrink)
}

/// One full sweep, in the order δ, σ², λ², τ², ζ, ν. Parameters fixed through
/// `fix_tau` / `fix_sigma` are left untouched (ν is skipped with τ).
pub fn hs_gibbs_step<R: Rng + ?Sized>(
    state: &mut HsState,
    z: &[f64],
    noise_factor: f64,
    opts: &HsOptions,
    rng: &mut R,
) -> Result<()> {
    let p = z.len();
    let pf = p as f64;

    let sigma_n2 = state.sigma2 * noise_factor;
    for j in 0..p {
        let (m, v) = delta_conditional(z[j], state.lambda2[j], state.tau2, sigma_n2);
        state.delta[j] = m + v.sqrt() * std_normal(rng);
    }

    if opts.fix_sigma.is_none() {
        let mut resid = 0.0;
        let mut prior = 0.0;
        for j in 0..p {
            let d = state.delta[j];
            resid += (z[j] - d) * (z[j] - d);
            prior += d * d / (state.lambda2[j] * state.tau2);
        }
        let rate = (resid + prior) / (2.0 * noise_factor) + opts.b;
        state.sigma2 = inv_gamma(rng, pf + opts.a, rate);
    }
    update_scales(state, state.sigma2 * noise_factor, opts, rng);
    state.check()
}

/// The λ², τ², ζ, ν block of a sweep, given the current δ and the noise
/// scale that multiplies the prior variance of δ.
pub(crate) fn update_scales<R: Rng + ?Sized>(
    state: &mut HsState,
    sigma_n2: f64,
    opts: &HsOptions,
    rng: &mut R,
) {
    let p = state.delta.len();
    let pf = p as f64;
    for j in 0..p {
        let d = state.delta[j];
        let rate = 1.0 / state.zeta[j] + d * d / (2.0 * sigma_n2 * state.tau2);
        state.lambda2[j] = inv_gamma(rng, 1.0, rate);
    }

    if opts.fix_tau.is_none() {
        let ss: f64 = state
            .delta
            .iter()
            .zip(&state.lambda2)
            .map(|(d, l)| d * d / l)
            .sum();
        let rate = 1.0 / state.nu + ss / (2.0 * sigma_n2);
        state.tau2 = inv_gamma(rng, (pf + 1.0) / 2.0, rate);
    }

    for j in 0..p {
        state.zeta[j] = inv_gamma(rng, 1.0, 1.0 + 1.0 / state.lambda2[j]);
    }

    if opts.fix_tau.is_none() {
        state.nu = inv_gamma(rng, 1.0, 1.0 + 1.0 / state.tau2);
    }
}

/// Run the chain on a difference vector, calling `keep` on every retained state.
pub fn run_chain<F: FnMut(usize, &HsState)>(
    z: &[f64],
    noise_factor: f64,
    opts: &HsOptions,
    stream: &RngStream,
    mut keep: F,
) -> Result<HsState> {
    opts.validate()?;
    if z.is_empty() {
        return Err(invalid("empty difference vector"));
    }
    let mut rng = stream.rng();
    let mut state = HsState::initial(z, noise_factor, opts);
    let mut dump = match &opts.dump_path {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            writeln!(w, "iter,j,delta,lambda2,tau2,sigma2")?;
            Some(w)
        }
        None => None,
    };
    for iter in 0..opts.iterations {
        hs_gibbs_step(&mut state, z, noise_factor, opts, &mut rng)?;
        if opts.is_kept(iter) {
            keep(iter, &state);
            if let Some(w) = dump.as_mut() {
                for j in 0..z.len() {
                    writeln!(
                        w,
                        "{iter},{j},{},{},{},{}",
                        state.delta[j], state.lambda2[j], state.tau2, state.sigma2
                    )?;
                }
            }
        }
    }
    if let Some(mut w) = dump {
        w.flush()?;
    }
    Ok(state)
}

/// Draws of δ (with σ² and τ² series) for the difference vector `z`.
pub fn hs_gibbs_run_z(
    z: &[f64],
    noise_factor: f64,
    opts: &HsOptions,
    stream: &RngStream,
) -> Result<PosteriorDraws> {
    let mut draws = PosteriorDraws::new(z.len(), opts.burn_in, opts.thin);
    run_chain(z, noise_factor, opts, stream, |_, s| {
        draws.push(&s.delta);
        draws.push_scalar("sigma2", s.sigma2);
        draws.push_scalar("tau2", s.tau2);
    })?;
    Ok(draws)
}

/// Draws of δ for the Z-model built from `stats`.
pub fn hs_gibbs_run(
    stats: &SufficientStats,
    opts: &HsOptions,
    stream: &RngStream,
) -> Result<PosteriorDraws> {
    stats.validate()?;
    hs_gibbs_run_z(&stats.z(), stats.noise_factor(), opts, stream)
}

/// Posterior mean of δ without storing the chain.
pub fn hs_gibbs_mean_z(
    z: &[f64],
    noise_factor: f64,
    opts: &HsOptions,
    stream: &RngStream,
) -> Result<EstimateResult> {
    let mut sum = vec![0.0; z.len()];
    let mut kept = 0usize;
    let (mut tau2_sum, mut sigma2_sum) = (0.0, 0.0);
    run_chain(z, noise_factor, opts, stream, |_, s| {
        sum.iter_mut().zip(&s.delta).for_each(|(a, d)| *a += d);
        tau2_sum += s.tau2;
        sigma2_sum += s.sigma2;
        kept += 1;
    })?;
    let k = kept as f64;
    Ok(
        EstimateResult::point(Method::HsGibbs, sum.into_iter().map(|s| s / k).collect())
            .with_diagnostic("draws", k)
            .with_diagnostic("tau2_mean", tau2_sum / k)
            .with_diagnostic("sigma2_mean", sigma2_sum / k),
    )
}

/// β̂₂ = Ȳ₁ + posterior mean of δ, with 95% equal-tailed intervals.
pub fn hs_gibbs_estimate(
    stats: &SufficientStats,
    opts: &HsOptions,
    stream: &RngStream,
) -> Result<EstimateResult> {
    let draws = hs_gibbs_run(stats, opts, stream)?;
    Ok(summarize(&draws, 0.95, Method::HsGibbs)?.shifted(&stats.ybar1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_limits() {
        let (m, v) = delta_conditional(3.0, 1e12, 1.0, 0.7);
        assert!((m - 3.0).abs() < 1e-9 && (v - 0.7).abs() < 1e-9);
        let (m, v) = delta_conditional(3.0, 1e-12, 1.0, 0.7);
        assert!(m.abs() < 1e-9 && v.abs() < 1e-9);
        // Z = 2, τ = 0.5, λ² = 4, σ_n² = 1 → shrink 1/2.
        assert_eq!(delta_conditional(2.0, 4.0, 0.25, 1.0), (1.0, 0.5));
    }

    #[test]
    fn option_validation() {
        assert!(HsOptions {
            iterations: 10,
            burn_in: 10,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(HsOptions {
            thin: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(HsOptions {
            fix_tau: Some(-1.0),
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(HsOptions::default().validate().is_ok());
    }

    #[test]
    fn chain_stays_positive() {
        let z = [0.0, 0.1, -0.2, 5.0, -4.0, 0.03];
        let opts = HsOptions {
            iterations: 3000,
            burn_in: 500,
            ..Default::default()
        };
        let draws = hs_gibbs_run_z(&z, 1.01, &opts, &RngStream::new(3, 0)).unwrap();
        assert_eq!(draws.iterations(), 2500);
        assert!(draws.scalar("sigma2").unwrap().iter().all(|&s| s > 0.0));
        assert!(draws.scalar("tau2").unwrap().iter().all(|&s| s > 0.0));
    }

    #[test]
    fn fixed_parameters_are_held() {
        let z = [0.5, 1.5, -2.0];
        let opts = HsOptions {
            iterations: 200,
            burn_in: 0,
            fix_tau: Some(0.3),
            fix_sigma: Some(2.0),
            ..Default::default()
        };
        let draws = hs_gibbs_run_z(&z, 1.0, &opts, &RngStream::new(1, 1)).unwrap();
        assert!(draws
            .scalar("tau2")
            .unwrap()
            .iter()
            .all(|&t| (t - 0.09).abs() < 1e-15));
        assert!(draws.scalar("sigma2").unwrap().iter().all(|&s| s == 4.0));
    }

    #[test]
    fn thinning_and_dump() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dump.csv");
        let opts = HsOptions {
            iterations: 30,
            burn_in: 10,
            thin: 5,
            dump_path: Some(path.clone()),
            ..Default::default()
        };
        let draws = hs_gibbs_run_z(&[1.0, -1.0], 1.0, &opts, &RngStream::new(2, 2)).unwrap();
        assert_eq!(draws.iterations(), 4);
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iter,j,delta,lambda2,tau2,sigma2");
        assert_eq!(lines.len(), 1 + 4 * 2);
        assert!(lines[1].starts_with("10,0,"));
    }
}
