//! Second-stage transfer for linear regression on fixed features.
//!
//! With source coefficients β̂₁ and their covariance σ²Σ̂, the target
//! residual Z = Y − Xβ̂₁ follows N(Xδ, σ²V) with V = I + XΣ̂Xᵀ. Whitening by
//! the Cholesky factor of V reduces this to Z̃ ~ N(X̃δ, σ²I), on which the
//! horseshoe and PCP priors for δ are sampled.

use std::io::Write;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::hs_gibbs::{initial_sigma2, update_scales, HsOptions, HsState};
use crate::pcp::{mh_log_step, pcp_log_density, PcpOptions};
use crate::rng::{inv_gamma, std_normal, RngStream};
use crate::summary::summarize;
use crate::types::{EstimateResult, Method, PosteriorDraws};

#[derive(Debug, Clone)]
pub struct RegressionTask {
    /// n₂ × p features.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta1_hat: DVector<f64>,
    /// p × p, symmetric positive semidefinite.
    pub sigma_hat: DMatrix<f64>,
    /// Known noise variance; sampled when absent.
    pub sigma2: Option<f64>,
}

impl RegressionTask {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        beta1_hat: DVector<f64>,
        sigma_hat: DMatrix<f64>,
        sigma2: Option<f64>,
    ) -> Result<Self> {
        let task = Self {
            x,
            y,
            beta1_hat,
            sigma_hat,
            sigma2,
        };
        task.validate()?;
        Ok(task)
    }

    /// Task with exact source coefficients (Σ̂ = 0).
    pub fn exact_source(x: DMatrix<f64>, y: DVector<f64>, beta1_hat: DVector<f64>) -> Result<Self> {
        let p = x.ncols();
        Self::new(x, y, beta1_hat, DMatrix::zeros(p, p), None)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, p) = self.x.shape();
        if n == 0 || p == 0 {
            return Err(invalid("design matrix is empty"));
        }
        if self.y.len() != n {
            return Err(Error::LengthMismatch(self.y.len(), n));
        }
        if self.beta1_hat.len() != p {
            return Err(Error::LengthMismatch(self.beta1_hat.len(), p));
        }
        if self.sigma_hat.shape() != (p, p) {
            return Err(invalid(format!(
                "Sigma_hat must be {p}x{p}, got {:?}",
                self.sigma_hat.shape()
            )));
        }
        let all = self
            .x
            .iter()
            .chain(self.y.iter())
            .chain(self.beta1_hat.iter())
            .chain(self.sigma_hat.iter());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regression inputs".into()));
        }
        if let Some(s2) = self.sigma2 {
            if !(s2 > 0.0 && s2.is_finite()) {
                return Err(invalid(format!("sigma2 must be positive, got {s2}")));
            }
        }
        check_psd(&self.sigma_hat)
    }

    /// Scale s₀ = mean diag(Σ̂) relating τ̃² to the source estimation
    /// variance; 1 when Σ̂ = 0.
    pub fn source_scale(&self) -> f64 {
        let s0 = self.sigma_hat.diagonal().mean();
        if s0 > 0.0 {
            s0
        } else {
            1.0
        }
    }
}

fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if (m - m.transpose())
        .iter()
        .any(|v| v.abs() > 1e-10 * scale.max(1.0))
    {
        return Err(Error::NotPositiveDefinite);
    }
    let jitter = 1e-10 * scale.max(1e-300);
    let shifted = m + DMatrix::identity(m.nrows(), m.nrows()) * jitter;
    if m.nrows() > 0 && scale > 0.0 && Cholesky::new(shifted).is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// Z = Y − Xβ̂₁ and V = I + XΣ̂Xᵀ.
pub fn residualize(task: &RegressionTask) -> Result<(DVector<f64>, DMatrix<f64>)> {
    task.validate()?;
    let z = &task.y - &task.x * &task.beta1_hat;
    let mut v = &task.x * &task.sigma_hat * task.x.transpose();
    // Symmetrize against rounding before factorizing.
    v = (&v + v.transpose()) * 0.5;
    for i in 0..v.nrows() {
        v[(i, i)] += 1.0;
    }
    Ok((z, v))
}

/// Z̃ = L⁻¹Z and X̃ = L⁻¹X with LLᵀ = V.
pub fn whiten(
    z: &DVector<f64>,
    x: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let chol = Cholesky::new(v.clone()).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let zt = l
        .solve_lower_triangular(z)
        .ok_or_else(|| invalid("singular covariance"))?;
    let xt = l
        .solve_lower_triangular(x)
        .ok_or_else(|| invalid("singular covariance"))?;
    Ok((zt, xt))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionResult {
    pub mean: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
}

impl PredictionResult {
    /// Fraction of `y` inside the intervals.
    pub fn coverage(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.mean.len() {
            return Err(Error::LengthMismatch(y.len(), self.mean.len()));
        }
        let hit = y
            .iter()
            .enumerate()
            .filter(|(i, v)| self.lower95[*i] <= **v && **v <= self.upper95[*i])
            .count();
        Ok(hit as f64 / y.len() as f64)
    }

    pub fn mse(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.mean.len() {
            return Err(Error::LengthMismatch(y.len(), self.mean.len()));
        }
        Ok(self
            .mean
            .iter()
            .zip(y)
            .map(|(m, v)| (m - v).powi(2))
            .sum::<f64>()
            / y.len() as f64)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "mean", "lower95", "upper95"])?;
        for i in 0..self.mean.len() {
            w.write_record(&[
                i.to_string(),
                self.mean[i].to_string(),
                self.lower95[i].to_string(),
                self.upper95[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OlsOptions {
    /// Fit by minimum-norm least squares when X lacks full column rank,
    /// instead of refusing.
    pub min_norm: bool,
}

/// Least squares of Y on X alone (no source information), with t-based 95%
/// intervals for coefficients and for new observations at `x_test`.
pub fn ols_fit(
    task: &RegressionTask,
    x_test: &DMatrix<f64>,
    opts: &OlsOptions,
) -> Result<(EstimateResult, PredictionResult)> {
    task.validate()?;
    let (n, p) = task.x.shape();
    if x_test.ncols() != p {
        return Err(Error::LengthMismatch(x_test.ncols(), p));
    }
    let svd = task.x.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let s_max = svd.singular_values.max();
    let tol = n.max(p) as f64 * f64::EPSILON * s_max;
    let inv_s: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| if s > tol { 1.0 / s } else { 0.0 })
        .collect();
    let rank = inv_s.iter().filter(|v| **v > 0.0).count();
    if rank < p && !opts.min_norm {
        return Err(Error::RankDeficient { rank, cols: p });
    }
    let uty = u.tr_mul(&task.y);
    let coef = DVector::from_iterator(inv_s.len(), uty.iter().zip(&inv_s).map(|(a, b)| a * b));
    let beta = vt.tr_mul(&coef);

    let resid = &task.y - &task.x * &beta;
    let df = n - rank;
    let (s2, q) = if df > 0 {
        let t = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| invalid(e.to_string()))?;
        (resid.norm_squared() / df as f64, t.inverse_cdf(0.975))
    } else if let Some(s2) = task.sigma2 {
        (s2, Normal::standard().inverse_cdf(0.975))
    } else {
        return Err(invalid(
            "no residual degrees of freedom and no known sigma2",
        ));
    };

    // Rows of W = Σ⁺Vᵀ give xᵀ(XᵀX)⁺x = ‖W x‖².
    let mut w = vt.clone();
    for (i, mut row) in w.row_iter_mut().enumerate() {
        row *= inv_s[i];
    }
    let lev = |x: DVector<f64>| (&w * x).norm_squared();

    let se: Vec<f64> = (0..p)
        .map(|j| {
            let mut e = DVector::zeros(p);
            e[j] = 1.0;
            (s2 * lev(e)).sqrt()
        })
        .collect();
    let point: Vec<f64> = beta.iter().copied().collect();
    let est = EstimateResult {
        lower95: Some(point.iter().zip(&se).map(|(b, s)| b - q * s).collect()),
        upper95: Some(point.iter().zip(&se).map(|(b, s)| b + q * s).collect()),
        point,
        method: Method::Ols,
        diagnostics: Default::default(),
    }
    .with_diagnostic("rank", rank as f64)
    .with_diagnostic("df", df as f64)
    .with_diagnostic("sigma2_hat", s2);

    let mean = x_test * &beta;
    let mut pred = PredictionResult {
        mean: mean.iter().copied().collect(),
        lower95: vec![],
        upper95: vec![],
    };
    for (i, row) in x_test.row_iter().enumerate() {
        let half = q * (s2 * (1.0 + lev(row.transpose()))).sqrt();
        pred.lower95.push(pred.mean[i] - half);
        pred.upper95.push(pred.mean[i] + half);
    }
    Ok((est, pred))
}

/// Whitened design with the cross products the δ update needs.
struct Design {
    zt: DVector<f64>,
    xt: DMatrix<f64>,
    xtx: DMatrix<f64>,
    xtz: DVector<f64>,
    diagonal: bool,
    dual: bool,
}

impl Design {
    fn new(task: &RegressionTask) -> Result<Self> {
        let (z, v) = residualize(task)?;
        let (zt, xt) = whiten(&z, &task.x, &v)?;
        let xtx = xt.tr_mul(&xt);
        let xtz = xt.tr_mul(&zt);
        let p = xtx.nrows();
        let diagonal = (0..p).all(|i| (0..p).all(|j| i == j || xtx[(i, j)] == 0.0));
        let dual = p > 4 * zt.len();
        Ok(Self {
            zt,
            xt,
            xtx,
            xtz,
            diagonal,
            dual,
        })
    }

    fn n(&self) -> usize {
        self.zt.len()
    }

    /// δ ~ N(A⁻¹X̃ᵀZ̃, σ²A⁻¹), A = X̃ᵀX̃ + diag(1/sⱼ), writing into `delta`.
    fn sample_delta<R: Rng + ?Sized>(
        &self,
        prior_scale: &[f64],
        sigma2: f64,
        delta: &mut [f64],
        rng: &mut R,
    ) -> Result<()> {
        let p = delta.len();
        if self.diagonal {
            for j in 0..p {
                let xx = self.xtx[(j, j)];
                let tl = prior_scale[j];
                let (m, v) = if xx == 0.0 {
                    (0.0, sigma2 * tl)
                } else {
                    let shrink = tl * xx / (1.0 + tl * xx);
                    (shrink * (self.xtz[j] / xx), sigma2 * shrink / xx)
                };
                delta[j] = m + v.sqrt() * std_normal(rng);
            }
            return Ok(());
        }
        let sigma = sigma2.sqrt();
        if self.dual {
            // u ~ N(0, D), v = X̃u + ξ, solve (X̃DX̃ᵀ + I)w = Z̃/σ − v, θ = u + DX̃ᵀw.
            let u =
                DVector::from_iterator(p, prior_scale.iter().map(|s| s.sqrt() * std_normal(rng)));
            let xi = DVector::from_iterator(self.n(), (0..self.n()).map(|_| std_normal(rng)));
            let v = &self.xt * &u + xi;
            let xd = DMatrix::from_fn(self.n(), p, |i, j| self.xt[(i, j)] * prior_scale[j]);
            let mut m = &xd * self.xt.transpose();
            for i in 0..self.n() {
                m[(i, i)] += 1.0;
            }
            let chol = Cholesky::new(m).ok_or(Error::NotPositiveDefinite)?;
            let w = chol.solve(&(&self.zt / sigma - v));
            let theta = u + xd.tr_mul(&w);
            for j in 0..p {
                delta[j] = sigma * theta[j];
            }
            return Ok(());
        }
        let mut a = self.xtx.clone();
        for j in 0..p {
            a[(j, j)] += 1.0 / prior_scale[j];
        }
        let chol: Cholesky<f64, Dyn> = Cholesky::new(a).ok_or(Error::NotPositiveDefinite)?;
        let mean = chol.solve(&self.xtz);
        let xi = DVector::from_iterator(p, (0..p).map(|_| std_normal(rng)));
        let noise = chol
            .l()
            .tr_solve_lower_triangular(&xi)
            .ok_or(Error::NotPositiveDefinite)?;
        for j in 0..p {
            delta[j] = mean[j] + sigma * noise[j];
        }
        Ok(())
    }

    fn resid_ss(&self, delta: &[f64]) -> f64 {
        let fitted = &self.xt * DVector::from_column_slice(delta);
        let mut ss = 0.0;
        for i in 0..self.n() {
            ss += (self.zt[i] - fitted[i]) * (self.zt[i] - fitted[i]);
        }
        ss
    }
}

/// Posterior draws of δ from a regression fit, with σ² and the global-scale
/// series under `scalar_draws`.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    /// Summary of β₂ = β̂₁ + δ.
    pub estimate: EstimateResult,
    pub draws: PosteriorDraws,
}

fn known_sigma2(task: &RegressionTask, fix_sigma: Option<f64>) -> Option<f64> {
    fix_sigma.map(|s| s * s).or(task.sigma2)
}

/// Horseshoe prior δⱼ ~ N(0, σ²τ²λⱼ²) with the same half-Cauchy
/// augmentation and sweep order as the means sampler.
pub fn hs_regression_fit(
    task: &RegressionTask,
    opts: &HsOptions,
    stream: &RngStream,
) -> Result<RegressionFit> {
    opts.validate()?;
    let design = Design::new(task)?;
    let (n, p) = (design.n(), task.p());
    let fixed_sigma2 = known_sigma2(task, opts.fix_sigma);
    let mut state = HsState {
        delta: vec![0.0; p],
        lambda2: vec![1.0; p],
        tau2: match opts.fix_tau {
            Some(t) => t * t,
            None => (1.0 / (p * p) as f64).max(1e-6),
        },
        sigma2: fixed_sigma2.unwrap_or_else(|| initial_sigma2(design.zt.as_slice(), 1.0)),
        zeta: vec![1.0; p],
        nu: 1.0,
    };
    let mut rng = stream.rng();
    let mut draws = PosteriorDraws::new(p, opts.burn_in, opts.thin);
    let mut scale = vec![0.0; p];
    for iter in 0..opts.iterations {
        for j in 0..p {
            scale[j] = state.tau2 * state.lambda2[j];
        }
        design.sample_delta(&scale, state.sigma2, &mut state.delta, &mut rng)?;
        if fixed_sigma2.is_none() {
            let resid = design.resid_ss(&state.delta);
            let mut prior = 0.0;
            for j in 0..p {
                let d = state.delta[j];
                prior += d * d / (state.lambda2[j] * state.tau2);
            }
            let rate = (resid + prior) / 2.0 + opts.b;
            state.sigma2 = inv_gamma(&mut rng, (n + p) as f64 / 2.0 + opts.a, rate);
        }
        let sigma2 = state.sigma2;
        update_scales(&mut state, sigma2, opts, &mut rng);
        state.check()?;
        if opts.is_kept(iter) {
            draws.push(&state.delta);
            draws.push_scalar("sigma2", state.sigma2);
            draws.push_scalar("tau2", state.tau2);
        }
    }
    let estimate = summarize(&draws, 0.95, Method::HsGibbs)?.shifted(task.beta1_hat.as_slice());
    Ok(RegressionFit { estimate, draws })
}

/// PCP prior δ ~ N(0, σ²s₀τ̃²I) with s₀ = [`RegressionTask::source_scale`].
/// τ̃² = 0 returns δ = 0; τ̃² = ∞ is the flat-prior (GLS) limit.
pub fn pcp_regression_fit(
    task: &RegressionTask,
    opts: &PcpOptions,
    stream: &RngStream,
) -> Result<RegressionFit> {
    opts.validate()?;
    let design = Design::new(task)?;
    let (n, p) = (design.n(), task.p());
    let s0 = task.source_scale();
    let fixed_sigma2 = known_sigma2(task, opts.fix_sigma);
    let mut sigma2 = fixed_sigma2.unwrap_or_else(|| initial_sigma2(design.zt.as_slice(), 1.0));
    let mut tt = opts.fix_tilde_tau2.unwrap_or(1.0);
    let mut log_scale = 0.0;
    let (mut accepts, mut proposals, mut errors) = (0u64, 0u64, 0u64);
    let mut delta = vec![0.0; p];
    let mut rng = stream.rng();
    let mut draws = PosteriorDraws::new(p, opts.burn_in, opts.thin);
    for iter in 0..opts.iterations {
        let prior_var = s0 * tt;
        if prior_var == 0.0 {
            delta.iter_mut().for_each(|d| *d = 0.0);
        } else {
            design.sample_delta(&vec![prior_var; p], sigma2, &mut delta, &mut rng)?;
        }
        let delta_ss: f64 = delta.iter().map(|d| d * d).sum();

        if fixed_sigma2.is_none() {
            let resid = design.resid_ss(&delta);
            let (shape, prior) = if prior_var > 0.0 && prior_var.is_finite() {
                ((n + p) as f64 / 2.0 + opts.a, delta_ss / prior_var)
            } else {
                (n as f64 / 2.0 + opts.a, 0.0)
            };
            sigma2 = inv_gamma(&mut rng, shape, (resid + prior) / 2.0 + opts.b);
        }

        if opts.fix_tilde_tau2.is_none() {
            let pf = p as f64;
            let target = |eta: f64| {
                let t = eta.exp();
                if t == 0.0 || t.is_infinite() {
                    return f64::NEG_INFINITY;
                }
                pcp_log_density(t, opts.lambda)
                    - 0.5 * pf * t.ln()
                    - delta_ss / (2.0 * sigma2 * s0 * t)
                    + eta
            };
            let adapt = (iter < opts.burn_in).then_some(iter);
            let out = mh_log_step(tt.ln(), &target, &mut log_scale, adapt, opts, &mut rng);
            if out.accepted {
                tt = out.eta.exp();
            }
            if iter >= opts.burn_in {
                proposals += 1;
                accepts += out.accepted as u64;
            }
            errors += out.nan as u64;
        }

        if !(sigma2 > 0.0 && sigma2.is_finite()) || delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite(format!(
                "pcp regression state: sigma2 = {sigma2}, tilde_tau2 = {tt}"
            )));
        }
        if iter >= opts.burn_in && (iter - opts.burn_in) % opts.thin == 0 {
            draws.push(&delta);
            draws.push_scalar("sigma2", sigma2);
            draws.push_scalar("tilde_tau2", tt);
        }
    }
    let rate = if proposals == 0 {
        1.0
    } else {
        accepts as f64 / proposals as f64
    };
    draws.diagnostics.insert("accept_rate".into(), rate);
    draws.diagnostics.insert("mh_errors".into(), errors as f64);
    let estimate = summarize(&draws, 0.95, Method::Pcp)?.shifted(task.beta1_hat.as_slice());
    Ok(RegressionFit { estimate, draws })
}

const PREDICTIVE_DRAWS: usize = 256;

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Posterior-predictive mean and equal-tailed 95% interval of a new response
/// at each row of `x_test`. Y* − x*ᵀβ̂₁ given δ, σ² is N(x*ᵀδ, σ²(1 + x*ᵀΣ̂x*));
/// the interval inverts the mixture CDF over up to 256 evenly thinned draws.
pub fn predict(
    task: &RegressionTask,
    draws: &PosteriorDraws,
    x_test: &DMatrix<f64>,
) -> Result<PredictionResult> {
    let p = task.p();
    if x_test.ncols() != p {
        return Err(Error::LengthMismatch(x_test.ncols(), p));
    }
    if draws.p != p {
        return Err(Error::LengthMismatch(draws.p, p));
    }
    let total = draws.iterations();
    if total == 0 {
        return Err(Error::NoDraws);
    }
    let sigma2 = draws
        .scalar("sigma2")
        .ok_or_else(|| invalid("draws lack a sigma2 series"))?;
    let k = total.min(PREDICTIVE_DRAWS);
    let picks: Vec<usize> = (0..k).map(|i| i * total / k).collect();
    let beta = DMatrix::from_fn(p, k, |j, c| task.beta1_hat[j] + draws.row(picks[c])[j]);
    let means = x_test * &beta;
    let mut out = PredictionResult {
        mean: vec![],
        lower95: vec![],
        upper95: vec![],
    };
    for (i, row) in x_test.row_iter().enumerate() {
        let inflate = 1.0 + (row * &task.sigma_hat * row.transpose())[(0, 0)];
        let comps: Vec<(f64, f64)> = (0..k)
            .map(|c| (means[(i, c)], (sigma2[picks[c]] * inflate).sqrt()))
            .collect();
        out.mean
            .push(comps.iter().map(|c| c.0).sum::<f64>() / k as f64);
        out.lower95.push(mixture_quantile(&comps, 0.025));
        out.upper95.push(mixture_quantile(&comps, 0.975));
    }
    Ok(out)
}

fn mixture_quantile(comps: &[(f64, f64)], prob: f64) -> f64 {
    let cdf = |y: f64| {
        comps
            .iter()
            .map(|(m, s)| std_normal_cdf((y - m) / s))
            .sum::<f64>()
            / comps.len() as f64
    };
    let mut lo = comps
        .iter()
        .map(|(m, s)| m - 9.0 * s)
        .fold(f64::INFINITY, f64::min);
    let mut hi = comps
        .iter()
        .map(|(m, s)| m + 9.0 * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    while hi - lo > 1e-10 * width.max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Numeric CSV with a header row, read row-major.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| invalid(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(invalid(format!(
                    "{}: row {} has {} fields, expected {}",
                    path.display(),
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

/// A single column (or a single row) of numbers with a header.
pub fn read_vector_csv(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix_csv(path)?;
    if m.ncols() != 1 && m.nrows() != 1 {
        return Err(invalid(format!(
            "{}: expected one column, found {}",
            path.display(),
            m.ncols()
        )));
    }
    Ok(DVector::from_iterator(
        m.len(),
        m.transpose().iter().copied(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = RngStream::new(seed, 0).rng();
        DMatrix::from_fn(n, p, |_, _| std_normal(&mut rng))
    }

    #[test]
    fn residualize_trivial_cases() {
        let x = random_matrix(6, 3, 1);
        let y = DVector::from_fn(6, |i, _| i as f64);
        let task = RegressionTask::exact_source(x, y.clone(), DVector::zeros(3)).unwrap();
        let (z, v) = residualize(&task).unwrap();
        assert_eq!(z, y);
        assert_eq!(v, DMatrix::identity(6, 6));
    }

    #[test]
    fn cholesky_residual_is_small() {
        let x = random_matrix(8, 4, 2);
        let b = random_matrix(4, 4, 3);
        let sigma_hat = &b * b.transpose();
        let task =
            RegressionTask::new(x, DVector::zeros(8), DVector::zeros(4), sigma_hat, None).unwrap();
        let (_, v) = residualize(&task).unwrap();
        let l = Cholesky::new(v.clone()).unwrap().l();
        assert!((&l * l.transpose() - &v).norm() <= 1e-10 * v.norm());
    }

    #[test]
    fn whiten_scalar_covariance() {
        let z = DVector::from_vec(vec![2.0, -4.0]);
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 3.0]);
        let (zt, xt) = whiten(&z, &x, &(DMatrix::identity(2, 2) * 4.0)).unwrap();
        assert_eq!(zt, z / 2.0);
        assert_eq!(xt, x / 2.0);
    }

    #[test]
    fn rejects_indefinite_sigma_hat() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let r = RegressionTask::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DVector::zeros(2),
            s,
            None,
        );
        assert!(matches!(r, Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn ols_recovers_noiseless_coefficients() {
        let x = random_matrix(30, 5, 4);
        let beta = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 0.0]);
        let y = &x * &beta + DVector::from_fn(30, |i, _| 1e-12 * (i as f64).sin());
        let task = RegressionTask::exact_source(x.clone(), y, DVector::zeros(5)).unwrap();
        let (est, pred) = ols_fit(&task, &x, &OlsOptions::default()).unwrap();
        for j in 0..5 {
            assert!((est.point[j] - beta[j]).abs() < 1e-8);
        }
        assert!(pred.lower95.iter().zip(&pred.upper95).all(|(l, u)| l <= u));
    }

    #[test]
    fn ols_refuses_rank_deficiency() {
        let mut x = random_matrix(10, 3, 5);
        let c = x.column(0).clone_owned();
        x.set_column(2, &c);
        let task =
            RegressionTask::exact_source(x.clone(), DVector::zeros(10), DVector::zeros(3)).unwrap();
        assert!(matches!(
            ols_fit(&task, &x, &OlsOptions::default()),
            Err(Error::RankDeficient { rank: 2, cols: 3 })
        ));
        assert!(ols_fit(&task, &x, &OlsOptions { min_norm: true }).is_ok());
    }

    #[test]
    fn pcp_zero_scale_is_pure_transfer() {
        let x = random_matrix(20, 3, 6);
        let y = DVector::from_fn(20, |i, _| (i as f64).cos());
        let beta1 = DVector::from_vec(vec![0.3, -0.1, 2.0]);
        let task = RegressionTask::exact_source(x, y, beta1.clone()).unwrap();
        let opts = PcpOptions {
            fix_tilde_tau2: Some(0.0),
            iterations: 50,
            burn_in: 10,
            ..Default::default()
        };
        let fit = pcp_regression_fit(&task, &opts, &RngStream::new(1, 1)).unwrap();
        assert_eq!(fit.estimate.point, beta1.as_slice());
    }

    #[test]
    fn mixture_quantile_of_one_normal() {
        let q = mixture_quantile(&[(1.0, 2.0)], 0.975);
        assert!((q - (1.0 + 2.0 * 1.959_963_984_540_054)).abs() < 1e-8);
    }
}
