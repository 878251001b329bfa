use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Per-task sample means, sample sizes and the (known) noise scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub ybar1: Vec<f64>,
    pub ybar2: Vec<f64>,
    pub n1: u64,
    pub n2: u64,
    pub sigma: f64,
}

impl SufficientStats {
    pub fn new(ybar1: Vec<f64>, ybar2: Vec<f64>, n1: u64, n2: u64, sigma: f64) -> Result<Self> {
        let stats = Self {
            ybar1,
            ybar2,
            n1,
            n2,
            sigma,
        };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ybar1.is_empty() {
            return Err(invalid("p must be at least 1"));
        }
        if self.ybar1.len() != self.ybar2.len() {
            return Err(invalid(format!(
                "ybar1 has length {} but ybar2 has length {}",
                self.ybar1.len(),
                self.ybar2.len()
            )));
        }
        if self.n1 == 0 || self.n2 == 0 {
            return Err(invalid("n1 and n2 must be positive"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.ybar1.iter().chain(&self.ybar2).any(|v| !v.is_finite()) {
            return Err(invalid("sample means must be finite"));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.ybar1.len()
    }

    /// 1/n1 + 1/n2, the factor turning σ² into the variance of Z.
    pub fn noise_factor(&self) -> f64 {
        1.0 / self.n1 as f64 + 1.0 / self.n2 as f64
    }

    /// σ_n² = σ²(1/n1 + 1/n2).
    pub fn sigma_n2(&self) -> f64 {
        self.sigma * self.sigma * self.noise_factor()
    }

    /// Z = Ȳ₂ − Ȳ₁.
    pub fn z(&self) -> Vec<f64> {
        self.ybar2
            .iter()
            .zip(&self.ybar1)
            .map(|(b, a)| b - a)
            .collect()
    }

    pub fn n_total(&self) -> f64 {
        (self.n1 + self.n2) as f64
    }

    /// Pooled mean Ȳ_T = (n1 Ȳ₁ + n2 Ȳ₂) / (n1 + n2).
    pub fn pooled_mean(&self) -> Vec<f64> {
        let (n1, n2, nt) = (self.n1 as f64, self.n2 as f64, self.n_total());
        self.ybar1
            .iter()
            .zip(&self.ybar2)
            .map(|(a, b)| (n1 * a + n2 * b) / nt)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Mle,
    Js,
    HsAnalytic,
    HsGibbs,
    Pcp,
    TransLasso,
    Sps,
    Ols,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Mle => "MLE",
            Method::Js => "JS",
            Method::HsAnalytic => "HS_ANALYTIC",
            Method::HsGibbs => "HS_GIBBS",
            Method::Pcp => "PCP",
            Method::TransLasso => "TRANS_LASSO",
            Method::Sps => "SPS",
            Method::Ols => "OLS",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub point: Vec<f64>,
    pub lower95: Option<Vec<f64>>,
    pub upper95: Option<Vec<f64>>,
    pub method: Method,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimateResult {
    pub fn point(method: Method, point: Vec<f64>) -> Self {
        Self {
            point,
            lower95: None,
            upper95: None,
            method,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with_diagnostic(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    /// Shift the point estimate and any intervals by `offset` (used to go
    /// from an estimate of δ to one of β₂ = β̂₁ + δ).
    pub fn shifted(mut self, offset: &[f64]) -> Self {
        let add = |v: &mut Vec<f64>| v.iter_mut().zip(offset).for_each(|(x, o)| *x += o);
        add(&mut self.point);
        if let Some(l) = self.lower95.as_mut() {
            add(l);
        }
        if let Some(u) = self.upper95.as_mut() {
            add(u);
        }
        self
    }
}

/// Post-burn-in MCMC output. `draws` is row-major, `iterations × p`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub p: usize,
    pub draws: Vec<f64>,
    pub scalar_draws: BTreeMap<String, Vec<f64>>,
    pub burn_in: usize,
    pub thin: usize,
    pub diagnostics: BTreeMap<String, f64>,
}

impl PosteriorDraws {
    pub fn new(p: usize, burn_in: usize, thin: usize) -> Self {
        Self {
            p,
            burn_in,
            thin,
            ..Default::default()
        }
    }

    pub fn iterations(&self) -> usize {
        if self.p == 0 {
            0
        } else {
            self.draws.len() / self.p
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.p);
        self.draws.extend_from_slice(row);
    }

    pub fn push_scalar(&mut self, name: &str, value: f64) {
        self.scalar_draws
            .entry(name.to_string())
            .or_default()
            .push(value);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.draws[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.iterations())
            .map(|i| self.draws[i * self.p + j])
            .collect()
    }

    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        self.scalar_draws.get(name).map(Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_validation() {
        assert!(SufficientStats::new(vec![], vec![], 1, 1, 1.0).is_err());
        assert!(SufficientStats::new(vec![0.0], vec![0.0, 1.0], 1, 1, 1.0).is_err());
        assert!(SufficientStats::new(vec![0.0], vec![0.0], 0, 1, 1.0).is_err());
        assert!(SufficientStats::new(vec![0.0], vec![0.0], 1, 1, 0.0).is_err());
        let s = SufficientStats::new(vec![1.0, 2.0], vec![1.5, 1.0], 4, 1, 2.0).unwrap();
        assert_eq!(s.z(), vec![0.5, -1.0]);
        assert!((s.sigma_n2() - 4.0 * 1.25).abs() < 1e-15);
        assert_eq!(s.pooled_mean(), vec![(4.0 + 1.5) / 5.0, (8.0 + 1.0) / 5.0]);
    }

    #[test]
    fn method_tags_serialize_upper() {
        assert_eq!(
            serde_json::to_string(&Method::HsAnalytic).unwrap(),
            "\"HS_ANALYTIC\""
        );
        assert_eq!(Method::TransLasso.to_string(), "TRANS_LASSO");
    }
}
