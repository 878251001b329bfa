//! Synthetic scenarios: true means for both tasks and the observed sample
//! means drawn around them.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{std_normal, RngStream};
use crate::types::SufficientStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Case {
    Sparse,
    Bounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub p: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub n2: u64,
    pub sigma: f64,
    pub case: Case,
    pub c_factor: f64,
    pub signal_mean: f64,
    pub signal_sd: f64,
    pub beta_range: f64,
    /// Scatter the sparse signals instead of using the first q coordinates.
    pub permute: bool,
    /// Override the derived source size.
    pub n1: Option<u64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            p: 100,
            alpha: 0.2,
            gamma: 0.2,
            n2: 1,
            sigma: 1.0,
            case: Case::Sparse,
            c_factor: 3.0,
            signal_mean: 5.0,
            signal_sd: 1.0,
            beta_range: 3.0,
            permute: false,
            n1: None,
        }
    }
}

// ⌈x⌉ for x that should be an integer up to rounding, e.g. 100^0.8 = 39.81.
fn ceil_int(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 * r.max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

impl ScenarioConfig {
    pub fn sparse(p: usize, n2: u64, gamma: f64) -> Self {
        Self {
            p,
            n2,
            gamma,
            ..Self::default()
        }
    }

    pub fn bounded(p: usize, n2: u64, gamma: f64) -> Self {
        Self {
            p,
            n2,
            gamma,
            case: Case::Bounded,
            ..Self::default()
        }
    }

    pub fn q(&self) -> usize {
        (ceil_int((self.p as f64).powf(1.0 - self.alpha)) as usize).clamp(1, self.p)
    }

    pub fn n1(&self) -> u64 {
        self.n1
            .unwrap_or_else(|| ceil_int((self.p as f64).powf(1.0 + self.gamma)).max(1))
    }

    pub fn radius(&self) -> f64 {
        self.c_factor * (self.p as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(invalid("p must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.gamma > -1.0 && self.gamma < 1.0) {
            return Err(invalid(format!(
                "gamma must lie in (-1, 1), got {}",
                self.gamma
            )));
        }
        if self.n2 == 0 || self.n1 == Some(0) {
            return Err(invalid("sample sizes must be positive"));
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("c_factor", self.c_factor),
            ("signal_sd", self.signal_sd),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beta_range >= 0.0) {
            return Err(invalid("beta_range must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub beta1_0: Vec<f64>,
    pub delta_0: Vec<f64>,
    pub beta2_0: Vec<f64>,
}

pub fn gen_truth(cfg: &ScenarioConfig, stream: &RngStream) -> Result<ScenarioTruth> {
    cfg.validate()?;
    let mut rng = stream.rng();
    let p = cfg.p;
    let beta1_0: Vec<f64> = (0..p)
        .map(|_| rng.random_range(-cfg.beta_range..=cfg.beta_range))
        .collect();
    let delta_0 = match cfg.case {
        Case::Sparse => {
            let q = cfg.q();
            let mut d: Vec<f64> = (0..p)
                .map(|j| {
                    if j < q {
                        cfg.signal_mean + cfg.signal_sd * std_normal(&mut rng)
                    } else {
                        0.0
                    }
                })
                .collect();
            if cfg.permute {
                d.shuffle(&mut rng);
            }
            d
        }
        Case::Bounded => {
            let w: Vec<f64> = (0..p).map(|_| std_normal(&mut rng)).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u: f64 = rng.random();
            let r = cfg.radius() * u.powf(1.0 / p as f64);
            w.iter().map(|x| r * x / norm).collect()
        }
    };
    let beta2_0 = beta1_0.iter().zip(&delta_0).map(|(b, d)| b + d).collect();
    Ok(ScenarioTruth {
        beta1_0,
        delta_0,
        beta2_0,
    })
}

/// Ȳ₁ ~ N(β₁⁰, σ²/n₁), Ȳ₂ ~ N(β₂⁰, σ²/n₂), componentwise.
pub fn gen_observed(
    truth: &ScenarioTruth,
    cfg: &ScenarioConfig,
    stream: &RngStream,
) -> Result<SufficientStats> {
    cfg.validate()?;
    if truth.beta1_0.len() != cfg.p || truth.beta2_0.len() != cfg.p {
        return Err(invalid("truth dimension does not match the scenario"));
    }
    let mut rng = stream.rng();
    let n1 = cfg.n1();
    let sd1 = cfg.sigma / (n1 as f64).sqrt();
    let sd2 = cfg.sigma / (cfg.n2 as f64).sqrt();
    let ybar1 = truth
        .beta1_0
        .iter()
        .map(|b| b + sd1 * std_normal(&mut rng))
        .collect();
    let ybar2 = truth
        .beta2_0
        .iter()
        .map(|b| b + sd2 * std_normal(&mut rng))
        .collect();
    SufficientStats::new(ybar1, ybar2, n1, cfg.n2, cfg.sigma)
}

/// Truth and data for one replication, drawn from two children of `stream`.
pub fn gen_replication(
    cfg: &ScenarioConfig,
    stream: &RngStream,
) -> Result<(ScenarioTruth, SufficientStats)> {
    let truth = gen_truth(cfg, &stream.child(0))?;
    let stats = gen_observed(&truth, cfg, &stream.child(1))?;
    Ok((truth, stats))
}

/// `# {json config}` on the first line, then one CSV row per coordinate.
pub fn write_scenario<W: Write>(
    mut out: W,
    cfg: &ScenarioConfig,
    truth: &ScenarioTruth,
    stats: &SufficientStats,
) -> Result<()> {
    writeln!(out, "# {}", serde_json::to_string(cfg)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "beta1_0", "delta_0", "beta2_0", "ybar1", "ybar2"])?;
    for j in 0..cfg.p {
        w.write_record(&[
            j.to_string(),
            truth.beta1_0[j].to_string(),
            truth.delta_0[j].to_string(),
            truth.beta2_0[j].to_string(),
            stats.ybar1[j].to_string(),
            stats.ybar2[j].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_scenario(
    path: &Path,
    cfg: &ScenarioConfig,
    truth: &ScenarioTruth,
    stats: &SufficientStats,
) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_scenario(file, cfg, truth, stats)
}

/// Read back a file written by [`export_scenario`].
pub fn import_scenario(path: &Path) -> Result<(ScenarioConfig, ScenarioTruth, SufficientStats)> {
    let text = std::fs::read_to_string(path)?;
    let (head, body) = text
        .split_once('\n')
        .ok_or_else(|| invalid("empty scenario file"))?;
    let json = head
        .strip_prefix("# ")
        .ok_or_else(|| invalid("scenario file lacks its JSON header"))?;
    let cfg: ScenarioConfig = serde_json::from_str(json)?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let mut cols: [Vec<f64>; 5] = Default::default();
    for rec in r.records() {
        let rec = rec?;
        for (k, col) in cols.iter_mut().enumerate() {
            let v: f64 = rec
                .get(k + 1)
                .ok_or_else(|| invalid("short scenario row"))?
                .parse()
                .map_err(|e| invalid(format!("bad number in scenario file: {e}")))?;
            col.push(v);
        }
    }
    let [beta1_0, delta_0, beta2_0, ybar1, ybar2] = cols;
    let stats = SufficientStats::new(ybar1, ybar2, cfg.n1(), cfg.n2, cfg.sigma)?;
    Ok((
        cfg,
        ScenarioTruth {
            beta1_0,
            delta_0,
            beta2_0,
        },
        stats,
    ))
}
