//! Monte Carlo experiment runner: replications of (truth, data) draws,
//! estimator application, MSE aggregation and report emission.

mod tables;
mod theory;

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{sps_ridge, trans_lasso_means, SpsConfig, TransLassoConfig};
use crate::classical::{
    first_stage_estimate, target_only_js, two_stage_estimate, FirstStage, HsSettings, SecondStage,
    TwoStageConfig,
};
use crate::error::{invalid, Error, Result};
use crate::hs_gibbs::{hs_gibbs_run_z, HsOptions};
use crate::pcp::{pcp_mean, pcp_run, PcpOptions};
use crate::rng::RngStream;
use crate::simgen::{gen_replication, Case, ScenarioConfig};
use crate::types::{EstimateResult, PosteriorDraws, SufficientStats};

pub use tables::{check_table, table_plan, wide_table, Table, TableCheck, TableOptions, WideTable};
pub use theory::{
    cross_term_check, pinsker_risk, relative_risk, risk_bound_check, BoundCheck, CrossTermCase,
    CrossTermResult, RelativeRisk, PINSKER_M,
};

pub const SCHEMA_VERSION: u32 = 1;

/// (1/p)·Σ(estimate − truth)².
pub fn mse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::LengthMismatch(estimate.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(invalid("mse of empty vectors"));
    }
    Ok(estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodSpec {
    TwoStage {
        first_stage: FirstStage,
        second_stage: SecondStage,
    },
    TargetJs,
    TransLasso(TransLassoConfig),
    Sps(SpsConfig),
    Pcp,
}

impl MethodSpec {
    pub fn two_stage(first_stage: FirstStage, second_stage: SecondStage) -> Self {
        Self::TwoStage {
            first_stage,
            second_stage,
        }
    }

    pub fn label(&self) -> String {
        let stage = |s: SecondStage| match s {
            SecondStage::Mle => "MLE",
            SecondStage::Js => "JS",
            SecondStage::HsAnalytic => "HS_ANALYTIC",
            SecondStage::HsGibbs => "HS",
        };
        match self {
            Self::TwoStage {
                first_stage,
                second_stage,
            } => {
                let f = match first_stage {
                    FirstStage::Mle => "MLE",
                    FirstStage::Js => "JS",
                };
                format!("{f}/{}", stage(*second_stage))
            }
            Self::TargetJs => "TARGET_JS".into(),
            Self::TransLasso(_) => "TRANS_LASSO".into(),
            Self::Sps(_) => "SPS".into(),
            Self::Pcp => "PCP".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub schema_version: u32,
    pub scenarios: Vec<ScenarioConfig>,
    pub methods: Vec<MethodSpec>,
    pub replications: usize,
    pub seed: u64,
    pub hs: HsOptions,
    pub pcp: PcpOptions,
    /// Sample σ² in the Bayesian methods instead of using the known σ.
    pub sample_sigma: bool,
    /// Global scale for HS_ANALYTIC; 1/p when absent.
    pub hs_tau: Option<f64>,
    /// Worker threads; all available cores when absent.
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenarios: vec![],
            methods: vec![],
            replications: 200,
            seed: 0,
            hs: HsOptions::default(),
            pcp: PcpOptions::default(),
            sample_sigma: false,
            hs_tau: None,
            workers: None,
            output_path: None,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(invalid("method list is empty"));
        }
        if self.scenarios.is_empty() {
            return Err(invalid("scenario list is empty"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers must be at least 1"));
        }
        for s in &self.scenarios {
            s.validate()?;
        }
        self.hs.validate()?;
        self.pcp.validate()
    }

    /// Stream for replication `rep` of scenario `scenario`. Data and every
    /// method's sampler draw from children of it, so results do not depend on
    /// scheduling.
    pub fn replication_stream(&self, scenario: usize, rep: usize) -> RngStream {
        RngStream::new(self.seed, 0)
            .child(scenario as u64)
            .child(rep as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub p: usize,
    pub q: usize,
    pub n1: u64,
    pub n2: u64,
    pub case: Case,
    pub method: String,
    pub mse: f64,
    pub mcse: f64,
    pub coverage: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

/// Apply one method to one data set with the plan's sampler settings.
/// Two-stage and PCP results carry the sampler diagnostics.
pub fn estimate_method(
    plan: &ExperimentPlan,
    spec: &MethodSpec,
    stats: &SufficientStats,
    stream: RngStream,
) -> Result<EstimateResult> {
    match spec {
        MethodSpec::TwoStage {
            first_stage,
            second_stage,
        } => {
            let hs = HsSettings {
                tau: plan.hs_tau,
                gibbs: plan.hs.clone(),
                stream: Some(stream),
                sample_sigma: plan.sample_sigma,
            };
            let cfg = TwoStageConfig {
                first_stage: *first_stage,
                second_stage: *second_stage,
            };
            two_stage_estimate(stats, cfg, Some(&hs))
        }
        MethodSpec::TargetJs => target_only_js(stats),
        MethodSpec::TransLasso(cfg) => trans_lasso_means(stats, cfg),
        MethodSpec::Sps(cfg) => sps_ridge(stats, cfg),
        MethodSpec::Pcp => pcp_mean(stats, &pcp_options(plan, stats), &stream),
    }
}

/// Posterior draws of β₂ for the sampler-based methods: a two-stage method
/// with a Gibbs horseshoe second stage, or PCP.
pub fn sample_method(
    plan: &ExperimentPlan,
    spec: &MethodSpec,
    stats: &SufficientStats,
    stream: RngStream,
) -> Result<PosteriorDraws> {
    stats.validate()?;
    match spec {
        MethodSpec::TwoStage {
            first_stage,
            second_stage: SecondStage::HsGibbs,
        } => {
            let beta1 = first_stage_estimate(stats, *first_stage)?;
            let z: Vec<f64> = stats.ybar2.iter().zip(&beta1).map(|(y, b)| y - b).collect();
            let mut draws =
                hs_gibbs_run_z(&z, stats.noise_factor(), &hs_options(plan, stats), &stream)?;
            for row in draws.draws.chunks_mut(draws.p) {
                row.iter_mut().zip(&beta1).for_each(|(d, b)| *d += b);
            }
            Ok(draws)
        }
        MethodSpec::Pcp => pcp_run(stats, &pcp_options(plan, stats), &stream),
        other => Err(invalid(format!("{} has no sampler", other.label()))),
    }
}

/// `iter,beta2_0,…,beta2_{p−1},<scalar series>` with diagnostics as leading
/// comment lines.
pub fn write_draws<W: Write>(mut out: W, draws: &PosteriorDraws) -> Result<()> {
    for (k, v) in &draws.diagnostics {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iter".to_string()];
    header.extend((0..draws.p).map(|j| format!("beta2_{j}")));
    header.extend(draws.scalar_draws.keys().cloned());
    w.write_record(&header)?;
    for i in 0..draws.iterations() {
        let mut rec = vec![i.to_string()];
        rec.extend(draws.row(i).iter().map(f64::to_string));
        rec.extend(draws.scalar_draws.values().map(|s| s[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// PCP options with σ fixed at the known value unless σ² is sampled.
pub fn pcp_options(plan: &ExperimentPlan, stats: &SufficientStats) -> PcpOptions {
    let mut opts = plan.pcp.clone();
    if opts.fix_sigma.is_none() && !plan.sample_sigma {
        opts.fix_sigma = Some(stats.sigma);
    }
    opts
}

/// HS options with σ fixed at the known value unless σ² is sampled.
pub fn hs_options(plan: &ExperimentPlan, stats: &SufficientStats) -> HsOptions {
    let mut opts = plan.hs.clone();
    if opts.fix_sigma.is_none() && !plan.sample_sigma {
        opts.fix_sigma = Some(stats.sigma);
    }
    opts
}

// Per replication: (mse, elapsed) for each method.
type RepOutcome = Vec<Result<(f64, Duration)>>;

fn run_replication(plan: &ExperimentPlan, scenario: usize, rep: usize) -> RepOutcome {
    let cfg = &plan.scenarios[scenario];
    let stream = plan.replication_stream(scenario, rep);
    let (truth, stats) = match gen_replication(cfg, &stream.child(0)) {
        Ok(v) => v,
        Err(e) => {
            return plan
                .methods
                .iter()
                .map(|_| Err(invalid(e.to_string())))
                .collect()
        }
    };
    plan.methods
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            let start = Instant::now();
            let est = estimate_method(plan, spec, &stats, stream.child(1 + m as u64))?.point;
            Ok((mse(&est, &truth.beta2_0)?, start.elapsed()))
        })
        .collect()
}

/// Every scenario × method cell, in plan order. Replications run on a pool
/// of `plan.workers` threads and are merged by replication index, so the
/// numbers are identical for any worker count.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<ExperimentRow>> {
    plan.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = plan.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let mut rows = Vec::new();
    for (s, cfg) in plan.scenarios.iter().enumerate() {
        let outcomes: Vec<RepOutcome> = pool.install(|| {
            (0..plan.replications)
                .into_par_iter()
                .map(|r| run_replication(plan, s, r))
                .collect()
        });
        for (m, spec) in plan.methods.iter().enumerate() {
            let mut row = ExperimentRow {
                p: cfg.p,
                q: cfg.q(),
                n1: cfg.n1(),
                n2: cfg.n2,
                case: cfg.case,
                method: spec.label(),
                mse: f64::NAN,
                mcse: f64::NAN,
                coverage: None,
                wall_time_s: 0.0,
                error: None,
            };
            let mut values = Vec::with_capacity(plan.replications);
            for (r, out) in outcomes.iter().enumerate() {
                match &out[m] {
                    Ok((v, t)) => {
                        values.push(*v);
                        row.wall_time_s += t.as_secs_f64();
                    }
                    Err(e) => {
                        row.error = Some(format!("replication {r}: {e}"));
                        break;
                    }
                }
            }
            if row.error.is_none() {
                row.mse = crate::summary::mean(&values);
                row.mcse = if values.len() > 1 {
                    (crate::summary::variance(&values) / values.len() as f64).sqrt()
                } else {
                    0.0
                };
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Provenance lines written ahead of every report.
pub fn provenance(seed: u64) -> Vec<String> {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    vec![
        format!("# seed: {seed}"),
        format!(
            "# version: tlshrink {} ({})",
            env!("CARGO_PKG_VERSION"),
            option_env!("TLSHRINK_GIT_REV").unwrap_or("unknown")
        ),
        format!("# timestamp_unix: {stamp}"),
    ]
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long-format CSV: provenance comments, one line per row, then wall times as
/// trailing comments so the data lines stay reproducible.
pub fn write_report<W: Write>(mut out: W, rows: &[ExperimentRow], seed: u64) -> Result<()> {
    if rows.is_empty() {
        return Err(invalid("no rows to report"));
    }
    for line in provenance(seed) {
        writeln!(out, "{line}")?;
    }
    writeln!(out, "p,q,n1,n2,case,method,mse,mcse,coverage,error")?;
    for r in rows {
        let case = match r.case {
            Case::Sparse => "SPARSE",
            Case::Bounded => "BOUNDED",
        };
        let error = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(
            out,
            "{},{},{},{},{case},{},{},{},{},{error}",
            r.p,
            r.q,
            r.n1,
            r.n2,
            r.method,
            r.mse,
            r.mcse,
            fmt_opt(r.coverage)
        )?;
    }
    for r in rows {
        writeln!(
            out,
            "# wall_time_s p={} n2={} {}: {:.3}",
            r.p, r.n2, r.method, r.wall_time_s
        )?;
    }
    Ok(())
}

pub fn emit_report(rows: &[ExperimentRow], path: &Path, seed: u64) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_report(&mut file, rows, seed)?;
    file.flush()?;
    Ok(())
}

/// Parse the data lines of a report written by [`write_report`]. Wall times
/// are not read back.
pub fn read_report(text: &str) -> Result<Vec<ExperimentRow>> {
    let body = data_lines(text).join("\n");
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != 10 {
            return Err(invalid(format!(
                "report line has {} fields, expected 10",
                rec.len()
            )));
        }
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|e| invalid(format!("report field {k} ({:?}): {e}", &rec[k])))
        };
        let int = |k: usize| -> Result<u64> {
            rec[k]
                .parse()
                .map_err(|e| invalid(format!("report field {k} ({:?}): {e}", &rec[k])))
        };
        let case = match &rec[4] {
            "SPARSE" => Case::Sparse,
            "BOUNDED" => Case::Bounded,
            other => return Err(invalid(format!("unknown case {other:?}"))),
        };
        rows.push(ExperimentRow {
            p: int(0)? as usize,
            q: int(1)? as usize,
            n1: int(2)?,
            n2: int(3)?,
            case,
            method: rec[5].to_string(),
            mse: num(6)?,
            mcse: num(7)?,
            coverage: if rec[8].is_empty() {
                None
            } else {
                Some(num(8)?)
            },
            wall_time_s: 0.0,
            error: (!rec[9].is_empty()).then(|| rec[9].to_string()),
        });
    }
    Ok(rows)
}

/// Lines of a report that carry data (no comments).
pub fn data_lines(report: &str) -> Vec<&str> {
    report.lines().filter(|l| !l.starts_with('#')).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_values() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn small_plan() -> ExperimentPlan {
        ExperimentPlan {
            scenarios: vec![ScenarioConfig::sparse(30, 1, 0.2)],
            methods: vec![
                MethodSpec::two_stage(FirstStage::Mle, SecondStage::Mle),
                MethodSpec::two_stage(FirstStage::Mle, SecondStage::HsGibbs),
                MethodSpec::TransLasso(TransLassoConfig::default()),
            ],
            replications: 4,
            seed: 11,
            hs: HsOptions {
                iterations: 200,
                burn_in: 50,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn rows_are_deterministic_across_workers() {
        let mut a = small_plan();
        a.workers = Some(1);
        let mut b = small_plan();
        b.workers = Some(3);
        let ra = run_experiment(&a).unwrap();
        let rb = run_experiment(&b).unwrap();
        assert_eq!(ra.len(), 3);
        for (x, y) in ra.iter().zip(&rb) {
            assert_eq!((x.mse, x.mcse, &x.method), (y.mse, y.mcse, &y.method));
        }
    }

    #[test]
    fn report_has_header_and_rows() {
        let rows = run_experiment(&ExperimentPlan {
            replications: 1,
            ..small_plan()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_report(&mut buf, &rows[..1], 11).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(data_lines(&text).len(), 2);
        assert!(text.starts_with("# seed: 11"));
    }

    #[test]
    fn report_reads_back() {
        let rows = run_experiment(&ExperimentPlan {
            replications: 2,
            ..small_plan()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_report(&mut buf, &rows, 11).unwrap();
        let back = read_report(&String::from_utf8(buf).unwrap()).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(
                (a.p, a.q, a.n1, &a.method, a.mse, a.mcse),
                (b.p, b.q, b.n1, &b.method, b.mse, b.mcse)
            );
        }
    }

    #[test]
    fn sampled_draws_match_the_streamed_mean() {
        let plan = small_plan();
        let (_, stats) = gen_replication(&plan.scenarios[0], &RngStream::new(4, 0)).unwrap();
        let spec = &plan.methods[1];
        let draws = sample_method(&plan, spec, &stats, RngStream::new(5, 0)).unwrap();
        let est = estimate_method(&plan, spec, &stats, RngStream::new(5, 0)).unwrap();
        for j in 0..stats.p() {
            let m = crate::summary::mean(&draws.column(j));
            assert!(
                (m - est.point[j]).abs() < 1e-9,
                "{j}: {m} vs {}",
                est.point[j]
            );
        }
        assert!(sample_method(&plan, &plan.methods[0], &stats, RngStream::new(5, 0)).is_err());
        let mut buf = Vec::new();
        write_draws(&mut buf, &draws).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + draws.iterations());
    }

    #[test]
    fn plan_round_trips_through_json() {
        let plan = small_plan();
        let json = serde_json::to_string_pretty(&plan).unwrap();
        let back: ExperimentPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn rejects_empty_method_list() {
        let plan = ExperimentPlan {
            methods: vec![],
            ..small_plan()
        };
        assert!(run_experiment(&plan).is_err());
    }
}
