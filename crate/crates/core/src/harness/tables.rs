//! The five simulation tables: scenario grids, method columns and the wide
//! layout they are printed in.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ExperimentPlan, ExperimentRow, MethodSpec};
use crate::baselines::{SpsConfig, TransLassoConfig};
use crate::classical::{FirstStage, SecondStage};
use crate::error::{invalid, Result};
use crate::simgen::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    T1,
    T2,
    T3,
    T4,
    T5,
}

impl std::str::FromStr for Table {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t1" => Ok(Self::T1),
            "t2" => Ok(Self::T2),
            "t3" => Ok(Self::T3),
            "t4" => Ok(Self::T4),
            "t5" => Ok(Self::T5),
            other => Err(invalid(format!("unknown table {other:?}; expected t1..t5"))),
        }
    }
}

pub const GRID_P: [usize; 5] = [100, 500, 1_000, 5_000, 10_000];
pub const GRID_N2: [u64; 3] = [1, 5, 30];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableOptions {
    pub replications: usize,
    pub seed: u64,
    /// Drop grid rows with p above this.
    pub max_p: Option<usize>,
    /// Sampler iterations (burn-in is a fifth of it).
    pub iterations: Option<usize>,
    pub workers: Option<usize>,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            replications: 200,
            seed: 0,
            max_p: None,
            iterations: None,
            workers: None,
        }
    }
}

impl Table {
    fn gamma(self) -> f64 {
        match self {
            Self::T1 | Self::T4 => 0.2,
            Self::T2 | Self::T5 => 0.0,
            Self::T3 => -0.2,
        }
    }

    pub fn methods(self) -> Vec<MethodSpec> {
        use FirstStage as F;
        use SecondStage as S;
        let tl = MethodSpec::TransLasso(TransLassoConfig::default());
        match self {
            Self::T1 => vec![
                MethodSpec::two_stage(F::Mle, S::Mle),
                MethodSpec::two_stage(F::Mle, S::Js),
                MethodSpec::two_stage(F::Mle, S::HsGibbs),
                tl,
            ],
            Self::T2 | Self::T3 => {
                let mut m = Vec::new();
                for f in [F::Mle, F::Js] {
                    for s in [S::Mle, S::Js, S::HsGibbs] {
                        m.push(MethodSpec::two_stage(f, s));
                    }
                }
                m.push(tl);
                m
            }
            Self::T4 | Self::T5 => vec![
                MethodSpec::Sps(SpsConfig::default()),
                MethodSpec::two_stage(F::Mle, S::Js),
                MethodSpec::Pcp,
                MethodSpec::TargetJs,
            ],
        }
    }

    pub fn scenarios(self, max_p: Option<usize>) -> Vec<ScenarioConfig> {
        let gamma = self.gamma();
        let mut out = Vec::new();
        for n2 in GRID_N2 {
            for p in GRID_P {
                if max_p.is_some_and(|m| p > m) {
                    continue;
                }
                out.push(match self {
                    Self::T4 | Self::T5 => ScenarioConfig::bounded(p, n2, gamma),
                    _ => ScenarioConfig::sparse(p, n2, gamma),
                });
            }
        }
        out
    }
}

pub fn table_plan(table: Table, opts: &TableOptions) -> ExperimentPlan {
    let mut plan = ExperimentPlan {
        scenarios: table.scenarios(opts.max_p),
        methods: table.methods(),
        replications: opts.replications,
        seed: opts.seed,
        workers: opts.workers,
        ..ExperimentPlan::default()
    };
    if let Some(it) = opts.iterations {
        plan.hs.iterations = it;
        plan.hs.burn_in = it / 5;
        plan.pcp.iterations = it;
        plan.pcp.burn_in = it / 5;
    }
    plan
}

/// One line per scenario with a column per method, as the tables are printed.
#[derive(Debug, Clone, PartialEq)]
pub struct WideTable {
    pub methods: Vec<String>,
    /// (p, q, n2, mse per method, largest mcse in the row)
    pub rows: Vec<(usize, usize, u64, Vec<f64>, f64)>,
}

impl WideTable {
    pub fn column(&self, method: &str) -> Option<Vec<f64>> {
        let k = self.methods.iter().position(|m| m == method)?;
        Some(self.rows.iter().map(|r| r.3[k]).collect())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "p,q,n2,{},max_mcse", self.methods.join(","))?;
        for (p, q, n2, vals, se) in &self.rows {
            let vals: Vec<String> = vals.iter().map(|v| format!("{v:.4}")).collect();
            writeln!(out, "{p},{q},{n2},{},{se:.2e}", vals.join(","))?;
        }
        Ok(())
    }
}

/// Pivot long rows (in `run_experiment` order) into the printed layout.
pub fn wide_table(rows: &[ExperimentRow]) -> WideTable {
    let mut methods: Vec<String> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    let mut out = WideTable {
        methods: methods.clone(),
        rows: vec![],
    };
    for chunk in rows.chunks(methods.len()) {
        let first = &chunk[0];
        let vals = chunk.iter().map(|r| r.mse).collect();
        let se = chunk.iter().map(|r| r.mcse).fold(0.0, f64::max);
        out.rows.push((first.p, first.q, first.n2, vals, se));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

// `a < b` (or `a > b` when `greater`) on every row selected by `keep`.
fn pattern(
    wide: &WideTable,
    name: &str,
    a: &str,
    b: &str,
    greater: bool,
    keep: impl Fn(u64) -> bool,
) -> TableCheck {
    let (Some(ca), Some(cb)) = (wide.column(a), wide.column(b)) else {
        return TableCheck {
            name: name.into(),
            passed: false,
            detail: format!("missing column {a} or {b}"),
        };
    };
    let mut bad = Vec::new();
    let mut seen = 0;
    for (k, row) in wide.rows.iter().enumerate() {
        if !keep(row.2) {
            continue;
        }
        seen += 1;
        let ok = if greater {
            ca[k] > cb[k]
        } else {
            ca[k] < cb[k]
        };
        if !ok {
            bad.push(format!(
                "p={} n2={}: {a}={:.4} {b}={:.4}",
                row.0, row.2, ca[k], cb[k]
            ));
        }
    }
    TableCheck {
        name: name.into(),
        passed: seen > 0 && bad.is_empty(),
        detail: if seen == 0 {
            "no rows selected".into()
        } else {
            bad.join("; ")
        },
    }
}

// Single-column threshold on every row selected by `keep`.
fn above(
    wide: &WideTable,
    name: &str,
    col: &str,
    level: f64,
    keep: impl Fn(u64) -> bool,
) -> TableCheck {
    let Some(c) = wide.column(col) else {
        return TableCheck {
            name: name.into(),
            passed: false,
            detail: format!("missing column {col}"),
        };
    };
    let picked: Vec<(usize, f64)> = wide
        .rows
        .iter()
        .zip(&c)
        .filter(|(r, _)| keep(r.2))
        .map(|(r, v)| (r.0, *v))
        .collect();
    let bad: Vec<String> = picked
        .iter()
        .filter(|(_, v)| !(*v > level))
        .map(|(p, v)| format!("p={p}: {v:.4}"))
        .collect();
    TableCheck {
        name: name.into(),
        passed: !picked.is_empty() && bad.is_empty(),
        detail: if picked.is_empty() {
            "no rows selected".into()
        } else {
            bad.join("; ")
        },
    }
}

/// Qualitative patterns each table is expected to show.
pub fn check_table(table: Table, wide: &WideTable) -> Vec<TableCheck> {
    let all = |_: u64| true;
    match table {
        Table::T1 => vec![pattern(
            wide,
            "HS below MLE in every row",
            "MLE/HS",
            "MLE/MLE",
            false,
            all,
        )],
        Table::T2 => vec![
            pattern(
                wide,
                "HS below MLE in every row",
                "MLE/HS",
                "MLE/MLE",
                false,
                all,
            ),
            above(
                wide,
                "JS first stage inflates HS above 4 at n2=1",
                "JS/HS",
                4.0,
                |n2| n2 == 1,
            ),
        ],
        Table::T3 => vec![pattern(
            wide,
            "HS below MLE in every row",
            "MLE/HS",
            "MLE/MLE",
            false,
            all,
        )],
        Table::T4 => vec![pattern(
            wide,
            "PCP below target-only JS at n2=1",
            "PCP",
            "TARGET_JS",
            false,
            |n2| n2 == 1,
        )],
        Table::T5 => vec![pattern(
            wide,
            "PCP above target-only JS at n2=30",
            "PCP",
            "TARGET_JS",
            true,
            |n2| n2 == 30,
        )],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_grids() {
        assert_eq!(Table::T1.scenarios(None).len(), 15);
        assert_eq!(Table::T1.scenarios(Some(500)).len(), 6);
        let s = Table::T2.scenarios(None);
        assert!(s.iter().all(|c| c.n1() == c.p as u64));
        assert_eq!(Table::T2.methods().len(), 7);
        assert_eq!("T4".parse::<Table>().unwrap(), Table::T4);
        assert!("t9".parse::<Table>().is_err());
    }

    #[test]
    fn checks_read_the_right_rows() {
        let wide = WideTable {
            methods: vec!["PCP".into(), "TARGET_JS".into()],
            rows: vec![
                (100, 40, 1, vec![0.5, 0.9], 0.0),
                (100, 40, 30, vec![0.4, 0.03], 0.0),
            ],
        };
        assert!(check_table(Table::T5, &wide)[0].passed);
        assert!(check_table(Table::T4, &wide)[0].passed);
        let c = &check_table(Table::T1, &wide)[0];
        assert!(!c.passed && c.detail.contains("missing"));
    }
}
