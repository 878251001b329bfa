//! Composite Gauss–Legendre quadrature with adaptive bisection.

use std::sync::OnceLock;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on [-1, 1]; nodes found by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "need at least two nodes");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

pub fn default_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

const MAX_DEPTH: u32 = 30;
// Bisection cannot beat accumulated roundoff in a 16-term sum.
const ROUNDOFF: f64 = 2048.0 * f64::EPSILON;

/// Integrate `f` over the sorted `breakpoints`, bisecting each panel until the
/// panel estimate agrees with the sum over its halves to `rel_tol` relative to
/// the whole integral.
pub fn adaptive<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: &F,
    breakpoints: &[f64],
    rel_tol: f64,
) -> f64 {
    let panels: Vec<(f64, f64, f64)> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1], rule.integrate(f, w[0], w[1])))
        .collect();
    let rough: f64 = panels.iter().map(|p| p.2.abs()).sum();
    let span = breakpoints.last().unwrap() - breakpoints[0];
    let abs_tol = rel_tol * rough;
    panels
        .into_iter()
        .map(|(a, b, whole)| refine(rule, f, a, b, whole, abs_tol / span, 0))
        .sum()
}

fn refine<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol_density: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(f, a, mid);
    let right = rule.integrate(f, mid, b);
    let sum = left + right;
    let err = (sum - whole).abs();
    if depth >= MAX_DEPTH || err <= (tol_density * (b - a)).max(ROUNDOFF * sum.abs()) {
        return sum;
    }
    refine(rule, f, a, mid, left, tol_density, depth + 1)
        + refine(rule, f, mid, b, right, tol_density, depth + 1)
}
