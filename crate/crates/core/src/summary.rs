//! Posterior summaries and Monte Carlo standard errors.

use crate::error::{invalid, Error, Result};
use crate::types::{EstimateResult, Method, PosteriorDraws};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Quantile by linear interpolation between order statistics
/// (position `prob·(n−1)` in the sorted sample).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = prob.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], prob: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, prob)
}

/// Columnwise posterior mean with equal-tailed `level` intervals.
pub fn summarize(draws: &PosteriorDraws, level: f64, method: Method) -> Result<EstimateResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("level must lie in (0,1), got {level}")));
    }
    let iters = draws.iterations();
    if iters == 0 {
        return Err(Error::NoDraws);
    }
    let (lo_p, hi_p) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    let mut point = Vec::with_capacity(draws.p);
    let mut lower = Vec::with_capacity(draws.p);
    let mut upper = Vec::with_capacity(draws.p);
    let mut col = Vec::with_capacity(iters);
    for j in 0..draws.p {
        col.clear();
        col.extend((0..iters).map(|i| draws.draws[i * draws.p + j]));
        let m = mean(&col);
        col.sort_by(f64::total_cmp);
        // Guard the interval against rounding in the mean of a constant column.
        let (l, u) = (quantile_sorted(&col, lo_p), quantile_sorted(&col, hi_p));
        point.push(m.clamp(l, u));
        lower.push(l);
        upper.push(u);
    }
    let mut res = EstimateResult::point(method, point);
    res.lower95 = Some(lower);
    res.upper95 = Some(upper);
    res.diagnostics.insert("draws".into(), iters as f64);
    res.diagnostics
        .extend(draws.diagnostics.iter().map(|(k, v)| (k.clone(), *v)));
    Ok(res)
}

/// Batch-means standard error of the mean, with ⌊√n⌋ batches of ⌊n/⌊√n⌋⌋
/// values each (any remainder at the front is dropped).
pub fn mcse(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 2 {
        return Err(Error::SeriesTooShort(n));
    }
    let n_batches = ((n as f64).sqrt().floor() as usize).max(2);
    let batch = n / n_batches;
    if batch < 2 {
        // Too short to batch; fall back to the iid standard error.
        return Ok((variance(series) / n as f64).sqrt().max(0.0));
    }
    let start = n - batch * n_batches;
    let means: Vec<f64> = series[start..].chunks_exact(batch).map(mean).collect();
    let se = (variance(&means) / n_batches as f64).sqrt();
    Ok(if se.is_finite() { se } else { 0.0 })
}
