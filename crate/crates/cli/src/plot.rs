//! MSE-versus-p line charts, one SVG per (case, n2) group of a report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use plotters::prelude::*;

use tlshrink::harness::ExperimentRow;
use tlshrink::simgen::Case;

const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

type Series = BTreeMap<String, Vec<(f64, f64)>>;

fn groups(rows: &[ExperimentRow]) -> BTreeMap<(String, u64), (Vec<String>, Series)> {
    let mut out: BTreeMap<(String, u64), (Vec<String>, Series)> = BTreeMap::new();
    for r in rows
        .iter()
        .filter(|r| r.error.is_none() && r.mse > 0.0 && r.mse.is_finite())
    {
        let case = match r.case {
            Case::Sparse => "sparse",
            Case::Bounded => "bounded",
        };
        let (order, series) = out.entry((case.to_string(), r.n2)).or_default();
        if !order.contains(&r.method) {
            order.push(r.method.clone());
        }
        series
            .entry(r.method.clone())
            .or_default()
            .push((r.p as f64, r.mse));
    }
    out
}

/// Write `mse_<case>_n2_<n2>.svg` into `dir`; returns the paths written.
pub fn plot_report(rows: &[ExperimentRow], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for ((case, n2), (order, series)) in groups(rows) {
        let pts = series.values().flatten();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x1 <= x0 {
            x1 = x0 * 2.0;
        }
        let path = dir.join(format!("mse_{case}_n2_{n2}.svg"));
        let root = SVGBackend::new(&path, (720, 480)).into_drawing_area();
        let draw = |e: &dyn std::fmt::Display| anyhow!("plotting {}: {e}", path.display());
        root.fill(&WHITE).map_err(|e| draw(&e))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(
                format!("MSE for beta2, {case} case, n2 = {n2}"),
                ("sans-serif", 20),
            )
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(
                (x0 / 1.2..x1 * 1.2).log_scale(),
                (y0 / 1.5..y1 * 1.5).log_scale(),
            )
            .map_err(|e| draw(&e))?;
        chart
            .configure_mesh()
            .x_desc("p")
            .y_desc("MSE")
            .draw()
            .map_err(|e| draw(&e))?;
        for (k, method) in order.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut line = series[method].clone();
            line.sort_by(|a, b| a.0.total_cmp(&b.0));
            chart
                .draw_series(LineSeries::new(line.iter().copied(), color.stroke_width(2)))
                .map_err(|e| draw(&e))?
                .label(method.as_str())
                .legend(move |(x, y)| {
                    PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2))
                });
            chart
                .draw_series(line.iter().map(|&p| Circle::new(p, 3, color.filled())))
                .map_err(|e| draw(&e))?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| draw(&e))?;
        root.present().map_err(|e| draw(&e))?;
        drop(chart);
        drop(root);
        written.push(path);
    }
    Ok(written)
}
