use std::ops::Range;

use plotters::prelude::*;
use plotters::style::text_anchor::{HPos, Pos, VPos};
use serde::{Deserialize, Serialize};

use super::{write_atomic, Campaign, Evaluation};
use crate::calibration::DatasetKind;
use crate::error::{Error, Result};

pub const PLOT_FILES: [&str; 5] = [
    "coverage_by_model.svg",
    "benchmark_vs_synthetic.svg",
    "size_collapse.svg",
    "width_comparison.svg",
    "agreement_by_size.svg",
];

/// Coordinates behind every plot, taken from the evaluation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotData {
    /// Overall coverage % per model, then per baseline.
    pub coverage_bars: Vec<(String, f64)>,
    /// (model, benchmark %, synthetic %).
    pub kind_bars: Vec<(String, Option<f64>, Option<f64>)>,
    /// Synthetic coverage % by node count, pooled over models.
    pub size_curve: Vec<(usize, f64)>,
    /// (model, benchmark width, synthetic width).
    pub width_bars: Vec<(String, f64, f64)>,
    /// (dataset, kind, node count, agreement %), sorted by node count.
    pub agreement_curve: Vec<(String, DatasetKind, usize, f64)>,
}

impl PlotData {
    pub fn from_evaluation(e: &Evaluation) -> Self {
        let mut coverage_bars: Vec<(String, f64)> = Vec::new();
        let mut kind_bars = Vec::new();
        let mut size_curve = Vec::new();
        if let Some(r) = &e.coverage {
            coverage_bars.extend(r.by_model.iter().map(|m| (m.key.clone(), m.coverage)));
            kind_bars = r
                .by_model_kind
                .iter()
                .map(|m| {
                    (
                        m.model.clone(),
                        m.benchmark.as_ref().map(|x| x.coverage),
                        m.synthetic.as_ref().map(|x| x.coverage),
                    )
                })
                .collect();
            size_curve = r.size_curve.iter().map(|p| (p.n_nodes, p.marginal.coverage)).collect();
        }
        coverage_bars.extend(e.baselines.iter().map(|m| (m.key.clone(), m.coverage)));
        let (width_bars, agreement_curve) = match &e.probes {
            Some(p) => {
                let w = p
                    .width
                    .as_ref()
                    .map(|w| {
                        w.by_model
                            .iter()
                            .map(|r| (r.model.clone(), r.benchmark_width, r.synthetic_width))
                            .collect()
                    })
                    .unwrap_or_default();
                let mut a: Vec<_> = p
                    .agreement
                    .iter()
                    .map(|r| (r.dataset.clone(), r.kind, r.n_nodes, r.agreement))
                    .collect();
                a.sort_by(|x, y| x.2.cmp(&y.2).then_with(|| x.0.cmp(&y.0)));
                (w, a)
            }
            None => (Vec::new(), Vec::new()),
        };
        PlotData {
            coverage_bars,
            kind_bars,
            size_curve,
            width_bars,
            agreement_curve,
        }
    }
}

const SIZE: (u32, u32) = (720, 440);
const PALETTE: [RGBColor; 4] = [RGBColor(55, 110, 180), RGBColor(220, 120, 40), RGBColor(70, 150, 80), RGBColor(150, 80, 160)];

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn empty_svg(title: &str) -> Result<String> {
    let mut s = String::new();
    {
        let root = SVGBackend::with_string(&mut s, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        root.titled(title, ("sans-serif", 20)).map_err(plot_err)?;
        root.draw(&Text::new("no data for this plot", (SIZE.0 as i32 / 2 - 80, SIZE.1 as i32 / 2), ("sans-serif", 16)))
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(s)
}

/// Grouped bars: one group per category, one bar per series.
fn bar_svg(title: &str, y_desc: &str, categories: &[String], series: &[(&str, Vec<Option<f64>>)], y_max: f64) -> Result<String> {
    if categories.is_empty() || series.is_empty() {
        return empty_svg(title);
    }
    let y_max = if y_max > 0.0 { y_max * 1.1 } else { 1.0 };
    let n = categories.len();
    let mut s = String::new();
    {
        let root = SVGBackend::with_string(&mut s, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let x_range: Range<f64> = 0.0..n as f64;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(60)
            .y_label_area_size(50)
            .build_cartesian_2d(x_range, 0.0..y_max)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .disable_x_mesh()
            .x_labels(0)
            .y_desc(y_desc)
            .draw()
            .map_err(plot_err)?;
        let label_style = TextStyle::from(("sans-serif", 13)).pos(Pos::new(HPos::Center, VPos::Top));
        for (k, name) in categories.iter().enumerate() {
            let (px, py) = chart.backend_coord(&(k as f64 + 0.5, 0.0));
            root.draw(&Text::new(name.clone(), (px, py + 8), label_style.clone()))
                .map_err(plot_err)?;
        }
        let width = 0.8 / series.len() as f64;
        for (j, (name, values)) in series.iter().enumerate() {
            let color = PALETTE[j % PALETTE.len()];
            let bars = values.iter().enumerate().filter_map(|(k, v)| {
                v.map(|v| {
                    let x0 = k as f64 + 0.1 + j as f64 * width;
                    Rectangle::new([(x0, 0.0), (x0 + width, v)], color.filled())
                })
            });
            chart
                .draw_series(bars)
                .map_err(plot_err)?
                .label(*name)
                .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
        }
        if series.len() > 1 {
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
    }
    Ok(s)
}

fn line_svg(title: &str, x_desc: &str, y_desc: &str, points: &[(f64, f64)], y_max: f64) -> Result<String> {
    if points.is_empty() {
        return empty_svg(title);
    }
    let x_lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let (x_lo, x_hi) = if x_hi > x_lo { (x_lo, x_hi) } else { (x_lo - 1.0, x_hi + 1.0) };
    let pad = (x_hi - x_lo) * 0.05;
    let mut s = String::new();
    {
        let root = SVGBackend::with_string(&mut s, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(45)
            .y_label_area_size(50)
            .build_cartesian_2d((x_lo - pad)..(x_hi + pad), 0.0..y_max)
            .map_err(plot_err)?;
        chart.configure_mesh().x_desc(x_desc).y_desc(y_desc).draw().map_err(plot_err)?;
        let color = PALETTE[0];
        chart
            .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?;
        chart
            .draw_series(points.iter().map(|&p| Circle::new(p, 4, color.filled())))
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(s)
}

/// Renders every plot as (file name, SVG text).
pub fn render_plots(data: &PlotData) -> Result<Vec<(&'static str, String)>> {
    let names: Vec<String> = data.coverage_bars.iter().map(|b| b.0.clone()).collect();
    let coverage = bar_svg(
        "Calibrated coverage by predictor",
        "coverage (%)",
        &names,
        &[("coverage", data.coverage_bars.iter().map(|b| Some(b.1)).collect())],
        100.0,
    )?;
    let kind_names: Vec<String> = data.kind_bars.iter().map(|b| b.0.clone()).collect();
    let kinds = bar_svg(
        "Benchmark versus synthetic coverage",
        "coverage (%)",
        &kind_names,
        &[
            ("benchmark", data.kind_bars.iter().map(|b| b.1).collect()),
            ("synthetic", data.kind_bars.iter().map(|b| b.2).collect()),
        ],
        100.0,
    )?;
    let size: Vec<(f64, f64)> = data.size_curve.iter().map(|&(n, c)| (n as f64, c)).collect();
    let size = line_svg("Synthetic coverage by network size", "nodes", "coverage (%)", &size, 100.0)?;
    let width_names: Vec<String> = data.width_bars.iter().map(|b| b.0.clone()).collect();
    let width_max = data.width_bars.iter().map(|b| b.1.max(b.2)).fold(0.0, f64::max);
    let width = bar_svg(
        "Mean predicted range width",
        "width",
        &width_names,
        &[
            ("benchmark", data.width_bars.iter().map(|b| Some(b.1)).collect()),
            ("synthetic", data.width_bars.iter().map(|b| Some(b.2)).collect()),
        ],
        width_max,
    )?;
    let agreement: Vec<(f64, f64)> = data.agreement_curve.iter().map(|a| (a.2 as f64, a.3)).collect();
    let agreement = line_svg("Cross-model agreement by network size", "nodes", "agreement (%)", &agreement, 100.0)?;
    Ok(PLOT_FILES.into_iter().zip([coverage, kinds, size, width, agreement]).collect())
}

impl Campaign {
    /// Renders plots from `evaluation.json`.
    pub fn report(&self) -> Result<PlotData> {
        let eval = self.load_evaluation()?;
        let data = PlotData::from_evaluation(&eval);
        let dir = self.layout.plots_dir();
        write_atomic(&dir.join("plot_data.json"), serde_json::to_string_pretty(&data)?.as_bytes())?;
        for (name, svg) in render_plots(&data)? {
            write_atomic(&dir.join(name), svg.as_bytes())?;
        }
        self.update_manifest(|m| m.mark_phase("report"))?;
        Ok(data)
    }
}
