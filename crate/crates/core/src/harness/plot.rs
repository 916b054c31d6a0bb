//! Smoothed training curves from metrics CSVs.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

/// One row of a metrics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: usize,
    pub episode: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub normalized_return: f64,
    pub accepted: u8,
    pub epsilon_used: usize,
}

pub fn read_metrics_csv(r: impl Read) -> Result<Vec<MetricRow>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// Trailing moving average over at most `window` values.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        let n = (i + 1).min(window);
        out.push(if window == 1 { v } else { sum / n as f64 });
    }
    out
}

/// `(step, smoothed normalized return)` points of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSeries {
    pub window: usize,
    pub points: Vec<(usize, f64)>,
}

impl PlotSeries {
    pub fn from_metrics(rows: &[MetricRow], window: usize) -> Self {
        let values: Vec<f64> = rows.iter().map(|r| r.normalized_return).collect();
        let points = rows.iter().map(|r| r.step).zip(smooth(&values, window)).collect();
        PlotSeries { window: window.max(1), points }
    }

    /// Value of the latest point at or before each grid step; grid steps
    /// before the first episode end are skipped.
    pub fn resample(&self, grid: &[usize]) -> Self {
        let mut k = 0;
        let mut points = Vec::new();
        for &g in grid {
            while k < self.points.len() && self.points[k].0 <= g {
                k += 1;
            }
            if k > 0 {
                points.push((g, self.points[k - 1].1));
            }
        }
        PlotSeries { window: self.window, points }
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# smoothing_window={}", self.window)?;
        writeln!(w, "step,smoothed_normalized_return")?;
        for (s, v) in &self.points {
            writeln!(w, "{s},{v}")?;
        }
        Ok(())
    }
}

/// Smooths every run with the same window. With `grid_stride`, all series
/// are resampled onto the shared grid `stride, 2·stride, …` up to the
/// largest step of any run.
pub fn export_plot_data(runs: &[Vec<MetricRow>], window: usize, grid_stride: Option<usize>) -> Vec<PlotSeries> {
    let series: Vec<PlotSeries> = runs.iter().map(|r| PlotSeries::from_metrics(r, window)).collect();
    let Some(stride) = grid_stride.filter(|&s| s > 0) else { return series };
    let last = runs.iter().flatten().map(|r| r.step).max().unwrap_or(0);
    let grid: Vec<usize> = (1..=last / stride).map(|k| k * stride).collect();
    series.iter().map(|s| s.resample(&grid)).collect()
}
