//! Posterior summaries of a scale parameter and their aggregation over datasets.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

pub const MIN_DRAWS: usize = 100;

pub const SUMMARY_HEADER: [&str; 9] = [
    "label",
    "true_value",
    "mean",
    "median",
    "bias",
    "rel_bias",
    "rmse",
    "coverage",
    "interval_length",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub post_mean: f64,
    pub post_median: f64,
    pub q025: f64,
    pub q975: f64,
    pub bias: f64,
    pub rel_bias: f64,
    pub sq_err: f64,
    pub covered: bool,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub true_value: f64,
    pub mean: f64,
    pub median: f64,
    pub bias: f64,
    pub rel_bias: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub interval_length: f64,
}

impl SummaryRow {
    pub fn record(&self) -> [String; 9] {
        [
            self.label.clone(),
            self.true_value.to_string(),
            self.mean.to_string(),
            self.median.to_string(),
            self.bias.to_string(),
            self.rel_bias.to_string(),
            self.rmse.to_string(),
            self.coverage.to_string(),
            self.interval_length.to_string(),
        ]
    }
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Quantile of sorted data with linear interpolation at zero-based index `p(n − 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::TooFewDraws { needed: 1, got: 0 });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("quantile level {p} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&v, p))
}

/// Mean, median, central 95% interval, and error measures against `tau_true`.
pub fn summarize_dataset<T: Real>(draws: &[T], tau_true: f64) -> Result<DatasetMetrics> {
    if draws.len() < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            needed: MIN_DRAWS,
            got: draws.len(),
        });
    }
    let mut v: Vec<f64> = draws.iter().map(|d| d.as_f64()).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite draw".into()));
    }
    v.sort_by(f64::total_cmp);
    let post_median = quantile_sorted(&v, 0.5);
    let post_mean = post_median + v.iter().map(|x| x - post_median).sum::<f64>() / v.len() as f64;
    let q025 = quantile_sorted(&v, 0.025);
    let q975 = quantile_sorted(&v, 0.975);
    let bias = post_mean - tau_true;
    Ok(DatasetMetrics {
        post_mean,
        post_median,
        q025,
        q975,
        bias,
        rel_bias: bias / tau_true,
        sq_err: bias * bias,
        covered: q025 <= tau_true && tau_true <= q975,
        length: q975 - q025,
    })
}

/// Averages per-dataset metrics into one table row.
pub fn aggregate(label: &str, true_value: f64, rows: &[DatasetMetrics]) -> Result<SummaryRow> {
    if rows.is_empty() {
        return Err(Error::TooFewDraws { needed: 1, got: 0 });
    }
    let n = rows.len() as f64;
    let avg = |f: fn(&DatasetMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let mean = avg(|r| r.post_mean);
    Ok(SummaryRow {
        label: label.to_string(),
        true_value,
        mean,
        median: avg(|r| r.post_median),
        bias: mean - true_value,
        rel_bias: avg(|r| r.rel_bias),
        rmse: avg(|r| r.sq_err).sqrt(),
        coverage: rows.iter().filter(|r| r.covered).count() as f64 / n,
        interval_length: avg(|r| r.length),
    })
}
