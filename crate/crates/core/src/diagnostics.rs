//! Split-R̂, effective sample size and Monte Carlo standard error.
//!
//! Inputs are per-chain draw vectors of one parameter. Every chain is split
//! in half; with an odd length the middle draw is dropped.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::ChainOutput;
use crate::Real;

fn split<T: Real>(chains: &[Vec<T>], min_len: usize) -> Result<Vec<Vec<f64>>> {
    if chains.is_empty() {
        return Err(Error::TooFewDraws { needed: 1, got: 0 });
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("chains differ in length".into()));
    }
    if n < min_len {
        return Err(Error::TooFewDraws {
            needed: min_len,
            got: n,
        });
    }
    let half = n / 2;
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let c: Vec<f64> = c.iter().map(|v| v.as_f64()).collect();
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite draw".into()));
        }
        out.push(c[..half].to_vec());
        out.push(c[n - half..].to_vec());
    }
    Ok(out)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Within-sequence mean variance `W` and variance of sequence means.
fn variance_parts(seqs: &[Vec<f64>]) -> Result<(f64, f64)> {
    let w = mean(&seqs.iter().map(|s| sample_var(s)).collect::<Vec<_>>());
    // Relative floor so that constant chains hit the error branch despite rounding.
    let scale = seqs
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !(w > 1e-28 * scale * scale) {
        return Err(Error::ZeroVariance);
    }
    let means: Vec<f64> = seqs.iter().map(|s| mean(s)).collect();
    Ok((w, sample_var(&means)))
}

/// Split potential scale reduction factor.
pub fn split_rhat<T: Real>(chains: &[Vec<T>]) -> Result<f64> {
    let seqs = split(chains, 4)?;
    let n = seqs[0].len() as f64;
    let (w, var_means) = variance_parts(&seqs)?;
    Ok((((n - 1.0) / n * w + var_means) / w).sqrt())
}

/// Split-chain effective sample size with Geyer's initial monotone sequence.
///
/// The integrated autocorrelation time is floored at `max(1/log10(S), 1/2)`
/// for `S` total draws, so the estimate never exceeds `2S`.
pub fn ess<T: Real>(chains: &[Vec<T>]) -> Result<f64> {
    let seqs = split(chains, 8)?;
    let m = seqs.len();
    let n = seqs[0].len();
    let (mean_var, var_means) = variance_parts(&seqs)?;
    let var_plus = mean_var * (n as f64 - 1.0) / n as f64 + var_means;

    let centered: Vec<Vec<f64>> = seqs
        .iter()
        .map(|s| {
            let mu = mean(s);
            s.iter().map(|v| v - mu).collect()
        })
        .collect();
    // Mean over sequences of the biased autocovariance at `lag`.
    let acov = |lag: usize| -> f64 {
        centered
            .iter()
            .map(|s| s[..n - lag].iter().zip(&s[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
            .sum::<f64>()
            / m as f64
    };
    let rho_at = |lag: usize| 1.0 - (mean_var - acov(lag)) / var_plus;

    let mut rho = vec![0.0; n + 2];
    rho[0] = 1.0;
    let mut rho_even = 1.0;
    let mut rho_odd = rho_at(1);
    rho[1] = rho_odd;
    let mut t = 1;
    while t + 4 < n && rho_even + rho_odd > 0.0 {
        rho_even = rho_at(t + 1);
        rho_odd = rho_at(t + 2);
        if rho_even + rho_odd >= 0.0 {
            rho[t + 1] = rho_even;
            rho[t + 2] = rho_odd;
        }
        t += 2;
    }
    let max_t = t;
    if rho_even > 0.0 {
        rho[max_t + 1] = rho_even;
    }
    let mut s = 1;
    while s + 3 <= max_t {
        if rho[s + 1] + rho[s + 2] > rho[s - 1] + rho[s] {
            rho[s + 1] = (rho[s - 1] + rho[s]) / 2.0;
            rho[s + 2] = rho[s + 1];
        }
        s += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + rho[max_t + 1];
    let tau = tau.max(1.0 / total.log10()).max(0.5);
    Ok(total / tau)
}

/// Monte Carlo standard error of the mean: pooled SD over `sqrt(ESS)`.
pub fn mcse_mean<T: Real>(chains: &[Vec<T>]) -> Result<f64> {
    let e = ess(chains)?;
    let all: Vec<f64> = chains.iter().flatten().map(|v| v.as_f64()).collect();
    Ok(sample_var(&all).sqrt() / e.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub name: String,
    pub ess: f64,
    pub rhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub min_ess: f64,
    pub med_ess: f64,
    pub mean_rhat: f64,
    pub max_rhat: f64,
    pub n_divergent: usize,
    pub params: Vec<ParamDiagnostics>,
}

pub const REPORT_HEADER: [&str; 5] = ["min_ess", "med_ess", "mean_rhat", "max_rhat", "n_divergent"];

impl DiagnosticsReport {
    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if header {
            w.write_record(REPORT_HEADER)?;
        }
        w.write_record([
            self.min_ess.to_string(),
            self.med_ess.to_string(),
            self.mean_rhat.to_string(),
            self.max_rhat.to_string(),
            self.n_divergent.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Median with the two middle values averaged for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Diagnostics over `params` (every retained parameter when `None`).
pub fn report<T: Real>(
    outputs: &[ChainOutput<T>],
    params: Option<&[&str]>,
) -> Result<DiagnosticsReport> {
    let first = outputs
        .first()
        .ok_or(Error::TooFewDraws { needed: 1, got: 0 })?;
    if outputs.iter().any(|o| o.names != first.names) {
        return Err(Error::Dimension("chains retain different parameters".into()));
    }
    if outputs.iter().any(|o| o.n_draws() != first.n_draws()) {
        return Err(Error::Dimension("chains differ in length".into()));
    }
    let indices: Vec<usize> = match params {
        None => (0..first.n_params()).collect(),
        Some(names) => names
            .iter()
            .map(|name| {
                first
                    .names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Dimension(format!("unknown parameter {name}")))
            })
            .collect::<Result<_>>()?,
    };
    if indices.is_empty() {
        return Err(Error::Dimension("no parameters selected".into()));
    }
    let mut per = Vec::with_capacity(indices.len());
    for &k in &indices {
        let cols: Vec<Vec<T>> = outputs.iter().map(|o| o.column(k)).collect();
        per.push(ParamDiagnostics {
            name: first.names[k].clone(),
            ess: ess(&cols)?,
            rhat: split_rhat(&cols)?,
        });
    }
    let esses: Vec<f64> = per.iter().map(|p| p.ess).collect();
    let rhats: Vec<f64> = per.iter().map(|p| p.rhat).collect();
    Ok(DiagnosticsReport {
        min_ess: esses.iter().cloned().fold(f64::INFINITY, f64::min),
        med_ess: median(&esses),
        mean_rhat: mean(&rhats),
        max_rhat: rhats.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        n_divergent: outputs.iter().map(|o| o.n_divergent()).sum(),
        params: per,
    })
}
