//! Reference estimators used to cross-check the NUTS engine.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::models::{Model1Data, Model2Data};
use crate::stats::{invgamma_sample, SimRng};

/// Post-burn-in Gibbs draws for Model 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsDraws {
    pub theta: Vec<Vec<f64>>,
    pub tau2: Vec<f64>,
}

impl GibbsDraws {
    pub fn tau(&self) -> Vec<f64> {
        self.tau2.iter().map(|v| v.sqrt()).collect()
    }
}

/// Draws `τ² | θ ~ IG(a + J/2, b + θᵀθ/2)`.
pub fn tau2_conditional(theta: &[f64], a: f64, b: f64, rng: &mut SimRng) -> Result<f64> {
    let ss: f64 = theta.iter().map(|t| t * t).sum();
    invgamma_sample(rng, a + 0.5 * theta.len() as f64, b + 0.5 * ss)
}

/// Conjugate Gibbs sampler for Model 1 (μ = 0) under `τ² ~ IG(a, b)`.
pub fn gibbs_model1(
    data: &Model1Data<f64>,
    a: f64,
    b: f64,
    iters: usize,
    burnin: usize,
    rng: &mut SimRng,
) -> Result<GibbsDraws> {
    if !(a > 0.0 && b > 0.0) {
        return domain(format!("IG hyperparameters must be positive, got ({a}, {b})"));
    }
    if iters <= burnin {
        return domain(format!("iters ({iters}) must exceed burnin ({burnin})"));
    }
    let j = data.groups();
    let mut theta = data.ybar.clone();
    let mut tau2 = tau2_conditional(&theta, a, b, rng)?;
    let mut out = GibbsDraws {
        theta: Vec::with_capacity(iters - burnin),
        tau2: Vec::with_capacity(iters - burnin),
    };
    for it in 0..iters {
        for k in 0..j {
            let s2 = data.sigma[k] * data.sigma[k];
            let v = 1.0 / (1.0 / s2 + 1.0 / tau2);
            theta[k] = v * data.ybar[k] / s2 + v.sqrt() * rng.std_normal();
        }
        tau2 = tau2_conditional(&theta, a, b, rng)?;
        if it >= burnin {
            out.theta.push(theta.clone());
            out.tau2.push(tau2);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemlFit {
    pub tau_hat: f64,
    pub sigma_hat: f64,
    pub converged: bool,
}

const LOG_LAMBDA_MIN: f64 = -30.0;
const LOG_LAMBDA_MAX: f64 = 30.0;
const GRID_STEP: f64 = 0.25;

struct RemlProblem<'a> {
    d: &'a Model2Data<f64>,
    xtx: [f64; 3],
    s: [f64; 2],
}

impl RemlProblem<'_> {
    /// Profiled REML log-likelihood (up to a constant) and `σ̂²` at `λ = τ²/σ²`.
    fn eval(&self, lambda: f64) -> Result<(f64, f64)> {
        let (n, jn) = (self.d.n, self.d.j);
        let c = lambda / (1.0 + jn as f64 * lambda);
        let nf = n as f64;
        // XᵀH⁻¹X = n (XᵢᵀXᵢ − c s sᵀ) for the common subject design Xᵢ.
        let a00 = nf * (self.xtx[0] - c * self.s[0] * self.s[0]);
        let a01 = nf * (self.xtx[1] - c * self.s[0] * self.s[1]);
        let a11 = nf * (self.xtx[2] - c * self.s[1] * self.s[1]);
        let det = a00 * a11 - a01 * a01;
        if !(det > 1e-12 * (a00 * a11).abs()) {
            return Err(Error::RankDeficient);
        }
        let (mut u0, mut u1) = (0.0, 0.0);
        for i in 0..n {
            let row = &self.d.y[i * jn..(i + 1) * jn];
            let sum: f64 = row.iter().sum();
            let sx: f64 = row.iter().zip(&self.d.x).map(|(y, x)| y * x).sum();
            u0 += sum - c * self.s[0] * sum;
            u1 += sx - c * self.s[1] * sum;
        }
        let b0 = (a11 * u0 - a01 * u1) / det;
        let b1 = (a00 * u1 - a01 * u0) / det;
        let mut quad = 0.0;
        for i in 0..n {
            let row = &self.d.y[i * jn..(i + 1) * jn];
            let (mut rr, mut r1) = (0.0, 0.0);
            for (y, x) in row.iter().zip(&self.d.x) {
                let r = y - b0 - b1 * x;
                rr += r * r;
                r1 += r;
            }
            quad += rr - c * r1 * r1;
        }
        let dof = (n * jn - 2) as f64;
        let sigma2 = quad / dof;
        let ll = -0.5 * (dof * sigma2.ln() + nf * (jn as f64 * lambda).ln_1p() + det.ln());
        Ok((ll, sigma2))
    }
}

/// REML fit of the random-intercept model by a 1-D search over `λ = τ²/σ²`.
pub fn reml_model2(data: &Model2Data<f64>) -> Result<RemlFit> {
    if data.n < 2 || data.j < 2 {
        return domain(format!("need n >= 2 and J >= 2, got n={}, J={}", data.n, data.j));
    }
    if data.y.len() != data.n * data.j || data.x.len() != data.j {
        return Err(Error::Dimension("y must be n×J and x length J".into()));
    }
    let sx: f64 = data.x.iter().sum();
    let sxx: f64 = data.x.iter().map(|x| x * x).sum();
    let problem = RemlProblem {
        d: data,
        xtx: [data.j as f64, sx, sxx],
        s: [data.j as f64, sx],
    };
    let crit = |log_lambda: f64| problem.eval(log_lambda.exp()).map(|r| r.0);

    let steps = ((LOG_LAMBDA_MAX - LOG_LAMBDA_MIN) / GRID_STEP).round() as usize;
    let mut best = (LOG_LAMBDA_MIN, f64::NEG_INFINITY);
    for k in 0..=steps {
        let ll = LOG_LAMBDA_MIN + k as f64 * GRID_STEP;
        let v = crit(ll)?;
        if v > best.1 {
            best = (ll, v);
        }
    }
    let (mut lo, mut hi) = (
        (best.0 - GRID_STEP).max(LOG_LAMBDA_MIN),
        (best.0 + GRID_STEP).min(LOG_LAMBDA_MAX),
    );
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (crit(x1)?, crit(x2)?);
    let mut iters = 0;
    while hi - lo > 1e-10 && iters < 200 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = crit(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = crit(x2)?;
        }
        iters += 1;
    }
    let log_lambda = 0.5 * (lo + hi);
    let (ll_star, sigma2_star) = problem.eval(log_lambda.exp())?;
    let (ll_zero, sigma2_zero) = problem.eval(0.0)?;
    let converged = hi - lo <= 1e-10 && log_lambda < LOG_LAMBDA_MAX - GRID_STEP;
    if ll_zero >= ll_star - 1e-10 {
        return Ok(RemlFit {
            tau_hat: 0.0,
            sigma_hat: sigma2_zero.sqrt(),
            converged,
        });
    }
    Ok(RemlFit {
        tau_hat: (log_lambda.exp() * sigma2_star).sqrt(),
        sigma_hat: sigma2_star.sqrt(),
        converged,
    })
}
