use super::{Dataset, ModelKind};
use crate::error::{Error, Result};
use crate::priors::{PriorSpec, TauPrior};
use crate::Real;

/// `(β₀, β₁) ~ N(0, (10σ)² I)`.
pub const BETA_PRIOR_SD_FACTOR: f64 = 10.0;
/// `σ² ~ IG(0.05, 0.01)`.
pub const SIGMA2_PRIOR_A: f64 = 0.05;
pub const SIGMA2_PRIOR_B: f64 = 0.01;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// A differentiable log density on an unconstrained real vector space.
pub trait LogDensity<T: Real>: Sync {
    fn dim(&self) -> usize;

    /// Returns the log density at `q` and writes its gradient into `grad`.
    /// Non-finite return values are allowed and signal a pathological point.
    fn logp_grad(&self, q: &[T], grad: &mut [T]) -> T;

    fn logp(&self, q: &[T]) -> T {
        let mut g = vec![T::zero(); self.dim()];
        self.logp_grad(q, &mut g)
    }

    /// Maps an unconstrained point to the reported parameter scale.
    fn constrain_into(&self, q: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend_from_slice(q);
    }

    fn param_names(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("q[{i}]")).collect()
    }
}

/// A (model, data, prior) triple exposed as an unconstrained log-posterior.
///
/// Layouts (constrained | unconstrained):
/// - M1: `θ₁..θ_J, τ` | `θ, ln τ`
/// - M2: `β₀, β₁, α₁..α_n, τ, σ²` | `β, α, ln τ, ln σ²`
/// - M3: `β₀, β₁, b₁..b_J, r₁..r_n, τ_b, τ_r, σ²` | `β, b, r, ln τ_b, ln τ_r, ln σ²`
///
/// All random effects are centered. Each log transform contributes its
/// log-Jacobian to the density.
#[derive(Debug, Clone)]
pub struct BoundTarget<T: Real> {
    data: Dataset<T>,
    priors: Vec<PriorSpec<T>>,
    tau_priors: Vec<TauPrior<T>>,
    names: Vec<String>,
}

impl<T: Real> BoundTarget<T> {
    /// Binds `data` to its random-effect prior(s). Model 3 accepts either one
    /// prior applied to both `τ_b` and `τ_r`, or the pair `[τ_b, τ_r]`.
    pub fn new(data: Dataset<T>, priors: Vec<PriorSpec<T>>) -> Result<Self> {
        let priors = match (data.kind(), priors.len()) {
            (ModelKind::M1 | ModelKind::M2, 1) => priors,
            (ModelKind::M3, 1) => vec![priors[0].clone(), priors[0].clone()],
            (ModelKind::M3, 2) => priors,
            (kind, k) => {
                return Err(Error::Dimension(format!(
                    "model {} takes {} prior(s), got {k}",
                    kind.number(),
                    if kind == ModelKind::M3 { "1 or 2" } else { "1" }
                )))
            }
        };
        validate(&data)?;
        let names = param_names(&data);
        let tau_priors = priors.iter().map(PriorSpec::density).collect();
        Ok(Self {
            data,
            priors,
            tau_priors,
            names,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.data.kind()
    }

    pub fn data(&self) -> &Dataset<T> {
        &self.data
    }

    pub fn priors(&self) -> &[PriorSpec<T>] {
        &self.priors
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Positions of the random-effect SD(s) in the constrained vector.
    pub fn tau_indices(&self) -> Vec<usize> {
        match &self.data {
            Dataset::M1(d) => vec![d.groups()],
            Dataset::M2(d) => vec![d.n + 2],
            Dataset::M3(d) => vec![2 + d.j + d.n, 3 + d.j + d.n],
        }
    }

    /// Indices (in both spaces) of parameters stored on the log scale.
    fn log_scaled(&self) -> std::ops::Range<usize> {
        match &self.data {
            Dataset::M1(d) => d.groups()..d.groups() + 1,
            Dataset::M2(d) => d.n + 2..d.n + 4,
            Dataset::M3(d) => 2 + d.j + d.n..5 + d.j + d.n,
        }
    }

    pub fn constrain(&self, q: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(q.len());
        LogDensity::constrain_into(self, q, &mut out);
        out
    }

    pub fn unconstrain(&self, c: &[T]) -> Result<Vec<T>> {
        if c.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.dim(),
                c.len()
            )));
        }
        let mut out = c.to_vec();
        for k in self.log_scaled() {
            if !(c[k] > T::zero()) {
                return Err(Error::Domain(format!("{} must be positive", self.names[k])));
            }
            out[k] = c[k].ln();
        }
        Ok(out)
    }

    /// Log density and gradient as a fresh vector.
    pub fn eval(&self, q: &[T]) -> (T, Vec<T>) {
        let mut g = vec![T::zero(); self.dim()];
        let lp = self.logp_grad(q, &mut g);
        (lp, g)
    }
}

fn validate<T: Real>(data: &Dataset<T>) -> Result<()> {
    let bad = |msg: String| Err(Error::Dimension(msg));
    match data {
        Dataset::M1(d) => {
            if d.ybar.is_empty() || d.ybar.len() != d.sigma.len() {
                return bad(format!("ybar has {} entries, sigma {}", d.ybar.len(), d.sigma.len()));
            }
            if d.sigma.iter().any(|s| !(*s > T::zero())) {
                return Err(Error::Domain("school sigmas must be positive".into()));
            }
        }
        Dataset::M2(d) => {
            if d.n < 1 || d.j < 1 || d.y.len() != d.n * d.j || d.x.len() != d.j {
                return bad(format!("y has {} values for n={}, J={}, x has {}", d.y.len(), d.n, d.j, d.x.len()));
            }
        }
        Dataset::M3(d) => {
            if d.n < 1 || d.j < 1 || d.y.len() != d.n * d.j || d.x.len() != d.n {
                return bad(format!("y has {} values for n={}, J={}, x has {}", d.y.len(), d.n, d.j, d.x.len()));
            }
        }
    }
    Ok(())
}

fn param_names<T: Real>(data: &Dataset<T>) -> Vec<String> {
    fn indexed(prefix: &'static str, k: usize) -> impl Iterator<Item = String> {
        (1..=k).map(move |i| format!("{prefix}[{i}]"))
    }
    let mut names: Vec<String> = Vec::new();
    match data {
        Dataset::M1(d) => {
            names.extend(indexed("theta", d.groups()));
            names.push("tau".into());
        }
        Dataset::M2(d) => {
            names.extend(["beta0".into(), "beta1".into()]);
            names.extend(indexed("alpha", d.n));
            names.extend(["tau".into(), "sigma2".into()]);
        }
        Dataset::M3(d) => {
            names.extend(["beta0".into(), "beta1".into()]);
            names.extend(indexed("b", d.j));
            names.extend(indexed("r", d.n));
            names.extend(["tau_b".into(), "tau_r".into(), "sigma2".into()]);
        }
    }
    names
}

/// Terms shared by models 2 and 3 that depend on `(β, σ²)` only, with their
/// gradients. Returns `(lp, dβ₀, dβ₁, d ln σ²)` excluding the likelihood.
#[inline]
fn nuisance_terms<T: Real>(beta0: T, beta1: T, eta: T) -> (T, T, T, T) {
    let v = eta.exp();
    let k2 = T::lit(BETA_PRIOR_SD_FACTOR * BETA_PRIOR_SD_FACTOR);
    let (a, b) = (T::lit(SIGMA2_PRIOR_A), T::lit(SIGMA2_PRIOR_B));
    let half = T::lit(0.5);
    let bb = beta0 * beta0 + beta1 * beta1;
    // two N(0, 100 v) terms: −2 ln√(2π) − ln(100 v) − bb/(200 v)
    let lp_beta = -T::lit(2.0 * LN_SQRT_2PI) - k2.ln() - eta - half * bb / (k2 * v);
    // IG(v; a, b) on σ², plus the ln σ² Jacobian η
    let lp_sigma = a * b.ln() - crate::stats::ln_gamma(a) - (a + T::one()) * eta - b / v + eta;
    let d_eta = -T::one() + half * bb / (k2 * v) - (a + T::one()) + b / v + T::one();
    (
        lp_beta + lp_sigma,
        -beta0 / (k2 * v),
        -beta1 / (k2 * v),
        d_eta,
    )
}

impl<T: Real> LogDensity<T> for BoundTarget<T> {
    fn dim(&self) -> usize {
        self.names.len()
    }

    fn constrain_into(&self, q: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend_from_slice(q);
        for k in self.log_scaled() {
            out[k] = q[k].exp();
        }
    }

    fn param_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn logp_grad(&self, q: &[T], grad: &mut [T]) -> T {
        debug_assert_eq!(q.len(), self.dim());
        debug_assert_eq!(grad.len(), self.dim());
        let half = T::lit(0.5);
        let ln_sqrt_2pi = T::lit(LN_SQRT_2PI);
        match &self.data {
            Dataset::M1(d) => {
                let jn = d.groups();
                let xi = q[jn];
                let tau = xi.exp();
                let inv_t2 = (tau * tau).recip();
                let mut lp = T::zero();
                let mut ss = T::zero();
                for k in 0..jn {
                    let th = q[k];
                    let s = d.sigma[k];
                    let inv_s2 = (s * s).recip();
                    let r = d.ybar[k] - th;
                    lp = lp - ln_sqrt_2pi - s.ln() - half * r * r * inv_s2;
                    lp = lp - ln_sqrt_2pi - xi - half * th * th * inv_t2;
                    grad[k] = r * inv_s2 - th * inv_t2;
                    ss = ss + th * th;
                }
                let prior = &self.tau_priors[0];
                lp = lp + prior.log_pdf(tau) + xi;
                grad[jn] = -T::count(jn) + ss * inv_t2 + prior.dlog_pdf_dlog(tau) + T::one();
                lp
            }
            Dataset::M2(d) => {
                let (n, jn) = (d.n, d.j);
                let (b0, b1) = (q[0], q[1]);
                let xi = q[n + 2];
                let eta = q[n + 3];
                let tau = xi.exp();
                let inv_t2 = (tau * tau).recip();
                let inv_v = (-eta).exp();
                let mut sse = T::zero();
                let (mut g0, mut g1) = (T::zero(), T::zero());
                let mut ss_alpha = T::zero();
                let mut lp_alpha = T::zero();
                for i in 0..n {
                    let alpha = q[2 + i];
                    let row = &d.y[i * jn..(i + 1) * jn];
                    let mut se = T::zero();
                    for (&y, &x) in row.iter().zip(&d.x) {
                        let e = y - b0 - b1 * x - alpha;
                        sse = sse + e * e;
                        se = se + e;
                        g1 = g1 + e * x;
                    }
                    g0 = g0 + se;
                    grad[2 + i] = se * inv_v - alpha * inv_t2;
                    ss_alpha = ss_alpha + alpha * alpha;
                    lp_alpha = lp_alpha - ln_sqrt_2pi - xi - half * alpha * alpha * inv_t2;
                }
                let nobs = T::count(n * jn);
                let lp_lik = -nobs * (ln_sqrt_2pi + half * eta) - half * sse * inv_v;
                let (lp_nuis, d0, d1, d_eta) = nuisance_terms(b0, b1, eta);
                let prior = &self.tau_priors[0];
                grad[0] = g0 * inv_v + d0;
                grad[1] = g1 * inv_v + d1;
                grad[n + 2] =
                    -T::count(n) + ss_alpha * inv_t2 + prior.dlog_pdf_dlog(tau) + T::one();
                grad[n + 3] = -half * nobs + half * sse * inv_v + d_eta;
                lp_lik + lp_alpha + lp_nuis + prior.log_pdf(tau) + xi
            }
            Dataset::M3(d) => {
                let (n, jn) = (d.n, d.j);
                let (b0, b1) = (q[0], q[1]);
                let b = &q[2..2 + jn];
                let r = &q[2 + jn..2 + jn + n];
                let xi_b = q[2 + jn + n];
                let xi_r = q[3 + jn + n];
                let eta = q[4 + jn + n];
                let (tau_b, tau_r) = (xi_b.exp(), xi_r.exp());
                let inv_tb2 = (tau_b * tau_b).recip();
                let inv_tr2 = (tau_r * tau_r).recip();
                let inv_v = (-eta).exp();

                for g in grad[2..2 + jn].iter_mut() {
                    *g = T::zero();
                }
                let mut sse = T::zero();
                let (mut g0, mut g1) = (T::zero(), T::zero());
                let mut ss_r = T::zero();
                for i in 0..n {
                    let xi_i = d.x[i];
                    let ri = r[i];
                    let base = b0 + b1 * xi_i + ri;
                    let row = &d.y[i * jn..(i + 1) * jn];
                    let mut se = T::zero();
                    for k in 0..jn {
                        let e = row[k] - base - b[k] * xi_i;
                        sse = sse + e * e;
                        se = se + e;
                        grad[2 + k] = grad[2 + k] + e * xi_i;
                    }
                    g0 = g0 + se;
                    g1 = g1 + se * xi_i;
                    grad[2 + jn + i] = se * inv_v - ri * inv_tr2;
                    ss_r = ss_r + ri * ri;
                }
                let mut ss_b = T::zero();
                for k in 0..jn {
                    grad[2 + k] = grad[2 + k] * inv_v - b[k] * inv_tb2;
                    ss_b = ss_b + b[k] * b[k];
                }
                let nobs = T::count(n * jn);
                let lp_lik = -nobs * (ln_sqrt_2pi + half * eta) - half * sse * inv_v;
                let lp_b = -T::count(jn) * (ln_sqrt_2pi + xi_b) - half * ss_b * inv_tb2;
                let lp_r = -T::count(n) * (ln_sqrt_2pi + xi_r) - half * ss_r * inv_tr2;
                let (lp_nuis, d0, d1, d_eta) = nuisance_terms(b0, b1, eta);
                let (pb, pr) = (&self.tau_priors[0], &self.tau_priors[1]);
                grad[0] = g0 * inv_v + d0;
                grad[1] = g1 * inv_v + d1;
                grad[2 + jn + n] =
                    -T::count(jn) + ss_b * inv_tb2 + pb.dlog_pdf_dlog(tau_b) + T::one();
                grad[3 + jn + n] =
                    -T::count(n) + ss_r * inv_tr2 + pr.dlog_pdf_dlog(tau_r) + T::one();
                grad[4 + jn + n] = -half * nobs + half * sse * inv_v + d_eta;
                lp_lik + lp_b + lp_r + lp_nuis + pb.log_pdf(tau_b) + xi_b + pr.log_pdf(tau_r) + xi_r
            }
        }
    }
}
