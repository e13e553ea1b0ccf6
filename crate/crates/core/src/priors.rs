//! Inverse gamma and half-t priors on a random-effect scale, and the
//! fourteen-entry study catalog.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::stats::{
    halft_dlogpdf_dt_unchecked, halft_log_kernel, halft_log_norm, invgamma_dlogpdf_dv_unchecked,
    ln_gamma,
};
use crate::Real;

/// Default over/under-statement factor for the prior scale.
pub const DEFAULT_SCALE_FACTOR: f64 = 1.5;

/// Number of entries in [`catalog`].
pub const CATALOG_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PriorFamily {
    /// `τ² ~ IG(ν/2, ν s²/2)`
    IgOnVariance,
    /// `τ ~ HT(ν, s)`
    HtOnSd,
}

/// A prior on a random-effect standard deviation, described by its degrees of
/// freedom `nu` and scale `s` under either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PriorSpec<T: Real> {
    pub family: PriorFamily,
    pub nu: T,
    pub s: T,
    pub label: String,
}

impl<T: Real> PriorSpec<T> {
    pub fn new(family: PriorFamily, nu: T, s: T, label: impl Into<String>) -> Result<Self> {
        if !(nu > T::zero() && s > T::zero() && nu.is_finite() && s.is_finite()) {
            return domain(format!("prior needs finite nu, s > 0, got ({nu}, {s})"));
        }
        Ok(Self {
            family,
            nu,
            s,
            label: label.into(),
        })
    }

    pub fn half_t(nu: T, s: T) -> Result<Self> {
        Self::new(PriorFamily::HtOnSd, nu, s, format!("HT({nu}, {s})"))
    }

    /// IG shape `a = ν/2`.
    pub fn a(&self) -> T {
        self.nu * T::lit(0.5)
    }

    /// IG scale `b = ν s² / 2`.
    pub fn b(&self) -> T {
        self.nu * self.s * self.s * T::lit(0.5)
    }

    pub fn is_ig(&self) -> bool {
        self.family == PriorFamily::IgOnVariance
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Precomputed evaluator for repeated use inside a log-posterior.
    pub fn density(&self) -> TauPrior<T> {
        let (log_norm, a, b) = match self.family {
            PriorFamily::IgOnVariance => {
                let (a, b) = (self.a(), self.b());
                (a * b.ln() - ln_gamma(a) + T::LN_2(), a, b)
            }
            PriorFamily::HtOnSd => (halft_log_norm(self.nu, self.s), T::zero(), T::zero()),
        };
        TauPrior {
            family: self.family,
            nu: self.nu,
            s: self.s,
            a,
            b,
            log_norm,
        }
    }
}

/// Builds an IG(a, b) prior on the variance.
pub fn make_ig<T: Real>(a: T, b: T) -> Result<PriorSpec<T>> {
    if !(a > T::zero() && b > T::zero()) {
        return domain(format!("IG needs a, b > 0, got ({a}, {b})"));
    }
    let nu = T::lit(2.0) * a;
    let s = (b / a).sqrt();
    PriorSpec::new(PriorFamily::IgOnVariance, nu, s, format!("IG({a}, {b})"))
}

/// The counterpart prior with the same `(ν, s)` in the other family.
pub fn ig_ht_pair<T: Real>(spec: &PriorSpec<T>) -> PriorSpec<T> {
    let family = match spec.family {
        PriorFamily::IgOnVariance => PriorFamily::HtOnSd,
        PriorFamily::HtOnSd => PriorFamily::IgOnVariance,
    };
    let label = match family {
        PriorFamily::HtOnSd => format!("HT({}, {})", spec.nu, spec.s),
        PriorFamily::IgOnVariance => format!("IG({}, {})", spec.a(), spec.b()),
    };
    PriorSpec {
        family,
        nu: spec.nu,
        s: spec.s,
        label,
    }
}

/// How an entry's scale hyperparameter relates to the true value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRegime {
    /// Fixed defaults from the literature (entries 1–4).
    Literature,
    /// Scale equal to the true value (entries 5–10).
    True,
    /// Scale inflated by `c` (entries 11–12).
    Over,
    /// Scale deflated by `c` (entries 13–14).
    Under,
}

impl ScaleRegime {
    pub fn of_entry(index: usize) -> Self {
        match index {
            1..=4 => ScaleRegime::Literature,
            5..=10 => ScaleRegime::True,
            11 | 12 => ScaleRegime::Over,
            _ => ScaleRegime::Under,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScaleRegime::Literature => "literature",
            ScaleRegime::True => "true",
            ScaleRegime::Over => "over",
            ScaleRegime::Under => "under",
        }
    }
}

const CATALOG_LABELS: [&str; CATALOG_LEN] = [
    "1.IG(1, 1)",
    "2.IG(0.001, 0.001)",
    "3.HT(1, 1.2tau)",
    "4.HT(4, 1)",
    "5.IG(0.5, tau^2/2)",
    "6.HT(1, tau)",
    "7.IG(2, 2tau^2)",
    "8.HT(4, tau)",
    "9.IG(5, 5tau^2)",
    "10.HT(10, tau)",
    "11.IG(2, 2(c tau)^2)",
    "12.HT(4, c tau)",
    "13.IG(2, 2(tau/c)^2)",
    "14.HT(4, tau/c)",
];

/// Label of catalog entry `index` (1-based).
pub fn catalog_label(index: usize) -> Option<&'static str> {
    index.checked_sub(1).and_then(|i| CATALOG_LABELS.get(i).copied())
}

/// The fourteen priors evaluated per model and true value, in catalog order.
///
/// Entries with a data-dependent scale use `tau_true`; entries 11–14 use
/// `c·tau_true` and `tau_true/c`.
pub fn catalog<T: Real>(tau_true: T, c: T) -> Result<Vec<PriorSpec<T>>> {
    if !(tau_true > T::zero() && tau_true.is_finite()) {
        return domain(format!("catalog needs tau > 0, got {tau_true}"));
    }
    if !(c > T::one() && c.is_finite()) {
        return domain(format!("catalog needs c > 1, got {c}"));
    }
    use PriorFamily::{HtOnSd as Ht, IgOnVariance as Ig};
    let t = tau_true;
    let l = T::lit;
    let entries = [
        (Ig, l(2.0), l(1.0)),
        (Ig, l(0.002), l(1.0)),
        (Ht, l(1.0), l(1.2) * t),
        (Ht, l(4.0), l(1.0)),
        (Ig, l(1.0), t),
        (Ht, l(1.0), t),
        (Ig, l(4.0), t),
        (Ht, l(4.0), t),
        (Ig, l(10.0), t),
        (Ht, l(10.0), t),
        (Ig, l(4.0), c * t),
        (Ht, l(4.0), c * t),
        (Ig, l(4.0), t / c),
        (Ht, l(4.0), t / c),
    ];
    entries
        .iter()
        .zip(CATALOG_LABELS)
        .map(|(&(family, nu, s), label)| PriorSpec::new(family, nu, s, label))
        .collect()
}

/// Catalog entry `index` (1-based).
pub fn catalog_entry<T: Real>(index: usize, tau_true: T, c: T) -> Result<PriorSpec<T>> {
    if !(1..=CATALOG_LEN).contains(&index) {
        return domain(format!("catalog index must be in 1..=14, got {index}"));
    }
    Ok(catalog(tau_true, c)?.swap_remove(index - 1))
}

/// Log density of `τ` under `spec`. IG priors on `τ²` include the `ln 2τ`
/// change-of-variables term.
pub fn log_prior_tau<T: Real>(spec: &PriorSpec<T>, tau: T) -> Result<T> {
    if !(tau > T::zero()) {
        return domain(format!("tau must be positive, got {tau}"));
    }
    Ok(spec.density().log_pdf(tau))
}

pub fn dlog_prior_dtau<T: Real>(spec: &PriorSpec<T>, tau: T) -> Result<T> {
    if !(tau > T::zero()) {
        return domain(format!("tau must be positive, got {tau}"));
    }
    Ok(spec.density().dlog_pdf(tau))
}

/// [`PriorSpec`] with its normalizing constant cached.
#[derive(Debug, Clone, Copy)]
pub struct TauPrior<T> {
    family: PriorFamily,
    nu: T,
    s: T,
    a: T,
    b: T,
    log_norm: T,
}

impl<T: Real> TauPrior<T> {
    #[inline]
    pub fn log_pdf(&self, tau: T) -> T {
        match self.family {
            PriorFamily::HtOnSd => self.log_norm + halft_log_kernel(tau, self.nu, self.s),
            PriorFamily::IgOnVariance => {
                // a ln b − lnΓ(a) − (a+1) ln τ² − b/τ² + ln 2 + ln τ
                let v = tau * tau;
                self.log_norm - (T::lit(2.0) * self.a + T::one()) * tau.ln() - self.b / v
            }
        }
    }

    #[inline]
    pub fn dlog_pdf(&self, tau: T) -> T {
        match self.family {
            PriorFamily::HtOnSd => halft_dlogpdf_dt_unchecked(tau, self.nu, self.s),
            PriorFamily::IgOnVariance => {
                let v = tau * tau;
                T::lit(2.0) * tau * invgamma_dlogpdf_dv_unchecked(v, self.a, self.b) + tau.recip()
            }
        }
    }

    /// `τ · d/dτ log p(τ)`, the prior's contribution to the gradient in `ln τ`.
    #[inline]
    pub fn dlog_pdf_dlog(&self, tau: T) -> T {
        match self.family {
            PriorFamily::HtOnSd => {
                let t2 = tau * tau;
                -(self.nu + T::one()) * t2 / (self.nu * self.s * self.s + t2)
            }
            PriorFamily::IgOnVariance => {
                // 2τ²·(−(a+1)/τ² + b/τ⁴) + 1
                -(T::lit(2.0) * self.a + T::one()) + T::lit(2.0) * self.b / (tau * tau)
            }
        }
    }
}
