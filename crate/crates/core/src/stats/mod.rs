//! Densities, their first derivatives, and random draws.

mod rng;
mod special;

pub use rng::{splitmix64, SimRng};
pub use special::ln_gamma;

use crate::error::{domain, Result};
use crate::Real;

fn ln_sqrt_2pi<T: Real>() -> T {
    T::lit(0.918_938_533_204_672_7)
}

/// Log density of `N(mu, sigma²)` at `x`.
pub fn normal_logpdf<T: Real>(x: T, mu: T, sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return domain(format!("normal sigma must be positive, got {sigma}"));
    }
    Ok(normal_logpdf_unchecked(x, mu, sigma))
}

#[inline]
pub(crate) fn normal_logpdf_unchecked<T: Real>(x: T, mu: T, sigma: T) -> T {
    let z = (x - mu) / sigma;
    -ln_sqrt_2pi::<T>() - sigma.ln() - T::lit(0.5) * z * z
}

/// Log density of the inverse gamma `IG(a, b)` (shape `a`, scale `b`) at `v`.
pub fn invgamma_logpdf<T: Real>(v: T, a: T, b: T) -> Result<T> {
    if !(v > T::zero() && a > T::zero() && b > T::zero()) {
        return domain(format!("inverse gamma needs v, a, b > 0, got ({v}, {a}, {b})"));
    }
    Ok(invgamma_logpdf_unchecked(v, a, b))
}

#[inline]
pub(crate) fn invgamma_logpdf_unchecked<T: Real>(v: T, a: T, b: T) -> T {
    a * b.ln() - ln_gamma(a) - (a + T::one()) * v.ln() - b / v
}

/// Log density of the half-t with `nu` degrees of freedom and scale `s`, folded at zero.
pub fn halft_logpdf<T: Real>(t: T, nu: T, s: T) -> Result<T> {
    if !(t >= T::zero() && nu > T::zero() && s > T::zero()) {
        return domain(format!("half-t needs t >= 0, nu > 0, s > 0, got ({t}, {nu}, {s})"));
    }
    Ok(halft_log_norm(nu, s) + halft_log_kernel(t, nu, s))
}

/// Normalizing constant of the half-t density on the log scale.
pub(crate) fn halft_log_norm<T: Real>(nu: T, s: T) -> T {
    let half = T::lit(0.5);
    T::LN_2() + ln_gamma((nu + T::one()) * half) - ln_gamma(nu * half) - half * (nu * T::PI()).ln()
        - s.ln()
}

#[inline]
pub(crate) fn halft_log_kernel<T: Real>(t: T, nu: T, s: T) -> T {
    let z = t / s;
    -(nu + T::one()) * T::lit(0.5) * (z * z / nu).ln_1p()
}

pub fn normal_dlogpdf_dx<T: Real>(x: T, mu: T, sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return domain(format!("normal sigma must be positive, got {sigma}"));
    }
    Ok(-(x - mu) / (sigma * sigma))
}

pub fn invgamma_dlogpdf_dv<T: Real>(v: T, a: T, b: T) -> Result<T> {
    if !(v > T::zero() && a > T::zero() && b > T::zero()) {
        return domain(format!("inverse gamma needs v, a, b > 0, got ({v}, {a}, {b})"));
    }
    Ok(invgamma_dlogpdf_dv_unchecked(v, a, b))
}

#[inline]
pub(crate) fn invgamma_dlogpdf_dv_unchecked<T: Real>(v: T, a: T, b: T) -> T {
    -(a + T::one()) / v + b / (v * v)
}

pub fn halft_dlogpdf_dt<T: Real>(t: T, nu: T, s: T) -> Result<T> {
    if !(t >= T::zero() && nu > T::zero() && s > T::zero()) {
        return domain(format!("half-t needs t >= 0, nu > 0, s > 0, got ({t}, {nu}, {s})"));
    }
    Ok(halft_dlogpdf_dt_unchecked(t, nu, s))
}

#[inline]
pub(crate) fn halft_dlogpdf_dt_unchecked<T: Real>(t: T, nu: T, s: T) -> T {
    -(nu + T::one()) * t / (nu * s * s + t * t)
}

pub fn normal_sample<T: Real>(rng: &mut SimRng, mu: T, sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return domain(format!("normal sigma must be positive, got {sigma}"));
    }
    Ok(mu + sigma * T::lit(rng.std_normal()))
}

/// Draws `b / G` with `G ~ Gamma(a, 1)`.
pub fn invgamma_sample<T: Real>(rng: &mut SimRng, a: T, b: T) -> Result<T> {
    if !(a > T::zero() && b > T::zero()) {
        return domain(format!("inverse gamma needs a, b > 0, got ({a}, {b})"));
    }
    Ok(b / T::lit(rng.std_gamma(a.as_f64())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn normal_logpdf_examples() {
        assert!(close(normal_logpdf(0.0, 0.0, 1.0).unwrap(), -0.918_938_5, 1e-7));
        for &(mu, sigma) in &[(3.0, 0.5), (-2.0, 7.0)] {
            let got = normal_logpdf(mu, mu, sigma).unwrap();
            assert!(close(got, -LN_SQRT_2PI - f64::ln(sigma), 1e-14));
        }
        let got = normal_logpdf(2.0, 0.0, 2.0).unwrap();
        assert!(close(got, -LN_SQRT_2PI - 2f64.ln() - 0.5, 1e-14));
        assert!(normal_logpdf(0.0, 0.0, 0.0).is_err());
        assert!(normal_logpdf(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn invgamma_logpdf_examples() {
        assert_eq!(invgamma_logpdf(1.0, 1.0, 1.0).unwrap(), -1.0);
        let want = 2.0 * 2f64.ln() - 3.0 * 0.5f64.ln() - 4.0;
        assert!(close(invgamma_logpdf(0.5, 2.0, 2.0).unwrap(), want, 1e-13));
        assert!(invgamma_logpdf(1e300, 1.0, 1.0).unwrap() < -1000.0);
        assert!(invgamma_logpdf(0.0, 1.0, 1.0).is_err());
        assert!(invgamma_logpdf(1.0, 0.0, 1.0).is_err());
        assert!(invgamma_logpdf(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn halft_logpdf_examples() {
        let pi = std::f64::consts::PI;
        assert!(close(halft_logpdf(0.0, 1.0, 1.0).unwrap(), (2.0 / pi).ln(), 1e-13));
        assert!(close(halft_logpdf(0.0, 1.0, 1.0).unwrap(), -0.451_582_7, 1e-7));
        for &s in &[0.4, 1.0, 3.0] {
            let got = halft_logpdf(s, 1.0, s).unwrap();
            assert!(close(got, (1.0 / (pi * s)).ln(), 1e-13));
        }
        assert!(halft_logpdf(-0.1, 1.0, 1.0).is_err());
        assert!(halft_logpdf(0.1, 0.0, 1.0).is_err());
        assert!(halft_logpdf(0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(normal_dlogpdf_dx(1.5, 1.5, 2.0).unwrap(), 0.0);
        for &(a, b) in &[(1.0f64, 1.0f64), (2.0, 0.32), (0.001, 0.001), (5.0, 20.0)] {
            let mode = b / (a + 1.0);
            assert!(invgamma_dlogpdf_dv(mode, a, b).unwrap().abs() < 1e-9 / mode);
        }
        assert_eq!(halft_dlogpdf_dt(0.0, 4.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let got: f32 = invgamma_logpdf(1.0f32, 1.0, 1.0).unwrap();
        assert!((got + 1.0).abs() < 1e-6);
        let got: f32 = halft_logpdf(0.0f32, 1.0, 1.0).unwrap();
        assert!((got + 0.451_582_7).abs() < 1e-5);
    }

    #[test]
    fn sampler_moments() {
        let mut rng = SimRng::new(20_240_101);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| normal_sample(&mut rng, 0.0, 1.0).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((sd - 1.0).abs() < 0.02, "sd {sd}");

        let vs: Vec<f64> = (0..n).map(|_| invgamma_sample(&mut rng, 5.0, 5.0).unwrap()).collect();
        let mean = vs.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.25).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn tiny_shape_invgamma_is_positive() {
        let mut rng = SimRng::new(5);
        for _ in 0..1000 {
            let v: f64 = invgamma_sample(&mut rng, 0.6, 0.001).unwrap();
            assert!(v > 0.0);
        }
        assert!(invgamma_sample(&mut rng, 0.0, 1.0f64).is_err());
        assert!(normal_sample(&mut rng, 0.0, -1.0f64).is_err());
    }

    #[test]
    fn fixed_seed_replays() {
        let mut a = SimRng::new(99);
        let mut b = SimRng::new(99);
        for _ in 0..200 {
            assert_eq!(a.std_normal().to_bits(), b.std_normal().to_bits());
            assert_eq!(a.std_gamma(0.3).to_bits(), b.std_gamma(0.3).to_bits());
        }
        let c1 = SimRng::new(99).child(3);
        let c2 = SimRng::new(99).child(3);
        assert_eq!(c1.seed(), c2.seed());
        assert_ne!(SimRng::new(99).child(4).seed(), c1.seed());
    }
}
