use super::{Model1Data, Model2Data, Model3Data};
use crate::error::{domain, Result};
use crate::stats::SimRng;
use crate::Real;

/// Standard errors of the eight schools coaching study.
pub const DEFAULT_SCHOOL_SIGMAS: [f64; 8] = [15.0, 10.0, 16.0, 11.0, 9.0, 11.0, 10.0, 18.0];

/// Four centered, unit-spaced ages.
pub const DEFAULT_AGES: [f64; 4] = [-1.5, -0.5, 0.5, 1.5];

fn check_scale<T: Real>(name: &str, v: T) -> Result<()> {
    if v >= T::zero() && v.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be finite and nonnegative, got {v}"))
    }
}

#[inline]
fn draw<T: Real>(rng: &mut SimRng, mu: T, sd: T) -> T {
    mu + sd * T::lit(rng.std_normal())
}

/// `θ_j ~ N(0, τ²)`, `ȳ_j ~ N(θ_j, σ_j²)`.
pub fn simulate_model1<T: Real>(tau: T, sigma: &[T], rng: &mut SimRng) -> Result<Model1Data<T>> {
    check_scale("tau", tau)?;
    if sigma.is_empty() {
        return domain("sigma vector is empty");
    }
    if let Some(s) = sigma.iter().find(|s| !(**s > T::zero() && s.is_finite())) {
        return domain(format!("school sigmas must be positive, got {s}"));
    }
    let theta: Vec<T> = sigma.iter().map(|_| draw(rng, T::zero(), tau)).collect();
    let ybar = theta
        .iter()
        .zip(sigma)
        .map(|(&th, &s)| draw(rng, th, s))
        .collect();
    Ok(Model1Data {
        ybar,
        sigma: sigma.to_vec(),
        theta_true: theta,
    })
}

/// `y_ij = β₀ + β₁ x_j + α_i + ε_ij` with `α_i ~ N(0, τ²)`, `ε_ij ~ N(0, σ²)`.
pub fn simulate_model2<T: Real>(
    tau: T,
    beta0: T,
    beta1: T,
    sigma: T,
    n: usize,
    ages: &[T],
    rng: &mut SimRng,
) -> Result<Model2Data<T>> {
    check_scale("tau", tau)?;
    check_scale("sigma", sigma)?;
    if n < 2 {
        return domain(format!("need at least 2 subjects, got {n}"));
    }
    if ages.len() < 2 {
        return domain("need at least 2 ages");
    }
    let mean = ages.iter().copied().sum::<T>() / T::count(ages.len());
    if mean.abs() > T::lit(1e-12) {
        return domain(format!("ages must be centered, mean is {mean}"));
    }
    let j = ages.len();
    let mut y = Vec::with_capacity(n * j);
    for _ in 0..n {
        let alpha = draw(rng, T::zero(), tau);
        for &x in ages {
            y.push(draw(rng, beta0 + beta1 * x + alpha, sigma));
        }
    }
    Ok(Model2Data {
        y,
        x: ages.to_vec(),
        n,
        j,
    })
}

/// Centers and scales `x` in place to mean 0 and sample SD 1 (`n − 1` divisor).
pub fn standardize<T: Real>(x: &mut [T]) -> Result<()> {
    let n = x.len();
    if n < 2 {
        return domain("cannot standardize fewer than 2 values");
    }
    let mean = x.iter().copied().sum::<T>() / T::count(n);
    let ss: T = x.iter().map(|&v| (v - mean) * (v - mean)).sum();
    let sd = (ss / T::count(n - 1)).sqrt();
    if !(sd > T::zero()) {
        return domain("cannot standardize a constant vector");
    }
    for v in x.iter_mut() {
        *v = (*v - mean) / sd;
    }
    // one correction pass removes the residual mean from rounding
    let resid = x.iter().copied().sum::<T>() / T::count(n);
    for v in x.iter_mut() {
        *v = *v - resid;
    }
    Ok(())
}

/// `y_ij = β₀ + (β₁ + b_j) x_i + r_i + ε_ij` with `b_j ~ N(0, τ_b²)`,
/// `r_i ~ N(0, τ_r²)`; `x` is drawn from N(0, 1) and standardized.
#[allow(clippy::too_many_arguments)]
pub fn simulate_model3<T: Real>(
    tau_b: T,
    tau_r: T,
    beta0: T,
    beta1: T,
    sigma: T,
    n: usize,
    j: usize,
    rng: &mut SimRng,
) -> Result<Model3Data<T>> {
    check_scale("tau_b", tau_b)?;
    check_scale("tau_r", tau_r)?;
    check_scale("sigma", sigma)?;
    if n < 2 || j < 2 {
        return domain(format!("need n >= 2 and J >= 2, got n={n}, J={j}"));
    }
    let mut x: Vec<T> = (0..n).map(|_| T::lit(rng.std_normal())).collect();
    standardize(&mut x)?;
    let b: Vec<T> = (0..j).map(|_| draw(rng, T::zero(), tau_b)).collect();
    let mut y = Vec::with_capacity(n * j);
    for &xi in &x {
        let r = draw(rng, T::zero(), tau_r);
        for &bj in &b {
            y.push(draw(rng, beta0 + (beta1 + bj) * xi + r, sigma));
        }
    }
    Ok(Model3Data { y, x, n, j })
}
