use crate::Real;

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma<T: Real>(x: T) -> T {
    if x == T::one() || x == T::lit(2.0) {
        return T::zero();
    }
    let half = T::lit(0.5);
    if x < half {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = T::PI();
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::count(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::lit(2.0) * T::PI()).ln() + (x + half) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_arguments_match_factorials() {
        let mut fact = 1.0f64;
        for n in 1..=20u32 {
            let got = ln_gamma(n as f64);
            let want = fact.ln();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "n={n}");
            fact *= n as f64;
        }
    }

    #[test]
    fn half_integers() {
        // Γ(1/2) = √π, Γ(3/2) = √π/2, Γ(5) = 24
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((ln_gamma(0.5f64) - sqrt_pi.ln()).abs() < 1e-13);
        assert!((ln_gamma(1.5f64) - (sqrt_pi / 2.0).ln()).abs() < 1e-13);
        assert!((ln_gamma(5.5f64) - (52.342_777_784_553_52f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn small_arguments_used_by_the_catalog() {
        // lnΓ(0.001) = -ln(0.001) - γ·0.001 + O(x²), γ the Euler–Mascheroni constant
        let x = 0.001f64;
        let euler = 0.577_215_664_901_532_9;
        let approx = -x.ln() - euler * x + 0.822_467_033_424_113_2 * x * x;
        assert!((ln_gamma(x) - approx).abs() < 1e-9);
    }

    #[test]
    fn recurrence_holds() {
        for &x in &[0.002, 0.3, 1.7, 4.2, 9.9, 37.0] {
            let lhs = ln_gamma(x + 1.0f64);
            let rhs = ln_gamma(x) + f64::ln(x);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "x={x}");
        }
    }
}
