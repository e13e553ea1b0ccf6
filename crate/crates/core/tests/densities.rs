mod common;

use common::{central_diff, integrate, integrate_half_line, rel_err};
use priorsens::priors::{catalog, dlog_prior_dtau, log_prior_tau, make_ig};
use priorsens::stats::{
    halft_dlogpdf_dt, halft_logpdf, invgamma_dlogpdf_dv, invgamma_logpdf, normal_dlogpdf_dx,
    normal_logpdf, SimRng,
};

#[test]
fn half_t_normalizes() {
    for &(nu, s) in &[(1.0, 1.0), (4.0, 1.0), (10.0, 0.4)] {
        let f = |t: f64| halft_logpdf(t, nu, s).unwrap().exp();
        let mass = integrate_half_line(&f, 1e-12);
        assert!((mass - 1.0).abs() < 1e-6, "HT({nu}, {s}) mass {mass}");
    }
}

#[test]
fn tau_priors_normalize() {
    let f = |t: f64| log_prior_tau(&make_ig(2.0, 0.32).unwrap(), t).unwrap().exp();
    assert!((integrate_half_line(&f, 1e-12) - 1.0).abs() < 1e-6);

    for tau_true in [0.04, 0.4, 1.0, 10.0] {
        for spec in catalog(tau_true, 1.5).unwrap() {
            if spec.nu < 1.0 {
                continue;
            }
            let d = spec.density();
            let f = |t: f64| if t > 0.0 { d.log_pdf(t).exp() } else { 0.0 };
            let mass = integrate_half_line(&f, 1e-12);
            assert!((mass - 1.0).abs() < 1e-6, "{} at tau {tau_true}: {mass}", spec.label);
        }
    }
}

#[test]
fn vague_ig_prior_mass_on_truncated_domain() {
    // IG(0.001, 0.001) has an extremely heavy right tail in τ: the mass above
    // T is P(τ² > T²) = P(G < b/T²) for G ~ Gamma(a, 1), ≈ (b/T²)^a / Γ(a+1).
    // At T = 1e6 that is ≈ 0.966, so the truncated integral carries only ≈ 0.034.
    let spec = catalog(1.0, 1.5).unwrap().swap_remove(1);
    let d = spec.density();
    // integrate in u = ln τ to resolve the spike near the cutoff
    let g = |u: f64| {
        let t = u.exp();
        (d.log_pdf(t) + u).exp()
    };
    let upper = 1e6f64;
    let mass = integrate(&g, (1e-6f64).ln(), upper.ln(), 1e-12);
    let (a, b) = (0.001f64, 0.001f64);
    let tail = (b / (upper * upper)).powf(a) / priorsens::stats::ln_gamma(a + 1.0).exp();
    assert!((mass + tail - 1.0).abs() < 1e-3, "mass {mass}, tail bound {tail}");
    assert!(mass < 1.0);
}

#[test]
fn analytic_derivatives_match_central_differences() {
    let mut rng = SimRng::new(11);
    let check = |name: &str, f: &dyn Fn(f64) -> f64, df: f64, x: f64| {
        let h = 1e-5 * x.abs().max(1.0);
        let fd = central_diff(f, x, h);
        let err = rel_err(df, fd, 1e-2);
        assert!(err < 1e-6, "{name} at {x}: analytic {df}, fd {fd}, err {err}");
    };
    for _ in 0..100 {
        let x = rng.uniform_range(-5.0, 5.0);
        let mu = rng.uniform_range(-3.0, 3.0);
        let sigma = rng.uniform_range(0.2, 4.0);
        check(
            "normal",
            &|x| normal_logpdf(x, mu, sigma).unwrap(),
            normal_dlogpdf_dx(x, mu, sigma).unwrap(),
            x,
        );

        let a = rng.uniform_range(0.001, 5.0);
        let b = rng.uniform_range(0.01, 5.0);
        let v = rng.uniform_range(0.05, 5.0);
        check(
            "invgamma",
            &|v| invgamma_logpdf(v, a, b).unwrap(),
            invgamma_dlogpdf_dv(v, a, b).unwrap(),
            v,
        );

        let nu = rng.uniform_range(1.0, 10.0);
        let s = rng.uniform_range(0.1, 3.0);
        let t = rng.uniform_range(0.01, 6.0);
        check(
            "half-t",
            &|t| halft_logpdf(t, nu, s).unwrap(),
            halft_dlogpdf_dt(t, nu, s).unwrap(),
            t,
        );
    }
}

#[test]
fn prior_derivatives_match_central_differences() {
    let mut rng = SimRng::new(12);
    for spec in catalog(1.0, 1.5).unwrap() {
        for _ in 0..100 {
            let tau = rng.uniform_range(0.05, 5.0);
            let h = 1e-5 * tau.max(1.0);
            let fd = central_diff(&|t| log_prior_tau(&spec, t).unwrap(), tau, h);
            let an = dlog_prior_dtau(&spec, tau).unwrap();
            let err = rel_err(an, fd, 1e-2);
            assert!(err < 1e-6, "{} at {tau}: {an} vs {fd}", spec.label);
        }
    }
}

#[test]
fn densities_decrease_away_from_mode() {
    // normal: mode μ; IG: b/(a+1); half-t: 0
    let xs: Vec<f64> = (0..50).map(|k| 0.1 * k as f64).collect();
    for w in xs.windows(2) {
        assert!(normal_logpdf(1.0 + w[1], 1.0, 2.0).unwrap() < normal_logpdf(1.0 + w[0], 1.0, 2.0).unwrap());
        assert!(halft_logpdf(w[1], 4.0, 1.0).unwrap() < halft_logpdf(w[0], 4.0, 1.0).unwrap());
        let mode = 2.0 / 3.0;
        assert!(invgamma_logpdf(mode + w[1], 2.0, 2.0).unwrap() < invgamma_logpdf(mode + w[0], 2.0, 2.0).unwrap());
    }
}
