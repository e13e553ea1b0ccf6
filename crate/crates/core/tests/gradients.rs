mod common;

use common::{fd_gradient, rel_err};
use priorsens::models::{
    simulate_model1, simulate_model2, simulate_model3, BoundTarget, Dataset, LogDensity,
    DEFAULT_AGES, DEFAULT_SCHOOL_SIGMAS,
};
use priorsens::priors::{catalog, log_prior_tau};
use priorsens::sampler::grad_check;
use priorsens::stats::{invgamma_logpdf, normal_logpdf, SimRng};

fn datasets(rng: &mut SimRng, m3_n: usize) -> Vec<(Dataset<f64>, Vec<f64>)> {
    let m1 = simulate_model1(0.4, &DEFAULT_SCHOOL_SIGMAS, rng).unwrap();
    let m2 = simulate_model2(0.5, 0.0, 0.2, 1.0, 10, &DEFAULT_AGES, rng).unwrap();
    let m3 = simulate_model3(0.16, 0.7, 0.0, 0.2, 1.0, m3_n, 7, rng).unwrap();
    vec![
        (Dataset::M1(m1), vec![0.4]),
        (Dataset::M2(m2), vec![0.5]),
        (Dataset::M3(m3), vec![0.16, 0.7]),
    ]
}

fn random_point(rng: &mut SimRng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.uniform_range(-2.0, 2.0)).collect()
}

fn check_gradient(target: &BoundTarget<f64>, q: &[f64], tol: f64) {
    let (lp, grad) = target.eval(q);
    assert!(lp.is_finite());
    let fd = fd_gradient(&|x| target.logp(x), q, 1e-5);
    for k in 0..q.len() {
        let e = rel_err(grad[k], fd[k], 1.0);
        assert!(
            e < tol,
            "{}: coordinate {} analytic {} vs fd {}",
            target.priors()[0].label,
            target.names()[k],
            grad[k],
            fd[k]
        );
    }
}

#[test]
fn gradients_match_finite_differences_for_every_model_and_prior() {
    let mut rng = SimRng::new(2024);
    for (data, taus) in datasets(&mut rng, 40) {
        let tau_ref = taus[0];
        let priors = catalog(tau_ref, 1.5).unwrap();
        for (idx, prior) in priors.into_iter().enumerate() {
            let mut bound = vec![prior];
            if taus.len() == 2 {
                bound.push(catalog(taus[1], 1.5).unwrap().swap_remove(idx));
            }
            let target = BoundTarget::new(data.clone(), bound).unwrap();
            for _ in 0..20 {
                let q = random_point(&mut rng, target.dim());
                check_gradient(&target, &q, 1e-5);
                assert!(grad_check(&target, &q, 1e-5).unwrap() < 1e-5);
            }
        }
    }
}

#[test]
fn full_size_model3_gradient() {
    let mut rng = SimRng::new(7);
    let data = simulate_model3(0.04, 0.7, 0.0, 0.2, 1.0, 700, 7, &mut rng).unwrap();
    for idx in [0, 5, 12] {
        let pb = catalog(0.04, 1.5).unwrap().swap_remove(idx);
        let pr = catalog(0.7, 1.5).unwrap().swap_remove(idx);
        let target = BoundTarget::new(Dataset::M3(data.clone()), vec![pb, pr]).unwrap();
        assert_eq!(target.dim(), 712);
        let q = random_point(&mut rng, target.dim());
        check_gradient(&target, &q, 1e-5);
    }
}

#[test]
fn model1_density_is_the_sum_of_its_terms() {
    let mut rng = SimRng::new(3);
    let d = simulate_model1(2.0, &DEFAULT_SCHOOL_SIGMAS, &mut rng).unwrap();
    for prior in catalog(2.0, 1.5).unwrap() {
        let target = BoundTarget::new(Dataset::M1(d.clone()), vec![prior.clone()]).unwrap();
        let q = random_point(&mut rng, 9);
        let tau = q[8].exp();
        let mut want = log_prior_tau(&prior, tau).unwrap() + q[8];
        for j in 0..8 {
            want += normal_logpdf(d.ybar[j], q[j], d.sigma[j]).unwrap();
            want += normal_logpdf(q[j], 0.0, tau).unwrap();
        }
        assert!(rel_err(target.logp(&q), want, 1.0) < 1e-12);
    }
}

#[test]
fn model2_density_is_the_sum_of_its_terms() {
    let mut rng = SimRng::new(4);
    let d = simulate_model2(1.0, 0.0, 0.2, 1.0, 10, &DEFAULT_AGES, &mut rng).unwrap();
    let prior = catalog(1.0, 1.5).unwrap().swap_remove(7);
    let target = BoundTarget::new(Dataset::M2(d.clone()), vec![prior.clone()]).unwrap();
    let q = random_point(&mut rng, 14);
    let (b0, b1, tau, v) = (q[0], q[1], q[12].exp(), q[13].exp());
    let sigma = v.sqrt();
    let mut want = normal_logpdf(b0, 0.0, 10.0 * sigma).unwrap()
        + normal_logpdf(b1, 0.0, 10.0 * sigma).unwrap()
        + invgamma_logpdf(v, 0.05, 0.01).unwrap()
        + q[13]
        + log_prior_tau(&prior, tau).unwrap()
        + q[12];
    for i in 0..10 {
        let alpha = q[2 + i];
        want += normal_logpdf(alpha, 0.0, tau).unwrap();
        for j in 0..4 {
            want += normal_logpdf(d.y[i * 4 + j], b0 + b1 * d.x[j] + alpha, sigma).unwrap();
        }
    }
    assert!(rel_err(target.logp(&q), want, 1.0) < 1e-12);
}

#[test]
fn model3_density_is_the_sum_of_its_terms() {
    let mut rng = SimRng::new(5);
    let d = simulate_model3(0.16, 0.7, 0.0, 0.2, 1.0, 12, 3, &mut rng).unwrap();
    let pb = catalog(0.16, 1.5).unwrap().swap_remove(3);
    let pr = catalog(0.7, 1.5).unwrap().swap_remove(3);
    let target = BoundTarget::new(Dataset::M3(d.clone()), vec![pb.clone(), pr.clone()]).unwrap();
    let q = random_point(&mut rng, target.dim());
    let (b0, b1) = (q[0], q[1]);
    let b = &q[2..5];
    let r = &q[5..17];
    let (tb, tr, v) = (q[17].exp(), q[18].exp(), q[19].exp());
    let sigma = v.sqrt();
    let mut want = normal_logpdf(b0, 0.0, 10.0 * sigma).unwrap()
        + normal_logpdf(b1, 0.0, 10.0 * sigma).unwrap()
        + invgamma_logpdf(v, 0.05, 0.01).unwrap()
        + q[19]
        + log_prior_tau(&pb, tb).unwrap()
        + q[17]
        + log_prior_tau(&pr, tr).unwrap()
        + q[18];
    want += b.iter().map(|&x| normal_logpdf(x, 0.0, tb).unwrap()).sum::<f64>();
    want += r.iter().map(|&x| normal_logpdf(x, 0.0, tr).unwrap()).sum::<f64>();
    for i in 0..12 {
        for j in 0..3 {
            let mean = b0 + (b1 + b[j]) * d.x[i] + r[i];
            want += normal_logpdf(d.y[i * 3 + j], mean, sigma).unwrap();
        }
    }
    assert!(rel_err(target.logp(&q), want, 1.0) < 1e-12);
}

#[test]
fn model1_tau_conditional_is_conjugate_under_ig() {
    // With θ fixed, the τ² full conditional is IG(a + J/2, b + θᵀθ/2).
    let mut rng = SimRng::new(6);
    let d = simulate_model1(0.4, &DEFAULT_SCHOOL_SIGMAS, &mut rng).unwrap();
    for prior in catalog(0.4, 1.5).unwrap().into_iter().filter(|p| p.is_ig()) {
        let target = BoundTarget::new(Dataset::M1(d.clone()), vec![prior.clone()]).unwrap();
        let theta = random_point(&mut rng, 8);
        let ss: f64 = theta.iter().map(|t| t * t).sum();
        let (a, b) = (prior.a() + 4.0, prior.b() + ss / 2.0);
        let offsets: Vec<f64> = [-2.0, -0.5, 0.0, 0.7, 1.9]
            .iter()
            .map(|&xi: &f64| {
                let mut q = theta.clone();
                q.push(xi);
                let v = (2.0 * xi).exp();
                target.logp(&q) - invgamma_logpdf(v, a, b).unwrap() - (2.0 * v).ln()
            })
            .collect();
        for o in &offsets {
            assert!((o - offsets[0]).abs() < 1e-9, "{}: {offsets:?}", prior.label);
        }
    }
}

#[test]
fn transforms_round_trip() {
    let mut rng = SimRng::new(8);
    for (data, taus) in datasets(&mut rng, 20) {
        let prior = catalog(taus[0], 1.5).unwrap().swap_remove(0);
        let target = BoundTarget::new(data, vec![prior]).unwrap();
        for _ in 0..10 {
            let q = random_point(&mut rng, target.dim());
            let back = target.unconstrain(&target.constrain(&q)).unwrap();
            for (a, b) in q.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        for &k in &target.tau_indices() {
            assert!(target.names()[k].starts_with("tau"));
        }
    }
}

#[test]
fn initial_box_always_gives_finite_density() {
    let mut rng = SimRng::new(9);
    for (data, taus) in datasets(&mut rng, 30) {
        for prior in catalog(taus[0], 1.5).unwrap() {
            let target = BoundTarget::new(data.clone(), vec![prior]).unwrap();
            for corner in [-2.0, 2.0] {
                let (lp, g) = target.eval(&vec![corner; target.dim()]);
                assert!(lp.is_finite() && g.iter().all(|v| v.is_finite()));
            }
            for _ in 0..50 {
                let q = random_point(&mut rng, target.dim());
                let (lp, g) = target.eval(&q);
                assert!(lp.is_finite() && g.iter().all(|v| v.is_finite()));
            }
        }
    }
}

#[test]
fn wrong_prior_count_is_rejected() {
    let mut rng = SimRng::new(10);
    let sets = datasets(&mut rng, 10);
    let p = catalog(1.0, 1.5).unwrap();
    assert!(BoundTarget::new(sets[0].0.clone(), p[..2].to_vec()).is_err());
    assert!(BoundTarget::new(sets[2].0.clone(), p[..3].to_vec()).is_err());
    assert!(BoundTarget::new(sets[2].0.clone(), p[..1].to_vec()).is_ok());
}
