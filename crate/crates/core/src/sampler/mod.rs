//! No-U-Turn Hamiltonian Monte Carlo with windowed adaptation.

mod adapt;
mod nuts;

pub use adapt::{
    adapt_mass, dual_average_step, DualAveraging, WarmupSchedule, BASE_WINDOW, MASS_SHRINK_N,
    MASS_SHRINK_TARGET,
};
pub use nuts::{leapfrog, nuts_transition, PhasePoint, Transition, MAX_DELTA_H};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::models::LogDensity;
use crate::error::{Error, Result};
use crate::stats::{splitmix64, SimRng};
use crate::Real;

/// Half-width of the uniform box used for initial values.
pub const INIT_RADIUS: f64 = 2.0;
const INIT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub target_accept: f64,
    pub max_treedepth: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 250,
            draws: 2500,
            target_accept: 0.99,
            max_treedepth: 10,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 1 || self.warmup < 1 || self.draws < 1 {
            return Err(Error::Config(
                "chains, warmup and draws must all be at least 1".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if self.max_treedepth < 1 {
            return Err(Error::Config("max_treedepth must be at least 1".into()));
        }
        Ok(())
    }

    /// Seed of chain `chain_index` under this configuration.
    pub fn chain_seed(&self, chain_index: usize) -> u64 {
        splitmix64(splitmix64(self.seed) ^ chain_index as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainQuality {
    Ok,
    /// Every post-warmup transition diverged.
    AllDivergent,
}

/// Post-warmup output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput<T> {
    pub chain: usize,
    pub seed: u64,
    /// Names of the retained constrained parameters.
    pub names: Vec<String>,
    /// Row-major `draws × names.len()` matrix of constrained values.
    pub draws: Vec<T>,
    pub divergent: Vec<bool>,
    pub treedepth: Vec<usize>,
    pub n_leapfrog: Vec<usize>,
    pub accept_stat: Vec<T>,
    pub energy: Vec<T>,
    pub stepsize: T,
    pub inv_mass: Vec<T>,
    pub quality: ChainQuality,
}

impl<T: Real> ChainOutput<T> {
    pub fn n_draws(&self) -> usize {
        self.divergent.len()
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn draw(&self, i: usize) -> &[T] {
        let k = self.n_params();
        &self.draws[i * k..(i + 1) * k]
    }

    /// All draws of parameter `k`.
    pub fn column(&self, k: usize) -> Vec<T> {
        let np = self.n_params();
        self.draws.iter().skip(k).step_by(np).copied().collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<T>> {
        self.names.iter().position(|n| n == name).map(|k| self.column(k))
    }

    pub fn n_divergent(&self) -> usize {
        self.divergent.iter().filter(|&&d| d).count()
    }

    /// Writes one row per draw: chain, iter, divergent, treedepth, energy, parameters.
    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if header {
            let mut row = vec!["chain", "iter", "divergent", "treedepth", "energy"];
            row.extend(self.names.iter().map(String::as_str));
            w.write_record(&row)?;
        }
        for i in 0..self.n_draws() {
            let mut row = vec![
                (self.chain + 1).to_string(),
                (i + 1).to_string(),
                u8::from(self.divergent[i]).to_string(),
                self.treedepth[i].to_string(),
                self.energy[i].to_string(),
            ];
            row.extend(self.draw(i).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws an initial point uniformly in `[-2, 2]^dim` with a finite log density.
fn initial_point<T: Real, D: LogDensity<T> + ?Sized>(
    target: &D,
    rng: &mut SimRng,
) -> Result<PhasePoint<T>> {
    for _ in 0..INIT_ATTEMPTS {
        let q = (0..target.dim())
            .map(|_| T::lit(rng.uniform_range(-INIT_RADIUS, INIT_RADIUS)))
            .collect();
        let point = PhasePoint::new(target, q);
        if point.logp.is_finite() && point.grad.iter().all(|g| g.is_finite()) {
            return Ok(point);
        }
    }
    Err(Error::Domain(format!(
        "no finite initial point after {INIT_ATTEMPTS} attempts"
    )))
}

/// Runs chain `chain_index` with the seed derived from `config.seed`.
pub fn run_chain<T: Real, D: LogDensity<T> + ?Sized>(
    target: &D,
    config: &SamplerConfig,
    chain_index: usize,
) -> Result<ChainOutput<T>> {
    run_chain_seeded(target, config, chain_index, config.chain_seed(chain_index), None)
}

/// Runs one chain from an explicit seed, keeping only the constrained
/// parameters listed in `retain` (all of them when `None`).
pub fn run_chain_seeded<T: Real, D: LogDensity<T> + ?Sized>(
    target: &D,
    config: &SamplerConfig,
    chain_index: usize,
    seed: u64,
    retain: Option<&[usize]>,
) -> Result<ChainOutput<T>> {
    config.validate()?;
    let dim = target.dim();
    let all_names = target.param_names();
    let keep: Vec<usize> = match retain {
        Some(idx) => {
            if let Some(&bad) = idx.iter().find(|&&k| k >= all_names.len()) {
                return Err(Error::Dimension(format!(
                    "retained index {bad} out of range for {} parameters",
                    all_names.len()
                )));
            }
            idx.to_vec()
        }
        None => (0..all_names.len()).collect(),
    };

    let mut rng = SimRng::new(seed);
    let target_accept = T::lit(config.target_accept);
    let mut point = initial_point(target, &mut rng)?;
    let mut inv_mass = vec![T::one(); dim];
    let mut eps = nuts::find_reasonable_stepsize(target, &point, &mut rng, T::one(), &inv_mass);
    let mut da = DualAveraging::new(eps);

    let schedule = WarmupSchedule::new(config.warmup);
    let mut window: Vec<Vec<T>> = Vec::new();
    for it in 0..config.warmup {
        let tr = nuts::transition_from(
            target,
            &point,
            &mut rng,
            eps,
            &inv_mass,
            config.max_treedepth,
        );
        point = tr.point;
        da.update(tr.accept_stat, target_accept);
        eps = da.stepsize();
        if schedule.in_window(it) {
            window.push(point.q.clone());
        }
        if schedule.window_end(it) {
            inv_mass = adapt_mass(&window)?;
            window.clear();
            eps = nuts::find_reasonable_stepsize(target, &point, &mut rng, eps, &inv_mass);
            da = DualAveraging::new(eps);
        }
    }
    let final_eps = da.final_stepsize();
    if final_eps.is_finite() && final_eps > T::zero() {
        eps = final_eps;
    }

    let n = config.draws;
    let mut out = ChainOutput {
        chain: chain_index,
        seed,
        names: keep.iter().map(|&k| all_names[k].clone()).collect(),
        draws: Vec::with_capacity(n * keep.len()),
        divergent: Vec::with_capacity(n),
        treedepth: Vec::with_capacity(n),
        n_leapfrog: Vec::with_capacity(n),
        accept_stat: Vec::with_capacity(n),
        energy: Vec::with_capacity(n),
        stepsize: eps,
        inv_mass: inv_mass.clone(),
        quality: ChainQuality::Ok,
    };
    let mut constrained = Vec::with_capacity(all_names.len());
    for _ in 0..n {
        let tr = nuts::transition_from(
            target,
            &point,
            &mut rng,
            eps,
            &inv_mass,
            config.max_treedepth,
        );
        point = tr.point;
        target.constrain_into(&point.q, &mut constrained);
        out.draws.extend(keep.iter().map(|&k| constrained[k]));
        out.divergent.push(tr.divergent);
        out.treedepth.push(tr.treedepth);
        out.n_leapfrog.push(tr.n_leapfrog);
        out.accept_stat.push(tr.accept_stat);
        out.energy.push(tr.energy);
    }
    if out.divergent.iter().all(|&d| d) {
        out.quality = ChainQuality::AllDivergent;
    }
    Ok(out)
}

/// Runs `config.chains` chains, possibly concurrently; output is in chain order.
pub fn run_chains<T: Real, D: LogDensity<T> + ?Sized>(
    target: &D,
    config: &SamplerConfig,
) -> Result<Vec<ChainOutput<T>>> {
    config.validate()?;
    (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(target, config, c))
        .collect()
}

/// Largest coordinate-wise discrepancy between the analytic gradient and a
/// central difference with step `h·max(1, |x_i|)`, relative to `max(1, |g_i|)`.
pub fn grad_check<T: Real, D: LogDensity<T> + ?Sized>(
    target: &D,
    point: &[T],
    h: T,
) -> Result<T> {
    if !(h > T::zero()) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    if point.len() != target.dim() {
        return Err(Error::Dimension(format!(
            "point has {} coordinates, target has {}",
            point.len(),
            target.dim()
        )));
    }
    let mut grad = vec![T::zero(); point.len()];
    target.logp_grad(point, &mut grad);
    let mut x = point.to_vec();
    let mut worst = T::zero();
    for i in 0..x.len() {
        let step = h * x[i].abs().max(T::one());
        let orig = x[i];
        x[i] = orig + step;
        let up = target.logp(&x);
        x[i] = orig - step;
        let down = target.logp(&x);
        x[i] = orig;
        let fd = (up - down) / (step + step);
        let err = (grad[i] - fd).abs() / grad[i].abs().max(T::one());
        if err.is_nan() {
            return Ok(T::infinity());
        }
        worst = worst.max(err);
    }
    Ok(worst)
}
