use crate::error::{Error, Result};
use crate::Real;

/// Nesterov dual-averaging state for `ln ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualAveraging<T> {
    pub mu: T,
    pub log_eps: T,
    /// Smoothed iterate; its exponential is the final step size.
    pub log_eps_bar: T,
    pub h_bar: T,
    pub counter: usize,
    pub gamma: T,
    pub t0: T,
    pub kappa: T,
}

impl<T: Real> DualAveraging<T> {
    pub fn new(eps0: T) -> Self {
        Self {
            mu: (T::lit(10.0) * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_bar: T::zero(),
            h_bar: T::zero(),
            counter: 0,
            gamma: T::lit(0.05),
            t0: T::lit(10.0),
            kappa: T::lit(0.75),
        }
    }

    pub fn update(&mut self, accept_stat: T, target_accept: T) {
        self.counter += 1;
        let accept = if accept_stat > T::one() {
            T::one()
        } else {
            accept_stat
        };
        let t = T::count(self.counter);
        let eta = T::one() / (t + self.t0);
        self.h_bar = (T::one() - eta) * self.h_bar + eta * (target_accept - accept);
        self.log_eps = self.mu - t.sqrt() / self.gamma * self.h_bar;
        let w = t.powf(-self.kappa);
        self.log_eps_bar = w * self.log_eps + (T::one() - w) * self.log_eps_bar;
    }

    pub fn stepsize(&self) -> T {
        self.log_eps.exp()
    }

    pub fn final_stepsize(&self) -> T {
        self.log_eps_bar.exp()
    }
}

pub fn dual_average_step<T: Real>(
    mut state: DualAveraging<T>,
    accept_stat: T,
    target_accept: T,
) -> DualAveraging<T> {
    state.update(accept_stat, target_accept);
    state
}

pub const MASS_SHRINK_N: f64 = 5.0;
pub const MASS_SHRINK_TARGET: f64 = 1e-3;

/// Regularized diagonal inverse mass from a window of unconstrained draws.
pub fn adapt_mass<T: Real>(window: &[Vec<T>]) -> Result<Vec<T>> {
    if window.len() < 10 {
        return Err(Error::TooFewDraws {
            needed: 10,
            got: window.len(),
        });
    }
    let dim = window[0].len();
    if window.iter().any(|d| d.len() != dim) {
        return Err(Error::Dimension("ragged mass-adaptation window".into()));
    }
    let n = T::count(window.len());
    let mut mean = vec![T::zero(); dim];
    let mut m2 = vec![T::zero(); dim];
    for (k, draw) in window.iter().enumerate() {
        let kk = T::count(k + 1);
        for i in 0..dim {
            let delta = draw[i] - mean[i];
            mean[i] = mean[i] + delta / kk;
            m2[i] = m2[i] + delta * (draw[i] - mean[i]);
        }
    }
    let shrink = T::lit(MASS_SHRINK_N);
    Ok(m2
        .into_iter()
        .map(|s| {
            let var = s / (n - T::one());
            (n / (n + shrink)) * var + (shrink / (n + shrink)) * T::lit(MASS_SHRINK_TARGET)
        })
        .collect())
}

/// Warmup schedule: the step-size-only buffers and the slow mass windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarmupSchedule {
    pub init_buffer: usize,
    pub term_buffer: usize,
    /// Half-open iteration ranges whose draws feed mass adaptation.
    pub windows: Vec<(usize, usize)>,
}

pub const BASE_WINDOW: usize = 25;

impl WarmupSchedule {
    /// Buffers of 15% and 10% of `warmup`; slow windows start at
    /// [`BASE_WINDOW`] and double, with the last stretched to the end buffer.
    pub fn new(warmup: usize) -> Self {
        let init_buffer = warmup * 15 / 100;
        let term_buffer = warmup / 10;
        let slow_end = warmup - term_buffer;
        let mut windows = Vec::new();
        if slow_end >= init_buffer + 10 {
            let mut start = init_buffer;
            let mut size = BASE_WINDOW.min(slow_end - init_buffer);
            while start < slow_end {
                let mut end = start + size;
                if end + 2 * size > slow_end {
                    end = slow_end;
                }
                windows.push((start, end));
                start = end;
                size *= 2;
            }
        }
        Self {
            init_buffer,
            term_buffer,
            windows,
        }
    }

    pub fn window_end(&self, iter: usize) -> bool {
        self.windows.iter().any(|&(_, end)| end == iter + 1)
    }

    pub fn in_window(&self, iter: usize) -> bool {
        self.windows.iter().any(|&(s, e)| s <= iter && iter < e)
    }
}
