use crate::models::LogDensity;
use crate::stats::SimRng;
use crate::Real;

/// Energy error beyond which a trajectory is declared divergent.
pub const MAX_DELTA_H: f64 = 1000.0;

/// Position with its cached log density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint<T> {
    pub q: Vec<T>,
    pub logp: T,
    pub grad: Vec<T>,
}

impl<T: Real> PhasePoint<T> {
    pub fn new<D: LogDensity<T> + ?Sized>(target: &D, q: Vec<T>) -> Self {
        let mut grad = vec![T::zero(); q.len()];
        let logp = target.logp_grad(&q, &mut grad);
        Self { q, logp, grad }
    }
}

#[derive(Debug)]
struct State<T> {
    q: Vec<T>,
    p: Vec<T>,
    grad: Vec<T>,
    logp: T,
}

impl<T: Real> Clone for State<T> {
    fn clone(&self) -> Self {
        Self {
            q: self.q.clone(),
            p: self.p.clone(),
            grad: self.grad.clone(),
            logp: self.logp,
        }
    }

    fn clone_from(&mut self, src: &Self) {
        self.q.clone_from(&src.q);
        self.p.clone_from(&src.p);
        self.grad.clone_from(&src.grad);
        self.logp = src.logp;
    }
}

impl<T: Real> State<T> {
    fn kinetic(&self, inv_mass: &[T]) -> T {
        let half = T::lit(0.5);
        self.p
            .iter()
            .zip(inv_mass)
            .fold(T::zero(), |acc, (&p, &m)| acc + half * p * p * m)
    }

    fn hamiltonian(&self, inv_mass: &[T]) -> T {
        let h = -self.logp + self.kinetic(inv_mass);
        if h.is_nan() {
            T::infinity()
        } else {
            h
        }
    }

    fn step<D: LogDensity<T> + ?Sized>(&mut self, target: &D, eps: T, inv_mass: &[T]) {
        let half = T::lit(0.5) * eps;
        for (p, &g) in self.p.iter_mut().zip(&self.grad) {
            *p = *p + half * g;
        }
        for ((q, &p), &m) in self.q.iter_mut().zip(&self.p).zip(inv_mass) {
            *q = *q + eps * m * p;
        }
        self.logp = target.logp_grad(&self.q, &mut self.grad);
        for (p, &g) in self.p.iter_mut().zip(&self.grad) {
            *p = *p + half * g;
        }
    }
}

/// One leapfrog step from `(q, p)`: half kick, drift under `inv_mass`, half kick.
///
/// Returns `(q', p', log density at q', gradient at q')`. A non-finite density
/// or gradient is passed through for the caller to treat as divergent.
pub fn leapfrog<T: Real, D: LogDensity<T> + ?Sized>(
    target: &D,
    q: &[T],
    p: &[T],
    eps: T,
    inv_mass: &[T],
) -> (Vec<T>, Vec<T>, T, Vec<T>) {
    let start = PhasePoint::new(target, q.to_vec());
    let mut z = State {
        q: start.q,
        p: p.to_vec(),
        grad: start.grad,
        logp: start.logp,
    };
    z.step(target, eps, inv_mass);
    (z.q, z.p, z.logp, z.grad)
}

/// Outcome of one NUTS transition.
#[derive(Debug, Clone)]
pub struct Transition<T> {
    pub point: PhasePoint<T>,
    pub divergent: bool,
    pub treedepth: usize,
    pub accept_stat: T,
    pub n_leapfrog: usize,
    /// Hamiltonian of the selected state.
    pub energy: T,
}

fn log_sum_exp<T: Real>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn sharp<T: Real>(p: &[T], inv_mass: &[T], out: &mut Vec<T>) {
    out.clear();
    out.extend(p.iter().zip(inv_mass).map(|(&p, &m)| p * m));
}

fn add_into<T: Real>(acc: &mut [T], x: &[T]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a = *a + b;
    }
}

fn no_u_turn<T: Real>(p_sharp_minus: &[T], p_sharp_plus: &[T], rho: &[T]) -> bool {
    dot(p_sharp_plus, rho) > T::zero() && dot(p_sharp_minus, rho) > T::zero()
}

/// Per-subtree boundary bookkeeping.
struct Edges<T> {
    p_sharp_beg: Vec<T>,
    p_sharp_end: Vec<T>,
    p_beg: Vec<T>,
    p_end: Vec<T>,
    rho: Vec<T>,
}

impl<T: Real> Edges<T> {
    fn new(dim: usize) -> Self {
        Self {
            p_sharp_beg: Vec::with_capacity(dim),
            p_sharp_end: Vec::with_capacity(dim),
            p_beg: Vec::with_capacity(dim),
            p_end: Vec::with_capacity(dim),
            rho: Vec::with_capacity(dim),
        }
    }
}

struct Builder<'a, T: Real, D: LogDensity<T> + ?Sized> {
    target: &'a D,
    inv_mass: &'a [T],
    eps: T,
    h0: T,
    max_delta: T,
    n_leapfrog: usize,
    sum_metro: T,
    divergent: bool,
    rng: &'a mut SimRng,
    edge_pool: Vec<Edges<T>>,
    state_pool: Vec<State<T>>,
}

impl<'a, T: Real, D: LogDensity<T> + ?Sized> Builder<'a, T, D> {
    fn take_edges(&mut self, dim: usize) -> Edges<T> {
        self.edge_pool.pop().unwrap_or_else(|| Edges::new(dim))
    }

    fn take_state(&mut self, like: &State<T>) -> State<T> {
        match self.state_pool.pop() {
            Some(mut z) => {
                z.clone_from(like);
                z
            }
            None => like.clone(),
        }
    }

    /// Extends the trajectory from `z` by `2^depth` steps in direction `sign`.
    /// Returns false when the new subtree is invalid (divergent or U-turned).
    fn build(
        &mut self,
        depth: usize,
        z: &mut State<T>,
        z_propose: &mut State<T>,
        edges: &mut Edges<T>,
        sign: T,
        log_sum_weight: &mut T,
    ) -> bool {
        if depth == 0 {
            z.step(self.target, sign * self.eps, self.inv_mass);
            self.n_leapfrog += 1;
            let h = z.hamiltonian(self.inv_mass);
            if h - self.h0 > self.max_delta || !h.is_finite() {
                self.divergent = true;
            }
            let log_w = self.h0 - h;
            *log_sum_weight = log_sum_exp(*log_sum_weight, log_w);
            self.sum_metro = self.sum_metro
                + if log_w > T::zero() {
                    T::one()
                } else if log_w.is_finite() {
                    log_w.exp()
                } else {
                    T::zero()
                };
            z_propose.clone_from(z);
            sharp(&z.p, self.inv_mass, &mut edges.p_sharp_beg);
            edges.p_sharp_end.clone_from(&edges.p_sharp_beg);
            edges.rho.clone_from(&z.p);
            edges.p_beg.clone_from(&z.p);
            edges.p_end.clone_from(&z.p);
            return !self.divergent;
        }

        let dim = z.q.len();

        // Left subtree.
        let mut left = self.take_edges(dim);
        let mut lsw_left = T::neg_infinity();
        if !self.build(depth - 1, z, z_propose, &mut left, sign, &mut lsw_left) {
            self.edge_pool.push(left);
            return false;
        }

        // Right subtree.
        let mut z_propose_right = self.take_state(z);
        let mut right = self.take_edges(dim);
        let mut lsw_right = T::neg_infinity();
        let valid = self.build(
            depth - 1,
            z,
            &mut z_propose_right,
            &mut right,
            sign,
            &mut lsw_right,
        );
        if !valid {
            self.edge_pool.push(left);
            self.edge_pool.push(right);
            self.state_pool.push(z_propose_right);
            return false;
        }

        let lsw_subtree = log_sum_exp(lsw_left, lsw_right);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);

        // Uniform progressive sampling within the subtree.
        let accept_right = lsw_right - lsw_subtree;
        if accept_right >= T::zero() || T::lit(self.rng.uniform()).ln() < accept_right {
            std::mem::swap(z_propose, &mut z_propose_right);
        }
        self.state_pool.push(z_propose_right);

        edges.rho.clone_from(&left.rho);
        add_into(&mut edges.rho, &right.rho);

        let mut persist = no_u_turn(&left.p_sharp_beg, &right.p_sharp_end, &edges.rho);

        add_into(&mut left.rho, &right.p_beg);
        persist &= no_u_turn(&left.p_sharp_beg, &right.p_sharp_beg, &left.rho);

        add_into(&mut right.rho, &left.p_end);
        persist &= no_u_turn(&left.p_sharp_end, &right.p_sharp_end, &right.rho);

        std::mem::swap(&mut edges.p_sharp_beg, &mut left.p_sharp_beg);
        std::mem::swap(&mut edges.p_sharp_end, &mut right.p_sharp_end);
        std::mem::swap(&mut edges.p_beg, &mut left.p_beg);
        std::mem::swap(&mut edges.p_end, &mut right.p_end);
        self.edge_pool.push(left);
        self.edge_pool.push(right);
        persist
    }
}

/// One multinomial NUTS transition from `start`.
pub(crate) fn transition_from<T: Real, D: LogDensity<T> + ?Sized>(
    target: &D,
    start: &PhasePoint<T>,
    rng: &mut SimRng,
    eps: T,
    inv_mass: &[T],
    max_treedepth: usize,
) -> Transition<T> {
    let dim = start.q.len();
    let p: Vec<T> = inv_mass
        .iter()
        .map(|&m| T::lit(rng.std_normal()) / m.sqrt())
        .collect();
    let z0 = State {
        q: start.q.clone(),
        p,
        grad: start.grad.clone(),
        logp: start.logp,
    };
    let h0 = z0.hamiltonian(inv_mass);

    let mut z_fwd = z0.clone();
    let mut z_bck = z0.clone();
    let mut z_sample = z0.clone();
    let mut z_propose = z0.clone();

    // Momenta at the backward and forward extremes of the whole trajectory.
    let mut p_first = z0.p.clone();
    let mut p_last = z0.p.clone();
    let mut rho = z0.p.clone();

    let mut log_sum_weight = T::zero();
    let mut depth = 0;

    let mut builder = Builder {
        target,
        inv_mass,
        eps,
        h0,
        max_delta: T::lit(MAX_DELTA_H),
        n_leapfrog: 0,
        sum_metro: T::zero(),
        divergent: false,
        rng,
        edge_pool: Vec::new(),
        state_pool: Vec::new(),
    };

    let mut sa = Vec::with_capacity(dim);
    let mut sb = Vec::with_capacity(dim);
    let mut sub = Edges::new(dim);
    while depth < max_treedepth {
        let mut lsw_subtree = T::neg_infinity();
        let forward = builder.rng.uniform() > 0.5;
        let (z_end, sign) = if forward {
            (&mut z_fwd, T::one())
        } else {
            (&mut z_bck, -T::one())
        };
        let valid = builder.build(depth, z_end, &mut z_propose, &mut sub, sign, &mut lsw_subtree);
        depth += 1;
        if builder.divergent || !valid {
            break;
        }

        // Biased progressive sampling across the trajectory.
        if lsw_subtree > log_sum_weight {
            z_sample.clone_from(&z_propose);
        } else if T::lit(builder.rng.uniform()).ln() < lsw_subtree - log_sum_weight {
            z_sample.clone_from(&z_propose);
        }
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

        // Split the trajectory into a backward part A and a forward part B.
        // A subtree built backward starts next to the old trajectory.
        let (a_first, a_last, a_rho, b_first, b_last, b_rho) = if forward {
            (&p_first, &p_last, &rho, &sub.p_beg, &sub.p_end, &sub.rho)
        } else {
            (&sub.p_end, &sub.p_beg, &sub.rho, &p_first, &p_last, &rho)
        };
        let mut rho_total = a_rho.clone();
        add_into(&mut rho_total, b_rho);

        sharp(a_first, inv_mass, &mut sa);
        sharp(b_last, inv_mass, &mut sb);
        let mut persist = no_u_turn(&sa, &sb, &rho_total);

        let mut rho_ext = a_rho.clone();
        add_into(&mut rho_ext, b_first);
        sharp(b_first, inv_mass, &mut sb);
        persist &= no_u_turn(&sa, &sb, &rho_ext);

        let mut rho_ext = b_rho.clone();
        add_into(&mut rho_ext, a_last);
        sharp(a_last, inv_mass, &mut sa);
        sharp(b_last, inv_mass, &mut sb);
        persist &= no_u_turn(&sa, &sb, &rho_ext);

        let (new_first, new_last) = (a_first.clone(), b_last.clone());
        p_first = new_first;
        p_last = new_last;
        rho = rho_total;

        if !persist {
            break;
        }
    }

    let n_leapfrog = builder.n_leapfrog;
    let accept_stat = if n_leapfrog > 0 {
        builder.sum_metro / T::count(n_leapfrog)
    } else {
        T::zero()
    };
    let divergent = builder.divergent;
    let energy = z_sample.hamiltonian(inv_mass);
    Transition {
        point: PhasePoint {
            q: z_sample.q,
            logp: z_sample.logp,
            grad: z_sample.grad,
        },
        divergent,
        treedepth: depth,
        accept_stat,
        n_leapfrog,
        energy,
    }
}

/// One NUTS transition from position `q`.
pub fn nuts_transition<T: Real, D: LogDensity<T> + ?Sized>(
    target: &D,
    q: &[T],
    rng: &mut SimRng,
    eps: T,
    inv_mass: &[T],
    max_treedepth: usize,
) -> Transition<T> {
    let start = PhasePoint::new(target, q.to_vec());
    transition_from(target, &start, rng, eps, inv_mass, max_treedepth)
}

/// Doubles or halves `eps` until the one-step acceptance probability crosses 0.5.
pub(crate) fn find_reasonable_stepsize<T: Real, D: LogDensity<T> + ?Sized>(
    target: &D,
    start: &PhasePoint<T>,
    rng: &mut SimRng,
    eps0: T,
    inv_mass: &[T],
) -> T {
    let threshold = T::lit(0.5f64.ln());
    let mut eps = eps0;
    let mut direction = 0i32;
    for _ in 0..100 {
        let p: Vec<T> = inv_mass
            .iter()
            .map(|&m| T::lit(rng.std_normal()) / m.sqrt())
            .collect();
        let mut z = State {
            q: start.q.clone(),
            p,
            grad: start.grad.clone(),
            logp: start.logp,
        };
        let h0 = z.hamiltonian(inv_mass);
        z.step(target, eps, inv_mass);
        let delta = h0 - z.hamiltonian(inv_mass);
        let delta = if delta.is_nan() { T::neg_infinity() } else { delta };
        if direction == 0 {
            direction = if delta > threshold { 1 } else { -1 };
        }
        if direction == 1 && !(delta > threshold) {
            break;
        }
        if direction == -1 && !(delta < threshold) {
            break;
        }
        let next = if direction == 1 {
            eps * T::lit(2.0)
        } else {
            eps * T::lit(0.5)
        };
        if !(next > T::lit(1e-12) && next < T::lit(1e7)) {
            break;
        }
        eps = next;
    }
    eps
}
