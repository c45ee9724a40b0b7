//! Multinomial No-U-Turn transitions under a Euclidean metric.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Target;

/// Inverse mass matrix: either its diagonal, or a full covariance with its
/// lower Cholesky factor.
#[derive(Debug, Clone)]
pub(crate) enum Metric {
    Diag(Vec<f64>),
    Dense { cov: DMatrix<f64>, chol: DMatrix<f64> },
}

impl Metric {
    pub fn unit(dim: usize) -> Metric {
        Metric::Diag(vec![1.0; dim])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            Metric::Diag(m) => m.clone(),
            Metric::Dense { cov, .. } => cov.diagonal().iter().copied().collect(),
        }
    }

    /// Falls back to the diagonal when `cov` is not positive definite.
    pub fn dense(cov: DMatrix<f64>) -> Metric {
        match cov.clone().cholesky() {
            Some(c) => Metric::Dense { cov, chol: c.l() },
            None => Metric::Diag(cov.diagonal().iter().copied().collect()),
        }
    }

    /// Velocity `M^{-1} p`.
    pub fn velocity(&self, p: &[f64], out: &mut [f64]) {
        match self {
            Metric::Diag(m) => {
                for ((o, p), m) in out.iter_mut().zip(p).zip(m) {
                    *o = m * p;
                }
            }
            Metric::Dense { cov, .. } => {
                let n = p.len();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..n).map(|j| cov[(i, j)] * p[j]).sum();
                }
            }
        }
    }

    pub fn kinetic(&self, p: &[f64]) -> f64 {
        match self {
            Metric::Diag(m) => 0.5 * p.iter().zip(m).map(|(p, m)| p * p * m).sum::<f64>(),
            Metric::Dense { .. } => {
                let mut v = vec![0.0; p.len()];
                self.velocity(p, &mut v);
                0.5 * p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()
            }
        }
    }

    /// Momentum with covariance `M`.
    pub fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            Metric::Diag(m) => {
                for (p, m) in out.iter_mut().zip(m) {
                    let n: f64 = rng.sample(StandardNormal);
                    *p = n / m.sqrt();
                }
            }
            Metric::Dense { chol, .. } => {
                // p = L^{-T} z has covariance (L L^T)^{-1}
                let z = DVector::from_iterator(out.len(), (0..out.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let p = chol.tr_solve_lower_triangular(&z).expect("nonsingular factor");
                out.copy_from_slice(p.as_slice());
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub lp: f64,
}

impl Point {
    pub fn new<T: Target + ?Sized>(target: &T, q: Vec<f64>) -> Point {
        let mut grad = vec![0.0; q.len()];
        let lp = target.log_density_grad(&q, &mut grad);
        Point {
            p: vec![0.0; q.len()],
            q,
            grad,
            lp,
        }
    }
}

/// Outcome of one transition.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TransitionStats {
    pub accept_stat: f64,
    pub depth: usize,
    /// Largest `H - H0` seen along the trajectory.
    pub energy_error: f64,
    pub divergent: bool,
}

pub(crate) struct Kernel<'a, T: Target + ?Sized> {
    pub target: &'a T,
    pub metric: &'a Metric,
    pub step_size: f64,
    pub max_depth: usize,
    pub max_energy_error: f64,
}

struct Walk {
    h0: f64,
    n_leapfrog: usize,
    sum_metro: f64,
    energy_error: f64,
    divergent: bool,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    acc.iter_mut().zip(x).for_each(|(a, b)| *a += b);
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

impl<'a, T: Target + ?Sized> Kernel<'a, T> {
    pub fn hamiltonian(&self, z: &Point) -> f64 {
        let h = -z.lp + self.metric.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    pub fn sample_momentum(&self, z: &mut Point, rng: &mut ChaCha8Rng) {
        self.metric.sample(rng, &mut z.p);
    }

    pub fn leapfrog(&self, z: &mut Point, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
        let mut v = vec![0.0; z.p.len()];
        self.metric.velocity(&z.p, &mut v);
        for (q, v) in z.q.iter_mut().zip(&v) {
            *q += eps * v;
        }
        z.lp = self.target.log_density_grad(&z.q, &mut z.grad);
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
    }

    fn p_sharp(&self, p: &[f64], out: &mut [f64]) {
        self.metric.velocity(p, out);
    }

    /// One transition from `z`, which is replaced by the selected point.
    pub fn transition(&self, z: &mut Point, rng: &mut ChaCha8Rng) -> TransitionStats {
        let n = z.q.len();
        self.sample_momentum(z, rng);
        let mut walk = Walk {
            h0: self.hamiltonian(z),
            n_leapfrog: 0,
            sum_metro: 0.0,
            energy_error: f64::NEG_INFINITY,
            divergent: false,
        };

        let mut z_fwd = z.clone();
        let mut z_bck = z.clone();
        let mut z_sample = z.clone();
        let mut z_propose = z.clone();

        // Momenta at the two ends of the trajectory, in time order.
        let mut p_sharp_init = vec![0.0; n];
        self.p_sharp(&z.p, &mut p_sharp_init);
        let mut p_fwd = z.p.clone();
        let mut p_sharp_fwd = p_sharp_init.clone();
        let mut p_bck = z.p.clone();
        let mut p_sharp_bck = p_sharp_init;

        let mut rho = z.p.clone();
        let mut log_sum_weight = 0.0;
        let mut depth = 0;
        let mut new_beg = vec![0.0; n];
        let mut p_sharp_new_beg = vec![0.0; n];

        while depth < self.max_depth {
            let mut rho_new = vec![0.0; n];
            let mut lsw_subtree = f64::NEG_INFINITY;
            let forward = rng.random::<f64>() > 0.5;
            let (old_end, p_sharp_old_end) = if forward {
                (p_fwd.clone(), p_sharp_fwd.clone())
            } else {
                (p_bck.clone(), p_sharp_bck.clone())
            };
            let (z_edge, p_end, p_sharp_end, sign) = if forward {
                (&mut z_fwd, &mut p_fwd, &mut p_sharp_fwd, 1.0)
            } else {
                (&mut z_bck, &mut p_bck, &mut p_sharp_bck, -1.0)
            };
            let valid = self.build_tree(
                depth,
                z_edge,
                &mut z_propose,
                &mut p_sharp_new_beg,
                p_sharp_end,
                &mut rho_new,
                &mut new_beg,
                p_end,
                sign,
                &mut lsw_subtree,
                &mut walk,
                rng,
            );
            if !valid {
                break;
            }
            depth += 1;

            if lsw_subtree > log_sum_weight || rng.random::<f64>() < (lsw_subtree - log_sum_weight).exp() {
                z_sample.clone_from(&z_propose);
            }
            log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

            // whole tree, old tree plus the first new point, new subtree plus the last old point
            let mut ext_old = rho.clone();
            add_into(&mut ext_old, &new_beg);
            let mut ext_new = rho_new.clone();
            add_into(&mut ext_new, &old_end);
            add_into(&mut rho, &rho_new);
            let mut persist = no_u_turn(&p_sharp_bck, &p_sharp_fwd, &rho);
            if forward {
                persist &= no_u_turn(&p_sharp_bck, &p_sharp_new_beg, &ext_old);
                persist &= no_u_turn(&p_sharp_old_end, &p_sharp_fwd, &ext_new);
            } else {
                persist &= no_u_turn(&p_sharp_new_beg, &p_sharp_fwd, &ext_old);
                persist &= no_u_turn(&p_sharp_bck, &p_sharp_old_end, &ext_new);
            }
            if !persist {
                break;
            }
        }

        *z = z_sample;
        TransitionStats {
            accept_stat: if walk.n_leapfrog > 0 {
                walk.sum_metro / walk.n_leapfrog as f64
            } else {
                0.0
            },
            depth,
            energy_error: walk.energy_error,
            divergent: walk.divergent,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &self,
        depth: usize,
        z: &mut Point,
        z_propose: &mut Point,
        p_sharp_beg: &mut [f64],
        p_sharp_end: &mut [f64],
        rho: &mut [f64],
        p_beg: &mut [f64],
        p_end: &mut [f64],
        sign: f64,
        log_sum_weight: &mut f64,
        walk: &mut Walk,
        rng: &mut ChaCha8Rng,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, sign * self.step_size);
            walk.n_leapfrog += 1;
            let h = self.hamiltonian(z);
            let err = h - walk.h0;
            walk.energy_error = walk.energy_error.max(if err.is_nan() { f64::INFINITY } else { err });
            if err > self.max_energy_error {
                walk.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, walk.h0 - h);
            walk.sum_metro += if walk.h0 - h > 0.0 { 1.0 } else { (walk.h0 - h).exp() };
            z_propose.clone_from(z);
            self.p_sharp(&z.p, p_sharp_beg);
            p_sharp_end.copy_from_slice(p_sharp_beg);
            add_into(rho, &z.p);
            p_beg.copy_from_slice(&z.p);
            p_end.copy_from_slice(&z.p);
            return !walk.divergent;
        }

        let n = z.q.len();
        let mut lsw_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; n];
        let mut p_sharp_init_end = vec![0.0; n];
        let mut rho_init = vec![0.0; n];
        if !self.build_tree(
            depth - 1,
            z,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            sign,
            &mut lsw_init,
            walk,
            rng,
        ) {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut lsw_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; n];
        let mut p_sharp_final_beg = vec![0.0; n];
        let mut rho_final = vec![0.0; n];
        if !self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            sign,
            &mut lsw_final,
            walk,
            rng,
        ) {
            return false;
        }

        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree || rng.random::<f64>() < (lsw_final - lsw_subtree).exp() {
            *z_propose = z_propose_final;
        }

        let mut rho_subtree = rho_init.clone();
        add_into(&mut rho_subtree, &rho_final);
        add_into(rho, &rho_subtree);

        let mut persist = no_u_turn(p_sharp_beg, p_sharp_end, &rho_subtree);
        let mut ext = rho_init;
        add_into(&mut ext, &p_final_beg);
        persist &= no_u_turn(p_sharp_beg, &p_sharp_final_beg, &ext);
        let mut ext = rho_final;
        add_into(&mut ext, &p_init_end);
        persist &= no_u_turn(&p_sharp_init_end, p_sharp_end, &ext);
        persist
    }
}
