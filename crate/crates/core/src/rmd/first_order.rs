//! Linearized ADMM for the RMD program, for dictionaries too large for a dense simplex.
//!
//! Splitting: `min ||t||_1 + I_box(z)  s.t.  G t - M - z = 0`, `box = [-lambda, lambda]^p`.
//! The dual of the RMD program is `max -M'y - lambda ||y||_1  s.t.  ||G y||_inf <= 1`;
//! the scaled ADMM multiplier gives a dual point, which after rescaling into the
//! dual feasible set certifies the duality gap used as the stopping rule.
//! The `||t||_1 <= B` constraint is handled by projecting onto the l1 ball after
//! the shrinkage step.

use nalgebra::{DMatrix, DVector};

use super::{RmdProblem, SolverOptions, SolverStatus};

const CHECK_EVERY: usize = 25;

fn spectral_norm(g: &DMatrix<f64>) -> f64 {
    let p = g.nrows();
    let mut v = DVector::from_element(p, 1.0 / (p as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..200 {
        let w = g * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (norm - est).abs() <= 1e-10 * norm {
            est = norm;
            break;
        }
        est = norm;
    }
    est
}

fn soft_threshold(v: f64, k: f64) -> f64 {
    v.signum() * (v.abs() - k).max(0.0)
}

// Euclidean projection onto { ||t||_1 <= radius }.
fn project_l1_ball(t: &mut DVector<f64>, radius: f64) {
    if t.lp_norm(1) <= radius {
        return;
    }
    let mut mags: Vec<f64> = t.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, m) in mags.iter().enumerate() {
        cumsum += m;
        let candidate = (cumsum - radius) / (k + 1) as f64;
        if *m > candidate {
            theta = candidate;
        }
    }
    t.apply(|v| *v = soft_threshold(*v, theta));
}

pub(super) fn solve(prob: &RmdProblem, opts: &SolverOptions) -> (DVector<f64>, SolverStatus, usize) {
    let g = &prob.g_hat;
    let m = &prob.m_hat;
    let lambda = prob.lambda;
    let p = prob.dim();

    let sigma = spectral_norm(g);
    if sigma == 0.0 {
        // G = 0: t = 0 is optimal if ||M|| <= lambda, otherwise nothing is feasible
        let status = if m.amax() <= lambda {
            SolverStatus::Optimal
        } else {
            SolverStatus::Infeasible
        };
        return (DVector::zeros(p), status, 0);
    }
    let step = 1.0 / (sigma * sigma * 1.01);
    let feas_tol = opts.feas_tol * (1.0 + m.amax());

    let mut rho = 1.0 / (1.0 + m.amax());
    let mut t = DVector::zeros(p);
    let mut z = (-m).map(|v| v.clamp(-lambda, lambda));
    let mut u = DVector::zeros(p);
    let mut gt = DVector::zeros(p);
    let mut best = t.clone();

    for iter in 1..=opts.max_iters {
        let r = &gt - m - &z + &u;
        let grad = g * r;
        t = (&t - grad * step).map(|v| soft_threshold(v, step / rho));
        if prob.l1_bound.is_finite() {
            project_l1_ball(&mut t, prob.l1_bound);
        }
        gt = g * &t;
        let z_prev = z.clone();
        z = (&gt - m + &u).map(|v| v.clamp(-lambda, lambda));
        let primal = &gt - m - &z;
        u += &primal;

        if iter % CHECK_EVERY != 0 {
            continue;
        }
        let violation = ((&gt - m).amax() - lambda).max(0.0);
        let l1 = t.lp_norm(1);
        if violation <= feas_tol {
            best = t.clone();
            let mut y = &u * rho;
            let scale = (g * &y).amax().max(1.0);
            y /= scale;
            let dual = -m.dot(&y) - lambda * y.lp_norm(1);
            if l1 - dual <= opts.opt_tol_abs + opts.opt_tol_rel * l1 {
                return (t, SolverStatus::Optimal, iter);
            }
        }
        // residual balancing
        let primal_norm = primal.norm();
        let dual_norm = rho * (g * (&z - &z_prev)).norm();
        if primal_norm > 10.0 * dual_norm {
            rho *= 2.0;
            u /= 2.0;
        } else if dual_norm > 10.0 * primal_norm {
            rho /= 2.0;
            u *= 2.0;
        }
    }
    let incumbent = if ((g * &best - m).amax() - lambda) <= feas_tol {
        best
    } else {
        t
    };
    (incumbent, SolverStatus::IterationLimit, opts.max_iters)
}
