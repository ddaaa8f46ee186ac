//! Dense two-phase revised simplex for `min c'x  s.t.  A x <= b, x >= 0`.
//!
//! The basis inverse is kept explicitly and updated with elementary row
//! operations after every pivot; it is recomputed from scratch by LU every
//! `REFACTOR_EVERY` pivots and once more before the solution is reported.
//! Pricing is Dantzig's most-negative reduced cost with a Harris ratio test.
//! After a run of degenerate pivots the solver switches to Bland's rule, which
//! cannot cycle, until the objective moves again.

use nalgebra::{DMatrix, DVector};

const REFACTOR_EVERY: usize = 50;
const DEGENERATE_RUN: usize = 30;
const PIVOT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotRule {
    /// Dantzig pricing, falling back to Bland's rule on degenerate stalls.
    Dantzig,
    /// Bland's smallest-index rule throughout.
    Bland,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct LpOptions {
    pub max_iters: usize,
    /// Reduced-cost tolerance.
    pub opt_tol: f64,
    /// Primal feasibility tolerance, relative to `1 + max |b|`.
    pub feas_tol: f64,
    pub pivot_rule: PivotRule,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            max_iters: 100_000,
            opt_tol: 1e-10,
            feas_tol: 1e-10,
            pivot_rule: PivotRule::Dantzig,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LpResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
}

struct Tableau<'o> {
    a: DMatrix<f64>,
    rhs: DVector<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    first_artificial: usize,
    iterations: usize,
    since_refactor: usize,
    feas_tol: f64,
    opts: &'o LpOptions,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau<'_> {
    fn refactor(&mut self) -> bool {
        let m = self.basis.len();
        let mut bmat = DMatrix::zeros(m, m);
        for (r, &j) in self.basis.iter().enumerate() {
            bmat.set_column(r, &self.a.column(j));
        }
        match bmat.lu().try_inverse() {
            Some(inv) => {
                self.binv = inv;
                self.xb = &self.binv * &self.rhs;
                for v in self.xb.iter_mut() {
                    if *v < 0.0 && *v > -self.feas_tol {
                        *v = 0.0;
                    }
                }
                self.since_refactor = 0;
                true
            }
            None => false,
        }
    }

    fn pivot(&mut self, row: usize, col: usize, w: &DVector<f64>) {
        let step = (self.xb[row] / w[row]).max(0.0);
        for i in 0..self.xb.len() {
            if i != row {
                self.xb[i] -= step * w[i];
                if self.xb[i] < 0.0 && self.xb[i] > -self.feas_tol {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[row] = step;

        let pivot = w[row];
        let m = self.binv.nrows();
        for k in 0..m {
            self.binv[(row, k)] /= pivot;
        }
        for i in 0..m {
            let factor = w[i];
            if i != row && factor != 0.0 {
                for k in 0..m {
                    let v = self.binv[(row, k)];
                    self.binv[(i, k)] -= factor * v;
                }
            }
        }
        self.is_basic[self.basis[row]] = false;
        self.is_basic[col] = true;
        self.basis[row] = col;
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    fn run_phase(&mut self, cost: &DVector<f64>, allowed: usize) -> PhaseEnd {
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= self.opts.max_iters {
                return PhaseEnd::IterationLimit;
            }
            let cb = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|&j| cost[j]));
            let y = self.binv.tr_mul(&cb);
            let reduced = cost - self.a.tr_mul(&y);

            let bland = self.opts.pivot_rule == PivotRule::Bland || degenerate >= DEGENERATE_RUN;
            let mut entering: Option<usize> = None;
            let mut best = -self.opts.opt_tol;
            for j in 0..allowed {
                if self.is_basic[j] || reduced[j] >= -self.opts.opt_tol {
                    continue;
                }
                if bland {
                    entering = Some(j);
                    break;
                }
                if reduced[j] < best {
                    best = reduced[j];
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                return PhaseEnd::Optimal;
            };

            let w = &self.binv * self.a.column(q);
            let Some(r) = self.ratio_test(&w, bland) else {
                return PhaseEnd::Unbounded;
            };
            if self.xb[r] / w[r] <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, q, &w);
        }
    }

    fn ratio_test(&self, w: &DVector<f64>, bland: bool) -> Option<usize> {
        let candidates = (0..w.len()).filter(|&i| w[i] > PIVOT_TOL);
        if bland {
            let mut best: Option<(usize, f64)> = None;
            for i in candidates {
                let ratio = self.xb[i].max(0.0) / w[i];
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            return best.map(|(i, _)| i);
        }
        // Harris: relax the bound by the feasibility tolerance, then take the
        // largest pivot element among rows that attain the relaxed minimum.
        let bound = candidates
            .clone()
            .map(|i| (self.xb[i].max(0.0) + self.feas_tol) / w[i])
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        candidates
            .filter(|&i| self.xb[i].max(0.0) / w[i] <= bound)
            .max_by(|&i, &k| w[i].total_cmp(&w[k]).then(k.cmp(&i)))
    }

    fn drive_out_artificials(&mut self) {
        for r in 0..self.basis.len() {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let row = self.a.tr_mul(&self.binv.row(r).transpose());
            let candidate = (0..self.first_artificial)
                .filter(|&j| !self.is_basic[j])
                .max_by(|&i, &k| row[i].abs().total_cmp(&row[k].abs()).then(k.cmp(&i)));
            if let Some(j) = candidate {
                if row[j].abs() > 1e-7 {
                    let w = &self.binv * self.a.column(j);
                    self.pivot(r, j, &w);
                }
            }
            // otherwise the row is redundant; the artificial stays basic at zero
        }
    }

    fn primal(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (r, &j) in self.basis.iter().enumerate() {
            if j < n {
                x[j] = self.xb[r].max(0.0);
            }
        }
        x
    }
}

/// Solves `min c'x  s.t.  A x <= b, x >= 0`.
pub fn solve(c: &[f64], a: &DMatrix<f64>, b: &[f64], opts: &LpOptions) -> LpResult {
    let (m, n) = a.shape();
    assert_eq!(c.len(), n);
    assert_eq!(b.len(), m);

    let negative: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let first_artificial = n + m;
    let total = first_artificial + negative.len();

    let mut full = DMatrix::zeros(m, total);
    let mut rhs = DVector::zeros(m);
    let mut basis = vec![0; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            full[(i, j)] = sign * a[(i, j)];
        }
        full[(i, n + i)] = sign;
        rhs[i] = sign * b[i];
        basis[i] = n + i;
    }
    for (k, &i) in negative.iter().enumerate() {
        full[(i, first_artificial + k)] = 1.0;
        basis[i] = first_artificial + k;
    }
    let mut is_basic = vec![false; total];
    for &j in &basis {
        is_basic[j] = true;
    }

    let scale = 1.0 + rhs.amax();
    let mut tab = Tableau {
        a: full,
        xb: rhs.clone(),
        rhs,
        basis,
        is_basic,
        binv: DMatrix::identity(m, m),
        first_artificial,
        iterations: 0,
        since_refactor: 0,
        feas_tol: opts.feas_tol * scale,
        opts,
    };

    let finish = |tab: &mut Tableau, status: LpStatus| {
        tab.refactor();
        let x = tab.primal(n);
        let objective = x.iter().zip(c).map(|(x, c)| x * c).sum();
        LpResult {
            x,
            objective,
            status,
            iterations: tab.iterations,
        }
    };

    if !negative.is_empty() {
        let mut phase_one = DVector::zeros(total);
        for j in first_artificial..total {
            phase_one[j] = 1.0;
        }
        match tab.run_phase(&phase_one, total) {
            PhaseEnd::IterationLimit => return finish(&mut tab, LpStatus::IterationLimit),
            // phase one is bounded below by zero
            PhaseEnd::Unbounded | PhaseEnd::Optimal => {}
        }
        tab.refactor();
        let infeasibility: f64 = tab
            .basis
            .iter()
            .zip(tab.xb.iter())
            .filter(|(j, _)| **j >= first_artificial)
            .map(|(_, v)| v.max(0.0))
            .sum();
        if infeasibility > 1e-9 * scale {
            return finish(&mut tab, LpStatus::Infeasible);
        }
        tab.drive_out_artificials();
    }

    let mut cost = DVector::zeros(total);
    cost.as_mut_slice()[..n].copy_from_slice(c);
    let status = match tab.run_phase(&cost, first_artificial) {
        PhaseEnd::Optimal => LpStatus::Optimal,
        PhaseEnd::Unbounded => LpStatus::Unbounded,
        PhaseEnd::IterationLimit => LpStatus::IterationLimit,
    };
    finish(&mut tab, status)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_max_problem() {
        // max 3x + 5y  s.t.  x <= 4, 2y <= 12, 3x + 2y <= 18
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 3.0, 2.0]);
        let res = solve(&[-3.0, -5.0], &a, &[4.0, 12.0, 18.0], &LpOptions::default());
        assert_eq!(res.status, LpStatus::Optimal);
        assert!((res.x[0] - 2.0).abs() < 1e-12 && (res.x[1] - 6.0).abs() < 1e-12);
        assert!((res.objective + 36.0).abs() < 1e-12);
    }

    #[test]
    fn needs_phase_one() {
        // min x + y  s.t.  x + y >= 2, x - y <= 1
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, 1.0, -1.0]);
        let res = solve(&[1.0, 1.0], &a, &[-2.0, 1.0], &LpOptions::default());
        assert_eq!(res.status, LpStatus::Optimal);
        assert!((res.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        // x <= 1 and x >= 2
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let res = solve(&[1.0], &a, &[1.0, -2.0], &LpOptions::default());
        assert_eq!(res.status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let res = solve(&[-1.0, 0.0], &a, &[1.0], &LpOptions::default());
        assert_eq!(res.status, LpStatus::Unbounded);
    }

    #[test]
    fn bland_agrees_with_dantzig() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, -2.0, -1.0, 3.0, 0.0, 2.0, 1.0, 4.0, 0.0]);
        let b = [-2.0, 9.0, 8.0];
        let c = [2.0, 1.0, 3.0];
        let d = solve(&c, &a, &b, &LpOptions::default());
        let bl = solve(
            &c,
            &a,
            &b,
            &LpOptions {
                pivot_rule: PivotRule::Bland,
                ..LpOptions::default()
            },
        );
        assert_eq!(d.status, LpStatus::Optimal);
        assert!((d.objective - 1.0).abs() < 1e-12);
        assert!((d.objective - bl.objective).abs() < 1e-12);
    }

    #[test]
    fn iteration_limit_reported() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 3.0, 2.0]);
        let opts = LpOptions {
            max_iters: 1,
            ..LpOptions::default()
        };
        let res = solve(&[-3.0, -5.0], &a, &[4.0, 12.0, 18.0], &opts);
        assert_eq!(res.status, LpStatus::IterationLimit);
    }
}
