//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Gauss-Hermite rule for `E f(X)`, `X ~ N(0, 1)`: nodes and weights from the
/// Jacobi matrix of the probabilists' Hermite polynomials (Golub-Welsch).
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::zeros(order, order);
    for k in 1..order {
        let off = (k as f64).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

pub fn normal_expectation(order: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_hermite(order);
    nodes.iter().zip(&weights).map(|(x, w)| w * f(*x)).sum()
}

/// Optimal value of `min 1'(u + v)` over `[G, -G; -G, G](u; v) <= (M + lambda; lambda - M)`,
/// `1'(u + v) <= B`, `u, v >= 0`, by enumerating every basic solution of the
/// 2p-variable standard form. `None` when no vertex is feasible.
pub fn lp_vertex_oracle(g: &DMatrix<f64>, m: &DVector<f64>, lambda: f64, l1_bound: f64) -> Option<f64> {
    let p = g.nrows();
    let nv = 2 * p;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..p {
        let mut up = vec![0.0; nv];
        let mut down = vec![0.0; nv];
        for j in 0..p {
            up[j] = g[(i, j)];
            up[p + j] = -g[(i, j)];
            down[j] = -g[(i, j)];
            down[p + j] = g[(i, j)];
        }
        rows.push((up, m[i] + lambda));
        rows.push((down, lambda - m[i]));
    }
    if l1_bound.is_finite() {
        rows.push((vec![1.0; nv], l1_bound));
    }
    for k in 0..nv {
        let mut e = vec![0.0; nv];
        e[k] = -1.0;
        rows.push((e, 0.0));
    }
    let scale = 1.0 + m.amax() + lambda;
    let mut best: Option<f64> = None;
    for subset in combinations(rows.len(), nv) {
        let a = DMatrix::from_fn(nv, nv, |r, c| rows[subset[r]].0[c]);
        let b = DVector::from_fn(nv, |r, _| rows[subset[r]].1);
        let lu = a.lu();
        if lu.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(z) = lu.solve(&b) else { continue };
        let feasible = rows
            .iter()
            .all(|(coef, rhs)| coef.iter().zip(z.iter()).map(|(c, v)| c * v).sum::<f64>() <= rhs + 1e-9 * scale);
        if feasible {
            let value = z.sum();
            best = Some(best.map_or(value, |b: f64| b.min(value)));
        }
    }
    best
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            if n - i < k - current.len() {
                break;
            }
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}

/// Ordinary least squares via the normal equations.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    (x.transpose() * x).cholesky().expect("full column rank").solve(&(x.transpose() * y))
}

/// Central difference of a scalar function in coordinate `k`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let mut up = x.to_vec();
    let mut down = x.to_vec();
    up[k] += h;
    down[k] -= h;
    (f(&up) - f(&down)) / (2.0 * h)
}
