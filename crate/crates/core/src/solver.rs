//! Sparse symmetric solvers: envelope LDLᵀ under reverse Cuthill–McKee ordering, with a
//! Jacobi-preconditioned conjugate gradient fallback.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

const DIRECT_TOL: f64 = 1e-10;
const ITERATIVE_TOL: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMethod {
    Direct,
    Iterative { iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub residual: f64,
}

/// Reverse Cuthill–McKee permutation; `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).0.iter().copied().filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = peripheral_node(seed, &adj, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(start: usize, adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut reached = vec![start];
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                depth = depth.max(dist[w]);
                queue.push_back(w);
                reached.push(w);
            }
        }
    }
    let last: Vec<usize> = reached.into_iter().filter(|&v| dist[v] == depth).collect();
    (last, depth)
}

fn peripheral_node(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut current = seed;
    let (mut last, mut depth) = bfs_levels(current, adj);
    loop {
        let candidate = *last.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
        let (next_last, next_depth) = bfs_levels(candidate, adj);
        if next_depth <= depth {
            return current;
        }
        current = candidate;
        last = next_last;
        depth = next_depth;
    }
}

/// Envelope (variable band) LDLᵀ factorization of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct LdltFactor {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl LdltFactor {
    /// Uses the lower triangle of `a`; no pivoting, so `a` must be definite or at least
    /// factorizable in the chosen order.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::invalid("factorization needs a square matrix"));
        }
        let n = a.nrows();
        let perm = rcm_ordering(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for &j in a.row(old).0 {
                let jn = inv[j];
                if jn < first[new] {
                    first[new] = jn;
                }
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i]);
        }
        let mut l = vec![0.0; offset[n]];
        let mut d = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            let (cols, vals) = a.row(old);
            for (&j, &v) in cols.iter().zip(vals) {
                let jn = inv[j];
                if jn < new {
                    l[offset[new] + jn - first[new]] += v;
                } else if jn == new {
                    d[new] += v;
                }
            }
        }
        let scale = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::SolverFailure {
                message: "matrix has no usable diagonal".into(),
                residual: f64::NAN,
            });
        }

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = l.split_at_mut(offset[i]);
            let row_i = &mut rest[..i - fi];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &done[offset[j]..offset[j] + (j - fj)];
                let s: f64 = row_i[k0 - fi..j - fi]
                    .iter()
                    .zip(&row_j[k0 - fj..])
                    .map(|(x, y)| x * y)
                    .sum();
                row_i[j - fi] -= s;
            }
            let mut di = d[i];
            for j in fi..i {
                let g = row_i[j - fi];
                let lij = g / d[j];
                row_i[j - fi] = lij;
                di -= g * lij;
            }
            if !(di.abs() > PIVOT_TOL * scale) || !di.is_finite() {
                return Err(Error::SolverFailure {
                    message: format!(
                        "pivot {di:e} at step {i} of {n}; matrix is singular or indefinite"
                    ),
                    residual: f64::NAN,
                });
            }
            d[i] = di;
        }
        Ok(LdltFactor {
            perm,
            first,
            offset,
            l,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.l[self.offset[i]..self.offset[i + 1]];
            let s: f64 = row.iter().zip(&x[fi..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = x[i];
            let row = &self.l[self.offset[i]..self.offset[i + 1]];
            for (xj, lij) in x[fi..i].iter_mut().zip(row) {
                *xj -= lij * xi;
            }
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    /// Solve with up to three steps of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64]) -> (Vec<f64>, f64) {
        let bn = norm2(b);
        if bn == 0.0 {
            return (vec![0.0; b.len()], 0.0);
        }
        let mut x = self.solve(b);
        let mut res = residual(a, &x, b);
        let mut rel = norm2(&res) / bn;
        for _ in 0..3 {
            if rel <= 1e-2 * DIRECT_TOL {
                break;
            }
            let dx = self.solve(&res);
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(x, d)| x + d).collect();
            let r2 = residual(a, &trial, b);
            let rel2 = norm2(&r2) / bn;
            if rel2 >= rel {
                break;
            }
            x = trial;
            res = r2;
            rel = rel2;
        }
        (x, rel)
    }
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(ax).map(|(b, ax)| b - ax).collect()
}

/// Jacobi-preconditioned conjugate gradients; returns the solution and iteration count.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let bn = norm2(b);
    if bn == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let diag = a.diagonal();
    let precond: Vec<f64> = diag
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&precond).map(|(r, p)| r * p).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / bn;
        if rel <= tol {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] * precond[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = norm2(&residual(a, &x, b)) / bn;
    Err(Error::SolverFailure {
        message: format!("conjugate gradients stalled after {max_iter} iterations"),
        residual: rel,
    })
}

/// A factorized symmetric matrix kept for repeated solves.
#[derive(Debug, Clone)]
pub struct Factorized {
    matrix: CsrMatrix,
    factor: LdltFactor,
}

impl Factorized {
    pub fn new(matrix: CsrMatrix) -> Result<Self> {
        let factor = LdltFactor::factor(&matrix)?;
        Ok(Factorized { matrix, factor })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.factor.dim() {
            return Err(Error::invalid(format!(
                "right-hand side of length {} for a {} system",
                b.len(),
                self.factor.dim()
            )));
        }
        let (x, rel) = self.factor.solve_refined(&self.matrix, b);
        if rel <= DIRECT_TOL && x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
        match pcg(&self.matrix, b, 1e-2 * ITERATIVE_TOL, 20 * b.len().max(100)) {
            Ok((x, _)) => Ok(x),
            Err(_) => Err(Error::SolverFailure {
                message: "direct solve lost accuracy".into(),
                residual: rel,
            }),
        }
    }
}

pub fn solve_linear(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    solve_linear_report(a, b).map(|(x, _)| x)
}

/// Direct solve with a conjugate gradient fallback for symmetric matrices.
pub fn solve_linear_report(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::invalid(format!(
            "{}x{} system with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("right-hand side is not finite"));
    }
    let direct = LdltFactor::factor(a).map(|f| f.solve_refined(a, b));
    let mut last = f64::NAN;
    if let Ok((x, rel)) = direct {
        if rel <= DIRECT_TOL && x.iter().all(|v| v.is_finite()) {
            return Ok((
                x,
                SolveReport {
                    method: SolveMethod::Direct,
                    residual: rel,
                },
            ));
        }
        last = rel;
    }
    if a.is_symmetric() {
        match pcg(a, b, 1e-2 * ITERATIVE_TOL, 20 * b.len().max(100)) {
            Ok((x, iterations)) => {
                let rel = norm2(&residual(a, &x, b)) / norm2(b).max(f64::MIN_POSITIVE);
                if rel <= ITERATIVE_TOL {
                    return Ok((
                        x,
                        SolveReport {
                            method: SolveMethod::Iterative { iterations },
                            residual: rel,
                        },
                    ));
                }
                last = rel;
            }
            Err(Error::SolverFailure { residual, .. }) => last = residual,
            Err(e) => return Err(e),
        }
    }
    Err(Error::SolverFailure {
        message: "no solver reached the residual target".into(),
        residual: last,
    })
}
