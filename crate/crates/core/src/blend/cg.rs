use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CsrMatrix, PoissonSystem};

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||b - A x|| / ||b||`, recomputed from the returned iterate.
    pub relative_residual: f64,
    /// `max_i |b - A x|_i`, in the units of `b`.
    pub max_abs_residual: f64,
    pub converged: bool,
}

impl SolveReport {
    pub const TRIVIAL: SolveReport = SolveReport { iterations: 0, relative_residual: 0.0, max_abs_residual: 0.0, converged: true };

    /// Worst case of two reports (used across channels).
    pub fn worst(self, other: SolveReport) -> SolveReport {
        SolveReport {
            iterations: self.iterations.max(other.iterations),
            relative_residual: self.relative_residual.max(other.relative_residual),
            max_abs_residual: self.max_abs_residual.max(other.max_abs_residual),
            converged: self.converged && other.converged,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn true_residual(a: &CsrMatrix, x: &[f64], b: &[f64], r: &mut [f64]) {
    a.mul_vec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Conjugate gradients from a zero initial guess on an SPD matrix.
///
/// Converged means both `||b - Ax||_2 <= tol ||b||_2` and
/// `||b - Ax||_inf <= tol` (absolute, in the units of `b`), checked on the
/// recomputed residual. If the recursive residual claims convergence but the
/// recomputed one does not, the iteration restarts from the current iterate.
/// On hitting `max_iterations` the last iterate is returned with
/// `converged = false`.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], tolerance: f64, max_iterations: usize) -> (Vec<f64>, SolveReport) {
    let n = a.dim();
    assert_eq!(b.len(), n);
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return (x, SolveReport::TRIVIAL);
    }
    let threshold = tolerance * b_norm;
    let done = |r: &[f64], norm: f64| norm <= threshold && max_abs(r) <= tolerance;
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rs = dot(&r, &r);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        a.mul_vec_into(&p, &mut ap);
        let p_ap = dot(&p, &ap);
        if p_ap <= 0.0 {
            break;
        }
        let alpha = rs / p_ap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        let rs_next = dot(&r, &r);
        if done(&r, rs_next.sqrt()) {
            true_residual(a, &x, b, &mut r);
            rs = dot(&r, &r);
            if done(&r, rs.sqrt()) {
                converged = true;
                break;
            }
            p.copy_from_slice(&r);
            continue;
        }
        let beta = rs_next / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_next;
    }
    if !converged {
        true_residual(a, &x, b, &mut r);
        converged = done(&r, dot(&r, &r).sqrt());
    }
    let report = SolveReport {
        iterations,
        relative_residual: dot(&r, &r).sqrt() / b_norm,
        max_abs_residual: max_abs(&r),
        converged,
    };
    (x, report)
}

/// Solves every channel of `system`; channels run in parallel.
pub fn solve(system: &PoissonSystem, tolerance: f64, max_iterations: usize) -> (Vec<Vec<f64>>, SolveReport) {
    let results: Vec<_> = system
        .rhs
        .par_iter()
        .map(|b| conjugate_gradient(&system.matrix, b, tolerance, max_iterations))
        .collect();
    let mut report = SolveReport::TRIVIAL;
    let mut solutions = Vec::with_capacity(results.len());
    for (x, r) in results {
        report = report.worst(r);
        solutions.push(x);
    }
    (solutions, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_system_one_iteration() {
        let a = CsrMatrix::from_rows(vec![vec![(0, 4.0)]]);
        let (x, rep) = conjugate_gradient(&a, &[8.0], 1e-6, 10);
        assert_eq!(x, vec![2.0]);
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
    }

    #[test]
    fn zero_rhs_is_trivial() {
        let a = CsrMatrix::from_rows(vec![vec![(0, 4.0), (1, -1.0)], vec![(0, -1.0), (1, 4.0)]]);
        let (x, rep) = conjugate_gradient(&a, &[0.0, 0.0], 1e-6, 10);
        assert_eq!(x, vec![0.0, 0.0]);
        assert_eq!(rep, SolveReport::TRIVIAL);
    }

    #[test]
    fn tridiagonal_against_hand_solution() {
        // [4 -1 0; -1 4 -1; 0 -1 4] x = [3, 2, 3]  ->  x = [1, 1, 1]
        let a = CsrMatrix::from_rows(vec![
            vec![(0, 4.0), (1, -1.0)],
            vec![(0, -1.0), (1, 4.0), (2, -1.0)],
            vec![(1, -1.0), (2, 4.0)],
        ]);
        let (x, rep) = conjugate_gradient(&a, &[3.0, 2.0, 3.0], 1e-12, 50);
        assert!(rep.converged && rep.iterations <= 3);
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let n = 50;
        let rows = (0..n)
            .map(|i| {
                let mut r = Vec::new();
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                r.push((i, 2.0));
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                }
                r
            })
            .collect();
        let a = CsrMatrix::from_rows(rows);
        let b: Vec<f64> = (0..n).map(|i| (i % 7) as f64).collect();
        let (_, rep) = conjugate_gradient(&a, &b, 1e-12, 3);
        assert_eq!(rep.iterations, 3);
        assert!(!rep.converged);
        assert!(rep.relative_residual > 1e-12);
    }
}
