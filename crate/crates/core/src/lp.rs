//! Dense phase-1 simplex for `A x = b, x ≥ 0` with `b ≥ 0`.
//!
//! Artificial variables start in the basis and their sum is minimised;
//! the system is feasible iff the optimum is zero. Bland's rule prevents
//! cycling, which matters here because the S-matrix problems are highly
//! degenerate (every right-hand side is 1).

use crate::linalg::Matrix;

const PIVOT_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseOne {
    /// Minimal sum of artificial variables.
    pub infeasibility: f64,
    /// The structural part of the final basic solution.
    pub x: Vec<f64>,
    pub pivots: usize,
}

/// Runs phase 1. Rows with negative `b` are negated first.
pub fn phase_one(a: &Matrix, b: &[f64]) -> PhaseOne {
    let m = a.nrows();
    let n = a.ncols();
    assert_eq!(b.len(), m, "rhs length must match row count");
    let cols = n + m + 1;
    let rhs = n + m;

    let mut t = vec![0.0; m * cols];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i * cols + j] = sign * a[(i, j)];
        }
        t[i * cols + n + i] = 1.0;
        t[i * cols + rhs] = sign * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // reduced costs of min sum(artificial): c_j - sum_i t_ij over artificial rows
    let mut cost = vec![0.0; cols];
    for j in 0..cols {
        let c = if (n..n + m).contains(&j) { 1.0 } else { 0.0 };
        cost[j] = c - (0..m).map(|i| t[i * cols + j]).sum::<f64>();
    }

    let max_pivots = 50 * (n + m).max(1);
    let mut pivots = 0;
    while pivots < max_pivots {
        let Some(enter) = (0..n + m).find(|&j| cost[j] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let aij = t[i * cols + enter];
            if aij > PIVOT_EPS {
                let ratio = t[i * cols + rhs] / aij;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best - PIVOT_EPS
                            || (ratio <= best + PIVOT_EPS && basis[i] < basis[l])
                    }
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        // phase 1 is bounded below by zero, so an entering column always has
        // a positive entry; guard anyway against round-off
        let Some(row) = leave else { break };

        let p = t[row * cols + enter];
        for j in 0..cols {
            t[row * cols + j] /= p;
        }
        for i in 0..m {
            if i != row {
                let f = t[i * cols + enter];
                if f != 0.0 {
                    for j in 0..cols {
                        t[i * cols + j] -= f * t[row * cols + j];
                    }
                }
            }
        }
        let f = cost[enter];
        for j in 0..cols {
            cost[j] -= f * t[row * cols + j];
        }
        basis[row] = enter;
        pivots += 1;
    }

    let mut x = vec![0.0; n];
    let mut infeasibility = 0.0;
    for (i, &bv) in basis.iter().enumerate() {
        let val = t[i * cols + rhs].max(0.0);
        if bv < n {
            x[bv] = val;
        } else {
            infeasibility += val;
        }
    }
    PhaseOne {
        infeasibility,
        x,
        pivots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix_from_rows;

    #[test]
    fn feasible_system() {
        // x1 + x2 = 2, x1 - x2 = 0
        let a = matrix_from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let r = phase_one(&a, &[2.0, 0.0]);
        assert!(r.infeasibility < 1e-12);
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_system() {
        // x1 + x2 = 1, x1 + x2 = 3
        let a = matrix_from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let r = phase_one(&a, &[1.0, 3.0]);
        assert!((r.infeasibility - 2.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_is_normalised() {
        // -x1 = -4
        let a = matrix_from_rows(&[vec![-1.0]]).unwrap();
        let r = phase_one(&a, &[-4.0]);
        assert!(r.infeasibility < 1e-12);
        assert!((r.x[0] - 4.0).abs() < 1e-12);
    }
}
