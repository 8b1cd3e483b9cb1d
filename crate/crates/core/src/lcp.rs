//! Lemke's complementary pivoting for `LCP(q, M)`:
//! find `y ≥ 0` with `w = q + My ≥ 0` and `⟨w, y⟩ = 0`.
//!
//! Covering vector `e = 1`, dense tableau, lexicographic minimum-ratio
//! rule for degenerate ties. A solution always exists for P-matrices;
//! for other completely-S matrices the method may end on a secondary ray,
//! which is reported as an error.

use crate::error::{Result, SrbmError};

const PIVOT_EPS: f64 = 1e-12;

/// Reusable workspace for a fixed matrix `M`.
#[derive(Clone, Debug)]
pub struct LemkeSolver {
    n: usize,
    /// row-major `M`
    m: Vec<f64>,
    tableau: Vec<f64>,
    basis: Vec<usize>,
    max_pivots: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LcpSolution {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub pivots: usize,
}

impl LemkeSolver {
    /// `m` is row-major `n × n`.
    pub fn new(n: usize, m: &[f64]) -> Self {
        assert_eq!(m.len(), n * n, "matrix must be n x n");
        Self {
            n,
            m: m.to_vec(),
            tableau: vec![0.0; n * (2 * n + 2)],
            basis: vec![0; n],
            // 2^n complementary pivots plus the initial artificial pivot
            max_pivots: (1usize << n.min(30)) + 1,
        }
    }

    pub fn from_matrix(m: &crate::linalg::Matrix) -> Self {
        let n = m.nrows();
        let rows: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| m[(i, j)])).collect();
        Self::new(n, &rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves in place, writing `y` into `y_out`. Returns the pivot count.
    pub fn solve_into(&mut self, q: &[f64], y_out: &mut [f64]) -> Result<usize> {
        let n = self.n;
        debug_assert_eq!(q.len(), n);
        y_out.iter_mut().for_each(|y| *y = 0.0);
        if q.iter().all(|&x| x >= 0.0) {
            return Ok(0);
        }

        let cols = 2 * n + 2;
        let z0 = 2 * n;
        let rhs = 2 * n + 1;
        let t = &mut self.tableau;
        // I w - M y - e z0 = q
        for i in 0..n {
            let row = &mut t[i * cols..(i + 1) * cols];
            row.iter_mut().for_each(|x| *x = 0.0);
            row[i] = 1.0;
            for j in 0..n {
                row[n + j] = -self.m[i * n + j];
            }
            row[z0] = -1.0;
            row[rhs] = q[i];
            self.basis[i] = i;
        }

        // z0 enters at the lexicographic minimum of (q_i, e_i): the most
        // negative q, and among equal q the row with the larger index
        let mut leave_row = 0;
        for i in 1..n {
            if q[i] <= q[leave_row] {
                leave_row = i;
            }
        }
        let mut pivots = 0;
        let mut entering = z0;
        loop {
            pivot(t, cols, leave_row, entering);
            let left = self.basis[leave_row];
            self.basis[leave_row] = entering;
            pivots += 1;
            if left == z0 {
                break;
            }
            if pivots >= self.max_pivots {
                return Err(SrbmError::LcpCapExceeded {
                    pivots,
                    q: q.to_vec(),
                });
            }
            entering = if left < n { left + n } else { left - n };
            leave_row = match lex_min_ratio(t, cols, n, entering, rhs) {
                Some(r) => r,
                None => return Err(SrbmError::LcpRay { q: q.to_vec() }),
            };
        }

        for (i, &b) in self.basis.iter().enumerate() {
            if (n..2 * n).contains(&b) {
                y_out[b - n] = t[i * cols + rhs].max(0.0);
            }
        }
        Ok(pivots)
    }

    pub fn solve(&mut self, q: &[f64]) -> Result<LcpSolution> {
        let n = self.n;
        let mut y = vec![0.0; n];
        let pivots = self.solve_into(q, &mut y)?;
        let w = (0..n)
            .map(|i| q[i] + (0..n).map(|j| self.m[i * n + j] * y[j]).sum::<f64>())
            .collect();
        Ok(LcpSolution { y, w, pivots })
    }
}

fn pivot(t: &mut [f64], cols: usize, row: usize, col: usize) {
    let nrows = t.len() / cols;
    let p = t[row * cols + col];
    for j in 0..cols {
        t[row * cols + j] /= p;
    }
    for i in 0..nrows {
        if i == row {
            continue;
        }
        let f = t[i * cols + col];
        if f != 0.0 {
            for j in 0..cols {
                t[i * cols + j] -= f * t[row * cols + j];
            }
        }
    }
}

/// Minimum-ratio row for the entering column; ties on the right-hand side
/// are broken by comparing the rows of `B⁻¹` (the `w` columns) divided by
/// the pivot entry.
fn lex_min_ratio(t: &[f64], cols: usize, n: usize, col: usize, rhs: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..n {
        let a = t[i * cols + col];
        if a <= PIVOT_EPS {
            continue;
        }
        best = Some(match best {
            None => i,
            Some(b) => {
                let ab = t[b * cols + col];
                let key = |r: usize, k: usize, piv: f64| {
                    if k == 0 {
                        t[r * cols + rhs] / piv
                    } else {
                        t[r * cols + (k - 1)] / piv
                    }
                };
                let mut choice = b;
                for k in 0..=n {
                    let (ki, kb) = (key(i, k, a), key(b, k, ab));
                    let scale = ki.abs().max(kb.abs()).max(1.0);
                    if ki < kb - PIVOT_EPS * scale {
                        choice = i;
                        break;
                    }
                    if ki > kb + PIVOT_EPS * scale {
                        break;
                    }
                }
                choice
            }
        });
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(m: &[f64], q: &[f64]) -> LcpSolution {
        let n = q.len();
        let sol = LemkeSolver::new(n, m).solve(q).unwrap();
        for i in 0..n {
            assert!(sol.y[i] >= 0.0);
            assert!(sol.w[i] >= -1e-12, "w = {:?}", sol.w);
            assert!((sol.y[i] * sol.w[i]).abs() < 1e-12);
        }
        sol
    }

    #[test]
    fn interior_needs_no_push() {
        let sol = check(&[1.0, 0.0, -1.0, 1.0], &[0.2, 3.0]);
        assert_eq!(sol.y, vec![0.0, 0.0]);
        assert_eq!(sol.pivots, 0);
    }

    #[test]
    fn scalar_reflection() {
        let sol = check(&[1.0], &[-0.3]);
        assert!((sol.y[0] - 0.3).abs() < 1e-15);
        assert!(sol.w[0].abs() < 1e-15);
    }

    #[test]
    fn tandem_corner() {
        let sol = check(&[1.0, 0.0, -1.0, 1.0], &[-1.0, 0.5]);
        assert!((sol.y[0] - 1.0).abs() < 1e-14);
        assert!((sol.y[1] - 0.5).abs() < 1e-14);
        assert!(sol.w.iter().all(|w| w.abs() < 1e-14));
    }

    #[test]
    fn degenerate_ties() {
        // equal negative entries exercise the lexicographic rule
        check(&[2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0], &[-1.0, -1.0, -1.0]);
        check(&[1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, -1.0, 1.0], &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn completely_s_non_p() {
        // R = [[1,2],[1,1]]
        check(&[1.0, 2.0, 1.0, 1.0], &[-1.0, -0.2]);
        check(&[1.0, 2.0, 1.0, 1.0], &[0.5, -1.0]);
    }

    #[test]
    fn infeasible_lcp_reports_ray() {
        // M = [[-1]] and q = -1 has no solution
        let e = LemkeSolver::new(1, &[-1.0]).solve(&[-1.0]).unwrap_err();
        assert!(matches!(e, SrbmError::LcpRay { .. }));
    }
}
