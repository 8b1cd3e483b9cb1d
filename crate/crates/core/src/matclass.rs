//! Matrix classes used by SRBM theory: S, completely-S, P and M.
//!
//! A square `A` is an S-matrix when some `v > 0` has `Av > 0`; it is
//! completely-S when every principal submatrix is S. P-matrices have all
//! principal minors positive, and M-matrices are P-matrices whose
//! off-diagonal entries are nonpositive.
//!
//! The S test is a linear feasibility problem. By homogeneity `v > 0,
//! Av > 0` is solvable iff `v ≥ 0, Av ≥ 1` is (take `v + ε1` for small
//! `ε`), and the latter is decided by a phase-1 simplex.

use serde::Serialize;

use crate::error::{Result, SrbmError};
use crate::linalg::{self, Matrix};
use crate::lp;
use crate::model::one_based;

/// Largest dimension for which principal submatrices are enumerated.
pub const MAX_ENUMERATION_DIM: usize = 20;

/// LP optima at or below this are read as feasible.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Outcome of the S-matrix test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SWitness {
    pub feasible: bool,
    /// `v > 0` with `Av > 0` when feasible.
    pub v: Option<Vec<f64>>,
    /// The LP optimum was positive but within [`MARGINAL_TOL`] of zero.
    pub marginal: bool,
    /// Optimal value of the phase-1 problem.
    pub lp_infeasibility: f64,
}

pub fn is_s_matrix(a: &Matrix) -> Result<SWitness> {
    let n = linalg::ensure_square(a)?;
    if n == 0 {
        return Err(SrbmError::Dimension("empty matrix".into()));
    }
    // A v - t = 1 with v, t >= 0
    let mut cols = Matrix::zeros(n, 2 * n);
    cols.view_mut((0, 0), (n, n)).copy_from(a);
    for i in 0..n {
        cols[(i, n + i)] = -1.0;
    }
    let sol = lp::phase_one(&cols, &vec![1.0; n]);
    let v_lp = &sol.x[..n];

    if sol.infeasibility > MARGINAL_TOL {
        return Ok(SWitness {
            feasible: false,
            v: None,
            marginal: false,
            lp_infeasibility: sol.infeasibility,
        });
    }

    // A(v + ε1) = Av + εA1 ≥ 1 - ε‖A‖∞ - slack, so ε < 1/(2‖A‖∞) keeps it positive
    let row_sum_max = (0..n)
        .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut eps = 0.25 / row_sum_max.max(1.0);
    let mut v: Vec<f64> = v_lp.iter().map(|x| x + eps).collect();
    let mut av = a * nalgebra::DVector::from_column_slice(&v);
    // round-off or a marginal LP optimum may eat the margin; shrink ε until strict
    let mut tries = 0;
    while av.min() <= 0.0 && tries < 60 {
        eps *= 0.5;
        v = v_lp.iter().map(|x| x + eps).collect();
        av = a * nalgebra::DVector::from_column_slice(&v);
        tries += 1;
    }
    let strict = av.min() > 0.0 && v.iter().all(|&x| x > 0.0);
    Ok(SWitness {
        feasible: strict,
        v: strict.then_some(v),
        marginal: sol.infeasibility > 0.0 || !strict,
        lp_infeasibility: sol.infeasibility,
    })
}

/// Verdict of the completely-S test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompletelySReport {
    pub completely_s: bool,
    /// First non-S principal index set, in size-then-lexicographic order.
    #[serde(with = "one_based::option")]
    pub failing_subset: Option<Vec<usize>>,
    /// Some principal submatrix was only marginally S.
    pub marginal: bool,
}

pub fn is_completely_s(a: &Matrix) -> Result<CompletelySReport> {
    let n = linalg::ensure_square(a)?;
    if n > MAX_ENUMERATION_DIM {
        return Err(SrbmError::TooLarge {
            n,
            limit: MAX_ENUMERATION_DIM,
        });
    }
    let mut marginal = false;
    for subset in linalg::subsets_by_size(n) {
        let sub = linalg::submatrix(a, &subset, &subset);
        let w = is_s_matrix(&sub)?;
        marginal |= w.marginal;
        if !w.feasible {
            return Ok(CompletelySReport {
                completely_s: false,
                failing_subset: Some(subset),
                marginal,
            });
        }
    }
    Ok(CompletelySReport {
        completely_s: true,
        failing_subset: None,
        marginal,
    })
}

/// All `2^n − 1` principal minors exceed `1e-12 · max|a_ij|^k` for a
/// `k × k` minor.
pub fn is_p_matrix(a: &Matrix) -> Result<bool> {
    let n = linalg::ensure_square(a)?;
    if n > MAX_ENUMERATION_DIM {
        return Err(SrbmError::TooLarge {
            n,
            limit: MAX_ENUMERATION_DIM,
        });
    }
    let amax = a.amax();
    if amax == 0.0 {
        return Ok(false);
    }
    Ok(linalg::subsets_by_size(n).into_iter().all(|s| {
        let minor = linalg::determinant(&linalg::submatrix(a, &s, &s));
        minor > 1e-12 * amax.powi(s.len() as i32)
    }))
}

pub fn is_m_matrix(a: &Matrix) -> Result<bool> {
    let n = linalg::ensure_square(a)?;
    let off_diag_ok = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] <= 0.0));
    Ok(off_diag_ok && is_p_matrix(a)?)
}
