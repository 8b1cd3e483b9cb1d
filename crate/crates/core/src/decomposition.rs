//! Decomposability of the stationary distribution along a feed-forward
//! partition `(K, L)`, i.e. one with `R^{(K,L)} = 0`.
//!
//! With `D_K = diag(R^{(K,K)})` and `S_K = diag(Σ^{(K,K)})`, the two
//! checkable conditions are
//!
//! ```text
//! (1)  2Σ^{(K,K)} = R^{(K,K)} D_K⁻¹ S_K + S_K D_K⁻¹ (R^{(K,K)})ᵗ
//! (2)  2Σ^{(L,K)} = R^{(L,K)} S_K D_K⁻¹
//! ```
//!
//! (1) is skew symmetry of the `K` block. Together with a stationary
//! `(Σ^{(L,L)}, μ̃(L), R^{(L,L)})`-SRBM they give independence of `Z^K`
//! and `Z^L` with `Z^K` of product form; conversely those conclusions
//! force (1) and (2). Under (1) and (2) the correction terms of the
//! reduced covariance `Σ̃(L)` cancel, which is reported as condition (3).

use serde::Serialize;

use crate::error::{Result, SrbmError};
use crate::linalg::{self, Matrix};
use crate::matclass;
use crate::model::{Partition, SrbmData, TandemSpec};
use crate::productform::skew_defect;
use crate::reduction::{first_nonzero, Blocks};

/// Residuals are compared against `DECOMP_REL_TOL · ‖Σ‖_F`.
pub const DECOMP_REL_TOL: f64 = 1e-10;

/// Whether stability of the `L` block proves it has a stationary
/// distribution or is only a necessary condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationarityCertainty {
    NecessaryOnly,
    Sufficient,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompReport {
    pub partition: Partition,
    pub feedforward: bool,
    pub cond1_residual: f64,
    pub cond2_residual: f64,
    pub cond3_residual: f64,
    pub tolerance: f64,
    pub l_block_stable: bool,
    pub stationarity_certainty: StationarityCertainty,
    pub decomposable: bool,
}

/// `R^{(K,L)}` is exactly zero.
pub fn check_feedforward(data: &SrbmData, partition: &Partition) -> bool {
    partition
        .k()
        .iter()
        .all(|&i| partition.l().iter().all(|&j| data.r()[(i, j)] == 0.0))
}

/// The expression that must vanish for `Σ̃(L) = Σ^{(L,L)}`:
/// `A Σ^{(K,K)} Aᵗ − Σ^{(L,K)} Aᵗ − A (Σ^{(L,K)})ᵗ` with
/// `A = R^{(L,K)} (R^{(K,K)})⁻¹`.
pub fn condition3_matrix(data: &SrbmData, partition: &Partition) -> Result<Matrix> {
    let b = Blocks::new(data, partition)?;
    let a = &b.r_lk * &b.r_kk_inv;
    Ok(&a * &b.s_kk * a.transpose() - &b.s_lk * a.transpose() - &a * b.s_lk.transpose())
}

pub fn check_decomposability(data: &SrbmData, partition: &Partition) -> Result<DecompReport> {
    if partition.dim() != data.dim() {
        return Err(SrbmError::Dimension(format!(
            "partition covers {} indices, model has {}",
            partition.dim(),
            data.dim()
        )));
    }
    let (k, l) = (partition.k(), partition.l());
    if let Some((i, j)) = first_nonzero(&linalg::submatrix(data.r(), k, l)) {
        return Err(SrbmError::Precondition(format!(
            "partition {partition} is not feed-forward: R[{},{}] = {}",
            k[i] + 1,
            l[j] + 1,
            data.r()[(k[i], l[j])]
        )));
    }
    let b = Blocks::new(data, partition)?;

    let cond1_residual = skew_defect(&b.s_kk, &b.r_kk)?.norm();
    let ratio = Matrix::from_fn(k.len(), k.len(), |i, j| {
        if i == j {
            b.s_kk[(i, i)] / b.r_kk[(i, i)]
        } else {
            0.0
        }
    });
    let cond2_residual = (&b.s_lk * 2.0 - &b.r_lk * ratio).norm();
    let cond3_residual = condition3_matrix(data, partition)?.norm();

    let mu_k = linalg::subvector(data.mu(), k);
    let mu_l_tilde = linalg::subvector(data.mu(), l) - &b.r_lk * &b.r_kk_inv * mu_k;
    let r_ll = linalg::submatrix(data.r(), l, l);
    let l_block_stable = match linalg::invert(&r_ll, "R^(L,L)") {
        Ok(inv) => (inv * &mu_l_tilde).iter().all(|&x| x < 0.0),
        Err(_) => false,
    };
    let sufficient = l_block_stable
        && (matclass::is_m_matrix(&r_ll)?
            || (l.len() <= 2 && matclass::is_p_matrix(&r_ll)?));
    let stationarity_certainty = if sufficient {
        StationarityCertainty::Sufficient
    } else {
        StationarityCertainty::NecessaryOnly
    };

    let tolerance = DECOMP_REL_TOL * data.sigma().norm();
    Ok(DecompReport {
        partition: partition.clone(),
        feedforward: true,
        cond1_residual,
        cond2_residual,
        cond3_residual,
        tolerance,
        l_block_stable,
        stationarity_certainty,
        decomposable: cond1_residual < tolerance && cond2_residual < tolerance && l_block_stable,
    })
}

/// Every ordered feed-forward partition that passes the decomposability
/// check, smallest `L` first (ties broken by `K` in lexicographic order).
pub fn find_decompositions(data: &SrbmData) -> Result<Vec<DecompReport>> {
    let d = data.dim();
    if d > matclass::MAX_ENUMERATION_DIM {
        return Err(SrbmError::TooLarge {
            n: d,
            limit: matclass::MAX_ENUMERATION_DIM,
        });
    }
    let mut found = Vec::new();
    for k in linalg::subsets_by_size(d).into_iter().filter(|k| k.len() < d) {
        let p = Partition::new(d, &k)?;
        if !check_feedforward(data, &p) {
            continue;
        }
        match check_decomposability(data, &p) {
            Ok(rep) if rep.decomposable => found.push(rep),
            Ok(_) | Err(SrbmError::Singular { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    // subsets_by_size lists K by growing size, so reversing by |L| keeps
    // the lexicographic order within a size class
    found.sort_by_key(|r| r.partition.l().len());
    Ok(found)
}

/// Tandem specialisation: `K = {1, …, k}` decomposes iff `c_0 = … = c_k`.
pub fn tandem_decomposability(spec: &TandemSpec, k: usize) -> Result<bool> {
    let d = spec.dim();
    if k == 0 || k >= d {
        return Err(SrbmError::Invalid(format!("k must lie in 1..={}", d.saturating_sub(1))));
    }
    let c = spec.cv();
    let scale = c[..=k].iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(c[1..=k].iter().all(|&ci| (ci - c[0]).abs() <= 1e-12 * scale))
}
