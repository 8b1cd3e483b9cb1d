//! Workload matrix `Q = R⁻¹` and the lower-dimensional SRBM data that
//! describe a marginal of a decomposable stationary distribution.
//!
//! For a coordinate set `U` with `Q^{(U,U)}` invertible:
//!
//! ```text
//! Σ̃(U) = (Q^{(U,U)})⁻¹ (QΣQᵗ)^{(U,U)} ((Q^{(U,U)})⁻¹)ᵗ
//! μ̃(U) = (Q^{(U,U)})⁻¹ (Qμ)^U
//! R̃(U) = (Q^{(U,U)})⁻¹
//! ```

use serde::Serialize;

use crate::error::{Result, SrbmError};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{one_based, Partition, SrbmData};

/// Reduced primitives for the coordinate set `u` (0-based, ascending).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducedData {
    #[serde(with = "one_based")]
    pub u: Vec<usize>,
    #[serde(serialize_with = "ser_matrix")]
    pub sigma_u: Matrix,
    #[serde(serialize_with = "ser_vector")]
    pub mu_u: Vector,
    #[serde(serialize_with = "ser_matrix")]
    pub r_u: Matrix,
    #[serde(serialize_with = "ser_matrix")]
    pub q: Matrix,
}

impl ReducedData {
    /// The reduced model as a standalone SRBM of dimension `|U|`.
    pub fn to_srbm(&self) -> Result<SrbmData> {
        // symmetrise away the last-bit asymmetry of the triple product
        let s = (&self.sigma_u + self.sigma_u.transpose()) * 0.5;
        SrbmData::new(s, self.mu_u.clone(), self.r_u.clone())
    }
}

pub(crate) fn ser_matrix<S: serde::Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(linalg::matrix_to_rows(m))
}

pub(crate) fn ser_vector<S: serde::Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

pub fn workload_matrix(data: &SrbmData) -> Result<Matrix> {
    linalg::invert(data.r(), "reflection matrix R")
}

fn check_subset(d: usize, u: &[usize]) -> Result<Vec<usize>> {
    let mut u = u.to_vec();
    u.sort_unstable();
    u.dedup();
    if u.is_empty() {
        return Err(SrbmError::Invalid("reduction set must be non-empty".into()));
    }
    if let Some(&bad) = u.iter().find(|&&i| i >= d) {
        return Err(SrbmError::Invalid(format!(
            "index {} out of range 1..={d}",
            bad + 1
        )));
    }
    Ok(u)
}

pub fn reduce(data: &SrbmData, u: &[usize]) -> Result<ReducedData> {
    let u = check_subset(data.dim(), u)?;
    let q = workload_matrix(data)?;
    let r_u = linalg::invert(&linalg::submatrix(&q, &u, &u), "Q^(U,U)")?;

    let qsq = &q * data.sigma() * q.transpose();
    let sigma_u = &r_u * linalg::submatrix(&qsq, &u, &u) * r_u.transpose();
    let qmu = &q * data.mu();
    let mu_u = &r_u * linalg::subvector(&qmu, &u);

    Ok(ReducedData {
        u,
        sigma_u,
        mu_u,
        r_u,
        q,
    })
}

/// Closed-form reduction of the `L` block when `R^{(K,L)} = 0`, written
/// directly in terms of the blocks of `Σ`, `μ` and `R`.
pub fn reduce_feedforward(data: &SrbmData, partition: &Partition) -> Result<ReducedData> {
    let (k, l) = (partition.k(), partition.l());
    if partition.dim() != data.dim() {
        return Err(SrbmError::Dimension(format!(
            "partition covers {} indices, model has {}",
            partition.dim(),
            data.dim()
        )));
    }
    let r = data.r();
    if let Some((i, j)) = first_nonzero(&linalg::submatrix(r, k, l)) {
        return Err(SrbmError::Precondition(format!(
            "R^(K,L) must vanish but R[{},{}] = {}",
            k[i] + 1,
            l[j] + 1,
            r[(k[i], l[j])]
        )));
    }
    let q = workload_matrix(data)?;
    let blocks = Blocks::new(data, partition)?;

    // A = R^{(L,K)} (R^{(K,K)})⁻¹
    let a = &blocks.r_lk * &blocks.r_kk_inv;
    let sigma_u = &blocks.s_ll + &a * &blocks.s_kk * a.transpose()
        - &blocks.s_lk * a.transpose()
        - &a * blocks.s_lk.transpose();
    let mu_u = linalg::subvector(data.mu(), l) - &a * linalg::subvector(data.mu(), k);

    Ok(ReducedData {
        u: l.to_vec(),
        sigma_u,
        mu_u,
        r_u: linalg::submatrix(r, l, l),
        q,
    })
}

/// Position of the first nonzero entry, row-major.
pub(crate) fn first_nonzero(m: &Matrix) -> Option<(usize, usize)> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
        .find(|&(i, j)| m[(i, j)] != 0.0)
}

/// Partitioned blocks of `Σ` and `R` shared by the feed-forward formulas.
pub(crate) struct Blocks {
    pub s_kk: Matrix,
    pub s_lk: Matrix,
    pub s_ll: Matrix,
    pub r_kk: Matrix,
    pub r_lk: Matrix,
    pub r_kk_inv: Matrix,
}

impl Blocks {
    pub fn new(data: &SrbmData, p: &Partition) -> Result<Self> {
        let (k, l) = (p.k(), p.l());
        let r_kk = linalg::submatrix(data.r(), k, k);
        Ok(Self {
            s_kk: linalg::submatrix(data.sigma(), k, k),
            s_lk: linalg::submatrix(data.sigma(), l, k),
            s_ll: linalg::submatrix(data.sigma(), l, l),
            r_lk: linalg::submatrix(data.r(), l, k),
            r_kk_inv: linalg::invert(&r_kk, "R^(K,K)")?,
            r_kk,
        })
    }
}

/// `R` invertible and `R⁻¹μ < 0` entrywise.
pub fn check_stability(data: &SrbmData) -> bool {
    match workload_matrix(data) {
        Ok(q) => (q * data.mu()).iter().all(|&x| x < 0.0),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix_from_rows;
    use crate::model::{build_tandem, TandemSpec};

    fn tandem(beta: &[f64], cv: &[f64]) -> SrbmData {
        build_tandem(&TandemSpec::new(beta.to_vec(), cv.to_vec()).unwrap()).unwrap()
    }

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.shape() == b.shape() && (a - b).amax() <= tol
    }

    #[test]
    fn inverse_of_completely_s_example() {
        let m = SrbmData::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[-1.0, -1.0],
            &[vec![1.0, 2.0], vec![1.0, 1.0]],
        )
        .unwrap();
        let q = workload_matrix(&m).unwrap();
        let expect = matrix_from_rows(&[vec![-1.0, 2.0], vec![1.0, -1.0]]).unwrap();
        assert!(close(&q, &expect, 1e-14));
    }

    #[test]
    fn identity_and_tandem_workload() {
        let m = SrbmData::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[-1.0, -1.0],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        assert_eq!(workload_matrix(&m).unwrap(), Matrix::identity(2, 2));
        let t = tandem(&[1.0, 1.5, 2.0], &[1.0, 1.0, 1.0]);
        let expect = matrix_from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(close(&workload_matrix(&t).unwrap(), &expect, 1e-15));
    }

    #[test]
    fn singular_r_names_condition_number() {
        let m = SrbmData::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[-1.0, -1.0],
            &[vec![1.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        let e = workload_matrix(&m).unwrap_err();
        assert!(e.to_string().contains("condition number"));
        assert!(!check_stability(&m));
    }

    #[test]
    fn full_set_returns_primitives() {
        let t = tandem(&[1.0, 1.5, 2.0, 2.5], &[1.0, 0.5, 2.0, 3.0]);
        let red = reduce(&t, &[0, 1, 2]).unwrap();
        assert!(close(&red.sigma_u, t.sigma(), 1e-12));
        assert!(close(&red.r_u, t.r(), 1e-12));
        assert!((&red.mu_u - t.mu()).amax() < 1e-12);
    }

    #[test]
    fn tandem_singletons() {
        let t = tandem(&[1.0, 1.5, 2.0], &[1.0, 1.0, 1.0]);
        let first = reduce(&t, &[0]).unwrap();
        assert!((first.sigma_u[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((first.mu_u[0] + 0.5).abs() < 1e-14);
        assert!((first.r_u[(0, 0)] - 1.0).abs() < 1e-14);
        // Σ̃ = Σ11 + 2Σ12 + Σ22 = 2 - 2 + 2, μ̃ = μ1 + μ2
        let second = reduce(&t, &[1]).unwrap();
        assert!((second.sigma_u[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((second.mu_u[0] + 1.0).abs() < 1e-14);
        assert!((second.r_u[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn feedforward_tandem_two() {
        let t = tandem(&[1.0, 1.5, 2.0], &[1.0, 1.0, 1.0]);
        let p = Partition::new(2, &[0]).unwrap();
        let ff = reduce_feedforward(&t, &p).unwrap();
        assert_eq!(ff.r_u[(0, 0)], 1.0);
        assert!((ff.mu_u[0] - (t.mu()[0] + t.mu()[1])).abs() < 1e-14);
    }

    #[test]
    fn feedforward_block_diagonal() {
        let m = SrbmData::from_rows(
            &[vec![2.0, 0.0, 0.0], vec![0.0, 3.0, 0.5], vec![0.0, 0.5, 1.0]],
            &[-1.0, -2.0, -3.0],
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.2], vec![0.0, -0.3, 1.0]],
        )
        .unwrap();
        let p = Partition::new(3, &[0]).unwrap();
        let ff = reduce_feedforward(&m, &p).unwrap();
        assert!(close(&ff.sigma_u, &linalg::submatrix(m.sigma(), &[1, 2], &[1, 2]), 0.0));
        assert_eq!(ff.mu_u.as_slice(), &[-2.0, -3.0]);
    }

    #[test]
    fn feedforward_matches_general_formula_tandem_three() {
        let t = tandem(&[1.0, 1.4, 1.9, 2.2], &[1.0, 1.0, 1.0, 2.0]);
        let p = Partition::new(3, &[0, 1]).unwrap();
        let ff = reduce_feedforward(&t, &p).unwrap();
        let gen = reduce(&t, &[2]).unwrap();
        assert!(close(&ff.sigma_u, &gen.sigma_u, 1e-10));
        assert!((&ff.mu_u - &gen.mu_u).amax() < 1e-10);
        assert!(close(&ff.r_u, &gen.r_u, 1e-10));
    }

    #[test]
    fn feedforward_precondition() {
        let t = tandem(&[1.0, 1.5, 2.0, 2.5], &[1.0, 1.0, 1.0, 1.0]);
        let p = Partition::new(3, &[1]).unwrap();
        let e = reduce_feedforward(&t, &p).unwrap_err();
        assert!(matches!(e, SrbmError::Precondition(_)));
        assert!(e.to_string().contains("R[2,1]"));
    }

    #[test]
    fn singular_block_reported() {
        // Q = [[1,1],[1,1]] has Q^{(U,U)} fine, but pick R so Q^{({0},{0})} = 0
        let m = SrbmData::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[-1.0, -1.0],
            &[vec![1.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        // R⁻¹ = [[0,1],[1,-1]]
        let e = reduce(&m, &[0]).unwrap_err();
        assert!(matches!(e, SrbmError::Singular { .. }));
    }
}
