//! Product-form quantities: the skew symmetry test, exponential rates `α`,
//! and the marginal rates `λ_i` obtained from the ray `θ^(i,r)`.
//!
//! The SRBM data enter through two polynomials,
//! `γ(θ) = −½⟨θ, Σθ⟩ − ⟨μ, θ⟩` and `γ_i(θ) = ⟨R^(i), θ⟩` with `R^(i)` the
//! `i`-th column of `R`. The line on which every `γ_k` with `k ≠ i`
//! vanishes meets the ellipse `{γ = 0}` at the origin and at
//! `θ^(i,r) = Δ_i (Qᵗ)^(i)`, where `(Qᵗ)^(i)` is the `i`-th row of
//! `Q = R⁻¹` and
//!
//! ```text
//! Δ_i = −2⟨μ, (Qᵗ)^(i)⟩ / ⟨(Qᵗ)^(i), Σ(Qᵗ)^(i)⟩.
//! ```
//!
//! When the `i`-th coordinate is independent of the rest, it is
//! exponential with rate `λ_i = Δ_i Q_ii = θ^(i,r)_i`.

use serde::Serialize;

use crate::error::{Result, SrbmError};
use crate::linalg::{self, Matrix, Vector};
use crate::model::SrbmData;
use crate::reduction::{self, ser_matrix};

/// Relative tolerance on the skew-symmetry residual.
pub const SKEW_REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct PolyEval {
    pub gamma: f64,
    pub gamma_i: Vec<f64>,
}

pub fn gamma(data: &SrbmData, theta: &Vector) -> f64 {
    -0.5 * theta.dot(&(data.sigma() * theta)) - data.mu().dot(theta)
}

pub fn evaluate_polys(data: &SrbmData, theta: &Vector) -> Result<PolyEval> {
    if theta.len() != data.dim() {
        return Err(SrbmError::Dimension(format!(
            "theta has length {}, model dimension is {}",
            theta.len(),
            data.dim()
        )));
    }
    Ok(PolyEval {
        gamma: gamma(data, theta),
        gamma_i: (data.r().transpose() * theta).iter().copied().collect(),
    })
}

/// `2Σ − R diag(R)⁻¹ diag(Σ) − diag(Σ) diag(R)⁻¹ Rᵗ`.
pub(crate) fn skew_defect(sigma: &Matrix, r: &Matrix) -> Result<Matrix> {
    let n = r.nrows();
    if let Some(i) = (0..n).find(|&i| r[(i, i)] == 0.0) {
        return Err(SrbmError::Precondition(format!(
            "R[{0},{0}] = 0, so R is not completely-S",
            i + 1
        )));
    }
    // diag(R)⁻¹ diag(Σ) as a vector of ratios
    let ratio = Vector::from_fn(n, |i, _| sigma[(i, i)] / r[(i, i)]);
    let scaled = Matrix::from_fn(n, n, |i, j| r[(i, j)] * ratio[j]);
    Ok(sigma * 2.0 - &scaled - scaled.transpose())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkewCheck {
    /// Frobenius norm of the skew-symmetry defect.
    pub skew_residual: f64,
    pub is_skew: bool,
}

pub fn skew_symmetry_check(data: &SrbmData) -> Result<SkewCheck> {
    let defect = skew_defect(data.sigma(), data.r())?;
    let skew_residual = defect.norm();
    Ok(SkewCheck {
        skew_residual,
        is_skew: skew_residual < SKEW_REL_TOL * data.sigma().norm(),
    })
}

/// `α = −2 diag(Σ)⁻¹ diag(R) R⁻¹μ`. These are the exponential rates of the
/// product-form distribution, but only when the data are skew symmetric;
/// the formula ignores every off-diagonal covariance.
pub fn alpha(data: &SrbmData) -> Result<Vector> {
    let q = reduction::workload_matrix(data)?;
    let qmu = q * data.mu();
    let (s, r) = (data.sigma(), data.r());
    Ok(Vector::from_fn(data.dim(), |i, _| {
        -2.0 * r[(i, i)] * qmu[i] / s[(i, i)]
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ray {
    pub theta: Vector,
    pub delta: f64,
}

fn ray_from_q(data: &SrbmData, q: &Matrix, i: usize) -> Ray {
    let row = q.row(i).transpose();
    let quad = row.dot(&(data.sigma() * &row));
    let delta = -2.0 * data.mu().dot(&row) / quad;
    Ray {
        theta: row * delta,
        delta,
    }
}

pub fn theta_ray(data: &SrbmData, i: usize) -> Result<Ray> {
    check_index(data, i)?;
    let q = reduction::workload_matrix(data)?;
    Ok(ray_from_q(data, &q, i))
}

fn check_index(data: &SrbmData, i: usize) -> Result<()> {
    if i >= data.dim() {
        return Err(SrbmError::Invalid(format!(
            "index {} out of range 1..={}",
            i + 1,
            data.dim()
        )));
    }
    Ok(())
}

/// `λ_i = Δ_i Q_ii`.
pub fn lambda_marginal(data: &SrbmData, i: usize) -> Result<f64> {
    check_index(data, i)?;
    let q = reduction::workload_matrix(data)?;
    if q[(i, i)] == 0.0 {
        return Err(SrbmError::Invalid(format!(
            "Q[{0},{0}] = 0; lambda_{0} is undefined",
            i + 1
        )));
    }
    Ok(ray_from_q(data, &q, i).delta * q[(i, i)])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductFormReport {
    pub skew_residual: f64,
    pub is_skew: bool,
    pub alpha: Vec<f64>,
    /// `None` where `Q_ii = 0`.
    pub lambda: Vec<Option<f64>>,
    pub delta: Vec<f64>,
    /// Column `i` is `θ^(i,r)`.
    #[serde(serialize_with = "ser_matrix")]
    pub rays: Matrix,
    pub interpretation: &'static str,
}

pub fn product_form_report(data: &SrbmData) -> Result<ProductFormReport> {
    let skew = skew_symmetry_check(data)?;
    let q = reduction::workload_matrix(data)?;
    let d = data.dim();
    let rays: Vec<Ray> = (0..d).map(|i| ray_from_q(data, &q, i)).collect();
    let lambda = (0..d)
        .map(|i| (q[(i, i)] != 0.0).then(|| rays[i].delta * q[(i, i)]))
        .collect();
    Ok(ProductFormReport {
        skew_residual: skew.skew_residual,
        is_skew: skew.is_skew,
        alpha: alpha(data)?.iter().copied().collect(),
        lambda,
        delta: rays.iter().map(|r| r.delta).collect(),
        rays: Matrix::from_fn(d, d, |row, col| rays[col].theta[row]),
        interpretation: "alpha gives product-form rates only when is_skew holds; \
                         lambda_i is the marginal rate when coordinate i is independent of the rest",
    })
}

/// The unique `Σ` with the given diagonal that satisfies skew symmetry
/// together with `R`. It is symmetric by construction but need not be
/// positive definite.
pub fn skew_symmetric_sigma(r: &Matrix, diag: &[f64]) -> Result<Matrix> {
    let n = linalg::ensure_square(r)?;
    if diag.len() != n {
        return Err(SrbmError::Dimension("diagonal length".into()));
    }
    if let Some(i) = (0..n).find(|&i| r[(i, i)] == 0.0) {
        return Err(SrbmError::Precondition(format!("R[{0},{0}] = 0", i + 1)));
    }
    Ok(Matrix::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else {
            0.5 * (r[(i, j)] * diag[j] / r[(j, j)] + diag[i] / r[(i, i)] * r[(j, i)])
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_tandem, TandemSpec};

    fn tandem(beta: &[f64], cv: &[f64]) -> SrbmData {
        build_tandem(&TandemSpec::new(beta.to_vec(), cv.to_vec()).unwrap()).unwrap()
    }

    fn diag_model(sigma: &[f64], mu: &[f64]) -> SrbmData {
        let d = sigma.len();
        SrbmData::new(
            Matrix::from_diagonal(&Vector::from_column_slice(sigma)),
            Vector::from_column_slice(mu),
            Matrix::identity(d, d),
        )
        .unwrap()
    }

    #[test]
    fn polys_vanish_at_origin() {
        let t = tandem(&[1.0, 1.5, 2.0], &[1.0, 2.0, 1.0]);
        let p = evaluate_polys(&t, &Vector::zeros(2)).unwrap();
        assert_eq!(p.gamma, 0.0);
        assert!(p.gamma_i.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gamma_one_dimensional() {
        let m = diag_model(&[2.0], &[-1.0]);
        let p = evaluate_polys(&m, &Vector::from_element(1, -1.0)).unwrap();
        assert_eq!(p.gamma, -2.0);
    }

    #[test]
    fn ray_zeroes_other_polynomials() {
        let t = tandem(&[1.0, 1.3, 1.8, 2.4], &[0.5, 1.2, 2.0, 0.7]);
        for i in 0..3 {
            let ray = theta_ray(&t, i).unwrap();
            let p = evaluate_polys(&t, &ray.theta).unwrap();
            assert!(p.gamma.abs() < 1e-12);
            for (k, g) in p.gamma_i.iter().enumerate() {
                if k == i {
                    assert!(g.abs() > 0.0);
                } else {
                    assert!(g.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn identity_and_diagonal_skew() {
        assert!(skew_symmetry_check(&diag_model(&[1.0, 4.0, 2.0], &[-1.0, -1.0, -1.0]))
            .unwrap()
            .is_skew);
    }

    #[test]
    fn tandem_skew_depends_on_first_two_cvs() {
        assert!(skew_symmetry_check(&tandem(&[1.0, 1.5, 2.0], &[1.0, 1.0, 1.0])).unwrap().is_skew);
        assert!(skew_symmetry_check(&tandem(&[1.0, 1.5, 2.0], &[1.3, 1.3, 0.4])).unwrap().is_skew);
        assert!(!skew_symmetry_check(&tandem(&[1.0, 1.5, 2.0], &[1.0, 2.0, 1.0])).unwrap().is_skew);
    }

    #[test]
    fn zero_diagonal_refused() {
        let m = SrbmData::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[-1.0, -1.0],
            &[vec![0.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        assert!(matches!(skew_symmetry_check(&m), Err(SrbmError::Precondition(_))));
    }

    #[test]
    fn alpha_tandem_two_matches_closed_form() {
        let (b, c) = ([1.0, 1.5, 2.0], [1.0, 1.0, 1.0]);
        let a = alpha(&tandem(&b, &c)).unwrap();
        let a1 = 2.0 * (b[1] - b[0]) / (b[0] * (c[0] * c[0] + c[1] * c[1]));
        let a2 = 2.0 * (b[2] - b[0]) / (b[0] * (c[1] * c[1] + c[2] * c[2]));
        assert!((a[0] - a1).abs() < 1e-14 && (a[1] - a2).abs() < 1e-14);
        assert!((a[0] - 0.5).abs() < 1e-14 && (a[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn alpha_unit_rates() {
        let a = alpha(&diag_model(&[2.0, 2.0, 2.0], &[-1.0, -1.0, -1.0])).unwrap();
        assert!(a.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn one_dimensional_ray() {
        let m = diag_model(&[3.0], &[-0.6]);
        let ray = theta_ray(&m, 0).unwrap();
        assert!((ray.theta[0] - 0.4).abs() < 1e-15);
        assert!((lambda_marginal(&m, 0).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn identity_ray() {
        let m = diag_model(&[1.0, 1.0, 1.0], &[-1.0, 0.0, 0.0]);
        let ray = theta_ray(&m, 0).unwrap();
        assert_eq!(ray.delta, 2.0);
        assert_eq!(ray.theta.as_slice(), &[2.0, 0.0, 0.0]);
    }

    #[test]
    fn tandem_second_ray_coordinate() {
        let (b, c) = ([1.0, 1.5, 2.0], [1.0, 2.0, 1.0]);
        let t = tandem(&b, &c);
        let lam2 = 2.0 * (b[2] - b[0]) / (b[0] * (c[0] * c[0] + c[2] * c[2]));
        assert!((theta_ray(&t, 1).unwrap().theta[1] - lam2).abs() < 1e-14);
        assert!((lambda_marginal(&t, 1).unwrap() - 1.0).abs() < 1e-14);
        assert!((alpha(&t).unwrap()[1] - 0.4).abs() < 1e-14);
    }

    #[test]
    fn skew_instance_alpha_equals_lambda() {
        let t = tandem(&[1.0, 1.5, 2.0, 3.0], &[1.0, 1.0, 2.0, 1.0]);
        let rep = product_form_report(&t).unwrap();
        assert!(!rep.is_skew);
        // the last coefficient only enters the diagonal
        let u = tandem(&[1.0, 1.5, 2.0, 3.0], &[1.0, 1.0, 1.0, 2.0]);
        assert!(product_form_report(&u).unwrap().is_skew);
        let s = tandem(&[1.0, 1.5, 2.0, 3.0], &[1.5, 1.5, 1.5, 1.5]);
        let rep = product_form_report(&s).unwrap();
        assert!(rep.is_skew);
        for (a, l) in rep.alpha.iter().zip(&rep.lambda) {
            assert!((a - l.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_q_diagonal_makes_lambda_undefined() {
        // R = [[1,1],[1,0]] has Q = [[0,1],[1,-1]]
        let m = SrbmData::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[-1.0, -1.0],
            &[vec![1.0, 1.0], vec![1.0, 0.5]],
        )
        .unwrap();
        assert!(lambda_marginal(&m, 0).is_ok());
        let m = SrbmData::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[-1.0, -1.0],
            &[vec![1.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        assert!(lambda_marginal(&m, 0).is_err());
    }

    #[test]
    fn constructed_sigma_is_skew() {
        let r = crate::linalg::matrix_from_rows(&[
            vec![1.0, -0.2, 0.0],
            vec![-0.5, 2.0, -0.1],
            vec![-0.3, -0.4, 1.5],
        ])
        .unwrap();
        let s = skew_symmetric_sigma(&r, &[2.0, 3.0, 1.0]).unwrap();
        assert!(skew_defect(&s, &r).unwrap().amax() < 1e-14);
    }
}
