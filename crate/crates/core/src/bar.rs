//! Moment generating functions and the basic adjoint relationship (BAR).
//!
//! For a stationary distribution `π` with boundary measures `ν_i`, write
//! `φ(θ) = E_π e^{⟨θ,Z⟩}` and `φ_i` for the transform of `ν_i`. BAR reads
//!
//! ```text
//! γ(θ) φ(θ) = Σ_i γ_i(θ) φ_i(θ),   θ ≤ 0,
//! ```
//!
//! and conversely any probability measure and boundary measures that
//! satisfy it for all `θ ≤ 0` are the stationary pair. `φ_i` only depends
//! on the coordinates other than `i`, because `ν_i` lives on `{z_i = 0}`.

use crate::error::{Result, SrbmError};
use crate::linalg::Vector;
use crate::model::{Partition, SrbmData};
use crate::productform::{self, gamma};
use crate::reduction;

/// A (possibly partial) description of a stationary distribution through
/// its transforms. Empirical models are only defined on a finite grid and
/// return [`SrbmError::MissingGrid`] elsewhere.
pub trait MgfModel {
    fn dim(&self) -> usize;

    /// `φ(θ)`.
    fn phi(&self, theta: &[f64]) -> Result<f64>;

    /// `φ_i(θ)`.
    fn phi_boundary(&self, i: usize, theta: &[f64]) -> Result<f64>;

    /// `ν_i(ℝ^d_+)`, i.e. `φ_i(0)`.
    fn boundary_mass(&self) -> Vec<f64>;
}

/// Product of exponentials with the boundary measures BAR forces on it.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductFormMgf {
    rates: Vec<f64>,
    boundary_mass: Vec<f64>,
}

impl ProductFormMgf {
    pub fn new(rates: Vec<f64>, boundary_mass: Vec<f64>) -> Result<Self> {
        if rates.len() != boundary_mass.len() || rates.is_empty() {
            return Err(SrbmError::Dimension("rates and masses must have equal length".into()));
        }
        if let Some(i) = rates.iter().position(|&a| !(a > 0.0)) {
            return Err(SrbmError::Invalid(format!("rate {} is not positive", i + 1)));
        }
        Ok(Self {
            rates,
            boundary_mass,
        })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    fn factor(&self, j: usize, t: f64) -> f64 {
        self.rates[j] / (self.rates[j] - t)
    }
}

fn check_theta(d: usize, theta: &[f64]) -> Result<()> {
    if theta.len() != d {
        return Err(SrbmError::Dimension(format!(
            "theta has length {}, expected {d}",
            theta.len()
        )));
    }
    if let Some(i) = theta.iter().position(|&t| !(t <= 0.0)) {
        return Err(SrbmError::Invalid(format!(
            "theta[{}] = {} is outside the nonpositive orthant",
            i + 1,
            theta[i]
        )));
    }
    Ok(())
}

impl MgfModel for ProductFormMgf {
    fn dim(&self) -> usize {
        self.rates.len()
    }

    fn phi(&self, theta: &[f64]) -> Result<f64> {
        check_theta(self.dim(), theta)?;
        Ok((0..self.dim()).map(|j| self.factor(j, theta[j])).product())
    }

    fn phi_boundary(&self, i: usize, theta: &[f64]) -> Result<f64> {
        check_theta(self.dim(), theta)?;
        let rest: f64 = (0..self.dim())
            .filter(|&j| j != i)
            .map(|j| self.factor(j, theta[j]))
            .product();
        Ok(self.boundary_mass[i] * rest)
    }

    fn boundary_mass(&self) -> Vec<f64> {
        self.boundary_mass.clone()
    }
}

/// Product-form model of a skew-symmetric, stable SRBM: rates `α`, and
/// boundary masses `−(Qμ)_i`.
pub fn product_form_model(data: &SrbmData) -> Result<ProductFormMgf> {
    let skew = productform::skew_symmetry_check(data)?;
    if !skew.is_skew {
        return Err(SrbmError::Precondition(format!(
            "data are not skew symmetric (residual {:.3e}); a product-form model would not satisfy BAR",
            skew.skew_residual
        )));
    }
    if !reduction::check_stability(data) {
        return Err(SrbmError::Precondition("data are not stable".into()));
    }
    let q = reduction::workload_matrix(data)?;
    let mass = (q * data.mu()).iter().map(|x| -x).collect();
    ProductFormMgf::new(productform::alpha(data)?.iter().copied().collect(), mass)
}

/// `γ(θ)φ(θ) − Σ_i γ_i(θ)φ_i(θ)`.
pub fn bar_residual(data: &SrbmData, model: &dyn MgfModel, theta: &[f64]) -> Result<f64> {
    let d = data.dim();
    if model.dim() != d {
        return Err(SrbmError::Dimension("model and data dimensions differ".into()));
    }
    check_theta(d, theta)?;
    let t = Vector::from_column_slice(theta);
    let gi = data.r().transpose() * &t;
    let mut rhs = 0.0;
    for i in 0..d {
        if gi[i] != 0.0 {
            rhs += gi[i] * model.phi_boundary(i, theta)?;
        }
    }
    Ok(gamma(data, &t) * model.phi(theta)? - rhs)
}

/// `θ` with the coordinates outside `set` replaced by zero.
pub fn lift(theta: &[f64], set: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; theta.len()];
    for &i in set {
        out[i] = theta[i];
    }
    out
}

/// For `j ∈ K`: `φ_j(θ) − φ_j(θ^K lifted) · φ(θ^L lifted)`, which vanishes
/// when `Z^K` and `Z^L` are independent.
pub fn palm_factorization_residual(
    model: &dyn MgfModel,
    partition: &Partition,
    theta: &[f64],
) -> Result<Vec<f64>> {
    check_theta(model.dim(), theta)?;
    let tk = lift(theta, partition.k());
    let tl = lift(theta, partition.l());
    let phi_l = model.phi(&tl)?;
    partition
        .k()
        .iter()
        .map(|&j| Ok(model.phi_boundary(j, theta)? - model.phi_boundary(j, &tk)? * phi_l))
        .collect()
}
