//! SRBM primitives, partitions of the index set, model validation and the
//! tandem-queue family.
//!
//! Indices are 0-based throughout the library API. Serialized forms (JSON
//! model files and reports) use 1-based indices.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrbmError};
use crate::linalg::{self, Matrix, Vector};
use crate::matclass;
use crate::reduction;

/// Relative tolerance for the smallest eigenvalue of `Σ`.
pub const SPD_REL_TOL: f64 = 1e-10;
const SYMMETRY_REL_TOL: f64 = 1e-12;

/// Primitive data `(Σ, μ, R)` of a `d`-dimensional SRBM.
///
/// Construction only checks structure (shapes, finiteness, symmetry of
/// `Σ`). Positive definiteness, the completely-S property and stability
/// are verdicts of [`validate_srbm`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct SrbmData {
    sigma: Matrix,
    mu: Vector,
    r: Matrix,
}

/// On-disk layout of a model file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub d: usize,
    pub sigma: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub r: Vec<Vec<f64>>,
}

impl SrbmData {
    pub fn new(sigma: Matrix, mu: Vector, r: Matrix) -> Result<Self> {
        let d = mu.len();
        if d == 0 {
            return Err(SrbmError::Dimension("dimension must be positive".into()));
        }
        if sigma.shape() != (d, d) {
            return Err(SrbmError::Dimension(format!(
                "sigma is {}x{} but mu has length {d}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if r.shape() != (d, d) {
            return Err(SrbmError::Dimension(format!(
                "r is {}x{} but mu has length {d}",
                r.nrows(),
                r.ncols()
            )));
        }
        let finite = sigma.iter().chain(mu.iter()).chain(r.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(SrbmError::Invalid("non-finite entry in model".into()));
        }
        let scale = sigma.amax().max(f64::MIN_POSITIVE);
        if linalg::symmetry_residual(&sigma) > SYMMETRY_REL_TOL * scale {
            return Err(SrbmError::Invalid("sigma is not symmetric".into()));
        }
        Ok(Self { sigma, mu, r })
    }

    pub fn from_rows(sigma: &[Vec<f64>], mu: &[f64], r: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            linalg::matrix_from_rows(sigma)?,
            Vector::from_column_slice(mu),
            linalg::matrix_from_rows(r)?,
        )
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn mu(&self) -> &Vector {
        &self.mu
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }
}

impl TryFrom<ModelFile> for SrbmData {
    type Error = SrbmError;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.mu.len() != f.d || f.sigma.len() != f.d || f.r.len() != f.d {
            return Err(SrbmError::Dimension(format!(
                "d = {} but sigma has {} rows, mu has {} entries, r has {} rows",
                f.d,
                f.sigma.len(),
                f.mu.len(),
                f.r.len()
            )));
        }
        Self::from_rows(&f.sigma, &f.mu, &f.r)
    }
}

impl From<SrbmData> for ModelFile {
    fn from(m: SrbmData) -> Self {
        ModelFile {
            d: m.dim(),
            sigma: linalg::matrix_to_rows(&m.sigma),
            mu: m.mu.iter().copied().collect(),
            r: linalg::matrix_to_rows(&m.r),
        }
    }
}

/// Rates and coefficients of variation of a `d`-station tandem queue.
/// Index 0 is the external arrival stream, index `i` the service at
/// station `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TandemFile", into = "TandemFile")]
pub struct TandemSpec {
    beta: Vec<f64>,
    cv: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TandemFile {
    pub d: usize,
    pub beta: Vec<f64>,
    pub cv: Vec<f64>,
}

impl TandemSpec {
    pub fn new(beta: Vec<f64>, cv: Vec<f64>) -> Result<Self> {
        if beta.len() < 2 || beta.len() != cv.len() {
            return Err(SrbmError::Dimension(format!(
                "beta and cv must both have d + 1 >= 2 entries (got {} and {})",
                beta.len(),
                cv.len()
            )));
        }
        if let Some(i) = beta.iter().position(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(SrbmError::Invalid(format!("beta[{i}] must be positive")));
        }
        if let Some(i) = cv.iter().position(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(SrbmError::Invalid(format!("cv[{i}] must be nonnegative")));
        }
        if let Some(i) = (1..cv.len()).find(|&i| cv[i - 1] == 0.0 && cv[i] == 0.0) {
            return Err(SrbmError::Invalid(format!(
                "cv[{}] and cv[{i}] are both zero; sigma would be singular",
                i - 1
            )));
        }
        Ok(Self { beta, cv })
    }

    /// Number of stations.
    pub fn dim(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn cv(&self) -> &[f64] {
        &self.cv
    }

    /// `β_0 < β_i` for every station, equivalent to stability of the limit.
    pub fn is_stable(&self) -> bool {
        self.beta[1..].iter().all(|&b| self.beta[0] < b)
    }
}

impl TryFrom<TandemFile> for TandemSpec {
    type Error = SrbmError;

    fn try_from(f: TandemFile) -> Result<Self> {
        if f.beta.len() != f.d + 1 || f.cv.len() != f.d + 1 {
            return Err(SrbmError::Dimension(format!(
                "d = {} requires {} rates and cvs (got {} and {})",
                f.d,
                f.d + 1,
                f.beta.len(),
                f.cv.len()
            )));
        }
        Self::new(f.beta, f.cv)
    }
}

impl From<TandemSpec> for TandemFile {
    fn from(t: TandemSpec) -> Self {
        TandemFile {
            d: t.dim(),
            beta: t.beta,
            cv: t.cv,
        }
    }
}

/// Ordered split `(K, L)` of `{0, …, d-1}`; both sides non-empty and sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    k: Vec<usize>,
    l: Vec<usize>,
}

impl Partition {
    /// Builds `(K, J \ K)` from 0-based indices of `K`.
    pub fn new(d: usize, k: &[usize]) -> Result<Self> {
        let mut k = k.to_vec();
        k.sort_unstable();
        k.dedup();
        if let Some(&bad) = k.iter().find(|&&i| i >= d) {
            return Err(SrbmError::Invalid(format!(
                "index {} out of range 1..={d}",
                bad + 1
            )));
        }
        let l = linalg::complement(d, &k);
        if k.is_empty() || l.is_empty() {
            return Err(SrbmError::Invalid(
                "both sides of a partition must be non-empty".into(),
            ));
        }
        Ok(Self { k, l })
    }

    /// Builds a partition from 1-based `K` and `L`, checking that they cover
    /// `1..=d` exactly once.
    pub fn from_one_based(d: usize, k: &[usize], l: &[usize]) -> Result<Self> {
        let zero = |v: &[usize]| -> Result<Vec<usize>> {
            v.iter()
                .map(|&i| {
                    if i == 0 || i > d {
                        Err(SrbmError::Invalid(format!("index {i} out of range 1..={d}")))
                    } else {
                        Ok(i - 1)
                    }
                })
                .collect()
        };
        let kz = zero(k)?;
        let mut lz = zero(l)?;
        let p = Self::new(d, &kz)?;
        lz.sort_unstable();
        if lz != p.l {
            return Err(SrbmError::Invalid(format!(
                "K = {k:?} and L = {l:?} do not partition 1..={d}"
            )));
        }
        Ok(p)
    }

    /// Parses `"1,2/3"` (1-based K before the slash, L after). L may be
    /// omitted, in which case it is the complement of K.
    pub fn parse(d: usize, s: &str) -> Result<Self> {
        let list = |part: &str| -> Result<Vec<usize>> {
            part.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| SrbmError::Invalid(format!("bad index '{t}' in '{s}'")))
                })
                .collect()
        };
        match s.split_once('/') {
            Some((k, l)) => Self::from_one_based(d, &list(k)?, &list(l)?),
            None => {
                let k = list(s)?;
                let l: Vec<usize> = (1..=d).filter(|i| !k.contains(i)).collect();
                Self::from_one_based(d, &k, &l)
            }
        }
    }

    pub fn k(&self) -> &[usize] {
        &self.k
    }

    pub fn l(&self) -> &[usize] {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.k.len() + self.l.len()
    }

    pub fn swapped(&self) -> Self {
        Self {
            k: self.l.clone(),
            l: self.k.clone(),
        }
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |v: &[usize]| {
            v.iter()
                .map(|i| (i + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "{}/{}", join(&self.k), join(&self.l))
    }
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    k: Vec<usize>,
    l: Vec<usize>,
}

impl Serialize for Partition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PartitionRepr {
            k: self.k.iter().map(|i| i + 1).collect(),
            l: self.l.iter().map(|i| i + 1).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = PartitionRepr::deserialize(de)?;
        let d = repr.k.len() + repr.l.len();
        Partition::from_one_based(d, &repr.k, &repr.l).map_err(serde::de::Error::custom)
    }
}

/// Serializes 0-based index lists as 1-based.
pub(crate) mod one_based {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|i| i + 1))
    }

    pub mod option {
        use serde::Serializer;

        pub fn serialize<S: Serializer>(v: &Option<Vec<usize>>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => s.collect_seq(v.iter().map(|i| i + 1)),
                None => s.serialize_none(),
            }
        }
    }
}

/// Three independent verdicts on a model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub sigma_spd: bool,
    pub sigma_min_eigenvalue: f64,
    pub r_completely_s: bool,
    /// Smallest principal index set whose submatrix is not an S-matrix.
    #[serde(with = "one_based::option")]
    pub r_failing_subset: Option<Vec<usize>>,
    pub r_condition_number: f64,
    pub stable: bool,
}

pub fn validate_srbm(data: &SrbmData) -> Result<ValidationReport> {
    let (min_eig, max_eig) = linalg::symmetric_eigen_range(data.sigma());
    let sigma_spd = max_eig > 0.0 && min_eig > SPD_REL_TOL * max_eig.abs();
    let cs = matclass::is_completely_s(data.r())?;
    Ok(ValidationReport {
        sigma_spd,
        sigma_min_eigenvalue: min_eig,
        r_completely_s: cs.completely_s,
        r_failing_subset: cs.failing_subset,
        r_condition_number: linalg::condition_number(data.r()),
        stable: reduction::check_stability(data),
    })
}

/// Heavy-traffic limit of the tandem queue: unit lower-bidiagonal `R`,
/// tridiagonal `Σ`, and `μ_i = β_{i-1} − β_i`.
pub fn build_tandem(spec: &TandemSpec) -> Result<SrbmData> {
    let d = spec.dim();
    let b0 = spec.beta[0];
    let c2: Vec<f64> = spec.cv.iter().map(|c| c * c).collect();

    let r = Matrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else if j + 1 == i {
            -1.0
        } else {
            0.0
        }
    });
    // station i (0-based) sees cv index i for its input and i + 1 for service
    let sigma = Matrix::from_fn(d, d, |i, j| {
        if i == j {
            b0 * (c2[i] + c2[i + 1])
        } else if j + 1 == i {
            -b0 * c2[i]
        } else if i + 1 == j {
            -b0 * c2[j]
        } else {
            0.0
        }
    });
    let mu = Vector::from_fn(d, |i, _| spec.beta[i] - spec.beta[i + 1]);

    let (min_eig, max_eig) = linalg::symmetric_eigen_range(&sigma);
    if !(min_eig > SPD_REL_TOL * max_eig) {
        return Err(SrbmError::Invalid(format!(
            "tandem covariance is singular (smallest eigenvalue {min_eig:.3e})"
        )));
    }
    SrbmData::new(sigma, mu, r)
}
