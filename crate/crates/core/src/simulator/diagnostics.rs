//! Checks run on simulation output: factorization of the empirical
//! transform across a partition, weak independence through convolution,
//! reduced-model cross-validation, exponential marginals and the BAR
//! residual on the grid.
//!
//! Nonlinear statistics get bootstrap standard errors from resampling
//! blocks; statistics that are ratios of block sums use batch means.

use serde::Serialize;

use super::stats::{self, Estimate};
use super::{simulate, Block, BlockPool, EmpiricalMgf, SimConfig, SimResult};
use crate::bar::lift;
use crate::error::{Result, SrbmError};
use crate::linalg::Vector;
use crate::matclass;
use crate::model::{one_based, Partition, SrbmData};
use crate::productform;
use crate::reduction;
use crate::decomposition;

pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Width of the agreement bands, in standard errors.
pub const BAND: f64 = 2.0;

fn bootstrap_seed(result: &SimResult, salt: u64) -> u64 {
    result.config.seed ^ 0x9e37_79b9_7f4a_7c15 ^ salt
}

fn check_dim(result: &SimResult, p: &Partition) -> Result<()> {
    if p.dim() != result.dim {
        return Err(SrbmError::Dimension(format!(
            "partition covers {} coordinates, simulation has {}",
            p.dim(),
            result.dim
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceEntry {
    /// 1-based
    pub i: usize,
    /// 1-based
    pub j: usize,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub theta: Vec<f64>,
    pub residual: f64,
    pub se: f64,
    pub within_band: bool,
}

impl ResidualPoint {
    fn new(theta: Vec<f64>, residual: f64, se: f64) -> Self {
        Self {
            theta,
            residual,
            se,
            within_band: residual.abs() <= BAND * se,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndependenceVerdict {
    ConsistentWithIndependence,
    InconsistentWithIndependence,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub partition: Partition,
    pub cross_covariances: Vec<CovarianceEntry>,
    /// `φ̂(θ) − φ̂(θ^K)φ̂(θ^L)` at grid points with both parts nonzero.
    pub residuals: Vec<ResidualPoint>,
    pub outside_band: usize,
    pub verdict: IndependenceVerdict,
}

/// Compares the empirical transform with the product of its restrictions
/// to `K` and `L`.
pub fn independence_diagnostics(result: &SimResult, partition: &Partition) -> Result<IndependenceReport> {
    check_dim(result, partition)?;
    let model = EmpiricalMgf::from_result(result);
    let mut triples = Vec::new();
    let mut missing: Vec<Vec<f64>> = Vec::new();
    for (p, t) in result.theta_grid.iter().enumerate() {
        let tk = lift(t, partition.k());
        let tl = lift(t, partition.l());
        if tk.iter().all(|&x| x == 0.0) || tl.iter().all(|&x| x == 0.0) {
            continue;
        }
        match (model.position(&tk), model.position(&tl)) {
            (Some(a), Some(b)) => triples.push((p, a, b)),
            (a, b) => {
                for (pos, pt) in [(a, tk), (b, tl)] {
                    if pos.is_none() && !missing.contains(&pt) {
                        missing.push(pt);
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(SrbmError::MissingGrid(missing));
    }
    if triples.is_empty() {
        return Err(SrbmError::Precondition(
            "grid has no point with nonzero K and L parts".into(),
        ));
    }

    let pool = BlockPool::new(&result.blocks);
    let phi = &result.empirical_mgf;
    let ses = stats::bootstrap_se(
        result.blocks.len(),
        BOOTSTRAP_RESAMPLES,
        bootstrap_seed(result, 1),
        |w| {
            triples
                .iter()
                .map(|&(p, a, b)| {
                    let f = |q: usize| pool.weighted(|blk: &Block| blk.mgf[q], w);
                    f(p) - f(a) * f(b)
                })
                .collect()
        },
    );
    let residuals: Vec<ResidualPoint> = triples
        .iter()
        .zip(ses)
        .map(|(&(p, a, b), se)| {
            ResidualPoint::new(
                result.theta_grid[p].clone(),
                phi[p].value - phi[a].value * phi[b].value,
                se,
            )
        })
        .collect();
    let outside_band = residuals.iter().filter(|r| !r.within_band).count();
    let cross_covariances = partition
        .k()
        .iter()
        .flat_map(|&i| partition.l().iter().map(move |&j| (i, j)))
        .map(|(i, j)| CovarianceEntry {
            i: i + 1,
            j: j + 1,
            estimate: result.cov_z[i][j],
        })
        .collect();
    Ok(IndependenceReport {
        partition: partition.clone(),
        cross_covariances,
        residuals,
        outside_band,
        verdict: if outside_band == 0 {
            IndependenceVerdict::ConsistentWithIndependence
        } else {
            IndependenceVerdict::InconsistentWithIndependence
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvolutionReport {
    pub partition: Partition,
    /// `(Q^{KK})⁻¹ Q^{KL}` rows.
    pub coupling: Vec<Vec<f64>>,
    /// `E e^{⟨θ, Z^K + W^K⟩} − E e^{⟨θ,Z^K⟩} E e^{⟨θ,W^K⟩}` over `θ ≤ 0` on `K`.
    pub residuals: Vec<ResidualPoint>,
    pub outside_band: usize,
}

/// Residuals of the MGF factorization of `Z^K + W^K`, where
/// `W^K = (Q^{KK})⁻¹ Q^{KL} Z^L`. Needs a run with
/// [`SimConfig::convolution`] set to the same partition.
pub fn convolution_independence_diagnostic(
    result: &SimResult,
    partition: &Partition,
) -> Result<ConvolutionReport> {
    check_dim(result, partition)?;
    let rec = result
        .convolution
        .as_ref()
        .filter(|c| &c.partition == partition)
        .ok_or_else(|| {
            SrbmError::Precondition(format!(
                "simulation did not record the convolution terms for partition {partition}"
            ))
        })?;
    let m = rec.grid.len();
    let points: Vec<usize> = (0..m).filter(|&p| rec.grid[p].iter().any(|&x| x != 0.0)).collect();
    let pool = BlockPool::new(&result.blocks);
    let resid = |f: &dyn Fn(usize) -> f64, p: usize| f(p) - f(m + p) * f(2 * m + p);
    let ses = stats::bootstrap_se(
        result.blocks.len(),
        BOOTSTRAP_RESAMPLES,
        bootstrap_seed(result, 2),
        |w| {
            let f = |q: usize| pool.weighted(|b: &Block| b.conv[q], w);
            points.iter().map(|&p| resid(&f, p)).collect()
        },
    );
    let f = |q: usize| pool.ratio(|b: &Block| b.conv[q]).value;
    let residuals: Vec<ResidualPoint> = points
        .iter()
        .zip(ses)
        .map(|(&p, se)| ResidualPoint::new(rec.grid[p].clone(), resid(&f, p), se))
        .collect();
    let l = partition.l().len();
    Ok(ConvolutionReport {
        partition: partition.clone(),
        coupling: rec.coupling.chunks(l).map(<[f64]>::to_vec).collect(),
        outside_band: residuals.iter().filter(|r| !r.within_band).count(),
        residuals,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub quantity: String,
    pub full: Estimate,
    pub reduced: Estimate,
    pub within_band: bool,
}

impl Comparison {
    fn new(quantity: String, full: Estimate, reduced: Estimate) -> Self {
        Self {
            quantity,
            full,
            reduced,
            within_band: full.agrees_with(&reduced, BAND),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducedSide {
    #[serde(with = "one_based")]
    pub u: Vec<usize>,
    pub completely_s: bool,
    #[serde(with = "one_based::option")]
    pub failing_subset: Option<Vec<usize>>,
    /// Empty when the reduced reflection matrix is not completely-S.
    pub means: Vec<Comparison>,
    pub covariances: Vec<Comparison>,
    pub mgf: Vec<Comparison>,
    pub all_within_band: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossValidationReport {
    pub partition: Partition,
    /// `None` when the decomposability check itself failed.
    pub decomposable: Option<bool>,
    pub sides: Vec<ReducedSide>,
    pub notes: Vec<String>,
}

/// Simulates the full model and both reduced models and compares the
/// marginals of `Z^U` with the reduced simulations.
pub fn cross_validate_reduction(
    data: &SrbmData,
    partition: &Partition,
    config: &SimConfig,
) -> Result<CrossValidationReport> {
    let full = simulate(data, config)?;
    cross_validate_with(data, partition, &full)
}

/// As [`cross_validate_reduction`] with an existing full simulation. The
/// reduced runs reuse its configuration with shifted seeds.
pub fn cross_validate_with(
    data: &SrbmData,
    partition: &Partition,
    full: &SimResult,
) -> Result<CrossValidationReport> {
    check_dim(full, partition)?;
    let mut notes = Vec::new();
    let decomposable = match decomposition::check_decomposability(data, partition) {
        Ok(r) => Some(r.decomposable),
        Err(e) => {
            notes.push(format!("decomposability check failed: {e}"));
            None
        }
    };
    if decomposable != Some(true) {
        notes.push("partition is not known to be decomposable; comparisons are exploratory".into());
    }
    let full_model = EmpiricalMgf::from_result(full);
    let mut sides = Vec::new();
    for (side, u) in [partition.k(), partition.l()].into_iter().enumerate() {
        let reduced = reduction::reduce(data, u)?;
        let cs = matclass::is_completely_s(&reduced.r_u)?;
        if !cs.completely_s {
            notes.push(format!(
                "reduced reflection matrix for U = {:?} is not completely-S",
                u.iter().map(|i| i + 1).collect::<Vec<_>>()
            ));
            sides.push(ReducedSide {
                u: u.to_vec(),
                completely_s: false,
                failing_subset: cs.failing_subset,
                means: Vec::new(),
                covariances: Vec::new(),
                mgf: Vec::new(),
                all_within_band: false,
            });
            continue;
        }
        // grid points supported on U, projected to U
        let on_u: Vec<&Vec<f64>> = full
            .theta_grid
            .iter()
            .filter(|t| t.iter().enumerate().all(|(i, &x)| x == 0.0 || u.contains(&i)))
            .collect();
        let grid: Vec<Vec<f64>> = on_u.iter().map(|t| u.iter().map(|&i| t[i]).collect()).collect();
        let cfg = SimConfig {
            seed: full.config.seed.wrapping_add(1_000_003 * (side as u64 + 1)),
            theta_grid: grid.clone(),
            convolution: None,
            record_every: None,
            ..full.config.clone()
        };
        let red = simulate(&reduced.to_srbm()?, &cfg)?;
        let red_model = EmpiricalMgf::from_result(&red);

        let means = u
            .iter()
            .enumerate()
            .map(|(a, &i)| Comparison::new(format!("mean z{}", i + 1), full.mean_z[i], red.mean_z[a]))
            .collect::<Vec<_>>();
        let mut covariances = Vec::new();
        for (a, &i) in u.iter().enumerate() {
            for (b, &j) in u.iter().enumerate().skip(a) {
                covariances.push(Comparison::new(
                    format!("cov z{} z{}", i + 1, j + 1),
                    full.cov_z[i][j],
                    red.cov_z[a][b],
                ));
            }
        }
        let mut mgf = Vec::new();
        for (t, tu) in on_u.iter().zip(&grid) {
            if tu.iter().all(|&x| x == 0.0) {
                continue;
            }
            mgf.push(Comparison::new(
                format!("phi {tu:?}"),
                full_model.phi_estimate(t)?,
                red_model.phi_estimate(tu)?,
            ));
        }
        let all_within_band = means
            .iter()
            .chain(&covariances)
            .chain(&mgf)
            .all(|c| c.within_band);
        sides.push(ReducedSide {
            u: u.to_vec(),
            completely_s: true,
            failing_subset: None,
            means,
            covariances,
            mgf,
            all_within_band,
        });
    }
    Ok(CrossValidationReport {
        partition: partition.clone(),
        decomposable,
        sides,
        notes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KsReport {
    /// 1-based
    pub coordinate: usize,
    pub rate: f64,
    /// `sup |F̂ − F|` over histogram edges
    pub statistic: f64,
    /// `Var(Z_i) / SE(mean)²`
    pub effective_samples: f64,
    pub critical_value: f64,
    pub level: f64,
    pub pass: bool,
}

/// Kolmogorov–Smirnov comparison of the marginal histogram of coordinate
/// `i` with `Exponential(rate)`. Autocorrelation is accounted for by an
/// effective sample size from the batch means error of the mean.
pub fn exponential_ks_test(result: &SimResult, i: usize, rate: f64, level: f64) -> Result<KsReport> {
    if i >= result.dim {
        return Err(SrbmError::Dimension(format!("coordinate {} out of range", i + 1)));
    }
    if !(rate > 0.0) || !(level > 0.0 && level < 1.0) {
        return Err(SrbmError::Invalid("rate must be positive and level in (0,1)".into()));
    }
    let h = &result.marginal_histograms[i];
    let mut cum = 0.0;
    let mut d = 0.0f64;
    for (k, f) in h.fractions.iter().enumerate() {
        cum += f;
        let x = (k + 1) as f64 * h.bin_width;
        d = d.max((cum - (1.0 - (-rate * x).exp())).abs());
    }
    let var = result.cov_z[i][i].value;
    let se = result.mean_z[i].se;
    let n_eff = var / (se * se);
    let critical = (-(level / 2.0).ln() / 2.0).sqrt() / n_eff.sqrt();
    Ok(KsReport {
        coordinate: i + 1,
        rate,
        statistic: d,
        effective_samples: n_eff,
        critical_value: critical,
        level,
        pass: d <= critical,
    })
}

/// `γ(θ)φ̂(θ) − Σ_i γ_i(θ)φ̂_i(θ)` at each grid point. The residual is a
/// ratio of block sums, so its error comes from batch means.
pub fn empirical_bar_residuals(data: &SrbmData, result: &SimResult) -> Result<Vec<ResidualPoint>> {
    if data.dim() != result.dim {
        return Err(SrbmError::Dimension("model and simulation dimensions differ".into()));
    }
    let d = result.dim;
    let g = result.theta_grid.len();
    let pool = BlockPool::new(&result.blocks);
    result
        .theta_grid
        .iter()
        .enumerate()
        .map(|(p, t)| {
            let tv = Vector::from_column_slice(t);
            let polys = productform::evaluate_polys(data, &tv)?;
            let est = pool.ratio(|b| {
                polys.gamma * b.mgf[p]
                    - (0..d)
                        .map(|i| polys.gamma_i[i] * b.boundary_mgf[i * g + p])
                        .sum::<f64>()
            });
            Ok(ResidualPoint::new(t.clone(), est.value, est.se))
        })
        .collect()
}

/// Per `j ∈ K` and grid point: `φ̂_j(θ) − φ̂_j(θ^K)φ̂(θ^L)` with bootstrap
/// errors, at points whose `L` part is nonzero.
pub fn empirical_palm_residuals(result: &SimResult, partition: &Partition) -> Result<Vec<(usize, ResidualPoint)>> {
    check_dim(result, partition)?;
    let model = EmpiricalMgf::from_result(result);
    let g = result.theta_grid.len();
    let mut cases = Vec::new();
    let mut missing = Vec::new();
    for (p, t) in result.theta_grid.iter().enumerate() {
        let tk = lift(t, partition.k());
        let tl = lift(t, partition.l());
        if tl.iter().all(|&x| x == 0.0) {
            continue;
        }
        match (model.position(&tk), model.position(&tl)) {
            (Some(a), Some(b)) => {
                for &j in partition.k() {
                    cases.push((j, p, a, b));
                }
            }
            _ => missing.push(t.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(SrbmError::MissingGrid(missing));
    }
    let pool = BlockPool::new(&result.blocks);
    let eval = |f: &dyn Fn(&dyn Fn(&Block) -> f64) -> f64, (j, p, a, b): (usize, usize, usize, usize)| {
        f(&|blk: &Block| blk.boundary_mgf[j * g + p]) - f(&|blk: &Block| blk.boundary_mgf[j * g + a]) * f(&|blk: &Block| blk.mgf[b])
    };
    let ses = stats::bootstrap_se(
        result.blocks.len(),
        BOOTSTRAP_RESAMPLES,
        bootstrap_seed(result, 3),
        |w| {
            let f = |h: &dyn Fn(&Block) -> f64| pool.weighted(h, w);
            cases.iter().map(|&c| eval(&f, c)).collect()
        },
    );
    let f = |h: &dyn Fn(&Block) -> f64| pool.ratio(h).value;
    Ok(cases
        .iter()
        .zip(ses)
        .map(|(&c, se)| (c.0, ResidualPoint::new(result.theta_grid[c.1].clone(), eval(&f, c), se)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_tandem, TandemSpec};

    fn tandem(beta: &[f64], cv: &[f64]) -> SrbmData {
        build_tandem(&TandemSpec::new(beta.to_vec(), cv.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn missing_lifted_points_are_listed() {
        let t = tandem(&[1.0, 1.5, 2.0], &[1.0, 1.0, 1.0]);
        let cfg = SimConfig::new(0.02, 5_000)
            .with_replications(1)
            .with_theta_grid(vec![vec![0.0, 0.0], vec![-0.5, -0.5]]);
        let r = simulate(&t, &cfg).unwrap();
        let p = Partition::new(2, &[0]).unwrap();
        match independence_diagnostics(&r, &p) {
            Err(SrbmError::MissingGrid(pts)) => {
                assert!(pts.contains(&vec![-0.5, 0.0]) && pts.contains(&vec![0.0, -0.5]));
            }
            other => panic!("expected missing grid, got {other:?}"),
        }
    }

    #[test]
    fn convolution_term_vanishes_for_two_station_tandem() {
        let t = tandem(&[1.0, 1.5, 2.0], &[1.0, 2.0, 1.0]);
        let p = Partition::new(2, &[0]).unwrap();
        let cfg = SimConfig::new(0.02, 20_000).with_replications(1).with_convolution(p.clone());
        let r = simulate(&t, &cfg).unwrap();
        let rep = convolution_independence_diagnostic(&r, &p).unwrap();
        assert_eq!(rep.coupling, vec![vec![0.0]]);
        assert!(rep.residuals.iter().all(|x| x.residual == 0.0));
        // a different partition was not recorded
        assert!(convolution_independence_diagnostic(&r, &p.swapped()).is_err());
    }

    #[test]
    fn bar_residual_at_origin_is_zero() {
        let t = tandem(&[1.0, 1.5, 2.0], &[1.0, 1.0, 1.0]);
        let r = simulate(&t, &SimConfig::new(0.02, 10_000).with_replications(1)).unwrap();
        let res = empirical_bar_residuals(&t, &r).unwrap();
        assert_eq!(res[0].theta, vec![0.0, 0.0]);
        assert_eq!(res[0].residual, 0.0);
    }

    #[test]
    fn ks_rejects_wrong_rate() {
        let m = SrbmData::from_rows(&[vec![2.0]], &[-1.0], &[vec![1.0]]).unwrap();
        let r = simulate(&m, &SimConfig::new(0.01, 200_000).with_replications(2)).unwrap();
        assert!(!exponential_ks_test(&r, 0, 2.0, 0.01).unwrap().pass);
        assert!(exponential_ks_test(&r, 1, 1.0, 0.01).is_err());
    }
}
