//! Monte Carlo simulation of the reflected process and stationary
//! estimates from it.
//!
//! Each replication starts at `Z(0) = 0`, discards `burn_in` steps and
//! splits the rest into `batches` equal blocks. Every block keeps raw
//! time-weighted sums, so means, covariances, MGF values and their batch
//! means standard errors are all derived from the same records, and the
//! diagnostics can bootstrap over blocks.
//!
//! Replication `r` uses the stream `ChaCha8Rng::seed_from_u64(seed + r)`.
//! Replications run in parallel but are combined in index order, so a
//! fixed configuration gives bit-identical results.

pub mod diagnostics;
pub mod stats;
pub mod step;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bar::MgfModel;
use crate::error::{Result, SrbmError};
use crate::linalg::{self, Matrix};
use crate::model::{Partition, SrbmData};
use crate::productform;
use crate::reduction;

pub use diagnostics::{
    convolution_independence_diagnostic, cross_validate_reduction, cross_validate_with,
    exponential_ks_test, independence_diagnostics, ConvolutionReport, CrossValidationReport,
    IndependenceReport, IndependenceVerdict, KsReport,
};
pub use stats::Estimate;
pub use step::{reflect_step, Reflector, Scheme, StepOutcome};

/// Relative complementarity tolerance for the pathwise check.
pub const COMPLEMENTARITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    /// Steps per replication, burn-in included.
    pub steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub replications: usize,
    /// Points `θ ≤ 0` for the empirical transforms. Empty means
    /// [`default_theta_grid`].
    #[serde(default)]
    pub theta_grid: Vec<Vec<f64>>,
    #[serde(default)]
    pub scheme: Scheme,
    pub batches: usize,
    pub histogram_bins: usize,
    /// Record `Z^K + W^K` for [`convolution_independence_diagnostic`].
    #[serde(default)]
    pub convolution: Option<Partition>,
    /// Keep every k-th state of replication 0.
    #[serde(default)]
    pub record_every: Option<usize>,
}

impl SimConfig {
    /// `steps` per replication with a 20% burn-in, 8 replications and
    /// 50 batches.
    pub fn new(dt: f64, steps: usize) -> Self {
        Self {
            dt,
            steps,
            burn_in: steps / 5,
            seed: 0,
            replications: 8,
            theta_grid: Vec::new(),
            scheme: Scheme::default(),
            batches: 50,
            histogram_bins: 200,
            convolution: None,
            record_every: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replications(mut self, n: usize) -> Self {
        self.replications = n;
        self
    }

    pub fn with_burn_in(mut self, n: usize) -> Self {
        self.burn_in = n;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_theta_grid(mut self, grid: Vec<Vec<f64>>) -> Self {
        self.theta_grid = grid;
        self
    }

    pub fn with_convolution(mut self, partition: Partition) -> Self {
        self.convolution = Some(partition);
        self
    }

    fn validate(&self, d: usize) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SrbmError::Invalid(format!("dt = {} must be positive", self.dt)));
        }
        if self.burn_in >= self.steps {
            return Err(SrbmError::Invalid(format!(
                "burn-in {} must be smaller than steps {}",
                self.burn_in, self.steps
            )));
        }
        if self.replications == 0 {
            return Err(SrbmError::Invalid("need at least one replication".into()));
        }
        if self.batches < 2 || self.batches > self.steps - self.burn_in {
            return Err(SrbmError::Invalid(format!(
                "batch count {} must be between 2 and the number of recorded steps",
                self.batches
            )));
        }
        if self.histogram_bins == 0 {
            return Err(SrbmError::Invalid("histograms need at least one bin".into()));
        }
        if self.record_every == Some(0) {
            return Err(SrbmError::Invalid("record interval must be positive".into()));
        }
        for t in &self.theta_grid {
            if t.len() != d {
                return Err(SrbmError::Dimension(format!(
                    "grid point {t:?} does not have length {d}"
                )));
            }
            if t.iter().any(|&x| !(x <= 0.0)) {
                return Err(SrbmError::Invalid(format!("grid point {t:?} is not ≤ 0")));
            }
        }
        if let Some(p) = &self.convolution {
            if p.dim() != d {
                return Err(SrbmError::Dimension("convolution partition has wrong dimension".into()));
            }
        }
        Ok(())
    }
}

/// Per-coordinate scale for the default grid: the marginal rate `λ_i` when
/// it is defined and positive, else `α_i`, else 1.
pub fn grid_scales(data: &SrbmData) -> Vec<f64> {
    let alpha = productform::alpha(data).ok();
    (0..data.dim())
        .map(|i| {
            let lam = productform::lambda_marginal(data, i).ok();
            let a = alpha.as_ref().map(|a| a[i]);
            [lam, a]
                .into_iter()
                .flatten()
                .find(|x| *x > 0.0 && x.is_finite())
                .unwrap_or(1.0)
        })
        .collect()
}

const GRID_FACTORS: [f64; 4] = [0.0, -0.25, -0.5, -1.0];

/// Tensor grid `{0, −¼, −½, −1}·λ_i` for `d ≤ 5`; above that only the
/// points with at most two nonzero coordinates. Both are closed under
/// zeroing coordinates, so every lifted point is on the grid.
pub fn default_theta_grid(data: &SrbmData) -> Vec<Vec<f64>> {
    let scale = grid_scales(data);
    let d = scale.len();
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let nonzero = idx.iter().filter(|&&k| k != 0).count();
        if d <= 5 || nonzero <= 2 {
            out.push(
                idx.iter()
                    .zip(&scale)
                    .map(|(&k, s)| if k == 0 { 0.0 } else { GRID_FACTORS[k] * s })
                    .collect(),
            );
        }
        // odometer, last coordinate fastest
        let mut pos = d;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < GRID_FACTORS.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Evaluates `e^{⟨θ,z⟩}` on a fixed grid by caching one exponential per
/// distinct coordinate value.
#[derive(Clone, Debug)]
struct GridEvaluator {
    d: usize,
    /// distinct values of coordinate i
    values: Vec<Vec<f64>>,
    /// per grid point, index into `values[i]`
    index: Vec<Vec<usize>>,
    /// scratch: exp(values[i][k] * z_i)
    table: Vec<Vec<f64>>,
}

impl GridEvaluator {
    fn new(grid: &[Vec<f64>], d: usize) -> Self {
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); d];
        let index = grid
            .iter()
            .map(|t| {
                (0..d)
                    .map(|i| {
                        let v = t[i];
                        match values[i].iter().position(|&x| x == v) {
                            Some(k) => k,
                            None => {
                                values[i].push(v);
                                values[i].len() - 1
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        let table = values.iter().map(|v| vec![0.0; v.len()]).collect();
        Self {
            d,
            values,
            index,
            table,
        }
    }

    fn len(&self) -> usize {
        self.index.len()
    }

    fn load(&mut self, z: &[f64]) {
        for i in 0..self.d {
            for (t, &v) in self.table[i].iter_mut().zip(&self.values[i]) {
                *t = if v == 0.0 { 1.0 } else { (v * z[i]).exp() };
            }
        }
    }

    /// Adds `w · e^{⟨θ,z⟩}` for every grid point, skipping coordinate
    /// `skip` (treated as zero). Requires a prior [`load`](Self::load).
    fn accumulate(&self, out: &mut [f64], w: f64, skip: Option<usize>) {
        for (o, idx) in out.iter_mut().zip(&self.index) {
            let mut p = w;
            for (i, &k) in idx.iter().enumerate() {
                if Some(i) != skip {
                    p *= self.table[i][k];
                }
            }
            *o += p;
        }
    }
}

/// Raw sums over one batch of one replication.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Block {
    pub time: f64,
    /// `Σ z dt`
    pub z: Vec<f64>,
    /// `Σ z zᵗ dt`, row-major
    pub zz: Vec<f64>,
    /// `Σ Δy`
    pub dy: Vec<f64>,
    /// `Σ e^{⟨θ,z⟩} dt` per grid point
    pub mgf: Vec<f64>,
    /// `Σ e^{⟨θ,z̄⟩} Δy_i` with `z̄` the step midpoint and `z̄_i = 0`,
    /// index `i * grid + g`
    pub boundary_mgf: Vec<f64>,
    /// Convolution sums: `[sum, Z^K, W^K]` transforms per `K`-grid point.
    pub conv: Vec<f64>,
}

impl Block {
    fn new(d: usize, grid: usize, conv: usize) -> Self {
        Self {
            time: 0.0,
            z: vec![0.0; d],
            zz: vec![0.0; d * d],
            dy: vec![0.0; d],
            mgf: vec![0.0; grid],
            boundary_mgf: vec![0.0; d * grid],
            conv: vec![0.0; 3 * conv],
        }
    }
}

/// Time-weighted marginal histogram on `[0, bins · width)` plus overflow.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Fraction of recorded time per bin.
    pub fractions: Vec<f64>,
    pub overflow: f64,
}

/// Pathwise checks gathered over all recorded and burn-in steps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathChecks {
    pub min_z: f64,
    /// max over steps of `|⟨w, Δy⟩| / (1 + ‖z‖)`
    pub max_complementarity_gap: f64,
    pub y_nondecreasing: bool,
    pub lcp_solves: u64,
}

/// Convolution records: the `K`-coordinate grid and the transforms of
/// `Z^K + W^K`, `Z^K` and `W^K` per block.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionRecord {
    pub partition: Partition,
    /// `(Q^{KK})⁻¹ Q^{KL}`, row-major `|K| × |L|`
    pub coupling: Vec<f64>,
    pub grid: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimResult {
    pub dim: usize,
    pub config: SimConfig,
    /// Recorded time over all replications.
    pub total_time: f64,
    pub mean_z: Vec<Estimate>,
    pub cov_z: Vec<Vec<Estimate>>,
    /// `Y_i(T)/T` over recorded time.
    pub y_rate: Vec<Estimate>,
    pub theta_grid: Vec<Vec<f64>>,
    pub empirical_mgf: Vec<Estimate>,
    /// `d × grid`.
    pub empirical_boundary_mgf: Vec<Vec<Estimate>>,
    pub marginal_histograms: Vec<Histogram>,
    pub path_checks: PathChecks,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub blocks: Vec<Block>,
    #[serde(skip)]
    pub convolution: Option<ConvolutionRecord>,
    /// Thinned states of replication 0 as `(time, z)`.
    #[serde(skip)]
    pub samples: Vec<(f64, Vec<f64>)>,
}

/// Forward-only state of one replication: `Z(t)` and `Y(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

struct ReplicationOutput {
    blocks: Vec<Block>,
    hist: Vec<Vec<f64>>,
    checks: PathChecks,
    samples: Vec<(f64, Vec<f64>)>,
}

struct Setup<'a> {
    data: &'a SrbmData,
    config: &'a SimConfig,
    grid: &'a [Vec<f64>],
    bin_width: Vec<f64>,
    conv: Option<&'a ConvolutionRecord>,
}

fn run_replication(setup: &Setup<'_>, rep: usize) -> Result<ReplicationOutput> {
    let d = setup.data.dim();
    let cfg = setup.config;
    let mut reflector = Reflector::new(setup.data, cfg.dt, cfg.scheme)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(rep as u64));
    let mut eval = GridEvaluator::new(setup.grid, d);
    let g = eval.len();
    let conv_len = setup.conv.map_or(0, |c| c.grid.len());

    let recorded = cfg.steps - cfg.burn_in;
    let base = recorded / cfg.batches;
    let extra = recorded % cfg.batches;
    let mut blocks = Vec::with_capacity(cfg.batches);
    let bins = cfg.histogram_bins;
    let mut hist = vec![vec![0.0; bins + 1]; d];
    let mut checks = PathChecks {
        min_z: f64::INFINITY,
        max_complementarity_gap: 0.0,
        y_nondecreasing: true,
        lcp_solves: 0,
    };
    let mut samples = Vec::new();
    let mut state = SimState {
        z: vec![0.0; d],
        y: vec![0.0; d],
    };
    let mut dy = vec![0.0; d];
    let mut z_prev = vec![0.0; d];
    let mut z_mid = vec![0.0; d];
    let mut step_no = 0usize;
    let dt = cfg.dt;

    let mut advance = |state: &mut SimState, dy: &mut [f64], rng: &mut ChaCha8Rng| -> Result<()> {
        let gap = reflector
            .step_in_place(rng, &mut state.z, dy)
            .map_err(|e| SrbmError::Step {
                replication: rep as u64,
                step: step_no as u64,
                z: state.z.clone(),
                source: Box::new(e),
            })?;
        step_no += 1;
        let norm = state.z.iter().map(|x| x * x).sum::<f64>().sqrt();
        if dy.iter().any(|&v| v > 0.0) {
            checks.lcp_solves += 1;
        }
        checks.max_complementarity_gap = checks.max_complementarity_gap.max(gap / (1.0 + norm));
        for i in 0..d {
            if !(dy[i] >= 0.0) {
                checks.y_nondecreasing = false;
            }
            state.y[i] += dy[i];
            checks.min_z = checks.min_z.min(state.z[i]);
        }
        if rep == 0 {
            if let Some(k) = cfg.record_every {
                if step_no % k == 0 {
                    samples.push((step_no as f64 * dt, state.z.clone()));
                }
            }
        }
        Ok(())
    };

    for _ in 0..cfg.burn_in {
        advance(&mut state, &mut dy, &mut rng)?;
    }
    let mut s_vals = Vec::new();
    let mut zk_vals = Vec::new();
    let mut wk_vals = Vec::new();
    for b in 0..cfg.batches {
        let n = base + usize::from(b < extra);
        let mut blk = Block::new(d, g, conv_len);
        for _ in 0..n {
            z_prev.copy_from_slice(&state.z);
            advance(&mut state, &mut dy, &mut rng)?;
            let z = &state.z;
            blk.time += dt;
            for i in 0..d {
                blk.z[i] += z[i] * dt;
                for j in 0..d {
                    blk.zz[i * d + j] += z[i] * z[j] * dt;
                }
                let bin = ((z[i] / setup.bin_width[i]) as usize).min(bins);
                hist[i][bin] += dt;
            }
            eval.load(z);
            eval.accumulate(&mut blk.mgf, dt, None);
            if dy.iter().any(|&v| v > 0.0) {
                // pushes happen inside the step; the endpoint alone biases
                // the boundary transforms by O(√dt)
                for i in 0..d {
                    z_mid[i] = 0.5 * (z_prev[i] + z[i]);
                }
                eval.load(&z_mid);
            }
            for i in 0..d {
                if dy[i] > 0.0 {
                    blk.dy[i] += dy[i];
                    eval.accumulate(&mut blk.boundary_mgf[i * g..(i + 1) * g], dy[i], Some(i));
                }
            }
            if let Some(c) = setup.conv {
                convolution_terms(c, z, &mut s_vals, &mut zk_vals, &mut wk_vals);
                let m = c.grid.len();
                for (p, t) in c.grid.iter().enumerate() {
                    let dot = |v: &[f64]| t.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
                    blk.conv[p] += dot(&s_vals).exp() * dt;
                    blk.conv[m + p] += dot(&zk_vals).exp() * dt;
                    blk.conv[2 * m + p] += dot(&wk_vals).exp() * dt;
                }
            }
        }
        blocks.push(blk);
    }
    Ok(ReplicationOutput {
        blocks,
        hist,
        checks,
        samples,
    })
}

fn convolution_terms(
    c: &ConvolutionRecord,
    z: &[f64],
    s: &mut Vec<f64>,
    zk: &mut Vec<f64>,
    wk: &mut Vec<f64>,
) {
    let (k, l) = (c.partition.k(), c.partition.l());
    zk.clear();
    wk.clear();
    s.clear();
    for (a, &i) in k.iter().enumerate() {
        let w: f64 = l
            .iter()
            .enumerate()
            .map(|(b, &j)| c.coupling[a * l.len() + b] * z[j])
            .sum();
        zk.push(z[i]);
        wk.push(w);
        s.push(z[i] + w);
    }
}

fn convolution_record(data: &SrbmData, p: &Partition, grid: &[Vec<f64>]) -> Result<ConvolutionRecord> {
    let q = reduction::workload_matrix(data)?;
    let qkk = linalg::invert(&linalg::submatrix(&q, p.k(), p.k()), "Q^{KK}")?;
    let coupling: Matrix = qkk * linalg::submatrix(&q, p.k(), p.l());
    let mut kgrid: Vec<Vec<f64>> = Vec::new();
    for t in grid {
        let tk: Vec<f64> = p.k().iter().map(|&i| t[i]).collect();
        if !kgrid.contains(&tk) {
            kgrid.push(tk);
        }
    }
    Ok(ConvolutionRecord {
        partition: p.clone(),
        coupling: (0..coupling.nrows())
            .flat_map(|i| (0..coupling.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| coupling[(i, j)])
            .collect(),
        grid: kgrid,
    })
}

/// Runs all replications and pools them.
pub fn simulate(data: &SrbmData, config: &SimConfig) -> Result<SimResult> {
    let d = data.dim();
    config.validate(d)?;
    let mut warnings = Vec::new();
    let grid = if config.theta_grid.is_empty() {
        default_theta_grid(data)
    } else {
        config.theta_grid.clone()
    };

    let stable = reduction::check_stability(data);
    if !stable {
        warnings.push("model is not stable; stationary estimates are meaningless".into());
    } else {
        let q = reduction::workload_matrix(data)?;
        let qmu = q * data.mu();
        let slowest = qmu.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        let horizon = config.dt * config.steps as f64;
        if horizon < 10.0 / slowest {
            warnings.push(format!(
                "run length {horizon} is below the relaxation heuristic 10/min|(Qμ)_i| = {}",
                10.0 / slowest
            ));
        }
    }

    let scales = grid_scales(data);
    let bin_width: Vec<f64> = scales
        .iter()
        .map(|l| 8.0 / l / config.histogram_bins as f64)
        .collect();
    let conv = config
        .convolution
        .as_ref()
        .map(|p| convolution_record(data, p, &grid))
        .transpose()?;
    let setup = Setup {
        data,
        config,
        grid: &grid,
        bin_width: bin_width.clone(),
        conv: conv.as_ref(),
    };
    let outputs: Vec<ReplicationOutput> = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(&setup, r))
        .collect::<Result<_>>()?;

    let mut blocks = Vec::with_capacity(config.replications * config.batches);
    let mut hist = vec![vec![0.0; config.histogram_bins + 1]; d];
    let mut checks = PathChecks {
        min_z: f64::INFINITY,
        max_complementarity_gap: 0.0,
        y_nondecreasing: true,
        lcp_solves: 0,
    };
    let mut samples = Vec::new();
    for out in outputs {
        for i in 0..d {
            for (h, v) in hist[i].iter_mut().zip(&out.hist[i]) {
                *h += v;
            }
        }
        checks.min_z = checks.min_z.min(out.checks.min_z);
        checks.max_complementarity_gap = checks
            .max_complementarity_gap
            .max(out.checks.max_complementarity_gap);
        checks.y_nondecreasing &= out.checks.y_nondecreasing;
        checks.lcp_solves += out.checks.lcp_solves;
        if samples.is_empty() {
            samples = out.samples;
        }
        blocks.extend(out.blocks);
    }
    if checks.max_complementarity_gap > COMPLEMENTARITY_TOL {
        warnings.push(format!(
            "complementarity gap {:.3e} exceeds {COMPLEMENTARITY_TOL:e}",
            checks.max_complementarity_gap
        ));
    }

    let pool = BlockPool::new(&blocks);
    let total_time = pool.total_time;
    let mean_z: Vec<Estimate> = (0..d).map(|i| pool.ratio(|b| b.z[i])).collect();
    let cov_z = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let (mi, mj) = (mean_z[i].value, mean_z[j].value);
                    // centred at the pooled mean, so the statistic is linear in block sums
                    pool.ratio(|b| b.zz[i * d + j] - mi * b.z[j] - mj * b.z[i] + mi * mj * b.time)
                })
                .collect()
        })
        .collect();
    let g = grid.len();
    let result = SimResult {
        dim: d,
        config: SimConfig {
            theta_grid: grid.clone(),
            ..config.clone()
        },
        total_time,
        y_rate: (0..d).map(|i| pool.ratio(|b| b.dy[i])).collect(),
        empirical_mgf: (0..g).map(|p| pool.ratio(|b| b.mgf[p])).collect(),
        empirical_boundary_mgf: (0..d)
            .map(|i| (0..g).map(|p| pool.ratio(|b| b.boundary_mgf[i * g + p])).collect())
            .collect(),
        marginal_histograms: hist
            .into_iter()
            .zip(&bin_width)
            .map(|(h, &w)| {
                let total: f64 = stats::pairwise_sum(&h);
                let mut fr: Vec<f64> = h.iter().map(|x| x / total).collect();
                let overflow = fr.pop().unwrap_or(0.0);
                Histogram {
                    bin_width: w,
                    fractions: fr,
                    overflow,
                }
            })
            .collect(),
        mean_z,
        cov_z,
        theta_grid: grid,
        path_checks: checks,
        warnings,
        blocks,
        convolution: conv,
        samples,
    };
    Ok(result)
}

/// Ratio estimators `Σ_b f(b) / Σ_b time_b` with batch means errors.
pub(crate) struct BlockPool<'a> {
    blocks: &'a [Block],
    pub total_time: f64,
}

impl<'a> BlockPool<'a> {
    pub(crate) fn new(blocks: &'a [Block]) -> Self {
        let times: Vec<f64> = blocks.iter().map(|b| b.time).collect();
        Self {
            blocks,
            total_time: stats::pairwise_sum(&times),
        }
    }

    pub(crate) fn ratio<F: Fn(&Block) -> f64>(&self, f: F) -> Estimate {
        let sums: Vec<f64> = self.blocks.iter().map(&f).collect();
        let per_block: Vec<f64> = self.blocks.iter().zip(&sums).map(|(b, s)| s / b.time).collect();
        Estimate::new(
            stats::pairwise_sum(&sums) / self.total_time,
            stats::batch_se(&per_block),
        )
    }

    /// Weighted version of [`ratio`](Self::ratio) for bootstrap draws.
    pub(crate) fn weighted<F: Fn(&Block) -> f64>(&self, f: F, weights: &[u32]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (b, &w) in self.blocks.iter().zip(weights) {
            if w > 0 {
                num += w as f64 * f(b);
                den += w as f64 * b.time;
            }
        }
        num / den
    }
}

/// Bit pattern of a grid point, with `-0.0` folded into `0.0`.
fn grid_key(theta: &[f64]) -> Vec<u64> {
    theta.iter().map(|&x| if x == 0.0 { 0 } else { x.to_bits() }).collect()
}

/// Transforms estimated by simulation, defined only on the simulated grid.
#[derive(Clone, Debug)]
pub struct EmpiricalMgf {
    d: usize,
    index: HashMap<Vec<u64>, usize>,
    phi: Vec<Estimate>,
    boundary: Vec<Vec<Estimate>>,
    mass: Vec<f64>,
}

impl EmpiricalMgf {
    pub fn from_result(result: &SimResult) -> Self {
        Self {
            d: result.dim,
            index: result
                .theta_grid
                .iter()
                .enumerate()
                .map(|(p, t)| (grid_key(t), p))
                .collect(),
            phi: result.empirical_mgf.clone(),
            boundary: result.empirical_boundary_mgf.clone(),
            mass: result.y_rate.iter().map(|e| e.value).collect(),
        }
    }

    /// Grid index of `theta`, or `None` when it was not simulated.
    pub fn position(&self, theta: &[f64]) -> Option<usize> {
        self.index.get(&grid_key(theta)).copied()
    }

    fn lookup(&self, theta: &[f64]) -> Result<usize> {
        if theta.len() != self.d {
            return Err(SrbmError::Dimension(format!(
                "theta has length {}, expected {}",
                theta.len(),
                self.d
            )));
        }
        self.position(theta)
            .ok_or_else(|| SrbmError::MissingGrid(vec![theta.to_vec()]))
    }

    pub fn phi_estimate(&self, theta: &[f64]) -> Result<Estimate> {
        Ok(self.phi[self.lookup(theta)?])
    }

    /// `φ_i(θ)`; since it does not depend on `θ_i`, the point with
    /// `θ_i = 0` is used when `θ` itself is not on the grid.
    pub fn phi_boundary_estimate(&self, i: usize, theta: &[f64]) -> Result<Estimate> {
        let p = match self.lookup(theta) {
            Ok(p) => p,
            Err(e) => {
                let mut t = theta.to_vec();
                t[i] = 0.0;
                self.lookup(&t).map_err(|_| e)?
            }
        };
        Ok(self.boundary[i][p])
    }
}

impl MgfModel for EmpiricalMgf {
    fn dim(&self) -> usize {
        self.d
    }

    fn phi(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.phi_estimate(theta)?.value)
    }

    fn phi_boundary(&self, i: usize, theta: &[f64]) -> Result<f64> {
        Ok(self.phi_boundary_estimate(i, theta)?.value)
    }

    fn boundary_mass(&self) -> Vec<f64> {
        self.mass.clone()
    }
}
