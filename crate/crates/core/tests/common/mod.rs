//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srbm::linalg::{Matrix, Vector};
use srbm::{SrbmData, TandemSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `I − P` with `P ≥ 0` and row sums of `P` below 0.9, scaled by a
/// positive diagonal on the left.
pub fn random_m_matrix(rng: &mut impl Rng, d: usize) -> Matrix {
    let mut p = Matrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { rng.random::<f64>() });
    for i in 0..d {
        let s: f64 = p.row(i).sum();
        if s > 0.0 {
            let target = 0.9 * rng.random::<f64>();
            for j in 0..d {
                p[(i, j)] *= target / s;
            }
        }
    }
    let scale: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    Matrix::from_fn(d, d, |i, j| scale[i] * (if i == j { 1.0 } else { 0.0 } - p[(i, j)]))
}

pub fn random_spd(rng: &mut impl Rng, d: usize) -> Matrix {
    let a = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + Matrix::identity(d, d) * 0.2
}

/// Drift with `R⁻¹μ = −b` for a random `b > 0`, so the model is stable.
pub fn stable_drift(rng: &mut impl Rng, r: &Matrix) -> Vector {
    let b = Vector::from_fn(r.nrows(), |_, _| rng.random_range(0.1..2.0));
    -(r * b)
}

pub fn random_stable(rng: &mut impl Rng, d: usize) -> SrbmData {
    let r = random_m_matrix(rng, d);
    let mu = stable_drift(rng, &r);
    SrbmData::new(random_spd(rng, d), mu, r).unwrap()
}

/// `½(R D⁻¹ S + S D⁻¹ Rᵗ)` with `D = diag(R)` and `S` the given diagonal.
pub fn skew_sigma(r: &Matrix, s: &[f64]) -> Matrix {
    let d = r.nrows();
    let dinv_s = Matrix::from_fn(d, d, |i, j| if i == j { s[i] / r[(i, i)] } else { 0.0 });
    (r * &dinv_s + &dinv_s * r.transpose()) * 0.5
}

pub fn is_spd(m: &Matrix) -> bool {
    m.clone().cholesky().is_some() && m.symmetric_eigenvalues().min() > 1e-8 * m.norm()
}

/// Stable instance whose `Σ` satisfies skew symmetry with `R`.
pub fn random_skew(rng: &mut impl Rng, d: usize) -> SrbmData {
    loop {
        let r = random_m_matrix(rng, d);
        let s: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..3.0)).collect();
        let sigma = skew_sigma(&r, &s);
        if is_spd(&sigma) {
            let mu = stable_drift(rng, &r);
            return SrbmData::new(sigma, mu, r).unwrap();
        }
    }
}

/// Stable instance with `R^{KL} = 0` satisfying both decomposability
/// conditions for `K = {0, …, k−1}`.
pub fn random_decomposable(rng: &mut impl Rng, d: usize, k: usize) -> SrbmData {
    loop {
        let mut r = random_m_matrix(rng, d);
        for i in 0..k {
            for j in k..d {
                r[(i, j)] = 0.0;
            }
        }
        let s: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..3.0)).collect();
        let r_kk = r.view((0, 0), (k, k)).clone_owned();
        let s_kk = skew_sigma(&r_kk, &s);
        let mut sigma = Matrix::zeros(d, d);
        sigma.view_mut((0, 0), (k, k)).copy_from(&s_kk);
        for i in k..d {
            for j in 0..k {
                let v = 0.5 * r[(i, j)] * s[j] / r[(j, j)];
                sigma[(i, j)] = v;
                sigma[(j, i)] = v;
            }
        }
        // L block: Schur complement plus a random SPD part
        let s_lk = sigma.view((k, 0), (d - k, k)).clone_owned();
        let Some(inv) = s_kk.clone().try_inverse() else { continue };
        let schur = &s_lk * inv * s_lk.transpose() + random_spd(rng, d - k);
        sigma.view_mut((k, k), (d - k, d - k)).copy_from(&schur);
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        if is_spd(&sigma) {
            let mu = stable_drift(rng, &r);
            return SrbmData::new(sigma, mu, r).unwrap();
        }
    }
}

/// Stable tandem spec whose coefficients repeat often, so equal leading
/// coefficients are common.
pub fn random_tandem(rng: &mut impl Rng, d: usize) -> TandemSpec {
    let mut beta = vec![rng.random_range(0.5..1.5)];
    for _ in 0..d {
        let last = *beta.last().unwrap();
        beta.push(last + rng.random_range(0.1..1.0));
    }
    let palette = [0.5, 1.0, 1.5, 2.0];
    let cv = (0..=d)
        .map(|_| if rng.random::<f64>() < 0.6 { 1.0 } else { palette[rng.random_range(0..4)] })
        .collect();
    TandemSpec::new(beta, cv).unwrap()
}
