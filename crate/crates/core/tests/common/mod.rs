#![allow(dead_code)]

use molone_core::kernel::KernelKind;
use molone_core::pref::{ComparisonRecord, ComparisonSource};
use molone_core::{DesignPoint, OutcomeVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn point(r: &mut impl Rng, d: usize, lo: f64, hi: f64) -> DesignPoint {
    DesignPoint::new((0..d).map(|_| r.random_range(lo..hi)).collect()).unwrap()
}

pub fn outcome(v: Vec<f64>) -> OutcomeVector {
    OutcomeVector::new(v).unwrap()
}

pub fn record(winner: Vec<f64>, loser: Vec<f64>) -> ComparisonRecord {
    ComparisonRecord {
        winner: outcome(winner),
        loser: outcome(loser),
        source: ComparisonSource::SimulatedAgent,
    }
}

/// Kernel written out from its textbook form.
pub fn kernel(kind: KernelKind, ls: &[f64], scale: f64, a: &[f64], b: &[f64]) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(ls)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    match kind {
        KernelKind::SquaredExponential => scale * (-0.5 * r2).exp(),
        KernelKind::Matern52 => {
            let r = (5.0 * r2).sqrt();
            scale * (1.0 + r + r * r / 3.0) * (-r).exp()
        }
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| row.iter().copied().chain([*bi]).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        for i in col + 1..n {
            let f = m[i][col] / m[col][col];
            for j in col..=n {
                m[i][j] -= f * m[col][j];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

pub fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean and sample standard deviation, with 1 in place of a zero spread.
pub fn standardization(col: &[f64]) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    if col.len() < 2 {
        return (mean, 1.0);
    }
    let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

/// Agreement of an analytic derivative with a finite-difference estimate,
/// relative to the estimate with a floor so near-zero partials do not blow up.
pub fn rel_err(analytic: f64, fd: f64, floor: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(floor)
}
