//! Stationary ARD kernels.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::contract;
use crate::Result;

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    SquaredExponential,
    Matern52,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub lengthscales: Vec<f64>,
    pub output_scale: f64,
}

impl Kernel {
    pub fn new(kind: KernelKind, lengthscales: Vec<f64>, output_scale: f64) -> Result<Self> {
        contract!(
            lengthscales.iter().all(|l| *l > 0.0 && l.is_finite()),
            "lengthscales must be positive"
        );
        contract!(
            output_scale > 0.0 && output_scale.is_finite(),
            "output scale must be positive"
        );
        Ok(Self {
            kind,
            lengthscales,
            output_scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Log-parameters `[ln l_1, ..., ln l_d, ln s]`.
    pub fn log_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.lengthscales.iter().map(|l| libm::log(*l)).collect();
        p.push(libm::log(self.output_scale));
        p
    }

    pub fn from_log_params(kind: KernelKind, p: &[f64]) -> Self {
        let d = p.len() - 1;
        Self {
            kind,
            lengthscales: p[..d].iter().map(|v| libm::exp(*v)).collect(),
            output_scale: libm::exp(p[d]),
        }
    }

    #[inline]
    fn scaled_sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for ((x, y), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let t = (x - y) / l;
            r2 += t * t;
        }
        r2
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2 = self.scaled_sq_dist(a, b);
        self.output_scale
            * match self.kind {
                KernelKind::SquaredExponential => libm::exp(-0.5 * r2),
                KernelKind::Matern52 => {
                    let r = libm::sqrt(r2);
                    (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * libm::exp(-SQRT5 * r)
                }
            }
    }

    /// `-(1/r) dk/dr`, the common factor of every derivative of a stationary kernel.
    #[inline]
    fn radial_factor(&self, r2: f64) -> f64 {
        self.output_scale
            * match self.kind {
                KernelKind::SquaredExponential => libm::exp(-0.5 * r2),
                KernelKind::Matern52 => {
                    let r = libm::sqrt(r2);
                    5.0 / 3.0 * (1.0 + SQRT5 * r) * libm::exp(-SQRT5 * r)
                }
            }
    }

    /// `∂k(a, b) / ∂a_j` written into `out`.
    pub fn grad_first(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        let c = self.radial_factor(self.scaled_sq_dist(a, b));
        for (j, o) in out.iter_mut().enumerate() {
            let l = self.lengthscales[j];
            *o = -c * (a[j] - b[j]) / (l * l);
        }
    }

    /// Derivatives with respect to `log_params()` written into `out`
    /// (length `d + 1`); also returns the kernel value.
    pub fn grad_log_params(&self, a: &[f64], b: &[f64], out: &mut [f64]) -> f64 {
        let r2 = self.scaled_sq_dist(a, b);
        let c = self.radial_factor(r2);
        let d = self.dim();
        for j in 0..d {
            let t = (a[j] - b[j]) / self.lengthscales[j];
            out[j] = c * t * t;
        }
        let k = self.eval(a, b);
        out[d] = k;
        k
    }
}
