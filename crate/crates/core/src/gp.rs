//! Gaussian process surrogate for a vector-valued black box: one
//! independent GP per output, each with its own ARD kernel, fitted by
//! maximizing the log marginal likelihood on standardized targets.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{DesignPoint, OutcomeVector};
use crate::error::contract;
use crate::kernel::{Kernel, KernelKind};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::optim::{lbfgs_box, LbfgsOptions};
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub kernel: KernelKind,
    pub restarts: usize,
    pub max_iter: usize,
    pub lengthscale_bounds: (f64, f64),
    pub output_scale_bounds: (f64, f64),
    pub noise_bounds: (f64, f64),
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Matern52,
            restarts: 8,
            max_iter: 100,
            lengthscale_bounds: (1e-3, 10.0),
            output_scale_bounds: (1e-4, 1e2),
            noise_bounds: (1e-6, 1e-1),
        }
    }
}

/// Posterior mean and marginal standard deviation, one entry per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// One fitted output: hyperparameters, standardization, and cached solves.
#[derive(Debug, Clone)]
pub struct OutputGp {
    pub kernel: Kernel,
    pub noise_variance: f64,
    pub y_mean: f64,
    pub y_std: f64,
    chol: Cholesky,
    alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    train_x: Vec<DesignPoint>,
    train_y: Vec<OutcomeVector>,
    outputs: Vec<OutputGp>,
}

fn standardize(column: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    let var = if column.len() > 1 {
        column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let sd = libm::sqrt(var);
    let sd = if sd > 1e-12 * (1.0 + mean.abs()) {
        sd
    } else {
        1.0
    };
    (mean, sd, column.iter().map(|v| (v - mean) / sd).collect())
}

fn gram(kernel: &Kernel, xs: &[DesignPoint], noise: f64) -> Matrix {
    let n = xs.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(xs[i].coords(), xs[j].coords());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += noise;
    }
    k
}

/// Negative log marginal likelihood of standardized targets and its gradient
/// with respect to `[ln l_1.., ln s, ln noise]`.
fn neg_lml(
    kind: KernelKind,
    params: &[f64],
    xs: &[DesignPoint],
    y: &[f64],
    grad: &mut [f64],
) -> f64 {
    let d = params.len() - 2;
    let kernel = Kernel::from_log_params(kind, &params[..=d]);
    let noise = libm::exp(params[d + 1]);
    let n = xs.len();
    let k = gram(&kernel, xs, noise);
    let Some(chol) = Cholesky::new(&k) else {
        return f64::INFINITY;
    };
    let alpha = chol.solve(y);
    let value = 0.5 * dot(y, &alpha) + 0.5 * chol.log_det() + 0.5 * n as f64 * libm::log(2.0 * PI);
    let kinv = chol.inverse();
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut dk = vec![0.0; d + 1];
    for i in 0..n {
        for j in 0..=i {
            kernel.grad_log_params(xs[i].coords(), xs[j].coords(), &mut dk);
            let w = alpha[i] * alpha[j] - kinv[(i, j)];
            let factor = if i == j { 0.5 * w } else { w };
            for (g, v) in grad[..=d].iter_mut().zip(&dk) {
                *g -= factor * v;
            }
        }
        grad[d + 1] -= 0.5 * (alpha[i] * alpha[i] - kinv[(i, i)]) * noise;
    }
    value
}

impl OutputGp {
    fn build(
        kernel: Kernel,
        noise_variance: f64,
        xs: &[DesignPoint],
        column: &[f64],
    ) -> Result<Self> {
        let (y_mean, y_std, y) = standardize(column);
        let chol = Cholesky::with_jitter(&gram(&kernel, xs, noise_variance))?;
        let alpha = chol.solve(&y);
        Ok(Self {
            kernel,
            noise_variance,
            y_mean,
            y_std,
            chol,
            alpha,
        })
    }

    fn fit(xs: &[DesignPoint], column: &[f64], config: &GpConfig, rng: &RngStream) -> Result<Self> {
        let d = xs[0].dim();
        let (_, _, y) = standardize(column);
        let (llo, lhi) = config.lengthscale_bounds;
        let (slo, shi) = config.output_scale_bounds;
        let (nlo, nhi) = config.noise_bounds;
        let mut lower = vec![libm::log(llo); d];
        lower.push(libm::log(slo));
        lower.push(libm::log(nlo));
        let mut upper = vec![libm::log(lhi); d];
        upper.push(libm::log(shi));
        upper.push(libm::log(nhi));

        let mut r = rng.rng();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for restart in 0..config.restarts.max(1) {
            let start: Vec<f64> = if restart == 0 {
                let mut p = vec![libm::log(0.5); d];
                p.push(0.0);
                p.push(libm::log(1e-3));
                p
            } else {
                let mut p: Vec<f64> = (0..d)
                    .map(|_| r.random_range(libm::log(0.05)..libm::log(2.0)))
                    .collect();
                p.push(r.random_range(libm::log(0.3)..libm::log(3.0)));
                p.push(r.random_range(libm::log(1e-5)..libm::log(1e-2)));
                p
            };
            let opts = LbfgsOptions {
                max_iter: config.max_iter,
                ..LbfgsOptions::default()
            };
            let m = lbfgs_box(
                |p, g| neg_lml(config.kernel, p, xs, &y, g),
                &start,
                &lower,
                &upper,
                opts,
            );
            if m.value.is_finite() && best.as_ref().is_none_or(|(v, _)| m.value < *v) {
                best = Some((m.value, m.x));
            }
        }
        let (_, params) = best.ok_or(Error::Conditioning { jitter: 0.0 })?;
        let kernel = Kernel::from_log_params(config.kernel, &params[..=d]);
        Self::build(kernel, libm::exp(params[d + 1]), xs, column)
    }

    fn cross(&self, xs: &[DesignPoint], x: &[f64]) -> Vec<f64> {
        xs.iter().map(|t| self.kernel.eval(t.coords(), x)).collect()
    }
}

impl GpModel {
    fn check_data(train_x: &[DesignPoint], train_y: &[OutcomeVector]) -> Result<(usize, usize)> {
        contract!(!train_x.is_empty(), "GP needs at least one training point");
        contract!(
            train_x.len() == train_y.len(),
            "{} inputs but {} targets",
            train_x.len(),
            train_y.len()
        );
        let d = train_x[0].dim();
        let k = train_y[0].dim();
        contract!(
            train_x.iter().all(|x| x.dim() == d),
            "inconsistent input dimension"
        );
        contract!(
            train_y.iter().all(|y| y.dim() == k),
            "inconsistent output dimension"
        );
        if train_y
            .iter()
            .any(|y| y.values().iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Data(format!("non-finite training target")));
        }
        Ok((d, k))
    }

    /// Fits hyperparameters per output by multi-start L-BFGS on the marginal likelihood.
    pub fn fit(
        train_x: Vec<DesignPoint>,
        train_y: Vec<OutcomeVector>,
        config: &GpConfig,
        rng: &RngStream,
    ) -> Result<Self> {
        let (_, k) = Self::check_data(&train_x, &train_y)?;
        let outputs = (0..k)
            .map(|m| {
                let column: Vec<f64> = train_y.iter().map(|y| y.values()[m]).collect();
                OutputGp::fit(&train_x, &column, config, &rng.fork(m))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            train_x,
            train_y,
            outputs,
        })
    }

    /// Conditions on data with given hyperparameters (no fitting).
    pub fn with_hyperparameters(
        train_x: Vec<DesignPoint>,
        train_y: Vec<OutcomeVector>,
        kernels: Vec<Kernel>,
        noise_variance: Vec<f64>,
    ) -> Result<Self> {
        let (d, k) = Self::check_data(&train_x, &train_y)?;
        contract!(
            kernels.len() == k && noise_variance.len() == k,
            "need one kernel and noise per output"
        );
        contract!(
            kernels.iter().all(|kr| kr.dim() == d),
            "kernel dimension mismatch"
        );
        contract!(
            noise_variance.iter().all(|v| *v > 0.0),
            "noise variance must be positive"
        );
        let outputs = kernels
            .into_iter()
            .zip(noise_variance)
            .enumerate()
            .map(|(m, (kernel, noise))| {
                let column: Vec<f64> = train_y.iter().map(|y| y.values()[m]).collect();
                OutputGp::build(kernel, noise, &train_x, &column)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            train_x,
            train_y,
            outputs,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.train_x[0].dim()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    pub fn train_x(&self) -> &[DesignPoint] {
        &self.train_x
    }

    pub fn train_y(&self) -> &[OutcomeVector] {
        &self.train_y
    }

    pub fn outputs(&self) -> &[OutputGp] {
        &self.outputs
    }

    pub fn posterior(&self, x: &DesignPoint) -> PosteriorSummary {
        let mut mean = Vec::with_capacity(self.outputs.len());
        let mut std = Vec::with_capacity(self.outputs.len());
        for out in &self.outputs {
            let kx = out.cross(&self.train_x, x.coords());
            let mu = dot(&kx, &out.alpha);
            let v = out.chol.solve_lower(&kx);
            let var = (out.kernel.output_scale - dot(&v, &v)).max(0.0);
            mean.push(out.y_mean + out.y_std * mu);
            std.push(out.y_std * libm::sqrt(var));
        }
        PosteriorSummary { mean, std }
    }

    pub fn posterior_mean(&self, x: &DesignPoint) -> Vec<f64> {
        self.outputs
            .iter()
            .map(|out| {
                let mu: f64 = self
                    .train_x
                    .iter()
                    .zip(&out.alpha)
                    .map(|(t, a)| a * out.kernel.eval(t.coords(), x.coords()))
                    .sum();
                out.y_mean + out.y_std * mu
            })
            .collect()
    }

    /// `∂μ_m / ∂x_j` as a `k × d` matrix.
    pub fn posterior_mean_gradient(&self, x: &DesignPoint) -> Matrix {
        let d = self.input_dim();
        let mut out = Matrix::zeros(self.outputs.len(), d);
        let mut g = vec![0.0; d];
        for (m, gp) in self.outputs.iter().enumerate() {
            for (t, a) in self.train_x.iter().zip(&gp.alpha) {
                gp.kernel.grad_first(x.coords(), t.coords(), &mut g);
                for j in 0..d {
                    out[(m, j)] += gp.y_std * a * g[j];
                }
            }
        }
        out
    }

    /// Joint posterior mean and covariance of output `m` at `xs`, in raw units.
    pub fn joint_posterior(&self, m: usize, xs: &[DesignPoint]) -> (Vec<f64>, Matrix) {
        let out = &self.outputs[m];
        let n = xs.len();
        let cross: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| out.cross(&self.train_x, x.coords()))
            .collect();
        let v: Vec<Vec<f64>> = cross.iter().map(|c| out.chol.solve_lower(c)).collect();
        let mean = cross
            .iter()
            .map(|c| out.y_mean + out.y_std * dot(c, &out.alpha))
            .collect();
        let s2 = out.y_std * out.y_std;
        let mut cov = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let c = s2 * (out.kernel.eval(xs[i].coords(), xs[j].coords()) - dot(&v[i], &v[j]));
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
        }
        (mean, cov)
    }

    /// Whitened cross-covariance rows `L⁻¹ k(X, x)` for output `m`, which give the
    /// posterior covariance of two queries as `k(a, b) - vₐ·v_b` (standardized units).
    pub fn whitened_cross(&self, m: usize, x: &DesignPoint) -> Vec<f64> {
        let out = &self.outputs[m];
        out.chol.solve_lower(&out.cross(&self.train_x, x.coords()))
    }

    /// One joint posterior draw at `xs`: an `|xs| × k` matrix.
    pub fn posterior_sample(&self, xs: &[DesignPoint], rng: &RngStream) -> Result<Matrix> {
        let mut r = rng.rng();
        let mut out = Matrix::zeros(xs.len(), self.outputs.len());
        for m in 0..self.outputs.len() {
            let (mean, cov) = self.joint_posterior(m, xs);
            let chol = Cholesky::with_jitter(&cov)?;
            let z: Vec<f64> = (0..xs.len()).map(|_| r.sample(StandardNormal)).collect();
            let draw = chol.lower_mul(&z);
            for i in 0..xs.len() {
                out[(i, m)] = mean[i] + draw[i];
            }
        }
        Ok(out)
    }
}
