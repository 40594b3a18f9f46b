//! Latent-utility GP learned from pairwise comparisons of outcome vectors.
//!
//! Likelihood: `P(w ≻ l | u) = Φ((u_w − u_l) / (√2 λ))`. The posterior over
//! latent utilities at the distinct compared outcomes ("support points") is
//! approximated by a Gaussian at its mode (Laplace). Writing the negative
//! log-likelihood Hessian as `W = GᵀG` with one row of `G` per comparison,
//! every solve goes through the small SPD matrix `B = I + G K Gᵀ`, so the
//! Gram matrix `K` itself is never inverted.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{euclidean, OutcomeVector};
use crate::error::contract;
use crate::kernel::{Kernel, KernelKind};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::optim::nelder_mead_box;
use crate::special::{inv_mills, log_norm_cdf};
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonSource {
    SimulatedAgent,
    Human,
    SeedRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub winner: OutcomeVector,
    pub loser: OutcomeVector,
    pub source: ComparisonSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrefConfig {
    pub kernel: KernelKind,
    /// Comparison noise `λ`, in standardized outcome units.
    pub noise_scale: f64,
    pub restarts: usize,
    pub max_evals: usize,
    pub lengthscale_bounds: (f64, f64),
    pub output_scale_bounds: (f64, f64),
    /// Gamma(shape, rate) log-prior on each lengthscale; `None` disables it.
    pub lengthscale_prior: Option<(f64, f64)>,
    pub dedup_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for PrefConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::SquaredExponential,
            noise_scale: 1.0,
            restarts: 2,
            max_evals: 120,
            lengthscale_bounds: (0.05, 20.0),
            output_scale_bounds: (1.0, 4.0),
            lengthscale_prior: None,
            dedup_tol: 1e-9,
            newton_max_iter: 100,
        }
    }
}

const GRAM_JITTER: f64 = 1e-8;

/// Laplace solution for fixed hyperparameters.
#[derive(Debug, Clone)]
struct LaplaceFit {
    mode: Vec<f64>,
    /// `∇ log p(D | f)` at the mode; the predictive mean is `k(y, T)ᵀ dual`.
    dual: Vec<f64>,
    /// `√c_p` of every comparison at the mode.
    sqrt_c: Vec<f64>,
    chol_b: Cholesky,
    log_evidence: f64,
    grad_norm: f64,
}

struct Likelihood<'a> {
    pairs: &'a [(usize, usize)],
    scale: f64,
}

impl Likelihood<'_> {
    fn log_lik(&self, f: &[f64]) -> f64 {
        self.pairs
            .iter()
            .map(|&(w, l)| log_norm_cdf((f[w] - f[l]) / self.scale))
            .sum()
    }

    /// Gradient of the log-likelihood and `√c_p` with `W = Σ c_p (e_w − e_l)(e_w − e_l)ᵀ`.
    fn derivatives(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut grad = vec![0.0; f.len()];
        let mut sqrt_c = Vec::with_capacity(self.pairs.len());
        for &(w, l) in self.pairs {
            let z = (f[w] - f[l]) / self.scale;
            let r = inv_mills(z);
            grad[w] += r / self.scale;
            grad[l] -= r / self.scale;
            let c = (r * (z + r)).max(1e-300) / (self.scale * self.scale);
            sqrt_c.push(libm::sqrt(c));
        }
        (grad, sqrt_c)
    }
}

/// `G v` with `G[p] = √c_p (e_w − e_l)`.
fn g_mul(pairs: &[(usize, usize)], sqrt_c: &[f64], v: &[f64]) -> Vec<f64> {
    pairs
        .iter()
        .zip(sqrt_c)
        .map(|(&(w, l), c)| c * (v[w] - v[l]))
        .collect()
}

fn gt_mul(pairs: &[(usize, usize)], sqrt_c: &[f64], u: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for ((&(w, l), c), ui) in pairs.iter().zip(sqrt_c).zip(u) {
        out[w] += c * ui;
        out[l] -= c * ui;
    }
    out
}

fn b_matrix(k: &Matrix, pairs: &[(usize, usize)], sqrt_c: &[f64]) -> Matrix {
    let m = pairs.len();
    let mut b = Matrix::identity(m);
    for p in 0..m {
        let (wp, lp) = pairs[p];
        for q in 0..=p {
            let (wq, lq) = pairs[q];
            let kk = k[(wp, wq)] - k[(wp, lq)] - k[(lp, wq)] + k[(lp, lq)];
            let v = sqrt_c[p] * sqrt_c[q] * kk;
            b[(p, q)] += v;
            if p != q {
                b[(q, p)] += v;
            }
        }
    }
    b
}

fn laplace(k: &Matrix, lik: &Likelihood<'_>, max_iter: usize) -> Result<LaplaceFit> {
    let n = k.rows();
    let pairs = lik.pairs;
    let mut a = vec![0.0; n];
    let mut f = vec![0.0; n];
    let psi = |a: &[f64], f: &[f64]| lik.log_lik(f) - 0.5 * dot(a, f);
    let mut current = psi(&a, &f);
    let mut converged = false;
    for _ in 0..max_iter {
        let (grad, sqrt_c) = lik.derivatives(&f);
        let residual = grad
            .iter()
            .zip(&a)
            .map(|(g, ai)| (g - ai).abs())
            .fold(0.0, f64::max);
        if residual < 1e-10 {
            converged = true;
            break;
        }
        let chol_b = Cholesky::with_jitter(&b_matrix(k, pairs, &sqrt_c))?;
        // b = W f + ∇;  a_new = b − Gᵀ B⁻¹ G K b
        let gf = g_mul(pairs, &sqrt_c, &f);
        let wf = gt_mul(pairs, &sqrt_c, &gf, n);
        let rhs: Vec<f64> = wf.iter().zip(&grad).map(|(x, y)| x + y).collect();
        let krhs = k.matvec(&rhs);
        let u = chol_b.solve(&g_mul(pairs, &sqrt_c, &krhs));
        let corr = gt_mul(pairs, &sqrt_c, &u, n);
        let target: Vec<f64> = rhs.iter().zip(&corr).map(|(x, y)| x - y).collect();
        let delta: Vec<f64> = target.iter().zip(&a).map(|(t, ai)| t - ai).collect();
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = a
                .iter()
                .zip(&delta)
                .map(|(ai, di)| ai + step * di)
                .collect();
            let ftrial = k.matvec(&trial);
            let value = psi(&trial, &ftrial);
            if value >= current - 1e-12 * current.abs().max(1.0) {
                a = trial;
                f = ftrial;
                current = value;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let (grad, sqrt_c) = lik.derivatives(&f);
    let grad_norm = libm::sqrt(grad.iter().zip(&a).map(|(g, ai)| (g - ai) * (g - ai)).sum());
    if !converged && grad_norm > 1e-6 {
        return Err(Error::Inference(format!(
            "Newton iterations stalled (gradient norm {grad_norm:e})"
        )));
    }
    let chol_b = Cholesky::with_jitter(&b_matrix(k, pairs, &sqrt_c))?;
    let log_evidence = lik.log_lik(&f) - 0.5 * dot(&grad, &f) - 0.5 * chol_b.log_det();
    Ok(LaplaceFit {
        mode: f,
        dual: grad,
        sqrt_c,
        chol_b,
        log_evidence,
        grad_norm,
    })
}

#[derive(Debug, Clone)]
pub struct PreferenceModel {
    output_dim: usize,
    support: Vec<OutcomeVector>,
    scaled: Vec<Vec<f64>>,
    shift: Vec<f64>,
    scale: Vec<f64>,
    comparisons: Vec<(usize, usize)>,
    kernel: Kernel,
    noise_scale: f64,
    fit: Option<LaplaceFit>,
}

fn gram(kernel: &Kernel, pts: &[Vec<f64>]) -> Matrix {
    let n = pts.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&pts[i], &pts[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += GRAM_JITTER * kernel.output_scale;
    }
    k
}

fn dedup(records: &[ComparisonRecord], tol: f64) -> (Vec<OutcomeVector>, Vec<(usize, usize)>) {
    let mut support: Vec<OutcomeVector> = Vec::new();
    let index_of = |y: &OutcomeVector, support: &mut Vec<OutcomeVector>| -> usize {
        if let Some(i) = support
            .iter()
            .position(|s| euclidean(s.values(), y.values()) <= tol)
        {
            i
        } else {
            support.push(y.clone());
            support.len() - 1
        }
    };
    let mut pairs = Vec::with_capacity(records.len());
    for r in records {
        let w = index_of(&r.winner, &mut support);
        let l = index_of(&r.loser, &mut support);
        pairs.push((w, l));
    }
    (support, pairs)
}

impl PreferenceModel {
    /// Model with no comparisons: zero mean, kernel prior variance.
    pub fn prior(output_dim: usize, config: &PrefConfig) -> Self {
        let output_scale = 1.0f64.clamp(config.output_scale_bounds.0, config.output_scale_bounds.1);
        let kernel = Kernel {
            kind: config.kernel,
            lengthscales: vec![1.0; output_dim],
            output_scale,
        };
        Self {
            output_dim,
            support: Vec::new(),
            scaled: Vec::new(),
            shift: vec![0.0; output_dim],
            scale: vec![1.0; output_dim],
            comparisons: Vec::new(),
            kernel,
            noise_scale: config.noise_scale,
            fit: None,
        }
    }

    /// Fits kernel hyperparameters by maximizing the Laplace evidence (plus the
    /// optional lengthscale prior) with Nelder–Mead restarts.
    pub fn fit(records: &[ComparisonRecord], config: &PrefConfig, rng: &RngStream) -> Result<Self> {
        contract!(
            !records.is_empty(),
            "preference model needs at least one comparison"
        );
        let k = records[0].winner.dim();
        contract!(
            records
                .iter()
                .all(|r| r.winner.dim() == k && r.loser.dim() == k),
            "inconsistent outcome dimension"
        );
        let (support, pairs) = dedup(records, config.dedup_tol);
        contract!(
            pairs.iter().all(|(w, l)| w != l),
            "a comparison has identical winner and loser"
        );
        let mut model = Self::prior(k, config);
        model.standardize(support);
        model.comparisons = pairs;

        let lik = Likelihood {
            pairs: &model.comparisons,
            scale: core::f64::consts::SQRT_2 * config.noise_scale,
        };
        let (llo, lhi) = config.lengthscale_bounds;
        let (slo, shi) = config.output_scale_bounds;
        let mut lower = vec![libm::log(llo); k];
        lower.push(libm::log(slo));
        let mut upper = vec![libm::log(lhi); k];
        upper.push(libm::log(shi));
        let objective = |p: &[f64]| -> f64 {
            let kernel = Kernel::from_log_params(config.kernel, p);
            let gram = gram(&kernel, &model.scaled);
            let Ok(fit) = laplace(&gram, &lik, config.newton_max_iter) else {
                return f64::INFINITY;
            };
            let mut value = -fit.log_evidence;
            if let Some((shape, rate)) = config.lengthscale_prior {
                for l in &kernel.lengthscales {
                    value -= (shape - 1.0) * libm::log(*l) - rate * l;
                }
            }
            value
        };
        let mut r = rng.rng();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for restart in 0..config.restarts.max(1) {
            // Deterministic starts at unit and at long lengthscales; the latter
            // lets irrelevant outcomes stay switched off.
            let start: Vec<f64> = if restart < 2 {
                let l = if restart == 0 { 1.0 } else { 5.0f64.min(lhi) };
                let mut p = vec![libm::log(l); k];
                p.push(libm::log(slo.max(1.0).min(shi)));
                p
            } else {
                (0..=k)
                    .map(|i| r.random_range(lower[i]..=upper[i].min(lower[i] + 3.0)))
                    .collect()
            };
            let m = nelder_mead_box(
                objective,
                &start,
                &lower,
                &upper,
                0.5,
                config.max_evals,
                1e-9,
            );
            if m.value.is_finite() && best.as_ref().is_none_or(|(v, _)| m.value < *v) {
                best = Some((m.value, m.x));
            }
        }
        let (_, params) = best.ok_or_else(|| {
            Error::Inference("no hyperparameter setting gave a converged Laplace fit".into())
        })?;
        model.kernel = Kernel::from_log_params(config.kernel, &params);
        model.refit_mode(config.newton_max_iter)?;
        Ok(model)
    }

    /// Conditions on comparisons with a fixed kernel (defined over standardized outcomes).
    pub fn with_kernel(
        records: &[ComparisonRecord],
        kernel: Kernel,
        config: &PrefConfig,
    ) -> Result<Self> {
        contract!(
            !records.is_empty(),
            "preference model needs at least one comparison"
        );
        let k = records[0].winner.dim();
        contract!(kernel.dim() == k, "kernel dimension mismatch");
        let (support, pairs) = dedup(records, config.dedup_tol);
        contract!(
            pairs.iter().all(|(w, l)| w != l),
            "a comparison has identical winner and loser"
        );
        let mut model = Self::prior(k, config);
        model.standardize(support);
        model.comparisons = pairs;
        model.kernel = kernel;
        model.refit_mode(config.newton_max_iter)?;
        Ok(model)
    }

    fn standardize(&mut self, support: Vec<OutcomeVector>) {
        let n = support.len() as f64;
        for m in 0..self.output_dim {
            let col: Vec<f64> = support.iter().map(|y| y.values()[m]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let var = if col.len() > 1 {
                col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let sd = libm::sqrt(var);
            self.shift[m] = mean;
            self.scale[m] = if sd > 1e-12 { sd } else { 1.0 };
        }
        self.scaled = support.iter().map(|y| self.to_scaled(y.values())).collect();
        self.support = support;
    }

    fn refit_mode(&mut self, max_iter: usize) -> Result<()> {
        let lik = Likelihood {
            pairs: &self.comparisons,
            scale: core::f64::consts::SQRT_2 * self.noise_scale,
        };
        self.fit = Some(laplace(&gram(&self.kernel, &self.scaled), &lik, max_iter)?);
        Ok(())
    }

    fn to_scaled(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn support(&self) -> &[OutcomeVector] {
        &self.support
    }

    pub fn comparisons(&self) -> &[(usize, usize)] {
        &self.comparisons
    }

    /// MAP latent utilities at the support points (empty for the prior model).
    pub fn laplace_mode(&self) -> &[f64] {
        self.fit.as_ref().map_or(&[], |f| &f.mode)
    }

    /// Dual weights `∇ log p(D | f̂)`; they sum to zero.
    pub fn dual_weights(&self) -> &[f64] {
        self.fit.as_ref().map_or(&[], |f| &f.dual)
    }

    /// Norm of the stationarity residual of the penalized log posterior at the mode.
    pub fn mode_gradient_norm(&self) -> f64 {
        self.fit.as_ref().map_or(0.0, |f| f.grad_norm)
    }

    pub fn prior_variance(&self) -> f64 {
        self.kernel.output_scale
    }

    fn cross(&self, ys: &[f64]) -> Vec<f64> {
        self.scaled
            .iter()
            .map(|t| self.kernel.eval(ys, t))
            .collect()
    }

    /// `L_B⁻¹ G k(T, y)` for a standardized query; the predictive covariance of
    /// two queries is `k(a, b) − vₐ · v_b`.
    fn whitened(&self, fit: &LaplaceFit, kx: &[f64]) -> Vec<f64> {
        fit.chol_b
            .solve_lower(&g_mul(&self.comparisons, &fit.sqrt_c, kx))
    }

    /// Laplace predictive mean and standard deviation of the latent utility at `y`.
    pub fn utility_posterior(&self, y: &OutcomeVector) -> (f64, f64) {
        let Some(fit) = &self.fit else {
            return (0.0, libm::sqrt(self.kernel.output_scale));
        };
        let ys = self.to_scaled(y.values());
        let kx = self.cross(&ys);
        let mean = dot(&kx, &fit.dual);
        let v = self.whitened(fit, &kx);
        let var = (self.kernel.output_scale - dot(&v, &v)).max(0.0);
        (mean, libm::sqrt(var))
    }

    pub fn utility_mean(&self, y: &[f64]) -> f64 {
        let Some(fit) = &self.fit else { return 0.0 };
        let ys = self.to_scaled(y);
        self.scaled
            .iter()
            .zip(&fit.dual)
            .map(|(t, a)| a * self.kernel.eval(&ys, t))
            .sum()
    }

    /// `∂μ_g / ∂y_m` in raw outcome units.
    pub fn utility_mean_gradient(&self, y: &OutcomeVector) -> Vec<f64> {
        let k = self.output_dim;
        let mut out = vec![0.0; k];
        let Some(fit) = &self.fit else { return out };
        let ys = self.to_scaled(y.values());
        let mut g = vec![0.0; k];
        for (t, a) in self.scaled.iter().zip(&fit.dual) {
            self.kernel.grad_first(&ys, t, &mut g);
            for m in 0..k {
                out[m] += a * g[m];
            }
        }
        out.iter_mut().zip(&self.scale).for_each(|(o, s)| *o /= s);
        out
    }

    /// Joint predictive mean and covariance at a list of outcome vectors.
    pub fn joint_predictive(&self, ys: &[&[f64]]) -> (Vec<f64>, Matrix) {
        let scaled: Vec<Vec<f64>> = ys.iter().map(|y| self.to_scaled(y)).collect();
        let n = ys.len();
        let mut cov = Matrix::from_fn(n, n, |i, j| self.kernel.eval(&scaled[i], &scaled[j]));
        let Some(fit) = &self.fit else {
            return (vec![0.0; n], cov);
        };
        let kxs: Vec<Vec<f64>> = scaled.iter().map(|y| self.cross(y)).collect();
        let means = kxs.iter().map(|kx| dot(kx, &fit.dual)).collect();
        let vs: Vec<Vec<f64>> = kxs.iter().map(|kx| self.whitened(fit, kx)).collect();
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] -= dot(&vs[i], &vs[j]);
            }
        }
        (means, cov)
    }

    /// Pieces for incremental conditional draws: predictive mean, whitened
    /// cross vector, and the standardized query.
    pub fn predictive_parts(&self, y: &[f64]) -> PredictiveParts {
        let scaled = self.to_scaled(y);
        match &self.fit {
            None => PredictiveParts {
                mean: 0.0,
                whitened: Vec::new(),
                scaled,
            },
            Some(fit) => {
                let kx = self.cross(&scaled);
                PredictiveParts {
                    mean: dot(&kx, &fit.dual),
                    whitened: self.whitened(fit, &kx),
                    scaled,
                }
            }
        }
    }

    /// Predictive covariance between two prepared queries.
    pub fn predictive_cov(&self, a: &PredictiveParts, b: &PredictiveParts) -> f64 {
        self.kernel.eval(&a.scaled, &b.scaled) - dot(&a.whitened, &b.whitened)
    }

    /// One joint draw of latent utilities at `ys`.
    pub fn utility_sample(&self, ys: &[OutcomeVector], rng: &RngStream) -> Result<Vec<f64>> {
        let refs: Vec<&[f64]> = ys.iter().map(|y| y.values()).collect();
        let (mean, cov) = self.joint_predictive(&refs);
        let chol = Cholesky::with_jitter(&cov)?;
        let mut r = rng.rng();
        let z: Vec<f64> = (0..ys.len()).map(|_| r.sample(StandardNormal)).collect();
        Ok(chol
            .lower_mul(&z)
            .iter()
            .zip(&mean)
            .map(|(d, m)| d + m)
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct PredictiveParts {
    pub mean: f64,
    whitened: Vec<f64>,
    scaled: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(w: &[f64], l: &[f64]) -> ComparisonRecord {
        ComparisonRecord {
            winner: OutcomeVector::new(w.to_vec()).unwrap(),
            loser: OutcomeVector::new(l.to_vec()).unwrap(),
            source: ComparisonSource::SimulatedAgent,
        }
    }

    fn y(v: &[f64]) -> OutcomeVector {
        OutcomeVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn prior_model() {
        let m = PreferenceModel::prior(3, &PrefConfig::default());
        let (mu, sd) = m.utility_posterior(&y(&[0.1, 0.2, 0.3]));
        assert_eq!(mu, 0.0);
        assert!((sd - libm::sqrt(m.prior_variance())).abs() < 1e-15);
        assert!(m
            .utility_mean_gradient(&y(&[0.1, 0.2, 0.3]))
            .iter()
            .all(|g| *g == 0.0));
    }

    #[test]
    fn single_comparison_orders_utilities() {
        let m = PreferenceModel::fit(
            &[rec(&[1.0, 0.0], &[0.0, 1.0])],
            &PrefConfig::default(),
            &RngStream::new(0, "p"),
        )
        .unwrap();
        let (ua, _) = m.utility_posterior(&y(&[1.0, 0.0]));
        let (ub, _) = m.utility_posterior(&y(&[0.0, 1.0]));
        assert!(ua > ub);
        assert!(m.mode_gradient_norm() < 1e-6);
    }

    #[test]
    fn symmetric_duel_cancels() {
        let recs = [rec(&[1.0, 0.0], &[0.0, 1.0]), rec(&[0.0, 1.0], &[1.0, 0.0])];
        let m =
            PreferenceModel::fit(&recs, &PrefConfig::default(), &RngStream::new(0, "p")).unwrap();
        let (ua, _) = m.utility_posterior(&y(&[1.0, 0.0]));
        let (ub, _) = m.utility_posterior(&y(&[0.0, 1.0]));
        assert!((ua - ub).abs() < 1e-6);
    }

    #[test]
    fn identical_winner_and_loser_rejected() {
        let recs = [rec(&[1.0, 0.0], &[1.0, 0.0])];
        assert!(matches!(
            PreferenceModel::fit(&recs, &PrefConfig::default(), &RngStream::new(0, "p")),
            Err(Error::Contract(_))
        ));
    }
}
