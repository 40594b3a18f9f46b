//! Monte-Carlo acquisition functions.
//!
//! * Pair selection: expected utility of the best option,
//!   `E[max(g(y_i), g(y_j))]`, over a shortlist of predicted outcomes.
//! * Experimentation: batch noisy expected improvement under integrated
//!   utility uncertainty, built greedily one design at a time. Draws of the
//!   outcome model and of the utility model are both fixed per batch step
//!   (common random numbers), and each new candidate is attached to the fixed
//!   draws by conditioning, so evaluating a candidate costs one triangular
//!   solve per draw rather than a fresh joint factorization.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{DesignPoint, OutcomeVector};
use crate::error::contract;
use crate::gp::GpModel;
use crate::linalg::{dot, Cholesky, Matrix};
use crate::pref::{PredictiveParts, PreferenceModel};
use crate::sampling::sobol;
use crate::{Result, RngStream};

/// Picks the shortlist pair maximizing `E[max(g(y_i), g(y_j))]`. Returns pool
/// indices `(i, j)` with `i < j`.
pub fn eubo_select(
    pref: &PreferenceModel,
    designs: &[DesignPoint],
    predicted: &[OutcomeVector],
    shortlist: usize,
    draws: usize,
    rng: &RngStream,
) -> Result<(usize, usize)> {
    contract!(
        designs.len() == predicted.len(),
        "designs and predictions differ in length"
    );
    contract!(
        designs.len() >= 2,
        "pair selection needs at least 2 candidates"
    );
    contract!(
        shortlist >= 2 && draws >= 1,
        "shortlist must be >= 2 and draws >= 1"
    );
    if designs.len() == 2 {
        return Ok((0, 1));
    }
    let first = predicted[0].values();
    if predicted.iter().all(|y| {
        y.values()
            .iter()
            .zip(first)
            .all(|(a, b)| (a - b).abs() <= 1e-12)
    }) {
        return Ok(max_distance_pair(designs));
    }
    let means: Vec<f64> = predicted
        .iter()
        .map(|y| pref.utility_mean(y.values()))
        .collect();
    let mut order: Vec<usize> = (0..predicted.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    order.truncate(shortlist);
    order.sort_unstable();
    let refs: Vec<&[f64]> = order.iter().map(|&i| predicted[i].values()).collect();
    let (mu, cov) = pref.joint_predictive(&refs);
    let chol = Cholesky::with_jitter(&cov)?;
    let c = order.len();
    let mut r = rng.rng();
    let mut score = Matrix::zeros(c, c);
    let mut z = vec![0.0; c];
    for _ in 0..draws {
        z.iter_mut().for_each(|v| *v = r.sample(StandardNormal));
        let u: Vec<f64> = chol
            .lower_mul(&z)
            .iter()
            .zip(&mu)
            .map(|(a, b)| a + b)
            .collect();
        for i in 0..c {
            for j in i + 1..c {
                score[(i, j)] += u[i].max(u[j]);
            }
        }
    }
    let mut best = (0, 1);
    for i in 0..c {
        for j in i + 1..c {
            // `order` is ascending, so the first strict maximum is the lowest pool-index pair
            if score[(i, j)] > score[best] {
                best = (i, j);
            }
        }
    }
    Ok((order[best.0], order[best.1]))
}

fn max_distance_pair(designs: &[DesignPoint]) -> (usize, usize) {
    let mut best = (0, 1, -1.0);
    for i in 0..designs.len() {
        for j in i + 1..designs.len() {
            let d = designs[i].distance(&designs[j]);
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.0, best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchConfig {
    pub q: usize,
    pub draws: usize,
    pub pool: usize,
    pub starts: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evals_per_start: usize,
    /// Keep only baseline points that are best under at least one draw.
    pub prune_baseline: bool,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            q: 4,
            draws: 128,
            pool: 128,
            starts: 16,
            initial_step: 0.1,
            min_step: 1e-3,
            max_evals_per_start: 24,
            prune_baseline: true,
        }
    }
}

/// One output's joint draws over the fixed set.
struct OutputDraws {
    chol: Cholesky,
    whitened_fixed: Vec<Vec<f64>>,
    /// `z[s]`: standard normals behind draw `s` over the fixed set.
    z: Vec<Vec<f64>>,
    zeta: Vec<f64>,
}

/// One utility draw conditioned on one outcome draw over the fixed set.
struct UtilityDraw {
    parts: Vec<PredictiveParts>,
    chol: Cholesky,
    xi: Vec<f64>,
    eta: f64,
    /// Best sampled utility over the baseline and over pending points.
    baseline_max: f64,
    pending_max: f64,
}

/// Fixed draws over `baseline ∪ pending` that make the acquisition a
/// deterministic function of a single candidate.
pub struct NeiuuEstimator<'a> {
    gp: &'a GpModel,
    pref: &'a PreferenceModel,
    fixed: Vec<DesignPoint>,
    outputs: Vec<OutputDraws>,
    utilities: Vec<UtilityDraw>,
}

fn standard_normals(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

/// Joint draws of the outcome model at `xs`: one `|xs| × k` matrix per draw.
fn outcome_draws(
    gp: &GpModel,
    xs: &[DesignPoint],
    draws: usize,
    rng: &RngStream,
) -> Result<(Vec<Matrix>, Vec<OutputDraws>)> {
    let k = gp.output_dim();
    let n = xs.len();
    let mut samples = vec![Matrix::zeros(n, k); draws];
    let mut outputs = Vec::with_capacity(k);
    for m in 0..k {
        let mut r = rng.fork(m).rng();
        let (mean, cov) = gp.joint_posterior(m, xs);
        let chol = Cholesky::with_jitter(&cov)?;
        let z: Vec<Vec<f64>> = (0..draws).map(|_| standard_normals(&mut r, n)).collect();
        let zeta = standard_normals(&mut r, draws);
        for (s, zs) in z.iter().enumerate() {
            for (i, v) in chol.lower_mul(zs).iter().enumerate() {
                samples[s][(i, m)] = mean[i] + v;
            }
        }
        let whitened_fixed = xs.iter().map(|x| gp.whitened_cross(m, x)).collect();
        outputs.push(OutputDraws {
            chol,
            whitened_fixed,
            z,
            zeta,
        });
    }
    Ok((samples, outputs))
}

/// Indices of baseline points that attain the sampled utility maximum in at least one draw.
pub fn prune_baseline(
    gp: &GpModel,
    pref: &PreferenceModel,
    baseline: &[DesignPoint],
    draws: usize,
    rng: &RngStream,
) -> Result<Vec<usize>> {
    contract!(!baseline.is_empty(), "baseline must not be empty");
    let (samples, _) = outcome_draws(gp, baseline, draws, &rng.fork("outcomes"))?;
    let mut r = rng.fork("utility").rng();
    let mut keep = vec![false; baseline.len()];
    for y in &samples {
        let refs: Vec<&[f64]> = (0..y.rows()).map(|i| y.row(i)).collect();
        let (mu, cov) = pref.joint_predictive(&refs);
        let chol = Cholesky::with_jitter(&cov)?;
        let xi = standard_normals(&mut r, baseline.len());
        let u: Vec<f64> = chol
            .lower_mul(&xi)
            .iter()
            .zip(&mu)
            .map(|(a, b)| a + b)
            .collect();
        let best = (0..u.len()).fold(0, |b, i| if u[i] > u[b] { i } else { b });
        keep[best] = true;
    }
    Ok((0..baseline.len()).filter(|&i| keep[i]).collect())
}

impl<'a> NeiuuEstimator<'a> {
    /// `fixed = baseline ++ pending`; the first `n_baseline` entries are the baseline.
    pub fn new(
        gp: &'a GpModel,
        pref: &'a PreferenceModel,
        baseline: &[DesignPoint],
        pending: &[DesignPoint],
        draws: usize,
        rng: &RngStream,
    ) -> Result<Self> {
        contract!(!baseline.is_empty(), "baseline must not be empty");
        contract!(draws >= 1, "need at least one draw");
        let n_base = baseline.len();
        let fixed: Vec<DesignPoint> = baseline.iter().chain(pending).cloned().collect();
        let (samples, outputs) = outcome_draws(gp, &fixed, draws, &rng.fork("outcomes"))?;
        let mut r = rng.fork("utility").rng();
        let mut utilities = Vec::with_capacity(draws);
        for y in &samples {
            let parts: Vec<PredictiveParts> = (0..y.rows())
                .map(|i| pref.predictive_parts(y.row(i)))
                .collect();
            let n = parts.len();
            let cov = Matrix::from_fn(n, n, |i, j| pref.predictive_cov(&parts[i], &parts[j]));
            let chol = Cholesky::with_jitter(&cov)?;
            let xi = standard_normals(&mut r, n);
            let eta = r.sample(StandardNormal);
            let u: Vec<f64> = chol
                .lower_mul(&xi)
                .iter()
                .zip(&parts)
                .map(|(a, p)| a + p.mean)
                .collect();
            let baseline_max = u[..n_base]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let pending_max = u[n_base..]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            utilities.push(UtilityDraw {
                parts,
                chol,
                xi,
                eta,
                baseline_max,
                pending_max,
            });
        }
        Ok(Self {
            gp,
            pref,
            fixed,
            outputs,
            utilities,
        })
    }

    /// Monte-Carlo estimate of `E[max(0, max(ũ(pending ∪ {x})) − max ũ(baseline))]`.
    pub fn value(&self, x: &DesignPoint) -> f64 {
        let k = self.outputs.len();
        let mean = self.gp.posterior_mean(x);
        // conditional of f(x) on the fixed draws, per output
        let mut coef = Vec::with_capacity(k);
        let mut resid_sd = Vec::with_capacity(k);
        for (m, out) in self.outputs.iter().enumerate() {
            let gp = &self.gp.outputs()[m];
            let s2 = gp.y_std * gp.y_std;
            let vx = self.gp.whitened_cross(m, x);
            let c: Vec<f64> = self
                .fixed
                .iter()
                .zip(&out.whitened_fixed)
                .map(|(f, vf)| s2 * (gp.kernel.eval(x.coords(), f.coords()) - dot(&vx, vf)))
                .collect();
            let var = s2 * (gp.kernel.output_scale - dot(&vx, &vx));
            let w = out.chol.solve_lower(&c);
            resid_sd.push(libm::sqrt((var - dot(&w, &w)).max(0.0)));
            coef.push(w);
        }
        let mut total = 0.0;
        let mut y = vec![0.0; k];
        for (s, ud) in self.utilities.iter().enumerate() {
            for m in 0..k {
                let out = &self.outputs[m];
                y[m] = mean[m] + dot(&coef[m], &out.z[s]) + resid_sd[m] * out.zeta[s];
            }
            let px = self.pref.predictive_parts(&y);
            let c: Vec<f64> = ud
                .parts
                .iter()
                .map(|p| self.pref.predictive_cov(&px, p))
                .collect();
            let var = self.pref.predictive_cov(&px, &px);
            let w = ud.chol.solve_lower(&c);
            let u = px.mean + dot(&w, &ud.xi) + libm::sqrt((var - dot(&w, &w)).max(0.0)) * ud.eta;
            total += (u.max(ud.pending_max) - ud.baseline_max).max(0.0);
        }
        total / self.utilities.len() as f64
    }
}

/// Coordinate-wise pattern search on `f` inside the unit cube, maximizing.
fn pattern_search(
    f: &impl Fn(&DesignPoint) -> f64,
    start: DesignPoint,
    start_value: f64,
    config: &BatchConfig,
) -> (DesignPoint, f64) {
    let mut x = start;
    let mut fx = start_value;
    let mut step = config.initial_step;
    let mut evals = 0;
    while step >= config.min_step && evals < config.max_evals_per_start {
        let mut improved = false;
        for j in 0..x.dim() {
            for dir in [1.0, -1.0] {
                let mut c = x.coords().to_vec();
                c[j] = (c[j] + dir * step).clamp(0.0, 1.0);
                if c[j] == x.coords()[j] {
                    continue;
                }
                let cand = DesignPoint::clipped(c);
                let v = f(&cand);
                evals += 1;
                if v > fx {
                    x = cand;
                    fx = v;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// Greedy batch of `config.q` designs maximizing the Monte-Carlo qNEIUU estimate.
pub fn select_batch(
    gp: &GpModel,
    pref: &PreferenceModel,
    baseline: &[DesignPoint],
    config: &BatchConfig,
    rng: &RngStream,
) -> Result<Vec<DesignPoint>> {
    contract!(
        config.q >= 1 && config.pool >= 1 && config.starts >= 1,
        "q, pool and starts must be positive"
    );
    let baseline: Vec<DesignPoint> = if config.prune_baseline {
        prune_baseline(gp, pref, baseline, config.draws, &rng.fork("prune"))?
            .into_iter()
            .map(|i| baseline[i].clone())
            .collect()
    } else {
        baseline.to_vec()
    };
    let pool = sobol(config.pool, gp.input_dim(), &rng.fork("pool"))?;
    let mut pending: Vec<DesignPoint> = Vec::with_capacity(config.q);
    for step in 0..config.q {
        let est = NeiuuEstimator::new(
            gp,
            pref,
            &baseline,
            &pending,
            config.draws,
            &rng.fork("step").fork(step),
        )?;
        let f = |x: &DesignPoint| est.value(x);
        let scores: Vec<f64> = pool.iter().map(&f).collect();
        let mut order: Vec<usize> = (0..pool.len())
            .filter(|&i| !pending.contains(&pool[i]))
            .collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let fallback = (pool[order[0]].clone(), scores[order[0]]);
        let mut best = fallback.clone();
        for &i in order.iter().take(config.starts) {
            // a start with no sampled improvement sits on a flat part of the estimate
            if scores[i] <= 0.0 {
                continue;
            }
            let (x, v) = pattern_search(&f, pool[i].clone(), scores[i], config);
            if v.is_finite() && v > best.1 {
                best = (x, v);
            }
        }
        if !best.1.is_finite() {
            best = fallback;
        }
        pending.push(best.0);
    }
    Ok(pending)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pref::{ComparisonRecord, ComparisonSource, PrefConfig};

    fn prefers_large_y1() -> PreferenceModel {
        let recs: Vec<ComparisonRecord> =
            [(1.0, 0.5), (0.5, 0.0), (1.0, 0.0), (0.8, 0.2), (0.6, 0.3)]
                .iter()
                .map(|&(w, l)| ComparisonRecord {
                    winner: OutcomeVector::new(vec![w]).unwrap(),
                    loser: OutcomeVector::new(vec![l]).unwrap(),
                    source: ComparisonSource::SimulatedAgent,
                })
                .collect();
        PreferenceModel::fit(&recs, &PrefConfig::default(), &RngStream::new(1, "pref")).unwrap()
    }

    fn pts(v: &[f64]) -> Vec<DesignPoint> {
        v.iter()
            .map(|x| DesignPoint::new(vec![*x]).unwrap())
            .collect()
    }

    fn ys(v: &[f64]) -> Vec<OutcomeVector> {
        v.iter()
            .map(|x| OutcomeVector::new(vec![*x]).unwrap())
            .collect()
    }

    #[test]
    fn two_candidates_are_returned() {
        let pref = prefers_large_y1();
        assert_eq!(
            eubo_select(
                &pref,
                &pts(&[0.1, 0.9]),
                &ys(&[0.3, 0.4]),
                16,
                8,
                &RngStream::new(0, "e")
            )
            .unwrap(),
            (0, 1)
        );
    }

    #[test]
    fn eubo_picks_two_largest() {
        let pref = prefers_large_y1();
        let pair = eubo_select(
            &pref,
            &pts(&[0.1, 0.5, 0.9]),
            &ys(&[0.0, 0.5, 1.0]),
            16,
            4096,
            &RngStream::new(0, "e"),
        )
        .unwrap();
        assert_eq!(pair, (1, 2));
    }

    #[test]
    fn identical_predictions_fall_back_to_distance() {
        let pref = prefers_large_y1();
        let pair = eubo_select(
            &pref,
            &pts(&[0.4, 0.0, 0.5, 1.0]),
            &ys(&[0.3; 4]),
            16,
            8,
            &RngStream::new(0, "e"),
        )
        .unwrap();
        assert_eq!(pair, (1, 3));
    }

    #[test]
    fn eubo_is_deterministic() {
        let pref = prefers_large_y1();
        let d = pts(&[0.1, 0.3, 0.5, 0.7, 0.9]);
        let y = ys(&[0.2, 0.9, 0.1, 0.8, 0.5]);
        let rng = RngStream::new(5, "e");
        assert_eq!(
            eubo_select(&pref, &d, &y, 16, 64, &rng).unwrap(),
            eubo_select(&pref, &d, &y, 16, 64, &rng).unwrap()
        );
    }
}
