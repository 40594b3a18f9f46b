//! Bound-constrained local minimizers used for hyperparameter fitting.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub memory: usize,
    pub gtol: f64,
    pub ftol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            memory: 8,
            gtol: 1e-6,
            ftol: 1e-10,
        }
    }
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Gradient components that would move the iterate out of the box are dropped.
fn free_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((xi, gi), (lo, hi))| {
            if (*xi <= *lo && *gi > 0.0) || (*xi >= *hi && *gi < 0.0) {
                0.0
            } else {
                *gi
            }
        })
        .collect()
}

/// Projected L-BFGS. `f` writes the gradient into its second argument and
/// returns the objective; non-finite values are treated as `+inf`.
pub fn lbfgs_box(
    mut f: impl FnMut(&[f64], &mut [f64]) -> f64,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: LbfgsOptions,
) -> Minimum {
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evals = 1;
    if !fx.is_finite() {
        return Minimum {
            x,
            value: f64::INFINITY,
            evaluations: evals,
        };
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut g_new = vec![0.0; n];
    for iter in 0..opts.max_iter {
        let pg = free_gradient(&x, &g, lower, upper);
        let pg_norm = libm::sqrt(dot(&pg, &pg));
        if pg_norm < opts.gtol {
            break;
        }
        // two-loop recursion on the free gradient
        let mut q = pg.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q
            .iter()
            .zip(&pg)
            .map(|(v, p)| if *p == 0.0 { 0.0 } else { -v })
            .collect();
        if dot(&dir, &pg) >= 0.0 {
            dir = pg.iter().map(|v| -v).collect();
            history.clear();
        }
        let mut step = if iter == 0 && history.is_empty() {
            (1.0 / pg_norm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial, lower, upper);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let ft = f(&trial, &mut g_new);
            evals += 1;
            if ft.is_finite() && ft <= fx + 1e-4 * dot(&g, &moved) {
                accepted = Some((trial, moved, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, s, ft)) = accepted else {
            break;
        };
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let improvement = fx - ft;
        x = trial;
        fx = ft;
        g.copy_from_slice(&g_new);
        if improvement.abs() <= opts.ftol * (1.0 + fx.abs()) {
            break;
        }
    }
    Minimum {
        x,
        value: fx,
        evaluations: evals,
    }
}

/// Nelder–Mead simplex with coordinates clamped into the box.
pub fn nelder_mead_box(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    initial_step: f64,
    max_evals: usize,
    ftol: f64,
) -> Minimum {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &mut Vec<f64>, evals: &mut usize| {
        project(x, lower, upper);
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    let v0 = eval(&mut start, &mut evals);
    simplex.push((start.clone(), v0));
    for i in 0..n {
        let mut p = start.clone();
        p[i] += if p[i] + initial_step <= upper[i] {
            initial_step
        } else {
            -initial_step
        };
        let v = eval(&mut p, &mut evals);
        simplex.push((p, v));
    }
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            centroid
                .iter_mut()
                .zip(p)
                .for_each(|(c, v)| *c += v / n as f64);
        }
        let worst_point = simplex[n].0.clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst_point)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let mut reflected = along(-1.0);
        let fr = eval(&mut reflected, &mut evals);
        if fr < simplex[0].1 {
            let mut expanded = along(-2.0);
            let fe = eval(&mut expanded, &mut evals);
            simplex[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let t = if fr < worst { -0.5 } else { 0.5 };
            let mut contracted = along(t);
            let fc = eval(&mut contracted, &mut evals);
            if fc < worst.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                let best_point = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let mut p: Vec<f64> = best_point
                        .iter()
                        .zip(&item.0)
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    let v = eval(&mut p, &mut evals);
                    *item = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evaluations: evals,
    }
}
