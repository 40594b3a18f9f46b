//! Space-filling and local sampling.
//!
//! - [`sobol`]: scrambled Sobol points for initialization and candidate pools.
//! - [`lhs_unit_cube`]: Latin hypercube in `[0, 1]^d`.
//! - [`lhs_sphere`]: Latin hypercube mapped into a ball around a center, which
//!   is how local explanation sets are drawn.
//! - [`adaptive_radius`]: ball radius from the spread of an exploratory set.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::DesignPoint;
use crate::error::contract;
use crate::{Error, Result, RngStream};

/// Highest dimension with bundled direction numbers.
pub const SOBOL_MAX_DIM: usize = 32;
const BITS: usize = 32;

// Primitive polynomials (with leading and trailing bits) and initial
// direction numbers of the Joe–Kuo 6.21201 table; dimension 0 is the
// van der Corput sequence.
const POLY: [u32; SOBOL_MAX_DIM] = [
    1, 3, 7, 11, 13, 19, 25, 37, 41, 47, 55, 59, 61, 67, 91, 97, 103, 109, 115, 131, 137, 143, 145,
    157, 167, 171, 185, 191, 193, 203, 211, 213,
];
const VINIT: [[u32; 7]; SOBOL_MAX_DIM] = [
    [1, 0, 0, 0, 0, 0, 0],
    [1, 0, 0, 0, 0, 0, 0],
    [1, 3, 0, 0, 0, 0, 0],
    [1, 3, 1, 0, 0, 0, 0],
    [1, 1, 1, 0, 0, 0, 0],
    [1, 1, 3, 3, 0, 0, 0],
    [1, 3, 5, 13, 0, 0, 0],
    [1, 1, 5, 5, 17, 0, 0],
    [1, 1, 5, 5, 5, 0, 0],
    [1, 1, 7, 11, 19, 0, 0],
    [1, 1, 5, 1, 1, 0, 0],
    [1, 1, 1, 3, 11, 0, 0],
    [1, 3, 5, 5, 31, 0, 0],
    [1, 3, 3, 9, 7, 49, 0],
    [1, 1, 1, 15, 21, 21, 0],
    [1, 3, 1, 13, 27, 49, 0],
    [1, 1, 1, 15, 7, 5, 0],
    [1, 3, 1, 15, 13, 25, 0],
    [1, 1, 5, 5, 19, 61, 0],
    [1, 3, 7, 11, 23, 15, 103],
    [1, 3, 7, 13, 13, 15, 69],
    [1, 1, 3, 13, 7, 35, 63],
    [1, 3, 5, 9, 1, 25, 53],
    [1, 3, 1, 13, 9, 35, 107],
    [1, 3, 1, 5, 27, 61, 31],
    [1, 1, 5, 11, 19, 41, 61],
    [1, 3, 5, 3, 3, 13, 69],
    [1, 1, 7, 13, 1, 19, 1],
    [1, 3, 7, 5, 13, 19, 59],
    [1, 1, 3, 9, 25, 29, 41],
    [1, 3, 5, 13, 23, 1, 55],
    [1, 3, 7, 3, 13, 59, 17],
];

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = 1 << (BITS - 1 - j);
        }
        return v;
    }
    let poly = POLY[dim];
    let degree = (31 - poly.leading_zeros()) as usize;
    for j in 0..degree {
        v[j] = VINIT[dim][j] << (BITS - 1 - j);
    }
    for j in degree..BITS {
        let mut value = v[j - degree] ^ (v[j - degree] >> degree);
        for k in 1..degree {
            if (poly >> (degree - k)) & 1 == 1 {
                value ^= v[j - k];
            }
        }
        v[j] = value;
    }
    v
}

/// Applies a random lower-triangular binary matrix (unit diagonal) to the
/// bits of every direction number, most significant bit first.
fn linear_scramble(v: &mut [u32; BITS], rng: &mut impl Rng) {
    let mut rows = [0u32; BITS];
    for (p, row) in rows.iter_mut().enumerate() {
        // row p may mix bits 0..=p (MSB-first positions)
        let mut r: u32 = rng.random();
        let keep = if p == BITS - 1 {
            u32::MAX
        } else {
            !((1u32 << (BITS - 1 - p)) - 1)
        };
        r &= keep;
        r |= 1 << (BITS - 1 - p);
        *row = r;
    }
    for vj in v.iter_mut() {
        let mut out = 0u32;
        for (p, row) in rows.iter().enumerate() {
            if (row & *vj).count_ones() % 2 == 1 {
                out |= 1 << (BITS - 1 - p);
            }
        }
        *vj = out;
    }
}

fn sobol_points(n: usize, d: usize, scramble: Option<&RngStream>) -> Result<Vec<DesignPoint>> {
    contract!(
        n >= 1 && d >= 1,
        "sobol needs n >= 1 and d >= 1 (got n={n}, d={d})"
    );
    if d > SOBOL_MAX_DIM {
        return Err(Error::UnsupportedDimension {
            dim: d,
            max: SOBOL_MAX_DIM,
        });
    }
    let mut dirs: Vec<[u32; BITS]> = (0..d).map(direction_numbers).collect();
    let mut shift = vec![0u32; d];
    if let Some(stream) = scramble {
        let mut rng = stream.rng();
        for (v, s) in dirs.iter_mut().zip(shift.iter_mut()) {
            linear_scramble(v, &mut rng);
            *s = rng.random();
        }
    }
    let offset = if scramble.is_some() { 0.5 } else { 0.0 };
    let mut state = shift.clone();
    let mut out = Vec::with_capacity(n);
    // Index 0 of the Gray-code walk is the origin; emitted points start at index 1.
    for i in 0..n as u64 {
        let c = (!i).trailing_zeros() as usize;
        for (s, v) in state.iter_mut().zip(&dirs) {
            *s ^= v[c.min(BITS - 1)];
        }
        let coords = state
            .iter()
            .map(|s| (*s as f64 + offset) / 4_294_967_296.0)
            .collect();
        out.push(DesignPoint::clipped(coords));
    }
    Ok(out)
}

/// First `n` points of a `d`-dimensional scrambled Sobol sequence
/// (linear matrix scramble plus digital shift).
pub fn sobol(n: usize, d: usize, rng: &RngStream) -> Result<Vec<DesignPoint>> {
    sobol_points(n, d, Some(rng))
}

/// Unscrambled Sobol points, skipping the origin: the first point is `(0.5, ..., 0.5)`.
pub fn sobol_unscrambled(n: usize, d: usize) -> Result<Vec<DesignPoint>> {
    sobol_points(n, d, None)
}

/// Latin hypercube: along every axis the `n` points occupy the strata
/// `[j/n, (j+1)/n)` exactly once.
pub fn lhs_unit_cube(n: usize, d: usize, rng: &RngStream) -> Result<Vec<Vec<f64>>> {
    contract!(n >= 1, "lhs needs n >= 1");
    let mut r = rng.rng();
    let mut points = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(&mut r);
        for (p, &s) in points.iter_mut().zip(&strata) {
            let u: f64 = r.random();
            p[j] = ((s as f64 + u) / n as f64).min(1.0 - f64::EPSILON);
        }
    }
    Ok(points)
}

/// `N` local samples around a design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSet {
    pub center: DesignPoint,
    pub radius: f64,
    pub points: Vec<DesignPoint>,
}

/// Ball offsets before translation and clipping; every row has norm `<= radius`.
pub fn lhs_ball_offsets(d: usize, radius: f64, n: usize, rng: &RngStream) -> Result<Vec<Vec<f64>>> {
    contract!(n >= 2, "lhs_sphere needs n >= 2 (got {n})");
    contract!(
        radius > 0.0 && radius.is_finite(),
        "radius must be positive (got {radius})"
    );
    // The extra LHS column stratifies the radial coordinate.
    let cube = lhs_unit_cube(n, d + 1, rng)?;
    let inv_d = 1.0 / d as f64;
    Ok(cube
        .into_iter()
        .map(|u| {
            let mut w: Vec<f64> = u[..d].iter().map(|v| 2.0 * v - 1.0).collect();
            let norm = libm::sqrt(w.iter().map(|v| v * v).sum());
            let rho = radius * libm::pow(u[d], inv_d);
            if norm < 1e-300 {
                w.iter_mut().for_each(|v| *v = 0.0);
                w[0] = rho;
            } else {
                w.iter_mut().for_each(|v| *v *= rho / norm);
            }
            w
        })
        .collect())
}

/// LHS points mapped into the ball `‖x - center‖ <= radius`, then clipped to the unit cube.
pub fn lhs_sphere(
    center: &DesignPoint,
    radius: f64,
    n: usize,
    rng: &RngStream,
) -> Result<ExplanationSet> {
    let offsets = lhs_ball_offsets(center.dim(), radius, n, rng)?;
    let points = offsets
        .into_iter()
        .map(|w| DesignPoint::clipped(center.coords().iter().zip(&w).map(|(c, o)| c + o).collect()))
        .collect();
    Ok(ExplanationSet {
        center: center.clone(),
        radius,
        points,
    })
}

pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// Population standard deviation of the distances of an exploratory set drawn
/// within `r0`, floored at `r_min`.
pub fn adaptive_radius(
    center: &DesignPoint,
    r0: f64,
    r_min: f64,
    n: usize,
    rng: &RngStream,
) -> Result<f64> {
    contract!(r0 > 0.0, "r0 must be positive (got {r0})");
    let set = lhs_sphere(center, r0, n.max(2), rng)?;
    let distances: Vec<f64> = set.points.iter().map(|p| p.distance(center)).collect();
    Ok(population_std(&distances).max(r_min))
}
