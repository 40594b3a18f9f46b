//! Multi-objective test problems used as ground truth, each reduced to a
//! scalar utility by summing a fixed subset of outputs (larger is better).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::contract;
use crate::{Error, Result};

/// A point of the unit hypercube `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DesignPoint(Vec<f64>);

impl DesignPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = coords
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Domain(format!(
                "coordinate {i} = {v} outside [0, 1]"
            )));
        }
        Ok(Self(coords))
    }

    /// Builds a point by clipping every coordinate into `[0, 1]`.
    pub fn clipped(mut coords: Vec<f64>) -> Self {
        for c in coords.iter_mut() {
            *c = c.clamp(0.0, 1.0);
        }
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn distance(&self, other: &DesignPoint) -> f64 {
        euclidean(&self.0, &other.0)
    }
}

/// Black-box output `y = f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutcomeVector(Vec<f64>);

impl OutcomeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(
                "outcome vector has non-finite entries".to_string(),
            ));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkId {
    Dtlz2,
    Dtlz4,
    Zdt1,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 3] = [BenchmarkId::Dtlz2, BenchmarkId::Dtlz4, BenchmarkId::Zdt1];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkId::Dtlz2 => "dtlz2",
            BenchmarkId::Dtlz4 => "dtlz4",
            BenchmarkId::Zdt1 => "zdt1",
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dtlz2" => Ok(BenchmarkId::Dtlz2),
            "dtlz4" => Ok(BenchmarkId::Dtlz4),
            "zdt1" => Ok(BenchmarkId::Zdt1),
            other => Err(Error::Contract(format!("unknown benchmark '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkProblem {
    pub id: BenchmarkId,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Position-variable exponent; only read by DTLZ4.
    pub alpha: f64,
    pub utility_dims: Vec<usize>,
}

impl BenchmarkProblem {
    pub fn new(id: BenchmarkId) -> Self {
        match id {
            BenchmarkId::Dtlz2 => Self {
                id,
                input_dim: 5,
                output_dim: 4,
                alpha: 1.0,
                utility_dims: (0..3).collect(),
            },
            BenchmarkId::Dtlz4 => Self {
                id,
                input_dim: 5,
                output_dim: 4,
                alpha: 100.0,
                utility_dims: (0..3).collect(),
            },
            BenchmarkId::Zdt1 => Self {
                id,
                input_dim: 5,
                output_dim: 2,
                alpha: 1.0,
                utility_dims: (0..2).collect(),
            },
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Human-readable hint naming the outputs that drive the utility.
    pub fn utility_note(&self) -> String {
        let names: Vec<String> = self
            .utility_dims
            .iter()
            .map(|d| format!("y{}", d + 1))
            .collect();
        format!("Maximize the sum of outputs {}.", names.join(", "))
    }

    pub fn evaluate(&self, x: &DesignPoint) -> Result<OutcomeVector> {
        contract!(
            x.dim() == self.input_dim,
            "{} expects {} inputs, got {}",
            self.id,
            self.input_dim,
            x.dim()
        );
        let xs = x.coords();
        if let Some((i, v)) = xs
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Domain(format!(
                "coordinate {i} = {v} outside [0, 1]"
            )));
        }
        let values = match self.id {
            BenchmarkId::Dtlz2 => dtlz(xs, self.output_dim, 1.0),
            BenchmarkId::Dtlz4 => dtlz(xs, self.output_dim, self.alpha),
            BenchmarkId::Zdt1 => zdt1(xs),
        };
        OutcomeVector::new(values)
    }

    pub fn true_utility(&self, y: &OutcomeVector) -> Result<f64> {
        contract!(
            y.dim() == self.output_dim,
            "{} expects {} outputs, got {}",
            self.id,
            self.output_dim,
            y.dim()
        );
        Ok(self.utility_dims.iter().map(|&i| y.values()[i]).sum())
    }

    /// Convenience: `true_utility(evaluate(x))`.
    pub fn utility_at(&self, x: &DesignPoint) -> Result<f64> {
        self.true_utility(&self.evaluate(x)?)
    }
}

/// DTLZ2-family objectives with `m` outputs; positions are the first `m-1`
/// coordinates, raised to `alpha` inside the trigonometric terms.
fn dtlz(x: &[f64], m: usize, alpha: f64) -> Vec<f64> {
    let g: f64 = x[m - 1..].iter().map(|v| (v - 0.5) * (v - 0.5)).sum();
    let theta: Vec<f64> = x[..m - 1]
        .iter()
        .map(|v| libm::pow(*v, alpha) * FRAC_PI_2)
        .collect();
    (0..m)
        .map(|i| {
            let mut f = 1.0 + g;
            for t in &theta[..m - 1 - i] {
                f *= libm::cos(*t);
            }
            if i > 0 {
                f *= libm::sin(theta[m - 1 - i]);
            }
            f
        })
        .collect()
}

fn zdt1(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let f1 = x[0];
    let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (n - 1) as f64;
    let f2 = g * (1.0 - libm::sqrt(f1 / g));
    alloc::vec![f1, f2]
}

/// DTLZ distance term `g`, exposed for property checks.
pub fn dtlz_distance(x: &[f64], m: usize) -> f64 {
    x[m - 1..].iter().map(|v| (v - 0.5) * (v - 0.5)).sum()
}
