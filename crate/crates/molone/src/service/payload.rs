//! Wire shapes for the `/v1` API. Every real is rounded to 9 significant
//! digits before it is written.

use molone_core::engine::{CandidatePair, CandidateSample, Phase};
use molone_core::explain::{ComparativeMatrix, MatrixRow};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    WithExplanations,
    WithoutExplanations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePayload {
    pub x: Vec<f64>,
    pub y_pred_mean: Vec<f64>,
    pub y_pred_std: Vec<f64>,
}

impl From<&CandidateSample> for SamplePayload {
    fn from(s: &CandidateSample) -> Self {
        Self {
            x: s.x.coords().to_vec(),
            y_pred_mean: s.y_pred.mean.clone(),
            y_pred_std: s.y_pred.std.clone(),
        }
    }
}

/// The matrix without the sample echo; rows carry the statements only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixPayload {
    pub rows: Vec<MatrixRow>,
}

impl From<&ComparativeMatrix> for MatrixPayload {
    fn from(m: &ComparativeMatrix) -> Self {
        Self {
            rows: m.rows.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub comparisons_done: usize,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPayload {
    pub pair_id: u64,
    pub sample_a: SamplePayload,
    pub sample_b: SamplePayload,
    pub explanation_matrix: Option<MatrixPayload>,
    pub note: Option<String>,
    pub progress: Progress,
}

impl PairPayload {
    pub fn new(
        pair: &CandidatePair,
        matrix: Option<&ComparativeMatrix>,
        note: Option<String>,
        progress: Progress,
    ) -> Self {
        Self {
            pair_id: pair.pair_id,
            sample_a: (&pair.a).into(),
            sample_b: (&pair.b).into(),
            explanation_matrix: matrix.map(Into::into),
            note,
            progress,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: String,
    pub seed: u64,
    pub mode: Mode,
    pub budget: usize,
    pub pair: PairPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceResponse {
    pub accepted: bool,
    pub next_phase: Phase,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub comparisons_done: usize,
    pub best_utility_so_far: f64,
    pub trajectory: Vec<f64>,
}

/// `x` rounded to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Rounds every non-integer number inside a JSON value.
pub fn round_reals(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .and_then(|x| serde_json::Number::from_f64(round_sig9(x)))
            {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_reals),
        Value::Object(map) => map.values_mut().for_each(round_reals),
        _ => {}
    }
}

/// Serializes `value` with all reals rounded.
pub fn to_wire<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("wire types always serialize");
    round_reals(&mut v);
    v
}
