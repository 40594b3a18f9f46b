//! Local comparative explanations for a pair of candidate designs.
//!
//! For each candidate an explanation set is sampled in an adaptive-radius
//! ball; input importance is the largest absolute outcome-model gradient seen
//! on that set, outcome importance the largest absolute utility-model
//! gradient at the predicted outcomes. Comparing the two candidates'
//! importances dimension by dimension gives the why / why-not matrix.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::benchmarks::{DesignPoint, OutcomeVector};
use crate::error::contract;
use crate::gp::{GpModel, PosteriorSummary};
use crate::pref::PreferenceModel;
use crate::sampling::{adaptive_radius, lhs_sphere, ExplanationSet};
use crate::{Result, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceKind {
    Input,
    Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub kind: ImportanceKind,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceLabel {
    HighForA,
    HighForB,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceComparison {
    pub kind: ImportanceKind,
    pub labels: Vec<ImportanceLabel>,
    /// `φ_A − φ_B` per dimension.
    pub margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub kind: ImportanceKind,
    pub dim_index: usize,
    pub dim_name: String,
    /// Own importance minus the other sample's.
    pub margin: f64,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleLabel {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub sample: SampleLabel,
    pub why: Vec<Statement>,
    pub why_not: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedSample {
    pub x: DesignPoint,
    pub y_pred: PosteriorSummary,
}

/// Two rows (A then B) by why / why-not. Deliberately carries no recommendation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparativeMatrix {
    pub sample_a: ExplainedSample,
    pub sample_b: ExplainedSample,
    pub rows: Vec<MatrixRow>,
}

impl ComparativeMatrix {
    pub fn row(&self, sample: SampleLabel) -> &MatrixRow {
        &self.rows[match sample {
            SampleLabel::A => 0,
            SampleLabel::B => 1,
        }]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub n_points: usize,
    pub r0: f64,
    pub r_min: f64,
    pub eps_tie: f64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            n_points: 64,
            r0: 0.2,
            r_min: 0.01,
            eps_tie: 1e-6,
        }
    }
}

/// How one sample's explanation set was built, plus the uncertainty the
/// importance scores ignore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMetadata {
    pub n_points: usize,
    pub radius: f64,
    pub stream: RngStream,
    /// Mean over the set of each output's posterior std.
    pub mean_outcome_std: Vec<f64>,
    /// Mean over the set of the utility predictive std.
    pub mean_utility_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub matrix: ComparativeMatrix,
    pub phi_x_a: ImportanceVector,
    pub phi_x_b: ImportanceVector,
    pub phi_y_a: ImportanceVector,
    pub phi_y_b: ImportanceVector,
    pub set_a: SetMetadata,
    pub set_b: SetMetadata,
}

impl ExplanationBundle {
    /// Rebuilds the matrix from the stored importance vectors.
    pub fn rebuild_matrix(&self, eps_tie: f64) -> Result<ComparativeMatrix> {
        let cx = compare_importance(&self.phi_x_a, &self.phi_x_b, eps_tie)?;
        let cy = compare_importance(&self.phi_y_a, &self.phi_y_b, eps_tie)?;
        build_matrix(
            &cx,
            &cy,
            self.matrix.sample_a.clone(),
            self.matrix.sample_b.clone(),
        )
    }
}

pub fn input_feature_importance(
    model: &GpModel,
    xset: &ExplanationSet,
) -> Result<ImportanceVector> {
    contract!(
        xset.points.len() >= 2,
        "explanation set needs at least 2 points"
    );
    let d = model.input_dim();
    let mut phi = vec![0.0f64; d];
    for p in &xset.points {
        let g = model.posterior_mean_gradient(p);
        for m in 0..g.rows() {
            for (j, v) in g.row(m).iter().enumerate() {
                phi[j] = phi[j].max(v.abs());
            }
        }
    }
    Ok(ImportanceVector {
        kind: ImportanceKind::Input,
        values: phi,
    })
}

pub fn outcome_importance(pref: &PreferenceModel, predicted: &[OutcomeVector]) -> ImportanceVector {
    let mut phi = vec![0.0f64; pref.output_dim()];
    for y in predicted {
        for (p, g) in phi.iter_mut().zip(pref.utility_mean_gradient(y)) {
            *p = p.max(g.abs());
        }
    }
    ImportanceVector {
        kind: ImportanceKind::Outcome,
        values: phi,
    }
}

pub fn compare_importance(
    a: &ImportanceVector,
    b: &ImportanceVector,
    eps_tie: f64,
) -> Result<ImportanceComparison> {
    contract!(
        a.kind == b.kind,
        "cannot compare {:?} importance with {:?}",
        a.kind,
        b.kind
    );
    contract!(
        a.values.len() == b.values.len(),
        "importance vectors differ in length"
    );
    let margins: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    let labels = margins
        .iter()
        .map(|&m| {
            if m > eps_tie {
                ImportanceLabel::HighForA
            } else if m < -eps_tie {
                ImportanceLabel::HighForB
            } else {
                ImportanceLabel::Tie
            }
        })
        .collect();
    Ok(ImportanceComparison {
        kind: a.kind,
        labels,
        margins,
    })
}

pub fn dim_name(kind: ImportanceKind, index: usize) -> String {
    match kind {
        ImportanceKind::Input => format!("x{}", index + 1),
        ImportanceKind::Outcome => format!("y{}", index + 1),
    }
}

fn statement(kind: ImportanceKind, dim_index: usize, margin: f64) -> Statement {
    let dim_name = dim_name(kind, dim_index);
    let text = match (kind, margin > 0.0) {
        (ImportanceKind::Input, true) => {
            format!("{dim_name} has higher influence on the predicted outcomes here")
        }
        (ImportanceKind::Input, false) => {
            format!("{dim_name} has lower influence on the predicted outcomes here")
        }
        (ImportanceKind::Outcome, true) => format!("{dim_name} contributes more to utility here"),
        (ImportanceKind::Outcome, false) => format!("{dim_name} contributes less to utility here"),
    };
    Statement {
        kind,
        dim_index,
        dim_name,
        margin,
        text,
    }
}

pub fn build_matrix(
    comp_x: &ImportanceComparison,
    comp_y: &ImportanceComparison,
    sample_a: ExplainedSample,
    sample_b: ExplainedSample,
) -> Result<ComparativeMatrix> {
    contract!(
        comp_x.kind == ImportanceKind::Input && comp_y.kind == ImportanceKind::Outcome,
        "expected an input comparison followed by an outcome comparison"
    );
    let mut a = MatrixRow {
        sample: SampleLabel::A,
        why: Vec::new(),
        why_not: Vec::new(),
    };
    let mut b = MatrixRow {
        sample: SampleLabel::B,
        why: Vec::new(),
        why_not: Vec::new(),
    };
    for comp in [comp_x, comp_y] {
        for (j, (label, &m)) in comp.labels.iter().zip(&comp.margins).enumerate() {
            match label {
                ImportanceLabel::HighForA => {
                    a.why.push(statement(comp.kind, j, m));
                    b.why_not.push(statement(comp.kind, j, -m));
                }
                ImportanceLabel::HighForB => {
                    a.why_not.push(statement(comp.kind, j, m));
                    b.why.push(statement(comp.kind, j, -m));
                }
                ImportanceLabel::Tie => {}
            }
        }
    }
    Ok(ComparativeMatrix {
        sample_a,
        sample_b,
        rows: vec![a, b],
    })
}

struct SampleExplanation {
    summary: PosteriorSummary,
    phi_x: ImportanceVector,
    phi_y: ImportanceVector,
    meta: SetMetadata,
}

fn explain_one(
    x: &DesignPoint,
    model: &GpModel,
    pref: &PreferenceModel,
    config: &ExplainConfig,
    rng: &RngStream,
) -> Result<SampleExplanation> {
    contract!(
        x.dim() == model.input_dim(),
        "design dimension does not match the outcome model"
    );
    let radius = adaptive_radius(
        x,
        config.r0,
        config.r_min,
        config.n_points,
        &rng.fork("radius"),
    )?;
    let set = lhs_sphere(x, radius, config.n_points, &rng.fork("set"))?;
    let k = model.output_dim();
    let mut predicted = Vec::with_capacity(set.points.len());
    let mut mean_outcome_std = vec![0.0; k];
    let mut mean_utility_std = 0.0;
    let n = set.points.len() as f64;
    for p in &set.points {
        let post = model.posterior(p);
        for (acc, s) in mean_outcome_std.iter_mut().zip(&post.std) {
            *acc += s / n;
        }
        let y = OutcomeVector::new(post.mean)?;
        mean_utility_std += pref.utility_posterior(&y).1 / n;
        predicted.push(y);
    }
    Ok(SampleExplanation {
        summary: model.posterior(x),
        phi_x: input_feature_importance(model, &set)?,
        phi_y: outcome_importance(pref, &predicted),
        meta: SetMetadata {
            n_points: config.n_points,
            radius,
            stream: rng.clone(),
            mean_outcome_std,
            mean_utility_std,
        },
    })
}

/// Each sample uses its own stream so that `explain_pair(b, a, ..., rng_b, rng_a)`
/// yields the same matrix with rows exchanged.
pub fn explain_pair(
    x_a: &DesignPoint,
    x_b: &DesignPoint,
    model: &GpModel,
    pref: &PreferenceModel,
    config: &ExplainConfig,
    rng_a: &RngStream,
    rng_b: &RngStream,
) -> Result<ExplanationBundle> {
    contract!(
        pref.output_dim() == model.output_dim(),
        "outcome and utility models disagree on k"
    );
    let a = explain_one(x_a, model, pref, config, rng_a)?;
    let b = explain_one(x_b, model, pref, config, rng_b)?;
    let cx = compare_importance(&a.phi_x, &b.phi_x, config.eps_tie)?;
    let cy = compare_importance(&a.phi_y, &b.phi_y, config.eps_tie)?;
    let matrix = build_matrix(
        &cx,
        &cy,
        ExplainedSample {
            x: x_a.clone(),
            y_pred: a.summary,
        },
        ExplainedSample {
            x: x_b.clone(),
            y_pred: b.summary,
        },
    )?;
    Ok(ExplanationBundle {
        matrix,
        phi_x_a: a.phi_x,
        phi_x_b: b.phi_x,
        phi_y_a: a.phi_y,
        phi_y_b: b.phi_y,
        set_a: a.meta,
        set_b: b.meta,
    })
}
