//! Simulated decision makers.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::benchmarks::BenchmarkProblem;
use crate::engine::Choice;
use crate::error::contract;
use crate::explain::ExplanationBundle;
use crate::{Error, Result, RngStream};

/// Agent selector as written in configs: `ideal`, `noisy:N`, or `molone`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentSpec {
    Ideal,
    Noisy(usize),
    Molone,
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Ideal => f.write_str("ideal"),
            AgentSpec::Noisy(n) => write!(f, "noisy:{n}"),
            AgentSpec::Molone => f.write_str("molone"),
        }
    }
}

impl FromStr for AgentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "ideal" => Ok(AgentSpec::Ideal),
            "molone" | "molone_guided" | "guided" => Ok(AgentSpec::Molone),
            _ => match t.strip_prefix("noisy:").map(str::parse::<usize>) {
                Some(Ok(n)) => Ok(AgentSpec::Noisy(n)),
                _ => Err(Error::Contract(format!(
                    "unknown agent '{s}' (expected ideal, noisy:N or molone)"
                ))),
            },
        }
    }
}

impl Serialize for AgentSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for AgentSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl AgentSpec {
    pub fn needs_explanations(self) -> bool {
        self == AgentSpec::Molone
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPolicy {
    pub spec: AgentSpec,
    pub relevant_dims: Vec<usize>,
    pub flip_schedule: BTreeSet<usize>,
}

/// `wrong_count` distinct indices drawn uniformly from `0..total`.
pub fn make_flip_schedule(
    total: usize,
    wrong_count: usize,
    rng: &RngStream,
) -> Result<BTreeSet<usize>> {
    contract!(
        wrong_count <= total,
        "wrong_count {wrong_count} exceeds total {total}"
    );
    Ok(index::sample(&mut rng.rng(), total, wrong_count)
        .into_iter()
        .collect())
}

impl AgentPolicy {
    /// `total` is the number of decisions the agent will make in a run.
    pub fn new(
        spec: AgentSpec,
        problem: &BenchmarkProblem,
        total: usize,
        rng: &RngStream,
    ) -> Result<Self> {
        let flip_schedule = match spec {
            AgentSpec::Noisy(n) => make_flip_schedule(total, n, rng)?,
            _ => BTreeSet::new(),
        };
        Ok(Self {
            spec,
            relevant_dims: problem.utility_dims.clone(),
            flip_schedule,
        })
    }

    fn relevant_sum(&self, v: &[f64]) -> f64 {
        self.relevant_dims.iter().map(|&i| v[i]).sum()
    }

    /// `outcomes` are what the agent sees for A and B: true outcomes in simulation.
    pub fn choose(
        &self,
        outcomes: (&[f64], &[f64]),
        bundle: Option<&ExplanationBundle>,
        comparison_index: usize,
    ) -> Result<Choice> {
        let by = |a: f64, b: f64| if a >= b { Choice::A } else { Choice::B };
        match self.spec {
            AgentSpec::Ideal => Ok(by(
                self.relevant_sum(outcomes.0),
                self.relevant_sum(outcomes.1),
            )),
            AgentSpec::Noisy(_) => {
                let ideal = by(self.relevant_sum(outcomes.0), self.relevant_sum(outcomes.1));
                Ok(if self.flip_schedule.contains(&comparison_index) {
                    ideal.other()
                } else {
                    ideal
                })
            }
            AgentSpec::Molone => {
                let b = bundle.ok_or_else(|| {
                    Error::Contract("the molone agent needs an explanation bundle".into())
                })?;
                Ok(by(
                    self.relevant_sum(&b.phi_y_a.values),
                    self.relevant_sum(&b.phi_y_b.values),
                ))
            }
        }
    }
}
