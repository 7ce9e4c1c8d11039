//! The machine-readable run report.

use std::collections::BTreeMap;

use pons_core::depgraph::Classification;
use pons_core::models::{Counterexample, ModelReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    /// Present for `model` runs.
    pub seed: Option<u64>,
    pub theorems: Vec<TheoremReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
    /// Conjectures and declare blocks: nothing to check.
    Unchecked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub name: String,
    /// `theorem`, `conjecture`, `declared` or `axiom`.
    pub kind: String,
    pub status: Status,
    pub failure: Option<String>,
    pub classification: Option<Classification>,
    /// Axioms the entry rests on, transitively.
    pub axioms: Vec<String>,
    /// Non-collinearity obligations taken on trust in permissive mode.
    pub assumptions: Vec<String>,
    pub models: BTreeMap<String, ModelSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// A Euclidean-only statement failing outside the plane, as it should.
    ExpectedDivergence,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::ExpectedDivergence => "expected-divergence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub trials_run: usize,
    pub skipped: usize,
    pub failures: usize,
    pub verdict: Verdict,
    pub counterexample: Option<CounterexampleReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub trial: usize,
    pub step: String,
    pub fact: String,
    pub points: BTreeMap<String, Vec<f64>>,
}

impl From<&Counterexample> for CounterexampleReport {
    fn from(c: &Counterexample) -> Self {
        CounterexampleReport {
            trial: c.trial,
            step: c.step.clone(),
            fact: c.fact.clone(),
            points: c.points.clone(),
        }
    }
}

impl ModelSummary {
    pub fn new(report: &ModelReport, verdict: Verdict) -> Self {
        ModelSummary {
            trials_run: report.trials_run,
            skipped: report.skipped,
            failures: report.failures,
            verdict,
            counterexample: report.first_counterexample.as_ref().map(Into::into),
        }
    }
}
