use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::space::{CurvatureDimension, ModelSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Nothing to check, e.g. an infinite distortion coefficient makes the bound `-inf`.
    VacuousPass,
    /// Evaluated, but the parameters lie where the bound is not established; never asserted.
    OutsideRegime,
    /// The check could not be evaluated.
    Error,
}

impl Verdict {
    pub fn is_failure(self) -> bool {
        matches!(self, Verdict::Fail | Verdict::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub k: f64,
    pub n: f64,
    /// `[T]` for single-time checks, `[s, t]` for two-time checks.
    pub times: Vec<f64>,
    pub model: String,
    pub nodes: usize,
    pub spacing: f64,
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl ReportParams {
    pub fn new(space: &ModelSpace, cd: CurvatureDimension, times: &[f64]) -> Self {
        Self {
            k: cd.k,
            n: cd.n,
            times: times.to_vec(),
            model: space.name().to_string(),
            nodes: space.len(),
            spacing: space.spacing(),
            fingerprint: space.fingerprint(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub params: ReportParams,
    /// Pointwise slack, positive when the inequality holds.
    #[serde(skip)]
    pub margin_field: Vec<f64>,
    /// Which entries of `margin_field` enter `min_margin`.
    #[serde(skip)]
    pub asserted: Vec<bool>,
    pub min_margin: f64,
    /// Minimum over the unasserted entries (boundary nodes), if any.
    pub unasserted_min_margin: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
}

impl InequalityReport {
    /// Builds a report whose verdict is `Pass` iff the asserted minimum is `>= -tolerance`.
    pub fn from_field(
        name: impl Into<String>,
        params: ReportParams,
        margin_field: Vec<f64>,
        asserted: Vec<bool>,
        tolerance: f64,
    ) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(LabError::InvalidParameter(format!("tolerance must be > 0, got {tolerance}")));
        }
        if asserted.len() != margin_field.len() {
            return Err(LabError::Dimension { expected: margin_field.len(), actual: asserted.len() });
        }
        let pick = |want: bool| {
            margin_field
                .iter()
                .zip(&asserted)
                .filter(|(_, &a)| a == want)
                .map(|(&m, _)| m)
                .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.min(m))))
        };
        let min_margin = pick(true).unwrap_or(f64::INFINITY);
        let unasserted_min_margin = pick(false);
        let verdict = if min_margin.is_nan() {
            Verdict::Error
        } else if min_margin >= -tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Ok(Self {
            name: name.into(),
            params,
            margin_field,
            asserted,
            min_margin,
            unasserted_min_margin,
            tolerance,
            verdict,
            notes: Vec::new(),
            extras: BTreeMap::new(),
        })
    }

    /// Single scalar margin, always asserted.
    pub fn scalar(name: impl Into<String>, params: ReportParams, margin: f64, tolerance: f64) -> Result<Self> {
        Self::from_field(name, params, vec![margin], vec![true], tolerance)
    }

    pub fn passed(&self) -> bool {
        !self.verdict.is_failure()
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }

    /// Keeps the margins but stops the verdict from being asserted.
    pub fn mark_outside_regime(mut self, why: impl Into<String>) -> Self {
        self.verdict = Verdict::OutsideRegime;
        self.notes.push(why.into());
        self
    }

    /// `node,margin,asserted` table.
    pub fn margins_csv(&self) -> String {
        let mut out = String::from("node,margin,asserted\n");
        for (i, (m, a)) in self.margin_field.iter().zip(&self.asserted).enumerate() {
            let _ = writeln!(out, "{i},{m:.17e},{}", u8::from(*a));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Sort key making suite output independent of evaluation order.
    pub fn sort_key(&self) -> (String, String) {
        (self.name.clone(), serde_json::to_string(&self.params).unwrap_or_default())
    }
}
