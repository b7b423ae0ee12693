//! Scientific studies built on the kernels and the finite element solver,
//! plus the report that aggregates them.

pub mod decay;
pub mod energy;
pub mod kernel_suite;
pub mod report;
pub mod traction;
pub mod truncation;
pub mod wellposed;

use serde::{Deserialize, Serialize};

pub use decay::{decay_study, estimate_c0, reference_decay_study, sphere_weight_study, DecayOptions, DecayStudy, SphereWeightStudy};
pub use energy::{energy_identity_study, smooth_test_field, EnergyOptions, EnergyStudy};
pub use kernel_suite::{kernel_suite, KernelSuite, KernelSuiteOptions};
pub use report::{Report, StudyOutcome, Table};
pub use traction::{traction_decay_study, TractionOptions, TractionStudy};
pub use truncation::{truncation_study, truncation_study_with_progress, MeshPolicy, TruncationOptions, TruncationRun, TruncationStudy};
pub use wellposed::{wellposedness_study, WellPosednessOptions, WellPosednessStudy};

/// One acceptance check: a measured value against a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance rule, e.g. `<= 1e-6` or `in [-1.4, -0.7]`.
    pub rule: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, rule: format!("<= {limit:e}"), passed: value <= limit }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, rule: format!(">= {limit}"), passed: value >= limit }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), value, rule: format!("in [{lo}, {hi}]"), passed: value >= lo && value <= hi }
    }

    /// A yes/no condition recorded as 1 or 0.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, rule: "holds".into(), passed: ok }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// The study could not certify its own preconditions, so no verdict on
    /// the measured law is given.
    Inconclusive,
}

impl Status {
    pub fn from_checks(checks: &[Check]) -> Self {
        if checks.iter().all(|c| c.passed) {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// Maximum of finite values; `NaN` propagates so that broken samples fail checks.
pub(crate) fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}
