//! Residual bookkeeping: every verification in the engine produces a named
//! check with a max residual, the point where it was attained, a tolerance,
//! and a pass flag. Reports serialize deterministically (checks sorted by
//! name, fields in struct order).

use serde::{Deserialize, Serialize};

use crate::wirtinger::WPoint;

/// Default tolerance ledger: exact-AD identities, completion/metric-mediated
/// checks, finite-difference cross-checks, and ODE admissibility.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    pub exact: f64,
    pub metric: f64,
    pub fd: f64,
    pub ode: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact: 1e-9,
            metric: 1e-8,
            fd: 1e-6,
            ode: 1e-6,
        }
    }
}

/// Complex vector echoed as `[re, im]` pairs so the JSON is stable.
fn echo(values: &[num_complex::Complex64]) -> Vec<[f64; 2]> {
    values.iter().map(|c| [c.re, c.im]).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointEcho {
    pub z: Vec<[f64; 2]>,
    pub u: Vec<[f64; 2]>,
}

impl From<&WPoint> for PointEcho {
    fn from(p: &WPoint) -> Self {
        PointEcho {
            z: echo(&p.z),
            u: echo(&p.u),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<PointEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Tracks the maximum residual of one named check over a point batch.
#[derive(Debug, Clone)]
pub struct ResidualAccumulator {
    name: String,
    tolerance: f64,
    max: f64,
    worst: Option<PointEcho>,
    note: Option<String>,
}

impl ResidualAccumulator {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        ResidualAccumulator {
            name: name.into(),
            tolerance,
            max: 0.0,
            worst: None,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn observe(&mut self, residual: f64, point: &WPoint) {
        if residual > self.max || self.worst.is_none() {
            self.max = self.max.max(residual);
            self.worst = Some(point.into());
        }
    }

    pub fn observe_value(&mut self, residual: f64) {
        self.max = self.max.max(residual);
    }

    pub fn current_max(&self) -> f64 {
        self.max
    }

    pub fn finish(self) -> CheckResult {
        CheckResult {
            pass: self.max <= self.tolerance,
            name: self.name,
            max_residual: self.max,
            tolerance: self.tolerance,
            worst_point: self.worst,
            note: self.note,
        }
    }
}

/// Per-identity maximum absolute residuals over a sample-point batch.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    pub checks: Vec<CheckResult>,
}

impl ResidualReport {
    pub fn push(&mut self, check: CheckResult) {
        self.checks.push(check);
    }

    pub fn merge(&mut self, other: ResidualReport) {
        self.checks.extend(other.checks);
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn max_residual(&self, name: &str) -> Option<f64> {
        self.get(name).map(|c| c.max_residual)
    }

    /// Sorts checks by name and asserts uniqueness; call before serializing.
    pub fn finalize(mut self) -> ResidualReport {
        self.checks.sort_by(|a, b| a.name.cmp(&b.name));
        for window in self.checks.windows(2) {
            assert_ne!(window[0].name, window[1].name, "duplicate check name");
        }
        self
    }
}
