use serde::{Deserialize, Serialize};

/// One named invariant check with its residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub passed: bool,
}

/// Residual report produced by the structure and curvature validators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub tolerance: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            checks: Vec::new(),
        }
    }

    /// Records a residual; NaN counts as a failure.
    pub fn push(&mut self, name: impl Into<String>, residual: f64) {
        let passed = residual < self.tolerance;
        self.checks.push(Check {
            name: name.into(),
            residual,
            passed,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failing(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    }
}
