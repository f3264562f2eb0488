//! Pass/fail records shared by the example runner and the suite.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|value - target| <= tolerance`
    Eq,
    /// `value <= target + tolerance`
    Le,
    /// `value >= target - tolerance`
    Ge,
    /// a boolean outcome; `value` is 1 or 0
    Holds,
}

/// One numerical comparison with its witness values and tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub relation: Relation,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl Check {
    fn new(name: impl Into<String>, relation: Relation, value: f64, target: f64, tolerance: f64) -> Self {
        let passed = match relation {
            Relation::Eq => (value - target).abs() <= tolerance,
            Relation::Le => value <= target + tolerance,
            Relation::Ge => value >= target - tolerance,
            Relation::Holds => value == 1.0,
        };
        Check { name: name.into(), relation, value, target, tolerance, passed, witness: None }
    }

    pub fn eq(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self::new(name, Relation::Eq, value, target, tolerance)
    }

    pub fn le(name: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        Self::new(name, Relation::Le, value, bound, tolerance)
    }

    pub fn ge(name: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        Self::new(name, Relation::Ge, value, bound, tolerance)
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, Relation::Holds, if ok { 1.0 } else { 0.0 }, 1.0, 0.0)
    }

    pub fn with_witness(mut self, w: impl Into<String>) -> Self {
        self.witness = Some(w.into());
        self
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}
