//! Check reports shared by the verification operations and the CLI.

use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Error,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Error => "error",
        };
        write!(f, "{s}")
    }
}

/// Outcome of one numeric or canonical check: the worst residual seen and
/// where it was seen.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub status: CheckStatus,
    /// Maximum residual over the samples; `None` when the check errored
    /// before producing a number.
    pub residual: Option<f64>,
    /// Flattened worst sample point (slot order), when applicable.
    pub point: Option<Vec<f64>>,
    #[serde(skip)]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn pass(name: impl Into<String>, residual: f64) -> CheckReport {
        CheckReport {
            name: name.into(),
            status: CheckStatus::Pass,
            residual: Some(residual),
            point: None,
            notes: Vec::new(),
        }
    }

    pub fn fail(name: impl Into<String>, residual: f64) -> CheckReport {
        CheckReport {
            name: name.into(),
            status: CheckStatus::Fail,
            residual: Some(residual),
            point: None,
            notes: Vec::new(),
        }
    }

    pub fn from_residual(name: impl Into<String>, residual: f64, tol: f64) -> CheckReport {
        if residual <= tol {
            CheckReport::pass(name, residual)
        } else {
            CheckReport::fail(name, residual)
        }
    }

    pub fn error(name: impl Into<String>, message: impl fmt::Display) -> CheckReport {
        CheckReport {
            name: name.into(),
            status: CheckStatus::Error,
            residual: None,
            point: None,
            notes: vec![message.to_string()],
        }
    }

    pub fn at_point(mut self, point: Vec<f64>) -> CheckReport {
        self.point = Some(point);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> CheckReport {
        self.notes.push(note.into());
        self
    }
}

/// Track the worst (largest) residual and the point where it occurred.
#[derive(Debug, Clone, Default)]
pub struct WorstResidual {
    pub residual: f64,
    pub point: Option<Vec<f64>>,
}

impl WorstResidual {
    pub fn update(&mut self, residual: f64, point: &[f64]) {
        if residual >= self.residual {
            self.residual = residual;
            self.point = Some(point.to_vec());
        }
    }

    pub fn into_report(self, name: impl Into<String>, tol: f64) -> CheckReport {
        let mut r = CheckReport::from_residual(name, self.residual, tol);
        r.point = self.point;
        r
    }
}
