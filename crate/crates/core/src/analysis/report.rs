use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellVerdict {
    Pass,
    Fail,
    /// Reported for reference; no tolerance applies to this cell alone.
    Info,
    /// The statistic is undefined for these coordinates.
    Absent,
}

impl CellVerdict {
    pub fn from_check(ok: bool) -> Self {
        if ok {
            CellVerdict::Pass
        } else {
            CellVerdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CellVerdict::Pass => "pass",
            CellVerdict::Fail => "fail",
            CellVerdict::Info => "info",
            CellVerdict::Absent => "absent",
        }
    }
}

/// One grid point. `grid` is aligned with [`ExperimentReport::grid_columns`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub grid: Vec<String>,
    pub statistic: Option<f64>,
    pub stderr: Option<f64>,
    pub replicas: usize,
    pub verdict: CellVerdict,
}

/// A named check: `passed` is `lower <= value <= upper` for the bounds
/// present, except where `strict` asks for `value < upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub strict: bool,
    pub passed: bool,
}

impl Verdict {
    pub fn check(name: &str, value: Option<f64>, lower: Option<f64>, upper: Option<f64>, strict: bool) -> Self {
        let passed = value.is_some_and(|v| {
            let above = lower.is_none_or(|lo| v >= lo);
            let below = upper.is_none_or(|hi| if strict { v < hi } else { v <= hi });
            above && below
        });
        Verdict { name: name.to_string(), value, lower, upper, strict, passed }
    }

    pub fn at_most(name: &str, value: f64, upper: f64) -> Self {
        Verdict::check(name, Some(value), None, Some(upper), false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Master seed; every cell's streams derive from it and the cell's grid
    /// coordinates.
    pub seed: u64,
    pub grid_columns: Vec<String>,
    pub cells: Vec<Cell>,
    pub verdicts: Vec<Verdict>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}
