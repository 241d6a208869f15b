//! Solve reports and checkpoint CSV output.

use crate::error::Result;
use crate::saddle::Checkpoint;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Constraint-satisfaction figures for the rounded policy of a constrained solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ConstraintMetrics {
    /// `min_k (Dᵀμ)_k` for `μ` rebuilt from the policy's exact stationary distribution.
    pub min_Dmu: f64,
    /// `‖(Î − P)ᵀμ‖₁` for the same `μ`.
    pub stationarity_l1: f64,
    pub K: usize,
    pub D_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mode: String,
    pub eps: f64,
    pub seed: u64,
    #[serde(rename = "T")]
    pub iterations: u64,
    /// Iteration count the step-size schedule asked for, when a cap cut the run short.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_budget: Option<u64>,
    pub samples: u64,
    /// Exact duality gap of the averaged iterates.
    pub gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subopt: Option<f64>,
    pub checkpoints: Vec<Checkpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<Vec<f64>>>,
    #[serde(flatten)]
    pub constraints: Option<ConstraintMetrics>,
    pub wall_ms: u64,
}

impl SolveReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Same report with the wall-clock field zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_ms: 0,
            ..self.clone()
        }
    }
}

pub const CSV_HEADER: &str = "t,samples,gap,subopt";

/// Writes checkpoints as CSV with ten significant digits; a missing suboptimality is an empty field.
pub fn write_checkpoints_csv<W: Write>(out: &mut W, checkpoints: &[Checkpoint]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for c in checkpoints {
        match c.subopt {
            Some(s) => writeln!(out, "{},{},{:.9e},{:.9e}", c.t, c.samples, c.gap, s)?,
            None => writeln!(out, "{},{},{:.9e},", c.t, c.samples, c.gap)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> SolveReport {
        SolveReport {
            mode: "mixing".into(),
            eps: 0.1,
            seed: 3,
            iterations: 10,
            full_budget: None,
            samples: 20,
            gap: 0.5,
            subopt: Some(0.01),
            checkpoints: vec![
                Checkpoint {
                    t: 5,
                    samples: 10,
                    gap: 1.0,
                    subopt: None,
                },
                Checkpoint {
                    t: 10,
                    samples: 20,
                    gap: 0.5,
                    subopt: Some(0.01),
                },
            ],
            policy: Some(vec![vec![1.0]]),
            constraints: None,
            wall_ms: 7,
        }
    }

    #[test]
    fn json_round_trip_uses_capital_t() {
        let r = report();
        let text = r.to_json().unwrap();
        assert!(text.contains("\"T\": 10"));
        assert!(text.contains("\"subopt\": null"));
        let back: SolveReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn constraint_metrics_are_flattened() {
        let mut r = report();
        r.constraints = Some(ConstraintMetrics {
            min_Dmu: 0.9,
            stationarity_l1: 0.0,
            K: 2,
            D_max: 1.0,
        });
        let value: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(value["K"], 2);
        assert_eq!(value["min_Dmu"], 0.9);
        let back: SolveReport = serde_json::from_value(value).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_checkpoints_csv(&mut buf, &report().checkpoints).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "5,10,1.000000000e0,");
        assert_eq!(lines[2], "10,20,5.000000000e-1,1.000000000e-2");
    }
}
