//! JSON run reports: everything needed to audit a verdict without
//! re-running — condition summaries, energy profile, certificates, the full
//! tolerance set, and a hash of the input config bytes.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    AnalysisParams, ConditionBReport, ConditionMode, ConditionReport, ConvergenceVerdict,
    EnergyProfile, Violation,
};
use crate::multiagent::SpReport;

pub const REPORT_VERSION: &str = "1";

/// How many violations are echoed verbatim in a summary.
const MAX_LISTED_VIOLATIONS: usize = 20;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub mode: ConditionMode,
    pub samples: usize,
    pub coordinates: usize,
    pub violation_count: usize,
    /// Largest checked product; absent when nothing was checked.
    pub worst_violation: Option<f64>,
    /// First violations, capped for report size.
    pub first_violations: Vec<Violation>,
}

impl From<&ConditionReport> for ConditionSummary {
    fn from(r: &ConditionReport) -> Self {
        Self {
            mode: r.mode,
            samples: r.samples,
            coordinates: r.coordinates,
            violation_count: r.violations.len(),
            worst_violation: r.worst_violation.is_finite().then_some(r.worst_violation),
            first_violations: r.violations.iter().take(MAX_LISTED_VIOLATIONS).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub initial: f64,
    pub r#final: f64,
    pub max_increase: f64,
    pub monotone: bool,
}

impl From<&EnergyProfile> for EnergySummary {
    fn from(p: &EnergyProfile) -> Self {
        Self {
            initial: *p.values.first().unwrap_or(&f64::NAN),
            r#final: *p.values.last().unwrap_or(&f64::NAN),
            max_increase: p.max_increase,
            monotone: p.monotone,
        }
    }
}

/// Serializable mirror of `ConvergenceVerdict`; the condition-(b) reports of
/// a NotConverged verdict live in `RunReport::condition_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerdictJson {
    Converged { limit: Vec<f64>, tail_diameter: f64 },
    NotConverged { accumulation_points: Vec<Vec<f64>> },
    Unbounded { exit_radius: f64 },
    Inconclusive { reason: String },
}

impl From<&ConvergenceVerdict> for VerdictJson {
    fn from(v: &ConvergenceVerdict) -> Self {
        match v {
            ConvergenceVerdict::Converged { limit, tail_diameter } => VerdictJson::Converged {
                limit: limit.iter().cloned().collect(),
                tail_diameter: *tail_diameter,
            },
            ConvergenceVerdict::NotConverged { accumulation_points, .. } => {
                VerdictJson::NotConverged {
                    accumulation_points: accumulation_points
                        .iter()
                        .map(|p| p.iter().cloned().collect())
                        .collect(),
                }
            }
            ConvergenceVerdict::Unbounded { exit_radius } => {
                VerdictJson::Unbounded { exit_radius: *exit_radius }
            }
            ConvergenceVerdict::Inconclusive { reason } => {
                VerdictJson::Inconclusive { reason: reason.clone() }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub report_version: String,
    /// SHA-256 of the input config file bytes, when a config was read.
    pub config_sha256: Option<String>,
    pub config_version: Option<String>,
    /// Full tolerance set in effect for this run.
    pub tolerances: AnalysisParams,
    pub weak_condition: Option<ConditionSummary>,
    pub strict_condition: Option<ConditionSummary>,
    pub energy: Option<EnergySummary>,
    pub verdict: Option<VerdictJson>,
    /// Condition-(b) certificates at estimated accumulation points.
    pub condition_b: Vec<ConditionBReport>,
    /// Residual-set membership of the limit (simulation runs).
    pub sp: Option<SpReport>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn new(tolerances: AnalysisParams) -> Self {
        Self {
            report_version: REPORT_VERSION.into(),
            config_sha256: None,
            config_version: None,
            tolerances,
            weak_condition: None,
            strict_condition: None,
            energy: None,
            verdict: None,
            condition_b: Vec::new(),
            sp: None,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn set_verdict(&mut self, v: &ConvergenceVerdict) {
        if let ConvergenceVerdict::NotConverged { condition_b, .. } = v {
            self.condition_b = condition_b.clone();
        }
        self.verdict = Some(VerdictJson::from(v));
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(sha256_hex(b"").len(), 64);
    }

    #[test]
    fn report_round_trips_through_json() {
        let mut report = RunReport::new(AnalysisParams::default());
        report.config_sha256 = Some(sha256_hex(b"cfg"));
        report.set_verdict(&ConvergenceVerdict::Converged {
            limit: DVector::from_vec(vec![1.0, 2.0]),
            tail_diameter: 1e-6,
        });
        let text = report.to_json();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn not_converged_moves_certificates() {
        let cert = ConditionBReport {
            point: vec![2.0, 0.5],
            sigma_min: 1e-16,
            sigma_max: 48.0,
            holds: true,
            kernel_vector: vec![0.0, 1.0],
            per_coordinate_products: vec![0.0, 0.0],
        };
        let mut report = RunReport::new(AnalysisParams::default());
        report.set_verdict(&ConvergenceVerdict::NotConverged {
            accumulation_points: vec![DVector::from_vec(vec![2.0, 0.5])],
            condition_b: vec![cert],
        });
        assert_eq!(report.condition_b.len(), 1);
        assert!(matches!(report.verdict, Some(VerdictJson::NotConverged { .. })));
    }

    #[test]
    fn infinite_worst_violation_serializes_as_absent() {
        let r = ConditionReport {
            mode: ConditionMode::Weak,
            samples: 0,
            coordinates: 2,
            violations: vec![],
            worst_violation: f64::NEG_INFINITY,
        };
        let summary = ConditionSummary::from(&r);
        assert_eq!(summary.worst_violation, None);
        let text = serde_json::to_string(&summary).unwrap();
        assert!(text.contains("\"worst_violation\":null"));
    }
}
