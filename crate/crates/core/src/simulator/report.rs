//! End-to-end simulation run shared by the command line and the service.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{check_global_integrity, check_integrity, distribute, reconstruct, Dataset, IntegrityViolation};
use crate::fragmenter::FragmentationPlan;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentCount {
    pub site: String,
    pub fragment: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRoundTrip {
    pub table: String,
    pub original_rows: usize,
    pub rebuilt_rows: usize,
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub passed: bool,
    /// Key violations already present in the input data.
    pub input_violations: Vec<IntegrityViolation>,
    pub distribution: Vec<FragmentCount>,
    pub round_trip: Vec<TableRoundTrip>,
    /// Key violations found across the distributed fragments.
    pub integrity: Vec<IntegrityViolation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for v in &self.input_violations {
            let _ = writeln!(out, "input {}: {}", v.table, v.detail);
        }
        if let Some(e) = &self.error {
            let _ = writeln!(out, "error: {e}");
        }
        if !self.distribution.is_empty() {
            let _ = writeln!(out, "distribution:");
            for c in &self.distribution {
                let _ = writeln!(out, "  {:<8} {:<24} {:>6}", c.site, c.fragment, c.rows);
            }
        }
        if !self.round_trip.is_empty() {
            let _ = writeln!(out, "round trip:");
            for t in &self.round_trip {
                let verdict = if t.equal { "equal" } else { "DIFFERENT" };
                let _ = writeln!(
                    out,
                    "  {:<24} {:>6} -> {:<6} {verdict}",
                    t.table, t.original_rows, t.rebuilt_rows
                );
            }
        }
        for v in &self.integrity {
            let _ = writeln!(out, "integrity {}: {}", v.table, v.detail);
        }
        let _ = writeln!(out, "{}", if self.passed { "simulation passed" } else { "simulation failed" });
        out
    }
}

/// Distribute `data`, rebuild it and check keys on both sides.
pub fn simulate(plan: &FragmentationPlan, data: &Dataset) -> SimulationReport {
    let mut report = SimulationReport {
        passed: false,
        input_violations: check_integrity(&plan.schema, data),
        distribution: Vec::new(),
        round_trip: Vec::new(),
        integrity: Vec::new(),
        error: None,
    };
    let image = match distribute(plan, data) {
        Ok(image) => image,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    for (site, frags) in &image.sites {
        for (id, rel) in frags {
            report.distribution.push(FragmentCount {
                site: site.clone(),
                fragment: id.clone(),
                rows: rel.len(),
            });
        }
    }
    report.integrity = check_global_integrity(&image, plan);
    match reconstruct(&image, plan) {
        Ok(rebuilt) => {
            for table in plan.fragmented_tables() {
                let (Some(a), Some(b)) = (data.relation(table), rebuilt.relation(table)) else { continue };
                report.round_trip.push(TableRoundTrip {
                    table: table.to_string(),
                    original_rows: a.len(),
                    rebuilt_rows: b.len(),
                    equal: a.multiset_eq(b),
                });
            }
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report.passed = report.error.is_none()
        && report.input_violations.is_empty()
        && report.integrity.is_empty()
        && report.round_trip.iter().all(|t| t.equal);
    report
}
