//! JSON report types. Each carries a versioned `schema` tag; the matching
//! JSON Schema documents ship in `schemas/`.

use serde::{Deserialize, Serialize};

pub const RUN_SUMMARY_SCHEMA_ID: &str = "covpath/run-summary/1";
pub const TIMINGS_SCHEMA_ID: &str = "covpath/timings/1";
pub const ONLINE_REPORT_SCHEMA_ID: &str = "covpath/online-report/1";
pub const BENCH_REPORT_SCHEMA_ID: &str = "covpath/bench-report/1";
pub const VERIFY_REPORT_SCHEMA_ID: &str = "covpath/verify-report/1";

pub const RUN_SUMMARY_SCHEMA: &str = include_str!("../schemas/run-summary.schema.json");
pub const TIMINGS_SCHEMA: &str = include_str!("../schemas/timings.schema.json");
pub const ONLINE_REPORT_SCHEMA: &str = include_str!("../schemas/online-report.schema.json");
pub const BENCH_REPORT_SCHEMA: &str = include_str!("../schemas/bench-report.schema.json");
pub const VERIFY_REPORT_SCHEMA: &str = include_str!("../schemas/verify-report.schema.json");

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InstanceInfo {
    pub n: usize,
    /// `file:<path>`, `samples:<path>` or `generator:<spec>`.
    pub source: String,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConfigEcho {
    pub points: usize,
    pub rho_min_frac: f64,
    pub gap_target: f64,
    pub t: f64,
    pub mode: String,
    pub zero_tol: f64,
    pub sweep_fraction: f64,
    pub eps: f64,
    pub tol_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PointRecord {
    pub rho: f64,
    pub t: f64,
    pub cardinality: usize,
    pub dual_obj: f64,
    pub primal_obj: f64,
    pub gap_bound: f64,
    pub residual: f64,
    pub cg_iterations: usize,
    pub sweeps: usize,
    pub max_inverse_drift: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FailureRecord {
    pub index: usize,
    pub rho: f64,
    pub message: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveVerification {
    /// Largest `‖H‖_F` recomputed from a fresh factorization of each `U`.
    pub max_fresh_residual: f64,
    pub weak_duality_holds: bool,
    /// Largest Frobenius distance to the dense Newton oracle (small `n` only).
    pub max_newton_discrepancy: Option<f64>,
    pub passed: bool,
}

/// Per-run summary. Wall times live in a separate timings file so that
/// identical runs produce byte-identical summaries.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub schema: String,
    pub status: String,
    pub instance: InstanceInfo,
    pub config: ConfigEcho,
    pub points: Vec<PointRecord>,
    pub failure: Option<FailureRecord>,
    pub verification: Option<SolveVerification>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Timings {
    pub schema: String,
    pub total_seconds: f64,
    pub points: Vec<PointTiming>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PointTiming {
    pub rho: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OnlineReport {
    pub schema: String,
    pub n: usize,
    pub rho: f64,
    pub t: f64,
    pub k: usize,
    pub steps: usize,
    pub step_halvings: usize,
    pub sweeps: usize,
    pub cg_iterations: usize,
    pub residual: f64,
    pub perturbation_norm: f64,
    pub verification: Option<OnlineVerification>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OnlineVerification {
    /// Frobenius distance between the online and from-scratch `U`.
    pub frobenius_discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub points: usize,
    pub seeds: Vec<u64>,
    pub wall_times: Vec<f64>,
    pub median_wall_time: f64,
    pub complete: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BenchReport {
    pub schema: String,
    pub density: f64,
    pub gap_target: f64,
    pub rows: Vec<BenchRow>,
    /// For each path length, whether medians increase strictly with `n`.
    pub medians_increasing: Vec<MedianTrend>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MedianTrend {
    pub points: usize,
    pub increasing: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerifyReport {
    pub schema: String,
    pub points_checked: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub weak_duality_holds: bool,
    pub gap_within_bound: bool,
    pub cardinality_matches: bool,
    pub passed: bool,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        len if len % 2 == 1 => v[len / 2],
        len => 0.5 * (v[len / 2 - 1] + v[len / 2]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even_empty() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn schemas_are_valid_json_with_matching_ids() {
        for (doc, id) in [
            (RUN_SUMMARY_SCHEMA, RUN_SUMMARY_SCHEMA_ID),
            (TIMINGS_SCHEMA, TIMINGS_SCHEMA_ID),
            (ONLINE_REPORT_SCHEMA, ONLINE_REPORT_SCHEMA_ID),
            (BENCH_REPORT_SCHEMA, BENCH_REPORT_SCHEMA_ID),
            (VERIFY_REPORT_SCHEMA, VERIFY_REPORT_SCHEMA_ID),
        ] {
            let v: serde_json::Value = serde_json::from_str(doc).unwrap();
            assert_eq!(v["properties"]["schema"]["const"], id);
        }
    }
}
