use serde::{Deserialize, Serialize};

use crate::transcript::{Phase, Transcript};

pub const COST_HEADER: [&str; 6] = ["records", "he_bytes", "ot_bytes", "gc_bytes", "training_bytes", "messages"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostRow {
    pub records: u64,
    pub he_bytes: u64,
    pub ot_bytes: u64,
    pub gc_bytes: u64,
    pub training_bytes: u64,
    pub messages: u64,
}

/// Least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub rows: Vec<CostRow>,
    /// Fits of each phase's bytes against the record count; absent with
    /// fewer than two distinct record counts.
    pub he_fit: Option<LinearFit>,
    pub ot_fit: Option<LinearFit>,
    pub gc_fit: Option<LinearFit>,
}

/// Returns `None` unless at least two distinct `x` values are given.
pub fn fit_line(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if points.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid = |p: &(f64, f64)| p.1 - (slope * p.0 + intercept);
    let sse: f64 = points.iter().map(|p| resid(p).powi(2)).sum();
    let sst: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = if sst == 0.0 { 1.0 } else { 1.0 - sse / sst };
    let max_residual = points.iter().map(|p| resid(p).abs()).fold(0.0, f64::max);
    Some(LinearFit { slope, intercept, r2, max_residual })
}

/// Per-phase byte counts of each `(records, transcript)` pair and linear
/// fits over the record counts.
pub fn report_costs(runs: &[(u64, &Transcript)]) -> CostReport {
    let rows: Vec<CostRow> = runs
        .iter()
        .map(|(records, t)| CostRow {
            records: *records,
            he_bytes: t.bytes_in_phase(Phase::He),
            ot_bytes: t.bytes_in_phase(Phase::Ot),
            gc_bytes: t.bytes_in_phase(Phase::Gc),
            training_bytes: t.bytes_in_phase(Phase::Training),
            messages: t.entries.len() as u64,
        })
        .collect();
    let fit = |f: fn(&CostRow) -> u64| {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.records as f64, f(r) as f64)).collect();
        fit_line(&pts)
    };
    CostReport { he_fit: fit(|r| r.he_bytes), ot_fit: fit(|r| r.ot_bytes), gc_fit: fit(|r| r.gc_bytes), rows }
}

impl CostReport {
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                [r.records, r.he_bytes, r.ot_bytes, r.gc_bytes, r.training_bytes, r.messages]
                    .iter()
                    .map(u64::to_string)
                    .collect()
            })
            .collect()
    }
}
