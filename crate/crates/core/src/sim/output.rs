use std::path::{Path, PathBuf};

use super::{AtStage, RoundReport, SimError, Stage};
use crate::trading::Negotiation;

pub const TRAINING_HEADER: [&str; 5] = ["round", "pool_id", "epoch", "loss", "accuracy"];
pub const TRADES_HEADER: [&str; 8] =
    ["round", "pool_id", "outcome", "m_star", "ds_star", "p", "final_price", "executed"];
pub const ROUND_COSTS_HEADER: [&str; 11] = [
    "round",
    "he_bytes",
    "ot_bytes",
    "gc_bytes",
    "training_bytes",
    "verification_bytes",
    "he_encryptions",
    "he_decryptions",
    "he_plain_muls",
    "gc_tables",
    "ot_transfers",
];

/// Serialises `rows` under `header` as CSV.
pub fn write_csv<W: std::io::Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).at(Stage::Output)?;
    for r in rows {
        w.write_record(r).at(Stage::Output)?;
    }
    w.flush().at(Stage::Output)
}

pub fn training_csv(reports: &[RoundReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for rep in reports {
        for p in &rep.pools {
            for m in p.work.iter().flat_map(|w| &w.training) {
                rows.push(vec![
                    rep.round.to_string(),
                    p.pool_id.clone(),
                    m.epoch.to_string(),
                    m.loss.to_string(),
                    m.accuracy.to_string(),
                ]);
            }
        }
    }
    rows
}

pub fn trades_csv(reports: &[RoundReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for rep in reports {
        for p in &rep.pools {
            let outcome = match &p.negotiation {
                Negotiation::Rejected(_) => "rejected",
                Negotiation::Quoted { .. } => "quoted",
            };
            let mut row = vec![rep.round.to_string(), p.pool_id.clone(), outcome.to_string()];
            match p.negotiation.quote() {
                Some(q) => row.extend([q.m_star, q.ds_star, q.p, q.final_price].map(|v| v.to_string())),
                None => row.extend(std::iter::repeat(String::new()).take(4)),
            }
            row.push(u8::from(p.negotiation.executed()).to_string());
            rows.push(row);
        }
    }
    rows
}

fn round_costs_csv(reports: &[RoundReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            let c = &r.costs;
            [
                r.round,
                c.he_bytes,
                c.ot_bytes,
                c.gc_bytes,
                c.training_bytes,
                c.verification_bytes,
                c.he_encryptions,
                c.he_decryptions,
                c.he_plain_muls,
                c.gc_tables,
                c.ot_transfers,
            ]
            .iter()
            .map(u64::to_string)
            .collect()
        })
        .collect()
}

/// File layout of a run directory.
#[derive(Debug, Clone)]
pub struct RoundOutputs {
    pub dir: PathBuf,
}

impl RoundOutputs {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn chain_path(&self) -> PathBuf {
        self.dir.join("chain.bin")
    }

    pub fn report_path(&self, round: u64) -> PathBuf {
        self.dir.join(format!("round-{round}.json"))
    }

    fn write(path: &Path, bytes: &[u8]) -> Result<(), SimError> {
        std::fs::write(path, bytes).map_err(|e| SimError::new(Stage::Output, format!("{}: {e}", path.display())))
    }

    fn csv_file(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), SimError> {
        let mut buf = Vec::new();
        write_csv(&mut buf, header, rows)?;
        Self::write(&self.dir.join(name), &buf)
    }

    /// Writes the chain dump, one JSON report per round and the metric CSVs.
    pub fn write_all(&self, reports: &[RoundReport], chain_dump: &[u8]) -> Result<(), SimError> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| SimError::new(Stage::Output, format!("{}: {e}", self.dir.display())))?;
        Self::write(&self.chain_path(), chain_dump)?;
        for r in reports {
            Self::write(&self.report_path(r.round), r.to_json().as_bytes())?;
        }
        self.csv_file("training.csv", &TRAINING_HEADER, &training_csv(reports))?;
        self.csv_file("trades.csv", &TRADES_HEADER, &trades_csv(reports))?;
        self.csv_file("costs.csv", &ROUND_COSTS_HEADER, &round_costs_csv(reports))
    }

    pub fn read_report(&self, round: u64) -> Result<RoundReport, SimError> {
        let path = self.report_path(round);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| SimError::new(Stage::Output, format!("{}: {e}", path.display())))?;
        RoundReport::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_first_then_rows() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["a", "b"], &[vec!["1".into(), "x,y".into()]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,\"x,y\"\n");
    }
}
