use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{derive_seed, report_costs, stream, AtStage, ScenarioConfig, SimError, Stage};
use crate::fedmining::{
    partition_dataset, train_pool, FedError, ModelParams, SyntheticTask, TrainingConfig, TrainingOutcome,
    UpdateTransport, UPDATE_FRAC_BITS,
};
use crate::gc::{
    count_nonfree_gates, garble, ot_wire_len, table_formula, BoolCircuit, Normalization,
};
use crate::he::{keygen, private_inference, EncryptedTestSet, FixedPointEncoding, MaskRegistry};
use crate::trading::{sweep_trading, Reputation, TradeAxis, TRADE_SWEEP_HEADER};
use crate::transcript::{MessageKind, Party, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Trade(TradeAxis),
    /// Learning rate.
    Zeta,
    /// Per-miner share of the training data, `1 / K`.
    Share,
    /// Test-set size `I`.
    Records,
}

impl SweepAxis {
    pub const NAMES: [&'static str; 7] = ["r", "Q", "alpha_t", "beta_t", "zeta", "S", "I"];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Trade(a) => a.name(),
            SweepAxis::Zeta => "zeta",
            SweepAxis::Share => "S",
            SweepAxis::Records => "I",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zeta" => Ok(SweepAxis::Zeta),
            "S" | "s" | "share" => Ok(SweepAxis::Share),
            "I" | "i" | "records" => Ok(SweepAxis::Records),
            other => other.parse().map(SweepAxis::Trade).map_err(|_| {
                SimError::new(
                    Stage::Sweep,
                    format!("unknown axis {other:?}; expected one of {}", Self::NAMES.join(", ")),
                )
            }),
        }
    }
}

/// One row per swept value. Missing entries are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    fn new(axis: SweepAxis, header: &[&str]) -> Self {
        Self { axis: axis.name().into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }).collect())
            .collect()
    }
}

const ZETA_HEADER: [&str; 6] = ["zeta", "epochs", "final_loss", "epochs_to_loss", "loss_increases", "diverged"];
const SHARE_HEADER: [&str; 6] =
    ["S", "miners", "records_per_miner", "epochs_to_accuracy", "final_accuracy", "final_loss"];
const RECORDS_HEADER: [&str; 8] =
    ["I", "he_bytes", "ot_bytes", "gc_bytes", "gc_tables", "nominal_gates", "table_formula", "he_encryptions"];

fn opt(v: Option<usize>) -> f64 {
    v.map_or(f64::NAN, |e| e as f64)
}

fn sweep_task(cfg: &ScenarioConfig) -> &SyntheticTask {
    cfg.sweep.task.as_ref().unwrap_or(&cfg.data)
}

/// Trains pool 0's configuration on the sweep task with `zeta` and `miners`.
fn train_once(cfg: &ScenarioConfig, zeta: f64, miners: usize) -> Result<TrainingOutcome, FedError> {
    let task = sweep_task(cfg);
    let mut dims = vec![task.dim];
    if cfg.training.hidden > 0 {
        dims.push(cfg.training.hidden);
    }
    dims.push(task.output_width());
    let data = task.sample(cfg.provider.train_records, derive_seed(cfg.seed, &["sweep", "data"]))?;
    let shards = partition_dataset(&data, miners, derive_seed(cfg.seed, &["sweep", "partition"]))?;
    let mut rng = stream(cfg.seed, &["sweep", "model"]);
    let model0 = ModelParams::random(&dims, cfg.training.init_scale, &mut rng)?;
    let base = TrainingConfig::new(zeta, cfg.training.max_epochs, cfg.training.deadline)?;
    if cfg.training.encrypt_updates {
        let manager = keygen(cfg.key_bits, &mut rng)?;
        let mut upd = stream(cfg.seed, &["sweep", "updates"]);
        let encoding = FixedPointEncoding::new(UPDATE_FRAC_BITS)?;
        let mut transport = UpdateTransport::Encrypted { manager: &manager, encoding, rng: &mut upd };
        train_pool(&model0, &shards, &base, &mut transport, None)
    } else {
        train_pool(&model0, &shards, &base, &mut UpdateTransport::Plain, None)
    }
}

fn zeta_row(cfg: &ScenarioConfig, zeta: f64) -> Result<Vec<f64>, SimError> {
    let miners = cfg.pools[0].miners;
    match train_once(cfg, zeta, miners) {
        Ok(o) => {
            let increases = std::iter::once(o.initial_loss)
                .chain(o.metrics.iter().map(|m| m.loss))
                .collect::<Vec<_>>()
                .windows(2)
                .filter(|w| w[1] > w[0])
                .count();
            Ok(vec![
                zeta,
                o.metrics.len() as f64,
                o.final_loss(),
                opt(o.epochs_to_loss(cfg.sweep.loss_threshold)),
                increases as f64,
                0.0,
            ])
        }
        Err(FedError::Divergence { epoch, loss }) => {
            Ok(vec![zeta, epoch as f64, loss, f64::NAN, f64::NAN, 1.0])
        }
        Err(e) => Err(SimError::new(Stage::Train, e)),
    }
}

fn share_row(cfg: &ScenarioConfig, share: f64) -> Result<Vec<f64>, SimError> {
    if !(share > 0.0 && share <= 1.0) {
        return Err(SimError::new(Stage::Sweep, format!("share {share} outside (0, 1]")));
    }
    let miners = ((1.0 / share).round() as usize).clamp(1, cfg.provider.train_records);
    let o = train_once(cfg, cfg.training.zeta, miners).at(Stage::Train)?;
    Ok(vec![
        share,
        miners as f64,
        (cfg.provider.train_records / miners) as f64,
        opt(o.epochs_to_accuracy(cfg.sweep.accuracy_threshold)),
        o.metrics.last().map_or(f64::NAN, |m| m.accuracy),
        o.final_loss(),
    ])
}

/// Runs the encrypted prediction for real and accounts the garbled
/// comparison by construction.
fn records_row(cfg: &ScenarioConfig, value: f64) -> Result<Vec<f64>, SimError> {
    if !(value >= 0.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX)) {
        return Err(SimError::new(Stage::Sweep, format!("record count {value} is not a whole number")));
    }
    let records = value as u32;
    let l = cfg.requester.label_bits;
    let mut log = Transcript::new(format!("sweep-I-{records}"));
    let (mut tables, mut nominal, mut encryptions) = (0.0, 0.0, 0u64);
    if records > 0 {
        let test = cfg.data.sample(records as usize, derive_seed(cfg.seed, &["sweep", "test", &records.to_string()]))
            .at(Stage::Sweep)?;
        let mut rng = stream(cfg.seed, &["sweep", "he", &records.to_string()]);
        let requester = keygen(cfg.key_bits, &mut rng).at(Stage::Predict)?;
        let enc = FixedPointEncoding::default();
        let dims = cfg.model_dims();
        let model = ModelParams::random(&dims, cfg.training.init_scale, &mut stream(cfg.seed, &["sweep", "model"]))
            .at(Stage::Sweep)?;
        let enc_test = EncryptedTestSet::encrypt(&requester, &enc, &test.features(), &mut rng).at(Stage::Predict)?;
        private_inference(&requester, &enc_test, &model, &enc, &mut MaskRegistry::new(), 0, &mut rng, &mut log)
            .at(Stage::Predict)?;
        let (d, k) = (dims[0] as u64, dims[1] as u64);
        encryptions = u64::from(records) * (d + k) + k;

        let circuit = BoolCircuit::comparison(records, l).at(Stage::Compare)?;
        let gc = garble(&circuit, derive_seed(cfg.seed, &["sweep", "garble"]));
        log.record_size(Party::Pool, Party::Requester, MessageKind::GarbledCircuit, gc.tables.wire_len() as u64);
        log.record_size(Party::Pool, Party::Requester, MessageKind::PoolInputLabels, u64::from(records * l) * 16);
        log.record_size(Party::Requester, Party::Pool, MessageKind::OtChoice, ot_wire_len((records * l) as usize));
        tables = gc.tables.tables.len() as f64;
        nominal = count_nonfree_gates(&circuit, Normalization::Nominal).total;
    }
    let row = report_costs(&[(u64::from(records), &log)]).rows[0];
    Ok(vec![
        value,
        row.he_bytes as f64,
        row.ot_bytes as f64,
        row.gc_bytes as f64,
        tables,
        nominal,
        table_formula(u64::from(records)),
        encryptions as f64,
    ])
}

/// Evaluates the scenario at each value of `axis`, everything else held fixed.
///
/// Trading axes use pool 0's economics and reputation; training axes use
/// pool 0's miner count on the sweep task.
pub fn run_sweep(cfg: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepTable, SimError> {
    cfg.validate()?;
    let pool = &cfg.pools[0];
    let mut table;
    match axis {
        SweepAxis::Trade(a) => {
            table = SweepTable::new(axis, &TRADE_SWEEP_HEADER[1..]);
            let r = Reputation::new(pool.reputation).at(Stage::Config)?;
            let rows = sweep_trading(a, values, r, &cfg.market, &cfg.provider_economics()?, &cfg.pool_economics(pool)?)
                .at(Stage::Sweep)?;
            table.rows = rows
                .into_iter()
                .map(|r| vec![r.value, r.m_star, r.ds_star, r.p, r.pool_utility, r.provider_utility])
                .collect();
        }
        SweepAxis::Zeta => {
            table = SweepTable::new(axis, &ZETA_HEADER);
            for &v in values {
                table.rows.push(zeta_row(cfg, v)?);
            }
        }
        SweepAxis::Share => {
            table = SweepTable::new(axis, &SHARE_HEADER);
            for &v in values {
                table.rows.push(share_row(cfg, v)?);
            }
        }
        SweepAxis::Records => {
            table = SweepTable::new(axis, &RECORDS_HEADER);
            for &v in values {
                table.rows.push(records_row(cfg, v)?);
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::example();
        cfg.training.encrypt_updates = false;
        cfg.training.max_epochs = 20;
        cfg.training.deadline = 20;
        cfg
    }

    #[test]
    fn axis_parsing() {
        for name in SweepAxis::NAMES {
            assert_eq!(name.parse::<SweepAxis>().unwrap().name(), name);
        }
        let e = "bogus".parse::<SweepAxis>().unwrap_err();
        assert_eq!(e.stage, Stage::Sweep);
    }

    #[test]
    fn reputation_sweep_columns() {
        let t = run_sweep(&quick(), SweepAxis::Trade(TradeAxis::Reputation), &[0.2, 0.5]).unwrap();
        assert_eq!(t.header[0], "value");
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.column("value").unwrap(), vec![0.2, 0.5]);
    }

    #[test]
    fn zero_records_cost_nothing() {
        let t = run_sweep(&quick(), SweepAxis::Records, &[0.0]).unwrap();
        assert_eq!(&t.rows[0][1..4], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn huge_step_diverges() {
        let t = run_sweep(&quick(), SweepAxis::Zeta, &[0.1, 50.0]).unwrap();
        let div = t.column("diverged").unwrap();
        assert_eq!(div, vec![0.0, 1.0]);
    }

    #[test]
    fn share_must_be_a_fraction() {
        assert!(run_sweep(&quick(), SweepAxis::Share, &[1.5]).is_err());
        let t = run_sweep(&quick(), SweepAxis::Share, &[1.0, 0.25]).unwrap();
        assert_eq!(t.column("miners").unwrap(), vec![1.0, 4.0]);
    }
}
