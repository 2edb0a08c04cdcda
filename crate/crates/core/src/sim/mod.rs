//! Deterministic scenario driver: full rounds, parameter sweeps and cost
//! reports.

mod config;
mod costs;
mod output;
mod round;
mod sweep;

pub use config::{
    PoolConfig, ProviderConfig, RequesterConfig, ScenarioConfig, SweepSection, TaskConfig, TrainingSection,
};
pub use costs::{fit_line, report_costs, CostReport, CostRow, LinearFit, COST_HEADER};
pub use output::{
    trades_csv, training_csv, write_csv, RoundOutputs, ROUND_COSTS_HEADER, TRADES_HEADER, TRAINING_HEADER,
};
pub use round::{
    run_round, CostTally, ElectionReport, PoolReport, PoolWork, ReputationDelta, RoundReport, SimState,
    Simulator, VerdictEntry,
};
pub use sweep::{run_sweep, SweepAxis, SweepTable};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Pipeline stage named in error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    SelectTask,
    Negotiate,
    DeliverData,
    Train,
    Predict,
    Compare,
    BuildBlock,
    Elect,
    Reward,
    Reputation,
    Sweep,
    Output,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::SelectTask => "select_task",
            Stage::Negotiate => "negotiate_trade",
            Stage::DeliverData => "deliver_data",
            Stage::Train => "train_pool",
            Stage::Predict => "he_predict",
            Stage::Compare => "gc_compare",
            Stage::BuildBlock => "build_block",
            Stage::Elect => "elect_winner",
            Stage::Reward => "reward",
            Stage::Reputation => "update_reputation",
            Stage::Sweep => "sweep",
            Stage::Output => "output",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("stage {stage}: {message}")]
pub struct SimError {
    pub stage: Stage,
    pub message: String,
}

impl SimError {
    pub fn new(stage: Stage, message: impl std::fmt::Display) -> Self {
        Self { stage, message: message.to_string() }
    }

    pub fn config(message: impl std::fmt::Display) -> Self {
        Self::new(Stage::Config, message)
    }
}

/// Tags a module error with the stage it came from.
pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, SimError>;
}

impl<T, E: std::fmt::Display> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, SimError> {
        self.map_err(|e| SimError::new(stage, e))
    }
}

/// Independent seed for one consumer of randomness.
pub(crate) fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    for p in parts {
        h.update((p.len() as u64).to_be_bytes());
        h.update(p.as_bytes());
    }
    u64::from_be_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

pub(crate) fn stream(seed: u64, parts: &[&str]) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(derive_seed(seed, parts))
}
