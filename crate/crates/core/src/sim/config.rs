use serde::{Deserialize, Serialize};

use super::SimError;
use crate::fedmining::{SyntheticTask, TaskKind, TrainingConfig};
use crate::gc::OtBackend;
use crate::he::MIN_KEY_BITS;
use crate::trading::{MarketParams, PoolEconomics, ProviderEconomics, Reputation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub id: String,
    pub miners: usize,
    pub reputation: f64,
    pub q: f64,
    pub alpha_t: f64,
    pub beta_t: f64,
    /// Chance per round that the pool leaks the data it bought.
    #[serde(default)]
    pub leak_probability: f64,
    /// Extra correct predictions the pool claims beyond what it measured.
    #[serde(default)]
    pub claim_inflation: u64,
    /// Epochs the pool can run before the submission deadline; unlimited when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs_per_round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub id: String,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    /// Records sold to each pool.
    pub train_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequesterConfig {
    /// Test-set size `I`.
    pub test_records: usize,
    /// Label width `l` in bits.
    pub label_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub id: String,
    pub reward: f64,
    pub arrival: u64,
    pub deadline: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSection {
    pub zeta: f64,
    pub max_epochs: usize,
    pub deadline: usize,
    /// Hidden-layer width; zero trains a single linear layer.
    #[serde(default)]
    pub hidden: usize,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default = "default_true")]
    pub encrypt_updates: bool,
}

fn default_init_scale() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

/// Thresholds used by the training sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    #[serde(default = "default_loss_threshold")]
    pub loss_threshold: f64,
    #[serde(default = "default_accuracy_threshold")]
    pub accuracy_threshold: f64,
    /// Task for the training sweeps; the scenario's task when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<SyntheticTask>,
}

fn default_loss_threshold() -> f64 {
    0.05
}

fn default_accuracy_threshold() -> f64 {
    0.9
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { loss_threshold: default_loss_threshold(), accuracy_threshold: default_accuracy_threshold(), task: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "default_key_bits")]
    pub key_bits: u32,
    #[serde(default = "default_backend")]
    pub ot_backend: OtBackend,
    #[serde(default = "default_full_nodes")]
    pub full_nodes: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    pub market: MarketParams,
    pub provider: ProviderConfig,
    pub requester: RequesterConfig,
    pub data: SyntheticTask,
    pub training: TrainingSection,
    pub pools: Vec<PoolConfig>,
    pub tasks: Vec<TaskConfig>,
    #[serde(default)]
    pub sweep: SweepSection,
}

fn default_key_bits() -> u32 {
    crate::he::DEFAULT_KEY_BITS
}

fn default_backend() -> OtBackend {
    OtBackend::DiscreteLog
}

fn default_full_nodes() -> usize {
    3
}

fn default_rounds() -> usize {
    1
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn provider_economics(&self) -> Result<ProviderEconomics, SimError> {
        ProviderEconomics::new(self.provider.alpha, self.provider.beta, self.provider.eta)
            .map_err(|e| SimError::config(e.to_string()))
    }

    pub fn pool_economics(&self, pool: &PoolConfig) -> Result<PoolEconomics, SimError> {
        let po = PoolEconomics::new(pool.q, pool.alpha_t, pool.beta_t).map_err(|e| SimError::config(e.to_string()))?;
        po.paired_with(&self.provider_economics()?)
            .map_err(|e| SimError::config(format!("pool {}: {e}", pool.id)))?;
        Ok(po)
    }

    pub fn training_config(&self) -> Result<TrainingConfig, SimError> {
        let t = &self.training;
        TrainingConfig::new(t.zeta, t.max_epochs, t.deadline).map_err(|e| SimError::config(e.to_string()))
    }

    /// Layer widths of the pools' model.
    pub fn model_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.data.dim];
        if self.training.hidden > 0 {
            dims.push(self.training.hidden);
        }
        dims.push(self.data.output_width());
        dims
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::config(m));
        self.provider_economics()?;
        self.training_config()?;
        if self.key_bits < MIN_KEY_BITS {
            return err(format!("key_bits must be at least {MIN_KEY_BITS}"));
        }
        if self.data.kind != TaskKind::Classification {
            return err("the verification pipeline needs a classification task".into());
        }
        if self.data.dim == 0 || self.data.classes < 2 {
            return err("data needs dim >= 1 and at least two classes".into());
        }
        let l = self.requester.label_bits;
        if l == 0 || l > 16 || (self.data.classes as u64) > (1u64 << l) {
            return err(format!("{} classes do not fit in {l} label bits", self.data.classes));
        }
        if self.requester.test_records == 0 {
            return err("requester needs at least one test record".into());
        }
        if self.full_nodes == 0 {
            return err("at least one full node is required".into());
        }
        if self.pools.is_empty() {
            return err("at least one pool is required".into());
        }
        let mut ids: Vec<&str> = self.pools.iter().map(|p| p.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return err("pool ids must be unique".into());
        }
        for p in &self.pools {
            Reputation::new(p.reputation).map_err(|e| SimError::config(format!("pool {}: {e}", p.id)))?;
            if p.miners == 0 || p.miners > self.provider.train_records {
                return err(format!("pool {} has {} miners for {} records", p.id, p.miners, self.provider.train_records));
            }
            if p.epochs_per_round == Some(0) {
                return err(format!("pool {} can run no epochs", p.id));
            }
            if !(0.0..=1.0).contains(&p.leak_probability) {
                return err(format!("pool {} leak probability outside [0, 1]", p.id));
            }
            self.pool_economics(p)?;
        }
        let mut tids: Vec<&str> = self.tasks.iter().map(|t| t.id.as_str()).collect();
        tids.sort_unstable();
        if tids.windows(2).any(|w| w[0] == w[1]) {
            return err("task ids must be unique".into());
        }
        if self.tasks.iter().any(|t| !(t.reward.is_finite() && t.reward >= 0.0)) {
            return err("task rewards must be finite and non-negative".into());
        }
        Ok(())
    }

    /// A small two-pool scenario at the reference market parameters.
    pub fn example() -> Self {
        Self {
            seed: 7,
            key_bits: 512,
            ot_backend: OtBackend::DiscreteLog,
            full_nodes: 3,
            rounds: 2,
            market: MarketParams::new(0.4, 0.4, 4.0, 4.0).expect("valid"),
            provider: ProviderConfig { id: "provider".into(), alpha: 1.5, beta: 1.0, eta: 1.8, train_records: 120 },
            requester: RequesterConfig { test_records: 48, label_bits: 2 },
            data: SyntheticTask::classification(3, 3, 11),
            training: TrainingSection {
                zeta: 0.5,
                max_epochs: 40,
                deadline: 40,
                hidden: 0,
                init_scale: 0.5,
                encrypt_updates: true,
            },
            pools: vec![
                PoolConfig {
                    id: "pool-a".into(),
                    miners: 3,
                    reputation: 0.5,
                    q: 10.0,
                    alpha_t: 1.5,
                    beta_t: 1.0,
                    leak_probability: 0.0,
                    claim_inflation: 0,
                    epochs_per_round: None,
                },
                PoolConfig {
                    id: "pool-b".into(),
                    miners: 4,
                    reputation: 0.6,
                    q: 12.0,
                    alpha_t: 1.5,
                    beta_t: 1.0,
                    leak_probability: 0.0,
                    claim_inflation: 0,
                    epochs_per_round: None,
                },
            ],
            tasks: vec![
                TaskConfig { id: "task-1".into(), reward: 100.0, arrival: 0, deadline: 10 },
                TaskConfig { id: "task-2".into(), reward: 60.0, arrival: 1, deadline: 20 },
            ],
            sweep: SweepSection::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_roundtrips_through_toml() {
        let cfg = ScenarioConfig::example();
        let text = cfg.to_toml();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn classes_must_fit_label_width() {
        let mut cfg = ScenarioConfig::example();
        cfg.requester.label_bits = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn leak_slope_checked_per_pool() {
        let mut cfg = ScenarioConfig::example();
        cfg.pools[0].beta_t = 0.1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn duplicate_pools_rejected() {
        let mut cfg = ScenarioConfig::example();
        cfg.pools[1].id = cfg.pools[0].id.clone();
        assert!(cfg.validate().is_err());
    }
}
