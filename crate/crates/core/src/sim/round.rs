use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, stream, AtStage, ScenarioConfig, SimError, Stage};
use crate::chain::{
    build_block, dump_chain, elect_winner, select_task, sha256, Accuracy, Block, BlockDraft, Election, Ledger,
    Task, TradeLedgerEntry, Verdict, Vm,
};
use crate::fedmining::{
    partition_dataset, train_pool, Dataset, EpochMetrics, ModelParams, TrainingConfig, UpdateTransport,
    UPDATE_FRAC_BITS,
};
use crate::gc::{compare_labels, verify_published};
use crate::he::{
    keygen, private_inference, EncryptedLayer, EncryptedTestSet, FixedPointEncoding, MaskRegistry,
};
use crate::trading::{negotiate_trade, Negotiation, NegotiationPolicy};
use crate::transcript::{Party, Phase, Transcript};

/// Byte and operation counts of one round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTally {
    pub he_bytes: u64,
    pub ot_bytes: u64,
    pub gc_bytes: u64,
    pub training_bytes: u64,
    pub verification_bytes: u64,
    pub he_encryptions: u64,
    pub he_decryptions: u64,
    pub he_plain_muls: u64,
    pub gc_tables: u64,
    pub ot_transfers: u64,
}

impl CostTally {
    fn add(&mut self, o: &CostTally) {
        self.he_bytes += o.he_bytes;
        self.ot_bytes += o.ot_bytes;
        self.gc_bytes += o.gc_bytes;
        self.training_bytes += o.training_bytes;
        self.verification_bytes += o.verification_bytes;
        self.he_encryptions += o.he_encryptions;
        self.he_decryptions += o.he_decryptions;
        self.he_plain_muls += o.he_plain_muls;
        self.gc_tables += o.gc_tables;
        self.ot_transfers += o.ot_transfers;
    }
}

/// What a pool did after obtaining data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolWork {
    pub epochs: usize,
    pub training: Vec<EpochMetrics>,
    /// Correct predictions of the trained model evaluated in the clear.
    pub plaintext_n: u64,
    /// `N` decoded from the garbled comparison.
    pub measured_n: u64,
    /// `N` written into the candidate header.
    pub claimed_n: u64,
    pub block_hash: String,
    pub costs: CostTally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolReport {
    pub pool_id: String,
    pub reputation: f64,
    pub negotiation: Negotiation,
    pub work: Option<PoolWork>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub pool_id: String,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionReport {
    /// Pool ids in verification order.
    pub order: Vec<String>,
    pub checked: Vec<VerdictEntry>,
    pub full_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationDelta {
    pub pool_id: String,
    pub before: f64,
    pub after: f64,
    pub leaked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u64,
    pub time: u64,
    pub task_id: String,
    pub test_records: u64,
    pub pools: Vec<PoolReport>,
    pub election: ElectionReport,
    pub winner: Option<String>,
    pub block_hash: Option<String>,
    pub chain_height: u64,
    /// Miner id and amount credited this round.
    pub rewards: Vec<(String, f64)>,
    pub reputation: Vec<ReputationDelta>,
    pub costs: CostTally,
}

impl RoundReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).at(Stage::Output)
    }
}

/// Everything that persists between rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub round: u64,
    pub chain: Vec<Block>,
    pub ledger: Ledger,
    pub pending: Vec<Task>,
    pub balances: BTreeMap<String, f64>,
}

fn test_set(cfg: &ScenarioConfig, task_id: &str) -> Result<Dataset, SimError> {
    cfg.data.sample(cfg.requester.test_records, derive_seed(cfg.seed, &["test-set", task_id])).at(Stage::Config)
}

fn commitment(data: &Dataset) -> [u8; 32] {
    let mut bytes = Vec::new();
    for r in data.records() {
        for v in r.features.iter().chain(std::iter::once(&r.target)) {
            bytes.extend(v.to_bits().to_be_bytes());
        }
    }
    sha256(&bytes)
}

fn miner_id(pool: &str, k: usize) -> String {
    format!("{pool}/miner-{k}")
}

impl SimState {
    /// Registers the pools and publishes every task with its test-set commitment.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut ledger = Ledger::new();
        let mut balances = BTreeMap::new();
        for p in &cfg.pools {
            ledger.register_pool(&p.id, crate::trading::Reputation::new(p.reputation).at(Stage::Config)?).at(Stage::Config)?;
            for k in 0..p.miners {
                balances.insert(miner_id(&p.id, k), 0.0);
            }
        }
        let pending = cfg
            .tasks
            .iter()
            .map(|t| Task::new(&t.id, t.reward, t.arrival, commitment(&test_set(cfg, &t.id)?), t.deadline).at(Stage::Config))
            .collect::<Result<_, _>>()?;
        Ok(Self { round: 0, chain: Vec::new(), ledger, pending, balances })
    }

    pub fn chain_dump(&self) -> Vec<u8> {
        dump_chain(&self.chain)
    }
}

struct Candidate {
    pool: usize,
    block: Block,
}

/// Trains, predicts and compares for one pool that obtained data.
#[allow(clippy::too_many_arguments)]
fn pool_work(
    cfg: &ScenarioConfig,
    state: &SimState,
    pool_idx: usize,
    task: &Task,
    test: &Dataset,
    requester: &crate::he::KeyPair,
    enc_test: &EncryptedTestSet,
    trade_tx: Option<Vec<u8>>,
) -> Result<(PoolWork, Block), SimError> {
    let pool = &cfg.pools[pool_idx];
    let round = state.round.to_string();
    let seed_for = |what: &str| derive_seed(cfg.seed, &[&round, &pool.id, what]);
    let rng_for = |what: &str| stream(cfg.seed, &[&round, &pool.id, what]);
    let dims = cfg.model_dims();
    let (d, k) = (dims[0] as u64, dims[1] as u64);
    let records = test.len() as u64;
    let l = cfg.requester.label_bits;
    let mut costs = CostTally::default();

    // Provider-to-miner delivery.
    let dataset = cfg
        .data
        .sample(cfg.provider.train_records, seed_for("provider-data"))
        .at(Stage::DeliverData)?;
    let shards = partition_dataset(&dataset, pool.miners, seed_for("partition"))
        .at(Stage::DeliverData)?;

    // Federated training.
    let mut rng = rng_for("train");
    let model0 = ModelParams::random(&dims, cfg.training.init_scale, &mut rng).at(Stage::Train)?;
    let base = cfg.training_config()?;
    let epochs = pool.epochs_per_round.map_or(base.epochs(), |cap| cap.min(base.epochs()));
    let tcfg = TrainingConfig::new(base.zeta, epochs, epochs).at(Stage::Train)?;
    let mut train_log = Transcript::new(format!("{}:{}:train", task.id, pool.id));
    let outcome = if cfg.training.encrypt_updates {
        let manager = keygen(cfg.key_bits, &mut rng).at(Stage::Train)?;
        let encoding = FixedPointEncoding::new(UPDATE_FRAC_BITS).at(Stage::Train)?;
        let mut upd_rng = rng_for("updates");
        let mut transport = UpdateTransport::Encrypted { manager: &manager, encoding, rng: &mut upd_rng };
        let o = train_pool(&model0, &shards, &tcfg, &mut transport, Some(&mut train_log)).at(Stage::Train)?;
        let per_epoch = (shards.len() * model0.param_count()) as u64;
        costs.he_encryptions += per_epoch * o.metrics.len() as u64;
        costs.he_decryptions += per_epoch * o.metrics.len() as u64;
        o
    } else {
        train_pool(&model0, &shards, &tcfg, &mut UpdateTransport::Plain, Some(&mut train_log)).at(Stage::Train)?
    };
    costs.training_bytes = train_log.total_bytes();
    let model = outcome.model;

    let actual: Vec<u32> = test.labels().into_iter().map(|v| v as u32).collect();
    let plaintext_n =
        test.records().iter().zip(&actual).filter(|(r, &y)| model.predict_label(&r.features) as u32 == y).count()
            as u64;

    // Encrypted label prediction.
    let mut log = Transcript::new(format!("{}:{}", task.id, pool.id));
    let enc = FixedPointEncoding::default();
    let mut he_rng = rng_for("he");
    let mut registry = MaskRegistry::new();
    let first_session = (pool_idx as u64) << 32;
    let predicted = private_inference(requester, enc_test, &model, &enc, &mut registry, first_session, &mut he_rng, &mut log)
        .at(Stage::Predict)?;
    costs.he_encryptions += records * k + k;
    costs.he_plain_muls += records * k * d;
    costs.he_decryptions += records * k;
    let layer = EncryptedLayer::encrypt(requester.public(), &model.layers()[0], &enc, &mut he_rng).at(Stage::Predict)?;
    costs.he_encryptions += k * d + k;

    // Garbled comparison.
    let predicted: Vec<u32> = predicted.into_iter().map(|v| v as u32).collect();
    let garble_seed = seed_for("garble");
    let mut gc_rng = rng_for("gc");
    let run = compare_labels(&predicted, &actual, l, garble_seed, cfg.ot_backend, &mut gc_rng, &mut log)
        .at(Stage::Compare)?;
    costs.he_bytes = log.bytes_in_phase(Phase::He);
    costs.ot_bytes = log.bytes_in_phase(Phase::Ot);
    costs.gc_bytes = log.bytes_in_phase(Phase::Gc);
    costs.gc_tables = run.published.tables.tables.len() as u64;
    costs.ot_transfers = records * u64::from(l);

    let claimed_n = (run.n + pool.claim_inflation).min(records);
    let vm = Vm::new(layer.to_bytes(requester.public()), run.published.to_bytes(), log.to_json().into_bytes());
    let block = build_block(
        state.chain.last().map(|b| &b.header),
        BlockDraft {
            timestamp: state.round,
            task_id: task.id.clone(),
            pool_id: pool.id.clone(),
            txs: trade_tx.into_iter().collect(),
            vm,
            accuracy: Accuracy::new(claimed_n, records).at(Stage::BuildBlock)?,
        },
    )
    .at(Stage::BuildBlock)?;

    let work = PoolWork {
        epochs: outcome.metrics.len(),
        training: outcome.metrics,
        plaintext_n,
        measured_n: run.n,
        claimed_n,
        block_hash: hex::encode(block.hash()),
        costs,
    };
    Ok((work, block))
}

/// Executes one full round and advances `state`.
pub fn run_round(cfg: &ScenarioConfig, state: &mut SimState) -> Result<RoundReport, SimError> {
    cfg.validate()?;
    let now = state.round;
    let round = now.to_string();

    // Task selection among arrived, unexpired tasks.
    state.pending.retain(|t| t.deadline >= now);
    let open: Vec<Task> = state.pending.iter().filter(|t| t.arrival <= now).cloned().collect();
    let task = select_task(&open).at(Stage::SelectTask)?.clone();
    let test = test_set(cfg, &task.id)?;
    if commitment(&test) != task.test_commitment {
        return Err(SimError::new(Stage::SelectTask, format!("test set of {} does not match its commitment", task.id)));
    }
    let records = test.len() as u64;
    let actual: Vec<u32> = test.labels().into_iter().map(|v| v as u32).collect();

    let mut req_rng = stream(cfg.seed, &[&round, "requester"]);
    let requester = keygen(cfg.key_bits, &mut req_rng).at(Stage::Predict)?;
    let enc_test =
        EncryptedTestSet::encrypt(&requester, &FixedPointEncoding::default(), &test.features(), &mut req_rng)
            .at(Stage::Predict)?;

    let provider = cfg.provider_economics()?;
    let mut costs = CostTally { he_encryptions: records * cfg.data.dim as u64, ..CostTally::default() };
    let mut pools = Vec::with_capacity(cfg.pools.len());
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut traded = Vec::new();
    for (i, pool) in cfg.pools.iter().enumerate() {
        let r = state.ledger.reputation(&pool.id).at(Stage::Negotiate)?;
        let po = cfg.pool_economics(pool)?;
        let mut rng = stream(cfg.seed, &[&round, &pool.id, "trade"]);
        let negotiation = negotiate_trade(&po, &provider, r, &cfg.market, NegotiationPolicy::default(), &mut rng)
            .at(Stage::Negotiate)?;
        let mut work = None;
        if let (true, Some(q)) = (negotiation.executed(), negotiation.quote()) {
            let entry = TradeLedgerEntry {
                pool_id: pool.id.clone(),
                provider_id: cfg.provider.id.clone(),
                final_price: q.final_price,
                trade_time: now,
                leak_evidence: false,
            };
            let tx = entry.to_tx();
            state.ledger.record_trade(entry).at(Stage::Negotiate)?;
            traded.push(i);
            let (w, block) = pool_work(cfg, state, i, &task, &test, &requester, &enc_test, Some(tx))?;
            costs.add(&w.costs);
            candidates.push(Candidate { pool: i, block });
            work = Some(w);
        }
        pools.push(PoolReport { pool_id: pool.id.clone(), reputation: r.value(), negotiation, work });
    }

    // Every full node runs the same sort-and-verify pass.
    let blocks: Vec<Block> = candidates.iter().map(|c| c.block.clone()).collect();
    let mut elections: Vec<Election> = Vec::with_capacity(cfg.full_nodes);
    for node in 0..cfg.full_nodes {
        let node_tag = format!("node-{node}");
        let mut log = Transcript::new(format!("{}:{node_tag}", task.id));
        let e = elect_winner(&blocks, |b| {
            let published = b.vm.validate().map_err(|e| e.to_string())?;
            let mut rng = stream(cfg.seed, &[&round, &node_tag, &b.header.pool_id, "verify"]);
            verify_published(&published, &actual, cfg.ot_backend, Party::FullNode, &mut rng, &mut log)
                .map_err(|e| e.to_string())
        });
        costs.verification_bytes += log.total_bytes();
        costs.ot_transfers += e.checked.len() as u64 * records * u64::from(cfg.requester.label_bits);
        elections.push(e);
    }
    let election = elections[0].clone();
    if elections.iter().any(|e| *e != election) {
        return Err(SimError::new(Stage::Elect, "full nodes disagree on the winner"));
    }
    let pool_of = |ci: usize| cfg.pools[candidates[ci].pool].id.clone();
    let election_report = ElectionReport {
        order: election.order.iter().map(|&ci| pool_of(ci)).collect(),
        checked: election
            .checked
            .iter()
            .map(|(ci, v)| VerdictEntry { pool_id: pool_of(*ci), verdict: v.clone() })
            .collect(),
        full_nodes: cfg.full_nodes,
    };

    // Reward split and chain extension.
    let mut rewards = Vec::new();
    let mut winner = None;
    let mut block_hash = None;
    if let Some(ci) = election.winner {
        let pool = &cfg.pools[candidates[ci].pool];
        let share = task.reward / pool.miners as f64;
        for k in 0..pool.miners {
            let id = miner_id(&pool.id, k);
            *state
                .balances
                .get_mut(&id)
                .ok_or_else(|| SimError::new(Stage::Reward, format!("unknown miner {id}")))? += share;
            rewards.push((id, share));
        }
        let block = candidates.swap_remove(ci).block;
        block_hash = Some(hex::encode(block.hash()));
        state.chain.push(block);
        state.pending.retain(|t| t.id != task.id);
        winner = Some(pool.id.clone());
    }

    // Leaks by pools that received data this round.
    let mut reputation = Vec::with_capacity(cfg.pools.len());
    for (i, pool) in cfg.pools.iter().enumerate() {
        let before = pools[i].reputation;
        let mut rng = stream(cfg.seed, &[&round, &pool.id, "leak"]);
        let leaked = traded.contains(&i) && pool.leak_probability > 0.0 && rng.gen_bool(pool.leak_probability);
        let after = state.ledger.update_reputation(&pool.id, leaked, now).at(Stage::Reputation)?.value();
        reputation.push(ReputationDelta { pool_id: pool.id.clone(), before, after, leaked });
    }

    state.round += 1;
    Ok(RoundReport {
        round: now,
        time: now,
        task_id: task.id,
        test_records: records,
        pools,
        election: election_report,
        winner,
        block_hash,
        chain_height: state.chain.len() as u64,
        rewards,
        reputation,
        costs,
    })
}

/// A scenario together with its evolving state.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: ScenarioConfig,
    state: SimState,
}

impl Simulator {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        let state = SimState::new(&config)?;
        Ok(Self { config, state })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn run_round(&mut self) -> Result<RoundReport, SimError> {
        run_round(&self.config, &mut self.state)
    }

    /// Runs the configured number of rounds, stopping early once no task is left.
    pub fn run(&mut self) -> Result<Vec<RoundReport>, SimError> {
        let mut out = Vec::new();
        for _ in 0..self.config.rounds {
            if self.state.pending.is_empty() {
                break;
            }
            out.push(self.run_round()?);
        }
        Ok(out)
    }

    pub fn chain_dump(&self) -> Vec<u8> {
        self.state.chain_dump()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::verify_dump;
    use crate::gc::OtBackend;

    fn small() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::example();
        cfg.requester.test_records = 24;
        cfg.training.max_epochs = 15;
        cfg.training.deadline = 15;
        cfg.full_nodes = 2;
        cfg.ot_backend = OtBackend::TrustedDealer;
        cfg.pools.truncate(1);
        cfg.tasks.truncate(1);
        cfg
    }

    #[test]
    fn single_honest_pool_wins_when_it_trades() {
        let cfg = small();
        let mut st = SimState::new(&cfg).unwrap();
        let rep = run_round(&cfg, &mut st).unwrap();
        let pool = &rep.pools[0];
        if pool.negotiation.executed() {
            assert_eq!(rep.winner.as_deref(), Some("pool-a"));
            assert_eq!(st.chain.len(), 1);
            let w = pool.work.as_ref().unwrap();
            assert_eq!(w.measured_n, w.plaintext_n);
            assert_eq!(rep.rewards.len(), 3);
            assert!(verify_dump(&st.chain_dump()).is_ok());
        } else {
            assert!(rep.winner.is_none());
            assert!(st.chain.is_empty());
        }
    }

    #[test]
    fn stage_named_in_errors() {
        let cfg = small();
        let mut st = SimState::new(&cfg).unwrap();
        st.pending.clear();
        let e = run_round(&cfg, &mut st).unwrap_err();
        assert_eq!(e.stage, Stage::SelectTask);
        assert!(e.to_string().starts_with("stage select_task"));
    }

    #[test]
    fn divergent_training_aborts_round() {
        let mut cfg = small();
        cfg.training.zeta = 1e6;
        cfg.pools[0].reputation = 1.0;
        let mut st = SimState::new(&cfg).unwrap();
        for _ in 0..5 {
            match run_round(&cfg, &mut st) {
                Err(e) => {
                    assert_eq!(e.stage, Stage::Train);
                    return;
                }
                Ok(r) => assert!(!r.pools[0].negotiation.executed()),
            }
        }
    }
}
