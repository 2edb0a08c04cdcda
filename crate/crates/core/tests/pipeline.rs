use pofl::chain::validate_chain;
use pofl::sim::{ScenarioConfig, Simulator};
use pofl::trading::{solve_equilibrium, MarketParams, PoolEconomics, ProviderEconomics, Reputation};

fn quick() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::example();
    cfg.requester.test_records = 24;
    cfg.training.max_epochs = 15;
    cfg.training.deadline = 15;
    cfg.full_nodes = 2;
    cfg
}

#[test]
fn honest_claims_equal_plaintext_counts() {
    let mut sim = Simulator::new(quick()).unwrap();
    let reports = sim.run().unwrap();
    assert!(!reports.is_empty());
    for rep in &reports {
        for p in &rep.pools {
            if let Some(w) = &p.work {
                assert_eq!(w.claimed_n, w.plaintext_n, "{}", p.pool_id);
                assert_eq!(w.measured_n, w.plaintext_n, "{}", p.pool_id);
            }
        }
    }
    assert!(validate_chain(&sim.state().chain));
}

#[test]
fn inflated_claim_loses_the_block() {
    let mut cfg = quick();
    cfg.rounds = 1;
    cfg.pools[0].claim_inflation = 1000;
    let mut sim = Simulator::new(cfg).unwrap();
    let rep = sim.run_round().unwrap();
    let liar = &rep.pools[0];
    let w = liar.work.as_ref().expect("pool-a trades in the example");
    assert!(w.claimed_n > w.measured_n);
    assert_eq!(rep.winner.as_deref(), Some("pool-b"));
}

#[test]
fn leaking_lowers_future_trading_probability() {
    let mut cfg = quick();
    cfg.pools.truncate(1);
    cfg.pools[0].alpha_t = 0.5;
    cfg.pools[0].leak_probability = 1.0;
    let mut sim = Simulator::new(cfg).unwrap();
    let first = sim.run_round().unwrap();
    let second = sim.run_round().unwrap();
    let d = &first.reputation[0];
    assert!(d.leaked && d.after < d.before);
    let p0 = first.pools[0].negotiation.quote().unwrap().p;
    let p1 = second.pools[0].negotiation.quote().map_or(0.0, |q| q.p);
    assert!(p1 < p0, "{p1} !< {p0}");
}

#[test]
fn leak_profit_equal_to_loss_makes_reputation_irrelevant() {
    let mk = MarketParams::new(0.4, 0.4, 4.0, 4.0).unwrap();
    let pe = ProviderEconomics::new(1.5, 1.0, 1.8).unwrap();
    let po = PoolEconomics::new(8.0, 1.5, 1.0).unwrap();
    let at = |r: f64| solve_equilibrium(Reputation::new(r).unwrap(), &mk, &pe, &po).unwrap().p;
    assert!((at(0.2) - at(0.8)).abs() < 1e-12);
    let cheaper = po.with_alpha_t(0.5).unwrap();
    let at = |r: f64| solve_equilibrium(Reputation::new(r).unwrap(), &mk, &pe, &cheaper).unwrap().p;
    assert!(at(0.2) < at(0.8));
}

#[test]
fn rounds_differ_with_seed() {
    let mut a = Simulator::new(quick()).unwrap();
    let mut cfg = quick();
    cfg.seed += 1;
    let mut b = Simulator::new(cfg).unwrap();
    a.run().unwrap();
    b.run().unwrap();
    assert_ne!(a.chain_dump(), b.chain_dump());
}
