use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use pofl::chain::{dump_chain, verify_dump, build_block, Accuracy, BlockDraft, Vm};
use pofl::gc::{compare_labels, plaintext_oracle, OtBackend};
use pofl::sim::{fit_line, report_costs};
use pofl::trading::{
    pool_integrand, provider_markup_rule, solve_equilibrium, MarketParams, PoolEconomics, ProviderEconomics,
    Reputation,
};
use pofl::transcript::{MessageKind, Party, Transcript};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gc_count_matches_plaintext(
        pairs in prop::collection::vec((0u32..16, 0u32..16), 1..40),
        seed in any::<u64>(),
    ) {
        let (pred, act): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut log = Transcript::new("prop");
        let run = compare_labels(&pred, &act, 4, seed, OtBackend::TrustedDealer, &mut rng, &mut log).unwrap();
        prop_assert_eq!(run.n, plaintext_oracle(&pred, &act).unwrap());
    }

    #[test]
    fn equilibrium_bid_is_a_local_maximum(
        r in 0.05f64..0.95, q in 2.0f64..30.0, alpha_t in 0.0f64..3.0, beta_t in 0.6f64..2.0,
    ) {
        let mk = MarketParams::new(0.4, 0.4, 4.0, 4.0).unwrap();
        let pe = ProviderEconomics::new(1.5, 1.0, 1.8).unwrap();
        let po = PoolEconomics::new(q, alpha_t, beta_t).unwrap();
        let r = Reputation::new(r).unwrap();
        if let Ok(eq) = solve_equilibrium(r, &mk, &pe, &po) {
            let u = |m: f64| pool_integrand(m, provider_markup_rule(m, r, &mk, &pe).unwrap(), r, &mk, &pe, &po);
            let best = u(eq.m_star);
            prop_assert!(best + 1e-9 >= u(eq.m_star + 1e-3));
            prop_assert!(best + 1e-9 >= u(eq.m_star - 1e-3));
        }
    }

    #[test]
    fn any_flipped_byte_breaks_the_dump(pos in any::<prop::sample::Index>(), bit in 0u8..8) {
        let mut chain = Vec::new();
        for h in 0..3u64 {
            let draft = BlockDraft {
                timestamp: h,
                task_id: format!("t{h}"),
                pool_id: "p".into(),
                txs: vec![vec![h as u8; 5]],
                vm: Vm::new(vec![1, 2], vec![], vec![3]),
                accuracy: Accuracy::new(h, 10).unwrap(),
            };
            let block = build_block(chain.last().map(|b: &pofl::chain::Block| &b.header), draft).unwrap();
            chain.push(block);
        }
        let mut bytes = dump_chain(&chain);
        let i = pos.index(bytes.len());
        bytes[i] ^= 1 << bit;
        prop_assert!(verify_dump(&bytes).is_err());
    }
}

#[test]
fn cost_report_doubles_with_records() {
    let logs: Vec<(u64, Transcript)> = [100u64, 200, 400]
        .iter()
        .map(|&n| {
            let mut t = Transcript::new(format!("n{n}"));
            for _ in 0..n {
                t.record_size(Party::Requester, Party::Pool, MessageKind::EncryptedFeatures, 256);
            }
            (n, t)
        })
        .collect();
    let refs: Vec<(u64, &Transcript)> = logs.iter().map(|(n, t)| (*n, t)).collect();
    let report = report_costs(&refs);
    let he: Vec<u64> = report.rows.iter().map(|r| r.he_bytes).collect();
    assert_eq!(he[1], 2 * he[0]);
    assert_eq!(he[2], 2 * he[1]);
    let fit = report.he_fit.unwrap();
    assert!((fit.r2 - 1.0).abs() < 1e-12);
    assert!(fit_line(&[(1.0, 1.0)]).is_none());
}
