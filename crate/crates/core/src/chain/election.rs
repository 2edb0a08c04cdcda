use serde::{Deserialize, Serialize};

use super::block::Block;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Verdict {
    Verified,
    Mismatch { verified_n: u64 },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Election {
    /// Index into the candidate list.
    pub winner: Option<usize>,
    /// Candidate indices in verification order.
    pub order: Vec<usize>,
    /// Verdicts for the candidates that were actually tested, in order.
    pub checked: Vec<(usize, Verdict)>,
}

/// Verification order: claimed accuracy descending, then earlier timestamp,
/// then lower header hash.
pub fn election_order(candidates: &[Block]) -> Vec<usize> {
    let hashes: Vec<_> = candidates.iter().map(Block::hash).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        let (ha, hb) = (&candidates[a].header, &candidates[b].header);
        hb.accuracy
            .cmp_ratio(&ha.accuracy)
            .then(ha.timestamp.cmp(&hb.timestamp))
            .then_with(|| hashes[a].cmp(&hashes[b]))
            .then(a.cmp(&b))
    });
    order
}

/// Tests candidates from the highest claim down and stops at the first whose
/// verified `N` equals its header `N`. A callback error counts as a mismatch.
pub fn elect_winner<E: std::fmt::Display>(
    candidates: &[Block],
    mut verify: impl FnMut(&Block) -> Result<u64, E>,
) -> Election {
    let order = election_order(candidates);
    let mut checked = Vec::new();
    for &i in &order {
        let claimed = candidates[i].header.accuracy.n;
        let verdict = match verify(&candidates[i]) {
            Ok(n) if n == claimed => Verdict::Verified,
            Ok(n) => Verdict::Mismatch { verified_n: n },
            Err(e) => Verdict::Failed { reason: e.to_string() },
        };
        let won = verdict == Verdict::Verified;
        checked.push((i, verdict));
        if won {
            return Election { winner: Some(i), order, checked };
        }
    }
    Election { winner: None, order, checked }
}

impl Election {
    pub fn winner<'a>(&self, candidates: &'a [Block]) -> Option<&'a Block> {
        self.winner.map(|i| &candidates[i])
    }
}

#[cfg(test)]
mod tests {
    use super::super::block::{build_block, Accuracy, BlockDraft, Vm};
    use super::*;

    fn cand(pool: &str, n: u64, ts: u64) -> Block {
        build_block(
            None,
            BlockDraft {
                timestamp: ts,
                task_id: "t".into(),
                pool_id: pool.into(),
                txs: vec![],
                vm: Vm::new(vec![], vec![], vec![]),
                accuracy: Accuracy::new(n, 100).unwrap(),
            },
        )
        .unwrap()
    }

    #[test]
    fn inflated_claim_loses() {
        let c = vec![cand("liar", 90, 1), cand("honest", 85, 1)];
        let truth = [70u64, 85];
        let e = elect_winner(&c, |b| {
            Ok::<_, String>(if b.header.pool_id == "liar" { truth[0] } else { truth[1] })
        });
        assert_eq!(e.winner(&c).unwrap().header.pool_id, "honest");
        assert_eq!(e.checked.len(), 2);
    }

    #[test]
    fn single_truthful_and_all_false() {
        let c = vec![cand("a", 50, 1)];
        assert_eq!(elect_winner(&c, |_| Ok::<_, String>(50)).winner, Some(0));
        let c = vec![cand("a", 50, 1), cand("b", 60, 1)];
        assert_eq!(elect_winner(&c, |_| Ok::<_, String>(0)).winner, None);
    }

    #[test]
    fn callback_error_is_mismatch() {
        let c = vec![cand("a", 60, 1), cand("b", 50, 1)];
        let e = elect_winner(&c, |b| if b.header.pool_id == "a" { Err("boom") } else { Ok(50) });
        assert_eq!(e.winner, Some(1));
        assert!(matches!(e.checked[0].1, Verdict::Failed { .. }));
    }

    #[test]
    fn ties_by_timestamp_then_hash() {
        let c = vec![cand("late", 50, 9), cand("early", 50, 2)];
        assert_eq!(election_order(&c), vec![1, 0]);
        let c = vec![cand("x", 50, 2), cand("y", 50, 2)];
        let o = election_order(&c);
        assert!(c[o[0]].hash() < c[o[1]].hash());
    }
}
