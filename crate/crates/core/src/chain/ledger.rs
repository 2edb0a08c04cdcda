use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ChainError;
use crate::trading::Reputation;

/// Reputation lost per proven leak.
pub const LEAK_PENALTY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeLedgerEntry {
    pub pool_id: String,
    pub provider_id: String,
    pub final_price: f64,
    pub trade_time: u64,
    pub leak_evidence: bool,
}

impl TradeLedgerEntry {
    /// Canonical transaction bytes for inclusion in a block body.
    pub fn to_tx(&self) -> Vec<u8> {
        let mut out = b"trade".to_vec();
        for s in [&self.pool_id, &self.provider_id] {
            out.extend((s.len() as u32).to_be_bytes());
            out.extend(s.as_bytes());
        }
        out.extend(self.final_price.to_bits().to_be_bytes());
        out.extend(self.trade_time.to_be_bytes());
        out.push(u8::from(self.leak_evidence));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LedgerEntry {
    Trade(TradeLedgerEntry),
    Leak { pool_id: String, time: u64 },
}

impl LedgerEntry {
    fn pool_id(&self) -> &str {
        match self {
            LedgerEntry::Trade(t) => &t.pool_id,
            LedgerEntry::Leak { pool_id, .. } => pool_id,
        }
    }

    fn is_leak(&self) -> bool {
        match self {
            LedgerEntry::Trade(t) => t.leak_evidence,
            LedgerEntry::Leak { .. } => true,
        }
    }
}

/// Append-only record of trades and proven leaks. Reputations are never
/// stored; they are replayed from the entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    initial: BTreeMap<String, Reputation>,
    entries: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_pool(&mut self, pool_id: impl Into<String>, initial: Reputation) -> Result<(), ChainError> {
        let id = pool_id.into();
        if self.initial.contains_key(&id) {
            return Err(ChainError::Invalid(format!("pool {id} already registered")));
        }
        self.initial.insert(id, initial);
        Ok(())
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn known(&self, pool_id: &str) -> Result<(), ChainError> {
        if !self.initial.contains_key(pool_id) {
            return Err(ChainError::UnknownPool(pool_id.to_string()));
        }
        Ok(())
    }

    pub fn record_trade(&mut self, entry: TradeLedgerEntry) -> Result<(), ChainError> {
        self.known(&entry.pool_id)?;
        self.entries.push(LedgerEntry::Trade(entry));
        Ok(())
    }

    /// Appends a leak incident when `leak_evidence` holds and returns the
    /// pool's reputation afterwards.
    pub fn update_reputation(&mut self, pool_id: &str, leak_evidence: bool, time: u64) -> Result<Reputation, ChainError> {
        self.known(pool_id)?;
        if leak_evidence {
            self.entries.push(LedgerEntry::Leak { pool_id: pool_id.to_string(), time });
        }
        self.reputation(pool_id)
    }

    pub fn reputation(&self, pool_id: &str) -> Result<Reputation, ChainError> {
        self.reputation_at(pool_id, self.entries.len())
    }

    /// Reputation from replaying the first `prefix` entries.
    pub fn reputation_at(&self, pool_id: &str, prefix: usize) -> Result<Reputation, ChainError> {
        let r0 = *self.initial.get(pool_id).ok_or_else(|| ChainError::UnknownPool(pool_id.to_string()))?;
        let leaks = self.entries[..prefix.min(self.entries.len())]
            .iter()
            .filter(|e| e.pool_id() == pool_id && e.is_leak())
            .count();
        let mut r = r0.value();
        for _ in 0..leaks {
            r = (r - LEAK_PENALTY).max(0.0);
        }
        Ok(Reputation::saturating(r))
    }

    pub fn pools(&self) -> impl Iterator<Item = &str> {
        self.initial.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger(r: f64) -> Ledger {
        let mut l = Ledger::new();
        l.register_pool("p", Reputation::new(r).unwrap()).unwrap();
        l
    }

    #[test]
    fn one_leak_from_half() {
        let mut l = ledger(0.5);
        assert_eq!(l.update_reputation("p", true, 1).unwrap().value(), 0.4);
    }

    #[test]
    fn floor_at_zero() {
        let mut l = ledger(0.05);
        assert_eq!(l.update_reputation("p", true, 1).unwrap().value(), 0.0);
    }

    #[test]
    fn no_evidence_no_change() {
        let mut l = ledger(0.7);
        assert_eq!(l.update_reputation("p", false, 1).unwrap().value(), 0.7);
        assert!(l.is_empty());
    }

    #[test]
    fn unknown_pool() {
        let mut l = ledger(0.5);
        assert!(matches!(l.update_reputation("q", true, 0), Err(ChainError::UnknownPool(_))));
        let e = TradeLedgerEntry {
            pool_id: "q".into(),
            provider_id: "d".into(),
            final_price: 1.0,
            trade_time: 0,
            leak_evidence: false,
        };
        assert!(l.record_trade(e).is_err());
    }

    #[test]
    fn replay_prefix() {
        let mut l = ledger(0.9);
        l.update_reputation("p", true, 1).unwrap();
        l.update_reputation("p", true, 2).unwrap();
        assert!((l.reputation_at("p", 0).unwrap().value() - 0.9).abs() < 1e-15);
        assert!((l.reputation_at("p", 1).unwrap().value() - 0.8).abs() < 1e-15);
        assert!((l.reputation("p").unwrap().value() - 0.7).abs() < 1e-15);
    }
}
