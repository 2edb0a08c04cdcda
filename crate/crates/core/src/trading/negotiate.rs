use rand::Rng;
use serde::{Deserialize, Serialize};

use super::equilibrium::{provider_markup_rule, pool_optimal_bid, trading_probability_raw};
use super::{MarketParams, PoolEconomics, ProviderEconomics, Reputation, TradingError};

/// Agreed prices for one trade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeQuote {
    pub m_star: f64,
    pub ds_star: f64,
    /// Trading probability clamped into `[0, 1]`.
    pub p: f64,
    pub p_raw: f64,
    /// `m_star + ds_star`.
    pub final_price: f64,
}

/// How the pool side behaves during the three-phase exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationPolicy {
    /// Whether the pool accepts the provider's published rule.
    pub accept_rule: bool,
    /// Simulated ticks the pool needs to compute and send its bid.
    pub bid_delay: u32,
    /// Ticks the provider waits for the bid.
    pub deadline: u32,
}

impl Default for NegotiationPolicy {
    fn default() -> Self {
        Self { accept_rule: true, bid_delay: 0, deadline: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    /// The pool ignored the rule.
    RuleIgnored,
    /// The bid did not arrive before the deadline.
    DeadlineExpired,
    /// A price component came out negative.
    Inadmissible { m_star: f64, ds_star: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Negotiation {
    Rejected(RejectReason),
    Quoted {
        quote: TradeQuote,
        /// Outcome of the Bernoulli(p) draw deciding whether data changes hands.
        executed: bool,
    },
}

impl Negotiation {
    pub fn quote(&self) -> Option<&TradeQuote> {
        match self {
            Negotiation::Quoted { quote, .. } => Some(quote),
            Negotiation::Rejected(_) => None,
        }
    }

    pub fn executed(&self) -> bool {
        matches!(self, Negotiation::Quoted { executed: true, .. })
    }
}

/// Runs the rule / bid / settle exchange between a pool manager and a provider.
pub fn negotiate_trade<R: Rng + ?Sized>(
    pool: &PoolEconomics,
    provider: &ProviderEconomics,
    r: Reputation,
    mk: &MarketParams,
    policy: NegotiationPolicy,
    rng: &mut R,
) -> Result<Negotiation, TradingError> {
    // Phase 1: the provider's rule must be well defined before it is published.
    provider_markup_rule(0.0, r, mk, provider)?;

    // Phase 2
    if !policy.accept_rule {
        return Ok(Negotiation::Rejected(RejectReason::RuleIgnored));
    }
    let m_star = pool_optimal_bid(r, mk, provider, pool)?;

    // Phase 3
    if policy.bid_delay > policy.deadline {
        return Ok(Negotiation::Rejected(RejectReason::DeadlineExpired));
    }
    let ds_star = provider_markup_rule(m_star, r, mk, provider)?;
    if m_star < 0.0 || ds_star < 0.0 {
        return Ok(Negotiation::Rejected(RejectReason::Inadmissible { m_star, ds_star }));
    }
    let p_raw = trading_probability_raw(r, ds_star, m_star, mk);
    let p = p_raw.clamp(0.0, 1.0);
    let quote = TradeQuote { m_star, ds_star, p, p_raw, final_price: m_star + ds_star };
    let executed = rng.gen_bool(p);
    Ok(Negotiation::Quoted { quote, executed })
}
