//! Reverse-game data trading between a mining pool and a data provider.
//!
//! The provider publishes a markup rule `D_s*(m)`; the pool answers with the
//! bid `m*` that maximises its own utility against that rule. The trade then
//! happens with probability `p`, which rises with the pool's reputation and
//! with both price components.

mod audit;
mod equilibrium;
mod negotiate;
mod params;
mod sweep;

pub use audit::{ic_audit, ic_audit_report, FakeInfoGrid, IcAuditReport, IC_TOLERANCE};
pub use equilibrium::{
    pool_bid_compact_formula, pool_integrand, pool_optimal_bid, pool_utility_rate,
    provider_integrand, provider_markup_rule, provider_utility_rate, solve_equilibrium,
    trading_probability, trading_probability_raw, Equilibrium, EquilibriumCoefficients,
};
pub use negotiate::{negotiate_trade, Negotiation, NegotiationPolicy, RejectReason, TradeQuote};
pub use params::{MarketParams, PoolEconomics, ProviderEconomics, Reputation};
pub use sweep::{sweep_trading, TradeAxis, TradeSweepRow, TRADE_SWEEP_HEADER};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TradingError {
    #[error("invalid trading parameters: {0}")]
    Parameter(String),
    #[error("equilibrium conditions violated: {0}")]
    EquilibriumInvalid(String),
    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),
}
