use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    solve_equilibrium, MarketParams, PoolEconomics, ProviderEconomics, Reputation, TradingError,
};

/// Header line of the trading sweep CSV.
pub const TRADE_SWEEP_HEADER: [&str; 7] =
    ["axis", "value", "m_star", "ds_star", "p", "pool_utility", "provider_utility"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TradeAxis {
    Reputation,
    Q,
    AlphaT,
    BetaT,
}

impl TradeAxis {
    pub fn name(self) -> &'static str {
        match self {
            TradeAxis::Reputation => "r",
            TradeAxis::Q => "Q",
            TradeAxis::AlphaT => "alpha_t",
            TradeAxis::BetaT => "beta_t",
        }
    }
}

impl fmt::Display for TradeAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TradeAxis {
    type Err = TradingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "r" => Ok(TradeAxis::Reputation),
            "Q" | "q" => Ok(TradeAxis::Q),
            "alpha_t" => Ok(TradeAxis::AlphaT),
            "beta_t" => Ok(TradeAxis::BetaT),
            other => Err(TradingError::Parameter(format!("unknown trading axis {other:?}"))),
        }
    }
}

/// One equilibrium evaluated at a sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeSweepRow {
    pub axis: String,
    pub value: f64,
    pub m_star: f64,
    pub ds_star: f64,
    pub p: f64,
    pub pool_utility: f64,
    pub provider_utility: f64,
}

/// Solves the equilibrium at each value of `axis`, holding everything else fixed.
pub fn sweep_trading(
    axis: TradeAxis,
    values: &[f64],
    r: Reputation,
    mk: &MarketParams,
    pe: &ProviderEconomics,
    po: &PoolEconomics,
) -> Result<Vec<TradeSweepRow>, TradingError> {
    values
        .iter()
        .map(|&v| {
            let (r, po) = match axis {
                TradeAxis::Reputation => (Reputation::new(v)?, *po),
                TradeAxis::Q => (r, po.with_q(v)?),
                TradeAxis::AlphaT => (r, po.with_alpha_t(v)?),
                TradeAxis::BetaT => (r, po.with_beta_t(v)?),
            };
            let eq = solve_equilibrium(r, mk, pe, &po)?;
            Ok(TradeSweepRow {
                axis: axis.name().to_string(),
                value: v,
                m_star: eq.m_star,
                ds_star: eq.ds_star,
                p: eq.p,
                pool_utility: eq.pool_utility,
                provider_utility: eq.provider_utility,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_names_round_trip() {
        for axis in [TradeAxis::Reputation, TradeAxis::Q, TradeAxis::AlphaT, TradeAxis::BetaT] {
            assert_eq!(axis.name().parse::<TradeAxis>().unwrap(), axis);
        }
        assert!("zeta".parse::<TradeAxis>().is_err());
    }

    #[test]
    fn q_sweep_raises_probability() {
        let mk = MarketParams::new(0.4, 0.4, 4.0, 4.0).unwrap();
        let pe = ProviderEconomics::new(1.5, 1.0, 1.8).unwrap();
        let po = PoolEconomics::new(8.0, 1.5, 1.0).unwrap();
        let rows = sweep_trading(
            TradeAxis::Q,
            &[2.0, 4.0, 6.0, 8.0, 10.0],
            Reputation::new(0.5).unwrap(),
            &mk,
            &pe,
            &po,
        )
        .unwrap();
        assert!(rows.windows(2).all(|w| w[1].p > w[0].p));
    }
}
