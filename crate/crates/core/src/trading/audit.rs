use serde::{Deserialize, Serialize};

use super::equilibrium::{pool_integrand, pool_optimal_bid, provider_markup_rule, stationary_bid};
use super::{MarketParams, PoolEconomics, ProviderEconomics, Reputation, TradingError};

/// Absolute slack allowed when comparing a misreport's utility to the truthful one.
pub const IC_TOLERANCE: f64 = 1e-9;

/// Multiplicative perturbations applied to the pool's `(Q, alpha_t, beta_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FakeInfoGrid {
    pub q_factors: Vec<f64>,
    pub alpha_t_factors: Vec<f64>,
    pub beta_t_factors: Vec<f64>,
}

impl FakeInfoGrid {
    /// `steps` evenly spaced factors from `lo` to `hi` on every axis.
    pub fn uniform(lo: f64, hi: f64, steps: usize) -> Self {
        let factors: Vec<f64> = if steps <= 1 {
            vec![lo]
        } else {
            (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
        };
        Self {
            q_factors: factors.clone(),
            alpha_t_factors: factors.clone(),
            beta_t_factors: factors,
        }
    }

    /// Only the truthful triple.
    pub fn identity() -> Self {
        Self { q_factors: vec![1.0], alpha_t_factors: vec![1.0], beta_t_factors: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.q_factors.len() * self.alpha_t_factors.len() * self.beta_t_factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for FakeInfoGrid {
    /// 21 factors per axis spanning ±50 % of the truth.
    fn default() -> Self {
        Self::uniform(0.5, 1.5, 21)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcAuditReport {
    pub truthful_bid: f64,
    pub truthful_utility: f64,
    pub checked: usize,
    /// Misreports for which no finite bid exists.
    pub skipped: usize,
    pub violations: usize,
    /// Largest `utility(misreport) - utility(truth)` observed.
    pub worst_gain: f64,
}

impl IcAuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks that no misreport of the pool's private information in `grid`
/// yields a bid with higher true utility than the truthful bid.
pub fn ic_audit(
    pool: &PoolEconomics,
    provider: &ProviderEconomics,
    r: Reputation,
    mk: &MarketParams,
    grid: &FakeInfoGrid,
) -> Result<bool, TradingError> {
    Ok(ic_audit_report(pool, provider, r, mk, grid)?.passed())
}

pub fn ic_audit_report(
    pool: &PoolEconomics,
    provider: &ProviderEconomics,
    r: Reputation,
    mk: &MarketParams,
    grid: &FakeInfoGrid,
) -> Result<IcAuditReport, TradingError> {
    let true_utility = |m: f64| -> Result<f64, TradingError> {
        let ds = provider_markup_rule(m, r, mk, provider)?;
        Ok(pool_integrand(m, ds, r, mk, provider, pool))
    };
    let truthful_bid = pool_optimal_bid(r, mk, provider, pool)?;
    let truthful_utility = true_utility(truthful_bid)?;

    let mut report = IcAuditReport {
        truthful_bid,
        truthful_utility,
        checked: 0,
        skipped: 0,
        violations: 0,
        worst_gain: f64::NEG_INFINITY,
    };
    for &fq in &grid.q_factors {
        for &fa in &grid.alpha_t_factors {
            for &fb in &grid.beta_t_factors {
                let fake = PoolEconomics::new(
                    pool.q() * fq,
                    pool.alpha_t() * fa,
                    pool.beta_t() * fb,
                )?;
                let Some(bid) = stationary_bid(r, mk, provider, &fake).filter(|m| m.is_finite())
                else {
                    report.skipped += 1;
                    continue;
                };
                let gain = true_utility(bid)? - truthful_utility;
                report.checked += 1;
                report.worst_gain = report.worst_gain.max(gain);
                if gain > IC_TOLERANCE {
                    report.violations += 1;
                }
            }
        }
    }
    Ok(report)
}
