//! Closed-form strategies of the reverse data-trading game.
//!
//! All utilities are per-round rates: the strategies are static, so the
//! utility over a trading window is a constant multiple of its integrand.

use serde::{Deserialize, Serialize};

use super::{MarketParams, PoolEconomics, ProviderEconomics, Reputation, TradingError};

/// Unclamped trading probability
/// `eps1 r + eps2 ds / ds_bar + (1 - eps1 - eps2) m / m_bar`.
///
/// Exceeds 1 for bids above `m_bar` or markups above `ds_bar`.
pub fn trading_probability_raw(r: Reputation, ds: f64, m: f64, mk: &MarketParams) -> f64 {
    mk.eps1() * r.value() + mk.eps2() * ds / mk.ds_bar() + mk.eps3() * m / mk.m_bar()
}

/// Probability that the provider sells, clamped into `[0, 1]`.
pub fn trading_probability(
    r: Reputation,
    ds: f64,
    m: f64,
    mk: &MarketParams,
) -> Result<f64, TradingError> {
    if !(ds >= 0.0 && m >= 0.0) {
        return Err(TradingError::Parameter(format!(
            "prices must be non-negative (ds={ds}, m={m})"
        )));
    }
    Ok(trading_probability_raw(r, ds, m, mk).clamp(0.0, 1.0))
}

fn pool_surplus(m: f64, ds: f64, r: Reputation, pe: &ProviderEconomics, po: &PoolEconomics) -> f64 {
    po.q() + po.leak_profit(r, ds, pe.eta()) - m - ds
}

fn provider_surplus(m: f64, ds: f64, r: Reputation, pe: &ProviderEconomics) -> f64 {
    m + ds - pe.leak_loss(r, ds)
}

/// Pool utility rate `p (Q + c~(r, V) - m - D_s)` with the clamped probability.
pub fn pool_utility_rate(
    m: f64,
    ds: f64,
    r: Reputation,
    mk: &MarketParams,
    pe: &ProviderEconomics,
    po: &PoolEconomics,
) -> f64 {
    let p = trading_probability_raw(r, ds, m, mk).clamp(0.0, 1.0);
    p * pool_surplus(m, ds, r, pe, po)
}

/// Provider utility rate `p (m + D_s - c(r, V))` with the clamped probability.
pub fn provider_utility_rate(
    m: f64,
    ds: f64,
    r: Reputation,
    mk: &MarketParams,
    pe: &ProviderEconomics,
) -> f64 {
    let p = trading_probability_raw(r, ds, m, mk).clamp(0.0, 1.0);
    p * provider_surplus(m, ds, r, pe)
}

/// Pool integrand with the unclamped probability; this is the smooth
/// function the closed-form bid maximises.
pub fn pool_integrand(
    m: f64,
    ds: f64,
    r: Reputation,
    mk: &MarketParams,
    pe: &ProviderEconomics,
    po: &PoolEconomics,
) -> f64 {
    trading_probability_raw(r, ds, m, mk) * pool_surplus(m, ds, r, pe, po)
}

/// Provider integrand with the unclamped probability.
pub fn provider_integrand(
    m: f64,
    ds: f64,
    r: Reputation,
    mk: &MarketParams,
    pe: &ProviderEconomics,
) -> f64 {
    trading_probability_raw(r, ds, m, mk) * provider_surplus(m, ds, r, pe)
}

/// The provider's published rule `D_s*(m)`.
///
/// Stationary point of the provider integrand in `D_s`; it is a maximum
/// because the second derivative `2 eps2 (1 - beta eta) / ds_bar` is negative
/// whenever [`ProviderEconomics`] could be constructed. May be negative for
/// extreme inputs.
pub fn provider_markup_rule(
    m: f64,
    r: Reputation,
    mk: &MarketParams,
    pe: &ProviderEconomics,
) -> Result<f64, TradingError> {
    let k = pe.beta() * pe.eta() - 1.0;
    if k <= 0.0 {
        return Err(TradingError::EquilibriumInvalid(format!(
            "1 - beta*eta = {} is not negative",
            -k
        )));
    }
    Ok(markup_rule_unchecked(m, r, mk, pe))
}

fn markup_rule_unchecked(m: f64, r: Reputation, mk: &MarketParams, pe: &ProviderEconomics) -> f64 {
    let r = r.value();
    let numerator = mk.eps2() * (m - pe.alpha() * (1.0 - r))
        + (1.0 - pe.beta() * pe.eta()) * mk.ds_bar() * (mk.eps1() * r + mk.eps3() * m / mk.m_bar());
    numerator / (2.0 * mk.eps2() * (pe.beta() * pe.eta() - 1.0))
}

/// Coefficients shared by the equilibrium bid formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCoefficients {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl EquilibriumCoefficients {
    pub fn compute(mk: &MarketParams, pe: &ProviderEconomics, po: &PoolEconomics) -> Self {
        let be = pe.beta() * pe.eta();
        Self {
            a0: 2.0 * mk.eps2() * (be - 1.0),
            a1: mk.eps3() / mk.m_bar(),
            a2: mk.eps2() + (1.0 - be) * mk.eps3() * mk.ds_bar() / mk.m_bar(),
            a3: mk.ds_bar() * (po.beta_t() * pe.eta() - 1.0),
        }
    }
}

/// The pool's objective along the provider's rule is a quadratic in the bid:
/// `(p0 + p1 m)(g0 + g1 m)`.
#[derive(Debug, Clone, Copy)]
struct BidQuadratic {
    p0: f64,
    p1: f64,
    g0: f64,
    g1: f64,
}

impl BidQuadratic {
    fn new(r: Reputation, mk: &MarketParams, pe: &ProviderEconomics, po: &PoolEconomics) -> Self {
        let c = EquilibriumCoefficients::compute(mk, pe, po);
        let rv = r.value();
        // D_s*(m) = u + v m
        let u = (-mk.eps2() * pe.alpha() * (1.0 - rv)
            + (1.0 - pe.beta() * pe.eta()) * mk.ds_bar() * mk.eps1() * rv)
            / c.a0;
        let v = c.a2 / c.a0;
        Self {
            p0: mk.eps1() * rv + mk.eps2() * u / mk.ds_bar(),
            p1: mk.eps2() * v / mk.ds_bar() + c.a1,
            g0: po.q() + po.alpha_t() * (1.0 - rv) + c.a3 * u / mk.ds_bar(),
            g1: c.a3 * v / mk.ds_bar() - 1.0,
        }
    }

    fn curvature(&self) -> f64 {
        2.0 * self.p1 * self.g1
    }

    fn stationary_point(&self) -> Option<f64> {
        let denom = self.curvature();
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        Some(-(self.p1 * self.g0 + self.p0 * self.g1) / denom)
    }
}

/// The pool's equilibrium bid `m*` against the provider's rule.
///
/// Maximises the pool integrand along `D_s*(m)`. Requires
/// `1 - beta_t eta < 0` and a strictly concave objective.
pub fn pool_optimal_bid(
    r: Reputation,
    mk: &MarketParams,
    pe: &ProviderEconomics,
    po: &PoolEconomics,
) -> Result<f64, TradingError> {
    po.paired_with(pe)?;
    let quad = BidQuadratic::new(r, mk, pe, po);
    let m = quad.stationary_point().ok_or_else(|| {
        TradingError::DegenerateParameters("pool objective has zero curvature".into())
    })?;
    if quad.curvature() > 0.0 {
        return Err(TradingError::EquilibriumInvalid(format!(
            "stationary bid {m} minimises the pool objective (curvature {})",
            quad.curvature()
        )));
    }
    Ok(m)
}

/// Stationary bid a pool would compute from the given (possibly fake)
/// private parameters, with no admissibility checks. `None` when the
/// objective is degenerate.
pub(crate) fn stationary_bid(
    r: Reputation,
    mk: &MarketParams,
    pe: &ProviderEconomics,
    po: &PoolEconomics,
) -> Option<f64> {
    BidQuadratic::new(r, mk, pe, po).stationary_point()
}

/// Compact bid expression written directly in `A0..A3`.
///
/// It drops a `ds_bar` scaling and so agrees with [`pool_optimal_bid`] only
/// when `ds_bar == 1`.
pub fn pool_bid_compact_formula(
    r: Reputation,
    mk: &MarketParams,
    pe: &ProviderEconomics,
    po: &PoolEconomics,
) -> Result<f64, TradingError> {
    let EquilibriumCoefficients { a0, a1, a2, a3 } = EquilibriumCoefficients::compute(mk, pe, po);
    let (e1, e2, dsb, rv) = (mk.eps1(), mk.eps2(), mk.ds_bar(), r.value());
    let bt_eta = po.beta_t() * pe.eta() - 1.0;
    let denom = 2.0 * e2 * a0 * a2 + 2.0 * a1 * a0 * a0 * dsb
        - 2.0 * e2 * bt_eta * a2 * a2
        - 2.0 * a0 * a1 * a2 * a3;
    if denom == 0.0 {
        return Err(TradingError::DegenerateParameters("zero denominator".into()));
    }
    let legal = po.q() + po.alpha_t() * (1.0 - rv);
    let first = a0 * a2 * a3 * e1 * rv + (a0 * a2 * e2 + dsb * a0 * a0 * a1) * legal
        - e1 * rv * dsb * a0 * a0;
    let second = (2.0 * e2 * a2 * a3 + a0 * a1 * a3 - a0 * e2)
        * ((1.0 - pe.beta() * pe.eta()) * dsb * e1 * rv - e2 * pe.alpha() * (1.0 - rv));
    Ok((first + second) / denom)
}

/// Both strategies and the resulting probability and utilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub coefficients: EquilibriumCoefficients,
    pub m_star: f64,
    pub ds_star: f64,
    /// Unclamped trading probability at the equilibrium.
    pub p_raw: f64,
    pub p: f64,
    pub pool_utility: f64,
    pub provider_utility: f64,
}

impl Equilibrium {
    /// Both prices are non-negative.
    pub fn is_admissible(&self) -> bool {
        self.m_star >= 0.0 && self.ds_star >= 0.0
    }
}

pub fn solve_equilibrium(
    r: Reputation,
    mk: &MarketParams,
    pe: &ProviderEconomics,
    po: &PoolEconomics,
) -> Result<Equilibrium, TradingError> {
    let m_star = pool_optimal_bid(r, mk, pe, po)?;
    let ds_star = provider_markup_rule(m_star, r, mk, pe)?;
    let p_raw = trading_probability_raw(r, ds_star, m_star, mk);
    Ok(Equilibrium {
        coefficients: EquilibriumCoefficients::compute(mk, pe, po),
        m_star,
        ds_star,
        p_raw,
        p: p_raw.clamp(0.0, 1.0),
        pool_utility: pool_utility_rate(m_star, ds_star, r, mk, pe, po),
        provider_utility: provider_utility_rate(m_star, ds_star, r, mk, pe),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(r: f64) -> Reputation {
        Reputation::new(r).unwrap()
    }

    fn sweep_market() -> MarketParams {
        MarketParams::new(0.4, 0.4, 1.0, 1.0).unwrap()
    }

    fn sweep_provider() -> ProviderEconomics {
        ProviderEconomics::new(1.5, 1.0, 1.8).unwrap()
    }

    fn sweep_pool() -> PoolEconomics {
        PoolEconomics::new(8.0, 1.5, 1.0).unwrap()
    }

    /// Lowest-index argmax of `f` over `0, step, 2 step, ..., hi`.
    fn grid_argmax(hi: f64, step: f64, f: impl Fn(f64) -> f64) -> f64 {
        let n = (hi / step).round() as usize;
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..=n {
            let x = i as f64 * step;
            let y = f(x);
            if y > best.1 {
                best = (x, y);
            }
        }
        best.0
    }

    #[test]
    fn probability_examples() {
        let mk = sweep_market();
        assert_eq!(trading_probability(rep(1.0), 1.0, 1.0, &mk).unwrap(), 1.0);
        assert_eq!(trading_probability(rep(0.0), 0.0, 0.0, &mk).unwrap(), 0.0);
        let p = trading_probability(rep(0.5), 0.5, 0.5, &mk).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn probability_clamps_and_rejects_negative_prices() {
        let mk = sweep_market();
        assert_eq!(trading_probability(rep(1.0), 10.0, 10.0, &mk).unwrap(), 1.0);
        assert!(trading_probability_raw(rep(1.0), 10.0, 10.0, &mk) > 1.0);
        assert!(trading_probability(rep(0.5), -1.0, 0.0, &mk).is_err());
    }

    #[test]
    fn markup_rule_zero_when_numerator_vanishes() {
        // eps1 + eps2 = 1, r = 0, m = alpha
        let mk = MarketParams::new(0.3, 0.7, 1.0, 1.0).unwrap();
        let pe = sweep_provider();
        let ds = provider_markup_rule(pe.alpha(), rep(0.0), &mk, &pe).unwrap();
        assert!(ds.abs() < 1e-15);
    }

    #[test]
    fn markup_rule_worked_value_and_grid_oracle() {
        let (mk, pe) = (sweep_market(), sweep_provider());
        let ds = provider_markup_rule(2.0, rep(0.5), &mk, &pe).unwrap();
        assert!((ds - 0.03125).abs() < 1e-12);
        let oracle = grid_argmax(5.0, 1e-4, |d| provider_integrand(2.0, d, rep(0.5), &mk, &pe));
        assert!((oracle - ds).abs() <= 1e-4 + 1e-12, "oracle {oracle} vs {ds}");
    }

    #[test]
    fn utility_examples() {
        let (mk, pe, po) = (sweep_market(), sweep_provider(), sweep_pool());
        let u = pool_utility_rate(0.5, 0.5, rep(0.5), &mk, &pe, &po);
        assert!((u - 4.325).abs() < 1e-12);
        let v = provider_utility_rate(0.5, 0.5, rep(0.5), &mk, &pe);
        assert!((v + 0.325).abs() < 1e-12);
    }

    #[test]
    fn utility_zero_surplus_and_zero_probability() {
        let (mk, pe, po) = (sweep_market(), sweep_provider(), sweep_pool());
        // Q + c~ = m + ds with ds = 0, r = 0.5: m = 8 + 0.75
        assert!(pool_utility_rate(8.75, 0.0, rep(0.5), &mk, &pe, &po).abs() < 1e-12);
        // m + ds = alpha(1 - r) + beta eta ds with ds = 0: m = 0.75
        assert!(provider_utility_rate(0.75, 0.0, rep(0.5), &mk, &pe).abs() < 1e-12);
        // p = 0 kills any surplus
        assert_eq!(pool_utility_rate(0.0, 0.0, rep(0.0), &mk, &pe, &po), 0.0);
    }

    #[test]
    fn provider_utility_increases_with_reputation_when_surplus_nonnegative() {
        let (mk, pe) = (sweep_market(), sweep_provider());
        let mut last = f64::NEG_INFINITY;
        for i in 0..=20 {
            let r = rep(i as f64 / 20.0);
            let m = 3.0;
            let ds = 0.1;
            assert!(m + ds - pe.leak_loss(r, ds) >= 0.0);
            let u = provider_utility_rate(m, ds, r, &mk, &pe);
            assert!(u >= last);
            last = u;
        }
    }

    #[test]
    fn pool_bid_matches_grid_oracle_at_sweep_point() {
        let (mk, pe, po) = (sweep_market(), sweep_provider(), sweep_pool());
        let m = pool_optimal_bid(rep(0.5), &mk, &pe, &po).unwrap();
        // Frozen from the composed brute-force oracle on a 1e-4 grid over [0, 10];
        // m* lies above 5 m_bar here, so the default grid is widened.
        let golden = 5.9643;
        assert!((m - golden).abs() <= 1e-4, "m* = {m}");
        let oracle = grid_argmax(10.0 * mk.m_bar(), 1e-4, |x| {
            let d = provider_markup_rule(x, rep(0.5), &mk, &pe).unwrap();
            pool_integrand(x, d, rep(0.5), &mk, &pe, &po)
        });
        assert!((oracle - golden).abs() < 1e-9);
    }

    #[test]
    fn pool_bid_grows_with_q() {
        let (mk, pe, po) = (sweep_market(), sweep_provider(), sweep_pool());
        let m1 = pool_optimal_bid(rep(0.5), &mk, &pe, &po).unwrap();
        let m2 = pool_optimal_bid(rep(0.5), &mk, &pe, &po.with_q(16.0).unwrap()).unwrap();
        assert!(m2 > m1);
    }

    #[test]
    fn pool_bid_rejects_weak_leak_slope() {
        let mk = sweep_market();
        let pe = ProviderEconomics::new(1.5, 3.0, 0.5).unwrap();
        let po = PoolEconomics::new(8.0, 1.5, 1.0).unwrap();
        assert!(matches!(
            pool_optimal_bid(rep(0.5), &mk, &pe, &po),
            Err(TradingError::EquilibriumInvalid(_))
        ));
    }

    #[test]
    fn compact_formula_agrees_only_at_unit_ds_bar() {
        let pe = ProviderEconomics::new(0.7, 1.3, 1.6).unwrap();
        let po = PoolEconomics::new(6.0, 2.1, 1.1).unwrap();
        let r = rep(0.35);
        let unit = MarketParams::new(0.3, 0.35, 2.5, 1.0).unwrap();
        let a = pool_optimal_bid(r, &unit, &pe, &po).unwrap();
        let b = pool_bid_compact_formula(r, &unit, &pe, &po).unwrap();
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));

        let scaled = MarketParams::new(0.3, 0.35, 2.5, 2.0).unwrap();
        let a = pool_optimal_bid(r, &scaled, &pe, &po).unwrap();
        let b = pool_bid_compact_formula(r, &scaled, &pe, &po).unwrap();
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn second_difference_is_negative_at_markup() {
        let (mk, pe) = (sweep_market(), sweep_provider());
        let r = rep(0.3);
        let ds = provider_markup_rule(1.7, r, &mk, &pe).unwrap();
        let h = 1e-3;
        let f = |d: f64| provider_integrand(1.7, d, r, &mk, &pe);
        let second = f(ds + h) - 2.0 * f(ds) + f(ds - h);
        assert!(second <= 0.0);
        let exact = 2.0 * mk.eps2() * (1.0 - pe.beta() * pe.eta()) / mk.ds_bar();
        assert!((second / (h * h) - exact).abs() < 1e-6);
    }

    #[test]
    fn coefficient_a0_positive_under_condition() {
        let c = EquilibriumCoefficients::compute(&sweep_market(), &sweep_provider(), &sweep_pool());
        assert!(c.a0 > 0.0);
        assert!((c.a0 - 0.64).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_probability_consistent() {
        let (mk, pe, po) = (sweep_market(), sweep_provider(), sweep_pool());
        let eq = solve_equilibrium(rep(0.5), &mk, &pe, &po).unwrap();
        let p = trading_probability_raw(rep(0.5), eq.ds_star, eq.m_star, &mk);
        assert_eq!(eq.p_raw, p);
        assert!(eq.p <= 1.0);
    }
}
