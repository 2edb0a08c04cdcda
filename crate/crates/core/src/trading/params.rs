use serde::{Deserialize, Serialize};

use super::TradingError;

/// Market-wide inputs to the trading-probability rule.
///
/// `eps1` weighs the pool's reputation, `eps2` the provider's markup and the
/// remainder `1 - eps1 - eps2` the pool's bid. `m_bar` and `ds_bar` are the
/// highest bid and markup observed in recent rounds and normalise the two
/// price terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMarket", into = "RawMarket")]
pub struct MarketParams {
    eps1: f64,
    eps2: f64,
    m_bar: f64,
    ds_bar: f64,
}

#[derive(Serialize, Deserialize)]
struct RawMarket {
    eps1: f64,
    eps2: f64,
    m_bar: f64,
    ds_bar: f64,
}

impl TryFrom<RawMarket> for MarketParams {
    type Error = TradingError;
    fn try_from(raw: RawMarket) -> Result<Self, Self::Error> {
        MarketParams::new(raw.eps1, raw.eps2, raw.m_bar, raw.ds_bar)
    }
}

impl From<MarketParams> for RawMarket {
    fn from(m: MarketParams) -> Self {
        RawMarket { eps1: m.eps1, eps2: m.eps2, m_bar: m.m_bar, ds_bar: m.ds_bar }
    }
}

impl MarketParams {
    pub fn new(eps1: f64, eps2: f64, m_bar: f64, ds_bar: f64) -> Result<Self, TradingError> {
        let all_finite = [eps1, eps2, m_bar, ds_bar].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(TradingError::Parameter("market parameters must be finite".into()));
        }
        if eps1 < 0.0 || eps2 <= 0.0 || eps1 + eps2 > 1.0 {
            return Err(TradingError::Parameter(format!(
                "need eps1 >= 0, eps2 > 0, eps1 + eps2 <= 1 (got eps1={eps1}, eps2={eps2})"
            )));
        }
        if m_bar <= 0.0 || ds_bar <= 0.0 {
            return Err(TradingError::Parameter(format!(
                "reference prices must be positive (got m_bar={m_bar}, ds_bar={ds_bar})"
            )));
        }
        Ok(Self { eps1, eps2, m_bar, ds_bar })
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    /// Weight of the bid term, `1 - eps1 - eps2`.
    pub fn eps3(&self) -> f64 {
        1.0 - self.eps1 - self.eps2
    }

    pub fn m_bar(&self) -> f64 {
        self.m_bar
    }

    pub fn ds_bar(&self) -> f64 {
        self.ds_bar
    }
}

/// Provider-private leak-loss model `c(r, V) = alpha (1 - r) + beta V` with
/// data value `V = eta * D_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProvider", into = "RawProvider")]
pub struct ProviderEconomics {
    alpha: f64,
    beta: f64,
    eta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawProvider {
    alpha: f64,
    beta: f64,
    eta: f64,
}

impl TryFrom<RawProvider> for ProviderEconomics {
    type Error = TradingError;
    fn try_from(raw: RawProvider) -> Result<Self, Self::Error> {
        ProviderEconomics::new(raw.alpha, raw.beta, raw.eta)
    }
}

impl From<ProviderEconomics> for RawProvider {
    fn from(p: ProviderEconomics) -> Self {
        RawProvider { alpha: p.alpha, beta: p.beta, eta: p.eta }
    }
}

impl ProviderEconomics {
    /// Fails unless `1 - beta * eta < 0`, the condition under which the
    /// provider's markup rule is a maximiser.
    pub fn new(alpha: f64, beta: f64, eta: f64) -> Result<Self, TradingError> {
        if ![alpha, beta, eta].iter().all(|v| v.is_finite()) {
            return Err(TradingError::Parameter("provider parameters must be finite".into()));
        }
        if alpha < 0.0 || beta < 0.0 || eta <= 0.0 {
            return Err(TradingError::Parameter(format!(
                "need alpha >= 0, beta >= 0, eta > 0 (got alpha={alpha}, beta={beta}, eta={eta})"
            )));
        }
        if 1.0 - beta * eta >= 0.0 {
            return Err(TradingError::EquilibriumInvalid(format!(
                "provider rule needs 1 - beta*eta < 0 (beta={beta}, eta={eta})"
            )));
        }
        Ok(Self { alpha, beta, eta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Expected leakage loss `c(r, V)` at markup `ds`.
    pub fn leak_loss(&self, r: Reputation, ds: f64) -> f64 {
        self.alpha * (1.0 - r.value()) + self.beta * self.eta * ds
    }
}

/// Pool-private economics: legal net profit `q` and the leak-profit model
/// `c~(r, V) = alpha_t (1 - r) + beta_t V`.
///
/// The equilibrium condition `1 - beta_t * eta < 0` depends on the provider's
/// `eta` and is checked where the two are paired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPool", into = "RawPool")]
pub struct PoolEconomics {
    q: f64,
    alpha_t: f64,
    beta_t: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPool {
    q: f64,
    alpha_t: f64,
    beta_t: f64,
}

impl TryFrom<RawPool> for PoolEconomics {
    type Error = TradingError;
    fn try_from(raw: RawPool) -> Result<Self, Self::Error> {
        PoolEconomics::new(raw.q, raw.alpha_t, raw.beta_t)
    }
}

impl From<PoolEconomics> for RawPool {
    fn from(p: PoolEconomics) -> Self {
        RawPool { q: p.q, alpha_t: p.alpha_t, beta_t: p.beta_t }
    }
}

impl PoolEconomics {
    pub fn new(q: f64, alpha_t: f64, beta_t: f64) -> Result<Self, TradingError> {
        if ![q, alpha_t, beta_t].iter().all(|v| v.is_finite()) {
            return Err(TradingError::Parameter("pool parameters must be finite".into()));
        }
        if alpha_t < 0.0 || beta_t < 0.0 {
            return Err(TradingError::Parameter(format!(
                "need alpha_t >= 0, beta_t >= 0 (got alpha_t={alpha_t}, beta_t={beta_t})"
            )));
        }
        Ok(Self { q, alpha_t, beta_t })
    }

    /// Checks the pool-side equilibrium condition against the provider's `eta`.
    pub fn paired_with(&self, provider: &ProviderEconomics) -> Result<(), TradingError> {
        if 1.0 - self.beta_t * provider.eta() >= 0.0 {
            return Err(TradingError::EquilibriumInvalid(format!(
                "pool bid needs 1 - beta_t*eta < 0 (beta_t={}, eta={})",
                self.beta_t,
                provider.eta()
            )));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn alpha_t(&self) -> f64 {
        self.alpha_t
    }

    pub fn beta_t(&self) -> f64 {
        self.beta_t
    }

    pub fn with_q(&self, q: f64) -> Result<Self, TradingError> {
        Self::new(q, self.alpha_t, self.beta_t)
    }

    pub fn with_alpha_t(&self, alpha_t: f64) -> Result<Self, TradingError> {
        Self::new(self.q, alpha_t, self.beta_t)
    }

    pub fn with_beta_t(&self, beta_t: f64) -> Result<Self, TradingError> {
        Self::new(self.q, self.alpha_t, beta_t)
    }

    /// Expected extra profit from leaking, `c~(r, V)`, at markup `ds`.
    pub fn leak_profit(&self, r: Reputation, ds: f64, eta: f64) -> f64 {
        self.alpha_t * (1.0 - r.value()) + self.beta_t * eta * ds
    }
}

/// Pool reputation in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Reputation(f64);

impl Reputation {
    pub fn new(r: f64) -> Result<Self, TradingError> {
        if !(0.0..=1.0).contains(&r) {
            return Err(TradingError::Parameter(format!("reputation {r} outside [0, 1]")));
        }
        Ok(Self(r))
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn saturating(r: f64) -> Self {
        if r.is_nan() {
            Self(0.0)
        } else {
            Self(r.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Reputation {
    type Error = TradingError;
    fn try_from(r: f64) -> Result<Self, Self::Error> {
        Reputation::new(r)
    }
}

impl From<Reputation> for f64 {
    fn from(r: Reputation) -> f64 {
        r.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn market_rejects_zero_eps2_and_overweight() {
        assert!(MarketParams::new(0.4, 0.0, 1.0, 1.0).is_err());
        assert!(MarketParams::new(0.6, 0.5, 1.0, 1.0).is_err());
        assert!(MarketParams::new(0.4, 0.4, 0.0, 1.0).is_err());
        assert!(MarketParams::new(0.4, 0.4, 1.0, 1.0).is_ok());
    }

    #[test]
    fn provider_requires_steep_leak_loss() {
        assert!(matches!(
            ProviderEconomics::new(1.5, 1.0, 0.5),
            Err(TradingError::EquilibriumInvalid(_))
        ));
        assert!(matches!(
            ProviderEconomics::new(1.5, 1.0, 1.0),
            Err(TradingError::EquilibriumInvalid(_))
        ));
        assert!(ProviderEconomics::new(1.5, 1.0, 1.8).is_ok());
    }

    #[test]
    fn pool_pairing_checks_beta_t() {
        let provider = ProviderEconomics::new(5.0, 3.0, 0.5).unwrap();
        let pool = PoolEconomics::new(20.0, 5.0, 1.0).unwrap();
        assert!(matches!(pool.paired_with(&provider), Err(TradingError::EquilibriumInvalid(_))));
        let pool = PoolEconomics::new(20.0, 5.0, 3.0).unwrap();
        assert!(pool.paired_with(&provider).is_ok());
    }

    #[test]
    fn reputation_bounds() {
        assert!(Reputation::new(-0.01).is_err());
        assert!(Reputation::new(1.01).is_err());
        assert_eq!(Reputation::saturating(-3.0).value(), 0.0);
        assert_eq!(Reputation::saturating(f64::NAN).value(), 0.0);
    }

    #[test]
    fn serde_validates() {
        let bad: Result<MarketParams, _> =
            serde_json::from_str(r#"{"eps1":0.9,"eps2":0.4,"m_bar":1.0,"ds_bar":1.0}"#);
        assert!(bad.is_err());
        let ok: MarketParams =
            serde_json::from_str(r#"{"eps1":0.4,"eps2":0.4,"m_bar":1.0,"ds_bar":1.0}"#).unwrap();
        assert_eq!(ok.eps3(), 1.0 - 0.4 - 0.4);
    }
}
