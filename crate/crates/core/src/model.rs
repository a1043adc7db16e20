//! User types, bids, market parameters and the per-horizon payoff functions.

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type UserId = u32;

/// Quantities inside the clearing engine are integers in micro-GB.
pub const UNITS_PER_GB: i64 = 1_000_000;

/// Absolute tolerance for real-valued comparisons.
pub const TOL: f64 = 1e-9;

pub fn gb_to_units(gb: f64) -> i64 {
    (gb * UNITS_PER_GB as f64).round() as i64
}

pub fn units_to_gb(units: i64) -> f64 {
    units as f64 / UNITS_PER_GB as f64
}

pub fn ratio_to_gb(units: &Ratio<i128>) -> f64 {
    units.to_f64().unwrap_or(f64::NAN) / UNITS_PER_GB as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    /// Any operator that does not run the trading market (`o_i = 0`).
    Other,
    /// The operator running the trading market (`o_i = 1`).
    Dtm,
}

impl Operator {
    pub fn from_bit(bit: u8) -> Option<Operator> {
        match bit {
            0 => Some(Operator::Other),
            1 => Some(Operator::Dtm),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Operator::Other => 0,
            Operator::Dtm => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserType {
    pub id: UserId,
    /// Probability of the high-demand realization.
    pub p: f64,
    pub quota: f64,
    pub d_high: f64,
    pub d_low: f64,
    pub original: Operator,
}

impl UserType {
    pub fn new(
        id: UserId,
        p: f64,
        quota: f64,
        d_high: f64,
        d_low: f64,
        original: Operator,
    ) -> Result<UserType> {
        let user = UserType {
            id,
            p,
            quota,
            d_high,
            d_low,
            original,
        };
        user.validate()?;
        Ok(user)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidUser {
                id: self.id,
                reason: reason.into(),
            })
        };
        if !(0.0..=1.0).contains(&self.p) {
            return bad("p must lie in [0, 1]");
        }
        if !(self.d_low.is_finite() && self.quota.is_finite() && self.d_high.is_finite()) {
            return bad("demands and quota must be finite");
        }
        if !(0.0 < self.d_low && self.d_low < self.quota && self.quota < self.d_high) {
            return bad("requires 0 < d_low < quota < d_high");
        }
        Ok(())
    }

    /// Quantity a seller offers: everything above the low demand.
    pub fn sell_volume(&self) -> f64 {
        self.quota - self.d_low
    }

    /// Quantity a buyer asks for: the shortfall under high demand.
    pub fn buy_volume(&self) -> f64 {
        self.d_high - self.quota
    }

    pub fn expected_usage(&self) -> f64 {
        self.p * self.d_high + (1.0 - self.p) * self.d_low
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "s")]
    Seller,
    #[serde(rename = "b")]
    Buyer,
}

impl Role {
    pub fn code(self) -> &'static str {
        match self {
            Role::Seller => "s",
            Role::Buyer => "b",
        }
    }
}

/// A trading decision. Price is in ticks of `eps`, quantity in micro-GB.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bid {
    pub role: Role,
    pub price: i64,
    pub quantity: i64,
}

impl Bid {
    /// Non-participation. `(b, 0, 0)` is treated identically by the engine.
    pub const NONE: Bid = Bid {
        role: Role::Seller,
        price: 0,
        quantity: 0,
    };

    pub fn new(role: Role, price: i64, quantity: i64) -> Bid {
        Bid {
            role,
            price,
            quantity,
        }
    }

    pub fn is_none(&self) -> bool {
        self.quantity == 0
    }

    pub fn quantity_gb(&self) -> f64 {
        units_to_gb(self.quantity)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchingBasis {
    /// `e` times expected usage is charged in every trading horizon.
    #[default]
    PerHorizon,
    /// The same charge is spread over the `T` horizons of a subscription.
    PerSubscription,
}

fn default_horizons() -> u32 {
    12
}

/// Unlisted fields take their [`Default`] values when deserialized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketParams {
    /// Overage usage fee per GB.
    pub kappa: f64,
    /// Operation fee per GB sold.
    pub theta: f64,
    /// Price grid step.
    pub eps: f64,
    pub switch_cost_rate: f64,
    #[serde(default)]
    pub switching_basis: SwitchingBasis,
    /// Initial market share of the trading-market operator.
    pub alpha: f64,
    /// Subscription revenue per user and horizon.
    pub beta: f64,
    pub unit_cost: f64,
    pub build_cost: f64,
    pub n_users: usize,
    #[serde(default = "default_horizons")]
    pub horizons: u32,
    pub mean_quota: f64,
    pub mean_d_high: f64,
    pub mean_d_low: f64,
}

impl Default for MarketParams {
    fn default() -> Self {
        MarketParams {
            kappa: 60.0,
            theta: 0.0,
            eps: 1.0,
            switch_cost_rate: 50.0,
            switching_basis: SwitchingBasis::PerHorizon,
            alpha: 0.5,
            beta: 500.0,
            unit_cost: 20.0,
            build_cost: 100.0,
            n_users: 1000,
            horizons: 12,
            mean_quota: 20.0,
            mean_d_high: 25.0,
            mean_d_low: 15.0,
        }
    }
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.kappa,
            self.theta,
            self.eps,
            self.switch_cost_rate,
            self.alpha,
            self.beta,
            self.unit_cost,
            self.build_cost,
            self.mean_quota,
            self.mean_d_high,
            self.mean_d_low,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(invalid("params", "all numeric fields must be finite"));
        }
        if self.kappa <= 0.0 {
            return Err(invalid("kappa", "must be positive"));
        }
        if self.eps <= 0.0 {
            return Err(invalid("eps", "must be positive"));
        }
        let steps = self.kappa / self.eps;
        if (steps - steps.round()).abs() > 1e-6 || steps.round() > 1e9 {
            return Err(invalid("eps", "kappa must be an integer multiple of eps"));
        }
        if !(0.0..=self.kappa).contains(&self.theta) {
            return Err(invalid("theta", "must lie in [0, kappa]"));
        }
        if self.switch_cost_rate < 0.0 {
            return Err(invalid("switch_cost_rate", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha", "must lie in [0, 1]"));
        }
        if self.unit_cost < 0.0 || self.build_cost < 0.0 {
            return Err(invalid("unit_cost", "costs must be non-negative"));
        }
        if self.n_users == 0 {
            return Err(invalid("n_users", "must be at least 1"));
        }
        if self.horizons == 0 {
            return Err(invalid("horizons", "must be at least 1"));
        }
        if !(0.0 < self.mean_d_low
            && self.mean_d_low < self.mean_quota
            && self.mean_quota < self.mean_d_high)
        {
            return Err(Error::Infeasible(
                "mean demands need 0 < mean_d_low < mean_quota < mean_d_high".into(),
            ));
        }
        Ok(())
    }

    pub fn with_theta(&self, theta: f64) -> MarketParams {
        MarketParams {
            theta,
            ..self.clone()
        }
    }

    /// `Q - D_l`: mean quantity a seller offers.
    pub fn sell_gap(&self) -> f64 {
        self.mean_quota - self.mean_d_low
    }

    /// `D_h - Q`: mean quantity a buyer asks for.
    pub fn buy_gap(&self) -> f64 {
        self.mean_d_high - self.mean_quota
    }

    /// `(D_h + D_l) / 2`.
    pub fn mean_usage(&self) -> f64 {
        (self.mean_d_high + self.mean_d_low) / 2.0
    }

    /// Switching cost rate charged in one trading horizon.
    pub fn switch_rate(&self) -> f64 {
        match self.switching_basis {
            SwitchingBasis::PerHorizon => self.switch_cost_rate,
            SwitchingBasis::PerSubscription => self.switch_cost_rate / self.horizons as f64,
        }
    }

    pub fn max_tick(&self) -> i64 {
        (self.kappa / self.eps).round() as i64
    }

    pub fn tick_price(&self, tick: i64) -> f64 {
        tick as f64 * self.eps
    }

    /// Grid tick for a price, if the price sits on the grid.
    pub fn price_tick(&self, price: f64) -> Option<i64> {
        let t = (price / self.eps).round();
        let scale = price.abs().max(1.0);
        if (t * self.eps - price).abs() <= 1e-9 * scale {
            Some(t as i64)
        } else {
            None
        }
    }
}

/// `L(Q_i - d_i)`: minus `kappa` per GB of demand above the remaining quota.
pub fn satisfaction_loss(quota_remaining: f64, demand: f64, kappa: f64) -> f64 {
    -kappa * (demand - quota_remaining).max(0.0)
}

pub fn switching_cost(user: &UserType, choice: Operator, rate: f64) -> f64 {
    if choice == user.original {
        0.0
    } else {
        rate * user.expected_usage()
    }
}

fn expected_loss(user: &UserType, quota: f64, kappa: f64) -> f64 {
    user.p * satisfaction_loss(quota, user.d_high, kappa)
        + (1.0 - user.p) * satisfaction_loss(quota, user.d_low, kappa)
}

/// Per-horizon payoff of a market member after trading `transacted` GB.
pub fn payoff_dtm(
    user: &UserType,
    bid: &Bid,
    transacted: f64,
    params: &MarketParams,
    switched: bool,
) -> Result<f64> {
    if transacted < -TOL || transacted > bid.quantity_gb() + TOL {
        return Err(Error::MalformedBid {
            user: user.id,
            reason: format!("transacted {transacted} outside [0, {}]", bid.quantity_gb()),
        });
    }
    let r = transacted.max(0.0);
    let price = params.tick_price(bid.price);
    let switch = if switched {
        params.switch_rate() * user.expected_usage()
    } else {
        0.0
    };
    let trade = match bid.role {
        Role::Seller => {
            (price - params.theta) * r + expected_loss(user, user.quota - r, params.kappa)
        }
        Role::Buyer => -price * r + expected_loss(user, user.quota + r, params.kappa),
    };
    Ok(trade - switch)
}

/// Per-horizon payoff outside the market.
pub fn payoff_non_dtm(user: &UserType, params: &MarketParams, switched: bool) -> f64 {
    let switch = if switched {
        params.switch_rate() * user.expected_usage()
    } else {
        0.0
    };
    expected_loss(user, user.quota, params.kappa) - switch
}

/// Payoff over a whole subscription horizon. `trading_payoff` is the
/// per-horizon member payoff and is required only when `choice` is the market.
pub fn stage2_payoff(
    user: &UserType,
    choice: Operator,
    trading_payoff: Option<f64>,
    params: &MarketParams,
) -> Result<f64> {
    let per_horizon = match (choice, trading_payoff) {
        (Operator::Dtm, Some(u)) => u,
        (Operator::Dtm, None) => {
            return Err(invalid(
                "trading_payoff",
                "required when choosing the market",
            ));
        }
        (Operator::Other, Some(_)) => {
            return Err(invalid(
                "trading_payoff",
                "only meaningful when choosing the market",
            ));
        }
        (Operator::Other, None) => payoff_non_dtm(user, params, user.original != Operator::Other),
    };
    Ok(params.horizons as f64 * per_horizon)
}
