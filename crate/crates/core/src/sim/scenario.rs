use std::collections::BTreeMap;

use serde::Serialize;

use crate::auction::{clear_market, BidBook};
use crate::equilibrium::{stage2_equilibrium, EquilibriumOutcome, PopulationModel, TradeRole};
use crate::error::{Error, Result};
use crate::model::{MarketParams, Operator, UserId, UserType};

/// Operator money over one horizon, bucketed like the analytic breakdown.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EmpiricalProfit {
    /// Subscriptions minus the cost of serving expected usage.
    pub base: f64,
    pub fee_revenue: f64,
    pub overage_sellers: f64,
    pub overage_no_trade: f64,
    /// Overage left to buyers who were not filled in full.
    pub overage_buyers: f64,
    pub gap_revenue: f64,
    pub build_cost: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub outcome: EquilibriumOutcome,
    pub profit: EmpiricalProfit,
    /// Profit from the same population's current members with no market.
    pub baseline: f64,
    pub buyer_payments: f64,
    /// Seller receipts net of the operation fee.
    pub seller_receipts: f64,
    /// Sum of members' per-horizon payoffs.
    pub member_payoff: f64,
    /// Buyer payments minus receipts, fees and gap revenue. Zero up to rounding.
    pub conservation_error: f64,
}

impl ScenarioReport {
    pub fn gain(&self) -> f64 {
        self.profit.total - self.baseline
    }
}

fn expected_overage(user: &UserType, quota: f64, kappa: f64) -> f64 {
    kappa
        * (user.p * (user.d_high - quota).max(0.0) + (1.0 - user.p) * (user.d_low - quota).max(0.0))
}

fn subscription_margin(user: &UserType, params: &MarketParams) -> f64 {
    params.beta - params.unit_cost * user.expected_usage()
}

/// Operator choice, trading and billing for one sampled population.
/// Overage is billed in expectation over the two demand states, against the
/// quota left after trading.
pub fn run_scenario(pop: &[UserType], params: &MarketParams) -> Result<ScenarioReport> {
    let model = PopulationModel::Finite(pop.to_vec());
    let outcome = stage2_equilibrium(&model, params)?;
    let by_id: BTreeMap<UserId, &UserType> = pop.iter().map(|u| (u.id, u)).collect();

    let mut profit = EmpiricalProfit {
        build_cost: params.build_cost,
        ..Default::default()
    };
    let (mut payments, mut receipts, mut member_payoff) = (0.0, 0.0, 0.0);
    let mut bids = Vec::new();
    for a in outcome.members() {
        let user = by_id.get(&a.id).ok_or(Error::UnknownUser(a.id))?;
        member_payoff += a.payoff;
        profit.base += subscription_margin(user, params);
        let price = params.tick_price(a.bid.price);
        match a.role {
            TradeRole::Seller => {
                receipts += (price - params.theta) * a.transacted;
                profit.fee_revenue += params.theta * a.transacted;
                profit.overage_sellers +=
                    expected_overage(user, user.quota - a.transacted, params.kappa);
            }
            TradeRole::Buyer => {
                payments += price * a.transacted;
                profit.overage_buyers +=
                    expected_overage(user, user.quota + a.transacted, params.kappa);
            }
            TradeRole::NoTrade => {
                profit.overage_no_trade += expected_overage(user, user.quota, params.kappa);
            }
        }
        if !a.bid.is_none() {
            bids.push((a.id, a.bid));
        }
    }
    let alloc = clear_market(&BidBook::new(bids, params.max_tick())?);
    profit.gap_revenue = alloc.gap_revenue_money(params);
    profit.total = profit.base
        + profit.fee_revenue
        + profit.overage_sellers
        + profit.overage_no_trade
        + profit.overage_buyers
        + profit.gap_revenue
        - profit.build_cost;

    let baseline = pop
        .iter()
        .filter(|u| u.original == Operator::Dtm)
        .map(|u| subscription_margin(u, params) + expected_overage(u, u.quota, params.kappa))
        .sum();

    Ok(ScenarioReport {
        conservation_error: payments - receipts - profit.fee_revenue - profit.gap_revenue,
        outcome,
        profit,
        baseline,
        buyer_payments: payments,
        seller_receipts: receipts,
        member_payoff,
    })
}
