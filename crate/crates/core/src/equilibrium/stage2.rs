use super::solve::{grid_search, settle, solve_price, Trader};
use super::{
    stage2_thresholds, stage3_thresholds, EquilibriumOutcome, OutcomeSummary, PopulationModel,
};
use crate::error::Result;
use crate::model::{MarketParams, Operator, UserType, TOL};

/// Market price once outsiders have sorted themselves:
/// `((D_h - Q) kappa + (Q - D_l) theta) / (D_h - D_l)`.
///
/// The switching cost drops out because the outsiders who switch in to
/// sell and those who switch in to buy shrink by offsetting amounts.
pub fn clearing_price_closed_form(theta: f64, params: &MarketParams) -> f64 {
    let (a, b) = (params.sell_gap(), params.buy_gap());
    (b * params.kappa + a * theta) / (a + b)
}

/// Operator choice of `user` given the price it expects in the market.
/// Current members always stay: trading is optional, so membership never hurts.
pub fn stage2_best_response(user: &UserType, price_guess: f64, params: &MarketParams) -> Operator {
    if user.original == Operator::Dtm {
        return Operator::Dtm;
    }
    let th = stage2_thresholds(price_guess, params);
    if th.is_seller(user.p) || th.is_buyer(user.p) {
        Operator::Dtm
    } else {
        Operator::Other
    }
}

/// Grid price balancing expected supply and demand of a uniform-`p`
/// continuum in which a share `alpha` starts with the market operator.
pub fn continuum_balance_price(params: &MarketParams) -> f64 {
    let (a, b, alpha) = (params.sell_gap(), params.buy_gap(), params.alpha);
    let tick = grid_search(params.max_tick(), |t| {
        let price = params.tick_price(t);
        let (inside, outside) = (
            stage3_thresholds(price, params),
            stage2_thresholds(price, params),
        );
        let supply = alpha * inside.seller_share() + (1.0 - alpha) * outside.seller_share();
        let demand = alpha * inside.buyer_share() + (1.0 - alpha) * outside.buyer_share();
        (supply * a, demand * b)
    });
    params.tick_price(tick)
}

/// Operator-choice equilibrium followed by trading among the resulting members.
///
/// Finite populations are solved on the price grid: current members trade by
/// the member cut-offs, outsiders join only when trading covers their
/// switching cost. Continuum populations use the closed-form price.
pub fn stage2_equilibrium(
    pop: &PopulationModel,
    params: &MarketParams,
) -> Result<EquilibriumOutcome> {
    params.validate()?;
    pop.validate()?;
    match pop {
        PopulationModel::Finite(users) => {
            let traders: Vec<Trader> = users
                .iter()
                .map(|u| Trader::new(u, u.original == Operator::Other))
                .collect();
            let tick = solve_price(&traders, params);
            let price = params.tick_price(tick);
            let mut joined: Vec<(&UserType, bool)> = Vec::new();
            let mut stayed: Vec<&UserType> = Vec::new();
            for u in users {
                match stage2_best_response(u, price, params) {
                    Operator::Dtm => joined.push((u, u.original == Operator::Other)),
                    Operator::Other => stayed.push(u),
                }
            }
            let (agents, summary, no_trade) = settle(&joined, &stayed, tick, params);
            Ok(EquilibriumOutcome {
                clearing_price: price,
                theta: params.theta,
                no_trade,
                agents,
                summary,
            })
        }
        PopulationModel::Continuum(c) => {
            let params = MarketParams {
                mean_quota: c.quota,
                mean_d_high: c.d_high,
                mean_d_low: c.d_low,
                ..params.clone()
            };
            let price = clearing_price_closed_form(params.theta, &params);
            let (inside, outside) = (
                stage3_thresholds(price, &params),
                stage2_thresholds(price, &params),
            );
            let (n, alpha) = (params.n_users as f64, params.alpha);
            let (a, b) = (params.sell_gap(), params.buy_gap());
            let switch_share = outside.seller_share() + outside.buyer_share();
            let sellers =
                n * (alpha * inside.seller_share() + (1.0 - alpha) * outside.seller_share());
            let buyers = n * (alpha * inside.buyer_share() + (1.0 - alpha) * outside.buyer_share());
            let members = n * (alpha + (1.0 - alpha) * switch_share);
            let traded = (sellers * a).min(buyers * b);
            Ok(EquilibriumOutcome {
                clearing_price: price,
                theta: params.theta,
                no_trade: traded <= TOL,
                agents: Vec::new(),
                summary: OutcomeSummary {
                    members,
                    switchers: n * (1.0 - alpha) * switch_share,
                    sellers,
                    buyers,
                    idle: members - sellers - buyers,
                    supply: sellers * a,
                    demand: buyers * b,
                    traded,
                },
            })
        }
    }
}
