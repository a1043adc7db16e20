use super::solve::{grid_search, settle, solve_price, Trader};
use super::{stage3_thresholds, EquilibriumOutcome, Membership, OutcomeSummary, PopulationModel};
use crate::auction::{clear_market, transaction_buying_price, transaction_selling_price, BidBook};
use crate::error::{Error, Result};
use crate::model::{gb_to_units, payoff_dtm, Bid, MarketParams, Operator, Role, UserType, TOL};

/// Best bid for `user` against everyone else's bids.
///
/// A user with low enough `p` sells everything above its low demand at the
/// transaction selling price, shading one tick down when the level there is
/// too crowded to fill it. High-`p` users buy their shortfall at the
/// transaction buying price (or one tick up). Everyone else stays out.
/// A partial fill at the transaction price is also considered, since it can
/// beat both the shaded bid and staying out.
pub fn stage3_best_response(
    user: &UserType,
    book_aggregate: &BidBook,
    params: &MarketParams,
) -> Result<Bid> {
    params.validate()?;
    user.validate()?;
    let others = book_aggregate.without(user.id);
    let price = |t: i64| params.tick_price(t);
    let fill = |bid: Bid| -> f64 {
        let book = others
            .with_bid(user.id, bid)
            .expect("candidate bids are on the grid");
        clear_market(&book).gb(user.id)
    };

    let mut candidates: Vec<Bid> = Vec::new();
    if let Some(ts) = transaction_selling_price(&others) {
        let q = gb_to_units(user.sell_volume());
        if user.p <= (price(ts) - params.theta) / params.kappa {
            let at = Bid::new(Role::Seller, ts, q);
            if (fill(at) - at.quantity_gb()).abs() <= TOL {
                candidates.push(at);
            } else {
                if ts > 0 && user.p <= (price(ts - 1) - params.theta) / params.kappa {
                    candidates.push(Bid::new(Role::Seller, ts - 1, q));
                }
                candidates.push(at);
            }
        }
    }
    if let Some(tb) = transaction_buying_price(&others) {
        let q = gb_to_units(user.buy_volume());
        if user.p >= price(tb) / params.kappa {
            let at = Bid::new(Role::Buyer, tb, q);
            if (fill(at) - at.quantity_gb()).abs() <= TOL {
                candidates.push(at);
            } else {
                if tb < params.max_tick() && user.p >= price(tb + 1) / params.kappa {
                    candidates.push(Bid::new(Role::Buyer, tb + 1, q));
                }
                candidates.push(at);
            }
        }
    }

    let mut best = (Bid::NONE, payoff_dtm(user, &Bid::NONE, 0.0, params, false)?);
    for bid in candidates {
        let r = fill(bid).min(bid.quantity_gb());
        let u = payoff_dtm(user, &bid, r, params, false)?;
        if u > best.1 + TOL {
            best = (bid, u);
        }
    }
    Ok(best.0)
}

/// Trading equilibrium among `members` at the operation fee `params.theta`.
///
/// Everyone trades at one price: sellers are members with
/// `p <= (price - theta) / kappa`, buyers those with `p >= price / kappa`,
/// and the price is the grid point where supply and demand are closest.
pub fn stage3_equilibrium(
    pop: &PopulationModel,
    members: &Membership,
    params: &MarketParams,
) -> Result<EquilibriumOutcome> {
    params.validate()?;
    pop.validate()?;
    match pop {
        PopulationModel::Finite(users) => {
            let inside: Vec<&UserType> = users.iter().filter(|u| members.contains(u.id)).collect();
            if inside.is_empty() {
                return Err(Error::Infeasible("no market members".into()));
            }
            let traders: Vec<Trader> = inside.iter().map(|u| Trader::new(u, false)).collect();
            let tick = solve_price(&traders, params);
            let joined: Vec<(&UserType, bool)> = inside
                .iter()
                .map(|u| (*u, u.original == Operator::Other))
                .collect();
            let (agents, summary, no_trade) = settle(&joined, &[], tick, params);
            Ok(EquilibriumOutcome {
                clearing_price: params.tick_price(tick),
                theta: params.theta,
                no_trade,
                agents,
                summary,
            })
        }
        PopulationModel::Continuum(c) => {
            if *members != Membership::All {
                return Err(Error::Infeasible(
                    "a continuum population trades as a whole".into(),
                ));
            }
            let (a, b) = (c.quota - c.d_low, c.d_high - c.quota);
            let tick = grid_search(params.max_tick(), |t| {
                let th = stage3_thresholds(params.tick_price(t), params);
                (th.seller_share() * a, th.buyer_share() * b)
            });
            let price = params.tick_price(tick);
            let th = stage3_thresholds(price, params);
            let n = params.n_users as f64;
            let traded = (th.seller_share() * a).min(th.buyer_share() * b) * n;
            Ok(EquilibriumOutcome {
                clearing_price: price,
                theta: params.theta,
                no_trade: traded <= TOL,
                agents: Vec::new(),
                summary: OutcomeSummary {
                    members: n,
                    switchers: 0.0,
                    sellers: th.seller_share() * n,
                    buyers: th.buyer_share() * n,
                    idle: (th.p_high - th.p_low) * n,
                    supply: th.seller_share() * a * n,
                    demand: th.buyer_share() * b * n,
                    traded,
                },
            })
        }
    }
}
