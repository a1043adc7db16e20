//! Grid price search and settlement shared by both finite-population solvers.

use super::{stage2_thresholds, stage3_thresholds, AgentOutcome, OutcomeSummary, TradeRole};
use crate::auction::{clear_market, BidBook};
use crate::model::{
    gb_to_units, payoff_dtm, payoff_non_dtm, ratio_to_gb, units_to_gb, Bid, MarketParams, Operator,
    Role, UserType,
};

pub(crate) struct Trader<'a> {
    pub user: &'a UserType,
    /// Decides by the switching-adjusted cut-offs (an outsider considering joining).
    pub outsider: bool,
    sell: i128,
    buy: i128,
}

impl<'a> Trader<'a> {
    pub fn new(user: &'a UserType, outsider: bool) -> Trader<'a> {
        Trader {
            user,
            outsider,
            sell: gb_to_units(user.sell_volume()) as i128,
            buy: gb_to_units(user.buy_volume()) as i128,
        }
    }
}

/// Supply and demand (micro-GB) offered at a grid price.
pub(crate) fn balance(traders: &[Trader], params: &MarketParams, tick: i64) -> (i128, i128) {
    let price = params.tick_price(tick);
    let inside = stage3_thresholds(price, params);
    let outside = stage2_thresholds(price, params);
    let (mut supply, mut demand) = (0, 0);
    for t in traders {
        let th = if t.outsider { &outside } else { &inside };
        if th.is_seller(t.user.p) {
            supply += t.sell;
        } else if th.is_buyer(t.user.p) {
            demand += t.buy;
        }
    }
    (supply, demand)
}

/// Grid price minimising `|supply - demand|`, lowest price on ties.
pub(crate) fn solve_price(traders: &[Trader], params: &MarketParams) -> i64 {
    grid_search(params.max_tick(), |t| {
        let (s, d) = balance(traders, params, t);
        (s as f64, d as f64)
    })
}

/// Bisection for the first tick where supply catches up with demand, then a
/// look at its left neighbour. Supply must be nondecreasing and demand
/// nonincreasing in the price; this is checked on every probed tick.
pub(crate) fn grid_search(max_tick: i64, mut curves: impl FnMut(i64) -> (f64, f64)) -> i64 {
    let mut probed: Vec<(i64, f64, f64)> = Vec::new();
    let mut eval = |t: i64| {
        let (s, d) = curves(t);
        probed.push((t, s, d));
        s - d
    };
    // Demand still ahead at the top of the grid: the top is closest.
    let first = if eval(0) >= 0.0 {
        0
    } else if eval(max_tick) < 0.0 {
        max_tick + 1
    } else {
        let (mut lo, mut hi) = (0, max_tick);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if eval(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let mut best = first.min(max_tick);
    if first > 0 && first <= max_tick {
        let left = eval(first - 1).abs();
        let here = eval(first).abs();
        if left <= here {
            best = first - 1;
        }
    }
    probed.sort_by_key(|p| p.0);
    for w in probed.windows(2) {
        assert!(
            w[1].1 >= w[0].1 && w[1].2 <= w[0].2,
            "supply must rise and demand fall with price (ticks {} and {})",
            w[0].0,
            w[1].0
        );
    }
    best
}

/// Table-2 bids at `tick` for every member, cleared through the engine.
/// Members are `(user, switched_in)`; `outsiders` are users who stayed away.
pub(crate) fn settle(
    members: &[(&UserType, bool)],
    outsiders: &[&UserType],
    tick: i64,
    params: &MarketParams,
) -> (Vec<AgentOutcome>, OutcomeSummary, bool) {
    let th = stage3_thresholds(params.tick_price(tick), params);
    let mut bids: Vec<(UserType, bool, TradeRole, Bid)> = members
        .iter()
        .map(|(u, switched)| {
            if th.is_seller(u.p) {
                (
                    **u,
                    *switched,
                    TradeRole::Seller,
                    Bid::new(Role::Seller, tick, gb_to_units(u.sell_volume())),
                )
            } else if th.is_buyer(u.p) {
                (
                    **u,
                    *switched,
                    TradeRole::Buyer,
                    Bid::new(Role::Buyer, tick, gb_to_units(u.buy_volume())),
                )
            } else {
                (**u, *switched, TradeRole::NoTrade, Bid::NONE)
            }
        })
        .collect();

    let book = BidBook::new(
        bids.iter().map(|(u, _, _, b)| (u.id, *b)).collect(),
        params.max_tick(),
    )
    .expect("table bids are on the grid");
    let mut alloc = clear_market(&book);
    let (mut supply, mut demand) = (0i64, 0i64);
    for (_, _, role, bid) in &bids {
        match role {
            TradeRole::Seller => supply += bid.quantity,
            TradeRole::Buyer => demand += bid.quantity,
            TradeRole::NoTrade => {}
        }
    }
    let no_trade = alloc.traded_volume() == 0;
    if no_trade {
        for entry in bids.iter_mut() {
            entry.2 = TradeRole::NoTrade;
            entry.3 = Bid::NONE;
        }
        alloc = clear_market(&BidBook::empty(params.max_tick()));
    }

    let mut summary = OutcomeSummary {
        supply: units_to_gb(supply),
        demand: units_to_gb(demand),
        traded: units_to_gb(alloc.traded_volume() as i64),
        ..OutcomeSummary::default()
    };
    let mut agents = Vec::with_capacity(members.len() + outsiders.len());
    for (user, switched, role, bid) in &bids {
        let r = alloc
            .transacted
            .get(&user.id)
            .map_or(0.0, ratio_to_gb)
            .min(bid.quantity_gb());
        let payoff =
            payoff_dtm(user, bid, r, params, *switched).expect("allocation respects the bid");
        summary.members += 1.0;
        if *switched {
            summary.switchers += 1.0;
        }
        match role {
            TradeRole::Seller => summary.sellers += 1.0,
            TradeRole::Buyer => summary.buyers += 1.0,
            TradeRole::NoTrade => summary.idle += 1.0,
        }
        agents.push(AgentOutcome {
            id: user.id,
            role: *role,
            bid: *bid,
            transacted: r,
            choice: Operator::Dtm,
            payoff,
        });
    }
    for user in outsiders {
        agents.push(AgentOutcome {
            id: user.id,
            role: TradeRole::NoTrade,
            bid: Bid::NONE,
            transacted: 0.0,
            choice: Operator::Other,
            payoff: payoff_non_dtm(user, params, user.original != Operator::Other),
        });
    }
    agents.sort_by_key(|a| a.id);
    (agents, summary, no_trade)
}
