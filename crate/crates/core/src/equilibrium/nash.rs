use rayon::prelude::*;

use super::{EquilibriumOutcome, PopulationModel};
use crate::auction::{clear_market, BidBook};
use crate::error::{Error, Result};
use crate::model::{gb_to_units, payoff_dtm, Bid, MarketParams, Operator, Role, UserId, UserType};

#[derive(Clone, Debug, PartialEq)]
pub enum QuantityGrid {
    /// `{0, Q_i - d_low, d_high - Q_i}` and the midpoints between them.
    Standard,
    /// The same list of GB values for everyone.
    Fixed(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NashCheck {
    /// Price ticks to try.
    pub price_grid: Vec<i64>,
    pub quantity_grid: QuantityGrid,
    /// Restrict the scan to these users (all members when `None`).
    pub subset: Option<Vec<UserId>>,
}

impl NashCheck {
    /// Every grid price and the standard quantity grid, for every member.
    pub fn full(params: &MarketParams) -> NashCheck {
        NashCheck {
            price_grid: (0..=params.max_tick()).collect(),
            quantity_grid: QuantityGrid::Standard,
            subset: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Deviation {
    pub user: UserId,
    pub bid: Bid,
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NashReport {
    pub users_checked: usize,
    pub deviations_tried: usize,
    /// Largest payoff improvement found (0 if none improves).
    pub max_gain: f64,
    pub worst: Option<Deviation>,
}

impl NashReport {
    /// Whether the profile is an `bound`-Nash equilibrium on the scanned grid.
    pub fn certifies(&self, bound: f64) -> bool {
        self.max_gain <= bound
    }
}

fn quantities(user: &UserType, grid: &QuantityGrid) -> Vec<i64> {
    let mut qs: Vec<i64> = match grid {
        QuantityGrid::Standard => {
            let base = [0.0, user.sell_volume(), user.buy_volume()];
            let mut sorted: Vec<f64> = base.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mids = sorted
                .windows(2)
                .map(|w| (w[0] + w[1]) / 2.0)
                .collect::<Vec<_>>();
            sorted.into_iter().chain(mids).map(gb_to_units).collect()
        }
        QuantityGrid::Fixed(v) => v.iter().map(|&q| gb_to_units(q)).collect(),
    };
    qs.sort_unstable();
    qs.dedup();
    qs
}

/// Tries every unilateral deviation (role x price x quantity) of each member
/// against the outcome's bids and reports the best improvement found.
pub fn verify_nash(
    outcome: &EquilibriumOutcome,
    pop: &PopulationModel,
    params: &MarketParams,
    check: &NashCheck,
) -> Result<NashReport> {
    let PopulationModel::Finite(users) = pop else {
        return Err(Error::Infeasible(
            "deviation checks need a finite population".into(),
        ));
    };
    let members: Vec<_> = outcome.members().collect();
    let book = BidBook::new(
        members.iter().map(|a| (a.id, a.bid)).collect(),
        params.max_tick(),
    )?;
    let base = clear_market(&book);

    let targets: Vec<UserId> = match &check.subset {
        Some(ids) => ids.clone(),
        None => members.iter().map(|a| a.id).collect(),
    };
    let scans: Vec<(usize, Option<Deviation>)> = targets
        .par_iter()
        .map(|&id| -> Result<(usize, Option<Deviation>)> {
            let user = users
                .iter()
                .find(|u| u.id == id)
                .ok_or(Error::UnknownUser(id))?;
            let agent = outcome
                .agent(id)
                .filter(|a| a.choice == Operator::Dtm)
                .ok_or(Error::UnknownUser(id))?;
            let switched = user.original == Operator::Other;
            let now = payoff_dtm(
                user,
                &agent.bid,
                base.gb(id).min(agent.bid.quantity_gb()),
                params,
                switched,
            )?;

            let mut tried = 0;
            let mut best: Option<Deviation> = None;
            for q in quantities(user, &check.quantity_grid) {
                let bids: Vec<Bid> = if q == 0 {
                    vec![Bid::NONE]
                } else {
                    [Role::Seller, Role::Buyer]
                        .iter()
                        .flat_map(|&role| {
                            check.price_grid.iter().map(move |&t| Bid::new(role, t, q))
                        })
                        .collect()
                };
                for bid in bids {
                    tried += 1;
                    let r = clear_market(&book.with_bid(id, bid)?)
                        .gb(id)
                        .min(bid.quantity_gb());
                    let gain = payoff_dtm(user, &bid, r, params, switched)? - now;
                    if best.as_ref().map_or(true, |b| gain > b.gain) {
                        best = Some(Deviation {
                            user: id,
                            bid,
                            gain,
                        });
                    }
                }
            }
            Ok((tried, best))
        })
        .collect::<Result<_>>()?;

    let mut report = NashReport {
        users_checked: scans.len(),
        deviations_tried: 0,
        max_gain: 0.0,
        worst: None,
    };
    for (tried, best) in scans {
        report.deviations_tried += tried;
        if let Some(d) = best {
            if d.gain > report.max_gain {
                report.max_gain = d.gain;
                report.worst = Some(d);
            }
        }
    }
    Ok(report)
}
