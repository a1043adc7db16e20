use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use super::BidBook;
use crate::model::{ratio_to_gb, MarketParams, Role, UserId, UNITS_PER_GB};

pub type Units = Ratio<i128>;

/// Volume matched between one seller price level and one buyer price level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelTrade {
    pub sell_price: i64,
    pub buy_price: i64,
    /// Micro-GB.
    pub volume: i128,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Allocation {
    /// Micro-GB transacted by every bidder in the book (zero if unmatched).
    pub transacted: BTreeMap<UserId, Units>,
    /// Buyer payments minus seller receipts, in tick x micro-GB.
    pub gap_revenue: Units,
    pub trades: Vec<LevelTrade>,
}

impl Allocation {
    pub fn units(&self, id: UserId) -> Units {
        self.transacted
            .get(&id)
            .cloned()
            .unwrap_or_else(Units::zero)
    }

    pub fn gb(&self, id: UserId) -> f64 {
        self.transacted.get(&id).map_or(0.0, ratio_to_gb)
    }

    pub fn gap_revenue_money(&self, params: &MarketParams) -> f64 {
        self.gap_revenue.to_f64().unwrap_or(f64::NAN) * params.eps / UNITS_PER_GB as f64
    }

    pub fn traded_volume(&self) -> i128 {
        self.trades.iter().map(|t| t.volume).sum()
    }
}

struct Level {
    price: i64,
    members: Vec<(UserId, i128)>,
    total: i128,
    matched: i128,
}

fn levels(book: &BidBook, role: Role) -> Vec<Level> {
    let mut by_price: BTreeMap<i64, Vec<(UserId, i128)>> = BTreeMap::new();
    for (id, bid) in book.entries() {
        if bid.role == role && bid.quantity > 0 {
            by_price
                .entry(bid.price)
                .or_default()
                .push((*id, bid.quantity as i128));
        }
    }
    let mut out: Vec<Level> = by_price
        .into_iter()
        .map(|(price, members)| {
            let total = members.iter().map(|m| m.1).sum();
            Level {
                price,
                members,
                total,
                matched: 0,
            }
        })
        .collect();
    if role == Role::Buyer {
        out.reverse();
    }
    out
}

/// Clears a book: best prices are matched first (cheapest sellers against the
/// highest buyers), and each level's matched volume is divided by water-filling.
pub fn clear_market(book: &BidBook) -> Allocation {
    let mut sellers = levels(book, Role::Seller);
    let mut buyers = levels(book, Role::Buyer);

    let mut trades = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < sellers.len() && j < buyers.len() {
        let (s, b) = (&mut sellers[i], &mut buyers[j]);
        if s.price > b.price {
            break;
        }
        let volume = (s.total - s.matched).min(b.total - b.matched);
        s.matched += volume;
        b.matched += volume;
        trades.push(LevelTrade {
            sell_price: s.price,
            buy_price: b.price,
            volume,
        });
        if s.matched == s.total {
            i += 1;
        }
        if b.matched == b.total {
            j += 1;
        }
    }

    let mut transacted: BTreeMap<UserId, Units> = book
        .entries()
        .iter()
        .map(|(id, _)| (*id, Units::zero()))
        .collect();
    let mut gap = Units::zero();
    for (level, sign) in sellers
        .iter()
        .map(|l| (l, -1))
        .chain(buyers.iter().map(|l| (l, 1)))
    {
        if level.matched == 0 {
            continue;
        }
        let quantities: Vec<i128> = level.members.iter().map(|m| m.1).collect();
        for ((id, _), share) in level
            .members
            .iter()
            .zip(water_fill(&quantities, level.matched))
        {
            transacted.insert(*id, share);
        }
        gap += Units::from_integer(sign * level.price as i128 * level.matched);
    }
    Allocation {
        transacted,
        gap_revenue: gap,
        trades,
    }
}

/// Divides `supply` among bids of sizes `quantities`: everyone gets an equal
/// share, bids smaller than the share are capped, and the surplus is shared
/// again among the rest until nothing changes.
pub fn water_fill(quantities: &[i128], supply: i128) -> Vec<Units> {
    let total: i128 = quantities.iter().sum();
    if supply >= total {
        return quantities.iter().map(|&q| Units::from_integer(q)).collect();
    }
    let mut out = vec![Units::zero(); quantities.len()];
    let mut open: Vec<usize> = (0..quantities.len())
        .filter(|&k| quantities[k] > 0)
        .collect();
    let mut left = supply.max(0);
    loop {
        if open.is_empty() {
            break;
        }
        let share = Units::new(left, open.len() as i128);
        let (capped, rest): (Vec<usize>, Vec<usize>) = open
            .iter()
            .partition(|&&k| Units::from_integer(quantities[k]) <= share);
        if capped.is_empty() {
            for k in rest {
                out[k] = share;
            }
            break;
        }
        for &k in &capped {
            out[k] = Units::from_integer(quantities[k]);
            left -= quantities[k];
        }
        open = rest;
    }
    out
}
