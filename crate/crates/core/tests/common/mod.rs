#![allow(dead_code)]

use std::collections::BTreeMap;

use dtm::auction::{clear_market, partition_sets, Allocation, BidBook, Units};
use dtm::model::{Bid, Role, UserId};
use rand::seq::SliceRandom;
use rand::Rng;

/// Share-out by sorting: smallest bids first, each taking the lesser of its
/// size and an equal split of what is left.
pub fn sorted_water_fill(quantities: &[i128], supply: i128) -> Vec<Units> {
    let mut order: Vec<usize> = (0..quantities.len()).collect();
    order.sort_by_key(|&k| quantities[k]);
    let mut out = vec![Units::from_integer(0); quantities.len()];
    let mut left = Units::from_integer(supply.max(0));
    for (served, &k) in order.iter().enumerate() {
        let share = left / Units::from_integer((order.len() - served) as i128);
        let give = share.min(Units::from_integer(quantities[k]));
        out[k] = give;
        left -= give;
    }
    out
}

fn quantity(book: &BidBook, role: Role, keep: impl Fn(i64) -> bool) -> i128 {
    book.entries()
        .iter()
        .filter(|(_, b)| b.role == role && keep(b.price))
        .map(|(_, b)| b.quantity as i128)
        .sum()
}

/// Allocation from cumulative curves: a seller level at `p` can serve the
/// demand at `p` or above left over by cheaper sellers; buyers mirror this.
pub fn curve_oracle(book: &BidBook) -> BTreeMap<UserId, Units> {
    let mut levels: BTreeMap<(Role, i64), Vec<(UserId, i128)>> = BTreeMap::new();
    for (id, bid) in book.entries() {
        levels
            .entry((bid.role, bid.price))
            .or_default()
            .push((*id, bid.quantity as i128));
    }
    let mut out = BTreeMap::new();
    for ((role, p), members) in levels {
        let avail = match role {
            Role::Seller => {
                quantity(book, Role::Buyer, |q| q >= p) - quantity(book, Role::Seller, |q| q < p)
            }
            Role::Buyer => {
                quantity(book, Role::Seller, |q| q <= p) - quantity(book, Role::Buyer, |q| q > p)
            }
        };
        let qs: Vec<i128> = members.iter().map(|m| m.1).collect();
        let total: i128 = qs.iter().sum();
        for ((id, _), r) in members
            .iter()
            .zip(sorted_water_fill(&qs, avail.clamp(0, total)))
        {
            out.insert(*id, r);
        }
    }
    out
}

/// Per-bidder closed form: what is left at the bidder's level after
/// higher-priority bids, minus the bids at the level filled in full, split
/// over the remaining bidders (the focal one included).
pub fn peer_set_oracle(book: &BidBook, id: UserId) -> Units {
    let bid = book.get(id).unwrap();
    if bid.quantity == 0 {
        return Units::from_integer(0);
    }
    let sets = partition_sets(book, id).unwrap();
    let avail = sets.available(book, bid.role).max(0);
    let tiny: i128 = sets
        .eq_tiny
        .iter()
        .map(|j| book.get(*j).unwrap().quantity as i128)
        .sum();
    let rest = (sets.eq.len() + 1 - sets.eq_tiny.len()) as i128;
    Units::new(avail - tiny, rest)
        .min(Units::from_integer(bid.quantity as i128))
        .max(Units::from_integer(0))
}

/// A book of up to `max_bidders` bids on a small grid, zero quantities included.
pub fn random_book<R: Rng>(
    rng: &mut R,
    max_bidders: usize,
    max_tick: i64,
    max_qty: i64,
) -> BidBook {
    let n = rng.random_range(1..=max_bidders);
    let entries = (0..n)
        .map(|k| {
            let role = if rng.random_bool(0.5) {
                Role::Seller
            } else {
                Role::Buyer
            };
            let q = if rng.random_bool(0.1) {
                0
            } else {
                rng.random_range(1..=max_qty)
            };
            (
                k as UserId,
                Bid::new(role, rng.random_range(0..=max_tick), q),
            )
        })
        .collect();
    BidBook::new(entries, max_tick).unwrap()
}

fn sum_role(book: &BidBook, alloc: &Allocation, role: Role) -> Units {
    book.entries()
        .iter()
        .filter(|(_, b)| b.role == role)
        .map(|(id, _)| alloc.units(*id))
        .sum()
}

pub fn check_conservation(book: &BidBook, alloc: &Allocation) -> Result<(), String> {
    let sold = sum_role(book, alloc, Role::Seller);
    let bought = sum_role(book, alloc, Role::Buyer);
    let traded = Units::from_integer(alloc.traded_volume());
    if sold != bought || sold != traded {
        return Err(format!("sold {sold}, bought {bought}, traded {traded}"));
    }
    Ok(())
}

pub fn check_feasibility(book: &BidBook, alloc: &Allocation) -> Result<(), String> {
    for (id, bid) in book.entries() {
        let r = alloc.units(*id);
        if r < Units::from_integer(0) || r > Units::from_integer(bid.quantity as i128) {
            return Err(format!("user {id} gets {r} of {}", bid.quantity));
        }
    }
    Ok(())
}

pub fn check_priority(book: &BidBook, alloc: &Allocation) -> Result<(), String> {
    for (i, a) in book.entries() {
        if alloc.units(*i) == Units::from_integer(0) {
            continue;
        }
        for (j, b) in book.entries() {
            let ahead = match a.role {
                Role::Seller => b.price < a.price,
                Role::Buyer => b.price > a.price,
            };
            if b.role == a.role
                && ahead
                && alloc.units(*j) != Units::from_integer(b.quantity as i128)
            {
                return Err(format!(
                    "user {i} trades while better-priced user {j} is not filled"
                ));
            }
        }
    }
    Ok(())
}

pub fn check_price_compatibility(book: &BidBook, alloc: &Allocation) -> Result<(), String> {
    if let Some(t) = alloc.trades.iter().find(|t| t.sell_price > t.buy_price) {
        return Err(format!(
            "trade at ask {} above bid {}",
            t.sell_price, t.buy_price
        ));
    }
    let unfilled = |role: Role| {
        book.entries()
            .iter()
            .filter(move |(id, b)| {
                b.role == role && alloc.units(*id) < Units::from_integer(b.quantity as i128)
            })
            .map(|(_, b)| b.price)
    };
    if let (Some(ask), Some(bid)) = (unfilled(Role::Seller).min(), unfilled(Role::Buyer).max()) {
        if ask <= bid {
            return Err(format!(
                "unfilled ask {ask} and unfilled bid {bid} could still trade"
            ));
        }
    }
    let payments: Units = book
        .entries()
        .iter()
        .map(|(id, b)| {
            let sign = if b.role == Role::Buyer { 1 } else { -1 };
            alloc.units(*id) * Units::from_integer(sign * b.price as i128)
        })
        .sum();
    if payments != alloc.gap_revenue || alloc.gap_revenue < Units::from_integer(0) {
        return Err(format!(
            "gap revenue {} but payments net {payments}",
            alloc.gap_revenue
        ));
    }
    Ok(())
}

pub fn check_permutation<R: Rng>(
    book: &BidBook,
    alloc: &Allocation,
    rng: &mut R,
) -> Result<(), String> {
    let mut entries = book.entries().to_vec();
    entries.shuffle(rng);
    let shuffled = clear_market(&BidBook::new(entries, book.max_tick()).unwrap());
    if shuffled.transacted != alloc.transacted || shuffled.gap_revenue != alloc.gap_revenue {
        return Err("allocation depends on bid order".into());
    }
    Ok(())
}

pub fn check_oracles(book: &BidBook, alloc: &Allocation) -> Result<(), String> {
    let curve = curve_oracle(book);
    for (id, _) in book.entries() {
        let r = alloc.units(*id);
        if curve[id] != r {
            return Err(format!("user {id}: engine {r}, curve oracle {}", curve[id]));
        }
        let closed = peer_set_oracle(book, *id);
        if closed != r {
            return Err(format!("user {id}: engine {r}, peer-set oracle {closed}"));
        }
    }
    Ok(())
}

/// Every engine invariant on one book.
pub fn check_all<R: Rng>(book: &BidBook, rng: &mut R) -> Result<(), String> {
    let alloc = clear_market(book);
    check_conservation(book, &alloc)?;
    check_feasibility(book, &alloc)?;
    check_priority(book, &alloc)?;
    check_price_compatibility(book, &alloc)?;
    check_permutation(book, &alloc, rng)?;
    check_oracles(book, &alloc)
}
