use std::collections::BTreeSet;

use num_rational::Ratio;

use super::BidBook;
use crate::error::{Error, Result};
use crate::model::{Role, UserId};

/// The peer groups that determine one bidder's allocation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PeerSets {
    /// Counterparts served before the focal bidder on its own side
    /// (cheaper sellers; for a buyer, the sellers it can reach).
    pub ls: BTreeSet<UserId>,
    /// Buyers reachable by a seller; for a buyer, the buyers ahead of it.
    pub hb: BTreeSet<UserId>,
    /// Same role and price, focal excluded.
    pub eq: BTreeSet<UserId>,
    /// Members of `eq` with a strictly smaller quantity.
    pub eq_smaller: BTreeSet<UserId>,
    /// Members of `eq_smaller` that are filled completely.
    pub eq_tiny: BTreeSet<UserId>,
}

impl PeerSets {
    /// Volume left for the focal price level once higher-priority bids are
    /// served (may be negative).
    pub fn available(&self, book: &BidBook, role: Role) -> i128 {
        let sum = |ids: &BTreeSet<UserId>| -> i128 {
            ids.iter()
                .map(|id| book.get(*id).map_or(0, |b| b.quantity as i128))
                .sum()
        };
        match role {
            Role::Seller => sum(&self.hb) - sum(&self.ls),
            Role::Buyer => sum(&self.ls) - sum(&self.hb),
        }
    }
}

pub fn partition_sets(book: &BidBook, focal: UserId) -> Result<PeerSets> {
    let me = *book.get(focal).ok_or(Error::UnknownUser(focal))?;
    let mut sets = PeerSets::default();
    for (id, bid) in book.entries() {
        if *id == focal || bid.quantity == 0 {
            continue;
        }
        match (me.role, bid.role) {
            (Role::Seller, Role::Seller) if bid.price < me.price => sets.ls.insert(*id),
            (Role::Seller, Role::Buyer) if bid.price >= me.price => sets.hb.insert(*id),
            (Role::Buyer, Role::Seller) if bid.price <= me.price => sets.ls.insert(*id),
            (Role::Buyer, Role::Buyer) if bid.price > me.price => sets.hb.insert(*id),
            _ => false,
        };
        if bid.role == me.role && bid.price == me.price {
            sets.eq.insert(*id);
            if bid.quantity < me.quantity {
                sets.eq_smaller.insert(*id);
            }
        }
    }

    // j is filled completely iff, with everything smaller than j filled, the
    // equal share of the remainder among the rest of the level covers q_j.
    let avail = sets.available(book, me.role);
    let level = sets.eq.len() as i128 + 1;
    let qty = |id: &UserId| book.get(*id).map_or(0, |b| b.quantity as i128);
    let tiny: BTreeSet<UserId> = sets
        .eq_smaller
        .iter()
        .filter(|j| {
            let qj = qty(j);
            let smaller: Vec<i128> = sets.eq.iter().map(qty).filter(|&q| q < qj).collect();
            let rest = level - smaller.len() as i128;
            let share = Ratio::new(avail - smaller.iter().sum::<i128>(), rest);
            Ratio::from_integer(qj) <= share
        })
        .copied()
        .collect();
    sets.eq_tiny = tiny;
    Ok(sets)
}
