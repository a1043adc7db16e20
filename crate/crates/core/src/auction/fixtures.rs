//! Small reference books used in tests, examples and the guide.

use super::BidBook;
use crate::model::{Bid, Role, UserId, UNITS_PER_GB};

pub const SELLER_13: UserId = 1;
pub const SELLER_15: UserId = 2;
pub const SELLER_16: UserId = 3;
pub const BUYER_15: UserId = 4;
pub const BUYER_14_SMALL: UserId = 5;
pub const BUYER_14_MID: UserId = 6;
pub const BUYER_14_LARGE: UserId = 7;
pub const BUYER_13: UserId = 8;

fn gb(q: i64) -> i64 {
    q * UNITS_PER_GB
}

/// Supply {10@13, 15@15, 5@16} against demand {5@15, 15@14, 10@13}, with
/// the 15 GB at $14 split over three buyers asking 3, 4 and 8 GB.
/// Prices are whole dollars on a $60 grid.
pub fn figure_book() -> BidBook {
    let s = |p, q| Bid::new(Role::Seller, p, gb(q));
    let b = |p, q| Bid::new(Role::Buyer, p, gb(q));
    BidBook::new(
        vec![
            (SELLER_13, s(13, 10)),
            (SELLER_15, s(15, 15)),
            (SELLER_16, s(16, 5)),
            (BUYER_15, b(15, 5)),
            (BUYER_14_SMALL, b(14, 3)),
            (BUYER_14_MID, b(14, 4)),
            (BUYER_14_LARGE, b(14, 8)),
            (BUYER_13, b(13, 10)),
        ],
        60,
    )
    .expect("fixture is well formed")
}

/// Three buyers at the same price sharing 5 GB from a single cheaper seller.
/// Buyers get ids 1, 2, 3; the seller is id 0.
pub fn shared_supply_book(quantities: [i64; 3]) -> BidBook {
    let mut entries = vec![(0, Bid::new(Role::Seller, 10, gb(5)))];
    for (k, q) in quantities.iter().enumerate() {
        entries.push((k as UserId + 1, Bid::new(Role::Buyer, 14, gb(*q))));
    }
    BidBook::new(entries, 60).expect("fixture is well formed")
}
