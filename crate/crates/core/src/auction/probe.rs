use num_traits::Zero;

use super::{clear_market, BidBook};
use crate::model::{Bid, Role};

fn probe_fills(book: &BidBook, role: Role, price: i64) -> bool {
    let id = book.fresh_id();
    let probed = book
        .with_bid(id, Bid::new(role, price, 1))
        .expect("probe price is on the grid");
    !clear_market(&probed).units(id).is_zero()
}

/// Transaction selling price, in ticks: the lowest price `pi` such that a
/// seller asking `pi + eps` would sell nothing. Equivalently the highest grid
/// price at which a marginal seller still sells. `None` if a seller cannot
/// sell at any price.
pub fn transaction_selling_price(book: &BidBook) -> Option<i64> {
    // A probe seller trades iff demand at or above its price exceeds cheaper
    // supply, which can only shrink as the price rises.
    if !probe_fills(book, Role::Seller, 0) {
        return None;
    }
    let (mut lo, mut hi) = (0, book.max_tick());
    if probe_fills(book, Role::Seller, hi) {
        return Some(hi);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if probe_fills(book, Role::Seller, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Transaction buying price, in ticks: the highest price `pi` such that a
/// buyer bidding `pi - eps` would buy nothing, i.e. the lowest grid price at
/// which a marginal buyer is served. `None` if no price buys anything.
pub fn transaction_buying_price(book: &BidBook) -> Option<i64> {
    let top = book.max_tick();
    if !probe_fills(book, Role::Buyer, top) {
        return None;
    }
    let (mut lo, mut hi) = (0, top);
    if probe_fills(book, Role::Buyer, lo) {
        return Some(lo);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if probe_fills(book, Role::Buyer, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::fixtures::figure_book;

    fn pair() -> BidBook {
        BidBook::new(
            vec![
                (1, Bid::new(Role::Seller, 10, 5)),
                (2, Bid::new(Role::Buyer, 20, 5)),
            ],
            60,
        )
        .unwrap()
    }

    #[test]
    fn figure_prices() {
        assert_eq!(transaction_selling_price(&figure_book()), Some(14));
        assert_eq!(transaction_buying_price(&figure_book()), Some(14));
    }

    #[test]
    fn single_pair() {
        assert_eq!(transaction_selling_price(&pair()), Some(10));
        assert_eq!(transaction_buying_price(&pair()), Some(20));
    }

    #[test]
    fn one_sided_books() {
        let sellers = BidBook::new(vec![(1, Bid::new(Role::Seller, 10, 5))], 60).unwrap();
        assert_eq!(transaction_selling_price(&sellers), None);
        let buyers = BidBook::new(vec![(1, Bid::new(Role::Buyer, 10, 5))], 60).unwrap();
        assert_eq!(transaction_buying_price(&buyers), None);
    }

    // Linear scan of the literal definitions, to pin the binary search.
    #[test]
    fn matches_definition_scan() {
        for book in [figure_book(), pair()] {
            let top = book.max_tick();
            let sell = (0..=top).find(|&p| p == top || !probe_fills(&book, Role::Seller, p + 1));
            assert_eq!(transaction_selling_price(&book), sell);
            let buy = (0..=top)
                .rev()
                .find(|&p| p == 0 || !probe_fills(&book, Role::Buyer, p - 1));
            assert_eq!(transaction_buying_price(&book), buy);
        }
    }
}
