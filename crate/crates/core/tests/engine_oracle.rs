mod common;

use common::*;
use dtm::auction::{clear_market, water_fill, BidBook, Units};
use dtm::model::{Bid, Role, UserId, UNITS_PER_GB};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn book() -> impl Strategy<Value = BidBook> {
    let bid = (any::<bool>(), 0..=12i64, 0..=9i64).prop_map(|(sell, price, q)| {
        Bid::new(if sell { Role::Seller } else { Role::Buyer }, price, q)
    });
    prop::collection::vec(bid, 1..10).prop_map(|bids| {
        let entries = bids
            .into_iter()
            .enumerate()
            .map(|(k, b)| (k as UserId, b))
            .collect();
        BidBook::new(entries, 12).unwrap()
    })
}

#[test]
fn oracles_agree_on_the_shared_supply_examples() {
    let r = |n, d| Units::new(n, d);
    assert_eq!(
        sorted_water_fill(&[3, 4, 8], 5),
        vec![r(5, 3), r(5, 3), r(5, 3)]
    );
    assert_eq!(
        sorted_water_fill(&[1, 6, 8], 5),
        vec![r(1, 1), r(2, 1), r(2, 1)]
    );
    let book = dtm::auction::fixtures::shared_supply_book([1, 6, 8]);
    let gb = UNITS_PER_GB as i128;
    assert_eq!(peer_set_oracle(&book, 1), r(gb, 1));
    assert_eq!(peer_set_oracle(&book, 3), r(2 * gb, 1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn water_fill_matches_sorted_oracle(qs in prop::collection::vec(0..50i128, 0..8), supply in 0..200i128) {
        prop_assert_eq!(water_fill(&qs, supply), sorted_water_fill(&qs, supply));
    }

    #[test]
    fn conservation(book in book()) {
        check_conservation(&book, &clear_market(&book)).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn feasibility(book in book()) {
        check_feasibility(&book, &clear_market(&book)).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn price_priority(book in book()) {
        check_priority(&book, &clear_market(&book)).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn price_compatible_and_gap_non_negative(book in book()) {
        check_price_compatibility(&book, &clear_market(&book)).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn permutation_invariance(book in book(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        check_permutation(&book, &clear_market(&book), &mut rng).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn engine_matches_oracles(book in book()) {
        check_oracles(&book, &clear_market(&book)).map_err(TestCaseError::fail)?;
    }
}
