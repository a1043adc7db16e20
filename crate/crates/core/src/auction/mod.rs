//! The trading platform: bid books, peer groups, clearing and transaction prices.

mod book;
mod clear;
pub mod fixtures;
mod probe;
mod sets;

pub use book::BidBook;
pub use clear::{clear_market, water_fill, Allocation, LevelTrade, Units};
pub use probe::{transaction_buying_price, transaction_selling_price};
pub use sets::{partition_sets, PeerSets};
