use std::collections::BTreeSet;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{gb_to_units, units_to_gb, Bid, MarketParams, Role, UserId, UNITS_PER_GB};

/// All bids submitted in one trading horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct BidBook {
    entries: Vec<(UserId, Bid)>,
    max_tick: i64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    user_id: UserId,
    role: Role,
    price: f64,
    quantity: f64,
}

impl BidBook {
    /// Validates unique ids, non-negative quantities and prices on `[0, max_tick]`.
    pub fn new(entries: Vec<(UserId, Bid)>, max_tick: i64) -> Result<BidBook> {
        let mut seen = BTreeSet::new();
        for (id, bid) in &entries {
            if !seen.insert(*id) {
                return Err(Error::DuplicateUser(*id));
            }
            check_bid(*id, bid, max_tick)?;
        }
        Ok(BidBook { entries, max_tick })
    }

    pub fn empty(max_tick: i64) -> BidBook {
        BidBook {
            entries: Vec::new(),
            max_tick,
        }
    }

    pub fn entries(&self) -> &[(UserId, Bid)] {
        &self.entries
    }

    pub fn max_tick(&self) -> i64 {
        self.max_tick
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: UserId) -> Option<&Bid> {
        self.entries.iter().find(|(u, _)| *u == id).map(|(_, b)| b)
    }

    /// The book with `id`'s bid removed (if present).
    pub fn without(&self, id: UserId) -> BidBook {
        let entries = self
            .entries
            .iter()
            .filter(|(u, _)| *u != id)
            .copied()
            .collect();
        BidBook {
            entries,
            max_tick: self.max_tick,
        }
    }

    /// The book with `id`'s bid replaced, or appended if `id` is new.
    pub fn with_bid(&self, id: UserId, bid: Bid) -> Result<BidBook> {
        check_bid(id, &bid, self.max_tick)?;
        let mut entries = self.entries.clone();
        match entries.iter_mut().find(|(u, _)| *u == id) {
            Some(slot) => slot.1 = bid,
            None => entries.push((id, bid)),
        }
        Ok(BidBook {
            entries,
            max_tick: self.max_tick,
        })
    }

    /// An id not used by any entry.
    pub fn fresh_id(&self) -> UserId {
        self.entries
            .iter()
            .map(|(u, _)| *u)
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Reads `user_id,role,price,quantity` rows (with header). Prices are in
    /// money per GB and must sit on the `eps` grid; quantities in GB.
    pub fn read_csv<R: io::Read>(reader: R, params: &MarketParams) -> Result<BidBook> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut entries = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::Parse {
                line,
                reason: e.to_string(),
            })?;
            if !(row.quantity >= 0.0 && row.quantity.is_finite()) {
                return Err(Error::MalformedBid {
                    user: row.user_id,
                    reason: format!("quantity {} must be a non-negative number", row.quantity),
                });
            }
            let price = params
                .price_tick(row.price)
                .ok_or_else(|| Error::MalformedBid {
                    user: row.user_id,
                    reason: format!("price {} is not on the {} grid", row.price, params.eps),
                })?;
            let quantity = gb_to_units(row.quantity);
            if (units_to_gb(quantity) - row.quantity).abs() > 1e-9 * row.quantity.max(1.0) {
                return Err(Error::MalformedBid {
                    user: row.user_id,
                    reason: format!("quantity finer than 1/{UNITS_PER_GB} GB"),
                });
            }
            entries.push((row.user_id, Bid::new(row.role, price, quantity)));
        }
        BidBook::new(entries, params.max_tick())
    }

    pub fn write_csv<W: io::Write>(&self, writer: W, params: &MarketParams) -> csv::Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for (id, bid) in &self.entries {
            wtr.serialize(Row {
                user_id: *id,
                role: bid.role,
                price: params.tick_price(bid.price),
                quantity: bid.quantity_gb(),
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_bid(id: UserId, bid: &Bid, max_tick: i64) -> Result<()> {
    if bid.quantity < 0 {
        return Err(Error::MalformedBid {
            user: id,
            reason: "negative quantity".into(),
        });
    }
    if bid.price < 0 || bid.price > max_tick {
        return Err(Error::MalformedBid {
            user: id,
            reason: format!("price tick {} outside [0, {max_tick}]", bid.price),
        });
    }
    Ok(())
}
