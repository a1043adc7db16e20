//! Trading equilibria among market members and the operator-choice
//! equilibrium that decides who joins.

mod nash;
mod solve;
mod stage2;
mod stage3;
mod thresholds;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bid, MarketParams, Operator, UserId, UserType};

pub use nash::{verify_nash, Deviation, NashCheck, NashReport, QuantityGrid};
pub use stage2::{
    clearing_price_closed_form, continuum_balance_price, stage2_best_response, stage2_equilibrium,
};
pub use stage3::{stage3_best_response, stage3_equilibrium};
pub use thresholds::{stage2_thresholds, stage3_thresholds, Thresholds};

/// Type means of an infinite population with `p ~ U[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumPopulation {
    pub quota: f64,
    pub d_high: f64,
    pub d_low: f64,
}

impl ContinuumPopulation {
    pub fn from_params(params: &MarketParams) -> ContinuumPopulation {
        ContinuumPopulation {
            quota: params.mean_quota,
            d_high: params.mean_d_high,
            d_low: params.mean_d_low,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PopulationModel {
    Finite(Vec<UserType>),
    Continuum(ContinuumPopulation),
}

impl PopulationModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            PopulationModel::Finite(users) => {
                if users.is_empty() {
                    return Err(Error::Infeasible("finite population is empty".into()));
                }
                let mut ids = BTreeSet::new();
                for u in users {
                    u.validate()?;
                    if !ids.insert(u.id) {
                        return Err(Error::DuplicateUser(u.id));
                    }
                }
                Ok(())
            }
            PopulationModel::Continuum(c) => {
                if 0.0 < c.d_low && c.d_low < c.quota && c.quota < c.d_high {
                    Ok(())
                } else {
                    Err(Error::Infeasible(
                        "continuum means need 0 < d_low < quota < d_high".into(),
                    ))
                }
            }
        }
    }
}

/// Which users take part in a trading round.
#[derive(Clone, Debug, PartialEq)]
pub enum Membership {
    All,
    Ids(BTreeSet<UserId>),
}

impl Membership {
    pub fn contains(&self, id: UserId) -> bool {
        match self {
            Membership::All => true,
            Membership::Ids(ids) => ids.contains(&id),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TradeRole {
    Seller,
    Buyer,
    NoTrade,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentOutcome {
    pub id: UserId,
    pub role: TradeRole,
    pub bid: Bid,
    /// GB actually transacted.
    pub transacted: f64,
    pub choice: Operator,
    /// Per-horizon payoff under the chosen operator.
    pub payoff: f64,
}

/// Head counts and volumes of an outcome. In continuum mode these are
/// expectations scaled by the number of users.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub members: f64,
    pub switchers: f64,
    pub sellers: f64,
    pub buyers: f64,
    pub idle: f64,
    /// GB offered by sellers at the clearing price.
    pub supply: f64,
    /// GB requested by buyers at the clearing price.
    pub demand: f64,
    /// GB that changed hands.
    pub traded: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumOutcome {
    pub clearing_price: f64,
    pub theta: f64,
    pub no_trade: bool,
    /// Per-user detail, sorted by id. Empty in continuum mode.
    pub agents: Vec<AgentOutcome>,
    pub summary: OutcomeSummary,
}

#[derive(Serialize)]
struct OutcomeRecord<'a> {
    clearing_price: f64,
    theta: f64,
    no_trade: bool,
    summary: &'a OutcomeSummary,
}

impl EquilibriumOutcome {
    pub fn agent(&self, id: UserId) -> Option<&AgentOutcome> {
        self.agents
            .binary_search_by_key(&id, |a| a.id)
            .ok()
            .map(|k| &self.agents[k])
    }

    pub fn members(&self) -> impl Iterator<Item = &AgentOutcome> {
        self.agents.iter().filter(|a| a.choice == Operator::Dtm)
    }

    /// Key/value record of price, group counts and volumes.
    pub fn to_record(&self) -> String {
        let rec = OutcomeRecord {
            clearing_price: self.clearing_price,
            theta: self.theta,
            no_trade: self.no_trade,
            summary: &self.summary,
        };
        toml::to_string(&rec).expect("record fields are plain numbers")
    }

    /// Per-user CSV: `user_id,operator,role,price,quantity,transacted,payoff`.
    pub fn write_agents_csv<W: std::io::Write>(
        &self,
        writer: W,
        params: &MarketParams,
    ) -> csv::Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        wtr.write_record([
            "user_id",
            "operator",
            "role",
            "price",
            "quantity",
            "transacted",
            "payoff",
        ])?;
        for a in &self.agents {
            let role = match a.role {
                TradeRole::Seller => "seller",
                TradeRole::Buyer => "buyer",
                TradeRole::NoTrade => "none",
            };
            wtr.write_record([
                a.id.to_string(),
                a.choice.bit().to_string(),
                role.to_string(),
                params.tick_price(a.bid.price).to_string(),
                a.bid.quantity_gb().to_string(),
                a.transacted.to_string(),
                a.payoff.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
