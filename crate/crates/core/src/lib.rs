//! Mobile data trading market: a platform where subscribers of one operator
//! trade unused quota, and the operator decides whether to run the market
//! and what fee to charge sellers.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: user types, bids, parameters and payoffs.
//! * [`auction`]: the clearing engine.
//! * [`equilibrium`]: trading and operator-choice equilibria.
//! * [`operator`]: the operator's profit, optimal fee and deployment test.
//! * [`sim`]: sampled populations, Monte Carlo runs, welfare and sweeps.

pub mod auction;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod operator;
pub mod sim;

pub use error::{Error, Result};

// The book's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/clearing.md")]
    mod clearing {}
    #[doc = include_str!("../../../book/src/equilibrium.md")]
    mod equilibrium {}
    #[doc = include_str!("../../../book/src/operator.md")]
    mod operator {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
