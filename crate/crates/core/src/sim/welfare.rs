use serde::Serialize;

use crate::equilibrium::{
    clearing_price_closed_form, stage2_thresholds, stage3_thresholds, EquilibriumOutcome,
};
use crate::model::{payoff_non_dtm, satisfaction_loss, MarketParams, UserType};
use crate::operator::total_profit;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Welfare {
    /// Sum of members' per-horizon payoffs.
    pub users: f64,
    /// `users` plus the operator's profit at the same fee.
    pub total: f64,
}

/// Expected member payoffs of a uniform-`p` population at fee `theta`.
pub fn welfare_continuum(theta: f64, params: &MarketParams) -> Welfare {
    let p = params.with_theta(theta);
    let price = clearing_price_closed_form(theta, &p);
    let (inside, outside) = (stage3_thresholds(price, &p), stage2_thresholds(price, &p));
    let (a, b, k) = (p.sell_gap(), p.buy_gap(), p.kappa);
    let (dh, dl) = (p.mean_d_high, p.mean_d_low);
    let e = p.switch_rate();

    let (pl, ph) = (inside.p_low, inside.p_high);
    let members = (price - theta) * a * pl
        - k * (a + b) * pl * pl / 2.0
        - k * b * (ph * ph - pl * pl) / 2.0
        - price * b * (1.0 - ph);

    // Outsiders who switch in pay the switching charge on their own expected usage.
    let (sl, sh) = (outside.p_low, outside.p_high);
    let switch_sellers = (price - theta) * a * sl
        - k * (a + b) * sl * sl / 2.0
        - e * (dl * sl + (dh - dl) * sl * sl / 2.0);
    let switch_buyers =
        -price * b * (1.0 - sh) - e * (dl * (1.0 - sh) + (dh - dl) * (1.0 - sh * sh) / 2.0);

    let n = p.n_users as f64;
    let users = n * (p.alpha * members + (1.0 - p.alpha) * (switch_sellers + switch_buyers));
    Welfare {
        users,
        total: users + total_profit(theta, &p).total,
    }
}

/// User and total welfare of an outcome. Continuum outcomes carry no
/// per-user detail and use the expected payoffs instead.
pub fn welfare(outcome: &EquilibriumOutcome, params: &MarketParams) -> Welfare {
    if outcome.agents.is_empty() {
        return welfare_continuum(outcome.theta, params);
    }
    let users = outcome.members().map(|a| a.payoff).sum::<f64>();
    Welfare {
        users,
        total: users + total_profit(outcome.theta, params).total,
    }
}

/// Payoff difference a current member gets from the market at `price`,
/// trading its full volume in the role its `p` assigns.
pub fn user_gain(user: &UserType, params: &MarketParams, price: f64) -> f64 {
    let th = stage3_thresholds(price, params);
    let loss = |quota: f64| {
        user.p * satisfaction_loss(quota, user.d_high, params.kappa)
            + (1.0 - user.p) * satisfaction_loss(quota, user.d_low, params.kappa)
    };
    let with = if th.is_seller(user.p) {
        let r = user.sell_volume();
        (price - params.theta) * r + loss(user.quota - r)
    } else if th.is_buyer(user.p) {
        let r = user.buy_volume();
        -price * r + loss(user.quota + r)
    } else {
        return 0.0;
    };
    with - payoff_non_dtm(user, params, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{stage2_equilibrium, ContinuumPopulation, PopulationModel};
    use crate::model::Operator;
    use approx::assert_relative_eq;

    fn fig10() -> MarketParams {
        MarketParams {
            alpha: 0.5,
            switch_cost_rate: 50.0,
            ..MarketParams::default()
        }
    }

    #[test]
    fn welfare_falls_with_fee() {
        let p = fig10();
        let mut last = welfare_continuum(0.0, &p);
        for k in 1..=60 {
            let w = welfare_continuum(k as f64, &p);
            assert!(
                w.users <= last.users + 1e-9 && w.total <= last.total + 1e-9,
                "theta {k}"
            );
            last = w;
        }
        assert!(welfare_continuum(0.0, &p).users >= welfare_continuum(30.0, &p).users);
    }

    #[test]
    fn continuum_outcome_uses_expectations() {
        let p = fig10().with_theta(12.0);
        let pop = PopulationModel::Continuum(ContinuumPopulation::from_params(&p));
        let out = stage2_equilibrium(&pop, &p).unwrap();
        assert_eq!(welfare(&out, &p), welfare_continuum(12.0, &p));
    }

    #[test]
    fn no_trade_welfare_is_expected_losses() {
        let p = fig10().with_theta(60.0);
        let users: Vec<UserType> = (0..21)
            .map(|k| UserType::new(k, k as f64 / 20.0, 20.0, 25.0, 15.0, Operator::Dtm).unwrap())
            .collect();
        let out = stage2_equilibrium(&PopulationModel::Finite(users.clone()), &p).unwrap();
        assert!(out.no_trade);
        let losses: f64 = users.iter().map(|u| payoff_non_dtm(u, &p, false)).sum();
        assert_relative_eq!(welfare(&out, &p).users, losses, epsilon = 1e-9);
    }

    #[test]
    fn gain_examples() {
        let p = MarketParams::default().with_theta(12.0);
        let seller = UserType::new(0, 0.0, 20.0, 25.0, 15.0, Operator::Dtm).unwrap();
        assert_relative_eq!(user_gain(&seller, &p, 36.0), (36.0 - 12.0) * 5.0);
        let middle = UserType { p: 0.5, ..seller };
        assert_eq!(user_gain(&middle, &p, 36.0), 0.0);
        let buyer = UserType { p: 0.9, ..seller };
        let bigger = UserType {
            d_high: 30.0,
            ..buyer
        };
        assert!(user_gain(&bigger, &p, 36.0) > user_gain(&buyer, &p, 36.0));
        assert!(user_gain(&buyer, &p, 36.0) > 0.0);
    }
}
