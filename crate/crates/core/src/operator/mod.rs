//! The operator's side: expected profit from running the market as a
//! function of the operation fee, the best fee, and whether running the
//! market beats not running it.
//!
//! All formulas are expectations over a uniform-`p` population with type
//! means `Q`, `D_h`, `D_l`. Threshold shares are clamped to `[0, 1]`, so the
//! formulas stay valid when the switching cost keeps every outsider away.

mod threshold;

use std::io;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{clearing_price_closed_form, stage2_thresholds, stage3_thresholds};
use crate::error::{Error, Result};
use crate::model::MarketParams;

pub use threshold::{
    deployment_threshold, deployment_threshold_formula, should_deploy, Deployment,
};

/// Equilibrium quantities the profit terms are built from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeeRegime {
    pub price: f64,
    /// Selling share among current members.
    pub sell_share: f64,
    /// `P_H`: members with `p` at or above it buy.
    pub buy_cut: f64,
    /// Selling share among outsiders (they all switch in to sell).
    pub switch_sell_share: f64,
    /// `P_H'`: outsiders with `p` at or above it switch in to buy.
    pub switch_buy_cut: f64,
}

impl FeeRegime {
    pub fn at(theta: f64, params: &MarketParams) -> FeeRegime {
        let p = params.with_theta(theta);
        let price = clearing_price_closed_form(theta, &p);
        let (inside, outside) = (stage3_thresholds(price, &p), stage2_thresholds(price, &p));
        FeeRegime {
            price,
            sell_share: inside.p_low,
            buy_cut: inside.p_high,
            switch_sell_share: outside.p_low,
            switch_buy_cut: outside.p_high,
        }
    }

    /// Share of outsiders who switch in.
    pub fn switch_share(&self) -> f64 {
        self.switch_sell_share + 1.0 - self.switch_buy_cut
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfitBreakdown {
    pub theta: f64,
    /// Subscription revenue net of service cost over all members.
    pub base: f64,
    pub fee_revenue: f64,
    /// Overage charged to sellers.
    pub overage_sellers: f64,
    /// Overage charged to members who do not trade.
    pub overage_no_trade: f64,
    pub build_cost: f64,
    pub total: f64,
}

fn per_user_margin(params: &MarketParams) -> f64 {
    params.beta - params.unit_cost * params.mean_usage()
}

/// Subscription margin `beta - c (D_h + D_l) / 2` times the expected number of members.
pub fn base_profit(theta: f64, params: &MarketParams) -> f64 {
    let r = FeeRegime::at(theta, params);
    let (n, alpha) = (params.n_users as f64, params.alpha);
    per_user_margin(params) * (alpha * n + r.switch_share() * (1.0 - alpha) * n)
}

/// `theta` on every GB sold; sellers offer `Q - D_l` on average.
pub fn fee_revenue(theta: f64, params: &MarketParams) -> f64 {
    let r = FeeRegime::at(theta, params);
    let (n, alpha, a) = (params.n_users as f64, params.alpha, params.sell_gap());
    theta * a * n * (alpha * r.sell_share + (1.0 - alpha) * r.switch_sell_share)
}

/// Overage revenue split into the seller part and the idle-member part.
pub fn overage_revenue(theta: f64, params: &MarketParams) -> (f64, f64) {
    let r = FeeRegime::at(theta, params);
    let (n, alpha, k) = (params.n_users as f64, params.alpha, params.kappa);
    let (a, b) = (params.sell_gap(), params.buy_gap());
    // A seller with type p overruns by D_h - D_l with probability p.
    let sellers = n * k * (a + b) / 2.0
        * (alpha * r.sell_share.powi(2) + (1.0 - alpha) * r.switch_sell_share.powi(2));
    // Idle members (P_L < p < P_H) overrun by D_h - Q with probability p.
    let idle = alpha * n * k * b * (r.buy_cut.powi(2) - r.sell_share.powi(2)) / 2.0;
    (sellers, idle)
}

pub fn total_profit(theta: f64, params: &MarketParams) -> ProfitBreakdown {
    let base = base_profit(theta, params);
    let fee = fee_revenue(theta, params);
    let (sellers, idle) = overage_revenue(theta, params);
    ProfitBreakdown {
        theta,
        base,
        fee_revenue: fee,
        overage_sellers: sellers,
        overage_no_trade: idle,
        build_cost: params.build_cost,
        total: base + fee + sellers + idle - params.build_cost,
    }
}

/// Profit of the same operator without a market: its own subscribers only.
pub fn baseline_profit(params: &MarketParams) -> f64 {
    let (n, alpha) = (params.n_users as f64, params.alpha);
    alpha * n * params.kappa * params.buy_gap() / 2.0
        - alpha * n * params.unit_cost * params.mean_usage()
        + alpha * n * params.beta
}

/// Fee above which no outsider switches in (`kappa` if some always do).
pub fn interior_fee_limit(params: &MarketParams) -> f64 {
    let (a, b) = (params.sell_gap(), params.buy_gap());
    let limit = params.kappa - params.switch_rate() * params.mean_usage() * (a + b) / (a * b);
    limit.clamp(0.0, params.kappa)
}

fn stationary_fee(params: &MarketParams) -> Result<f64> {
    let (a, b) = (params.sell_gap(), params.buy_gap());
    let (k, alpha, s) = (params.kappa, params.alpha, params.mean_usage());
    let e = params.switch_rate();
    let m = per_user_margin(params);
    let den = b * (a * (2.0 - alpha) - b * (1.0 - alpha));
    if den.abs() < 1e-12 {
        return Err(Error::Degenerate("optimal fee denominator vanishes".into()));
    }
    let num = k * b * (a - (1.0 - alpha) * b)
        - (1.0 - alpha) * (a + b) * m
        - (1.0 - alpha) * e * s * (a * a - b * b) / a;
    Ok(num / den)
}

/// Closed-form optimal fee: the stationary point of the profit while some
/// outsiders still switch in, clamped to `[0, kappa]`.
pub fn optimal_fee(params: &MarketParams) -> Result<f64> {
    Ok(stationary_fee(params)?.clamp(0.0, params.kappa))
}

/// Fee grid `0, step, 2 step, ...` up to `kappa` (always included).
pub fn fee_grid(params: &MarketParams, step: f64) -> Vec<f64> {
    let n = (params.kappa / step).floor() as usize;
    let mut grid: Vec<f64> = (0..=n)
        .map(|k| k as f64 * step)
        .filter(|t| *t <= params.kappa)
        .collect();
    if grid
        .last()
        .is_some_and(|t| params.kappa - t > 1e-9 * params.kappa)
    {
        grid.push(params.kappa);
    }
    grid
}

/// Grid argmax of the total profit; ties go to the smaller fee.
pub fn optimal_fee_numeric(params: &MarketParams, grid_step: f64) -> Result<f64> {
    if !(grid_step > 0.0) {
        return Err(Error::InvalidParam {
            name: "grid_step",
            reason: "must be positive".into(),
        });
    }
    let mut best = (0.0, f64::NEG_INFINITY);
    for theta in fee_grid(params, grid_step) {
        let p = total_profit(theta, params).total;
        if p > best.1 {
            best = (theta, p);
        }
    }
    Ok(best.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeeChoice {
    pub theta: f64,
    pub profit: f64,
    /// Closed-form candidate, if its denominator is non-zero.
    pub closed_form: Option<f64>,
    /// Whether the closed form lies where every share is strictly inside (0, 1).
    pub closed_form_interior: bool,
    pub numeric: f64,
}

impl FeeChoice {
    /// Distance between the chosen fee and the closed-form candidate.
    pub fn discrepancy(&self) -> Option<f64> {
        self.closed_form.map(|c| (c - self.theta).abs())
    }
}

/// The profit-maximising fee: the closed form when it is interior and at
/// least as good as the fine-grid argmax, the grid argmax otherwise.
pub fn resolve_optimal_fee(params: &MarketParams) -> Result<FeeChoice> {
    params.validate()?;
    let numeric = optimal_fee_numeric(params, params.kappa / 10_000.0)?;
    let stationary = stationary_fee(params).ok();
    let limit = interior_fee_limit(params);
    let interior = stationary.is_some_and(|t| t >= 0.0 && t < limit);
    let closed_form = stationary.map(|t| t.clamp(0.0, params.kappa));
    let grid_profit = total_profit(numeric, params).total;
    let mut choice = FeeChoice {
        theta: numeric,
        profit: grid_profit,
        closed_form,
        closed_form_interior: interior,
        numeric,
    };
    if let (true, Some(t)) = (interior, closed_form) {
        let p = total_profit(t, params).total;
        if p >= grid_profit {
            choice.theta = t;
            choice.profit = p;
        }
    }
    Ok(choice)
}

/// Writes breakdown rows as CSV (`theta,base,fee_revenue,overage_sellers,
/// overage_no_trade,build_cost,total`).
pub fn write_breakdown_csv<W: io::Write>(rows: &[ProfitBreakdown], writer: W) -> csv::Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig8() -> MarketParams {
        MarketParams {
            switch_cost_rate: 0.0,
            ..MarketParams::default()
        }
    }

    #[test]
    fn base_examples() {
        let p = MarketParams {
            alpha: 0.5,
            ..fig8()
        };
        assert_relative_eq!(base_profit(0.0, &p), 100_000.0);
        let all = MarketParams {
            alpha: 1.0,
            ..p.clone()
        };
        for theta in [0.0, 12.0, 60.0] {
            assert_relative_eq!(base_profit(theta, &all), 100_000.0);
        }
        let closed = MarketParams {
            switch_cost_rate: 60.0,
            ..p
        };
        assert_relative_eq!(base_profit(0.0, &closed), 50_000.0);
    }

    #[test]
    fn fee_examples() {
        let p = MarketParams {
            alpha: 1.0,
            ..fig8()
        };
        assert_eq!(fee_revenue(0.0, &p), 0.0);
        assert_eq!(fee_revenue(60.0, &p), 0.0);
        assert_relative_eq!(fee_revenue(12.0, &p), 24_000.0);
    }

    #[test]
    fn overage_examples() {
        let p = MarketParams {
            alpha: 1.0,
            ..fig8()
        };
        let (sellers, idle) = overage_revenue(0.0, &p);
        assert_eq!(idle, 0.0);
        assert_relative_eq!(sellers, 1000.0 * 30.0f64.powi(2) * 10.0 / 120.0);
        let (sellers, idle) = overage_revenue(12.0, &p);
        assert_relative_eq!(sellers, 48_000.0);
        assert_relative_eq!(idle, 30_000.0, max_relative = 1e-12);
    }

    #[test]
    fn baseline_examples() {
        let p = fig8();
        assert_relative_eq!(baseline_profit(&p), 125_000.0);
        assert_eq!(
            baseline_profit(&MarketParams {
                alpha: 0.0,
                ..p.clone()
            }),
            0.0
        );
        let half = MarketParams {
            alpha: 0.25,
            ..p.clone()
        };
        assert_relative_eq!(baseline_profit(&p), 2.0 * baseline_profit(&half));
    }

    #[test]
    fn full_fee_without_build_cost() {
        let p = MarketParams {
            alpha: 1.0,
            build_cost: 0.0,
            ..fig8()
        };
        let b = total_profit(60.0, &p);
        assert_eq!(b.fee_revenue, 0.0);
        assert_relative_eq!(b.total, b.base + b.overage_sellers + b.overage_no_trade);
    }

    #[test]
    fn stationary_fee_example() {
        assert_relative_eq!(optimal_fee(&fig8()).unwrap(), 10.0, epsilon = 1e-9);
        assert!((optimal_fee_numeric(&fig8(), 0.006).unwrap() - 10.0).abs() <= 0.006);
    }

    #[test]
    fn optimal_fee_clamps() {
        let high_margin = MarketParams {
            beta: 2000.0,
            alpha: 0.1,
            ..fig8()
        };
        assert_eq!(optimal_fee(&high_margin).unwrap(), 0.0);
        let members_only = MarketParams {
            alpha: 1.0,
            ..fig8()
        };
        assert_eq!(optimal_fee(&members_only).unwrap(), 60.0);
    }

    #[test]
    fn degenerate_denominator() {
        // a (2 - alpha) = b (1 - alpha) with alpha = 0 needs b = 2a.
        let p = MarketParams {
            alpha: 0.0,
            mean_quota: 55.0 / 3.0,
            ..fig8()
        };
        assert!(matches!(optimal_fee(&p), Err(Error::Degenerate(_))));
    }

    #[test]
    fn breakdown_csv_columns() {
        let mut out = Vec::new();
        write_breakdown_csv(&[total_profit(0.0, &fig8())], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with(
            "theta,base,fee_revenue,overage_sellers,overage_no_trade,build_cost,total\n"
        ));
    }

    #[test]
    fn resolution_prefers_grid_past_the_kink() {
        let p = MarketParams {
            switch_cost_rate: 50.0,
            mean_quota: 22.0,
            beta: 600.0,
            ..MarketParams::default()
        };
        let choice = resolve_optimal_fee(&p).unwrap();
        assert!(!choice.closed_form_interior);
        assert_eq!(choice.theta, choice.numeric);
    }

    fn arb_params() -> impl Strategy<Value = MarketParams> {
        (
            0.0..1.0f64,
            200.0..800.0f64,
            16.0..24.0f64,
            0.0..10.0f64,
            0.0..40.0f64,
        )
            .prop_map(|(alpha, beta, quota, e, c)| MarketParams {
                alpha,
                beta,
                mean_quota: quota,
                switch_cost_rate: e,
                unit_cost: c,
                ..MarketParams::default()
            })
    }

    proptest! {
        #[test]
        fn decomposition_identity(p in arb_params(), theta in 0.0..60.0f64) {
            let b = total_profit(theta, &p);
            let sum = b.base + b.fee_revenue + b.overage_sellers + b.overage_no_trade - b.build_cost;
            prop_assert!((b.total - sum).abs() <= 1e-9 * b.total.abs().max(1.0));
        }

        #[test]
        fn closed_form_matches_grid_when_interior(
            alpha in 0.2..1.0f64, beta in 350.0..520.0f64, quota in 18.0..22.0f64, e in 0.0..2.0f64,
        ) {
            let p = MarketParams { alpha, beta, mean_quota: quota, switch_cost_rate: e, ..MarketParams::default() };
            let step = p.kappa / 10_000.0;
            if let Ok(t) = stationary_fee(&p) {
                let concave = p.buy_gap() * (1.0 - p.alpha) < p.sell_gap() * (2.0 - p.alpha);
                let limit = interior_fee_limit(&p);
                prop_assume!(concave && t > step && t < limit - step);
                let mut best = (0.0, f64::NEG_INFINITY);
                for theta in fee_grid(&p, step).into_iter().filter(|x| *x <= limit) {
                    let v = total_profit(theta, &p).total;
                    if v > best.1 { best = (theta, v); }
                }
                prop_assert!((best.0 - t).abs() <= step + 1e-9, "grid {} closed {}", best.0, t);
            }
        }
    }
}
