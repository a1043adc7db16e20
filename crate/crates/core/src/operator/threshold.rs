use serde::Serialize;

use super::{baseline_profit, resolve_optimal_fee};
use crate::error::{Error, Result};
use crate::model::MarketParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Deployment {
    pub deploy: bool,
    /// Best market profit minus the profit without a market.
    pub margin: f64,
    pub theta: f64,
}

/// Deploy iff the market at its best fee beats the baseline.
pub fn should_deploy(params: &MarketParams) -> Result<Deployment> {
    let fee = resolve_optimal_fee(params)?;
    let margin = fee.profit - baseline_profit(params);
    Ok(Deployment {
        deploy: margin > 0.0,
        margin,
        theta: fee.theta,
    })
}

fn gain(alpha: f64, params: &MarketParams) -> Result<f64> {
    let p = MarketParams {
        alpha,
        ..params.clone()
    };
    Ok(should_deploy(&p)?.margin)
}

const SCAN: usize = 400;

/// Market share below which deploying pays: the first `alpha` where the
/// deployment gain turns non-positive. Returns 0 if the market never pays and
/// 1 if it pays for every share.
pub fn deployment_threshold(params: &MarketParams) -> Result<f64> {
    params.validate()?;
    let lowest = 1e-6;
    let mut prev = (lowest, gain(lowest, params)?);
    if prev.1 <= 0.0 {
        return Ok(0.0);
    }
    for k in 1..=SCAN {
        let alpha = k as f64 / SCAN as f64;
        let g = gain(alpha, params)?;
        if g <= 0.0 {
            let (mut lo, mut hi) = (prev.0, alpha);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if gain(mid, params)? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        prev = (alpha, g);
    }
    Ok(1.0)
}

/// Market-share threshold as a closed form in the model parameters, valid
/// with free switching and an interior optimal fee.
pub fn deployment_threshold_formula(params: &MarketParams) -> Result<f64> {
    let (q, dh, dl) = (params.mean_quota, params.mean_d_high, params.mean_d_low);
    let (beta, cb, k) = (params.beta, params.build_cost, params.kappa);
    let num = (dl - q) * (-2.0 * beta + cb * (dh + dl) + 2.0 * k * (q - dh));
    let den = -2.0 * dh * dh * k - 2.0 * beta * dl + cb * dl * dl + 2.0 * beta * q - cb * dl * q
        + 2.0 * k * dl * q
        - 4.0 * k * q * q
        + dh * (cb * dl - 2.0 * k * dl - cb * q + 2.0 * k * q);
    if den.abs() < 1e-12 {
        return Err(Error::Degenerate(
            "market-share threshold denominator vanishes".into(),
        ));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig5(beta: f64) -> MarketParams {
        MarketParams {
            mean_quota: 22.0,
            beta,
            eps: 0.01,
            n_users: 10_000,
            ..MarketParams::default()
        }
    }

    #[test]
    fn threshold_is_a_sign_change() {
        let p = MarketParams {
            switch_cost_rate: 0.0,
            mean_quota: 20.0,
            ..fig5(600.0)
        };
        let t = deployment_threshold(&p).unwrap();
        assert!(t > 0.0 && t < 1.0);
        assert!(gain(t - 1e-3, &p).unwrap() > 0.0);
        assert!(gain(t + 1e-3, &p).unwrap() <= 0.0);
    }

    #[test]
    fn never_profitable() {
        let p = MarketParams {
            build_cost: 1e12,
            ..fig5(500.0)
        };
        assert_eq!(deployment_threshold(&p).unwrap(), 0.0);
        assert!(!should_deploy(&p).unwrap().deploy);
    }

    #[test]
    fn formula_value() {
        let f = deployment_threshold_formula(&fig5(600.0)).unwrap();
        assert!((f - 17_080.0 / 150_160.0).abs() < 1e-12, "{f}");
    }
}
