use crate::model::MarketParams;

/// Probability cut-offs splitting users into sellers (low `p`), idle users
/// and buyers (high `p`). Both values are clamped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub p_low: f64,
    pub p_high: f64,
}

impl Thresholds {
    /// A degenerate cut-off at 0 admits nobody: there is no positive margin to sell at.
    pub fn is_seller(&self, p: f64) -> bool {
        self.p_low > 0.0 && p <= self.p_low
    }

    pub fn is_buyer(&self, p: f64) -> bool {
        self.p_high < 1.0 && p >= self.p_high
    }

    /// Share of a uniform-`p` population selling.
    pub fn seller_share(&self) -> f64 {
        self.p_low
    }

    /// Share of a uniform-`p` population buying.
    pub fn buyer_share(&self) -> f64 {
        1.0 - self.p_high
    }
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Trading cut-offs for market members: `(price - theta) / kappa` and `price / kappa`.
pub fn stage3_thresholds(price: f64, params: &MarketParams) -> Thresholds {
    Thresholds {
        p_low: clamp01((price - params.theta) / params.kappa),
        p_high: clamp01(price / params.kappa),
    }
}

/// Cut-offs for outsiders deciding to switch in: the trading margin must
/// also cover the switching cost on mean usage.
pub fn stage2_thresholds(price: f64, params: &MarketParams) -> Thresholds {
    let (a, b) = (params.sell_gap(), params.buy_gap());
    let switch = params.switch_rate() * params.mean_usage();
    Thresholds {
        p_low: clamp01(((price - params.theta) * a - switch) / (params.kappa * a)),
        p_high: clamp01((price * b + switch) / (params.kappa * b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn member_examples() {
        let p = MarketParams::default();
        assert_eq!(
            stage3_thresholds(30.0, &p),
            Thresholds {
                p_low: 0.5,
                p_high: 0.5
            }
        );
        let p12 = p.with_theta(12.0);
        assert_eq!(
            stage3_thresholds(12.0, &p12),
            Thresholds {
                p_low: 0.0,
                p_high: 0.2
            }
        );
        let t = stage3_thresholds(14.0, &p.with_theta(2.0));
        assert_relative_eq!(t.p_low, 0.2);
        assert_relative_eq!(t.p_high, 7.0 / 30.0);
    }

    #[test]
    fn outsider_examples() {
        let p = MarketParams {
            switch_cost_rate: 50.0,
            ..MarketParams::default()
        };
        assert_eq!(stage2_thresholds(35.0, &p).p_low, 0.0);
        let p = MarketParams {
            switch_cost_rate: 6.0,
            ..MarketParams::default()
        };
        assert_relative_eq!(stage2_thresholds(35.0, &p).p_low, 11.0 / 60.0);
    }

    #[test]
    fn classification_guards() {
        let t = Thresholds {
            p_low: 0.0,
            p_high: 1.0,
        };
        assert!(!t.is_seller(0.0));
        assert!(!t.is_buyer(1.0));
        let t = Thresholds {
            p_low: 0.3,
            p_high: 0.6,
        };
        assert!(t.is_seller(0.3) && !t.is_seller(0.31));
        assert!(t.is_buyer(0.6) && !t.is_buyer(0.59));
    }

    proptest! {
        #[test]
        fn collapse_without_switching_cost(price in 0.0..60.0f64, theta in 0.0..60.0f64) {
            let p = MarketParams { switch_cost_rate: 0.0, theta, ..MarketParams::default() };
            let (a, b) = (stage3_thresholds(price, &p), stage2_thresholds(price, &p));
            prop_assert!((a.p_low - b.p_low).abs() < 1e-12);
            prop_assert!((a.p_high - b.p_high).abs() < 1e-12);
        }

        #[test]
        fn ordered(price in 0.0..60.0f64, theta in 0.0..60.0f64, e in 0.0..100.0f64) {
            let p = MarketParams { switch_cost_rate: e, theta, ..MarketParams::default() };
            let (a, b) = (stage3_thresholds(price, &p), stage2_thresholds(price, &p));
            prop_assert!(a.p_low <= a.p_high);
            prop_assert!(b.p_low <= b.p_high);
            prop_assert!(b.p_low <= a.p_low && b.p_high >= a.p_high);
        }
    }
}
