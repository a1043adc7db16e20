use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{MarketParams, Operator, UserId, UserType};

/// Tries per user before a type draw is declared hopeless.
const MAX_REJECTIONS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Dist {
    Point { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl Dist {
    pub fn mean(&self) -> f64 {
        match *self {
            Dist::Point { value } => value,
            Dist::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            Dist::Point { value } => (value, value),
            Dist::Uniform { low, high } => (low, high),
        }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        let (lo, hi) = self.support();
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(invalid(name, "support must be a finite interval"));
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Point { value } => value,
            Dist::Uniform { low, high } if low == high => low,
            Dist::Uniform { low, high } => rng.random_range(low..high),
        }
    }
}

fn default_p() -> Dist {
    Dist::Uniform {
        low: 0.0,
        high: 1.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub n_users: usize,
    #[serde(default = "default_p")]
    pub p_dist: Dist,
    pub quota_dist: Dist,
    pub d_high_dist: Dist,
    pub d_low_dist: Dist,
    /// Share of users already with the market operator.
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PopulationSpec {
    /// Uniform `p` and point masses at the parameter means.
    pub fn from_params(params: &MarketParams, seed: u64) -> PopulationSpec {
        PopulationSpec {
            n_users: params.n_users,
            p_dist: default_p(),
            quota_dist: Dist::Point {
                value: params.mean_quota,
            },
            d_high_dist: Dist::Point {
                value: params.mean_d_high,
            },
            d_low_dist: Dist::Point {
                value: params.mean_d_low,
            },
            alpha: params.alpha,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(invalid("n_users", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha", "must lie in [0, 1]"));
        }
        self.p_dist.validate("p_dist")?;
        self.quota_dist.validate("quota_dist")?;
        self.d_high_dist.validate("d_high_dist")?;
        self.d_low_dist.validate("d_low_dist")?;
        let (plo, phi) = self.p_dist.support();
        if plo < 0.0 || phi > 1.0 {
            return Err(invalid("p_dist", "support must lie in [0, 1]"));
        }
        let (llo, _) = self.d_low_dist.support();
        let (_, hhi) = self.d_high_dist.support();
        let (qlo, qhi) = self.quota_dist.support();
        let possible = if qlo == qhi {
            llo < qlo && qlo < hhi
        } else {
            llo.max(qlo) < hhi.min(qhi)
        };
        if !possible || self.d_low_dist.support().1 <= 0.0 {
            return Err(Error::Infeasible(
                "sampled types can never satisfy 0 < d_low < quota < d_high".into(),
            ));
        }
        Ok(())
    }
}

/// Draws `n_users` independent types, redrawing any with `d_low < quota <
/// d_high` violated, then marks exactly `floor(alpha n)` users, chosen
/// uniformly, as current members.
pub fn sample_population(spec: &PopulationSpec) -> Result<Vec<UserType>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut users = Vec::with_capacity(spec.n_users);
    for id in 0..spec.n_users {
        let p = spec.p_dist.sample(&mut rng);
        let mut tries = 0;
        let (quota, d_high, d_low) = loop {
            let q = spec.quota_dist.sample(&mut rng);
            let h = spec.d_high_dist.sample(&mut rng);
            let l = spec.d_low_dist.sample(&mut rng);
            if 0.0 < l && l < q && q < h {
                break (q, h, l);
            }
            tries += 1;
            if tries == MAX_REJECTIONS {
                return Err(Error::Infeasible(
                    "type rejection sampling does not terminate".into(),
                ));
            }
        };
        users.push(UserType::new(
            id as UserId,
            p,
            quota,
            d_high,
            d_low,
            Operator::Other,
        )?);
    }
    let members = (spec.alpha * spec.n_users as f64).floor() as usize;
    for k in index::sample(&mut rng, spec.n_users, members) {
        users[k].original = Operator::Dtm;
    }
    Ok(users)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, seed: u64) -> PopulationSpec {
        PopulationSpec::from_params(
            &MarketParams {
                n_users: n,
                ..MarketParams::default()
            },
            seed,
        )
    }

    #[test]
    fn point_masses_vary_only_in_p() {
        let users = sample_population(&spec(50, 1)).unwrap();
        assert!(users
            .iter()
            .all(|u| u.quota == 20.0 && u.d_high == 25.0 && u.d_low == 15.0));
        assert_eq!(
            users.iter().filter(|u| u.original == Operator::Dtm).count(),
            25
        );
    }

    #[test]
    fn p_mean() {
        let users = sample_population(&spec(10_000, 7)).unwrap();
        let mean = users.iter().map(|u| u.p).sum::<f64>() / users.len() as f64;
        assert!((mean - 0.5).abs() < 0.02);
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            sample_population(&spec(300, 3)).unwrap(),
            sample_population(&spec(300, 3)).unwrap()
        );
        assert_ne!(
            sample_population(&spec(300, 3)).unwrap(),
            sample_population(&spec(300, 4)).unwrap()
        );
    }

    #[test]
    fn member_count_floors() {
        let mut s = spec(7, 0);
        s.alpha = 0.5;
        let users = sample_population(&s).unwrap();
        assert_eq!(
            users.iter().filter(|u| u.original == Operator::Dtm).count(),
            3
        );
    }

    #[test]
    fn spread_types_respect_order() {
        let mut s = spec(2000, 11);
        s.quota_dist = Dist::Uniform {
            low: 14.0,
            high: 26.0,
        };
        s.d_low_dist = Dist::Uniform {
            low: 10.0,
            high: 20.0,
        };
        s.d_high_dist = Dist::Uniform {
            low: 20.0,
            high: 30.0,
        };
        let users = sample_population(&s).unwrap();
        assert!(users
            .iter()
            .all(|u| u.d_low < u.quota && u.quota < u.d_high));
    }

    #[test]
    fn impossible_support() {
        let mut s = spec(10, 0);
        s.d_low_dist = Dist::Uniform {
            low: 20.0,
            high: 30.0,
        };
        assert!(matches!(sample_population(&s), Err(Error::Infeasible(_))));
        let mut s = spec(10, 0);
        s.p_dist = Dist::Uniform {
            low: 0.5,
            high: 1.5,
        };
        assert!(matches!(
            sample_population(&s),
            Err(Error::InvalidParam { .. })
        ));
    }
}
