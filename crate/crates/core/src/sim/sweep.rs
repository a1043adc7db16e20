use std::io;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{run_scenario, sample_population, user_gain, welfare_continuum, PopulationSpec};
use crate::equilibrium::{stage2_equilibrium, ContinuumPopulation, PopulationModel};
use crate::error::{invalid, Error, Result};
use crate::model::{MarketParams, Operator, UserType};
use crate::operator::{baseline_profit, deployment_threshold, resolve_optimal_fee, total_profit};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Continuum formulas; one row per grid point.
    #[default]
    Analytic,
    /// Sampled populations run through the market; one row per replication.
    Simulated,
}

impl SweepMode {
    fn name(self) -> &'static str {
        match self {
            SweepMode::Analytic => "analytic",
            SweepMode::Simulated => "simulated",
        }
    }
}

/// How the operator's fee is set at each grid point. Sweeping `theta`
/// itself always uses the grid value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeePolicy {
    #[default]
    Optimal,
    Fixed,
}

/// A single user whose gain from the market is tracked across the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocalUser {
    pub p: f64,
    pub quota: f64,
    pub d_high: f64,
    pub d_low: f64,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Name of a market parameter or a `focal_*` coordinate.
    pub parameter: String,
    pub grid: Vec<f64>,
    pub metrics: Vec<String>,
    #[serde(default)]
    pub mode: SweepMode,
    #[serde(default)]
    pub fee: FeePolicy,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fixed: MarketParams,
    #[serde(default)]
    pub focal: Option<FocalUser>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Theta,
    Price,
    Profit,
    Baseline,
    Gain,
    Base,
    FeeRevenue,
    OverageSellers,
    OverageNoTrade,
    WelfareUsers,
    WelfareTotal,
    Members,
    Switchers,
    Traded,
    UserGain,
    DeploymentThreshold,
    ConservationError,
}

impl FromStr for Metric {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Metric, ()> {
        Ok(match s {
            "theta" => Metric::Theta,
            "price" => Metric::Price,
            "profit" => Metric::Profit,
            "baseline" => Metric::Baseline,
            "gain" => Metric::Gain,
            "base" => Metric::Base,
            "fee_revenue" => Metric::FeeRevenue,
            "overage_sellers" => Metric::OverageSellers,
            "overage_no_trade" => Metric::OverageNoTrade,
            "welfare_users" => Metric::WelfareUsers,
            "welfare_total" => Metric::WelfareTotal,
            "members" => Metric::Members,
            "switchers" => Metric::Switchers,
            "traded" => Metric::Traded,
            "user_gain" => Metric::UserGain,
            "deployment_threshold" => Metric::DeploymentThreshold,
            "conservation_error" => Metric::ConservationError,
            _ => return Err(()),
        })
    }
}

impl Metric {
    fn available(self, mode: SweepMode) -> bool {
        match self {
            Metric::DeploymentThreshold => mode == SweepMode::Analytic,
            Metric::ConservationError => mode == SweepMode::Simulated,
            _ => true,
        }
    }
}

/// Parameter names accepted by `SweepSpec::parameter`.
pub const PARAMETERS: &[&str] = &[
    "kappa",
    "theta",
    "eps",
    "switch_cost_rate",
    "alpha",
    "beta",
    "unit_cost",
    "build_cost",
    "n_users",
    "horizons",
    "mean_quota",
    "mean_d_high",
    "mean_d_low",
    "focal_p",
    "focal_quota",
    "focal_d_high",
    "focal_d_low",
];

fn count(name: &'static str, value: f64) -> Result<u64> {
    if value >= 0.0 && value.fract() == 0.0 {
        Ok(value as u64)
    } else {
        Err(invalid(name, "must be a non-negative integer"))
    }
}

fn apply(
    name: &str,
    value: f64,
    params: &mut MarketParams,
    focal: &mut Option<FocalUser>,
) -> Result<()> {
    let mut focal_field = |f: fn(&mut FocalUser) -> &mut f64| match focal.as_mut() {
        Some(user) => {
            *f(user) = value;
            Ok(())
        }
        None => Err(invalid(
            "focal",
            "sweeping a focal coordinate needs a focal user",
        )),
    };
    match name {
        "kappa" => params.kappa = value,
        "theta" => params.theta = value,
        "eps" => params.eps = value,
        "switch_cost_rate" => params.switch_cost_rate = value,
        "alpha" => params.alpha = value,
        "beta" => params.beta = value,
        "unit_cost" => params.unit_cost = value,
        "build_cost" => params.build_cost = value,
        "n_users" => params.n_users = count("n_users", value)? as usize,
        "horizons" => params.horizons = count("horizons", value)? as u32,
        "mean_quota" => params.mean_quota = value,
        "mean_d_high" => params.mean_d_high = value,
        "mean_d_low" => params.mean_d_low = value,
        "focal_p" => focal_field(|u| &mut u.p)?,
        "focal_quota" => focal_field(|u| &mut u.quota)?,
        "focal_d_high" => focal_field(|u| &mut u.d_high)?,
        "focal_d_low" => focal_field(|u| &mut u.d_low)?,
        other => return Err(Error::UnknownParameter(other.to_string())),
    }
    Ok(())
}

impl SweepSpec {
    /// Checks the spec and resolves metric names.
    pub fn validate(&self) -> Result<Vec<Metric>> {
        if self.grid.is_empty() {
            return Err(invalid("grid", "must not be empty"));
        }
        if self.replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        if !PARAMETERS.contains(&self.parameter.as_str()) {
            return Err(Error::UnknownParameter(self.parameter.clone()));
        }
        let metrics = self
            .metrics
            .iter()
            .map(|m| match m.parse::<Metric>() {
                Ok(metric) if metric.available(self.mode) => Ok(metric),
                _ => Err(Error::UnknownMetric {
                    metric: m.clone(),
                    mode: self.mode.name(),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        if metrics.is_empty() {
            return Err(invalid("metrics", "must not be empty"));
        }
        if metrics.contains(&Metric::UserGain) && self.focal.is_none() {
            return Err(invalid("focal", "the user_gain metric needs a focal user"));
        }
        for &value in &self.grid {
            self.point(value)?;
        }
        Ok(metrics)
    }

    fn point(&self, value: f64) -> Result<(MarketParams, Option<UserType>)> {
        let mut params = self.fixed.clone();
        let mut focal = self.focal;
        apply(&self.parameter, value, &mut params, &mut focal)?;
        params.validate()?;
        let user = focal
            .map(|f| UserType::new(0, f.p, f.quota, f.d_high, f.d_low, Operator::Dtm))
            .transpose()?;
        Ok((params, user))
    }

    fn fee_is_fixed(&self) -> bool {
        self.fee == FeePolicy::Fixed || self.parameter == "theta"
    }

    /// SHA-256 of the spec's canonical TOML form.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("sweep specs serialize");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub grid_index: usize,
    pub replication: usize,
    pub value: f64,
    pub metrics: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepMeta {
    pub seed: u64,
    pub spec_hash: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub parameter: String,
    pub metrics: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub meta: SweepMeta,
}

impl SweepTable {
    /// Values of `metric` in row order.
    pub fn column(&self, metric: &str) -> Option<Vec<f64>> {
        let k = self.metrics.iter().position(|m| m == metric)?;
        Some(self.rows.iter().map(|r| r.metrics[k]).collect())
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = vec![
            "grid_index".to_string(),
            "replication".to_string(),
            self.parameter.clone(),
        ];
        header.extend(self.metrics.iter().cloned());
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                row.grid_index.to_string(),
                row.replication.to_string(),
                row.value.to_string(),
            ];
            rec.extend(row.metrics.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Sidecar record: seed, spec hash and code version.
    pub fn meta_toml(&self) -> String {
        toml::to_string(&self.meta).expect("metadata serializes")
    }
}

/// Seed of task `task` drawn from its own ChaCha stream.
pub fn task_seed(seed: u64, task: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task);
    rng.next_u64()
}

fn analytic_row(spec: &SweepSpec, metrics: &[Metric], value: f64) -> Result<Vec<f64>> {
    let (params, focal) = spec.point(value)?;
    let theta = if spec.fee_is_fixed() {
        params.theta
    } else {
        resolve_optimal_fee(&params)?.theta
    };
    let params = params.with_theta(theta);
    let breakdown = total_profit(theta, &params);
    let baseline = baseline_profit(&params);
    let outcome = stage2_equilibrium(
        &PopulationModel::Continuum(ContinuumPopulation::from_params(&params)),
        &params,
    )?;
    let welfare = welfare_continuum(theta, &params);
    metrics
        .iter()
        .map(|m| {
            Ok(match m {
                Metric::Theta => theta,
                Metric::Price => outcome.clearing_price,
                Metric::Profit => breakdown.total,
                Metric::Baseline => baseline,
                Metric::Gain => breakdown.total - baseline,
                Metric::Base => breakdown.base,
                Metric::FeeRevenue => breakdown.fee_revenue,
                Metric::OverageSellers => breakdown.overage_sellers,
                Metric::OverageNoTrade => breakdown.overage_no_trade,
                Metric::WelfareUsers => welfare.users,
                Metric::WelfareTotal => welfare.total,
                Metric::Members => outcome.summary.members,
                Metric::Switchers => outcome.summary.switchers,
                Metric::Traded => outcome.summary.traded,
                Metric::UserGain => user_gain(
                    focal.as_ref().expect("checked"),
                    &params,
                    outcome.clearing_price,
                ),
                Metric::DeploymentThreshold => deployment_threshold(&params)?,
                Metric::ConservationError => unreachable!("simulated-only metric"),
            })
        })
        .collect()
}

fn simulated_row(spec: &SweepSpec, metrics: &[Metric], value: f64, seed: u64) -> Result<Vec<f64>> {
    let (params, focal) = spec.point(value)?;
    let theta = if spec.fee_is_fixed() {
        params.theta
    } else {
        resolve_optimal_fee(&params)?.theta
    };
    let params = params.with_theta(theta);
    let pop = sample_population(&PopulationSpec::from_params(&params, seed))?;
    let report = run_scenario(&pop, &params)?;
    let p = &report.profit;
    Ok(metrics
        .iter()
        .map(|m| match m {
            Metric::Theta => theta,
            Metric::Price => report.outcome.clearing_price,
            Metric::Profit => p.total,
            Metric::Baseline => report.baseline,
            Metric::Gain => report.gain(),
            Metric::Base => p.base,
            Metric::FeeRevenue => p.fee_revenue,
            Metric::OverageSellers => p.overage_sellers,
            Metric::OverageNoTrade => p.overage_no_trade,
            Metric::WelfareUsers => report.member_payoff,
            Metric::WelfareTotal => report.member_payoff + p.total,
            Metric::Members => report.outcome.summary.members,
            Metric::Switchers => report.outcome.summary.switchers,
            Metric::Traded => report.outcome.summary.traded,
            Metric::UserGain => user_gain(
                focal.as_ref().expect("checked"),
                &params,
                report.outcome.clearing_price,
            ),
            Metric::ConservationError => report.conservation_error,
            Metric::DeploymentThreshold => unreachable!("analytic-only metric"),
        })
        .collect())
}

/// Evaluates every grid point (and replication, when simulating) in
/// parallel. Rows come back in (grid index, replication) order, and each
/// replication draws from its own seed stream, so the table does not
/// depend on the thread count.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    let metrics = spec.validate()?;
    let reps = match spec.mode {
        SweepMode::Analytic => 1,
        SweepMode::Simulated => spec.replications,
    };
    let tasks: Vec<(usize, usize)> = (0..spec.grid.len())
        .flat_map(|g| (0..reps).map(move |r| (g, r)))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&(g, r)| {
            let value = spec.grid[g];
            let values = match spec.mode {
                SweepMode::Analytic => analytic_row(spec, &metrics, value)?,
                SweepMode::Simulated => {
                    let seed = task_seed(spec.seed, (g * reps + r) as u64);
                    simulated_row(spec, &metrics, value, seed)?
                }
            };
            Ok(SweepRow {
                grid_index: g,
                replication: r,
                value,
                metrics: values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        parameter: spec.parameter.clone(),
        metrics: spec.metrics.clone(),
        rows,
        meta: SweepMeta {
            seed: spec.seed,
            spec_hash: spec.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(parameter: &str, grid: Vec<f64>, metrics: &[&str]) -> SweepSpec {
        SweepSpec {
            parameter: parameter.into(),
            grid,
            metrics: metrics.iter().map(|m| m.to_string()).collect(),
            mode: SweepMode::Analytic,
            fee: FeePolicy::Optimal,
            replications: 1,
            seed: 0,
            fixed: MarketParams {
                switch_cost_rate: 0.0,
                ..MarketParams::default()
            },
            focal: None,
        }
    }

    #[test]
    fn unknown_names() {
        let s = spec("gamma", vec![1.0], &["profit"]);
        assert!(matches!(run_sweep(&s), Err(Error::UnknownParameter(p)) if p == "gamma"));
        let s = spec("alpha", vec![0.5], &["profit", "happiness"]);
        assert!(
            matches!(run_sweep(&s), Err(Error::UnknownMetric { metric, .. }) if metric == "happiness")
        );
        let s = spec("alpha", vec![0.5], &["conservation_error"]);
        assert!(matches!(run_sweep(&s), Err(Error::UnknownMetric { .. })));
    }

    #[test]
    fn empty_grid_and_missing_focal() {
        assert!(run_sweep(&spec("alpha", vec![], &["profit"])).is_err());
        assert!(run_sweep(&spec("alpha", vec![0.5], &["user_gain"])).is_err());
        assert!(run_sweep(&spec("focal_p", vec![0.5], &["profit"])).is_err());
    }

    #[test]
    fn analytic_rows_follow_the_grid() {
        let s = spec("alpha", vec![0.2, 0.5, 1.0], &["theta", "gain"]);
        let t = run_sweep(&s).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!((t.rows[1].metrics[0] - 10.0).abs() < 0.01);
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out)
            .unwrap()
            .starts_with("grid_index,replication,alpha,theta,gain\n"));
    }

    #[test]
    fn simulated_sweeps_are_reproducible() {
        let mut s = spec(
            "theta",
            vec![0.0, 12.0],
            &["price", "profit", "conservation_error"],
        );
        s.mode = SweepMode::Simulated;
        s.replications = 3;
        s.seed = 42;
        s.fixed.n_users = 300;
        let a = run_sweep(&s).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_sweep(&s).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 6);
        assert_ne!(a.rows[0].metrics, a.rows[1].metrics);
        assert!(a
            .column("conservation_error")
            .unwrap()
            .iter()
            .all(|e| e.abs() < 1e-6));
        s.seed = 43;
        assert_ne!(run_sweep(&s).unwrap().meta.spec_hash, a.meta.spec_hash);
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let mut s = spec("focal_d_high", vec![26.0, 28.0], &["user_gain"]);
        s.focal = Some(FocalUser {
            p: 0.9,
            quota: 20.0,
            d_high: 25.0,
            d_low: 15.0,
        });
        let text = toml::to_string(&s).unwrap();
        let back: SweepSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, s);
        let gains = run_sweep(&s).unwrap().column("user_gain").unwrap();
        assert!(gains[1] > gains[0]);
    }
}
