//! Sampled populations, Monte Carlo market runs with billing, welfare, and
//! parameter sweeps.

mod population;
mod scenario;
mod sweep;
mod welfare;

pub use population::{sample_population, Dist, PopulationSpec};
pub use scenario::{run_scenario, EmpiricalProfit, ScenarioReport};
pub use sweep::{
    run_sweep, task_seed, FeePolicy, FocalUser, Metric, SweepMeta, SweepMode, SweepRow, SweepSpec,
    SweepTable, PARAMETERS,
};
pub use welfare::{user_gain, welfare, welfare_continuum, Welfare};
