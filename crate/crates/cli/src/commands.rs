use std::collections::BTreeSet;

use dtm::auction::{
    clear_market, transaction_buying_price, transaction_selling_price, BidBook, Units,
};
use dtm::equilibrium::{
    stage2_equilibrium, stage3_equilibrium, verify_nash, ContinuumPopulation, EquilibriumOutcome,
    Membership, NashCheck, PopulationModel,
};
use dtm::model::{MarketParams, Operator, UNITS_PER_GB};
use dtm::operator::{
    baseline_profit, deployment_threshold, deployment_threshold_formula, fee_grid,
    resolve_optimal_fee, should_deploy, total_profit, write_breakdown_csv, FeeChoice,
};
use dtm::sim::{run_sweep, sample_population};
use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::output::Artifact;
use crate::CliError;

pub struct Report {
    pub artifacts: Vec<Artifact>,
    /// One-line summary for stdout.
    pub message: String,
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn to_toml<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    toml::to_string(value)
        .map(String::into_bytes)
        .map_err(runtime)
}

fn main_file(bytes: Vec<u8>) -> Artifact {
    Artifact { suffix: "", bytes }
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.params.validate()?;
    match command {
        Command::Clear => clear(cfg),
        Command::Stage3 | Command::Stage2 => equilibrium(command, cfg),
        Command::Optimize => optimize(cfg),
        Command::DeployCheck => deploy_check(cfg),
        Command::Sweep => sweep(cfg),
        Command::Verify => verify(cfg),
    }
}

#[derive(Serialize)]
struct ClearSummary {
    traded_gb: f64,
    gap_revenue: f64,
    selling_price: Option<f64>,
    buying_price: Option<f64>,
}

fn clear(cfg: &RunConfig) -> Result<Report, CliError> {
    let path = cfg
        .clear
        .book
        .as_ref()
        .ok_or_else(|| CliError::Config("`clear.book` is required".into()))?;
    let path = cfg.resolve(path);
    let file = std::fs::File::open(&path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let book = BidBook::read_csv(file, &cfg.params)?;
    let alloc = clear_market(&book);

    let per_gb = Units::from_integer(UNITS_PER_GB as i128);
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record([
        "user_id",
        "role",
        "price",
        "quantity",
        "transacted",
        "transacted_exact",
    ])
    .map_err(runtime)?;
    for (id, bid) in book.entries() {
        wtr.write_record([
            id.to_string(),
            bid.role.code().to_string(),
            cfg.params.tick_price(bid.price).to_string(),
            bid.quantity_gb().to_string(),
            alloc.gb(*id).to_string(),
            (alloc.units(*id) / per_gb).to_string(),
        ])
        .map_err(runtime)?;
    }
    let table = wtr.into_inner().map_err(runtime)?;
    let summary = ClearSummary {
        traded_gb: alloc.traded_volume() as f64 / UNITS_PER_GB as f64,
        gap_revenue: alloc.gap_revenue_money(&cfg.params),
        selling_price: transaction_selling_price(&book).map(|t| cfg.params.tick_price(t)),
        buying_price: transaction_buying_price(&book).map(|t| cfg.params.tick_price(t)),
    };
    Ok(Report {
        message: format!(
            "cleared {} bids, {} GB traded",
            book.len(),
            summary.traded_gb
        ),
        artifacts: vec![
            main_file(table),
            Artifact {
                suffix: ".summary.toml",
                bytes: to_toml(&summary)?,
            },
        ],
    })
}

fn population(cfg: &RunConfig) -> Result<Option<PopulationModel>, CliError> {
    match &cfg.population {
        Some(spec) => Ok(Some(PopulationModel::Finite(sample_population(spec)?))),
        None => Ok(None),
    }
}

fn outcome_artifacts(
    outcome: &EquilibriumOutcome,
    params: &MarketParams,
) -> Result<Vec<Artifact>, CliError> {
    let mut artifacts = vec![main_file(outcome.to_record().into_bytes())];
    if !outcome.agents.is_empty() {
        let mut buf = Vec::new();
        outcome
            .write_agents_csv(&mut buf, params)
            .map_err(runtime)?;
        artifacts.push(Artifact {
            suffix: ".agents.csv",
            bytes: buf,
        });
    }
    Ok(artifacts)
}

fn equilibrium(command: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    let params = &cfg.params;
    let pop = population(cfg)?
        .unwrap_or_else(|| PopulationModel::Continuum(ContinuumPopulation::from_params(params)));
    let outcome = if command == Command::Stage3 {
        let members = match &pop {
            PopulationModel::Finite(users) => Membership::Ids(
                users
                    .iter()
                    .filter(|u| u.original == Operator::Dtm)
                    .map(|u| u.id)
                    .collect::<BTreeSet<_>>(),
            ),
            PopulationModel::Continuum(_) => Membership::All,
        };
        stage3_equilibrium(&pop, &members, params)?
    } else {
        stage2_equilibrium(&pop, params)?
    };
    Ok(Report {
        message: format!(
            "clearing price {} with {} members{}",
            outcome.clearing_price,
            outcome.summary.members,
            if outcome.no_trade { ", no trade" } else { "" }
        ),
        artifacts: outcome_artifacts(&outcome, params)?,
    })
}

#[derive(Serialize)]
struct OptimizeSummary {
    #[serde(flatten)]
    choice: FeeChoice,
    baseline: f64,
}

fn optimize(cfg: &RunConfig) -> Result<Report, CliError> {
    let params = &cfg.params;
    let step = cfg.optimize.step.unwrap_or(params.eps);
    if !(step > 0.0) {
        return Err(CliError::Config("`optimize.step` must be positive".into()));
    }
    let choice = resolve_optimal_fee(params)?;
    let rows: Vec<_> = fee_grid(params, step)
        .into_iter()
        .map(|t| total_profit(t, params))
        .collect();
    let mut table = Vec::new();
    write_breakdown_csv(&rows, &mut table).map_err(runtime)?;
    let summary = OptimizeSummary {
        choice,
        baseline: baseline_profit(params),
    };
    Ok(Report {
        message: format!("optimal fee {} with profit {}", choice.theta, choice.profit),
        artifacts: vec![
            main_file(table),
            Artifact {
                suffix: ".summary.toml",
                bytes: to_toml(&summary)?,
            },
        ],
    })
}

#[derive(Serialize)]
struct DeploySummary {
    deploy: bool,
    margin: f64,
    theta: f64,
    threshold: f64,
    threshold_formula: Option<f64>,
}

fn deploy_check(cfg: &RunConfig) -> Result<Report, CliError> {
    let params = &cfg.params;
    let d = should_deploy(params)?;
    let summary = DeploySummary {
        deploy: d.deploy,
        margin: d.margin,
        theta: d.theta,
        threshold: deployment_threshold(params)?,
        threshold_formula: deployment_threshold_formula(params).ok(),
    };
    let verdict = if d.deploy { "deploy" } else { "do not deploy" };
    Ok(Report {
        message: format!(
            "{verdict} (margin {}, threshold {})",
            d.margin, summary.threshold
        ),
        artifacts: vec![main_file(to_toml(&summary)?)],
    })
}

fn sweep(cfg: &RunConfig) -> Result<Report, CliError> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("a [sweep] section is required".into()))?;
    let table = run_sweep(spec)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv).map_err(runtime)?;
    Ok(Report {
        message: format!("{} rows over `{}`", table.rows.len(), table.parameter),
        artifacts: vec![
            main_file(csv),
            Artifact {
                suffix: ".meta.toml",
                bytes: table.meta_toml().into_bytes(),
            },
        ],
    })
}

#[derive(Serialize)]
struct VerifySummary {
    users_checked: usize,
    deviations_tried: usize,
    max_gain: f64,
    bound: f64,
    certified: bool,
    worst_user: Option<u32>,
    worst_role: Option<&'static str>,
    worst_price: Option<f64>,
    worst_quantity: Option<f64>,
}

fn verify(cfg: &RunConfig) -> Result<Report, CliError> {
    let params = &cfg.params;
    let pop = population(cfg)?
        .ok_or_else(|| CliError::Config("verify needs a [population] section".into()))?;
    let outcome = stage2_equilibrium(&pop, params)?;
    let mut check = NashCheck::full(params);
    check.subset = cfg.verify.users.clone();
    let report = verify_nash(&outcome, &pop, params, &check)?;
    let bound = cfg
        .verify
        .bound
        .unwrap_or(params.eps * params.sell_gap().max(params.buy_gap()));
    let worst = report.worst.as_ref();
    let summary = VerifySummary {
        users_checked: report.users_checked,
        deviations_tried: report.deviations_tried,
        max_gain: report.max_gain,
        bound,
        certified: report.certifies(bound),
        worst_user: worst.map(|d| d.user),
        worst_role: worst.map(|d| d.bid.role.code()),
        worst_price: worst.map(|d| params.tick_price(d.bid.price)),
        worst_quantity: worst.map(|d| d.bid.quantity_gb()),
    };
    let verdict = if summary.certified {
        "certified"
    } else {
        "not certified"
    };
    Ok(Report {
        message: format!(
            "{verdict}: max deviation gain {} over {} deviations",
            report.max_gain, report.deviations_tried
        ),
        artifacts: vec![main_file(to_toml(&summary)?)],
    })
}
