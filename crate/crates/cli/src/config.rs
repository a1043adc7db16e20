use std::path::{Path, PathBuf};

use dtm::model::MarketParams;
use dtm::sim::{PopulationSpec, SweepSpec};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Clear a bid book.
    Clear,
    /// Trading equilibrium among current members.
    Stage3,
    /// Operator choice followed by trading.
    Stage2,
    /// Optimal operation fee and the profit breakdown over the fee range.
    Optimize,
    /// Whether running the market pays, and the market-share threshold.
    DeployCheck,
    /// Parameter sweep.
    Sweep,
    /// Unilateral-deviation scan of the trading equilibrium.
    Verify,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClearSection {
    /// Bid book CSV, relative to the config file.
    pub book: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    /// Fee step of the breakdown table (defaults to `eps`).
    pub step: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Largest tolerated deviation gain (defaults to `eps` times the larger mean gap).
    pub bound: Option<f64>,
    /// Only scan these users.
    pub users: Option<Vec<u32>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub params: MarketParams,
    pub population: Option<PopulationSpec>,
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub clear: ClearSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
    #[serde(default)]
    pub verify: VerifySection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Pushes one seed into every seeded section.
    pub fn apply_seed(&mut self, seed: Option<u64>) {
        let Some(seed) = seed.or(self.seed) else {
            return;
        };
        self.seed = Some(seed);
        if let Some(p) = self.population.as_mut() {
            p.seed = seed;
        }
        if let Some(s) = self.sweep.as_mut() {
            s.seed = seed;
        }
    }
}
