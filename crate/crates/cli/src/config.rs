//! Run configuration files.
//!
//! A configuration is a TOML document with a root `seed` and one optional
//! table per model: `[chain]`, `[sim]`, `[link]` and `[experiment]`. Keys
//! carry their unit in the name (`l0_km`, `tau0_s`, `storage_times_us`);
//! missing keys take the documented defaults and unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//!
//! [chain]
//! mode_count = 12
//! l0_km = 40.0
//! ```

use std::path::Path;

use dlcz_repeater::chain::SimConfig;
use dlcz_repeater::experiment::{ExperimentPlan, VisibilityMethod};
use dlcz_repeater::link::LinkParams;
use dlcz_repeater::rate::ChainParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream of the run.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Whole chain down to the final readout.
    #[default]
    Chain,
    /// One elementary link, interval by interval.
    ElementaryLink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub mode: SimMode,
    /// Chain trials, or attempt intervals in elementary-link mode.
    pub trials: u64,
    /// Abort guard per chain trial.
    pub max_sim_time_s: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            mode: SimMode::Chain,
            trials: 1000,
            max_sim_time_s: 1e4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub storage_times_us: Vec<f64>,
    pub mode_counts: Vec<usize>,
    pub mode_scan_storage_time_us: f64,
    pub trains: u64,
    pub fringe_trains: u64,
    pub fringe_phases: usize,
    pub bootstrap_replicates: u32,
    pub visibility_method: VisibilityMethod,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let plan = ExperimentPlan::default();
        Self {
            storage_times_us: plan.storage_times.iter().map(|t| t * 1e6).collect(),
            mode_counts: plan.mode_counts,
            mode_scan_storage_time_us: plan.mode_scan_storage_time * 1e6,
            trains: plan.trains,
            fringe_trains: plan.fringe_trains,
            fringe_phases: plan.fringe_phases,
            bootstrap_replicates: plan.bootstrap_replicates,
            visibility_method: plan.visibility_method,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    /// The configuration with every table present and defaults spelled out.
    pub fn resolved(&self) -> RunConfig {
        RunConfig {
            seed: self.seed,
            chain: Some(self.chain()),
            sim: Some(self.sim()),
            link: Some(self.link()),
            experiment: Some(self.experiment.clone().unwrap_or_default()),
        }
    }

    pub fn chain(&self) -> ChainParams {
        self.chain.clone().unwrap_or_default()
    }

    pub fn sim(&self) -> SimSection {
        self.sim.clone().unwrap_or_default()
    }

    pub fn link(&self) -> LinkParams {
        self.link.clone().unwrap_or_default()
    }

    pub fn sim_config(&self) -> SimConfig {
        let sim = self.sim();
        SimConfig {
            chain: self.chain(),
            trials: sim.trials,
            seed: self.seed,
            max_sim_time: sim.max_sim_time_s,
        }
    }

    pub fn experiment_plan(&self) -> ExperimentPlan {
        let e = self.experiment.clone().unwrap_or_default();
        ExperimentPlan {
            link: self.link(),
            storage_times: e.storage_times_us.iter().map(|t| t * 1e-6).collect(),
            mode_counts: e.mode_counts,
            mode_scan_storage_time: e.mode_scan_storage_time_us * 1e-6,
            trains: e.trains,
            fringe_trains: e.fringe_trains,
            fringe_phases: e.fringe_phases,
            bootstrap_replicates: e.bootstrap_replicates,
            visibility_method: e.visibility_method,
            seed: self.seed,
        }
    }
}
