//! TOML experiment configuration.
//!
//! One file holds the network, scenario, policy bounds and initial guess,
//! synthetic-history parameters and optimizer settings:
//!
//! ```toml
//! [scenario]
//! horizon = 360
//! replications = 20
//! choice = "backorder"
//!
//! [[facility]]
//! id = 1
//! upstream = "source"
//! base_lead_time = 3
//! target_beta = 0.95
//! serves_customers = true
//! initial_policy = { reorder_point = 1000, base_stock = 3000 }
//! bounds = { reorder_point = [0, 6000], base_stock = [0, 6000] }
//! demand = { mean = 60.0, spread = 18.0 }
//! lead_delta = { mean = 1.0, spread = 1.0 }
//!
//! [optimizer.rbf]
//! seed = 707
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    FacilityBounds, FacilityId, FacilityPolicy, FacilitySpec, HistoryDataset, ModelError, Network, NetworkSpec,
    PolicyBounds, PolicyVector, ScenarioConfig, UnitRange, Units, Upstream,
};
use crate::objective::InventoryProblem;
use crate::optim::{Budget, GpSettings, NelderMeadSettings, RbfSettings, SearchSpace, Strategy};
use crate::sampling::{FacilityGenParams, GeneratorParams, TruncatedNormal, DEFAULT_HISTORY_LENGTH};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub reorder_point: [Units; 2],
    pub base_stock: [Units; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacilityConfig {
    pub id: FacilityId,
    pub upstream: Upstream,
    pub base_lead_time: u32,
    #[serde(default)]
    pub target_beta: f64,
    pub serves_customers: bool,
    pub initial_policy: FacilityPolicy,
    pub bounds: BoundsConfig,
    /// Synthetic demand distribution; only for customer-serving facilities.
    #[serde(default)]
    pub demand: Option<TruncatedNormal>,
    #[serde(default = "default_lead_delta")]
    pub lead_delta: TruncatedNormal,
}

fn default_lead_delta() -> TruncatedNormal {
    TruncatedNormal::new(0.0, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub length: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            length: DEFAULT_HISTORY_LENGTH,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NelderMeadConfig {
    pub cycles: usize,
    pub iterations_per_cycle: usize,
    pub initial_step: f64,
    pub size_tolerance: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        let s = NelderMeadSettings::default();
        Self {
            cycles: 100,
            iterations_per_cycle: 50,
            initial_step: s.initial_step,
            size_tolerance: s.size_tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub cycles: usize,
    pub iterations_per_cycle: usize,
    pub n_random_starts: usize,
    pub kappa: f64,
    pub random_state_start: u64,
    pub seed: u64,
    pub carry_incumbent: bool,
    pub clip_at_median: bool,
}

impl Default for GpConfig {
    fn default() -> Self {
        let s = GpSettings::default();
        Self {
            cycles: 1000,
            iterations_per_cycle: 20,
            n_random_starts: s.n_random_starts,
            kappa: s.kappa,
            random_state_start: s.random_state_start,
            seed: 0,
            carry_incumbent: true,
            clip_at_median: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbfConfig {
    pub iterations: usize,
    pub seed: u64,
    pub initial_design: Option<usize>,
    pub clip_at_median: bool,
    pub log_values: bool,
    pub exploration_candidates: usize,
}

impl Default for RbfConfig {
    fn default() -> Self {
        let s = RbfSettings::default();
        Self {
            iterations: 1000,
            seed: 707,
            initial_design: s.initial_design,
            clip_at_median: s.clip_at_median,
            log_values: s.log_values,
            exploration_candidates: s.exploration_candidates,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Overrides every strategy's own evaluation count when set.
    pub max_evaluations: Option<usize>,
    pub max_minutes: Option<f64>,
    #[serde(rename = "nelder-mead")]
    pub nelder_mead: NelderMeadConfig,
    pub gp: GpConfig,
    pub rbf: RbfConfig,
}

/// Default wall-time limit of one optimizer run.
pub const DEFAULT_MAX_MINUTES: f64 = 1440.0;

pub const STRATEGY_NAMES: [&str; 3] = ["nelder-mead", "gp", "rbf"];

/// A fully specified optimizer run.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyRun {
    pub strategy: Strategy,
    pub budget: Budget,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Directory of the history CSVs, relative to the configuration file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_dir: Option<PathBuf>,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub generator: GeneratorConfig,
    pub facility: Vec<FacilityConfig>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks everything that does not depend on history data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario.validate()?;
        let network = self.network()?;
        let bounds = self.bounds()?;
        let policy = self.initial_policy()?;
        for (i, p) in policy.entries().iter().enumerate() {
            let b = &bounds.entries()[i];
            let inside = |v: Units, r: UnitRange| r.lower <= v && v <= r.upper;
            if !inside(p.reorder_point, b.reorder_point) || !inside(p.base_stock, b.base_stock) {
                return Err(ConfigError::Invalid(format!(
                    "initial policy of facility {} lies outside its bounds",
                    network.facilities()[i].id
                )));
            }
        }
        for f in &self.facility {
            if f.demand.is_some() && !f.serves_customers {
                return Err(ConfigError::Invalid(format!(
                    "facility {} has demand parameters but serves no customers",
                    f.id
                )));
            }
        }
        if let Some(m) = self.optimizer.max_minutes {
            if !(m > 0.0 && m.is_finite()) {
                return Err(ConfigError::Invalid("max_minutes must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn network_spec(&self) -> NetworkSpec {
        NetworkSpec {
            facilities: self
                .facility
                .iter()
                .map(|f| FacilitySpec {
                    id: f.id,
                    upstream: f.upstream,
                    base_lead_time: f.base_lead_time,
                    target_beta: f.target_beta,
                    serves_customers: f.serves_customers,
                })
                .collect(),
        }
    }

    pub fn network(&self) -> Result<Network, ModelError> {
        Network::new(self.network_spec())
    }

    pub fn bounds(&self) -> Result<PolicyBounds, ModelError> {
        let entries = self
            .facility
            .iter()
            .map(|f| FacilityBounds {
                reorder_point: UnitRange::new(f.bounds.reorder_point[0], f.bounds.reorder_point[1]),
                base_stock: UnitRange::new(f.bounds.base_stock[0], f.bounds.base_stock[1]),
            })
            .collect();
        PolicyBounds::new(entries).map_err(|e| match e {
            // PolicyBounds only knows positions; report configured ids.
            ModelError::InvalidBounds { facility, reason } => ModelError::InvalidBounds {
                facility: self.facility[facility.0 as usize].id,
                reason,
            },
            other => other,
        })
    }

    pub fn initial_policy(&self) -> Result<PolicyVector, ModelError> {
        PolicyVector::for_network(
            &self.network()?,
            self.facility.iter().map(|f| f.initial_policy).collect(),
        )
    }

    pub fn generator_params(&self) -> GeneratorParams {
        GeneratorParams {
            length: self.generator.length,
            facilities: self
                .facility
                .iter()
                .map(|f| FacilityGenParams {
                    id: f.id,
                    demand: if f.serves_customers {
                        Some(f.demand.unwrap_or(TruncatedNormal::new(0.0, 0.0)))
                    } else {
                        None
                    },
                    lead_delta: f.lead_delta,
                })
                .collect(),
        }
    }

    /// Policy box as an optimizer search space with integer coordinates.
    pub fn search_space(&self) -> Result<SearchSpace, ConfigError> {
        let bounds = self.bounds()?;
        let space = SearchSpace::new(bounds.lower(), bounds.upper())
            .and_then(|s| s.with_integers(vec![true; 2 * bounds.len()]))
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(space)
    }

    pub fn problem(&self, history: HistoryDataset) -> Result<InventoryProblem, ConfigError> {
        Ok(InventoryProblem::new(self.network()?, history, self.scenario.clone(), self.bounds()?)?)
    }

    fn max_wall_time(&self) -> Duration {
        Duration::from_secs_f64(60.0 * self.optimizer.max_minutes.unwrap_or(DEFAULT_MAX_MINUTES))
    }

    /// Settings, budget and seed of the named strategy. Every strategy starts
    /// from the configured initial policy.
    pub fn strategy_run(&self, name: &str) -> Result<StrategyRun, ConfigError> {
        let initial = Some(self.initial_policy()?.to_point());
        let opt = &self.optimizer;
        let max_wall_time = self.max_wall_time();
        let run = match name {
            "nelder-mead" => {
                let c = &opt.nelder_mead;
                StrategyRun {
                    strategy: Strategy::NelderMead(NelderMeadSettings {
                        initial,
                        initial_step: c.initial_step,
                        size_tolerance: c.size_tolerance,
                    }),
                    budget: Budget {
                        max_evaluations: opt.max_evaluations.unwrap_or(c.cycles.saturating_mul(c.iterations_per_cycle)),
                        max_wall_time,
                        cycles: c.cycles,
                        iterations_per_cycle: c.iterations_per_cycle,
                    },
                    seed: 0,
                }
            }
            "gp" => {
                let c = &opt.gp;
                StrategyRun {
                    strategy: Strategy::Gp(GpSettings {
                        kappa: c.kappa,
                        n_random_starts: c.n_random_starts,
                        random_state_start: c.random_state_start,
                        initial,
                        carry_incumbent: c.carry_incumbent,
                        clip_at_median: c.clip_at_median,
                    }),
                    budget: Budget {
                        max_evaluations: opt.max_evaluations.unwrap_or(c.cycles.saturating_mul(c.iterations_per_cycle)),
                        max_wall_time,
                        cycles: c.cycles,
                        iterations_per_cycle: c.iterations_per_cycle,
                    },
                    seed: c.seed,
                }
            }
            "rbf" => {
                let c = &opt.rbf;
                let max_evaluations = opt.max_evaluations.unwrap_or(c.iterations);
                StrategyRun {
                    strategy: Strategy::Rbf(RbfSettings {
                        initial,
                        initial_design: c.initial_design,
                        clip_at_median: c.clip_at_median,
                        log_values: c.log_values,
                        exploration_candidates: c.exploration_candidates,
                    }),
                    budget: Budget {
                        max_evaluations,
                        max_wall_time,
                        cycles: 1,
                        iterations_per_cycle: max_evaluations.max(1),
                    },
                    seed: c.seed,
                }
            }
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown strategy {other:?} (expected one of {})",
                    STRATEGY_NAMES.join(", ")
                )))
            }
        };
        Ok(run)
    }
}

/// The five-facility two-level network with its usual initial guess and
/// synthetic-history parameters under which that guess is feasible.
pub const FIVE_FACILITY_EXAMPLE: &str = include_str!("../configs/five_facility.toml");
