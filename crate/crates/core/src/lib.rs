//! Drift-plus-penalty control of local CPU frequency, transmit power and
//! bandwidth allocation in a multi-user mobile-edge computing system, with a
//! slotted simulator and brute-force oracles for certification.

pub mod baselines;
pub mod controller;
pub mod error;
pub mod experiment;
pub mod model;
pub mod oracle;
pub mod presets;
pub mod simulator;
pub mod stochastic;

pub use baselines::{Policy, PolicyKind};
pub use controller::{decide_slot, solve_sp2, PtsProblem, SlotDecision, Sp2Solution};
pub use error::{ConfigError, OracleError, SimError};
pub use model::{parse_config, parse_config_str, DeviceConfig, Scenario, SystemConfig};
pub use simulator::{run, RunSummary, SlotRecord};
pub use stochastic::{Environment, RandomStreams};
