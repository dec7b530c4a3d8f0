//! Balanced reservoir computing for basin-of-attraction inference.
//!
//! An echo-state reservoir is trained on short transient recordings of a
//! multistable dynamical system, its hyperparameters are selected by an
//! objective that balances prediction error against reservoir-synchronization
//! error, and the trained machine reconstructs the system's attracting basins
//! by classifying the asymptotic state it predicts from a few measured
//! samples per initial condition.
//!
//! The crate covers three target systems (a generalized swing model of a
//! grid-following converter, the Chua circuit, and the forced Duffing
//! oscillator), a full experiment pipeline (data generation, training,
//! hyperparameter search, basin inference, noise sweeps), reference
//! configurations, and the `brc` command-line driver. The `examples/`
//! directory holds one runnable program per capability.

pub mod basin;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod hyperopt;
pub mod linalg;
pub mod objective;
pub mod reservoir;
pub mod rng;
pub mod util;
pub mod verify;

pub use basin::{BasinMap, Dataset, DatasetSpec, GridSpec, Protocol};
pub use config::{bundled, bundled_config, ExperimentConfig, SeedPlan};
pub use dynamics::{AsymptoticLabel, System, TimeSeries};
pub use objective::{balanced_error, suggest_beta, ErrorReport};
pub use reservoir::{Hyperparams, MatrixSeeds, TrainedMachine};
