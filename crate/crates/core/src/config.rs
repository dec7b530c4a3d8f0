//! Declarative experiment configuration.
//!
//! One TOML file fully determines one experiment: system, dataset recipe,
//! machine (explicit hyperparameters and/or a search space), grid, protocol
//! and master seed, so every artifact is reproducible from the file and the
//! code version. The bundled configurations cover the reference experiments
//! shipped with the crate; see `configs/` in the repository.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basin::{
    AxisSpec, ClassifySpec, DataSeeds, DatasetSpec, GridSpec, InferSeeds, Protocol,
};
use crate::dynamics::{AsymptoticLabel, ChuaParams, DuffingParams, NormKind, SwingParams, System};
use crate::hyperopt::{SearchSpace, Strategy};
use crate::reservoir::{Hyperparams, MatrixSeeds};
use crate::rng::{self, Stage};
use crate::util::sha256_hex;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{field}: {msg}")]
    Invalid { field: &'static str, msg: String },
}

fn invalid(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSection {
    /// Series kept per asymptotic label.
    pub m: usize,
    /// Samples per stored series (L̂).
    pub series_len: usize,
    pub dt: f64,
    /// Listening prefix per series during training.
    pub listen_len: usize,
    /// Uniform ic sampling range per state variable.
    pub ic_ranges: Vec<[f64; 2]>,
    pub normalization: Vec<NormKind>,
    pub labels: Vec<AsymptoticLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineSection {
    pub n: usize,
    pub connectivity: f64,
    pub spectral_radius: f64,
    pub input_scale: f64,
    pub leak: f64,
    pub ridge: f64,
}

fn default_range_unit() -> [f64; 2] {
    [0.0, 1.0]
}
fn default_range_three() -> [f64; 2] {
    [0.0, 3.0]
}
fn default_range_ridge() -> [f64; 2] {
    [1e-10, 1e-2]
}
fn default_n() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSection {
    pub trial_budget: usize,
    pub strategy: Strategy,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_range_unit")]
    pub connectivity: [f64; 2],
    #[serde(default = "default_range_three")]
    pub spectral_radius: [f64; 2],
    #[serde(default = "default_range_three")]
    pub input_scale: [f64; 2],
    #[serde(default = "default_range_unit")]
    pub leak: [f64; 2],
    #[serde(default = "default_range_ridge")]
    pub ridge: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSection {
    /// Guiding-series length l at prediction time.
    pub guide_len: usize,
    /// Closed-loop steps per prediction.
    pub predict_horizon: usize,
    /// Ground-truth / labeling horizon in RK4 steps; defaults to
    /// `predict_horizon`.
    pub truth_horizon: Option<usize>,
    /// Tail length of the sign-of-x̄ rule (chaotic systems only).
    pub classify_tail: Option<usize>,
    /// Drive length τ per synchronization realization.
    pub tau: usize,
    pub sync_realizations: usize,
    /// Closed-loop steps of the validation-phase prediction error.
    pub validation_horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub amplitudes: Vec<f64>,
    pub realizations: usize,
}

/// Self-contained description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub master_seed: u64,
    /// Balancing weight β of the objective.
    pub beta: f64,
    pub system: System,
    pub dataset: DatasetSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub machine: Option<MachineSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSection>,
    pub grid: GridSpec,
    pub protocol: ProtocolSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    /// Output directory override; not part of the digest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// SHA-256 over the canonical serialization with the output directory
    /// stripped; every artifact embeds this digest.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        sha256_hex(canonical.to_toml().expect("config serializes").as_bytes())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let dim = self.system.dim();
        self.system
            .validate()
            .map_err(|e| invalid("system", e.to_string()))?;
        if self.id.is_empty() {
            return Err(invalid("id", "must not be empty"));
        }
        if !(self.beta > 0.0) {
            return Err(invalid("beta", "must be positive"));
        }
        if self.dataset.ic_ranges.len() != dim {
            return Err(invalid("dataset.ic_ranges", format!("need {dim} ranges")));
        }
        if self.dataset.normalization.len() != dim {
            return Err(invalid("dataset.normalization", format!("need {dim} kinds")));
        }
        if self.dataset.labels.is_empty() {
            return Err(invalid("dataset.labels", "must not be empty"));
        }
        if self.dataset.m < 1 {
            return Err(invalid("dataset.m", "must be at least 1"));
        }
        if self.dataset.series_len < self.dataset.listen_len + 2 {
            return Err(invalid("dataset.series_len", "too short for the listening stage"));
        }
        if self.machine.is_none() && self.search.is_none() {
            return Err(invalid("machine", "either [machine] or [search] required"));
        }
        if self.grid.fixed.len() + 2 != dim {
            return Err(invalid("grid.fixed", format!("grid dimension must be {dim}")));
        }
        if self.grid.x.count == 0 || self.grid.y.count == 0 {
            return Err(invalid("grid", "axes need at least one point"));
        }
        match self.system {
            System::Swing(_) => {}
            _ => {
                if self.protocol.classify_tail.is_none() {
                    return Err(invalid("protocol.classify_tail", "required for chaotic systems"));
                }
            }
        }
        if self.protocol.guide_len < 1 {
            return Err(invalid("protocol.guide_len", "must be at least 1"));
        }
        if self.dataset.series_len < self.protocol.guide_len {
            return Err(invalid("protocol.guide_len", "longer than the stored series"));
        }
        if self.protocol.validation_horizon + self.dataset.listen_len > self.dataset.series_len {
            return Err(invalid(
                "protocol.validation_horizon",
                "listen_len + validation_horizon exceeds series_len",
            ));
        }
        if let Some(m) = &self.machine {
            self.hyperparams_of(m)
                .validate()
                .map_err(|e| invalid("machine", e.to_string()))?;
        }
        if let Some(s) = &self.search {
            self.search_space_of(s)
                .validate()
                .map_err(|e| invalid("search", e.to_string()))?;
        }
        if let Some(sw) = &self.sweep {
            if sw.amplitudes.is_empty() {
                return Err(invalid("sweep.amplitudes", "must not be empty"));
            }
            if sw.realizations < 1 {
                return Err(invalid("sweep.realizations", "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn classify_spec(&self) -> ClassifySpec {
        match self.system {
            System::Swing(_) => ClassifySpec::SwingEnd,
            _ => ClassifySpec::ChaoticTail { tail: self.protocol.classify_tail.unwrap_or(1) },
        }
    }

    pub fn truth_horizon(&self) -> usize {
        self.protocol.truth_horizon.unwrap_or(self.protocol.predict_horizon)
    }

    pub fn protocol(&self) -> Protocol {
        Protocol {
            guide_len: self.protocol.guide_len,
            predict_horizon: self.protocol.predict_horizon,
            truth_horizon: self.truth_horizon(),
            classify: self.classify_spec(),
        }
    }

    /// Dataset recipe with seeds fanned out from the master seed.
    pub fn dataset_spec(&self) -> DatasetSpec {
        let plan = SeedPlan::new(self.master_seed);
        DatasetSpec {
            system: self.system,
            dt: self.dataset.dt,
            series_len: self.dataset.series_len,
            m: self.dataset.m,
            labels: self.dataset.labels.clone(),
            ic_ranges: self.dataset.ic_ranges.iter().map(|r| (r[0], r[1])).collect(),
            normalization: self.dataset.normalization.clone(),
            listen_len: self.dataset.listen_len,
            classify: self.classify_spec(),
            label_horizon: self.truth_horizon().max(self.dataset.series_len - 1),
            seeds: plan.data_seeds(),
        }
    }

    fn hyperparams_of(&self, m: &MachineSection) -> Hyperparams {
        Hyperparams {
            n: m.n,
            d: self.system.dim(),
            connectivity: m.connectivity,
            spectral_radius: m.spectral_radius,
            input_scale: m.input_scale,
            leak: m.leak,
            ridge: m.ridge,
        }
    }

    pub fn hyperparams(&self) -> Option<Hyperparams> {
        self.machine.as_ref().map(|m| self.hyperparams_of(m))
    }

    fn search_space_of(&self, s: &SearchSection) -> SearchSpace {
        SearchSpace {
            n: s.n,
            connectivity: (s.connectivity[0], s.connectivity[1]),
            spectral_radius: (s.spectral_radius[0], s.spectral_radius[1]),
            input_scale: (s.input_scale[0], s.input_scale[1]),
            leak: (s.leak[0], s.leak[1]),
            ridge: (s.ridge[0], s.ridge[1]),
            trial_budget: s.trial_budget,
            beta: self.beta,
            seed: SeedPlan::new(self.master_seed).search_seed(),
        }
    }

    pub fn search_space(&self) -> Option<SearchSpace> {
        self.search.as_ref().map(|s| self.search_space_of(s))
    }

    pub fn seed_plan(&self) -> SeedPlan {
        SeedPlan::new(self.master_seed)
    }
}

/// Fan-out of one experiment master seed into the named stage seeds.
#[derive(Debug, Clone, Copy)]
pub struct SeedPlan {
    master: u64,
}

impl SeedPlan {
    pub fn new(master: u64) -> Self {
        SeedPlan { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn data_seeds(&self) -> DataSeeds {
        DataSeeds {
            train_ic: rng::derive(self.master, Stage::TrainData, 0),
            train_noise: rng::derive(self.master, Stage::TrainNoise, 0),
            test_ic: rng::derive(self.master, Stage::TestData, 0),
            test_noise: rng::derive(self.master, Stage::TestNoise, 0),
        }
    }

    /// Machine seeds for one machine index (re-randomize the reservoir while
    /// keeping the data fixed by bumping the index).
    pub fn machine_seeds(&self, index: u64) -> MatrixSeeds {
        MatrixSeeds {
            input: rng::derive(self.master, Stage::InputMatrix, index),
            adjacency: rng::derive(self.master, Stage::Adjacency, index),
            init_state: rng::derive(self.master, Stage::TrainInitState, index),
        }
    }

    pub fn infer_seeds(&self, index: u64) -> InferSeeds {
        InferSeeds {
            predict_init: rng::derive(self.master, Stage::PredictInitState, index),
            guide_noise: rng::derive(self.master, Stage::GuideNoise, index),
        }
    }

    pub fn search_seed(&self) -> u64 {
        rng::derive(self.master, Stage::TrialSample, 0)
    }

    pub fn eval_seed(&self) -> u64 {
        rng::derive(self.master, Stage::EvalInitState, 0)
    }
}

fn swing(damping: f64, noise: f64) -> System {
    System::Swing(SwingParams {
        input_power: 0.4,
        damping,
        state_damping: 0.7,
        noise_amplitude: noise,
    })
}

fn swing_grid() -> GridSpec {
    GridSpec {
        x: AxisSpec { name: "theta0".into(), lo: -3.0, hi: 3.0, count: 100 },
        y: AxisSpec { name: "omega0".into(), lo: -4.0, hi: 2.0, count: 100 },
        fixed: vec![],
    }
}

fn machine(n: usize, p: f64, lambda: f64, sigma: f64, alpha: f64, eta: f64) -> MachineSection {
    MachineSection {
        n,
        connectivity: p,
        spectral_radius: lambda,
        input_scale: sigma,
        leak: alpha,
        ridge: eta,
    }
}

fn default_search(budget: usize) -> SearchSection {
    SearchSection {
        trial_budget: budget,
        strategy: Strategy::Surrogate,
        n: 500,
        connectivity: default_range_unit(),
        spectral_radius: default_range_three(),
        input_scale: default_range_three(),
        leak: default_range_unit(),
        ridge: default_range_ridge(),
    }
}

fn swing_dataset(m: usize, series_len: usize) -> DatasetSection {
    DatasetSection {
        m,
        series_len,
        dt: 0.05,
        listen_len: 10,
        ic_ranges: vec![[-3.0, 3.0], [-4.0, 2.0]],
        normalization: vec![NormKind::Arctan, NormKind::Arctan],
        labels: vec![
            AsymptoticLabel::Operating,
            AsymptoticLabel::PositiveDiverging,
            AsymptoticLabel::NegativeDiverging,
        ],
    }
}

/// The reference experiments shipped with the crate.
pub fn bundled() -> Vec<ExperimentConfig> {
    let mut configs = Vec::new();

    // damped swing, full sampling
    configs.push(ExperimentConfig {
        id: "swing-d039".into(),
        master_seed: 1,
        beta: 10.0,
        system: swing(0.39, 0.0),
        dataset: swing_dataset(3, 1500),
        machine: Some(machine(500, 0.480, 0.033, 2.917, 0.574, 3.458e-4)),
        search: Some(default_search(300)),
        grid: swing_grid(),
        protocol: ProtocolSection {
            guide_len: 10,
            predict_horizon: 1500,
            truth_horizon: Some(1500),
            classify_tail: None,
            tau: 10,
            sync_realizations: 50,
            validation_horizon: 1490,
        },
        sweep: None,
        out_dir: None,
    });

    // reduced sampling (one series fewer per state)
    let mut reduced = configs[0].clone();
    reduced.id = "swing-d039-reduced".into();
    reduced.beta = 15.0;
    reduced.dataset.m = 2;
    reduced.machine = Some(machine(500, 0.804, 0.852, 2.690, 0.965, 1.552e-4));
    configs.push(reduced);

    // noisy training signals plus the stochastic-resonance sweep
    let mut noisy = configs[0].clone();
    noisy.id = "swing-d039-noisy".into();
    noisy.beta = 12.0;
    noisy.system = swing(0.39, 1e-5);
    noisy.dataset.m = 2;
    noisy.machine = Some(machine(500, 0.404, 0.752, 2.637, 0.738, 8.341e-4));
    noisy.sweep = Some(SweepSection {
        amplitudes: vec![0.0, 1e-5, 1e-4, 1e-3, 2e-3, 1e-2, 1e-1],
        realizations: 50,
    });
    configs.push(noisy);

    // weak damping: fish-like basins, two asymptotic states
    configs.push(ExperimentConfig {
        id: "swing-d006".into(),
        master_seed: 1,
        beta: 30.0,
        system: swing(0.06, 0.0),
        dataset: DatasetSection {
            m: 5,
            series_len: 1000,
            labels: vec![AsymptoticLabel::Operating, AsymptoticLabel::PositiveDiverging],
            ..swing_dataset(5, 1000)
        },
        machine: Some(machine(500, 0.758, 0.046, 1.689, 0.586, 6.91e-5)),
        search: Some(default_search(300)),
        grid: swing_grid(),
        protocol: ProtocolSection {
            guide_len: 10,
            predict_horizon: 2000,
            truth_horizon: Some(2000),
            classify_tail: None,
            tau: 10,
            sync_realizations: 50,
            validation_horizon: 990,
        },
        sweep: None,
        out_dir: None,
    });

    let mut fish_noisy = configs[3].clone();
    fish_noisy.id = "swing-d006-noisy".into();
    fish_noisy.system = swing(0.06, 1e-2);
    fish_noisy.machine = Some(machine(500, 0.854, 0.086, 2.401, 0.489, 9.161e-5));
    configs.push(fish_noisy);

    // Chua circuit: coexisting single-scroll attractors
    configs.push(ExperimentConfig {
        id: "chua".into(),
        master_seed: 1,
        beta: 20.0,
        system: System::Chua(ChuaParams {
            c1: 15.6,
            c2: 1.0,
            c3: 33.0,
            m0: -8.0 / 7.0,
            m1: -5.0 / 7.0,
        }),
        dataset: DatasetSection {
            m: 5,
            series_len: 3000,
            dt: 0.05,
            listen_len: 20,
            ic_ranges: vec![[-2.0, 2.0], [-0.5, 0.5], [0.0, 0.0]],
            normalization: vec![NormKind::MinMax, NormKind::Identity, NormKind::MinMax],
            labels: vec![AsymptoticLabel::AttractorLeft, AsymptoticLabel::AttractorRight],
        },
        machine: Some(machine(500, 0.7691, 0.300, 2.763, 0.424, 1.1e-3)),
        search: Some(default_search(400)),
        grid: GridSpec {
            x: AxisSpec { name: "x0".into(), lo: -2.0, hi: 2.0, count: 100 },
            y: AxisSpec { name: "y0".into(), lo: -0.5, hi: 0.5, count: 100 },
            fixed: vec![0.0],
        },
        protocol: ProtocolSection {
            guide_len: 10,
            predict_horizon: 10_000,
            truth_horizon: Some(10_000),
            classify_tail: Some(1000),
            tau: 10,
            sync_realizations: 50,
            validation_horizon: 2980,
        },
        sweep: None,
        out_dir: None,
    });

    // forced Duffing oscillator: overlapping two-well attractors
    configs.push(ExperimentConfig {
        id: "duffing".into(),
        master_seed: 1,
        beta: 25.0,
        system: System::Duffing(DuffingParams {
            dissipation: 0.5,
            drive_amplitude: 0.38,
            drive_frequency: 1.0,
        }),
        dataset: DatasetSection {
            m: 5,
            series_len: 300,
            dt: 1e-2,
            listen_len: 20,
            ic_ranges: vec![[-2.0, 2.0], [-2.0, 2.0]],
            normalization: vec![NormKind::MinMax, NormKind::MinMax],
            labels: vec![AsymptoticLabel::AttractorLeft, AsymptoticLabel::AttractorRight],
        },
        machine: Some(machine(500, 0.995, 0.501, 0.607, 0.631, 1.9e-3)),
        search: Some(default_search(400)),
        grid: GridSpec {
            x: AxisSpec { name: "x0".into(), lo: -2.0, hi: 2.0, count: 100 },
            y: AxisSpec { name: "y0".into(), lo: -2.0, hi: 2.0, count: 100 },
            fixed: vec![],
        },
        protocol: ProtocolSection {
            guide_len: 10,
            predict_horizon: 10_000,
            truth_horizon: Some(10_000),
            classify_tail: Some(100),
            tau: 10,
            sync_realizations: 50,
            validation_horizon: 280,
        },
        sweep: None,
        out_dir: None,
    });

    configs
}

pub fn bundled_config(id: &str) -> Option<ExperimentConfig> {
    bundled().into_iter().find(|c| c.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_validate() {
        let configs = bundled();
        assert_eq!(configs.len(), 7);
        for cfg in &configs {
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", cfg.id));
        }
    }

    #[test]
    fn round_trip_is_identical() {
        for cfg in bundled() {
            let text = cfg.to_toml().unwrap();
            let back = ExperimentConfig::parse(&text).unwrap();
            assert_eq!(cfg, back, "{} round trip", cfg.id);
            assert_eq!(cfg.digest(), back.digest());
        }
    }

    #[test]
    fn digest_ignores_out_dir_only() {
        let mut cfg = bundled_config("swing-d039").unwrap();
        let base = cfg.digest();
        cfg.out_dir = Some(PathBuf::from("/tmp/elsewhere"));
        assert_eq!(cfg.digest(), base);
        cfg.master_seed = 2;
        assert_ne!(cfg.digest(), base);
    }

    #[test]
    fn swing_d039_carries_reference_values() {
        let cfg = bundled_config("swing-d039").unwrap();
        match cfg.system {
            System::Swing(p) => {
                assert_eq!(p.input_power, 0.4);
                assert_eq!(p.damping, 0.39);
                assert_eq!(p.state_damping, 0.7);
            }
            _ => panic!("wrong system"),
        }
        assert_eq!(cfg.dataset.dt, 0.05);
        assert_eq!(cfg.dataset.series_len, 1500);
        assert_eq!(cfg.dataset.listen_len, 10);
        assert_eq!(cfg.dataset.m, 3);
        let hp = cfg.hyperparams().unwrap();
        assert_eq!(hp.n, 500);
        assert_eq!(hp.connectivity, 0.480);
        assert_eq!(hp.spectral_radius, 0.033);
    }

    #[test]
    fn chua_and_duffing_carry_reference_values() {
        let chua = bundled_config("chua").unwrap();
        match chua.system {
            System::Chua(p) => {
                assert_eq!(p.c1, 15.6);
                assert_eq!(p.c2, 1.0);
                assert_eq!(p.c3, 33.0);
                assert_eq!(p.m0, -8.0 / 7.0);
                assert_eq!(p.m1, -5.0 / 7.0);
            }
            _ => panic!("wrong system"),
        }
        assert_eq!(chua.dataset.dt, 0.05);
        assert_eq!(chua.protocol.classify_tail, Some(1000));

        let duffing = bundled_config("duffing").unwrap();
        match duffing.system {
            System::Duffing(p) => {
                assert_eq!(p.dissipation, 0.5);
                assert_eq!(p.drive_amplitude, 0.38);
                assert_eq!(p.drive_frequency, 1.0);
            }
            _ => panic!("wrong system"),
        }
        assert_eq!(duffing.dataset.series_len, 300);
        assert_eq!(duffing.protocol.classify_tail, Some(100));
    }

    #[test]
    fn invalid_fields_name_their_path() {
        let mut cfg = bundled_config("swing-d039").unwrap();
        cfg.dataset.ic_ranges.pop();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("dataset.ic_ranges"), "{err}");
    }
}
