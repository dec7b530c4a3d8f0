//! Dataset generation, ground-truth basins by model simulation, basin
//! inference from short guiding series, and the noise sweep.
//!
//! Grid cells are independent work items. Every per-cell random draw (initial
//! reservoir state, guiding-series noise) comes from a substream keyed by the
//! cell index, so maps are bit-identical however cells are scheduled; cells
//! are evolved in fixed row-major blocks so the reservoir adjacency enters a
//! GEMM instead of ten thousand matrix-vector products.

use ndarray::prelude::*;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

use crate::dynamics::{
    arctan_normalize, chaotic_label_from_mean, integrate, swing_label_from_omega, AsymptoticLabel,
    DynamicsError, NormKind, NormSpec, System, TimeSeries,
};
use crate::reservoir::{random_state, ReservoirError, TrainedMachine};
use crate::rng::{self, Stage};

/// Cells evolved per GEMM block during inference.
const BLOCK: usize = 256;

/// Rejection-sampling cap per dataset.
pub const SAMPLING_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum BasinError {
    #[error("invalid specification: {0}")]
    BadSpec(&'static str),
    #[error("label {label} still unfilled after {draws} sampled initial conditions")]
    LabelUnreachable { label: &'static str, draws: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Reservoir(#[from] ReservoirError),
}

/// One grid axis: `count` points spanning [lo, hi] inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn value(&self, i: usize) -> f64 {
        if self.count <= 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64
        }
    }
}

/// Rectangular grid of initial conditions over two state variables; any
/// remaining state components are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x: AxisSpec,
    pub y: AxisSpec,
    /// Values appended after (x, y) to fill the state dimension.
    #[serde(default)]
    pub fixed: Vec<f64>,
}

impl GridSpec {
    pub fn cell_count(&self) -> usize {
        self.x.count * self.y.count
    }

    /// Row-major cell order: index = iy · nx + ix.
    pub fn ic(&self, index: usize) -> Vec<f64> {
        let ix = index % self.x.count;
        let iy = index / self.x.count;
        let mut ic = vec![self.x.value(ix), self.y.value(iy)];
        ic.extend_from_slice(&self.fixed);
        ic
    }

    pub fn validate(&self, dim: usize) -> Result<(), BasinError> {
        if self.x.count == 0 || self.y.count == 0 {
            return Err(BasinError::BadSpec("grid axes need at least one point"));
        }
        if 2 + self.fixed.len() != dim {
            return Err(BasinError::BadSpec("grid dimension does not match the system"));
        }
        Ok(())
    }
}

/// How a trajectory is mapped to its asymptotic label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifySpec {
    /// Swing rule: thresholds on the normalized ω' at the end of the run.
    SwingEnd,
    /// Chaotic rule: sign of x̄ over the last `tail` samples.
    ChaoticTail { tail: usize },
}

/// Prediction-time protocol shared by ground truth and inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    /// Guiding-series length l (samples measured before prediction starts).
    pub guide_len: usize,
    /// Closed-loop steps the machine runs autonomously.
    pub predict_horizon: usize,
    /// RK4 steps behind each ground-truth label.
    pub truth_horizon: usize,
    pub classify: ClassifySpec,
}

/// Seeds consumed by one dataset (training or testing half).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSeeds {
    pub train_ic: u64,
    pub train_noise: u64,
    pub test_ic: u64,
    pub test_noise: u64,
}

/// Declarative description of one experiment's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub system: System,
    pub dt: f64,
    /// Samples per series (L̂).
    pub series_len: usize,
    /// Series kept per asymptotic label.
    pub m: usize,
    /// Labels the data must cover, in storage order.
    pub labels: Vec<AsymptoticLabel>,
    /// Uniform sampling range per state variable; zero-width ranges pin the
    /// variable.
    pub ic_ranges: Vec<(f64, f64)>,
    /// Per-variable normalization kinds; min-max bounds are fitted on the
    /// pooled training series and frozen.
    pub normalization: Vec<NormKind>,
    /// Listening prefix consumed by training on each series.
    pub listen_len: usize,
    /// Rule labeling a freshly integrated series.
    pub classify: ClassifySpec,
    /// Steps of the labeling run; only the first `series_len` samples are
    /// stored, so short stored series still carry their asymptotic label.
    pub label_horizon: usize,
    pub seeds: DataSeeds,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), BasinError> {
        self.system.validate().map_err(BasinError::Dynamics)?;
        if self.m < 1 {
            return Err(BasinError::BadSpec("m must be at least 1"));
        }
        if self.labels.is_empty() {
            return Err(BasinError::BadSpec("at least one expected label required"));
        }
        if self.ic_ranges.len() != self.system.dim() {
            return Err(BasinError::BadSpec("one ic range per state variable required"));
        }
        if self.normalization.len() != self.system.dim() {
            return Err(BasinError::BadSpec("one normalization kind per state variable required"));
        }
        if self.series_len < self.listen_len + 2 {
            return Err(BasinError::BadSpec("series too short for the listening stage"));
        }
        if self.label_horizon + 1 < self.series_len {
            return Err(BasinError::BadSpec("label horizon must cover the stored series"));
        }
        if let ClassifySpec::ChaoticTail { tail } = self.classify {
            if tail == 0 || tail > self.label_horizon + 1 {
                return Err(BasinError::BadSpec("classification tail must fit the labeling run"));
            }
        }
        Ok(())
    }

    fn with_noise(&self, d0: f64) -> DatasetSpec {
        let mut out = self.clone();
        if let System::Swing(ref mut p) = out.system {
            p.noise_amplitude = d0;
        }
        out
    }
}

/// One stored (normalized) series with its label and origin.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub label: AsymptoticLabel,
    pub ic: Vec<f64>,
    pub series: TimeSeries,
}

/// A generated set of labeled, normalized series.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub series: Vec<LabeledSeries>,
    pub normalization: NormSpec,
    pub dt: f64,
}

impl Dataset {
    pub fn series_refs(&self) -> Vec<TimeSeries> {
        self.series.iter().map(|s| s.series.clone()).collect()
    }

    /// SHA-256 over every sample of every series, in storage order.
    pub fn digest(&self) -> String {
        use sha2::Digest;
        let mut hasher = sha2::Sha256::new();
        for s in &self.series {
            hasher.update(s.label.as_str().as_bytes());
            for v in &s.ic {
                hasher.update(v.to_le_bytes());
            }
            s.series.digest_into(&mut hasher);
        }
        crate::util::hex(&hasher.finalize())
    }
}

fn classify_raw(series: &TimeSeries, rule: ClassifySpec) -> Result<AsymptoticLabel, DynamicsError> {
    match rule {
        ClassifySpec::SwingEnd => {
            Ok(swing_label_from_omega(arctan_normalize(series.value(series.len() - 1, 1))))
        }
        ClassifySpec::ChaoticTail { tail } => crate::dynamics::classify_chaotic(series, tail),
    }
}

fn generate_set(
    spec: &DatasetSpec,
    ic_seed: u64,
    noise_base: u64,
) -> Result<Vec<(AsymptoticLabel, Vec<f64>, TimeSeries)>, BasinError> {
    let mut rng = rng::seeded(ic_seed);
    let mut buckets: Vec<Vec<(Vec<f64>, TimeSeries)>> = vec![Vec::new(); spec.labels.len()];
    let mut draws = 0usize;
    while buckets.iter().any(|b| b.len() < spec.m) {
        if draws >= SAMPLING_CAP {
            let missing = spec
                .labels
                .iter()
                .zip(&buckets)
                .find(|(_, b)| b.len() < spec.m)
                .map(|(l, _)| l.as_str())
                .unwrap_or("unknown");
            return Err(BasinError::LabelUnreachable { label: missing, draws });
        }
        let ic: Vec<f64> = spec
            .ic_ranges
            .iter()
            .map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
            .collect();
        let noise_seed = rng::derive(noise_base, Stage::NoiseDraw, draws as u64);
        draws += 1;
        // the labeling run is usually longer than the stored series
        let raw = match integrate(&spec.system, &ic, spec.dt, spec.label_horizon, 0.0, Some(noise_seed)) {
            Ok(s) => s,
            Err(_) => continue, // escaped trajectory: rejected draw
        };
        let label = classify_raw(&raw, spec.classify)?;
        if let Some(g) = spec.labels.iter().position(|l| *l == label) {
            if buckets[g].len() < spec.m {
                let stored = raw.head(spec.series_len.min(raw.len())).pad_to(spec.series_len);
                buckets[g].push((ic, stored));
            }
        }
    }
    let mut out = Vec::with_capacity(spec.labels.len() * spec.m);
    for (label, bucket) in spec.labels.iter().zip(buckets) {
        for (ic, series) in bucket {
            out.push((*label, ic, series));
        }
    }
    Ok(out)
}

/// Rejection-sample labeled series until every expected label holds `m`
/// series, for disjoint training and testing seed streams. Min-max bounds
/// are fitted on the pooled training series and frozen for the testing set.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<(Dataset, Dataset), BasinError> {
    spec.validate()?;
    let train_raw = generate_set(spec, spec.seeds.train_ic, spec.seeds.train_noise)?;
    let test_raw = generate_set(spec, spec.seeds.test_ic, spec.seeds.test_noise)?;
    let pooled: Vec<&TimeSeries> = train_raw.iter().map(|(_, _, s)| s).collect();
    let norm = NormSpec::fit(&spec.normalization, &pooled)?;
    let build = |raw: Vec<(AsymptoticLabel, Vec<f64>, TimeSeries)>| -> Result<Dataset, BasinError> {
        let series = raw
            .into_iter()
            .map(|(label, ic, s)| {
                Ok(LabeledSeries { label, ic, series: norm.apply(&s)? })
            })
            .collect::<Result<Vec<_>, BasinError>>()?;
        Ok(Dataset { series, normalization: norm.clone(), dt: spec.dt })
    };
    Ok((build(train_raw)?, build(test_raw)?))
}

/// Grid of true and (optionally) predicted asymptotic labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinMap {
    pub grid: GridSpec,
    pub true_labels: Vec<AsymptoticLabel>,
    pub predicted: Option<Vec<AsymptoticLabel>>,
    pub accuracy: Option<f64>,
    pub config_digest: String,
    pub master_seed: u64,
}

impl BasinMap {
    /// Fraction of cells whose predicted label equals the true one.
    pub fn fraction_matching(truth: &[AsymptoticLabel], predicted: &[AsymptoticLabel]) -> f64 {
        let hits = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
        hits as f64 / truth.len() as f64
    }

    pub fn undecided_fraction(&self) -> f64 {
        let n = self.true_labels.len() as f64;
        self.true_labels.iter().filter(|l| **l == AsymptoticLabel::Undecided).count() as f64 / n
    }
}

/// Brute-force reference: integrate every grid cell to the truth horizon and
/// classify. Dynamical noise is switched off; escaped cells stay undecided.
pub fn ground_truth_basin(
    system: &System,
    dt: f64,
    grid: &GridSpec,
    protocol: &Protocol,
    config_digest: &str,
    master_seed: u64,
) -> Result<BasinMap, BasinError> {
    grid.validate(system.dim())?;
    let sys = system.deterministic();
    let labels: Vec<AsymptoticLabel> = (0..grid.cell_count())
        .into_par_iter()
        .map(|idx| {
            let ic = grid.ic(idx);
            match integrate(&sys, &ic, dt, protocol.truth_horizon, 0.0, None) {
                Ok(series) => classify_raw(&series, protocol.classify)
                    .unwrap_or(AsymptoticLabel::Undecided),
                Err(_) => AsymptoticLabel::Undecided,
            }
        })
        .collect();
    Ok(BasinMap {
        grid: grid.clone(),
        true_labels: labels,
        predicted: None,
        accuracy: None,
        config_digest: config_digest.to_string(),
        master_seed,
    })
}

/// Seeds consumed by one inference pass.
#[derive(Debug, Clone, Copy)]
pub struct InferSeeds {
    /// Per-cell reservoir initial states (substream = cell index).
    pub predict_init: u64,
    /// Per-cell guiding-series noise (substream = cell index).
    pub guide_noise: u64,
}

/// Infer the basin map with a trained machine: per cell, measure an l-point
/// guiding series from the true system, listen, run the closed loop, and
/// classify the prediction with the same criteria as the ground truth.
pub fn infer_basin(
    machine: &TrainedMachine,
    system: &System,
    grid: &GridSpec,
    protocol: &Protocol,
    truth: &BasinMap,
    seeds: InferSeeds,
) -> Result<BasinMap, BasinError> {
    grid.validate(system.dim())?;
    if truth.true_labels.len() != grid.cell_count() {
        return Err(BasinError::BadSpec("ground-truth map does not match the grid"));
    }
    if protocol.guide_len < 1 {
        return Err(BasinError::BadSpec("guiding series needs at least one sample"));
    }
    if machine.hp.d != system.dim() {
        return Err(BasinError::BadSpec("machine dimension does not match the system"));
    }
    let cells = grid.cell_count();
    let indices: Vec<usize> = (0..cells).collect();
    let mut predicted = vec![AsymptoticLabel::Undecided; cells];
    let blocks: Vec<(usize, Vec<AsymptoticLabel>)> = indices
        .par_chunks(BLOCK)
        .map(|chunk| {
            let start = chunk[0];
            (start, infer_block(machine, system, grid, protocol, seeds, chunk))
        })
        .collect();
    for (start, labels) in blocks {
        predicted[start..start + labels.len()].copy_from_slice(&labels);
    }
    let accuracy = BasinMap::fraction_matching(&truth.true_labels, &predicted);
    Ok(BasinMap {
        grid: grid.clone(),
        true_labels: truth.true_labels.clone(),
        predicted: Some(predicted),
        accuracy: Some(accuracy),
        config_digest: truth.config_digest.clone(),
        master_seed: truth.master_seed,
    })
}

fn infer_block(
    machine: &TrainedMachine,
    system: &System,
    grid: &GridSpec,
    protocol: &Protocol,
    seeds: InferSeeds,
    cells: &[usize],
) -> Vec<AsymptoticLabel> {
    let b = cells.len();
    let n = machine.hp.n;
    let d = machine.hp.d;
    let l = protocol.guide_len;
    let horizon = protocol.predict_horizon;

    // guiding series, normalized with the machine's frozen map
    let mut guides: Vec<Option<TimeSeries>> = Vec::with_capacity(b);
    for &cell in cells {
        let ic = grid.ic(cell);
        let noise_seed = rng::derive(seeds.guide_noise, Stage::GuideNoise, cell as u64);
        let guide = integrate(system, &ic, machine.dt, l - 1, 0.0, Some(noise_seed))
            .ok()
            .and_then(|raw| machine.normalization.apply(&raw).ok());
        guides.push(guide);
    }

    let mut states = Array2::<f64>::zeros((n, b));
    for (j, &cell) in cells.iter().enumerate() {
        let mut r = rng::stream(seeds.predict_init, cell as u64);
        states.column_mut(j).assign(&random_state(n, &mut r));
    }

    let driver = machine.driver();
    driver.open_loop(&mut states, l - 1, |k, u| {
        for (j, guide) in guides.iter().enumerate() {
            if let Some(g) = guide {
                u.column_mut(j).assign(&g.sample(k));
            } else {
                u.column_mut(j).fill(0.0);
            }
        }
    });
    let mut first = Array2::<f64>::zeros((d, b));
    for (j, guide) in guides.iter().enumerate() {
        if let Some(g) = guide {
            first.column_mut(j).assign(&g.sample(l - 1));
        }
    }

    let tail = match protocol.classify {
        ClassifySpec::ChaoticTail { tail } => tail.min(horizon),
        ClassifySpec::SwingEnd => 0,
    };
    let mut tail_sum = vec![0.0f64; b];
    let mut finals = vec![0.0f64; b];
    let flagged = driver.closed_loop(&mut states, first, horizon, |k, v, _| {
        match protocol.classify {
            ClassifySpec::SwingEnd => {
                if k + 1 == horizon {
                    for j in 0..b {
                        finals[j] = v[[1, j]];
                    }
                }
            }
            ClassifySpec::ChaoticTail { .. } => {
                if k + tail >= horizon {
                    for j in 0..b {
                        tail_sum[j] += v[[0, j]];
                    }
                }
            }
        }
    });

    (0..b)
        .map(|j| {
            if guides[j].is_none() || flagged[j].is_some() {
                return AsymptoticLabel::Undecided;
            }
            match protocol.classify {
                ClassifySpec::SwingEnd => swing_label_from_omega(finals[j]),
                ClassifySpec::ChaoticTail { .. } => {
                    chaotic_label_from_mean(tail_sum[j] / tail as f64)
                }
            }
        })
        .collect()
}

/// Accuracy-versus-noise table of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub amplitude: f64,
    pub mean_accuracy: f64,
    pub variance: f64,
    pub realizations_used: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// (amplitude, realization, reason) of excluded realizations.
    pub failures: Vec<(f64, usize, String)>,
}

/// Inputs of one stochastic-resonance sweep; the dataset spec is the
/// template whose noise amplitude is overridden per sweep point.
pub struct SweepInputs<'a> {
    pub dataset: &'a DatasetSpec,
    pub hp: crate::reservoir::Hyperparams,
    pub beta: f64,
    pub grid: &'a GridSpec,
    pub protocol: &'a Protocol,
    pub master_seed: u64,
    pub config_digest: String,
    pub experiment_id: String,
}

/// For each amplitude: regenerate noisy data, retrain, infer, and record the
/// accuracy statistics over `realizations` independent realizations. Ground
/// truth is computed once from the deterministic system. Failed realizations
/// are logged and excluded from the statistics.
pub fn noise_sweep(
    inputs: &SweepInputs<'_>,
    amplitudes: &[f64],
    realizations: usize,
) -> Result<SweepTable, BasinError> {
    if amplitudes.is_empty() {
        return Err(BasinError::BadSpec("at least one amplitude required"));
    }
    if realizations < 1 {
        return Err(BasinError::BadSpec("at least one realization required"));
    }
    let truth = ground_truth_basin(
        &inputs.dataset.system,
        inputs.dataset.dt,
        inputs.grid,
        inputs.protocol,
        &inputs.config_digest,
        inputs.master_seed,
    )?;
    let mut table = SweepTable::default();
    for (ai, &d0) in amplitudes.iter().enumerate() {
        let spec = inputs.dataset.with_noise(d0);
        let mut accuracies = Vec::with_capacity(realizations);
        for r in 0..realizations {
            let seed = rng::derive(
                inputs.master_seed,
                Stage::SweepRealization,
                ((ai as u64) << 32) | r as u64,
            );
            match sweep_realization(inputs, &spec, &truth, seed) {
                Ok(acc) => accuracies.push(acc),
                Err(e) => table.failures.push((d0, r, e.to_string())),
            }
        }
        let used = accuracies.len();
        let mean = if used > 0 {
            accuracies.iter().sum::<f64>() / used as f64
        } else {
            f64::NAN
        };
        let variance = if used > 0 {
            accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / used as f64
        } else {
            f64::NAN
        };
        table.rows.push(SweepRow { amplitude: d0, mean_accuracy: mean, variance, realizations_used: used });
    }
    Ok(table)
}

fn sweep_realization(
    inputs: &SweepInputs<'_>,
    spec: &DatasetSpec,
    truth: &BasinMap,
    seed: u64,
) -> Result<f64, BasinError> {
    let mut spec = spec.clone();
    spec.seeds = DataSeeds {
        train_ic: rng::derive(seed, Stage::TrainData, 0),
        train_noise: rng::derive(seed, Stage::TrainNoise, 0),
        test_ic: rng::derive(seed, Stage::TestData, 0),
        test_noise: rng::derive(seed, Stage::TestNoise, 0),
    };
    let (train, _test) = generate_dataset(&spec)?;
    let machine = TrainedMachine::train(
        &inputs.hp,
        crate::reservoir::MatrixSeeds {
            input: rng::derive(seed, Stage::InputMatrix, 0),
            adjacency: rng::derive(seed, Stage::Adjacency, 0),
            init_state: rng::derive(seed, Stage::TrainInitState, 0),
        },
        &train.series_refs(),
        spec.listen_len,
        inputs.beta,
        train.normalization.clone(),
        crate::reservoir::Provenance {
            experiment_id: inputs.experiment_id.clone(),
            config_digest: inputs.config_digest.clone(),
            data_digest: train.digest(),
        },
    )?;
    let map = infer_basin(
        &machine,
        &spec.system,
        inputs.grid,
        inputs.protocol,
        truth,
        InferSeeds {
            predict_init: rng::derive(seed, Stage::PredictInitState, 0),
            guide_noise: rng::derive(seed, Stage::GuideNoise, 0),
        },
    )?;
    Ok(map.accuracy.expect("inference always scores"))
}

// ---- file renderings ----

/// Gray level per label in the PGM layers.
pub fn label_gray(label: AsymptoticLabel) -> u8 {
    match label {
        AsymptoticLabel::Undecided => 0,
        AsymptoticLabel::Operating | AsymptoticLabel::AttractorLeft => 64,
        AsymptoticLabel::PositiveDiverging | AsymptoticLabel::AttractorRight => 128,
        AsymptoticLabel::NegativeDiverging => 192,
    }
}

impl BasinMap {
    /// CSV form: digest/seed/axis header comments, one row per cell in
    /// row-major order.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# balanced-rc basin map v1").unwrap();
        writeln!(out, "# config_digest = {}", self.config_digest).unwrap();
        writeln!(out, "# master_seed = {}", self.master_seed).unwrap();
        for (tag, a) in [("axis1", &self.grid.x), ("axis2", &self.grid.y)] {
            writeln!(out, "# {tag} = {} {} {} {}", a.name, a.lo, a.hi, a.count).unwrap();
        }
        match self.accuracy {
            Some(acc) => writeln!(out, "# accuracy = {acc}").unwrap(),
            None => writeln!(out, "# accuracy =").unwrap(),
        }
        writeln!(out, "axis1,axis2,true_label,predicted_label").unwrap();
        for idx in 0..self.grid.cell_count() {
            let ic = self.grid.ic(idx);
            let t = self.true_labels[idx].as_str();
            let p = self
                .predicted
                .as_ref()
                .map(|p| p[idx].as_str())
                .unwrap_or("");
            writeln!(out, "{},{},{},{}", ic[0], ic[1], t, p).unwrap();
        }
        out
    }

    /// Binary PGM (P5, maxval 255) of one label layer, row iy per image row.
    pub fn to_pgm(&self, labels: &[AsymptoticLabel]) -> Vec<u8> {
        let (nx, ny) = (self.grid.x.count, self.grid.y.count);
        let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
        out.extend(labels.iter().map(|l| label_gray(*l)));
        out
    }
}

/// Sweep table CSV: one row per amplitude.
pub fn sweep_csv(table: &SweepTable, config_digest: &str, master_seed: u64) -> String {
    let mut out = String::new();
    writeln!(out, "# balanced-rc noise sweep v1").unwrap();
    writeln!(out, "# config_digest = {config_digest}").unwrap();
    writeln!(out, "# master_seed = {master_seed}").unwrap();
    writeln!(out, "noise_amplitude,mean_accuracy,variance,realizations_used").unwrap();
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.amplitude, row.mean_accuracy, row.variance, row.realizations_used
        )
        .unwrap();
    }
    out
}

/// Dataset file: header plus every series with 17-significant-digit samples.
pub fn dataset_file(ds: &Dataset, experiment_id: &str, config_digest: &str) -> String {
    let mut out = String::new();
    writeln!(out, "balanced-rc dataset v1").unwrap();
    writeln!(out, "experiment = {experiment_id}").unwrap();
    writeln!(out, "config_digest = {config_digest}").unwrap();
    writeln!(out, "data_digest = {}", ds.digest()).unwrap();
    writeln!(out, "dt = {:.16e}", ds.dt).unwrap();
    let tokens: Vec<String> = ds.normalization.0.iter().map(|v| v.token()).collect();
    writeln!(out, "normalization = {}", tokens.join(" ")).unwrap();
    writeln!(out, "series_count = {}", ds.series.len()).unwrap();
    for s in &ds.series {
        let ic: Vec<String> = s.ic.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(
            out,
            "series {} {} {} ic {}",
            s.label.as_str(),
            s.series.len(),
            s.series.dim(),
            ic.join(" ")
        )
        .unwrap();
        for i in 0..s.series.len() {
            let row: Vec<String> = s.series.sample(i).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
    }
    writeln!(out, "end").unwrap();
    out
}

/// Mean distance (in cells) from each mismatching cell to the nearest
/// true-boundary cell; the spot check that errors hug the basin boundaries.
pub fn mean_error_boundary_distance(map: &BasinMap) -> Option<f64> {
    let predicted = map.predicted.as_ref()?;
    let (nx, ny) = (map.grid.x.count, map.grid.y.count);
    let at = |ix: usize, iy: usize| map.true_labels[iy * nx + ix];
    let mut boundary = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let l = at(ix, iy);
            let mut is_boundary = false;
            if ix + 1 < nx && at(ix + 1, iy) != l {
                is_boundary = true;
            }
            if iy + 1 < ny && at(ix, iy + 1) != l {
                is_boundary = true;
            }
            if ix > 0 && at(ix - 1, iy) != l {
                is_boundary = true;
            }
            if iy > 0 && at(ix, iy - 1) != l {
                is_boundary = true;
            }
            if is_boundary {
                boundary.push((ix as f64, iy as f64));
            }
        }
    }
    if boundary.is_empty() {
        return None;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for iy in 0..ny {
        for ix in 0..nx {
            let idx = iy * nx + ix;
            if predicted[idx] == map.true_labels[idx] {
                continue;
            }
            let d = boundary
                .iter()
                .map(|(bx, by)| {
                    let dx = bx - ix as f64;
                    let dy = by - iy as f64;
                    (dx * dx + dy * dy).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            total += d;
            count += 1;
        }
    }
    (count > 0).then(|| total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ChuaParams, SwingParams};

    fn swing039(noise: f64) -> System {
        System::Swing(SwingParams {
            input_power: 0.4,
            damping: 0.39,
            state_damping: 0.7,
            noise_amplitude: noise,
        })
    }

    fn swing_grid(nx: usize, ny: usize) -> GridSpec {
        GridSpec {
            x: AxisSpec { name: "theta0".into(), lo: -3.0, hi: 3.0, count: nx },
            y: AxisSpec { name: "omega0".into(), lo: -4.0, hi: 2.0, count: ny },
            fixed: vec![],
        }
    }

    fn swing_protocol() -> Protocol {
        Protocol {
            guide_len: 10,
            predict_horizon: 1500,
            truth_horizon: 1500,
            classify: ClassifySpec::SwingEnd,
        }
    }

    #[test]
    fn single_cell_grid() {
        let grid = GridSpec {
            x: AxisSpec { name: "theta0".into(), lo: 0.0, hi: 0.0, count: 1 },
            y: AxisSpec { name: "omega0".into(), lo: 0.0, hi: 0.0, count: 1 },
            fixed: vec![],
        };
        let map = ground_truth_basin(&swing039(0.0), 0.05, &grid, &swing_protocol(), "d", 1).unwrap();
        assert_eq!(map.true_labels.len(), 1);
        assert_ne!(map.true_labels[0], AsymptoticLabel::Undecided);
    }

    #[test]
    fn truth_label_stable_under_longer_horizon() {
        let grid = GridSpec {
            x: AxisSpec { name: "theta0".into(), lo: 0.0, hi: 0.0, count: 1 },
            y: AxisSpec { name: "omega0".into(), lo: 0.0, hi: 0.0, count: 1 },
            fixed: vec![],
        };
        let p1500 = swing_protocol();
        let p3000 = Protocol { truth_horizon: 3000, ..p1500 };
        let a = ground_truth_basin(&swing039(0.0), 0.05, &grid, &p1500, "d", 1).unwrap();
        let b = ground_truth_basin(&swing039(0.0), 0.05, &grid, &p3000, "d", 1).unwrap();
        assert_eq!(a.true_labels, b.true_labels);
    }

    #[test]
    fn swing_truth_partitions_without_undecided() {
        let map = ground_truth_basin(&swing039(0.0), 0.05, &swing_grid(20, 20), &swing_protocol(), "d", 1).unwrap();
        assert_eq!(map.undecided_fraction(), 0.0);
        let ops = map.true_labels.iter().filter(|l| **l == AsymptoticLabel::Operating).count();
        let pos = map.true_labels.iter().filter(|l| **l == AsymptoticLabel::PositiveDiverging).count();
        let neg = map.true_labels.iter().filter(|l| **l == AsymptoticLabel::NegativeDiverging).count();
        assert!(ops > 0 && pos > 0 && neg > 0, "op={ops} pos={pos} neg={neg}");
    }

    #[test]
    fn chua_truth_labels_mirror() {
        let sys = System::Chua(ChuaParams {
            c1: 15.6,
            c2: 1.0,
            c3: 33.0,
            m0: -8.0 / 7.0,
            m1: -5.0 / 7.0,
        });
        let grid = GridSpec {
            x: AxisSpec { name: "x0".into(), lo: -1.5, hi: 1.5, count: 5 },
            y: AxisSpec { name: "y0".into(), lo: -0.4, hi: 0.4, count: 3 },
            fixed: vec![0.0],
        };
        let protocol = Protocol {
            guide_len: 10,
            predict_horizon: 6000,
            truth_horizon: 6000,
            classify: ClassifySpec::ChaoticTail { tail: 1000 },
        };
        let map = ground_truth_basin(&sys, 0.05, &grid, &protocol, "d", 1).unwrap();
        let nx = 5;
        for iy in 0..3usize {
            for ix in 0..5usize {
                let a = map.true_labels[iy * nx + ix];
                let b = map.true_labels[(2 - iy) * nx + (4 - ix)];
                let mirrored = match a {
                    AsymptoticLabel::AttractorLeft => AsymptoticLabel::AttractorRight,
                    AsymptoticLabel::AttractorRight => AsymptoticLabel::AttractorLeft,
                    other => other,
                };
                assert_eq!(b, mirrored, "cell ({ix},{iy})");
            }
        }
    }

    #[test]
    fn dataset_generation_gathers_m_per_label() {
        let spec = DatasetSpec {
            system: swing039(0.0),
            dt: 0.05,
            series_len: 1500,
            m: 1,
            labels: vec![
                AsymptoticLabel::Operating,
                AsymptoticLabel::PositiveDiverging,
                AsymptoticLabel::NegativeDiverging,
            ],
            ic_ranges: vec![(-3.0, 3.0), (-4.0, 2.0)],
            normalization: vec![NormKind::Arctan, NormKind::Arctan],
            listen_len: 10,
            classify: ClassifySpec::SwingEnd,
            label_horizon: 1500,
            seeds: DataSeeds { train_ic: 1, train_noise: 2, test_ic: 3, test_noise: 4 },
        };
        let (train, test) = generate_dataset(&spec).unwrap();
        assert_eq!(train.series.len(), 3);
        assert_eq!(test.series.len(), 3);
        assert_eq!(train.series[0].label, AsymptoticLabel::Operating);
        assert!(train.series.iter().all(|s| s.series.len() == 1500));
        // disjoint streams: different initial conditions
        assert_ne!(train.series[0].ic, test.series[0].ic);
        // normalized values live in (−1, 1)
        assert!(train.series.iter().all(|s| s.series.data().iter().all(|v| v.abs() < 1.0)));
        // regeneration is bit-identical
        let (train2, _) = generate_dataset(&spec).unwrap();
        assert_eq!(train.digest(), train2.digest());
    }

    #[test]
    fn dataset_m_zero_rejected() {
        let spec = DatasetSpec {
            system: swing039(0.0),
            dt: 0.05,
            series_len: 100,
            m: 0,
            labels: vec![AsymptoticLabel::Operating],
            ic_ranges: vec![(-3.0, 3.0), (-4.0, 2.0)],
            normalization: vec![NormKind::Arctan, NormKind::Arctan],
            listen_len: 10,
            classify: ClassifySpec::SwingEnd,
            label_horizon: 100,
            seeds: DataSeeds { train_ic: 1, train_noise: 2, test_ic: 3, test_noise: 4 },
        };
        assert!(matches!(generate_dataset(&spec), Err(BasinError::BadSpec(_))));
    }

    #[test]
    fn unreachable_label_is_reported() {
        // the deterministic swing never lands on chaotic labels
        let spec = DatasetSpec {
            system: swing039(0.0),
            dt: 0.05,
            series_len: 50,
            m: 1,
            labels: vec![AsymptoticLabel::AttractorLeft],
            ic_ranges: vec![(0.1, 0.2), (0.0, 0.0)],
            normalization: vec![NormKind::Arctan, NormKind::Arctan],
            listen_len: 5,
            classify: ClassifySpec::SwingEnd,
            label_horizon: 60,
            seeds: DataSeeds { train_ic: 1, train_noise: 2, test_ic: 3, test_noise: 4 },
        };
        match generate_dataset(&spec) {
            Err(BasinError::LabelUnreachable { label, draws }) => {
                assert_eq!(label, "attractor-left");
                assert_eq!(draws, SAMPLING_CAP);
            }
            other => panic!("expected LabelUnreachable, got {other:?}"),
        }
    }

    #[test]
    fn truth_scores_one_against_itself() {
        let map = ground_truth_basin(&swing039(0.0), 0.05, &swing_grid(8, 8), &swing_protocol(), "d", 1).unwrap();
        assert_eq!(BasinMap::fraction_matching(&map.true_labels, &map.true_labels), 1.0);
    }

    #[test]
    fn csv_and_pgm_are_deterministic() {
        let map = ground_truth_basin(&swing039(0.0), 0.05, &swing_grid(6, 5), &swing_protocol(), "digest", 7).unwrap();
        assert_eq!(map.to_csv(), map.to_csv());
        let pgm = map.to_pgm(&map.true_labels);
        assert!(pgm.starts_with(b"P5\n6 5\n255\n"));
        assert_eq!(pgm.len(), b"P5\n6 5\n255\n".len() + 30);
    }
}
