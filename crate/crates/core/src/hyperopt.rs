//! Search of the bounded hyperparameter space for the machine minimizing the
//! balanced objective.
//!
//! Two strategies. `Random` samples every trial independently (uniform in
//! each range, log-uniform in η). `Surrogate` spends max(20, budget/10)
//! trials on the same random warmup, then refines around the incumbent with
//! a one-dimensional quadratic surrogate: per coordinate it probes
//! incumbent ± radius, fits the parabola through the three points, jumps to
//! its clamped vertex, and adapts the radius (grow on improvement, shrink
//! otherwise), cycling through the coordinates until the budget is spent.
//! Both strategies share the warmup stream, so a surrogate run's incumbent
//! is never worse than the random run of the same warmup length.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{NormSpec, TimeSeries};
use crate::objective::{prediction_error, sync_error, ErrorReport};
use crate::reservoir::{Hyperparams, MatrixSeeds, Provenance, TrainedMachine};
use crate::rng::{self, Stage};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search space: {0}")]
    BadSpace(&'static str),
    #[error("training failed for rebuilt best candidate: {0}")]
    Rebuild(#[from] crate::reservoir::ReservoirError),
}

/// Bounded search region plus budget and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub n: usize,
    pub connectivity: (f64, f64),
    pub spectral_radius: (f64, f64),
    pub input_scale: (f64, f64),
    pub leak: (f64, f64),
    /// Sampled log-uniformly; the range spans several decades.
    pub ridge: (f64, f64),
    pub trial_budget: usize,
    pub beta: f64,
    pub seed: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            n: 500,
            connectivity: (0.0, 1.0),
            spectral_radius: (0.0, 3.0),
            input_scale: (0.0, 3.0),
            leak: (0.0, 1.0),
            ridge: (1e-10, 1e-2),
            trial_budget: 300,
            beta: 10.0,
            seed: 0,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), SearchError> {
        let ranges = [
            self.connectivity,
            self.spectral_radius,
            self.input_scale,
            self.leak,
            self.ridge,
        ];
        for (lo, hi) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo < hi && lo >= 0.0) {
                return Err(SearchError::BadSpace("ranges must satisfy 0 <= lo < hi"));
            }
        }
        if !(self.ridge.0 > 0.0) {
            return Err(SearchError::BadSpace("ridge range must be positive for log sampling"));
        }
        if self.trial_budget < 1 {
            return Err(SearchError::BadSpace("trial budget must be at least 1"));
        }
        if self.n < 1 {
            return Err(SearchError::BadSpace("n must be at least 1"));
        }
        if !(self.beta > 0.0) {
            return Err(SearchError::BadSpace("beta must be positive"));
        }
        Ok(())
    }

    /// Candidate for trial `id`: uniform draws in order (p, λ, σ, α),
    /// then log-uniform η, from the per-trial substream.
    fn sample(&self, d: usize, id: usize) -> Hyperparams {
        let mut r = rng::stream(rng::derive(self.seed, Stage::TrialSample, id as u64), 0);
        let unif = |r: &mut rand_chacha::ChaCha12Rng, (lo, hi): (f64, f64)| lo + (hi - lo) * r.gen::<f64>();
        let connectivity = unif(&mut r, self.connectivity);
        let spectral_radius = unif(&mut r, self.spectral_radius);
        let input_scale = unif(&mut r, self.input_scale);
        let leak = unif(&mut r, self.leak);
        let ridge = (unif(&mut r, (self.ridge.0.ln(), self.ridge.1.ln()))).exp();
        Hyperparams { n: self.n, d, connectivity, spectral_radius, input_scale, leak, ridge }
    }

    /// Whether `hp` lies inside every declared range.
    pub fn contains(&self, hp: &Hyperparams) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        inside(hp.connectivity, self.connectivity)
            && inside(hp.spectral_radius, self.spectral_radius)
            && inside(hp.input_scale, self.input_scale)
            && inside(hp.leak, self.leak)
            && inside(hp.ridge, self.ridge)
    }
}

/// Everything a candidate evaluation needs besides its hyperparameters.
pub struct EvalContext<'a> {
    pub training: &'a [TimeSeries],
    pub testing: &'a [TimeSeries],
    /// Listening prefix per series during training and validation.
    pub listen_len: usize,
    /// Closed-loop steps over which δe_p is accumulated.
    pub validation_horizon: usize,
    /// Drive length τ of each synchronization realization.
    pub tau: usize,
    pub sync_realizations: usize,
    pub beta: f64,
    /// Root of all per-trial seed derivation.
    pub search_seed: u64,
    pub normalization: NormSpec,
    pub provenance: Provenance,
}

impl EvalContext<'_> {
    fn machine_seeds(&self, id: usize) -> MatrixSeeds {
        MatrixSeeds {
            input: rng::derive(self.search_seed, Stage::TrialMachine, 3 * id as u64),
            adjacency: rng::derive(self.search_seed, Stage::TrialMachine, 3 * id as u64 + 1),
            init_state: rng::derive(self.search_seed, Stage::TrialMachine, 3 * id as u64 + 2),
        }
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub candidate_id: usize,
    pub hp: Hyperparams,
    pub report: ErrorReport,
    /// Set only for the winning candidate once its machine file is written.
    pub machine_path: Option<PathBuf>,
    pub wall: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Random,
    Surrogate,
}

/// Train `hp` on the context's data with trial-derived seeds.
pub fn train_candidate(
    hp: &Hyperparams,
    ctx: &EvalContext<'_>,
    candidate_id: usize,
) -> Result<TrainedMachine, crate::reservoir::ReservoirError> {
    TrainedMachine::train(
        hp,
        ctx.machine_seeds(candidate_id),
        ctx.training,
        ctx.listen_len,
        ctx.beta,
        ctx.normalization.clone(),
        ctx.provenance.clone(),
    )
}

/// Evaluate one candidate: train, measure δe_s on the training data and
/// δe_p on the testing data, assemble the report. Failures never panic;
/// they yield an infinite-δe record.
pub fn evaluate_candidate(hp: &Hyperparams, ctx: &EvalContext<'_>, candidate_id: usize) -> TrialRecord {
    let start = Instant::now();
    let report = evaluate_inner(hp, ctx, candidate_id).unwrap_or_else(|| ErrorReport::failed(ctx.beta));
    TrialRecord {
        candidate_id,
        hp: *hp,
        report,
        machine_path: None,
        wall: start.elapsed(),
    }
}

fn evaluate_inner(hp: &Hyperparams, ctx: &EvalContext<'_>, id: usize) -> Option<ErrorReport> {
    let machine = train_candidate(hp, ctx, id).ok()?;
    let des = sync_error(
        &machine.matrices,
        hp.leak,
        ctx.training,
        ctx.tau,
        ctx.sync_realizations,
        rng::derive(ctx.search_seed, Stage::SyncRealization, id as u64),
    )
    .ok()?;
    let dep = prediction_error(
        &machine,
        ctx.testing,
        ctx.listen_len,
        ctx.validation_horizon,
        rng::derive(ctx.search_seed, Stage::EvalInitState, id as u64),
    )
    .ok()?;
    if !dep.is_finite() || !des.is_finite() {
        return None;
    }
    Some(ErrorReport::new(dep, des, ctx.beta, ctx.sync_realizations))
}

/// Search outcome: the full trial log (ordered by candidate id) and the
/// index of the best record.
#[derive(Debug)]
pub struct SearchOutcome {
    pub trials: Vec<TrialRecord>,
    pub best: usize,
}

impl SearchOutcome {
    pub fn best_record(&self) -> &TrialRecord {
        &self.trials[self.best]
    }
}

/// Minimize δe over the space with the chosen strategy.
pub fn search(
    space: &SearchSpace,
    ctx: &EvalContext<'_>,
    strategy: Strategy,
) -> Result<SearchOutcome, SearchError> {
    space.validate()?;
    let d = ctx.training.first().map(|s| s.dim()).unwrap_or(1);
    let budget = space.trial_budget;
    let warmup = match strategy {
        Strategy::Random => budget,
        Strategy::Surrogate => budget.min((budget / 10).max(20)),
    };
    let mut trials: Vec<TrialRecord> = (0..warmup)
        .into_par_iter()
        .map(|id| {
            let hp = space.sample(d, id);
            evaluate_candidate(&hp, ctx, id)
        })
        .collect();

    if strategy == Strategy::Surrogate {
        refine(space, ctx, d, budget, &mut trials);
    }

    let best = trials
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.report
                .balanced
                .partial_cmp(&b.report.balanced)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.candidate_id.cmp(&b.candidate_id))
        })
        .map(|(i, _)| i)
        .expect("budget >= 1 guarantees at least one trial");
    Ok(SearchOutcome { trials, best })
}

/// Normalized coordinates for the surrogate: every range maps to [0,1],
/// η through its logarithm.
fn to_unit(space: &SearchSpace, hp: &Hyperparams) -> [f64; 5] {
    let u = |v: f64, (lo, hi): (f64, f64)| (v - lo) / (hi - lo);
    [
        u(hp.connectivity, space.connectivity),
        u(hp.spectral_radius, space.spectral_radius),
        u(hp.input_scale, space.input_scale),
        u(hp.leak, space.leak),
        u(hp.ridge.ln(), (space.ridge.0.ln(), space.ridge.1.ln())),
    ]
}

fn from_unit(space: &SearchSpace, d: usize, x: &[f64; 5]) -> Hyperparams {
    let v = |t: f64, (lo, hi): (f64, f64)| lo + (hi - lo) * t.clamp(0.0, 1.0);
    Hyperparams {
        n: space.n,
        d,
        connectivity: v(x[0], space.connectivity),
        spectral_radius: v(x[1], space.spectral_radius),
        input_scale: v(x[2], space.input_scale),
        leak: v(x[3], space.leak),
        ridge: v(x[4], (space.ridge.0.ln(), space.ridge.1.ln())).exp(),
    }
}

fn refine(space: &SearchSpace, ctx: &EvalContext<'_>, d: usize, budget: usize, trials: &mut Vec<TrialRecord>) {
    const GROW: f64 = 1.6;
    const SHRINK: f64 = 0.55;
    const MAX_RADIUS: f64 = 0.4;
    const MIN_RADIUS: f64 = 1e-3;
    // surrogate arithmetic needs finite values; failed trials rank last
    let score = |r: &TrialRecord| {
        if r.report.balanced.is_finite() {
            r.report.balanced
        } else {
            1e30
        }
    };
    let best_of = |trials: &[TrialRecord]| {
        trials
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| score(a).partial_cmp(&score(b)).unwrap().then(a.candidate_id.cmp(&b.candidate_id)))
            .map(|(i, _)| i)
            .unwrap()
    };
    let mut incumbent = best_of(trials);
    let mut radius = [0.15f64; 5];
    let mut dim = 0usize;
    let mut id = trials.len();
    while id < budget {
        let x0 = to_unit(space, &trials[incumbent].hp);
        let f0 = score(&trials[incumbent]);
        let r = radius[dim];
        let lo = (x0[dim] - r).max(0.0);
        let hi = (x0[dim] + r).min(1.0);
        let mut probes: Vec<(f64, f64)> = vec![(x0[dim], f0)];
        for t in [lo, hi] {
            if id >= budget {
                break;
            }
            if (t - x0[dim]).abs() < 1e-12 {
                continue;
            }
            let mut x = x0;
            x[dim] = t;
            let hp = from_unit(space, d, &x);
            trials.push(evaluate_candidate(&hp, ctx, id));
            probes.push((t, score(trials.last().unwrap())));
            id += 1;
        }
        if id < budget && probes.len() == 3 {
            if let Some(vertex) = quadratic_vertex(&probes) {
                let t = vertex.clamp(lo, hi);
                if probes.iter().all(|(p, _)| (p - t).abs() > 1e-9) {
                    let mut x = x0;
                    x[dim] = t;
                    let hp = from_unit(space, d, &x);
                    trials.push(evaluate_candidate(&hp, ctx, id));
                    id += 1;
                }
            }
        }
        let new_best = best_of(trials);
        if score(&trials[new_best]) < f0 {
            incumbent = new_best;
            radius[dim] = (radius[dim] * GROW).min(MAX_RADIUS);
        } else {
            radius[dim] = (radius[dim] * SHRINK).max(MIN_RADIUS);
        }
        dim = (dim + 1) % 5;
    }
}

/// Vertex of the parabola through three (x, f) points; `None` when the fit
/// is degenerate or concave (the endpoints then speak for themselves).
fn quadratic_vertex(pts: &[(f64, f64)]) -> Option<f64> {
    let [(x1, f1), (x2, f2), (x3, f3)] = [pts[0], pts[1], pts[2]];
    let d21 = (f2 - f1) / (x2 - x1);
    let d32 = (f3 - f2) / (x3 - x2);
    let a = (d32 - d21) / (x3 - x1);
    if !(a > 0.0) || !a.is_finite() {
        return None;
    }
    let b = d21 - a * (x1 + x2);
    let v = -b / (2.0 * a);
    v.is_finite().then_some(v)
}

/// CSV header of the trial log.
pub const TRIAL_LOG_HEADER: &str =
    "candidate_id,connectivity,spectral_radius,input_scale,leak,ridge,prediction_error,sync_error,beta,balanced_error";

/// One CSV row per trial, in the header's column order.
pub fn trial_log_csv(trials: &[TrialRecord]) -> String {
    let mut out = String::from(TRIAL_LOG_HEADER);
    out.push('\n');
    for t in trials {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            t.candidate_id,
            t.hp.connectivity,
            t.hp.spectral_radius,
            t.hp.input_scale,
            t.hp.leak,
            t.hp.ridge,
            t.report.prediction,
            t.report.synchronization,
            t.report.beta,
            t.report.balanced,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::VarNorm;
    use ndarray::Array2;

    fn tiny_ctx<'a>(training: &'a [TimeSeries], testing: &'a [TimeSeries], seed: u64) -> EvalContext<'a> {
        EvalContext {
            training,
            testing,
            listen_len: 5,
            validation_horizon: 20,
            tau: 5,
            sync_realizations: 8,
            beta: 10.0,
            search_seed: seed,
            normalization: NormSpec(vec![VarNorm::Identity; 2]),
            provenance: Provenance {
                experiment_id: "unit".into(),
                config_digest: String::new(),
                data_digest: String::new(),
            },
        }
    }

    fn series(phase: f64) -> TimeSeries {
        TimeSeries::new(
            0.05,
            0.0,
            Array2::from_shape_fn((60, 2), |(i, j)| ((i as f64 * 0.23 + phase) * (j + 1) as f64).sin() * 0.7),
        )
        .unwrap()
    }

    fn tiny_space(budget: usize, seed: u64) -> SearchSpace {
        SearchSpace {
            n: 16,
            trial_budget: budget,
            seed,
            ..SearchSpace::default()
        }
    }

    #[test]
    fn duplicate_evaluation_is_identical() {
        let train = [series(0.0), series(1.0)];
        let test = [series(2.0)];
        let ctx = tiny_ctx(&train, &test, 3);
        let hp = tiny_space(1, 3).sample(2, 0);
        let a = evaluate_candidate(&hp, &ctx, 0);
        let b = evaluate_candidate(&hp, &ctx, 0);
        assert_eq!(a.report, b.report);
        assert_eq!(a.hp, b.hp);
    }

    #[test]
    fn budget_one_returns_that_trial() {
        let train = [series(0.0)];
        let test = [series(2.0)];
        let ctx = tiny_ctx(&train, &test, 5);
        let out = search(&tiny_space(1, 5), &ctx, Strategy::Random).unwrap();
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.best_record().candidate_id, 0);
    }

    #[test]
    fn best_is_log_minimum_and_samples_stay_in_range() {
        let train = [series(0.0), series(1.0)];
        let test = [series(2.0)];
        let ctx = tiny_ctx(&train, &test, 7);
        let space = tiny_space(12, 7);
        let out = search(&space, &ctx, Strategy::Random).unwrap();
        let best = out.best_record().report.balanced;
        for t in &out.trials {
            assert!(t.report.balanced >= best);
            assert!(space.contains(&t.hp), "{:?} escaped the space", t.hp);
        }
    }

    #[test]
    fn search_is_reproducible() {
        let train = [series(0.0)];
        let test = [series(2.0)];
        let ctx = tiny_ctx(&train, &test, 11);
        let a = search(&tiny_space(6, 11), &ctx, Strategy::Random).unwrap();
        let b = search(&tiny_space(6, 11), &ctx, Strategy::Random).unwrap();
        assert_eq!(trial_log_csv(&a.trials), trial_log_csv(&b.trials));
    }

    #[test]
    fn surrogate_never_loses_to_its_warmup() {
        let train = [series(0.0), series(1.0)];
        let test = [series(2.0)];
        let ctx = tiny_ctx(&train, &test, 13);
        // warmup of the surrogate at budget 30 is max(20, 3) = 20 trials
        let random = search(&tiny_space(20, 13), &ctx, Strategy::Random).unwrap();
        let surrogate = search(&tiny_space(30, 13), &ctx, Strategy::Surrogate).unwrap();
        assert_eq!(surrogate.trials.len(), 30);
        // shared warmup prefix: identical records
        for (a, b) in random.trials.iter().zip(surrogate.trials.iter()) {
            assert_eq!(a.report, b.report);
        }
        assert!(surrogate.best_record().report.balanced <= random.best_record().report.balanced);
    }

    #[test]
    fn quadratic_vertex_finds_minimum() {
        // f(x) = (x − 0.3)², sampled at 0, 0.5, 1
        let pts = [(0.0, 0.09), (0.5, 0.04), (1.0, 0.49)];
        let v = quadratic_vertex(&pts).unwrap();
        approx::assert_abs_diff_eq!(v, 0.3, epsilon = 1e-12);
        // concave data has no usable vertex
        assert!(quadratic_vertex(&[(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)]).is_none());
    }
}
