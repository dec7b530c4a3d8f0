//! Echo-state reservoir: matrices, leaky-tanh update, odd/even readout
//! transform, ridge training, open-loop listening and closed-loop prediction.
//!
//! A machine is fully determined by its hyperparameters and three seeds
//! (input matrix, adjacency matrix, initial states), so training is
//! reproducible bit-for-bit and machines can be rebuilt from their file form.

mod batch;
mod io;
pub mod spectral;

pub use batch::BatchDriver;
pub use spectral::{spectral_radius, SpectralMethod};

use ndarray::prelude::*;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{NormSpec, TimeSeries};
use crate::linalg::{self, cholesky_solve};
use crate::rng;

/// Feedback values outside this band are clamped before re-entering the
/// loop; normalized training data lives in [−1, 1], so the band never
/// touches in-range dynamics.
pub const FEEDBACK_CLAMP: f64 = 1.5;

/// Redraw attempts allowed for a zero-spectral-radius adjacency draw.
const MAX_REDRAWS: u64 = 32;

#[derive(Debug, Error)]
pub enum ReservoirError {
    #[error("invalid hyperparameters: {0}")]
    BadHyperparams(&'static str),
    #[error("spectral radius estimation failed: {0}")]
    Spectral(#[from] spectral::SpectralError),
    #[error("adjacency draws kept a zero spectral radius after {0} attempts")]
    ZeroRadius(u64),
    #[error("readout system is singular: {0}")]
    Singular(#[from] linalg::LinalgError),
    #[error("dimension mismatch: {0}")]
    Shape(&'static str),
    #[error("training series must provide at least one state/target pair")]
    SeriesTooShort,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// The tuple defining one machine (together with seeds and β).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Reservoir size n.
    pub n: usize,
    /// Input/output dimension d.
    pub d: usize,
    /// Connection probability p of the random adjacency.
    pub connectivity: f64,
    /// Spectral radius λ the adjacency is rescaled to.
    pub spectral_radius: f64,
    /// Half-range σ of the uniform input weights.
    pub input_scale: f64,
    /// Leaking coefficient α of the state update.
    pub leak: f64,
    /// Ridge regression parameter η.
    pub ridge: f64,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ReservoirError> {
        if self.n < 1 {
            return Err(ReservoirError::BadHyperparams("n must be at least 1"));
        }
        if self.d < 1 {
            return Err(ReservoirError::BadHyperparams("d must be at least 1"));
        }
        if !(self.connectivity > 0.0 && self.connectivity < 1.0) {
            return Err(ReservoirError::BadHyperparams("connectivity must lie in (0, 1)"));
        }
        if !(self.spectral_radius > 0.0) {
            return Err(ReservoirError::BadHyperparams("spectral radius must be positive"));
        }
        if !(self.input_scale > 0.0) {
            return Err(ReservoirError::BadHyperparams("input scale must be positive"));
        }
        if !(self.leak > 0.0 && self.leak <= 1.0) {
            return Err(ReservoirError::BadHyperparams("leak must lie in (0, 1]"));
        }
        if !(self.ridge > 0.0) {
            return Err(ReservoirError::BadHyperparams("ridge must be positive"));
        }
        Ok(())
    }
}

/// The three independent seed streams a machine consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixSeeds {
    pub input: u64,
    pub adjacency: u64,
    pub init_state: u64,
}

/// Fixed random part of a machine: input coupling and rescaled adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirMatrices {
    pub w_in: Array2<f64>,
    pub adjacency: Array2<f64>,
    pub seeds: MatrixSeeds,
}

/// Reservoir state vector r.
pub type ReservoirState = Array1<f64>;

/// Draw an initial reservoir state with components uniform on [−1, 1].
pub fn random_state(n: usize, rng: &mut impl Rng) -> ReservoirState {
    Array1::from_shape_fn(n, |_| 2.0 * rng.gen::<f64>() - 1.0)
}

/// Build the input and adjacency matrices for `hp` from `seeds`.
///
/// W_in entries are uniform on [−σ, σ]. The adjacency draw puts, with
/// probability p, a value uniform on [−1, 1] at each entry (row-major draw
/// order), then rescales the whole matrix so its spectral radius equals λ.
/// A draw with zero spectral radius advances the adjacency substream and
/// redraws.
pub fn build_matrices(hp: &Hyperparams, seeds: MatrixSeeds) -> Result<ReservoirMatrices, ReservoirError> {
    hp.validate()?;
    let n = hp.n;
    let mut in_rng = rng::seeded(seeds.input);
    let mut w_in = Array2::<f64>::zeros((n, hp.d));
    for v in w_in.iter_mut() {
        *v = hp.input_scale * (2.0 * in_rng.gen::<f64>() - 1.0);
    }

    for attempt in 0..MAX_REDRAWS {
        let mut adj_rng = rng::stream(seeds.adjacency, attempt);
        let mut a = Array2::<f64>::zeros((n, n));
        for v in a.iter_mut() {
            if adj_rng.gen::<f64>() < hp.connectivity {
                *v = 2.0 * adj_rng.gen::<f64>() - 1.0;
            }
        }
        let (radius, _) = spectral_radius(&a.view())?;
        if radius < 1e-12 {
            continue;
        }
        a *= hp.spectral_radius / radius;
        return Ok(ReservoirMatrices { w_in, adjacency: a, seeds });
    }
    Err(ReservoirError::ZeroRadius(MAX_REDRAWS))
}

/// One leaky-tanh update: r ← (1−α)·r + α·tanh(A·r + W_in·u).
pub fn reservoir_step(
    state: &ReservoirState,
    input: ArrayView1<f64>,
    mats: &ReservoirMatrices,
    leak: f64,
) -> ReservoirState {
    let z = mats.adjacency.dot(state) + mats.w_in.dot(&input);
    let mut out = state * (1.0 - leak);
    ndarray::Zip::from(&mut out).and(&z).for_each(|o, &zv| *o += leak * zv.tanh());
    out
}

/// Odd/even readout transform: nodes 1, 3, 5, … (1-based) pass through,
/// nodes 2, 4, 6, … are squared.
pub fn state_transform(state: &ReservoirState) -> Array1<f64> {
    let mut out = state.clone();
    transform_in_place(&mut out.view_mut());
    out
}

pub(crate) fn transform_in_place(state: &mut ArrayViewMut1<f64>) {
    for i in (1..state.len()).step_by(2) {
        state[i] *= state[i];
    }
}

/// Open-loop (teacher-forced) drive over a whole series.
///
/// Returns the final state and the state history; column k of the history is
/// the state after feeding sample k, so training can slice off the listening
/// prefix.
pub fn listen(
    mats: &ReservoirMatrices,
    leak: f64,
    init: ReservoirState,
    drive: &TimeSeries,
) -> Result<(ReservoirState, Array2<f64>), ReservoirError> {
    if drive.dim() != mats.w_in.ncols() {
        return Err(ReservoirError::Shape("drive dimension does not match W_in"));
    }
    if init.len() != mats.w_in.nrows() {
        return Err(ReservoirError::Shape("initial state size does not match reservoir"));
    }
    let mut state = init;
    let mut history = Array2::<f64>::zeros((state.len(), drive.len()));
    for k in 0..drive.len() {
        state = reservoir_step(&state, drive.sample(k), mats, leak);
        history.column_mut(k).assign(&state);
    }
    Ok((state, history))
}

/// Ridge readout: W_out = U·Vᵀ·(V·Vᵀ + η·I)⁻¹, solved by Cholesky on the
/// normal equations.
///
/// `v` holds transformed states column-wise (n × L), `u` the matching
/// targets (d × L). η = 0 is accepted and fails only when V·Vᵀ is singular.
pub fn train_readout(v: &Array2<f64>, u: &Array2<f64>, ridge: f64) -> Result<Array2<f64>, ReservoirError> {
    if v.ncols() != u.ncols() {
        return Err(ReservoirError::Shape("state and target column counts differ"));
    }
    if v.ncols() == 0 {
        return Err(ReservoirError::SeriesTooShort);
    }
    let n = v.nrows();
    let mut g = v.dot(&v.t());
    // enforce exact symmetry lost to floating-point accumulation
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (g[[i, j]] + g[[j, i]]);
            g[[i, j]] = m;
            g[[j, i]] = m;
        }
        g[[i, i]] += ridge;
    }
    let c = u.dot(&v.t());
    let x = cholesky_solve(&g, &c.t().to_owned())?;
    let w = x.t().to_owned();
    if w.iter().any(|v| !v.is_finite()) {
        return Err(ReservoirError::NonFinite("readout matrix"));
    }
    Ok(w)
}

/// Backward error of the normal equations W·G = C for a trained readout,
/// ‖W·G − C‖_F / (‖W‖_F·‖G‖_F + ‖C‖_F).
pub fn normal_equation_backward_error(
    w_out: &Array2<f64>,
    v: &Array2<f64>,
    u: &Array2<f64>,
    ridge: f64,
) -> f64 {
    let n = v.nrows();
    let mut g = v.dot(&v.t());
    for i in 0..n {
        g[[i, i]] += ridge;
    }
    let c = u.dot(&v.t());
    let resid = w_out.dot(&g) - &c;
    linalg::frobenius(&resid) / (linalg::frobenius(w_out) * linalg::frobenius(&g) + linalg::frobenius(&c))
}

/// Where a machine came from; recorded in its file form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment_id: String,
    pub config_digest: String,
    pub data_digest: String,
}

/// A trained machine: immutable after training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedMachine {
    pub hp: Hyperparams,
    pub matrices: ReservoirMatrices,
    pub w_out: Array2<f64>,
    /// Balancing weight in force when this machine was selected.
    pub beta: f64,
    /// Sampling step of the data the machine was trained on; the machine
    /// update shares this step.
    pub dt: f64,
    /// Normalization (with frozen bounds) the training data went through;
    /// guiding series must pass through the same map.
    pub normalization: NormSpec,
    pub provenance: Provenance,
}

impl TrainedMachine {
    /// Train a machine on `training` series (already normalized), listening
    /// for `listen_len` samples per series before collecting states.
    pub fn train(
        hp: &Hyperparams,
        seeds: MatrixSeeds,
        training: &[TimeSeries],
        listen_len: usize,
        beta: f64,
        normalization: NormSpec,
        provenance: Provenance,
    ) -> Result<Self, ReservoirError> {
        let mats = build_matrices(hp, seeds)?;
        let w_out = fit_readout(&mats, hp, training, listen_len, seeds.init_state)?;
        Ok(TrainedMachine {
            hp: *hp,
            matrices: mats,
            w_out,
            beta,
            dt: training[0].dt(),
            normalization,
            provenance,
        })
    }

    /// Drive the machine open-loop along a guiding series and hand back the
    /// closed-loop seed: the state after the first l−1 samples plus the final
    /// sample as the first feedback input.
    pub fn listen_guide(&self, guide: &TimeSeries) -> Result<(ReservoirState, Array1<f64>), ReservoirError> {
        if guide.is_empty() {
            return Err(ReservoirError::SeriesTooShort);
        }
        let mut rng = rng::seeded(self.matrices.seeds.init_state);
        let mut state = random_state(self.hp.n, &mut rng);
        if guide.len() > 1 {
            let (s, _) = listen(&self.matrices, self.hp.leak, state, &guide.head(guide.len() - 1))?;
            state = s;
        }
        Ok((state, guide.sample(guide.len() - 1).to_owned()))
    }

    /// Autonomous closed loop: each step feeds the previous output back,
    /// v(t+Δt) = W_out·r̃(t+Δt), clamped to ±1.5. A non-finite output
    /// truncates the returned series and flags it via its length (the
    /// returned step count falls short of `steps`).
    pub fn predict_closed_loop(
        &self,
        seed_state: ReservoirState,
        last_output: ArrayView1<f64>,
        steps: usize,
        t0: f64,
    ) -> (Option<TimeSeries>, Option<usize>) {
        let d = self.hp.d;
        let mut state = seed_state;
        let mut input = last_output.to_owned();
        let mut data = Vec::with_capacity(steps * d);
        let mut flagged = None;
        for k in 0..steps {
            state = reservoir_step(&state, input.view(), &self.matrices, self.hp.leak);
            let mut v = self.w_out.dot(&state_transform(&state));
            if v.iter().any(|x| !x.is_finite()) {
                flagged = Some(k);
                break;
            }
            v.mapv_inplace(|x| x.clamp(-FEEDBACK_CLAMP, FEEDBACK_CLAMP));
            data.extend(v.iter().copied());
            input = v;
        }
        let rows = data.len() / d;
        let series = if rows == 0 {
            None
        } else {
            let arr = Array2::from_shape_vec((rows, d), data).expect("row count");
            Some(TimeSeries::new(self.dt, t0, arr).expect("valid series"))
        };
        (series, flagged)
    }

    pub fn driver(&self) -> BatchDriver<'_> {
        BatchDriver::new(&self.matrices, self.hp.leak, Some(&self.w_out))
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        io::save(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, io::MachineFileError> {
        io::load(path)
    }
}

pub use io::MachineFileError;

/// Collect transformed states over the working stages of all series and
/// solve the readout.
fn fit_readout(
    mats: &ReservoirMatrices,
    hp: &Hyperparams,
    training: &[TimeSeries],
    listen_len: usize,
    init_state_seed: u64,
) -> Result<Array2<f64>, ReservoirError> {
    if training.is_empty() {
        return Err(ReservoirError::SeriesTooShort);
    }
    for s in training {
        if s.dim() != hp.d {
            return Err(ReservoirError::Shape("training series dimension mismatch"));
        }
        if s.len() < listen_len + 2 {
            return Err(ReservoirError::SeriesTooShort);
        }
    }
    // One state/target pair per sample past the listening stage: the state
    // that absorbed u_j is paired with u_{j+1}.
    let per_series: Vec<(Array2<f64>, Array2<f64>)> = training
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = rng::stream(init_state_seed, i as u64);
            let init = random_state(hp.n, &mut r);
            let (_, hist) = listen(mats, hp.leak, init, s).expect("dims pre-checked");
            let pairs = s.len() - listen_len - 1;
            let mut v = hist.slice(s![.., listen_len..listen_len + pairs]).to_owned();
            for mut col in v.columns_mut() {
                transform_in_place(&mut col);
            }
            let mut u = Array2::<f64>::zeros((hp.d, pairs));
            for k in 0..pairs {
                u.column_mut(k).assign(&s.sample(listen_len + 1 + k));
            }
            (v, u)
        })
        .collect();

    let total: usize = per_series.iter().map(|(v, _)| v.ncols()).sum();
    let mut v_all = Array2::<f64>::zeros((hp.n, total));
    let mut u_all = Array2::<f64>::zeros((hp.d, total));
    let mut at = 0;
    for (v, u) in &per_series {
        let w = v.ncols();
        v_all.slice_mut(s![.., at..at + w]).assign(v);
        u_all.slice_mut(s![.., at..at + w]).assign(u);
        at += w;
    }
    train_readout(&v_all, &u_all, hp.ridge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn tiny_hp(n: usize, d: usize) -> Hyperparams {
        Hyperparams {
            n,
            d,
            connectivity: 0.5,
            spectral_radius: 0.8,
            input_scale: 1.0,
            leak: 0.7,
            ridge: 1e-6,
        }
    }

    #[test]
    fn rescale_hits_target_radius() {
        // [[2,0],[0,1]] rescaled to λ = 0.5 is [[0.5,0],[0,0.25]]
        let a = array![[2.0, 0.0], [0.0, 1.0]];
        let (r, _) = spectral_radius(&a.view()).unwrap();
        let scaled = &a * (0.5 / r);
        assert_abs_diff_eq!(scaled[[0, 0]], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(scaled[[1, 1]], 0.25, epsilon = 1e-10);
    }

    #[test]
    fn rescale_is_identity_at_target() {
        let a = array![[0.5, 0.0], [0.0, 0.25]];
        let (r, _) = spectral_radius(&a.view()).unwrap();
        let scaled = &a * (0.5 / r);
        for (x, y) in scaled.iter().zip(a.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn density_tracks_connectivity() {
        let hp = Hyperparams { connectivity: 0.480, ..tiny_hp(500, 2) };
        let mats = build_matrices(&hp, MatrixSeeds { input: 1, adjacency: 2, init_state: 3 }).unwrap();
        let nnz = mats.adjacency.iter().filter(|v| **v != 0.0).count();
        let density = nnz as f64 / (500.0 * 500.0);
        assert!((density - 0.480).abs() < 0.05, "density {density}");
        let (r, _) = spectral_radius(&mats.adjacency.view()).unwrap();
        assert_abs_diff_eq!(r, hp.spectral_radius, epsilon = 1e-6);
    }

    #[test]
    fn matrices_are_seed_deterministic() {
        let hp = tiny_hp(40, 2);
        let seeds = MatrixSeeds { input: 9, adjacency: 10, init_state: 11 };
        let a = build_matrices(&hp, seeds).unwrap();
        let b = build_matrices(&hp, seeds).unwrap();
        assert_eq!(a.w_in, b.w_in);
        assert_eq!(a.adjacency, b.adjacency);
        let c = build_matrices(&hp, MatrixSeeds { input: 12, ..seeds }).unwrap();
        assert_ne!(a.w_in, c.w_in);
    }

    #[test]
    fn input_weights_stay_in_range() {
        let hp = Hyperparams { input_scale: 2.917, ..tiny_hp(100, 3) };
        let mats = build_matrices(&hp, MatrixSeeds { input: 4, adjacency: 5, init_state: 6 }).unwrap();
        assert!(mats.w_in.iter().all(|v| v.abs() <= 2.917));
    }

    #[test]
    fn step_matches_scalar_hand_calculation() {
        // n = d = 1: r' = (1−α)r + α·tanh(A·r + W_in·u)
        let mats = ReservoirMatrices {
            w_in: array![[0.3]],
            adjacency: array![[0.2]],
            seeds: MatrixSeeds { input: 0, adjacency: 0, init_state: 0 },
        };
        let r = reservoir_step(&array![0.5], array![1.0].view(), &mats, 0.5);
        assert_abs_diff_eq!(r[0], 0.25 + 0.5 * 0.4f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(r[0], 0.439974, epsilon = 1e-6);
    }

    #[test]
    fn step_degenerate_cases() {
        let mats = ReservoirMatrices {
            w_in: array![[0.3], [0.1]],
            adjacency: array![[0.0, 0.0], [0.0, 0.0]],
            seeds: MatrixSeeds { input: 0, adjacency: 0, init_state: 0 },
        };
        // r = 0, u = 0 stays 0
        let r = reservoir_step(&array![0.0, 0.0], array![0.0].view(), &mats, 0.7);
        assert_eq!(r, array![0.0, 0.0]);
        // α = 1 with A = 0 gives exactly tanh(W_in·u)
        let r = reservoir_step(&array![0.9, -0.4], array![2.0].view(), &mats, 1.0);
        assert_abs_diff_eq!(r[0], 0.6f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], 0.2f64.tanh(), epsilon = 1e-15);
    }

    #[test]
    fn transform_squares_even_nodes() {
        assert_eq!(state_transform(&array![1.0, 1.0, 1.0, 1.0]), array![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(state_transform(&array![-0.5, -0.5]), array![-0.5, 0.25]);
        assert_eq!(state_transform(&Array1::zeros(5)), Array1::zeros(5));
    }

    #[test]
    fn ridge_scalar_case() {
        // V = [2], U = [4], η = 1: W = 4·2/(4+1) = 1.6
        let w = train_readout(&array![[2.0]], &array![[4.0]], 1.0).unwrap();
        assert_abs_diff_eq!(w[[0, 0]], 1.6, epsilon = 1e-14);
    }

    #[test]
    fn ridge_interpolates_at_zero_eta() {
        let v = array![[1.0, 2.0], [0.5, -1.0]];
        let u = array![[3.0, 1.0]];
        let w = train_readout(&v, &u, 0.0).unwrap();
        let fit = w.dot(&v);
        assert_abs_diff_eq!(fit[[0, 0]], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit[[0, 1]], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn ridge_zero_eta_rank_deficient_errors() {
        let v = array![[1.0, 2.0], [2.0, 4.0]];
        let u = array![[1.0, 2.0]];
        assert!(train_readout(&v, &u, 0.0).is_err());
    }

    #[test]
    fn ridge_norm_shrinks_with_eta() {
        let mut rng = rng::seeded(3);
        let v = Array2::from_shape_fn((6, 30), |_| 2.0 * rng.gen::<f64>() - 1.0);
        let u = Array2::from_shape_fn((2, 30), |_| 2.0 * rng.gen::<f64>() - 1.0);
        let norms: Vec<f64> = [1e-10, 1e-6, 1e-2]
            .iter()
            .map(|&eta| linalg::frobenius(&train_readout(&v, &u, eta).unwrap()))
            .collect();
        assert!(norms[0] >= norms[1] && norms[1] >= norms[2], "{norms:?}");
    }

    #[test]
    fn listening_erases_initial_state() {
        // contractive regime: two different initial states end close together
        let hp = Hyperparams { spectral_radius: 0.3, ..tiny_hp(60, 2) };
        let mats = build_matrices(&hp, MatrixSeeds { input: 1, adjacency: 2, init_state: 3 }).unwrap();
        let drive = TimeSeries::new(
            0.05,
            0.0,
            Array2::from_shape_fn((40, 2), |(i, j)| ((i + j) as f64 * 0.37).sin() * 0.8),
        )
        .unwrap();
        let mut r = rng::seeded(5);
        let a0 = random_state(60, &mut r);
        let b0 = random_state(60, &mut r);
        let d0 = (&a0 - &b0).dot(&(&a0 - &b0)).sqrt();
        let (a, _) = listen(&mats, hp.leak, a0, &drive).unwrap();
        let (b, _) = listen(&mats, hp.leak, b0, &drive).unwrap();
        let d1 = (&a - &b).dot(&(&a - &b)).sqrt();
        assert!(d1 < 0.05 * d0, "initial distance {d0}, final {d1}");
    }

    #[test]
    fn closed_loop_is_deterministic_and_respects_steps() {
        let hp = tiny_hp(30, 2);
        let seeds = MatrixSeeds { input: 7, adjacency: 8, init_state: 9 };
        let series = TimeSeries::new(
            0.05,
            0.0,
            Array2::from_shape_fn((80, 2), |(i, j)| ((i * (j + 1)) as f64 * 0.21).sin() * 0.7),
        )
        .unwrap();
        let m = TrainedMachine::train(
            &hp,
            seeds,
            &[series.clone()],
            5,
            1.0,
            NormSpec(vec![crate::dynamics::VarNorm::Identity; 2]),
            Provenance {
                experiment_id: "test".into(),
                config_digest: String::new(),
                data_digest: String::new(),
            },
        )
        .unwrap();
        let (state, last) = m.listen_guide(&series.head(10)).unwrap();
        let (a, fa) = m.predict_closed_loop(state.clone(), last.view(), 50, 0.5);
        let (b, fb) = m.predict_closed_loop(state.clone(), last.view(), 50, 0.5);
        assert_eq!(a, b);
        assert_eq!(fa, fb);
        assert_eq!(a.unwrap().len(), 50);
        let (empty, _) = m.predict_closed_loop(state, last.view(), 0, 0.5);
        assert!(empty.is_none());
    }

    #[test]
    fn backward_error_is_tiny_on_trained_readout() {
        let mut rng = rng::seeded(17);
        let v = Array2::from_shape_fn((40, 200), |_| 2.0 * rng.gen::<f64>() - 1.0);
        let u = Array2::from_shape_fn((2, 200), |_| 2.0 * rng.gen::<f64>() - 1.0);
        let w = train_readout(&v, &u, 3.458e-4).unwrap();
        assert!(normal_equation_backward_error(&w, &v, &u, 3.458e-4) <= 1e-8);
    }
}
