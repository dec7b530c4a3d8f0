//! Target systems: simulation, asymptotic-state classification, normalization.
//!
//! Three multistable systems are modeled. The generalized swing model of a
//! grid-following converter (phase mismatch θ, frequency mismatch ω, with
//! state-dependent damping and optional white dynamical noise), the Chua
//! circuit with its piecewise-linear diode characteristic, and the forced
//! two-well Duffing oscillator. All are advanced with fixed-step classical
//! RK4; noise enters by Euler–Maruyama splitting (a deterministic RK4 step,
//! then one scaled Gaussian increment on ω).

mod series;

pub use series::{arctan_normalize, NormKind, NormSpec, TimeSeries, Truncation, VarNorm};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Magnitude of ω beyond which a swing trajectory counts as numerically
/// diverged: the normalized ω' is within 7e-7 of ±1 there, so integration
/// stops and the series is flagged instead.
pub const OVERFLOW_GUARD: f64 = 1e6;

/// Magnitude bound for states of systems with no divergence criterion;
/// crossing it is reported as an error carrying the step index.
pub const UNBOUNDED_GUARD: f64 = 1e12;

/// |ω'| band below which a swing trajectory counts as settled.
pub const OPERATING_BAND: f64 = 1e-2;

/// ω' magnitude above which a swing trajectory counts as diverging.
pub const DIVERGING_BAND: f64 = 0.99;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid parameters: {0}")]
    BadParams(&'static str),
    #[error("invalid series: {0}")]
    BadSeries(&'static str),
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("state left the bounded region at step {step}")]
    Unbounded { step: usize },
    #[error("series of {len} samples does not cover horizon {horizon}")]
    HorizonNotCovered { len: usize, horizon: usize },
    #[error("series shorter than classification tail {tail}")]
    TailNotCovered { tail: usize },
    #[error("min-max normalization has zero-width bounds for variable {var}")]
    ZeroWidthBounds { var: usize },
}

/// Generalized swing model parameters (dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwingParams {
    pub input_power: f64,
    pub damping: f64,
    pub state_damping: f64,
    /// Amplitude of the Gaussian white dynamical noise; 0 for deterministic runs.
    #[serde(default)]
    pub noise_amplitude: f64,
}

impl SwingParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.input_power > 0.0) {
            return Err(DynamicsError::BadParams("input power must be positive"));
        }
        if !(self.damping > 0.0) {
            return Err(DynamicsError::BadParams("damping must be positive"));
        }
        if !(self.state_damping > 0.0) {
            return Err(DynamicsError::BadParams("state damping must be positive"));
        }
        if !(self.noise_amplitude >= 0.0) {
            return Err(DynamicsError::BadParams("noise amplitude must be non-negative"));
        }
        Ok(())
    }

    fn rhs(&self, y: [f64; 2], _t: f64) -> [f64; 2] {
        let (theta, omega) = (y[0], y[1]);
        [
            omega,
            self.input_power
                - theta.sin()
                - (self.state_damping * theta.cos() - self.damping) * omega,
        ]
    }
}

/// Chua circuit parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChuaParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub m0: f64,
    pub m1: f64,
}

impl ChuaParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        for v in [self.c1, self.c2, self.c3, self.m0, self.m1] {
            if !v.is_finite() {
                return Err(DynamicsError::BadParams("Chua parameters must be finite"));
            }
        }
        Ok(())
    }

    /// Piecewise-linear diode characteristic; odd in x.
    pub fn g(&self, x: f64) -> f64 {
        self.m1 * x + 0.5 * (self.m0 - self.m1) * ((x + 1.0).abs() - (x - 1.0).abs())
    }

    fn rhs(&self, y: [f64; 3], _t: f64) -> [f64; 3] {
        let (x, yy, z) = (y[0], y[1], y[2]);
        [
            self.c1 * (yy - x - self.g(x)),
            self.c2 * (x - yy + z),
            -self.c3 * yy,
        ]
    }
}

/// Forced two-well Duffing oscillator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingParams {
    pub dissipation: f64,
    pub drive_amplitude: f64,
    pub drive_frequency: f64,
}

impl DuffingParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dissipation > 0.0) {
            return Err(DynamicsError::BadParams("dissipation must be positive"));
        }
        if !(self.drive_amplitude >= 0.0) {
            return Err(DynamicsError::BadParams("drive amplitude must be non-negative"));
        }
        if !(self.drive_frequency > 0.0) {
            return Err(DynamicsError::BadParams("drive frequency must be positive"));
        }
        Ok(())
    }

    fn rhs(&self, y: [f64; 2], t: f64) -> [f64; 2] {
        let (x, v) = (y[0], y[1]);
        [
            v,
            -self.dissipation * v + x - x * x * x
                + self.drive_amplitude * (self.drive_frequency * t).sin(),
        ]
    }
}

/// One of the three target systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum System {
    Swing(SwingParams),
    Chua(ChuaParams),
    Duffing(DuffingParams),
}

impl System {
    pub fn dim(&self) -> usize {
        match self {
            System::Swing(_) => 2,
            System::Chua(_) => 3,
            System::Duffing(_) => 2,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        match self {
            System::Swing(p) => p.validate(),
            System::Chua(p) => p.validate(),
            System::Duffing(p) => p.validate(),
        }
    }

    /// Copy with dynamical noise switched off (ground-truth simulations).
    pub fn deterministic(&self) -> System {
        match *self {
            System::Swing(p) => System::Swing(SwingParams { noise_amplitude: 0.0, ..p }),
            other => other,
        }
    }

    /// Noise amplitude D0 (zero for systems without a noise term).
    pub fn noise_amplitude(&self) -> f64 {
        match self {
            System::Swing(p) => p.noise_amplitude,
            _ => 0.0,
        }
    }

    /// Vector field at (state, t); allocates, meant for oracles and tests.
    pub fn rhs_at(&self, state: &[f64], t: f64) -> Vec<f64> {
        match self {
            System::Swing(p) => p.rhs([state[0], state[1]], t).to_vec(),
            System::Chua(p) => p.rhs([state[0], state[1], state[2]], t).to_vec(),
            System::Duffing(p) => p.rhs([state[0], state[1]], t).to_vec(),
        }
    }
}

/// One classical RK4 update of `y` at time `t` with step `dt`.
pub fn rk4_step<const D: usize>(
    rhs: impl Fn([f64; D], f64) -> [f64; D],
    y: [f64; D],
    t: f64,
    dt: f64,
) -> [f64; D] {
    debug_assert!(dt > 0.0);
    let half = 0.5 * dt;
    let k1 = rhs(y, t);
    let k2 = rhs(axpy(y, half, k1), t + half);
    let k3 = rhs(axpy(y, half, k2), t + half);
    let k4 = rhs(axpy(y, dt, k3), t + dt);
    let mut out = y;
    for i in 0..D {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn axpy<const D: usize>(y: [f64; D], a: f64, k: [f64; D]) -> [f64; D] {
    let mut out = y;
    for i in 0..D {
        out[i] += a * k[i];
    }
    out
}

/// Integrate `system` from `ic` for `steps` RK4 updates of size `dt`,
/// starting at time `t0`.
///
/// Returns steps+1 samples including the initial condition. With a positive
/// noise amplitude, each deterministic update is followed by one
/// Euler–Maruyama increment D0·√dt·N(0,1) on ω, drawn from `noise_seed`
/// (the seed is ignored when D0 = 0, keeping the deterministic path
/// bit-identical). A swing trajectory crossing the overflow guard is cut
/// short and flagged; other systems report unbounded or non-finite states
/// as errors carrying the step index.
pub fn integrate(
    system: &System,
    ic: &[f64],
    dt: f64,
    steps: usize,
    t0: f64,
    noise_seed: Option<u64>,
) -> Result<TimeSeries, DynamicsError> {
    system.validate()?;
    if !(dt > 0.0) {
        return Err(DynamicsError::BadParams("dt must be positive"));
    }
    if ic.len() != system.dim() {
        return Err(DynamicsError::BadParams("initial condition dimension mismatch"));
    }
    match system {
        System::Swing(p) => {
            let noise = p.noise_amplitude;
            let mut rng = if noise > 0.0 {
                Some(rng::seeded(noise_seed.unwrap_or(0)))
            } else {
                None
            };
            let scale = noise * dt.sqrt();
            let mut y = [ic[0], ic[1]];
            let mut data = Vec::with_capacity(2 * (steps + 1));
            data.extend_from_slice(&y);
            let mut t = t0;
            let mut truncated = None;
            for k in 0..steps {
                y = rk4_step(|s, t| p.rhs(s, t), y, t, dt);
                if let Some(r) = rng.as_mut() {
                    let xi: f64 = r.sample(StandardNormal);
                    y[1] += scale * xi;
                }
                t += dt;
                if !(y[0].is_finite() && y[1].is_finite()) {
                    return Err(DynamicsError::NonFinite { step: k + 1 });
                }
                data.extend_from_slice(&y);
                if y[1].abs() > OVERFLOW_GUARD {
                    truncated = Some(Truncation { step: k + 1, sign: y[1].signum() });
                    break;
                }
            }
            let rows = data.len() / 2;
            let arr = ndarray::Array2::from_shape_vec((rows, 2), data).expect("row count");
            Ok(TimeSeries::new(dt, t0, arr)?.with_truncation(truncated))
        }
        System::Chua(p) => integrate_bounded(|y, t| p.rhs(y, t), [ic[0], ic[1], ic[2]], dt, steps, t0),
        System::Duffing(p) => integrate_bounded(|y, t| p.rhs(y, t), [ic[0], ic[1]], dt, steps, t0),
    }
}

fn integrate_bounded<const D: usize>(
    rhs: impl Fn([f64; D], f64) -> [f64; D],
    ic: [f64; D],
    dt: f64,
    steps: usize,
    t0: f64,
) -> Result<TimeSeries, DynamicsError> {
    let mut y = ic;
    let mut data = Vec::with_capacity(D * (steps + 1));
    data.extend_from_slice(&y);
    let mut t = t0;
    for k in 0..steps {
        y = rk4_step(&rhs, y, t, dt);
        t += dt;
        for v in y {
            if !v.is_finite() {
                return Err(DynamicsError::NonFinite { step: k + 1 });
            }
            if v.abs() > UNBOUNDED_GUARD {
                return Err(DynamicsError::Unbounded { step: k + 1 });
            }
        }
        data.extend_from_slice(&y);
    }
    let arr = ndarray::Array2::from_shape_vec((steps + 1, D), data).expect("row count");
    TimeSeries::new(dt, t0, arr)
}

/// Asymptotic state a trajectory settles into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoticLabel {
    /// Swing: synchronized operating state, ω damped to 0.
    Operating,
    /// Swing: ω diverging to +∞.
    PositiveDiverging,
    /// Swing: ω diverging to −∞.
    NegativeDiverging,
    /// Chaotic systems: attractor with negative mean x.
    AttractorLeft,
    /// Chaotic systems: attractor with positive mean x.
    AttractorRight,
    /// No criterion fired within the horizon.
    Undecided,
}

impl AsymptoticLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            AsymptoticLabel::Operating => "operating",
            AsymptoticLabel::PositiveDiverging => "positive-diverging",
            AsymptoticLabel::NegativeDiverging => "negative-diverging",
            AsymptoticLabel::AttractorLeft => "attractor-left",
            AsymptoticLabel::AttractorRight => "attractor-right",
            AsymptoticLabel::Undecided => "undecided",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "operating" => AsymptoticLabel::Operating,
            "positive-diverging" => AsymptoticLabel::PositiveDiverging,
            "negative-diverging" => AsymptoticLabel::NegativeDiverging,
            "attractor-left" => AsymptoticLabel::AttractorLeft,
            "attractor-right" => AsymptoticLabel::AttractorRight,
            "undecided" => AsymptoticLabel::Undecided,
            _ => return None,
        })
    }
}

/// Classify a normalized swing series (θ', ω') by its state at `horizon`
/// steps: operating when |ω'| < 1e-2, diverging when ω' passes ±0.99,
/// undecided otherwise.
///
/// A guard-truncated series is classified at its final (saturated) sample;
/// otherwise the series must cover the horizon.
pub fn classify_swing(series: &TimeSeries, horizon: usize) -> Result<AsymptoticLabel, DynamicsError> {
    let idx = if horizon < series.len() {
        horizon
    } else if series.truncation().is_some() {
        series.len() - 1
    } else {
        return Err(DynamicsError::HorizonNotCovered { len: series.len(), horizon });
    };
    Ok(swing_label_from_omega(series.value(idx, 1)))
}

/// Threshold rule behind [`classify_swing`], applied to one normalized ω' value.
pub fn swing_label_from_omega(omega: f64) -> AsymptoticLabel {
    if omega.abs() < OPERATING_BAND {
        AsymptoticLabel::Operating
    } else if omega > DIVERGING_BAND {
        AsymptoticLabel::PositiveDiverging
    } else if omega < -DIVERGING_BAND {
        AsymptoticLabel::NegativeDiverging
    } else {
        AsymptoticLabel::Undecided
    }
}

/// Classify a Chua/Duffing series by the sign of x̄ over the last `tail`
/// samples; an exact zero mean stays undecided.
pub fn classify_chaotic(series: &TimeSeries, tail: usize) -> Result<AsymptoticLabel, DynamicsError> {
    if tail == 0 || tail > series.len() {
        return Err(DynamicsError::TailNotCovered { tail });
    }
    Ok(chaotic_label_from_mean(series.tail_mean(0, tail)))
}

/// Sign rule behind [`classify_chaotic`], applied to a tail-averaged x̄.
pub fn chaotic_label_from_mean(mean: f64) -> AsymptoticLabel {
    if mean < 0.0 {
        AsymptoticLabel::AttractorLeft
    } else if mean > 0.0 {
        AsymptoticLabel::AttractorRight
    } else {
        AsymptoticLabel::Undecided
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn swing039() -> System {
        System::Swing(SwingParams {
            input_power: 0.4,
            damping: 0.39,
            state_damping: 0.7,
            noise_amplitude: 0.0,
        })
    }

    #[test]
    fn rk4_holds_the_swing_fixed_point() {
        // sin θ* = I, ω* = 0 is an equilibrium of the swing field.
        let theta_star = 0.4f64.asin();
        let p = match swing039() {
            System::Swing(p) => p,
            _ => unreachable!(),
        };
        let y = rk4_step(|s, t| p.rhs(s, t), [theta_star, 0.0], 0.0, 0.05);
        assert_abs_diff_eq!(y[0], theta_star, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rk4_zero_field_is_identity() {
        let y = rk4_step(|_, _| [0.0, 0.0], [1.25, -3.5], 0.0, 0.1);
        assert_eq!(y, [1.25, -3.5]);
    }

    #[test]
    fn rk4_single_step_matches_dense_oracle() {
        let p = match swing039() {
            System::Swing(p) => p,
            _ => unreachable!(),
        };
        let coarse = rk4_step(|s, t| p.rhs(s, t), [0.0, 0.0], 0.0, 0.05);
        let mut fine = [0.0, 0.0];
        let mut t = 0.0;
        for _ in 0..500 {
            fine = rk4_step(|s, t| p.rhs(s, t), fine, t, 1e-4);
            t += 1e-4;
        }
        assert_abs_diff_eq!(coarse[0], fine[0], epsilon = 1e-8);
        assert_abs_diff_eq!(coarse[1], fine[1], epsilon = 1e-8);
    }

    #[test]
    fn operating_ic_damps_to_zero() {
        let ic = [0.4f64.asin() + 0.3, 0.2];
        let s = integrate(&swing039(), &ic, 0.05, 1500, 0.0, None).unwrap();
        assert_eq!(s.len(), 1501);
        assert!(s.value(1500, 1).abs() < 1e-2, "ω tail = {}", s.value(1500, 1));
        assert!(s.truncation().is_none());
    }

    #[test]
    fn diverging_ic_trips_guard_and_flags() {
        let s = integrate(&swing039(), &[0.0, 2.0], 0.05, 1500, 0.0, None).unwrap();
        let tr = s.truncation().expect("should diverge");
        assert_eq!(tr.sign, 1.0);
        assert_eq!(tr.step, s.len() - 1);
        assert!(s.value(s.len() - 1, 1) > OVERFLOW_GUARD);
    }

    #[test]
    fn zero_noise_with_seed_matches_deterministic_path() {
        let sys = swing039();
        let a = integrate(&sys, &[0.3, -0.2], 0.05, 400, 0.0, None).unwrap();
        let b = integrate(&sys, &[0.3, -0.2], 0.05, 400, 0.0, Some(42)).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn noisy_path_is_seed_deterministic_and_seed_sensitive() {
        let sys = System::Swing(SwingParams {
            input_power: 0.4,
            damping: 0.39,
            state_damping: 0.7,
            noise_amplitude: 1e-3,
        });
        let a = integrate(&sys, &[0.3, -0.2], 0.05, 300, 0.0, Some(9)).unwrap();
        let b = integrate(&sys, &[0.3, -0.2], 0.05, 300, 0.0, Some(9)).unwrap();
        let c = integrate(&sys, &[0.3, -0.2], 0.05, 300, 0.0, Some(10)).unwrap();
        assert_eq!(a.data(), b.data());
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn chua_is_odd_symmetric() {
        let sys = System::Chua(ChuaParams {
            c1: 15.6,
            c2: 1.0,
            c3: 33.0,
            m0: -8.0 / 7.0,
            m1: -5.0 / 7.0,
        });
        let ic = [0.5, 0.1, -0.2];
        let neg_ic = [-0.5, -0.1, 0.2];
        let a = integrate(&sys, &ic, 0.05, 3000, 0.0, None).unwrap();
        let b = integrate(&sys, &neg_ic, 0.05, 3000, 0.0, None).unwrap();
        for i in 0..a.len() {
            for j in 0..3 {
                assert_abs_diff_eq!(a.value(i, j), -b.value(i, j), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn classify_swing_thresholds() {
        let flat = TimeSeries::new(0.05, 0.0, Array2::zeros((11, 2))).unwrap();
        assert_eq!(classify_swing(&flat, 10).unwrap(), AsymptoticLabel::Operating);

        let mut pos = Array2::zeros((11, 2));
        pos[[10, 1]] = 0.995;
        let pos = TimeSeries::new(0.05, 0.0, pos).unwrap();
        assert_eq!(classify_swing(&pos, 10).unwrap(), AsymptoticLabel::PositiveDiverging);

        let mut mid = Array2::zeros((11, 2));
        mid[[10, 1]] = 0.5;
        let mid = TimeSeries::new(0.05, 0.0, mid).unwrap();
        assert_eq!(classify_swing(&mid, 10).unwrap(), AsymptoticLabel::Undecided);

        assert!(classify_swing(&flat, 11).is_err());
    }

    #[test]
    fn classify_chaotic_tail_sign() {
        let left = TimeSeries::new(0.05, 0.0, Array2::from_elem((20, 3), -0.3)).unwrap();
        assert_eq!(classify_chaotic(&left, 10).unwrap(), AsymptoticLabel::AttractorLeft);

        let tie = TimeSeries::new(0.05, 0.0, Array2::zeros((20, 3))).unwrap();
        assert_eq!(classify_chaotic(&tie, 10).unwrap(), AsymptoticLabel::Undecided);

        assert!(classify_chaotic(&tie, 21).is_err());
    }

    use ndarray::Array2;

    #[test]
    fn halving_dt_cuts_endpoint_error_fourth_order() {
        let sys = swing039();
        let ic = [0.2, 0.4];
        let endpoint = |dt: f64, steps: usize| {
            let s = integrate(&sys, &ic, dt, steps, 0.0, None).unwrap();
            [s.value(s.len() - 1, 0), s.value(s.len() - 1, 1)]
        };
        let reference = endpoint(1e-5, 250_000); // t = 2.5
        let err = |e: [f64; 2]| {
            ((e[0] - reference[0]).powi(2) + (e[1] - reference[1]).powi(2)).sqrt()
        };
        let e_coarse = err(endpoint(0.05, 50));
        let e_fine = err(endpoint(0.025, 100));
        assert!(
            e_coarse / e_fine >= 12.0,
            "convergence ratio {} below 4th-order expectation",
            e_coarse / e_fine
        );
    }

    #[test]
    fn arctan_normalization_commutes_with_sign() {
        let data = array![[0.7, -2.0], [-0.7, 2.0], [1e9, -1e9]];
        let spec = NormSpec(vec![VarNorm::Arctan, VarNorm::Arctan]);
        let s = TimeSeries::new(0.05, 0.0, data.clone()).unwrap();
        let neg = TimeSeries::new(0.05, 0.0, -data).unwrap();
        let a = spec.apply(&s).unwrap();
        let b = spec.apply(&neg).unwrap();
        for (x, y) in a.data().iter().zip(b.data().iter()) {
            assert_abs_diff_eq!(*x, -*y, epsilon = 1e-15);
        }
    }
}
