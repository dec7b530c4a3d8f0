//! Uniformly sampled trajectories and the normalizations applied to them
//! before they are fed to a machine.

use ndarray::prelude::*;
use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Divergence marker attached to a series truncated by the overflow guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Index of the last stored sample (the one that tripped the guard).
    pub step: usize,
    /// Sign of the diverging frequency component (+1.0 or -1.0).
    pub sign: f64,
}

/// A uniformly sampled multivariate trajectory.
///
/// Stored row-per-sample; the unit of training, testing and guiding data.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    dt: f64,
    t0: f64,
    data: Array2<f64>,
    truncated: Option<Truncation>,
}

impl TimeSeries {
    pub fn new(dt: f64, t0: f64, data: Array2<f64>) -> Result<Self, DynamicsError> {
        if !(dt > 0.0) {
            return Err(DynamicsError::BadSeries("dt must be positive"));
        }
        if data.nrows() == 0 {
            return Err(DynamicsError::BadSeries("series must hold at least one sample"));
        }
        Ok(Self { dt, t0, data, truncated: None })
    }

    pub(crate) fn with_truncation(mut self, t: Option<Truncation>) -> Self {
        self.truncated = t;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    /// State dimension d.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// Divergence-guard marker, if the producing integration was cut short.
    pub fn truncation(&self) -> Option<Truncation> {
        self.truncated
    }

    pub fn sample(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn value(&self, i: usize, var: usize) -> f64 {
        self.data[[i, var]]
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// First `n` samples as a new series (guiding-series construction).
    pub fn head(&self, n: usize) -> TimeSeries {
        assert!(n >= 1 && n <= self.len(), "head window out of range");
        TimeSeries {
            dt: self.dt,
            t0: self.t0,
            data: self.data.slice(s![..n, ..]).to_owned(),
            truncated: None,
        }
    }

    /// Extend to `len` samples by repeating the final sample.
    ///
    /// Used for guard-truncated series whose normalized tail has already
    /// saturated; a no-op when the series is long enough.
    pub fn pad_to(&self, len: usize) -> TimeSeries {
        if self.len() >= len {
            return self.clone();
        }
        let mut data = Array2::zeros((len, self.dim()));
        data.slice_mut(s![..self.len(), ..]).assign(&self.data);
        let last = self.data.row(self.len() - 1).to_owned();
        for i in self.len()..len {
            data.row_mut(i).assign(&last);
        }
        TimeSeries { dt: self.dt, t0: self.t0, data, truncated: self.truncated }
    }

    /// Mean of one variable over the final `tail` samples.
    pub fn tail_mean(&self, var: usize, tail: usize) -> f64 {
        let n = self.len();
        assert!(tail >= 1 && tail <= n, "tail window out of range");
        let mut acc = 0.0;
        for i in n - tail..n {
            acc += self.data[[i, var]];
        }
        acc / tail as f64
    }

    /// Feed every sample (little-endian f64 bytes) plus step metadata to a hasher.
    pub fn digest_into(&self, hasher: &mut sha2::Sha256) {
        use sha2::Digest;
        hasher.update(self.dt.to_le_bytes());
        hasher.update(self.t0.to_le_bytes());
        hasher.update((self.len() as u64).to_le_bytes());
        hasher.update((self.dim() as u64).to_le_bytes());
        for v in self.data.iter() {
            hasher.update(v.to_le_bytes());
        }
    }
}

/// Per-variable normalization applied before data reaches the machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarNorm {
    /// v' = 2·arctan(v)/π, mapping ℝ onto (−1, 1).
    Arctan,
    /// Affine map of [lo, hi] onto [−1, 1], bounds frozen from training data.
    MinMax { lo: f64, hi: f64 },
    /// Pass-through.
    Identity,
}

impl VarNorm {
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            VarNorm::Arctan => arctan_normalize(v),
            VarNorm::MinMax { lo, hi } => 2.0 * (v - lo) / (hi - lo) - 1.0,
            VarNorm::Identity => v,
        }
    }

    /// Round-trippable text token used by the machine and dataset files.
    pub fn token(&self) -> String {
        match self {
            VarNorm::Arctan => "arctan".to_string(),
            VarNorm::Identity => "identity".to_string(),
            VarNorm::MinMax { lo, hi } => format!("minmax:{lo:.16e},{hi:.16e}"),
        }
    }

    pub fn from_token(tok: &str) -> Option<VarNorm> {
        match tok {
            "arctan" => Some(VarNorm::Arctan),
            "identity" => Some(VarNorm::Identity),
            other => {
                let body = other.strip_prefix("minmax:")?;
                let (lo, hi) = body.split_once(',')?;
                Some(VarNorm::MinMax { lo: lo.parse().ok()?, hi: hi.parse().ok()? })
            }
        }
    }
}

/// v' = 2·arctan(v)/π.
pub fn arctan_normalize(v: f64) -> f64 {
    2.0 * v.atan() / std::f64::consts::PI
}

/// The fitted normalization of one experiment: one [`VarNorm`] per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSpec(pub Vec<VarNorm>);

/// Declarative per-variable scheme; `MinMax` bounds are filled by [`NormSpec::fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    Arctan,
    MinMax,
    Identity,
}

impl NormSpec {
    /// Fit a spec from pooled training series: `MinMax` variables take the
    /// pooled extrema, the other kinds are stateless.
    pub fn fit(kinds: &[NormKind], pooled: &[&TimeSeries]) -> Result<Self, DynamicsError> {
        let mut vars = Vec::with_capacity(kinds.len());
        for (j, kind) in kinds.iter().enumerate() {
            vars.push(match kind {
                NormKind::Arctan => VarNorm::Arctan,
                NormKind::Identity => VarNorm::Identity,
                NormKind::MinMax => {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for s in pooled {
                        for i in 0..s.len() {
                            let v = s.value(i, j);
                            lo = lo.min(v);
                            hi = hi.max(v);
                        }
                    }
                    if !(hi > lo) {
                        return Err(DynamicsError::ZeroWidthBounds { var: j });
                    }
                    VarNorm::MinMax { lo, hi }
                }
            });
        }
        Ok(NormSpec(vars))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn apply(&self, series: &TimeSeries) -> Result<TimeSeries, DynamicsError> {
        if series.dim() != self.0.len() {
            return Err(DynamicsError::BadSeries("normalization dimension mismatch"));
        }
        for (j, v) in self.0.iter().enumerate() {
            if let VarNorm::MinMax { lo, hi } = v {
                if !(hi > lo) {
                    return Err(DynamicsError::ZeroWidthBounds { var: j });
                }
            }
        }
        let mut data = series.data.clone();
        for (j, norm) in self.0.iter().enumerate() {
            for v in data.column_mut(j).iter_mut() {
                *v = norm.apply(*v);
            }
        }
        Ok(TimeSeries {
            dt: series.dt,
            t0: series.t0,
            data,
            truncated: series.truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn arctan_maps_known_points() {
        assert_abs_diff_eq!(arctan_normalize(0.0), 0.0);
        assert_abs_diff_eq!(arctan_normalize(1.0), 0.5, epsilon = 1e-15);
        assert!(arctan_normalize(1e12) > 0.999_999);
        assert!(arctan_normalize(1e12) < 1.0);
    }

    #[test]
    fn minmax_fit_and_apply() {
        let s = TimeSeries::new(
            0.1,
            0.0,
            ndarray::array![[0.0, 5.0], [2.0, 5.5], [4.0, 6.0]],
        )
        .unwrap();
        let spec = NormSpec::fit(&[NormKind::MinMax, NormKind::Identity], &[&s]).unwrap();
        assert_eq!(spec.0[0], VarNorm::MinMax { lo: 0.0, hi: 4.0 });
        let out = spec.apply(&s).unwrap();
        assert_abs_diff_eq!(out.value(0, 0), -1.0);
        assert_abs_diff_eq!(out.value(1, 0), 0.0);
        assert_abs_diff_eq!(out.value(2, 0), 1.0);
        assert_abs_diff_eq!(out.value(1, 1), 5.5);
    }

    #[test]
    fn zero_width_minmax_rejected() {
        let s = TimeSeries::new(0.1, 0.0, ndarray::array![[3.0], [3.0]]).unwrap();
        assert!(matches!(
            NormSpec::fit(&[NormKind::MinMax], &[&s]),
            Err(DynamicsError::ZeroWidthBounds { var: 0 })
        ));
    }

    #[test]
    fn pad_repeats_last_sample() {
        let s = TimeSeries::new(0.1, 0.0, ndarray::array![[1.0], [2.0]]).unwrap();
        let p = s.pad_to(4);
        assert_eq!(p.len(), 4);
        assert_eq!(p.value(3, 0), 2.0);
        assert_eq!(s.pad_to(1).len(), 2);
    }
}
