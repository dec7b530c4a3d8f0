//! Column-batched reservoir evolution.
//!
//! Basin inference and error evaluation drive the same reservoir from many
//! starting points; evolving a block of columns at once turns the n×n matrix
//! product into a GEMM with the adjacency reused across columns, which is
//! what makes full-grid inference tractable. Per-column results are
//! independent of how cells are grouped into blocks.

use ndarray::linalg::general_mat_mul;
use ndarray::prelude::*;

use super::{transform_in_place, ReservoirMatrices, FEEDBACK_CLAMP};

/// Shared matrices plus scratch-free stepping over a block of columns.
pub struct BatchDriver<'a> {
    mats: &'a ReservoirMatrices,
    leak: f64,
    w_out: Option<&'a Array2<f64>>,
}

impl<'a> BatchDriver<'a> {
    pub fn new(mats: &'a ReservoirMatrices, leak: f64, w_out: Option<&'a Array2<f64>>) -> Self {
        Self { mats, leak, w_out }
    }

    pub fn n(&self) -> usize {
        self.mats.w_in.nrows()
    }

    pub fn d(&self) -> usize {
        self.mats.w_in.ncols()
    }

    /// One teacher-forced update of every column: R ← (1−α)R + α·tanh(A·R + W_in·U).
    pub fn open_loop_step(&self, states: &mut Array2<f64>, inputs: ArrayView2<f64>, z: &mut Array2<f64>) {
        general_mat_mul(1.0, &self.mats.adjacency, states, 0.0, z);
        general_mat_mul(1.0, &self.mats.w_in, &inputs, 1.0, z);
        let leak = self.leak;
        ndarray::Zip::from(states).and(&*z).for_each(|s, &zv| {
            *s = (1.0 - leak) * *s + leak * zv.tanh();
        });
    }

    /// Drive every column through its own series for `steps` updates;
    /// `series_input(k)` must fill the (d × B) input block for step k.
    pub fn open_loop(
        &self,
        states: &mut Array2<f64>,
        steps: usize,
        mut series_input: impl FnMut(usize, &mut Array2<f64>),
    ) {
        let b = states.ncols();
        let mut u = Array2::<f64>::zeros((self.d(), b));
        let mut z = Array2::<f64>::zeros((self.n(), b));
        for k in 0..steps {
            series_input(k, &mut u);
            self.open_loop_step(states, u.view(), &mut z);
        }
    }

    /// Closed-loop run over all columns: each step updates the states with
    /// the previous outputs, reads out v = W_out·r̃, clamps to ±1.5 and hands
    /// the output block to `sink` together with per-column flags carrying the
    /// step at which a column first went non-finite (such columns hold their
    /// last good output from then on).
    ///
    /// `first_inputs` is the (d × B) block of final guiding samples.
    pub fn closed_loop(
        &self,
        states: &mut Array2<f64>,
        first_inputs: Array2<f64>,
        steps: usize,
        mut sink: impl FnMut(usize, ArrayView2<f64>, &[Option<usize>]),
    ) -> Vec<Option<usize>> {
        let w_out = self.w_out.expect("closed loop requires a readout");
        let b = states.ncols();
        let d = self.d();
        let mut u = first_inputs;
        let mut z = Array2::<f64>::zeros((self.n(), b));
        let mut rt = Array2::<f64>::zeros((self.n(), b));
        let mut v = Array2::<f64>::zeros((d, b));
        let mut flagged: Vec<Option<usize>> = vec![None; b];
        for k in 0..steps {
            self.open_loop_step(states, u.view(), &mut z);
            rt.assign(states);
            for mut col in rt.columns_mut() {
                transform_in_place(&mut col);
            }
            general_mat_mul(1.0, w_out, &rt, 0.0, &mut v);
            for j in 0..b {
                let bad = flagged[j].is_some() || v.column(j).iter().any(|x| !x.is_finite());
                if bad {
                    if flagged[j].is_none() {
                        flagged[j] = Some(k);
                    }
                    // hold the last good (already clamped) output
                    let prev = u.column(j).to_owned();
                    v.column_mut(j).assign(&prev);
                } else {
                    for x in v.column_mut(j).iter_mut() {
                        *x = x.clamp(-FEEDBACK_CLAMP, FEEDBACK_CLAMP);
                    }
                }
            }
            sink(k, v.view(), &flagged);
            u.assign(&v);
        }
        flagged
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::{build_matrices, random_state, Hyperparams, MatrixSeeds};
    use approx::assert_abs_diff_eq;

    #[test]
    fn batch_matches_single_column_path() {
        let hp = Hyperparams {
            n: 24,
            d: 2,
            connectivity: 0.4,
            spectral_radius: 0.9,
            input_scale: 1.2,
            leak: 0.6,
            ridge: 1e-6,
        };
        let mats = build_matrices(&hp, MatrixSeeds { input: 1, adjacency: 2, init_state: 3 }).unwrap();
        let w_out = Array2::from_shape_fn((2, 24), |(i, j)| ((i + j) as f64 * 0.13).sin() * 0.2);
        let driver = BatchDriver::new(&mats, hp.leak, Some(&w_out));

        let mut rng = crate::rng::seeded(7);
        let cols = 5;
        let mut states = Array2::<f64>::zeros((24, cols));
        let mut singles = Vec::new();
        for j in 0..cols {
            let s = random_state(24, &mut rng);
            states.column_mut(j).assign(&s);
            singles.push(s);
        }
        let first = Array2::from_shape_fn((2, cols), |(i, j)| 0.1 * (i as f64 + 1.0) * (j as f64 - 2.0));

        let mut batch_out = vec![Vec::new(); cols];
        driver.closed_loop(&mut states, first.clone(), 30, |_, v, _| {
            for j in 0..cols {
                batch_out[j].push([v[[0, j]], v[[1, j]]]);
            }
        });

        for j in 0..cols {
            let mut state = singles[j].clone();
            let mut input = first.column(j).to_owned();
            for k in 0..30 {
                state = crate::reservoir::reservoir_step(&state, input.view(), &mats, hp.leak);
                let mut v = w_out.dot(&crate::reservoir::state_transform(&state));
                v.mapv_inplace(|x| x.clamp(-FEEDBACK_CLAMP, FEEDBACK_CLAMP));
                assert_abs_diff_eq!(v[0], batch_out[j][k][0], epsilon = 1e-12);
                assert_abs_diff_eq!(v[1], batch_out[j][k][1], epsilon = 1e-12);
                input = v;
            }
        }
    }

    #[test]
    fn states_stay_bounded() {
        let hp = Hyperparams {
            n: 16,
            d: 2,
            connectivity: 0.5,
            spectral_radius: 2.5,
            input_scale: 3.0,
            leak: 0.9,
            ridge: 1e-6,
        };
        let mats = build_matrices(&hp, MatrixSeeds { input: 4, adjacency: 5, init_state: 6 }).unwrap();
        let driver = BatchDriver::new(&mats, hp.leak, None);
        let mut states = Array2::<f64>::from_elem((16, 3), 0.999);
        driver.open_loop(&mut states, 40, |k, u| {
            u.fill(if k % 2 == 0 { 1e6 } else { -1e6 });
        });
        assert!(states.iter().all(|v| v.abs() <= 1.0));
    }
}
