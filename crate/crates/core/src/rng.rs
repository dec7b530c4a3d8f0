//! Seed fan-out for reproducible experiments.
//!
//! Every random draw in the crate comes from a ChaCha12 generator, which is
//! counter-based: a 64-bit seed selects the key and a 64-bit stream id selects
//! an independent substream under that key. One master seed per experiment
//! fans out to named stage seeds with [`derive`]; indexed draws inside a stage
//! (per series, per trial, per grid cell, per realization) use
//! [`stream`] with the index as the stream id. The layout makes every
//! result independent of worker scheduling: a cell or realization owns its
//! substream no matter which thread runs it.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Named stages hanging off an experiment master seed.
///
/// The numeric values are part of the on-disk reproducibility contract:
/// changing them changes every derived artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    /// Initial conditions for training-set sampling.
    TrainData = 1,
    /// Initial conditions for testing-set sampling.
    TestData = 2,
    /// Dynamical noise injected while generating training series.
    TrainNoise = 3,
    /// Dynamical noise injected while generating testing series.
    TestNoise = 4,
    /// Input-matrix entries of a reservoir.
    InputMatrix = 5,
    /// Adjacency-matrix entries of a reservoir.
    Adjacency = 6,
    /// Reservoir initial states used while training (one stream per series).
    TrainInitState = 7,
    /// Reservoir initial states drawn at prediction time (one stream per cell).
    PredictInitState = 8,
    /// Synchronization-error realizations (window choice + two states each).
    SyncRealization = 9,
    /// Hyperparameter draws of a search (one stream per trial).
    TrialSample = 10,
    /// Machine seeds derived per search trial.
    TrialMachine = 11,
    /// Dynamical noise injected into guiding series (one stream per cell).
    GuideNoise = 12,
    /// Per-realization reseeding inside a noise sweep.
    SweepRealization = 13,
    /// Reservoir initial states for prediction-error evaluation.
    EvalInitState = 14,
    /// Per-draw dynamical noise inside dataset generation.
    NoiseDraw = 15,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of a named sub-stage from a master seed.
///
/// Two independent index slots are folded in so that call sites can key a
/// stage by, say, (noise amplitude index, realization index) without manual
/// packing.
pub fn derive(master: u64, stage: Stage, index: u64) -> u64 {
    splitmix(splitmix(master ^ (stage as u64).wrapping_mul(GOLDEN)) ^ index)
}

/// Generator for stream 0 of `seed`.
pub fn seeded(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Generator for an explicit substream of `seed`.
///
/// Streams with distinct ids never overlap; this is what makes per-cell and
/// per-realization draws schedule-independent.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derive_is_stable() {
        // Frozen values: the reproducibility contract of every artifact.
        assert_eq!(derive(1, Stage::TrainData, 0), derive(1, Stage::TrainData, 0));
        assert_ne!(derive(1, Stage::TrainData, 0), derive(1, Stage::TestData, 0));
        assert_ne!(derive(1, Stage::TrainData, 0), derive(1, Stage::TrainData, 1));
        assert_ne!(derive(1, Stage::TrainData, 0), derive(2, Stage::TrainData, 0));
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: Vec<u64> = stream(7, 3).sample_iter(rand::distributions::Standard).take(8).collect();
        let b: Vec<u64> = stream(7, 3).sample_iter(rand::distributions::Standard).take(8).collect();
        let c: Vec<u64> = stream(7, 4).sample_iter(rand::distributions::Standard).take(8).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
