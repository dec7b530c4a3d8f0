//! End-to-end experiment orchestration behind the `brc` binary.
//!
//! Every subcommand is a thin, reusable function over the library: parse and
//! validate the config, fan the master seed out to the stages, run, and
//! write artifacts (all stamped with the config digest) under
//! `<out>/<experiment-id>/`.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::basin::{
    self, dataset_file, generate_dataset, ground_truth_basin, infer_basin, noise_sweep, sweep_csv,
    BasinError, BasinMap, Dataset, SweepInputs,
};
use crate::config::ExperimentConfig;
use crate::hyperopt::{self, trial_log_csv, EvalContext, SearchError};
use crate::objective::ObjectiveError;
use crate::reservoir::{MachineFileError, Provenance, ReservoirError, TrainedMachine};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "BRC_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Basin(#[from] BasinError),
    #[error(transparent)]
    Reservoir(#[from] ReservoirError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("machine file: {0}")]
    MachineFile(#[from] MachineFileError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config section `{0}` is required for this subcommand")]
    MissingSection(&'static str),
    #[error("verification failed: {0} check(s) did not pass")]
    VerifyFailed(usize),
}

/// A parsed config plus the resolved output directory.
pub struct RunContext {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
}

impl RunContext {
    /// Load `path`, apply overrides, resolve the output directory
    /// (`--out` > config `out_dir` > `$BRC_OUT_DIR` > `./runs`).
    pub fn load(
        path: &Path,
        seed_override: Option<u64>,
        out_override: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let mut config = ExperimentConfig::parse(&text)?;
        if let Some(seed) = seed_override {
            config.master_seed = seed;
        }
        let root = out_override
            .or_else(|| config.out_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"));
        let out_dir = root.join(&config.id);
        Ok(RunContext { config, out_dir })
    }

    pub fn from_config(config: ExperimentConfig, out_dir: PathBuf) -> Self {
        RunContext { out_dir: out_dir.join(&config.id), config }
    }

    fn ensure_out(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(())
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn provenance(&self, data_digest: String) -> Provenance {
        Provenance {
            experiment_id: self.config.id.clone(),
            config_digest: self.config.digest(),
            data_digest,
        }
    }
}

/// Generate and write both datasets; byte-identical across reruns.
pub fn gen_data(ctx: &RunContext) -> Result<(Dataset, Dataset), CliError> {
    ctx.ensure_out()?;
    let spec = ctx.config.dataset_spec();
    let (train, test) = generate_dataset(&spec)?;
    let digest = ctx.config.digest();
    for (name, ds) in [("train.dataset", &train), ("test.dataset", &test)] {
        let path = ctx.artifact(name);
        std::fs::write(&path, dataset_file(ds, &ctx.config.id, &digest))?;
        println!(
            "wrote {} ({} series, data digest {})",
            path.display(),
            ds.series.len(),
            ds.digest()
        );
    }
    Ok((train, test))
}

/// Compute and write the model-simulation reference map.
pub fn ground_truth(ctx: &RunContext) -> Result<BasinMap, CliError> {
    ctx.ensure_out()?;
    let map = ground_truth_basin(
        &ctx.config.system,
        ctx.config.dataset.dt,
        &ctx.config.grid,
        &ctx.config.protocol(),
        &ctx.config.digest(),
        ctx.config.master_seed,
    )?;
    std::fs::write(ctx.artifact("basin_true.csv"), map.to_csv())?;
    std::fs::write(ctx.artifact("basin_true.pgm"), map.to_pgm(&map.true_labels))?;
    println!(
        "wrote {} ({} cells, undecided fraction {:.4})",
        ctx.artifact("basin_true.csv").display(),
        map.grid.cell_count(),
        map.undecided_fraction()
    );
    Ok(map)
}

/// Train one machine from the explicit hyperparameters and save it.
pub fn train(ctx: &RunContext, machine_index: u64) -> Result<(TrainedMachine, PathBuf), CliError> {
    ctx.ensure_out()?;
    let hp = ctx.config.hyperparams().ok_or(CliError::MissingSection("machine"))?;
    let spec = ctx.config.dataset_spec();
    let (train_ds, _test_ds) = generate_dataset(&spec)?;
    let plan = ctx.config.seed_plan();
    let machine = TrainedMachine::train(
        &hp,
        plan.machine_seeds(machine_index),
        &train_ds.series_refs(),
        ctx.config.dataset.listen_len,
        ctx.config.beta,
        train_ds.normalization.clone(),
        ctx.provenance(train_ds.digest()),
    )?;
    let path = ctx.artifact("machine.brcm");
    machine.save(&path)?;
    println!("wrote {}", path.display());
    Ok((machine, path))
}

/// Run the hyperparameter search, write the trial log, save the best machine.
pub fn search(ctx: &RunContext, strategy_override: Option<hyperopt::Strategy>) -> Result<PathBuf, CliError> {
    ctx.ensure_out()?;
    let space = ctx.config.search_space().ok_or(CliError::MissingSection("search"))?;
    let strategy = strategy_override
        .or_else(|| ctx.config.search.as_ref().map(|s| s.strategy))
        .unwrap_or(hyperopt::Strategy::Random);
    let spec = ctx.config.dataset_spec();
    let (train_ds, test_ds) = generate_dataset(&spec)?;
    let training = train_ds.series_refs();
    let testing = test_ds.series_refs();
    let eval = EvalContext {
        training: &training,
        testing: &testing,
        listen_len: ctx.config.dataset.listen_len,
        validation_horizon: ctx.config.protocol.validation_horizon,
        tau: ctx.config.protocol.tau,
        sync_realizations: ctx.config.protocol.sync_realizations,
        beta: ctx.config.beta,
        search_seed: space.seed,
        normalization: train_ds.normalization.clone(),
        provenance: ctx.provenance(train_ds.digest()),
    };
    println!(
        "searching {} trials ({:?}) over {} series",
        space.trial_budget,
        strategy,
        training.len()
    );
    let mut outcome = hyperopt::search(&space, &eval, strategy)?;
    let best = outcome.best_record();
    println!(
        "best candidate {}: balanced error {} (prediction {}, synchronization {})",
        best.candidate_id, best.report.balanced, best.report.prediction, best.report.synchronization
    );
    let machine = hyperopt::train_candidate(&best.hp, &eval, best.candidate_id)?;
    let machine_path = ctx.artifact("machine.brcm");
    machine.save(&machine_path)?;
    let best_idx = outcome.best;
    outcome.trials[best_idx].machine_path = Some(machine_path.clone());
    std::fs::write(ctx.artifact("trials.csv"), trial_log_csv(&outcome.trials))?;
    println!("wrote {}", ctx.artifact("trials.csv").display());
    println!("best machine: {}", machine_path.display());
    Ok(machine_path)
}

/// Infer the basin map with a trained machine (loaded from `machine_path`
/// or trained fresh from the config) and write map artifacts.
pub fn infer(ctx: &RunContext, machine_path: Option<&Path>) -> Result<BasinMap, CliError> {
    ctx.ensure_out()?;
    let machine = match machine_path {
        Some(p) => TrainedMachine::load(p)?,
        None => train(ctx, 0)?.0,
    };
    let truth = ground_truth_basin(
        &ctx.config.system,
        ctx.config.dataset.dt,
        &ctx.config.grid,
        &ctx.config.protocol(),
        &ctx.config.digest(),
        ctx.config.master_seed,
    )?;
    let plan = ctx.config.seed_plan();
    let map = infer_basin(
        &machine,
        &ctx.config.system,
        &ctx.config.grid,
        &ctx.config.protocol(),
        &truth,
        plan.infer_seeds(0),
    )?;
    std::fs::write(ctx.artifact("basin.csv"), map.to_csv())?;
    std::fs::write(ctx.artifact("basin_true.pgm"), map.to_pgm(&map.true_labels))?;
    if let Some(pred) = &map.predicted {
        std::fs::write(ctx.artifact("basin_pred.pgm"), map.to_pgm(pred))?;
    }
    let accuracy = map.accuracy.unwrap_or(f64::NAN);
    println!("accuracy = {accuracy:.4}");
    println!("wrote {}", ctx.artifact("basin.csv").display());
    Ok(map)
}

/// Run the stochastic-resonance sweep and write the accuracy table.
pub fn sweep_noise(ctx: &RunContext) -> Result<basin::SweepTable, CliError> {
    ctx.ensure_out()?;
    let sweep = ctx.config.sweep.clone().ok_or(CliError::MissingSection("sweep"))?;
    let hp = ctx.config.hyperparams().ok_or(CliError::MissingSection("machine"))?;
    let spec = ctx.config.dataset_spec();
    let protocol = ctx.config.protocol();
    let inputs = SweepInputs {
        dataset: &spec,
        hp,
        beta: ctx.config.beta,
        grid: &ctx.config.grid,
        protocol: &protocol,
        master_seed: ctx.config.master_seed,
        config_digest: ctx.config.digest(),
        experiment_id: ctx.config.id.clone(),
    };
    let table = noise_sweep(&inputs, &sweep.amplitudes, sweep.realizations)?;
    for row in &table.rows {
        println!(
            "D0 = {:>9}: accuracy {:.4} (variance {:.6}, {} realizations)",
            row.amplitude, row.mean_accuracy, row.variance, row.realizations_used
        );
    }
    for (d0, r, why) in &table.failures {
        println!("excluded: D0 = {d0}, realization {r}: {why}");
    }
    std::fs::write(
        ctx.artifact("sweep.csv"),
        sweep_csv(&table, &ctx.config.digest(), ctx.config.master_seed),
    )?;
    println!("wrote {}", ctx.artifact("sweep.csv").display());
    Ok(table)
}

/// Deterministic invariant suite behind `brc verify`; prints one line per
/// check and errs if any fails.
pub fn verify() -> Result<(), CliError> {
    let checks = crate::verify::run_all();
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!("{} {}{}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}
