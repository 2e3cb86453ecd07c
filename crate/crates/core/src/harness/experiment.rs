//! Executing configs: one isolated sequential run per seed, seeds in parallel.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use super::analysis::{classify, RunStatus};
use super::config::{ExperimentConfig, Variant, SINGLE_RUN};
use super::output::{write_aggregate, write_trace};
use crate::distributed::run_dcsgd;
use crate::objectives::FiniteSumObjective;
use crate::optimizers::{run, Algorithm, RunOutcome, RunSpec, RunTrace, Sampling, StepRule};

/// Environment variable capping the number of seeds run concurrently.
pub const THREADS_ENV: &str = "CSGD_LAB_THREADS";

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// The config is well-formed but cannot be instantiated.
    #[error("variant `{variant}`: {message}")]
    Setup { variant: String, message: String },
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    /// Possibly partial when the run failed.
    pub trace: RunTrace,
    pub status: RunStatus,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub name: String,
    pub config: ExperimentConfig,
    pub iterations: usize,
    pub iterations_per_epoch: f64,
    pub seeds: Vec<SeedRun>,
}

impl VariantResult {
    pub fn failed(&self) -> impl Iterator<Item = &SeedRun> {
        self.seeds.iter().filter(|s| s.status == RunStatus::Failed)
    }

    pub fn count(&self, status: RunStatus) -> usize {
        self.seeds.iter().filter(|s| s.status == status).count()
    }
}

/// Seed-parallelism from `CSGD_LAB_THREADS`; unset or invalid means rayon's default.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0)
}

fn run_spec(cfg: &ExperimentConfig, iterations: usize) -> Result<RunSpec, String> {
    let comp = cfg.compression_spec().map_err(|e| e.to_string())?;
    let batch = Sampling::Stochastic { batch: cfg.batch.unwrap_or(1) };
    let armijo = StepRule::Armijo(cfg.armijo);
    let (step, sampling, verify) = match cfg.algorithm {
        Algorithm::CsgdAsss | Algorithm::SgdArmijo => (armijo, batch, true),
        Algorithm::ScaledGd => (armijo, Sampling::FullBatch, false),
        Algorithm::NonadaptiveCsgd => (StepRule::Fixed { eta: cfg.eta_fixed.unwrap_or(0.0) }, batch, true),
        Algorithm::DcsgdAsss => return Err("dcsgd_asss has no single-node spec".into()),
    };
    Ok(RunSpec { algorithm: cfg.algorithm, step, sampling, comp, iterations, verify_identity: verify })
}

/// One seed of a validated config on a prebuilt objective.
pub fn run_seed(obj: &FiniteSumObjective, cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun, String> {
    let iterations = cfg.total_iterations(obj.n());
    let mut trace = match cfg.algorithm {
        Algorithm::DcsgdAsss => {
            let comp = cfg.compression_spec().map_err(|e| e.to_string())?;
            run_dcsgd(obj, cfg.workers.unwrap_or(1), &cfg.armijo, &comp, iterations, seed)
                .map_err(|e| e.to_string())?
                .trace
        }
        _ => run(obj, &run_spec(cfg, iterations)?, seed, None).map_err(|e| e.to_string())?,
    };
    trace.header.seed = seed;
    trace.header.objective = Some(cfg.objective.clone());
    let status = classify(&trace);
    let error = match &trace.outcome {
        RunOutcome::Failed { error, .. } => Some(error.to_string()),
        _ => None,
    };
    Ok(SeedRun { seed, trace, status, error })
}

/// Every seed of `variant`, in seed-list order.
pub fn run_variant(variant: &Variant) -> Result<VariantResult, ExperimentError> {
    let setup = |message: String| ExperimentError::Setup { variant: variant.name.clone(), message };
    let cfg = &variant.config;
    let obj = cfg.objective.build().map_err(|e| setup(e.to_string()))?;
    if cfg.algorithm == Algorithm::DcsgdAsss {
        let w = cfg.workers.unwrap_or(1);
        if obj.n() % w != 0 {
            return Err(setup(format!("n = {} is not divisible by workers = {w}", obj.n())));
        }
    }
    let work = || -> Result<Vec<SeedRun>, String> { cfg.seeds.par_iter().map(|&s| run_seed(&obj, cfg, s)).collect() };
    let seeds = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| setup(e.to_string()))?
            .install(work),
        None => work(),
    }
    .map_err(setup)?;
    Ok(VariantResult {
        name: variant.name.clone(),
        config: cfg.clone(),
        iterations: cfg.total_iterations(obj.n()),
        iterations_per_epoch: cfg.iterations_per_epoch(obj.n()),
        seeds,
    })
}

/// Directory of a variant's files: `out` itself for a plain config.
pub fn variant_dir(out: &Path, result: &VariantResult, single: bool) -> PathBuf {
    if single && result.name == SINGLE_RUN {
        out.to_path_buf()
    } else {
        out.join(&result.name)
    }
}

fn io_err(path: &Path, e: impl ToString) -> ExperimentError {
    ExperimentError::Output { path: path.to_path_buf(), message: e.to_string() }
}

/// `seed_<s>.csv` per seed, `aggregate.csv` and `run.toml`.
pub fn write_variant(dir: &Path, result: &VariantResult) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    for s in &result.seeds {
        let path = dir.join(format!("seed_{}.csv", s.seed));
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        write_trace(BufWriter::new(file), &s.trace).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    let path = dir.join("aggregate.csv");
    let traces: Vec<&RunTrace> = result.seeds.iter().map(|s| &s.trace).collect();
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    write_aggregate(BufWriter::new(file), &traces, result.iterations_per_epoch).map_err(|e| io_err(&path, e))?;
    written.push(path);
    let path = dir.join("run.toml");
    fs::write(&path, run_manifest(result)).map_err(|e| io_err(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Resolved config plus one `[[seed]]` table per run.
pub fn run_manifest(result: &VariantResult) -> String {
    let mut doc = result.config.to_toml_string();
    let _ = writeln!(doc, "\n# resolved\niterations_total = {}", result.iterations);
    for s in &result.seeds {
        let _ = writeln!(doc, "\n[[seed]]\nseed = {}\nstatus = \"{}\"", s.seed, s.status);
        let _ = writeln!(doc, "steps = {}\nfinal_loss = {:?}", s.trace.records.len(), s.trace.final_loss);
        if let Some(e) = &s.error {
            let _ = writeln!(doc, "error = {:?}", e);
        }
    }
    doc
}

/// One line per seed plus a status tally.
pub fn summary(result: &VariantResult) -> String {
    let mut out = String::new();
    for s in &result.seeds {
        let f0 = s.trace.initial_loss();
        let _ = write!(
            out,
            "{} seed={} status={} steps={} f0={:.6e} f_final={:.6e} ratio={:.3e}",
            result.name,
            s.seed,
            s.status,
            s.trace.records.len(),
            f0,
            s.trace.final_loss,
            s.trace.final_loss / f0
        );
        if let Some(e) = &s.error {
            let _ = write!(out, " error=\"{e}\"");
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "{}: {} seeds, {} converged, {} not converged, {} diverged, {} failed",
        result.name,
        result.seeds.len(),
        result.count(RunStatus::Converged),
        result.count(RunStatus::NotConverged),
        result.count(RunStatus::Diverged),
        result.count(RunStatus::Failed)
    );
    out
}
