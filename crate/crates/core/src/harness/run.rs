//! Replicated trajectories, per-checkpoint metrics, and their on-disk form.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::inference::confidence_interval;
use crate::models::GroundTruth;
use crate::newton::run_trajectory;

use super::config::ExperimentConfig;

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRIALS_HEADER: [&str; 9] = [
    "rep", "t", "phi_t", "mae", "center", "lo", "hi", "covered", "ci_len",
];

/// One checkpoint of one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub rep: usize,
    pub t: u64,
    pub phi_t: f64,
    /// `(1/d) Σ |x_t,i − x*_i|`
    pub mae: f64,
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    pub covered: bool,
    pub ci_len: f64,
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub rep: usize,
    pub seed: u64,
    pub rows: Vec<TrialRow>,
    /// `x_t` at each checkpoint, in checkpoint order.
    pub iterates: Vec<Vec<f64>>,
    /// `Σ̂` at the last checkpoint.
    pub terminal_sigma_hat: crate::SymMat,
    pub ridge_steps: u64,
    pub param_fallbacks: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointSummary {
    pub t: u64,
    pub phi_t: f64,
    pub mae_mean: f64,
    pub mae_se: f64,
    pub coverage_pct: f64,
    pub coverage_se: f64,
    pub ci_len_mean: f64,
    pub ci_len_se: f64,
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub checkpoints: Vec<CheckpointSummary>,
    pub reps: usize,
    pub ridge_steps: u64,
    pub param_fallbacks: u64,
    pub config: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub summary: Summary,
    pub trials: Vec<TrialResult>,
    pub ground_truth: GroundTruth<f64>,
}

impl TrialResult {
    /// Iterate at the last checkpoint.
    pub fn terminal(&self) -> &[f64] {
        self.iterates.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Experiment {
    /// Terminal iterates in rep order.
    pub fn terminals(&self) -> Vec<Vec<f64>> {
        self.trials.iter().map(|t| t.terminal().to_vec()).collect()
    }
}

/// `w = (1/d)·1`, the coordinate-wise mean functional.
pub fn mean_functional(d: usize) -> Vec<f64> {
    vec![1.0 / d as f64; d]
}

pub fn rep_seed(cfg: &ExperimentConfig, rep: usize) -> u64 {
    cfg.seed.wrapping_add(rep as u64)
}

pub fn run_trial(cfg: &ExperimentConfig, gt: &GroundTruth<f64>, rep: usize) -> Result<TrialResult> {
    let newton = cfg.newton()?;
    let checkpoints = cfg.checkpoint_set();
    let seed = rep_seed(cfg, rep);
    let traj = run_trajectory(gt, &newton, cfg.steps, &checkpoints, cfg.warmup, seed)?;
    let d = gt.dim();
    let w = mean_functional(d);
    let truth: f64 = w.iter().zip(gt.x_star()).map(|(a, b)| a * b).sum();
    let rows = traj
        .checkpoints
        .iter()
        .map(|cp| {
            let ci = confidence_interval(&w, &cp.x, &cp.sigma_hat, cp.phi_t, cfg.q)?;
            let mae =
                cp.x.iter()
                    .zip(gt.x_star())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / d as f64;
            Ok(TrialRow {
                rep,
                t: cp.t,
                phi_t: cp.phi_t,
                mae,
                center: ci.center,
                lo: ci.lo(),
                hi: ci.hi(),
                covered: ci.contains(truth),
                ci_len: ci.length(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let last = traj
        .checkpoints
        .last()
        .ok_or_else(|| Error::config("checkpoints", "empty checkpoint set"))?;
    Ok(TrialResult {
        rep,
        seed,
        rows,
        iterates: traj.checkpoints.iter().map(|cp| cp.x.clone()).collect(),
        terminal_sigma_hat: last.sigma_hat.clone(),
        ridge_steps: traj.final_state.ridge_steps,
        param_fallbacks: traj.final_state.param_fallbacks,
    })
}

fn mean_se(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = v.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates over reps. The result does not depend on rep order.
pub fn summarize(cfg: &ExperimentConfig, trials: &[TrialResult]) -> Summary {
    let cps = trials.first().map(|t| t.rows.len()).unwrap_or(0);
    let checkpoints = (0..cps)
        .map(|k| {
            let rows = trials.iter().map(move |tr| &tr.rows[k]);
            let (mae_mean, mae_se) = mean_se(rows.clone().map(|r| r.mae));
            let (ci_len_mean, ci_len_se) = mean_se(rows.clone().map(|r| r.ci_len));
            let n = trials.len() as f64;
            let p = rows.clone().filter(|r| r.covered).count() as f64 / n;
            let first = &trials[0].rows[k];
            CheckpointSummary {
                t: first.t,
                phi_t: first.phi_t,
                mae_mean,
                mae_se,
                coverage_pct: 100.0 * p,
                coverage_se: 100.0 * (p * (1.0 - p) / n).sqrt(),
                ci_len_mean,
                ci_len_se,
            }
        })
        .collect();
    Summary {
        checkpoints,
        reps: trials.len(),
        ridge_steps: trials.iter().map(|t| t.ridge_steps).sum(),
        param_fallbacks: trials.iter().map(|t| t.param_fallbacks).sum(),
        config: cfg.echo(),
    }
}

impl Summary {
    pub fn final_checkpoint(&self) -> Option<&CheckpointSummary> {
        self.checkpoints.last()
    }

    /// Flat `key -> value` form written to `summary.json`.
    pub fn to_flat(&self) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        for (k, v) in &self.config {
            m.insert(format!("config.{k}"), Value::from(v.clone()));
        }
        let seed: u64 = self
            .config
            .get("seed")
            .and_then(|s| s.parse().ok())
            .unwrap_or(0);
        m.insert(
            "meta.code_version".into(),
            Value::from(env!("CARGO_PKG_VERSION")),
        );
        m.insert("meta.reps".into(), Value::from(self.reps));
        m.insert("meta.seed_first".into(), Value::from(seed));
        m.insert(
            "meta.seed_last".into(),
            Value::from(seed.wrapping_add(self.reps.saturating_sub(1) as u64)),
        );
        m.insert("meta.ridge_steps".into(), Value::from(self.ridge_steps));
        m.insert(
            "meta.param_fallbacks".into(),
            Value::from(self.param_fallbacks),
        );
        for c in &self.checkpoints {
            let p = format!("t{}", c.t);
            m.insert(format!("{p}.phi_t"), Value::from(c.phi_t));
            m.insert(format!("{p}.mae_mean"), Value::from(c.mae_mean));
            m.insert(format!("{p}.mae_se"), Value::from(c.mae_se));
            m.insert(format!("{p}.coverage_pct"), Value::from(c.coverage_pct));
            m.insert(format!("{p}.coverage_se"), Value::from(c.coverage_se));
            m.insert(format!("{p}.ci_len_mean"), Value::from(c.ci_len_mean));
            m.insert(format!("{p}.ci_len_se"), Value::from(c.ci_len_se));
        }
        m
    }
}

/// Runs every rep on a pool of `jobs` threads. Output order is rep order
/// whatever the scheduling. Writes artifacts when `cfg.out` is set.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Experiment> {
    cfg.validate()?;
    let gt = GroundTruth::linspace(&cfg.design_spec(), cfg.sigma2)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    let trials = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| run_trial(cfg, &gt, rep))
            .collect::<Result<Vec<_>>>()
    })?;
    let exp = Experiment {
        summary: summarize(cfg, &trials),
        trials,
        ground_truth: gt,
    };
    if let Some(dir) = &cfg.out {
        write_artifacts(dir, &exp)?;
    }
    Ok(exp)
}

pub fn write_artifacts(dir: &Path, exp: &Experiment) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_trials(&dir.join(TRIALS_FILE), &exp.trials)?;
    let path = dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&exp.summary.to_flat())
        .expect("string keys and finite values");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

pub fn write_trials(path: &Path, trials: &[TrialResult]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(TRIALS_HEADER).map_err(io)?;
    for r in trials.iter().flat_map(|t| &t.rows) {
        w.write_record([
            r.rep.to_string(),
            r.t.to_string(),
            format!("{:.17e}", r.phi_t),
            format!("{:.17e}", r.mae),
            format!("{:.17e}", r.center),
            format!("{:.17e}", r.lo),
            format!("{:.17e}", r.hi),
            u8::from(r.covered).to_string(),
            format!("{:.17e}", r.ci_len),
        ])
        .map_err(io)?;
    }
    let mut inner = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}
