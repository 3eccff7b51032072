use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_initials, ExperimentSpec, Metric, Plant};
use crate::controllers::{Controller, Method, StabilizerConfig};
use crate::error::{Result, StabError};
use crate::sim::{run_closed_loop, run_file_name, SimConfig, TrajectoryRecord};
use crate::systems::NoiseModel;
use crate::vector::StateVec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub method: Method,
    pub delta: f64,
    pub e_bar: f64,
    pub q_bar: f64,
}

/// Result of one closed-loop run inside a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_index: u64,
    pub tail_average_norm: f64,
    pub terminal_norm: f64,
    /// `|x_k|` at every sampling instant reached.
    pub norms: Vec<f64>,
    pub wall_time: f64,
    pub failure: Option<String>,
}

impl RunOutcome {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::TailAverageNorm => self.tail_average_norm,
            Metric::TerminalNorm => self.terminal_norm,
        }
    }
}

/// Aggregates of one sweep cell over its runs. A failed run makes the
/// scalar statistics NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub key: CellKey,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    /// The same statistics for the other metric.
    pub alt_mean: f64,
    pub alt_std: f64,
    pub times: Vec<f64>,
    pub mean_norm: Vec<f64>,
    pub std_norm: Vec<f64>,
    /// Mean wall-clock seconds per run.
    pub wall_time: f64,
    pub runs: Vec<RunOutcome>,
}

impl CellStats {
    pub fn from_runs(key: CellKey, metric: Metric, n_steps: usize, runs: Vec<RunOutcome>) -> Self {
        let values = |m: Metric| runs.iter().map(|r| r.metric(m)).collect::<Vec<_>>();
        let (mean, std) = mean_std(&values(metric));
        let (alt_mean, alt_std) = mean_std(&values(metric.other()));
        let mut mean_norm = Vec::with_capacity(n_steps + 1);
        let mut std_norm = Vec::with_capacity(n_steps + 1);
        for k in 0..=n_steps {
            let column: Vec<f64> = runs.iter().map(|r| r.norms.get(k).copied().unwrap_or(f64::NAN)).collect();
            let (m, s) = mean_std(&column);
            mean_norm.push(m);
            std_norm.push(s);
        }
        let wall_time = runs.iter().map(|r| r.wall_time).sum::<f64>() / runs.len().max(1) as f64;
        Self {
            key,
            metric,
            mean,
            std,
            alt_mean,
            alt_std,
            times: (0..=n_steps).map(|k| k as f64 * key.delta).collect(),
            mean_norm,
            std_norm,
            wall_time,
            runs,
        }
    }

    pub fn n_failed(&self) -> usize {
        self.runs.iter().filter(|r| r.failure.is_some()).count()
    }
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    if v.iter().all(|x| x.to_bits() == v[0].to_bits()) && !v[0].is_nan() {
        return (v[0], 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, if mean.is_nan() { f64::NAN } else { 0.0 });
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean of `|x_k|` over the samples with `t_k >= (1 - fraction) t_end`.
pub(crate) fn tail_average(rec: &TrajectoryRecord, t_end: f64, fraction: f64) -> f64 {
    let from = (1.0 - fraction) * t_end - 1e-9 * t_end;
    let tail: Vec<f64> =
        rec.times.iter().zip(&rec.states).filter(|(t, _)| **t >= from).map(|(_, x)| x.norm()).collect();
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Run every cell of the sweep. Cells are ordered method-major, then
/// delta, e_bar, q_bar as listed in the spec; runs within a cell by index.
/// All methods see the same initial states and noise realizations.
pub fn run_sweep(spec: &ExperimentSpec, plant: &Plant) -> Result<Vec<CellStats>> {
    spec.validate()?;
    let dim = plant.sys.state_dim();
    let initials = generate_initials(spec.n_runs, spec.big_s, dim, spec.seed)?;
    let x0_of = |run: usize| -> &StateVec {
        if spec.identical_initials {
            &initials[0]
        } else {
            &initials[run]
        }
    };

    let mut controllers: Vec<(Method, f64, Box<dyn Controller + '_>)> = Vec::new();
    for &method in &spec.methods {
        for &delta in &spec.deltas {
            let cfg = StabilizerConfig { method, ..spec.stabilizer.clone() };
            controllers.push((method, delta, cfg.build(&*plant.sys, &*plant.clf, delta)?));
        }
    }
    let mut cells = Vec::new();
    for (ci, &(method, delta, _)) in controllers.iter().enumerate() {
        for &e_bar in &spec.e_bars {
            for &q_bar in &spec.q_bars {
                cells.push((ci, CellKey { method, delta, e_bar, q_bar }));
            }
        }
    }
    let runs_dir = spec.output_dir.join("runs");
    if spec.save_trajectories {
        std::fs::create_dir_all(&runs_dir)?;
    }

    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..spec.n_runs).map(move |r| (c, r))).collect();
    let run_job = |&(c, run): &(usize, usize)| -> Result<RunOutcome> {
        let (ci, key) = cells[c];
        let controller = &*controllers[ci].2;
        let cfg = SimConfig {
            delta: key.delta,
            t_end: spec.t_end,
            substeps: spec.substeps,
            noise: NoiseModel::new(key.e_bar, key.q_bar, spec.noise_mode, spec.seed),
            seed: spec.seed,
            run_index: run as u64,
            substep_disturbance: spec.substep_disturbance,
            decay_threshold: 0.0,
        };
        let start = Instant::now();
        let result = run_closed_loop(&*plant.sys, &*plant.clf, controller, x0_of(run), &cfg, &plant.radii);
        let wall_time = start.elapsed().as_secs_f64();
        let (rec, failure) = match result {
            Ok((rec, _)) => (rec, None),
            Err(f) => (f.partial, Some(f.error.to_string())),
        };
        if spec.save_trajectories {
            let name = run_file_name(key.method.as_str(), key.delta, key.e_bar, key.q_bar, run as u64);
            save_run(&rec, &runs_dir.join(name))?;
        }
        let (tail, terminal) = match failure {
            Some(_) => (f64::NAN, f64::NAN),
            None => {
                (tail_average(&rec, spec.t_end, spec.tail_fraction), rec.states.last().map_or(f64::NAN, |x| x.norm()))
            }
        };
        Ok(RunOutcome {
            run_index: run as u64,
            tail_average_norm: tail,
            terminal_norm: terminal,
            norms: rec.norms(),
            wall_time,
            failure,
        })
    };
    let outcomes: Vec<Result<RunOutcome>> =
        if spec.serial_timing { jobs.iter().map(run_job).collect() } else { jobs.par_iter().map(run_job).collect() };

    let mut outcomes = outcomes.into_iter();
    let mut stats = Vec::with_capacity(cells.len());
    for &(_, key) in &cells {
        let runs = outcomes.by_ref().take(spec.n_runs).collect::<Result<Vec<_>>>()?;
        let n_steps = (spec.t_end / key.delta + 1e-9).floor() as usize;
        stats.push(CellStats::from_runs(key, spec.metric, n_steps, runs));
    }
    Ok(stats)
}

fn save_run(rec: &TrajectoryRecord, path: &Path) -> Result<()> {
    rec.save_csv(path).map_err(|e| match e {
        StabError::Io(io) => StabError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}
