use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{radii_entries, CellStats, ExperimentSpec, Metric, Plant, SetupOptions};
use crate::bounds::{
    bounds_table, dia_sampling_bounds, obc_fairness_q_bound, BoundInputs, BoundsRow, DiaSamplingBounds,
};
use crate::clf::{EstimatorReport, RegularityConstants};
use crate::controllers::{ControlGrid, Method};
use crate::error::{Result, StabError};

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

/// Explains the output files and the metric choice; written next to them.
pub fn write_report_header(spec: &ExperimentSpec, plant: &Plant, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut t = String::new();
    let _ = writeln!(t, "# Sweep report");
    let _ = writeln!(t, "#");
    let _ = writeln!(t, "# Scalar metric: {} (alternate: {}).", spec.metric.as_str(), spec.metric.other().as_str());
    let _ = writeln!(t, "# The published tables do not say whether their mean/std aggregate the terminal norm,");
    let _ = writeln!(
        t,
        "# a time average or something else. tail-average-norm averages |x(t_k)| over the last {}",
        spec.tail_fraction
    );
    let _ = writeln!(t, "# of the horizon; terminal-norm is |x(t_end)|. Both are in summary.csv.");
    let _ = writeln!(t, "# std uses the n-1 denominator. Failed runs make a cell NaN.");
    let _ = writeln!(t, "#");
    let _ = writeln!(
        t,
        "# system={} clf={} input_bound={} t_end={} substeps={} noise_mode={:?} seed={} n_runs={}",
        spec.system, spec.clf, spec.input_bound, spec.t_end, spec.substeps, spec.noise_mode, spec.seed, spec.n_runs
    );
    for (k, v) in radii_entries(&plant.radii) {
        let _ = writeln!(t, "{k}={v}");
    }
    let path = dir.join("report.txt");
    fs::write(&path, t)?;
    Ok(path)
}

/// One line of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub delta: f64,
    pub e_bar: f64,
    pub q_bar: f64,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub alt_metric: Metric,
    pub alt_mean: f64,
    pub alt_std: f64,
    pub failed_runs: usize,
}

fn descending(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    v
}

/// Per method and delta, the mean (`M`) and std (`D`) grids with rows
/// `e_bar` and columns `q_bar`, both descending, plus the long-format
/// `summary.csv`. Returns the written paths.
pub fn emit_tables(stats: &[CellStats], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let groups: BTreeSet<(Method, u64)> = stats.iter().map(|c| (c.key.method, c.key.delta.to_bits())).collect();
    for (method, delta_bits) in groups {
        let delta = f64::from_bits(delta_bits);
        let cells: Vec<&CellStats> = stats.iter().filter(|c| c.key.method == method && c.key.delta == delta).collect();
        let es = descending(cells.iter().map(|c| c.key.e_bar));
        let qs = descending(cells.iter().map(|c| c.key.q_bar));
        for (tag, pick) in [("M", true), ("D", false)] {
            let path = dir.join(format!("table_{}_delta{}_{}.csv", method, delta, tag));
            let mut w = csv::Writer::from_path(&path)?;
            let mut header = vec!["e_bar".to_string()];
            header.extend(qs.iter().map(|q| format!("q_bar={q}")));
            w.write_record(&header)?;
            for &e in &es {
                let mut row = vec![e.to_string()];
                for &q in &qs {
                    let cell = cells.iter().find(|c| c.key.e_bar == e && c.key.q_bar == q);
                    row.push(cell.map_or(String::new(), |c| fmt6(if pick { c.mean } else { c.std })));
                }
                w.write_record(&row)?;
            }
            w.flush()?;
            written.push(path);
        }
    }

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "method",
        "delta",
        "e_bar",
        "q_bar",
        "metric",
        "mean",
        "std",
        "alt_metric",
        "alt_mean",
        "alt_std",
        "failed_runs",
    ])?;
    for c in stats {
        w.write_record([
            c.key.method.to_string(),
            c.key.delta.to_string(),
            c.key.e_bar.to_string(),
            c.key.q_bar.to_string(),
            c.metric.as_str().to_string(),
            fmt6(c.mean),
            fmt6(c.std),
            c.metric.other().as_str().to_string(),
            fmt6(c.alt_mean),
            fmt6(c.alt_std),
            c.n_failed().to_string(),
        ])?;
    }
    w.flush()?;
    written.push(path);
    Ok(written)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(StabError::from)).collect()
}

/// Per cell, `t, mean_norm, lower, upper` with the band `mean +- std`, and
/// one gnuplot script per sampling period that draws every cell of that
/// period, one panel per method.
pub fn emit_timeseries(stats: &[CellStats], dir: &Path) -> Result<Vec<PathBuf>> {
    let ts_dir = dir.join("timeseries");
    fs::create_dir_all(&ts_dir)?;
    let mut written = Vec::new();
    for c in stats {
        let k = &c.key;
        let path = ts_dir.join(format!("{}_delta{}_e{}_q{}.csv", k.method, k.delta, k.e_bar, k.q_bar));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["t", "mean_norm", "lower", "upper"])?;
        for i in 0..c.times.len() {
            let (m, s) = (c.mean_norm[i], c.std_norm[i]);
            w.write_record([fmt6(c.times[i]), fmt6(m), fmt6(m - s), fmt6(m + s)])?;
        }
        w.flush()?;
        written.push(path);
    }

    let deltas: BTreeSet<u64> = stats.iter().map(|c| c.key.delta.to_bits()).collect();
    for bits in deltas {
        let delta = f64::from_bits(bits);
        let methods: Vec<Method> = Method::ALL
            .into_iter()
            .filter(|m| stats.iter().any(|c| c.key.method == *m && c.key.delta == delta))
            .collect();
        let mut g = String::new();
        let _ = writeln!(g, "set terminal pngcairo size {},400", 420 * methods.len());
        let _ = writeln!(g, "set output 'fig_delta{delta}.png'");
        let _ = writeln!(g, "set datafile separator ','");
        let _ = writeln!(g, "set key top right");
        let _ = writeln!(g, "set xlabel 't'");
        let _ = writeln!(g, "set ylabel '|x(t)|'");
        let _ = writeln!(g, "set style fill transparent solid 0.2 noborder");
        let _ = writeln!(g, "set multiplot layout 1,{}", methods.len());
        for m in methods {
            let _ = writeln!(g, "set title '{} (delta = {delta})'", m.as_str().to_uppercase());
            let mut parts = Vec::new();
            for c in stats.iter().filter(|c| c.key.method == m && c.key.delta == delta) {
                let f = format!("{}_delta{}_e{}_q{}.csv", m, delta, c.key.e_bar, c.key.q_bar);
                parts.push(format!("'{f}' every ::1 using 1:3:4 with filledcurves notitle"));
                parts.push(format!("'{f}' every ::1 using 1:2 with lines title 'e={} q={}'", c.key.e_bar, c.key.q_bar));
            }
            let _ = writeln!(g, "plot {}", parts.join(", \\\n     "));
        }
        let _ = writeln!(g, "unset multiplot");
        let path = ts_dir.join(format!("fig_delta{delta}.gp"));
        fs::write(&path, g)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: Method,
    pub delta: f64,
    /// Mean wall-clock seconds per run.
    pub mean_wall_time: f64,
    pub n_runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    /// OBC has the lowest per-run time at every sampling period where it
    /// and another method ran; `None` when there is nothing to compare.
    pub obc_fastest: Option<bool>,
}

pub fn timing_report(stats: &[CellStats]) -> TimingReport {
    let mut rows: Vec<TimingRow> = Vec::new();
    for c in stats {
        let n = c.runs.len();
        let total: f64 = c.runs.iter().map(|r| r.wall_time).sum();
        match rows.iter_mut().find(|r| r.method == c.key.method && r.delta == c.key.delta) {
            Some(r) => {
                r.mean_wall_time = (r.mean_wall_time * r.n_runs as f64 + total) / (r.n_runs + n) as f64;
                r.n_runs += n;
            }
            None => rows.push(TimingRow {
                method: c.key.method,
                delta: c.key.delta,
                mean_wall_time: total / n.max(1) as f64,
                n_runs: n,
            }),
        }
    }
    let mut verdict = None;
    for obc in rows.iter().filter(|r| r.method == Method::Obc) {
        for other in rows.iter().filter(|r| r.method != Method::Obc && r.delta == obc.delta) {
            let fastest = obc.mean_wall_time < other.mean_wall_time;
            verdict = Some(verdict.unwrap_or(true) && fastest);
        }
    }
    TimingReport { rows, obc_fastest: verdict }
}

pub fn write_timing_csv(report: &TimingReport, serial: bool, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "delta", "mean_wall_time_s", "n_runs", "serial_timing"])?;
    for r in &report.rows {
        w.write_record([
            r.method.to_string(),
            r.delta.to_string(),
            fmt6(r.mean_wall_time),
            r.n_runs.to_string(),
            serial.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Inputs of the `bounds` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub system: String,
    pub clf: String,
    pub input_bound: f64,
    #[serde(rename = "S", alias = "big_s")]
    pub big_s: f64,
    pub s: f64,
    pub deltas: Vec<f64>,
    pub r: f64,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    /// Disturbance level at which the coupled DiA envelope is evaluated.
    pub q_bar: f64,
    pub points_per_axis: usize,
    pub ell1: Option<f64>,
    pub ell2: Option<f64>,
    pub eps2: Option<f64>,
    pub eps3: Option<f64>,
    pub eps4: Option<f64>,
    pub c: Option<f64>,
    pub output_dir: PathBuf,
    pub setup: SetupOptions,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        let spec = ExperimentSpec::default();
        Self {
            system: spec.system,
            clf: spec.clf,
            input_bound: spec.input_bound,
            big_s: spec.big_s,
            s: spec.s,
            deltas: spec.deltas,
            r: 0.1,
            alpha: 0.1,
            c1: 1.0,
            c2: 1.0,
            q_bar: 0.0,
            points_per_axis: 21,
            ell1: None,
            ell2: None,
            eps2: None,
            eps3: None,
            eps4: None,
            c: None,
            output_dir: PathBuf::from("results"),
            setup: SetupOptions::default(),
        }
    }
}

impl BoundsConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| StabError::Config(e.to_string()))?;
        if cfg.deltas.is_empty() || cfg.deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(StabError::Config("deltas must be nonempty and positive".into()));
        }
        if !(cfg.q_bar >= 0.0) {
            return Err(StabError::Config(format!("q_bar must be non-negative, got {}", cfg.q_bar)));
        }
        Ok(cfg)
    }

    fn inputs(&self, constants: RegularityConstants, plant: &Plant, delta: f64) -> BoundInputs {
        let mut i = BoundInputs::from_radii(constants, &plant.radii, delta, self.r, self.alpha);
        i.c1 = self.c1;
        i.c2 = self.c2;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut i.ell1, self.ell1);
        set(&mut i.ell2, self.ell2);
        set(&mut i.eps2, self.eps2);
        set(&mut i.eps3, self.eps3);
        set(&mut i.eps4, self.eps4);
        set(&mut i.c, self.c);
        i
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub constants: RegularityConstants,
    pub estimates: EstimatorReport,
    pub q_bar: f64,
    pub sampling: DiaSamplingBounds,
    pub rows: Vec<BoundsRow>,
    /// `(delta, q bound)` of the cross-method fairness condition.
    pub fairness: Vec<(f64, f64)>,
}

pub fn bounds_report(cfg: &BoundsConfig) -> Result<BoundsReport> {
    let plant = Plant::build(&cfg.system, &cfg.clf, cfg.input_bound, cfg.s, cfg.big_s, &cfg.setup)?;
    let grid = ControlGrid::uniform(plant.sys.input_box(), cfg.points_per_axis)?;
    let (constants, estimates) = plant.constants(&grid, &cfg.setup)?;
    let mut rows = Vec::new();
    let mut fairness = Vec::new();
    let mut sampling = None;
    for &delta in &cfg.deltas {
        let inputs = cfg.inputs(constants, &plant, delta);
        sampling.get_or_insert(dia_sampling_bounds(&inputs)?);
        rows.extend(bounds_table(&inputs, cfg.q_bar)?);
        fairness.push((delta, obc_fairness_q_bound(&inputs)));
    }
    Ok(BoundsReport {
        constants,
        estimates,
        q_bar: cfg.q_bar,
        sampling: sampling.expect("deltas are nonempty"),
        rows,
        fairness,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |v| format!("{v:.6e}"))
}

fn note(row: &BoundsRow) -> &'static str {
    let e = &row.envelope;
    if e.empty {
        "coupled, empty"
    } else if e.coupled {
        "coupled"
    } else if e.structural {
        "structural q_max"
    } else {
        ""
    }
}

impl BoundsReport {
    /// Aligned text table, preceded by the estimated constants.
    pub fn to_text(&self) -> String {
        let mut t = String::new();
        let c = &self.constants;
        let _ =
            writeln!(t, "LipL = {:.6e}  Lipf = {:.6e}  w_bar = {:.6e}  M = {:.6e}", c.lip_l, c.lip_f, c.w_bar, c.m_dyn);
        let _ = writeln!(t, "DiA coupled envelope evaluated at q_bar = {}", self.q_bar);
        let _ = writeln!(
            t,
            "{:<6} {:>6} {:>14} {:>14} {:>14} {:>14}  note",
            "method", "delta", "e_max", "q_max", "delta_bar", "r_bar"
        );
        for r in &self.rows {
            let _ = writeln!(
                t,
                "{:<6} {:>6} {:>14.6e} {:>14.6e} {:>14} {:>14}  {}",
                r.method.as_str(),
                r.delta,
                r.envelope.e_max,
                r.envelope.q_max,
                opt(r.delta_bar),
                opt(r.r_bar),
                note(r)
            );
        }
        for (d, q) in &self.fairness {
            let _ = writeln!(t, "fairness q bound at delta = {d}: {q:.6e}");
        }
        t
    }
}

pub fn write_bounds_csv(report: &BoundsReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "delta",
        "q_bar",
        "e_max",
        "q_max",
        "delta_bar",
        "r_bar",
        "coupled",
        "empty",
        "structural",
    ])?;
    let cell = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
    for r in &report.rows {
        let e = &r.envelope;
        w.write_record([
            r.method.to_string(),
            r.delta.to_string(),
            report.q_bar.to_string(),
            format!("{:e}", e.e_max),
            format!("{:e}", e.q_max),
            cell(r.delta_bar),
            cell(r.r_bar),
            e.coupled.to_string(),
            e.empty.to_string(),
            e.structural.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
