//! Experiment harness: plant setup, seeded initial states, the
//! method x delta x e_bar x q_bar sweep and its CSV reports.

mod report;
mod sweep;

pub use report::{
    bounds_report, emit_tables, emit_timeseries, read_summary, timing_report, write_bounds_csv, write_report_header,
    write_timing_csv, BoundsConfig, BoundsReport, SummaryRow, TimingReport, TimingRow,
};
pub use sweep::{run_sweep, CellKey, CellStats, RunOutcome};

use std::path::PathBuf;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clf::{
    compute_ball_radii, estimate_dynamics_bound, estimate_lipschitz_dynamics, estimate_lipschitz_l, estimate_min_decay,
    fit_kinfty_envelope, BallRadii, Clf, DecayOptions, EstimatorReport, KInftyEnvelope, RadiiOptions,
    RegularityConstants,
};
use crate::controllers::{ControlGrid, Method, StabilizerConfig};
use crate::error::{Result, StabError};
use crate::rng::{self, StreamTag};
use crate::systems::{clf_by_name, system_by_name, ControlledSystem, InputBox, NoiseMode};
use crate::vector::{self, StateVec};

/// Norm of `(-1, 0.5, 0.2, 0.1, 0.1)`, the benchmark's starting radius.
pub fn benchmark_start_radius() -> f64 {
    vector::norm(&[-1.0, 0.5, 0.2, 0.1, 0.1])
}

/// Scalar summary of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Mean of `|x_k|` over the sampling instants in the last quarter of
    /// the horizon.
    #[default]
    TailAverageNorm,
    TerminalNorm,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::TailAverageNorm => "tail-average-norm",
            Metric::TerminalNorm => "terminal-norm",
        }
    }

    pub fn other(self) -> Self {
        match self {
            Metric::TailAverageNorm => Metric::TerminalNorm,
            Metric::TerminalNorm => Metric::TailAverageNorm,
        }
    }
}

/// Numerical settings of the plant setup (envelopes and radii) and of the
/// constant estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SetupOptions {
    pub n_shells: usize,
    pub samples_per_shell: usize,
    pub apriori_fraction: f64,
    pub sup_samples: usize,
    pub lipschitz_pairs: usize,
    pub decay_states: usize,
    /// Outer radius of the annulus for the decay estimate; `S_star` when
    /// unset.
    pub decay_outer_radius: Option<f64>,
    pub seed: u64,
}

impl Default for SetupOptions {
    fn default() -> Self {
        Self {
            n_shells: 32,
            samples_per_shell: 400,
            apriori_fraction: 0.125,
            sup_samples: 4000,
            lipschitz_pairs: 20_000,
            decay_states: 2000,
            decay_outer_radius: None,
            seed: 0,
        }
    }
}

/// Plant, CLF, fitted envelope and ball radii for one benchmark.
pub struct Plant {
    pub sys: Box<dyn ControlledSystem>,
    pub clf: Box<dyn Clf>,
    pub envelope: KInftyEnvelope,
    pub radii: BallRadii,
}

impl Plant {
    /// Look up the plant and CLF by name and fit envelopes on shells that
    /// cover the overshoot ball, widening them until they do.
    pub fn build(
        system: &str,
        clf_name: &str,
        input_bound: f64,
        s: f64,
        big_s: f64,
        opts: &SetupOptions,
    ) -> Result<Self> {
        if !(input_bound > 0.0) {
            return Err(StabError::Config(format!("input bound must be positive, got {input_bound}")));
        }
        if opts.n_shells < 2 {
            return Err(StabError::Config("need at least two envelope shells".into()));
        }
        let sys = system_by_name(system, InputBox::symmetric(2, input_bound))?;
        let clf = clf_by_name(clf_name)?;
        if clf.dim() != sys.state_dim() {
            return Err(StabError::Config(format!(
                "CLF '{}' has dimension {}, system has {}",
                clf_name,
                clf.dim(),
                sys.state_dim()
            )));
        }
        let radii_opts =
            RadiiOptions { apriori_fraction: opts.apriori_fraction, sup_samples: opts.sup_samples, seed: opts.seed };
        let inner = s / 50.0;
        let mut outer = 4.0 * big_s;
        for _ in 0..6 {
            let shells = geometric(inner, outer, opts.n_shells);
            let envelope = fit_kinfty_envelope(&*clf, &shells, opts.samples_per_shell, opts.seed)?;
            let radii = compute_ball_radii(&envelope, &*clf, s, big_s, &radii_opts)?;
            if radii.big_s_star <= outer {
                return Ok(Self { sys, clf, envelope, radii });
            }
            outer = 2.0 * radii.big_s_star;
        }
        Err(StabError::NumericDomain(format!(
            "envelope shells do not cover the overshoot ball (reached radius {outer})"
        )))
    }

    pub fn from_spec(spec: &ExperimentSpec) -> Result<Self> {
        Self::build(&spec.system, &spec.clf, spec.input_bound, spec.s, spec.big_s, &spec.setup)
    }

    /// Lipschitz constants and dynamics bound on `B_{S_star}` and the
    /// minimum decay rate on the annulus.
    pub fn constants(&self, grid: &ControlGrid, opts: &SetupOptions) -> Result<(RegularityConstants, EstimatorReport)> {
        let r = self.radii.big_s_star;
        let lip_l = estimate_lipschitz_l(&*self.clf, r, opts.lipschitz_pairs, opts.seed)?;
        let lip_f = estimate_lipschitz_dynamics(&*self.sys, r, grid, opts.lipschitz_pairs, opts.seed)?;
        let m_dyn = estimate_dynamics_bound(&*self.sys, r, grid, opts.lipschitz_pairs, opts.seed)?;
        let mut annulus = self.radii;
        if let Some(outer) = opts.decay_outer_radius {
            annulus.big_s_star = outer;
        }
        let decay = DecayOptions { n_states: opts.decay_states, seed: opts.seed, ..Default::default() };
        let w_bar = estimate_min_decay(&*self.clf, &*self.sys, &annulus, grid, &decay)?;
        let constants = RegularityConstants::new(lip_l, lip_f, w_bar, m_dyn)?;
        let mut report = constants.report();
        report.push("decay_outer_radius", annulus.big_s_star);
        for (k, v) in radii_entries(&self.radii) {
            report.push(k, v);
        }
        report.samples = (2 * opts.lipschitz_pairs + opts.lipschitz_pairs + opts.decay_states) as u64;
        report.seed = opts.seed;
        Ok((constants, report))
    }
}

pub(crate) fn radii_entries(r: &BallRadii) -> [(&'static str, f64); 10] {
    [
        ("s", r.s),
        ("s_hat", r.s_hat),
        ("ell_hat", r.ell_hat),
        ("s_star", r.s_star),
        ("S", r.big_s),
        ("S_star", r.big_s_star),
        ("L_hat", r.l_hat),
        ("L_hat_star", r.l_hat_star),
        ("e_hat", r.e_hat),
        ("q_hat", r.q_hat),
    ]
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = hi / lo;
    (0..n).map(|i| lo * ratio.powf(i as f64 / (n - 1) as f64)).collect()
}

/// A full sweep, as read from a TOML config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub system: String,
    pub clf: String,
    /// Inputs range over `[-input_bound, input_bound]^2`.
    pub input_bound: f64,
    pub methods: Vec<Method>,
    pub deltas: Vec<f64>,
    pub e_bars: Vec<f64>,
    pub q_bars: Vec<f64>,
    pub n_runs: usize,
    /// Starting radius.
    #[serde(rename = "S", alias = "big_s")]
    pub big_s: f64,
    /// Target radius.
    pub s: f64,
    pub seed: u64,
    pub t_end: f64,
    pub substeps: usize,
    pub noise_mode: NoiseMode,
    pub substep_disturbance: bool,
    pub metric: Metric,
    /// Share of the horizon averaged by the tail metric.
    pub tail_fraction: f64,
    /// Start every run from the first generated initial state.
    pub identical_initials: bool,
    /// Run one simulation at a time so per-run wall times are meaningful.
    pub serial_timing: bool,
    /// Also write one CSV per run under `output_dir/runs`.
    pub save_trajectories: bool,
    pub output_dir: PathBuf,
    pub stabilizer: StabilizerConfig,
    pub setup: SetupOptions,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            system: "endi".into(),
            clf: "endi-clf".into(),
            input_bound: 1.0,
            methods: Method::ALL.to_vec(),
            deltas: vec![0.25, 0.5],
            e_bars: vec![0.0, 0.01, 0.1, 1.0],
            q_bars: vec![0.0, 0.01, 0.1, 1.0],
            n_runs: 20,
            big_s: benchmark_start_radius(),
            s: 0.5,
            seed: 0,
            t_end: 20.0,
            substeps: 20,
            noise_mode: NoiseMode::WorstCaseSphere,
            substep_disturbance: false,
            metric: Metric::TailAverageNorm,
            tail_fraction: 0.25,
            identical_initials: false,
            serial_timing: false,
            save_trajectories: false,
            output_dir: PathBuf::from("results"),
            stabilizer: StabilizerConfig::default(),
            setup: SetupOptions::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| StabError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(StabError::Config(msg));
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1".into());
        }
        if self.methods.is_empty() || self.deltas.is_empty() || self.e_bars.is_empty() || self.q_bars.is_empty() {
            return bad("methods, deltas, e_bars and q_bars must be nonempty".into());
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return bad(format!("sampling periods must be positive, got {d}"));
        }
        if let Some(v) = self.e_bars.iter().chain(&self.q_bars).find(|v| !(**v >= 0.0 && v.is_finite())) {
            return bad(format!("noise bounds must be non-negative, got {v}"));
        }
        if !(self.s > 0.0 && self.s < self.big_s && self.big_s.is_finite()) {
            return bad(format!("need 0 < s < S, got s={}, S={}", self.s, self.big_s));
        }
        let longest = self.deltas.iter().copied().fold(0.0, f64::max);
        if !(self.t_end >= longest) {
            return bad(format!("t_end ({}) is shorter than a sampling period", self.t_end));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return bad(format!("tail_fraction must be in (0, 1], got {}", self.tail_fraction));
        }
        if self.substeps < 4 {
            return bad(format!("need >= 4 substeps, got {}", self.substeps));
        }
        Ok(())
    }
}

/// `n` points uniform on the sphere of radius `big_s` in `R^dim`: Gaussian
/// draws rescaled to norm `big_s`. Point `i` only depends on `(seed, i)`.
pub fn generate_initials(n: usize, big_s: f64, dim: usize, seed: u64) -> Result<Vec<StateVec>> {
    if n == 0 || dim == 0 || !(big_s > 0.0 && big_s.is_finite()) {
        return Err(StabError::Config(format!("need n >= 1, dim >= 1 and S > 0, got n={n}, dim={dim}, S={big_s}")));
    }
    Ok((0..n)
        .map(|i| {
            let mut rng = rng::stream(seed, StreamTag::InitialState, i as u64, 0);
            loop {
                let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let len = vector::normalize(&mut v);
                if len > 1e-12 {
                    v.iter_mut().for_each(|x| *x *= big_s);
                    break StateVec(v);
                }
            }
        })
        .collect())
}
