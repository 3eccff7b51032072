//! Sample-and-hold closed loop: hold `u_k = kappa(x_k + e_k)` over
//! `[k delta, (k+1) delta)` while integrating `x' = f(x, u_k) + q` with RK4.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clf::{BallRadii, Clf};
use crate::controllers::{Controller, StepSeed};
use crate::error::{Result, StabError};
use crate::systems::{ControlledSystem, NoiseModel};
use crate::vector::{norm, ControlVec, StateVec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Sampling period.
    pub delta: f64,
    pub t_end: f64,
    /// RK4 steps per sampling interval.
    pub substeps: usize,
    pub noise: NoiseModel,
    /// Seed for controller-internal randomness.
    pub seed: u64,
    pub run_index: u64,
    /// Redraw the disturbance on every RK4 substep instead of once per
    /// sampling interval.
    pub substep_disturbance: bool,
    /// A step counts as decaying when `L(x_{k+1}) - L(x_k) <= -decay_threshold`.
    pub decay_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            delta: 0.25,
            t_end: 20.0,
            substeps: 20,
            noise: NoiseModel::none(),
            seed: 0,
            run_index: 0,
            substep_disturbance: false,
            decay_threshold: 0.0,
        }
    }
}

impl SimConfig {
    /// Number of sampling intervals, `floor(t_end / delta)`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.delta + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(StabError::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.t_end >= self.delta) {
            return Err(StabError::Config(format!("t_end ({}) must be >= delta", self.t_end)));
        }
        if self.substeps < 4 {
            return Err(StabError::Config(format!("need >= 4 substeps, got {}", self.substeps)));
        }
        if !(self.noise.e_bar >= 0.0 && self.noise.q_bar >= 0.0) {
            return Err(StabError::Config("noise bounds must be non-negative".into()));
        }
        Ok(())
    }
}

/// Sampled closed-loop trajectory. `controls`, `measured` and `decay_flags`
/// have one entry per interval, the rest one per sampling instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub delta: f64,
    pub times: Vec<f64>,
    pub states: Vec<StateVec>,
    pub measured: Vec<StateVec>,
    pub controls: Vec<ControlVec>,
    pub clf_values: Vec<f64>,
    pub decay_flags: Vec<bool>,
    /// Largest `|x(t)|` seen on any RK4 substep.
    pub max_substep_norm: f64,
}

impl TrajectoryRecord {
    fn new(delta: f64, x0: &[f64], l0: f64) -> Self {
        Self {
            delta,
            times: vec![0.0],
            states: vec![StateVec::from(x0)],
            measured: Vec::new(),
            controls: Vec::new(),
            clf_values: vec![l0],
            decay_flags: Vec::new(),
            max_substep_norm: norm(x0),
        }
    }

    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|x| x.norm()).collect()
    }

    /// Write as CSV with columns `t, x1..xn, u1..um, L, decay_flag`. The
    /// input and flag cells of the final sample are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.states.first().map_or(0, |x| x.len());
        let m = self.controls.first().map_or(0, |u| u.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.push("L".into());
        header.push("decay_flag".into());
        w.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.states[k].iter().map(|v| v.to_string()));
            match self.controls.get(k) {
                Some(u) => row.extend(u.iter().map(|v| v.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), m)),
            }
            row.push(self.clf_values[k].to_string());
            row.push(self.decay_flags.get(k).map_or(String::new(), |f| u8::from(*f).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// `run_<method>_<delta>_<ebar>_<qbar>_<index>.csv`
pub fn run_file_name(method: &str, delta: f64, e_bar: f64, q_bar: f64, index: u64) -> String {
    format!("run_{method}_{delta}_{e_bar}_{q_bar}_{index}.csv")
}

/// Practical-stability predicates of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub entered_target: bool,
    /// First sampling time with `|x_k| <= s`.
    pub t_reach: Option<f64>,
    /// Every sample from `t_reach` on stays in the target ball.
    pub stayed: bool,
    /// `max_t |x(t)| <= S_star`, over all RK4 substeps.
    pub overshoot_ok: bool,
    pub min_norm: f64,
    pub max_norm: f64,
    pub final_norm: f64,
}

impl ConvergenceReport {
    pub fn from_record(rec: &TrajectoryRecord, radii: &BallRadii) -> Self {
        let norms = rec.norms();
        let first = norms.iter().position(|&v| v <= radii.s);
        let stayed = first.is_some_and(|i| norms[i..].iter().all(|&v| v <= radii.s));
        Self {
            entered_target: first.is_some(),
            t_reach: first.map(|i| rec.times[i]),
            stayed,
            overshoot_ok: rec.max_substep_norm <= radii.big_s_star,
            min_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
            max_norm: rec.max_substep_norm,
            final_norm: *norms.last().expect("record has the initial state"),
        }
    }
}

/// Classical RK4 on `x' = f(x, u) + q` with `u`, `q` frozen, `substeps`
/// equal steps over `delta`.
pub fn integrate_interval(
    sys: &dyn ControlledSystem,
    x0: &[f64],
    u: &[f64],
    q: &[f64],
    delta: f64,
    substeps: usize,
) -> Result<StateVec> {
    let mut x = x0.to_vec();
    let mut ws = Rk4Workspace::new(x0.len());
    let h = delta / substeps.max(1) as f64;
    for step in 0..substeps.max(1) {
        ws.step(sys, &mut x, u, q, h);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(StabError::BlowUp { step });
        }
    }
    Ok(StateVec(x))
}

struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    fn new(n: usize) -> Self {
        Self { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }

    fn step(&mut self, sys: &dyn ControlledSystem, x: &mut [f64], u: &[f64], q: &[f64], h: f64) {
        let n = x.len();
        let field = |sys: &dyn ControlledSystem, at: &[f64], out: &mut [f64]| {
            sys.eval_into(at, u, out);
            out.iter_mut().zip(q).for_each(|(o, qi)| *o += qi);
        };
        field(sys, x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        field(sys, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        field(sys, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        field(sys, &self.tmp, &mut self.k4);
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// A run that stopped early, with everything recorded up to the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: StabError,
    pub partial: TrajectoryRecord,
}

/// Simulate one sample-and-hold closed-loop run from `x0`.
#[allow(clippy::result_large_err)]
pub fn run_closed_loop(
    sys: &dyn ControlledSystem,
    clf: &dyn Clf,
    controller: &dyn Controller,
    x0: &[f64],
    cfg: &SimConfig,
    radii: &BallRadii,
) -> std::result::Result<(TrajectoryRecord, ConvergenceReport), RunFailure> {
    let n = sys.state_dim();
    let early = |error| RunFailure { error, partial: TrajectoryRecord::new(cfg.delta, x0, f64::NAN) };
    if let Err(e) = cfg.validate() {
        return Err(early(e));
    }
    if x0.len() != n {
        return Err(early(StabError::Config(format!("x0 has {} entries, system has {n}", x0.len()))));
    }
    if norm(x0) > radii.big_s * (1.0 + 1e-9) {
        return Err(early(StabError::Config(format!("initial state norm {} exceeds S = {}", norm(x0), radii.big_s))));
    }

    let mut rec = TrajectoryRecord::new(cfg.delta, x0, clf.value(x0));
    let h = cfg.delta / cfg.substeps as f64;
    let mut ws = Rk4Workspace::new(n);
    let mut x = x0.to_vec();
    for k in 0..cfg.n_steps() {
        let kk = k as u64;
        let x_meas = if cfg.noise.e_bar == 0.0 {
            StateVec::from(x.as_slice())
        } else {
            let e = cfg.noise.draw_measurement_error(cfg.run_index, kk, n);
            StateVec(x.iter().zip(e.iter()).map(|(a, b)| a + b).collect())
        };
        let u = match controller.control(&x_meas, StepSeed::new(cfg.seed, cfg.run_index, kk)) {
            Ok(u) => u,
            Err(error) => return Err(RunFailure { error, partial: rec }),
        };
        let mut q = cfg.noise.draw_disturbance(cfg.run_index, kk, n);
        for j in 0..cfg.substeps {
            if cfg.substep_disturbance {
                q = cfg.noise.draw_disturbance_substep(cfg.run_index, kk, j as u64, n);
            }
            ws.step(sys, &mut x, &u, &q, h);
            if x.iter().any(|v| !v.is_finite()) {
                let error = StabError::BlowUp { step: k * cfg.substeps + j };
                return Err(RunFailure { error, partial: rec });
            }
            rec.max_substep_norm = rec.max_substep_norm.max(norm(&x));
        }
        let l_next = clf.value(&x);
        let l_prev = *rec.clf_values.last().expect("non-empty");
        rec.decay_flags.push(l_next - l_prev <= -cfg.decay_threshold);
        rec.times.push((k + 1) as f64 * cfg.delta);
        rec.states.push(StateVec::from(x.as_slice()));
        rec.measured.push(x_meas);
        rec.controls.push(u);
        rec.clf_values.push(l_next);
    }
    let report = ConvergenceReport::from_record(&rec, radii);
    Ok((rec, report))
}

/// Fraction of steps starting outside `B_{s_star}` whose CLF drop is at
/// least `beta * delta * w_bar`. Returns 1 when no step starts outside.
pub fn check_decay(rec: &TrajectoryRecord, radii: &BallRadii, w_bar: f64, beta: f64) -> f64 {
    let need = beta * rec.delta * w_bar;
    let mut total = 0usize;
    let mut ok = 0usize;
    for k in 0..rec.states.len().saturating_sub(1) {
        if rec.states[k].norm() > radii.s_star {
            total += 1;
            if rec.clf_values[k + 1] - rec.clf_values[k] <= -need {
                ok += 1;
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        ok as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{FnSystem, InputBox, SingleIntegrator};

    #[test]
    fn constant_field_is_integrated_exactly() {
        let sys = SingleIntegrator::new(InputBox::symmetric(1, 1.0));
        let x = integrate_interval(&sys, &[0.0], &[1.0], &[0.0], 0.5, 4).unwrap();
        assert_eq!(x[0], 0.5);
    }

    #[test]
    fn exponential_decay_matches_analytic_solution() {
        let sys = FnSystem::new(1, InputBox::symmetric(1, 1.0), |x: &[f64], _: &[f64], out: &mut [f64]| out[0] = -x[0]);
        let x = integrate_interval(&sys, &[1.0], &[0.0], &[0.0], 0.5, 20).unwrap();
        assert!((x[0] - (-0.5f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn disturbance_adds_linearly_for_single_integrator() {
        let sys = SingleIntegrator::new(InputBox::symmetric(2, 1.0));
        let a = integrate_interval(&sys, &[0.2, -0.1], &[0.5, 0.3], &[0.0, 0.0], 0.5, 10).unwrap();
        let b = integrate_interval(&sys, &[0.2, -0.1], &[0.5, 0.3], &[0.1, 0.0], 0.5, 10).unwrap();
        assert!((b[0] - a[0] - 0.05).abs() < 1e-15);
        assert_eq!(a[1], b[1]);
    }

    #[test]
    fn blow_up_is_reported() {
        let sys = FnSystem::new(1, InputBox::symmetric(1, 1.0), |x: &[f64], _: &[f64], out: &mut [f64]| {
            out[0] = x[0] * x[0] * 1e300
        });
        assert!(matches!(integrate_interval(&sys, &[10.0], &[0.0], &[0.0], 1.0, 4), Err(StabError::BlowUp { .. })));
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.n_steps(), 80);
        c.substeps = 3;
        assert!(c.validate().is_err());
        c = SimConfig { t_end: 0.1, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn file_names() {
        assert_eq!(run_file_name("obc", 0.25, 0.1, 0.0, 7), "run_obc_0.25_0.1_0_7.csv");
    }
}
