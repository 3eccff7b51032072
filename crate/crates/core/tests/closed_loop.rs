use stab_core::clf::{compute_ball_radii, BallRadii, Clf, KInftyEnvelope, QuadraticClf, RadiiOptions};
use stab_core::controllers::{Controller, Method, StabilizerConfig, StepSeed};
use stab_core::sim::{check_decay, integrate_interval, run_closed_loop, SimConfig};
use stab_core::systems::{clf_by_name, Endi, FnSystem, InputBox, NoiseMode, NoiseModel};
use stab_core::{ControlVec, Result};

fn endi_radii(clf: &dyn Clf) -> BallRadii {
    let env = KInftyEnvelope::quadratic(0.05, 5.0);
    compute_ball_radii(&env, clf, 0.5, 1.31f64.sqrt(), &RadiiOptions::default()).unwrap()
}

#[test]
fn rk4_is_fourth_order() {
    // Harmonic oscillator driven by a constant input.
    let sys = FnSystem::new(2, InputBox::symmetric(1, 1.0), |x: &[f64], u: &[f64], out: &mut [f64]| {
        out[0] = x[1];
        out[1] = -x[0] + u[0];
    });
    // x(0) = (2, 0), u = 1: x1 = 1 + cos t, x2 = -sin t.
    let exact = |t: f64| [1.0 + t.cos(), -t.sin()];
    let err = |steps: usize| {
        let x = integrate_interval(&sys, &[2.0, 0.0], &[1.0], &[0.0, 0.0], 2.0, steps).unwrap();
        let e = exact(2.0);
        ((x[0] - e[0]).powi(2) + (x[1] - e[1]).powi(2)).sqrt()
    };
    let (e1, e2) = (err(10), err(20));
    let ratio = e1 / e2;
    assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
}

#[test]
fn additive_disturbance_enters_the_vector_field() {
    let sys = FnSystem::new(1, InputBox::symmetric(1, 1.0), |_: &[f64], u: &[f64], out: &mut [f64]| {
        out[0] = u[0];
    });
    let x = integrate_interval(&sys, &[0.0], &[0.5], &[0.25], 2.0, 4).unwrap();
    assert!((x[0] - 1.5).abs() < 1e-15);
}

#[test]
fn runs_are_reproducible_and_seed_dependent() {
    let sys = Endi::new(InputBox::symmetric(2, 1.0));
    let clf = clf_by_name("endi-clf").unwrap();
    let radii = endi_radii(&*clf);
    let c = StabilizerConfig::with_method(Method::Obc).build(&sys, &*clf, 0.5).unwrap();
    let x0 = [-1.0, 0.5, 0.2, 0.1, 0.1];
    let cfg = |seed| SimConfig {
        delta: 0.5,
        t_end: 5.0,
        noise: NoiseModel::new(0.1, 0.1, NoiseMode::WorstCaseSphere, seed),
        seed,
        ..Default::default()
    };
    let (a, _) = run_closed_loop(&sys, &*clf, &*c, &x0, &cfg(3), &radii).unwrap();
    let (b, _) = run_closed_loop(&sys, &*clf, &*c, &x0, &cfg(3), &radii).unwrap();
    let (d, _) = run_closed_loop(&sys, &*clf, &*c, &x0, &cfg(4), &radii).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.states, d.states);
    assert_eq!(a.times.len(), 11);
    assert_eq!(a.controls.len(), 10);
    for (m, x) in a.measured.iter().zip(&a.states) {
        let e: f64 = m.iter().zip(x.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        assert!((e - 0.1).abs() < 1e-12);
    }
}

#[test]
fn nominal_obc_reaches_and_keeps_the_target_ball() {
    let sys = Endi::new(InputBox::symmetric(2, 1.0));
    let clf = clf_by_name("endi-clf").unwrap();
    let radii = endi_radii(&*clf);
    let c = StabilizerConfig::with_method(Method::Obc).build(&sys, &*clf, 0.25).unwrap();
    let (rec, rep) =
        run_closed_loop(&sys, &*clf, &*c, &[-1.0, 0.5, 0.2, 0.1, 0.1], &SimConfig::default(), &radii).unwrap();
    assert!(rep.entered_target && rep.stayed);
    assert!(rep.final_norm < radii.s);
    assert!(rec.max_substep_norm >= rep.min_norm);
    assert!(check_decay(&rec, &radii, 1e-4, 0.125) > 0.8);
}

struct Constant;

impl Controller for Constant {
    fn method(&self) -> Method {
        Method::Obc
    }
    fn control(&self, _: &[f64], _: StepSeed) -> Result<ControlVec> {
        Ok(ControlVec(vec![1.0]))
    }
}

#[test]
fn overshoot_is_measured_on_substeps() {
    let sys = FnSystem::new(1, InputBox::symmetric(1, 1.0), |_: &[f64], u: &[f64], out: &mut [f64]| {
        out[0] = u[0];
    });
    let clf = QuadraticClf { dim: 1 };
    let radii =
        compute_ball_radii(&KInftyEnvelope::quadratic(1.0, 1.0), &clf, 0.25, 1.0, &RadiiOptions::default()).unwrap();
    let cfg = SimConfig { delta: 0.5, t_end: 2.0, ..Default::default() };
    let (rec, rep) = run_closed_loop(&sys, &clf, &Constant, &[-0.5], &cfg, &radii).unwrap();
    let expected = [0.5, 0.0, 0.5, 1.0, 1.5];
    for (a, b) in rec.norms().iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((rec.max_substep_norm - 1.5).abs() < 1e-12);
    assert!(!rep.overshoot_ok);
    assert_eq!(rep.t_reach, Some(0.5));
    assert!(!rep.stayed);
    assert_eq!(rec.decay_flags, vec![true, false, false, false]);
}

#[test]
fn csv_has_one_row_per_sample() {
    let sys = Endi::new(InputBox::symmetric(2, 1.0));
    let clf = clf_by_name("endi-clf").unwrap();
    let radii = endi_radii(&*clf);
    let c = StabilizerConfig::with_method(Method::Dia).build(&sys, &*clf, 0.5).unwrap();
    let cfg = SimConfig { delta: 0.5, t_end: 2.0, ..Default::default() };
    let (rec, _) = run_closed_loop(&sys, &*clf, &*c, &[0.3, 0.2, 0.1, 0.0, 0.0], &cfg, &radii).unwrap();
    let mut buf = Vec::new();
    rec.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x1,x2,x3,x4,x5,u1,u2,L,decay_flag");
    assert_eq!(lines.len(), 6);
    assert!(lines[5].ends_with(",,") || lines[5].split(',').nth(6) == Some(""));
    let t: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
}

#[test]
fn initial_states_outside_the_starting_ball_are_rejected() {
    let sys = Endi::new(InputBox::symmetric(2, 1.0));
    let clf = clf_by_name("endi-clf").unwrap();
    let radii = endi_radii(&*clf);
    let c = StabilizerConfig::with_method(Method::Obc).build(&sys, &*clf, 0.5).unwrap();
    let err = run_closed_loop(&sys, &*clf, &*c, &[2.0, 0.0, 0.0, 0.0, 0.0], &SimConfig::default(), &radii).unwrap_err();
    assert!(err.error.is_config());
}
