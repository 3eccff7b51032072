use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stab_core::clf::{Clf, FnClf, QuadraticClf};
use stab_core::controllers::{
    dia_aim_point, dia_control, infc_prox, obc_control, ControlGrid, DiaParams, InfcParams, Method, StabilizerConfig,
    StepSeed,
};
use stab_core::rng;
use stab_core::sim::integrate_interval;
use stab_core::systems::{clf_by_name, ControlledSystem, Endi, InputBox, SingleIntegrator};
use stab_core::vector::{dist, dot, norm};

fn endi() -> (Endi, Box<dyn Clf>, ControlGrid) {
    let sys = Endi::new(InputBox::symmetric(2, 1.0));
    let grid = ControlGrid::uniform(sys.input_box(), 21).unwrap();
    (sys, clf_by_name("endi-clf").unwrap(), grid)
}

#[test]
fn obc_is_the_exhaustive_lookahead_minimizer() {
    let (sys, clf, grid) = endi();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let x: Vec<f64> = (0..5).map(|_| r.gen_range(-1.0..1.0)).collect();
        let (u, v) = obc_control(&sys, &*clf, &x, 0.25, &grid);
        let mut best = (f64::INFINITY, 0);
        for (i, p) in grid.iter().enumerate() {
            let f = sys.eval(&x, p);
            let next: Vec<f64> = x.iter().zip(f.iter()).map(|(a, b)| a + 0.25 * b).collect();
            let l = clf.value(&next);
            if l < best.0 {
                best = (l, i);
            }
        }
        assert_eq!(v, best.0);
        assert_eq!(&*u, grid.point(best.1));
    }
}

#[test]
fn dia_aims_at_the_sphere_minimizer() {
    // For |x|^2 the minimizer on the sphere of radius r around x is
    // x (1 - r / |x|).
    let clf = QuadraticClf { dim: 5 };
    let params = DiaParams::default();
    let mut r = ChaCha8Rng::seed_from_u64(2);
    for k in 0..20 {
        let x = rng::on_sphere(&mut r, 5, 0.5 + k as f64 * 0.05);
        let z = dia_aim_point(&clf, &x, &params, k).unwrap();
        assert!((dist(&z, &x) - params.r).abs() < 1e-12);
        let exact: Vec<f64> = x.iter().map(|v| v * (1.0 - params.r / norm(&x))).collect();
        assert!(clf.value(&z) - clf.value(&exact) < 1e-4, "{}", dist(&z, &exact));
    }
}

#[test]
fn dia_endi_aim_beats_random_sphere_points() {
    let (_, clf, _) = endi();
    let params = DiaParams::default();
    let mut r = ChaCha8Rng::seed_from_u64(3);
    for k in 0..5 {
        let x = rng::on_sphere(&mut r, 5, 0.8);
        let z = dia_aim_point(&*clf, &x, &params, k).unwrap();
        let lz = clf.value(&z);
        for _ in 0..2000 {
            let d = rng::on_sphere(&mut r, 5, params.r);
            let p: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            assert!(lz <= clf.value(&p) + 1e-3);
        }
    }
}

#[test]
fn dia_control_minimizes_the_aiming_product() {
    let (sys, clf, grid) = endi();
    let x = [0.3, -0.4, 0.2, 0.1, -0.5];
    let z = dia_aim_point(&*clf, &x, &DiaParams::default(), 0).unwrap();
    let u = dia_control(&sys, &x, &z, &grid);
    let aim: Vec<f64> = x.iter().zip(z.iter()).map(|(a, b)| a - b).collect();
    let chosen = dot(&sys.eval(&x, &u), &aim);
    for p in grid.iter() {
        assert!(chosen <= dot(&sys.eval(&x, p), &aim));
    }
}

#[test]
fn infc_prox_of_quadratic_in_five_dimensions() {
    let clf = QuadraticClf { dim: 5 };
    let p = InfcParams::default();
    let x = [0.4, -0.3, 0.2, 0.7, -0.1];
    let res = infc_prox(&clf, &x, &p, 9).unwrap();
    let k = 1.0 + 2.0 * p.alpha * p.alpha;
    for (i, xi) in x.iter().enumerate() {
        assert!((res.y_alpha[i] - xi / k).abs() < 1e-6);
        let zeta = (xi - xi / k) / (p.alpha * p.alpha);
        assert!((res.zeta_alpha[i] - zeta).abs() < 1e-4);
    }
    assert!(res.converged);
    assert!(res.l_alpha <= clf.value(&x));
}

#[test]
fn infc_prox_of_weighted_l1_is_soft_thresholding() {
    let w = [1.0, 2.0, 0.5];
    let clf = FnClf::new(3, move |y: &[f64]| y.iter().zip(&w).map(|(v, c)| c * v.abs()).sum());
    let p = InfcParams::default();
    let x = [0.5, -0.01, 0.003];
    let res = infc_prox(&clf, &x, &p, 0).unwrap();
    let a2 = p.alpha * p.alpha;
    for i in 0..3 {
        let t = w[i] * a2;
        let y = x[i].signum() * (x[i].abs() - t).max(0.0);
        assert!((res.y_alpha[i] - y).abs() < 1e-6, "{i}: {} vs {y}", res.y_alpha[i]);
    }
}

#[test]
fn every_method_decreases_a_quadratic_clf() {
    let sys = SingleIntegrator::new(InputBox::symmetric(2, 1.0));
    let clf = QuadraticClf { dim: 2 };
    let delta = 0.05;
    let mut r = ChaCha8Rng::seed_from_u64(4);
    for method in Method::ALL {
        let c = StabilizerConfig::with_method(method).build(&sys, &clf, delta).unwrap();
        for k in 0..50 {
            let radius = r.gen_range(0.3..2.0);
            let x = rng::on_sphere(&mut r, 2, radius);
            let u = c.control(&x, StepSeed::new(0, 0, k)).unwrap();
            assert!(sys.input_box().contains(&u));
            let next = integrate_interval(&sys, &x, &u, &[0.0, 0.0], delta, 10).unwrap();
            assert!(clf.value(&next) < clf.value(&x), "{method} at {x:?}");
        }
    }
}

#[test]
fn controllers_are_deterministic_per_step_seed() {
    let (sys, clf, _) = endi();
    let x = [0.6, 0.1, -0.3, 0.2, 0.0];
    for method in Method::ALL {
        let c = StabilizerConfig::with_method(method).build(&sys, &*clf, 0.25).unwrap();
        assert_eq!(c.method(), method);
        let s = StepSeed::new(5, 2, 17);
        assert_eq!(c.control(&x, s).unwrap(), c.control(&x, s).unwrap());
    }
}

#[test]
fn grid_ties_go_to_the_lowest_index() {
    let g = ControlGrid::uniform(&InputBox::symmetric(2, 1.0), 21).unwrap();
    assert_eq!(g.argmin(|_| 1.0).0, 0);
    assert_eq!(g.argmin(|u| u[0].abs()).0, 10 * 21);
    assert_eq!(g.argmin(|u| if u[1] > 0.0 { f64::NAN } else { -u[1] }).0, 10);
}
