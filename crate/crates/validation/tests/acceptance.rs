//! Acceptance criteria 1-11, one PASS/FAIL line each. Exits non-zero when
//! any criterion fails.

use std::f64::consts::TAU;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stab_core::bench::{
    emit_tables, generate_initials, run_sweep, timing_report, CellStats, ExperimentSpec, Plant, SetupOptions,
};
use stab_core::bounds::{dia_sampling_bounds, table1_envelope, BoundInputs};
use stab_core::clf::{compute_ball_radii, Clf, FnClf, KInftyEnvelope, QuadraticClf, RadiiOptions, RegularityConstants};
use stab_core::controllers::{infc_prox, ControlGrid, InfcParams, Method, StabilizerConfig};
use stab_core::sim::{run_closed_loop, SimConfig};
use stab_core::systems::{kappa_lambda, minimize_over_lambda, LambdaClf};
use stab_core::StabError;
use stab_validation::{tol, Verdicts};

const SEED: u64 = 0;

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(stream);
    r
}

fn f_tilde(p: [f64; 3], l: f64) -> f64 {
    let rho = p[0] * l.cos() + p[1] * l.sin();
    p[0] * p[0] + p[1] * p[1] + 2.0 * p[2] * p[2] - 2.0 * p[2] * rho
}

fn kappa_fd(p: [f64; 3], l: f64) -> [f64; 2] {
    let h = tol::KAPPA_FD_STEP;
    let mut g = [0.0; 3];
    for (i, gi) in g.iter_mut().enumerate() {
        let (mut a, mut b) = (p, p);
        a[i] += h;
        b[i] -= h;
        *gi = (f_tilde(a, l) - f_tilde(b, l)) / (2.0 * h);
    }
    [-(g[0] - p[1] * g[2]), -(g[1] + p[0] * g[2])]
}

fn endi_objective(x: &[f64], l: f64) -> f64 {
    let p = [x[0], x[1], x[2]];
    let k = kappa_fd(p, l);
    f_tilde(p, l) + 0.5 * ((x[3] - k[0]).powi(2) + (x[4] - k[1]).powi(2))
}

fn reduced(p: [f64; 3]) -> f64 {
    let rho = p[0].hypot(p[1]);
    (rho - p[2].abs()).powi(2) + p[2] * p[2]
}

fn criterion_1(v: &mut Verdicts) {
    let start = Instant::now();
    let p = InfcParams::default();
    let quad = infc_prox(&QuadraticClf { dim: 1 }, &[1.0], &p, SEED);
    let abs = infc_prox(&FnClf::new(1, |y: &[f64]| y[0].abs()), &[1.0], &p, SEED);
    let secs = start.elapsed().as_secs_f64();
    let (Ok(quad), Ok(abs)) = (quad, abs) else {
        v.record(1, "prox oracle", false, "infc_prox returned an error");
        return;
    };
    let errs = [
        (quad.y_alpha[0] - 1.0 / 1.02).abs(),
        (quad.zeta_alpha[0] - (1.0 - 1.0 / 1.02) / 0.01).abs(),
        (abs.y_alpha[0] - 0.99).abs(),
        (abs.zeta_alpha[0] - 1.0).abs(),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let pass = worst <= tol::PROX && secs < tol::PROX_SECONDS;
    let detail = format!(
        "y^2: y={:.6} zeta={:.6}; |y|: y={:.6} zeta={:.6}; max err {worst:.1e} (tol {:.0e}); {secs:.3} s",
        quad.y_alpha[0],
        quad.zeta_alpha[0],
        abs.y_alpha[0],
        abs.zeta_alpha[0],
        tol::PROX
    );
    v.record(1, "prox oracle", pass, &detail);
}

fn criterion_2(v: &mut Verdicts) {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = [r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)];
        let l = r.gen_range(0.0..TAU);
        let k = kappa_lambda(&p, l);
        let fd = kappa_fd(p, l);
        for i in 0..2 {
            worst = worst.max((k[i] - fd[i]).abs() / k[i].abs().max(1.0));
        }
    }
    let detail = format!("max relative error {worst:.2e} on 100 draws (tol {:.0e})", tol::KAPPA_REL);
    v.record(2, "kappa gradient check", worst <= tol::KAPPA_REL, &detail);
}

fn criterion_3(v: &mut Verdicts) {
    let mut r = rng(3);
    let mut worst_reduced = 0.0f64;
    for _ in 0..100 {
        let p = [r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)];
        let (m, _) = minimize_over_lambda(|l| f_tilde(p, l), 360, 1e-10);
        worst_reduced = worst_reduced.max((m - reduced(p)).abs());
    }
    let clf = LambdaClf::default();
    let n = tol::LAMBDA_SWEEP_POINTS;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..50 {
        let x: Vec<f64> = (0..5).map(|_| r.gen_range(-1.5..1.5)).collect();
        let brute = (0..n).map(|i| endi_objective(&x, TAU * i as f64 / n as f64)).fold(f64::INFINITY, f64::min);
        worst_excess = worst_excess.max(clf.value(&x) - brute);
    }
    let pass = worst_reduced <= tol::REDUCED_CLF && worst_excess <= tol::LAMBDA_SWEEP;
    let detail = format!(
        "min over lambda vs reduced CLF max diff {worst_reduced:.2e} (tol {:.0e}); \
         CLF minus 10^4-point sweep max {worst_excess:.2e} (tol {:.0e})",
        tol::REDUCED_CLF,
        tol::LAMBDA_SWEEP
    );
    v.record(3, "CLF consistency", pass, &detail);
}

fn criterion_4(v: &mut Verdicts) {
    let env = KInftyEnvelope::quadratic(1.0, 1.0);
    let got = compute_ball_radii(&env, &QuadraticClf { dim: 2 }, 0.5, 1.0, &RadiiOptions::default());
    match got {
        Ok(b) => {
            let pass = b.s_hat == 0.375 && b.ell_hat == 0.140625 && b.s_star == 0.1875;
            let detail = format!("(s_hat, ell_hat, s_star) = ({}, {}, {})", b.s_hat, b.ell_hat, b.s_star);
            v.record(4, "ball radii", pass, &detail);
        }
        Err(e) => v.record(4, "ball radii", false, &e.to_string()),
    }
}

fn inputs(c: RegularityConstants, delta: f64, alpha: f64, c1: f64, c2: f64) -> BoundInputs {
    BoundInputs {
        constants: c,
        delta,
        r: 1.0,
        alpha,
        c1,
        c2,
        ell1: 0.0,
        ell2: 10.0,
        eps2: 10.0,
        eps3: 10.0,
        eps4: 10.0,
        c: 2.0,
    }
}

fn criterion_5(v: &mut Verdicts) {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..1000 {
        let (ll, lf, w, m) =
            (r.gen_range(0.1..100.0), r.gen_range(0.1..100.0), r.gen_range(1e-3..10.0), r.gen_range(0.1..10.0));
        let (d, q, a, c1, c2) = (
            r.gen_range(0.01..1.0),
            r.gen_range(0.0..1.0),
            r.gen_range(0.01..1.0),
            r.gen_range(0.1..10.0),
            r.gen_range(0.1..10.0),
        );
        let Ok(consts) = RegularityConstants::new(ll, lf, w, m) else {
            failures += 1;
            continue;
        };
        let inp = inputs(consts, d, a, c1, c2);
        let base = w / (4.0 * ll);
        let expected = [
            (Method::Dia, (d * (base - q) / (2.0 + d * lf)).max(0.0), base),
            (Method::Obc, base * d / (1.0 + d * lf), base),
            (Method::Infc, base * d / 4.0, c1 * a * w + c2 * lf),
        ];
        for (method, e, qm) in expected {
            match table1_envelope(method, &inp, q) {
                Ok(env) => worst = worst.max((env.e_max - e).abs()).max((env.q_max - qm).abs()),
                Err(_) => failures += 1,
            }
        }
    }
    let consts = RegularityConstants::new(1.0, 1.0, 4.0, 1.0).expect("positive");
    let example = dia_sampling_bounds(&inputs(consts, 0.5, 0.1, 1.0, 1.0));
    let (ex_ok, ex_detail) = match example {
        Ok(b) => {
            let q_err = (b.quadratic_term - (44f64.sqrt() - 6.0) / 8.0).abs();
            let r_err = (b.r_bar - 2.0).abs();
            (
                q_err.max(r_err) <= tol::SAMPLING_EXAMPLE,
                format!("quadratic term {:.8} r_bar {} (max err {:.1e})", b.quadratic_term, b.r_bar, q_err.max(r_err)),
            )
        }
        Err(e) => (false, e.to_string()),
    };
    let pass = failures == 0 && worst <= tol::ENVELOPE_PATHS && ex_ok;
    let detail = format!(
        "1000 draws max abs diff {worst:.1e} (tol {:.0e}), {failures} errors; sampling-bound example: {ex_detail}",
        tol::ENVELOPE_PATHS
    );
    v.record(5, "bound formulas", pass, &detail);
}

fn criterion_6(v: &mut Verdicts, plant: &Plant) {
    let start = Instant::now();
    let spec = ExperimentSpec::default();
    let grid = ControlGrid::uniform(plant.sys.input_box(), spec.stabilizer.points_per_axis).expect("grid");
    let full = match plant.constants(&grid, &spec.setup) {
        Ok((c, _)) => format!("w_bar on full annulus {:.3e}", c.w_bar),
        Err(StabError::DecayViolation { value, .. }) => {
            format!("full annulus violates decay (w = {value:.3e})")
        }
        Err(e) => format!("full annulus: {e}"),
    };
    let opts = SetupOptions { decay_outer_radius: Some(tol::DECAY_FALLBACK_OUTER), ..spec.setup.clone() };
    let w_bar = match plant.constants(&grid, &opts) {
        Ok((c, _)) => c.w_bar,
        Err(e) => {
            v.record(6, "decay invariant", false, &format!("{full}; fallback annulus: {e}"));
            return;
        }
    };
    let initials = generate_initials(20, spec.big_s, plant.sys.state_dim(), SEED).expect("initials");
    let need = tol::DECAY_BETA * 0.25 * w_bar;
    let mut pass = true;
    let mut parts = Vec::new();
    for method in Method::ALL {
        let ctrl = StabilizerConfig::with_method(method).build(&*plant.sys, &*plant.clf, 0.25).expect("controller");
        let (mut outside, mut decayed, mut overshoot_ok) = (0usize, 0usize, true);
        for (i, x0) in initials.iter().enumerate() {
            let cfg = SimConfig { delta: 0.25, seed: SEED, run_index: i as u64, ..Default::default() };
            match run_closed_loop(&*plant.sys, &*plant.clf, &*ctrl, x0, &cfg, &plant.radii) {
                Ok((rec, report)) => {
                    overshoot_ok &= report.overshoot_ok;
                    for k in 0..rec.states.len() - 1 {
                        if rec.states[k].norm() > plant.radii.s_star {
                            outside += 1;
                            if rec.clf_values[k + 1] - rec.clf_values[k] <= -need {
                                decayed += 1;
                            }
                        }
                    }
                }
                Err(f) => {
                    overshoot_ok = false;
                    parts.push(format!("{method} run {i} failed: {}", f.error));
                }
            }
        }
        let frac = if outside == 0 { 1.0 } else { decayed as f64 / outside as f64 };
        pass &= frac >= tol::DECAY_FRACTION && overshoot_ok;
        parts.push(format!("{method} {frac:.3} overshoot {}", if overshoot_ok { "ok" } else { "violated" }));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= tol::DECAY_SECONDS;
    let detail = format!(
        "{full}; w_bar {w_bar:.3e} on annulus [s*/2, {}]; decaying share (need {}): {}; {secs:.1} s",
        tol::DECAY_FALLBACK_OUTER,
        tol::DECAY_FRACTION,
        parts.join(", ")
    );
    v.record(6, "decay invariant", pass, &detail);
}

fn mean_of(stats: &[CellStats], m: Method, e: f64, q: f64) -> f64 {
    stats.iter().find(|c| c.key.method == m && c.key.e_bar == e && c.key.q_bar == q).map_or(f64::NAN, |c| c.mean)
}

fn criterion_7(v: &mut Verdicts, plant: &Plant) {
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in [SEED, SEED + 1, SEED + 2] {
        let base = ExperimentSpec { deltas: vec![0.5], seed, ..Default::default() };
        let a = ExperimentSpec { e_bars: vec![1.0], q_bars: vec![1.0], ..base.clone() };
        let b = ExperimentSpec {
            methods: vec![Method::Obc, Method::Infc],
            e_bars: vec![0.01],
            q_bars: vec![0.0, 0.01, 0.1],
            ..base
        };
        let (Ok(sa), Ok(sb)) = (run_sweep(&a, plant), run_sweep(&b, plant)) else {
            v.record(7, "qualitative ordering at delta 0.5", false, &format!("sweep failed for seed {seed}"));
            return;
        };
        let (dia, obc, infc) = (
            mean_of(&sa, Method::Dia, 1.0, 1.0),
            mean_of(&sa, Method::Obc, 1.0, 1.0),
            mean_of(&sa, Method::Infc, 1.0, 1.0),
        );
        pass &= obc < infc && obc < dia;
        let mut row = format!("seed {seed}: e=q=1 dia {dia:.3} obc {obc:.3} infc {infc:.3}; e=0.01");
        for q in [0.0, 0.01, 0.1] {
            let (o, i) = (mean_of(&sb, Method::Obc, 0.01, q), mean_of(&sb, Method::Infc, 0.01, q));
            pass &= o < i;
            row.push_str(&format!(" q={q} obc {o:.3}/infc {i:.3}"));
        }
        parts.push(row);
    }
    v.record(7, "qualitative ordering at delta 0.5", pass, &parts.join("; "));
}

fn benchmark_sweep(plant: &Plant, dir: &Path, serial: bool) -> Option<(Vec<CellStats>, Vec<u8>)> {
    let spec = ExperimentSpec {
        deltas: vec![0.25],
        seed: SEED,
        serial_timing: serial,
        output_dir: dir.to_path_buf(),
        ..Default::default()
    };
    let stats = run_sweep(&spec, plant).ok()?;
    emit_tables(&stats, dir).ok()?;
    let bytes = std::fs::read(dir.join("summary.csv")).ok()?;
    Some((stats, bytes))
}

fn criterion_8(v: &mut Verdicts, first: &[CellStats], second: &[CellStats]) {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [Method::Dia, Method::Infc] {
        let row: Vec<f64> = [0.0, 0.01, 0.1, 1.0].iter().map(|&q| mean_of(first, m, 0.0, q)).collect();
        let constant = row.iter().all(|x| x.to_bits() == row[0].to_bits());
        let repeat = mean_of(second, m, 0.0, 0.0).to_bits() == row[0].to_bits();
        pass &= constant && repeat;
        let shown: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
        parts.push(format!(
            "{m} e=0 row [{}] {}, nominal {} across sweeps",
            shown.join(", "),
            if constant { "constant" } else { "varies with q_bar" },
            if repeat { "identical" } else { "differs" }
        ));
    }
    v.record(8, "nominal row constancy", pass, &parts.join("; "));
}

fn criterion_9(v: &mut Verdicts, stats: &[CellStats]) {
    let (dia, obc) = (mean_of(stats, Method::Dia, 0.0, 0.0), mean_of(stats, Method::Obc, 0.0, 0.0));
    let (lo, hi) = tol::DIA_NOMINAL_BAND;
    let pass = dia >= lo && dia <= hi && obc <= tol::OBC_NOMINAL_MAX;
    let mut runs: Vec<f64> = stats
        .iter()
        .find(|c| c.key.method == Method::Dia && c.key.e_bar == 0.0 && c.key.q_bar == 0.0)
        .map(|c| c.runs.iter().map(|r| r.tail_average_norm).collect())
        .unwrap_or_default();
    runs.sort_by(f64::total_cmp);
    let median = runs.get(runs.len() / 2).copied().unwrap_or(f64::NAN);
    let outside = runs.iter().filter(|x| !(**x >= lo && **x <= hi)).count();
    let detail = format!(
        "dia nominal {dia:.4} in [{lo}, {hi}] (median {median:.4}, {outside} of {} runs outside); \
         obc nominal {obc:.4} <= {}",
        runs.len(),
        tol::OBC_NOMINAL_MAX
    );
    v.record(9, "nominal bands at delta 0.25", pass, &detail);
}

fn main() -> ExitCode {
    let mut v = Verdicts::default();
    criterion_1(&mut v);
    criterion_2(&mut v);
    criterion_3(&mut v);
    criterion_4(&mut v);
    criterion_5(&mut v);

    let plant = match Plant::from_spec(&ExperimentSpec::default()) {
        Ok(plant) => plant,
        Err(e) => {
            eprintln!("plant setup failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    criterion_6(&mut v, &plant);
    criterion_7(&mut v, &plant);

    let tmp = tempfile::tempdir().expect("temp dir");
    let first = benchmark_sweep(&plant, &tmp.path().join("serial"), true);
    let second = benchmark_sweep(&plant, &tmp.path().join("parallel"), false);
    match (first, second) {
        (Some((s1, b1)), Some((s2, b2))) => {
            criterion_8(&mut v, &s1, &s2);
            criterion_9(&mut v, &s1);
            let same = b1 == b2;
            v.record(
                10,
                "determinism",
                same,
                &format!(
                    "summary.csv from serial and parallel sweeps {} ({} bytes)",
                    if same { "byte-identical" } else { "differ" },
                    b1.len()
                ),
            );
            let timing = timing_report(&s1);
            let t = |m: Method| timing.rows.iter().find(|r| r.method == m).map_or(f64::NAN, |r| r.mean_wall_time);
            let (dia, obc, infc) = (t(Method::Dia), t(Method::Obc), t(Method::Infc));
            v.record(
                11,
                "timing order",
                obc < dia && obc < infc,
                &format!("serial s/run dia {dia:.4} obc {obc:.4} infc {infc:.4}"),
            );
        }
        _ => {
            for (id, title) in
                [(8, "nominal row constancy"), (9, "nominal bands"), (10, "determinism"), (11, "timing order")]
            {
                v.record(id, title, false, "delta 0.25 sweep failed");
            }
        }
    }

    let failed = v.failed();
    eprintln!("acceptance: {} of {} criteria passed", v.len() - failed.len(), v.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
