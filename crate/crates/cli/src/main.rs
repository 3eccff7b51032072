use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stab_core::bench::{
    bounds_report, emit_tables, emit_timeseries, generate_initials, run_sweep, timing_report, write_bounds_csv,
    write_report_header, write_timing_csv, BoundsConfig, ExperimentSpec, Plant,
};
use stab_core::controllers::{Method, StabilizerConfig};
use stab_core::sim::{run_closed_loop, run_file_name, SimConfig};
use stab_core::systems::NoiseModel;
use stab_core::{Result, StabError};

#[derive(Parser)]
#[command(name = "stab", version, about = "Sample-and-hold CLF stabilization benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full sweep described by a TOML experiment file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the regularity constants and print the robustness bounds.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one closed-loop run and write its trajectory.
    Single {
        #[arg(long)]
        method: Method,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        ebar: f64,
        #[arg(long, default_value_t = 0.0)]
        qbar: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Which of the sweep's initial states to start from.
        #[arg(long, default_value_t = 0)]
        run_index: u64,
        /// Experiment file supplying plant and controller settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Bounds { config, out } => cmd_bounds(&config, out),
        Command::Single { method, delta, ebar, qbar, seed, run_index, config, out } => {
            cmd_single(method, delta, ebar, qbar, seed, run_index, config.as_deref(), &out)
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &StabError) -> ExitCode {
    match e {
        StabError::Config(_) | StabError::Io(_) | StabError::Csv(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("STAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| StabError::Config(format!("STAB_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| StabError::Config(format!("cannot size worker pool: {e}")))
}

fn read_config(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| StabError::Config(format!("cannot read {}: {e}", path.display())))
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> Result<ExitCode> {
    let mut spec = ExperimentSpec::from_toml(&read_config(config)?)?;
    if let Some(out) = out {
        spec.output_dir = out;
    }
    let plant = Plant::from_spec(&spec)?;
    let stats = run_sweep(&spec, &plant)?;
    let dir = &spec.output_dir;
    write_report_header(&spec, &plant, dir)?;
    emit_tables(&stats, dir)?;
    emit_timeseries(&stats, dir)?;
    let timing = timing_report(&stats);
    write_timing_csv(&timing, spec.serial_timing, &dir.join("timing.csv"))?;

    let mut failures = 0;
    let mut log = String::from("method,delta,e_bar,q_bar,run_index,error\n");
    for c in &stats {
        println!(
            "{:<5} delta={:<5} e_bar={:<5} q_bar={:<5} mean={:.6} std={:.6}",
            c.key.method.as_str(),
            c.key.delta,
            c.key.e_bar,
            c.key.q_bar,
            c.mean,
            c.std
        );
        for r in c.runs.iter().filter(|r| r.failure.is_some()) {
            failures += 1;
            let msg = r.failure.as_deref().unwrap_or_default().replace(['"', '\n'], " ");
            log.push_str(&format!(
                "{},{},{},{},{},\"{}\"\n",
                c.key.method, c.key.delta, c.key.e_bar, c.key.q_bar, r.run_index, msg
            ));
        }
    }
    for r in &timing.rows {
        println!("time {:<5} delta={:<5} {:.4} s/run", r.method.as_str(), r.delta, r.mean_wall_time);
    }
    if let Some(fast) = timing.obc_fastest {
        println!("obc fastest: {fast}{}", if spec.serial_timing { "" } else { " (parallel timing)" });
    }
    println!("results written to {}", dir.display());
    if failures > 0 {
        std::fs::write(dir.join("failures.csv"), log)?;
        eprintln!("{failures} run(s) failed; see failures.csv");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bounds(config: &Path, out: Option<PathBuf>) -> Result<ExitCode> {
    let mut cfg = BoundsConfig::from_toml(&read_config(config)?)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let report = bounds_report(&cfg)?;
    print!("{}", report.to_text());
    std::fs::create_dir_all(&cfg.output_dir)?;
    write_bounds_csv(&report, &cfg.output_dir.join("bounds.csv"))?;
    std::fs::write(cfg.output_dir.join("constants.txt"), report.estimates.to_lines())?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_single(
    method: Method,
    delta: f64,
    e_bar: f64,
    q_bar: f64,
    seed: u64,
    run_index: u64,
    config: Option<&Path>,
    out: &Path,
) -> Result<ExitCode> {
    let spec = match config {
        Some(p) => ExperimentSpec::from_toml(&read_config(p)?)?,
        None => ExperimentSpec::default(),
    };
    let plant = Plant::from_spec(&spec)?;
    let initials = generate_initials(run_index as usize + 1, spec.big_s, plant.sys.state_dim(), seed)?;
    let x0 = if spec.identical_initials { &initials[0] } else { &initials[run_index as usize] };
    let stabilizer = StabilizerConfig { method, ..spec.stabilizer.clone() };
    let controller = stabilizer.build(&*plant.sys, &*plant.clf, delta)?;
    let cfg = SimConfig {
        delta,
        t_end: spec.t_end,
        substeps: spec.substeps,
        noise: NoiseModel::new(e_bar, q_bar, spec.noise_mode, seed),
        seed,
        run_index,
        substep_disturbance: spec.substep_disturbance,
        decay_threshold: 0.0,
    };
    std::fs::create_dir_all(out)?;
    let path = out.join(run_file_name(method.as_str(), delta, e_bar, q_bar, run_index));
    match run_closed_loop(&*plant.sys, &*plant.clf, &*controller, x0, &cfg, &plant.radii) {
        Ok((rec, report)) => {
            rec.save_csv(&path)?;
            println!("trajectory: {}", path.display());
            println!(
                "entered target: {}  t_reach: {}  stayed: {}  overshoot ok: {}",
                report.entered_target,
                report.t_reach.map_or("-".to_string(), |t| t.to_string()),
                report.stayed,
                report.overshoot_ok
            );
            println!(
                "final |x| = {:.6}  max |x| = {:.6}  S_star = {:.6}",
                report.final_norm, report.max_norm, plant.radii.big_s_star
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(failure) => {
            failure.partial.save_csv(&path)?;
            Err(failure.error)
        }
    }
}
