use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use coordwise::analysis::{
    check_condition_cw, check_condition_strict, classify_convergence, condition_b_certificate,
    estimate_derivatives, energy_profile_monotone, ConvergenceVerdict, Trajectory,
};
use coordwise::csvio;
use coordwise::energy::EnergyFunction;
use coordwise::multiagent::{MultiAgentConfig, SimError};
use coordwise::report::{sha256_hex, ConditionSummary, EnergySummary, RunReport};
use coordwise::scenarios::{
    default_quad_descent, example1_trajectory, parse_config, quadratic_descent_trajectory,
    spiral_trajectory, ConfigDocument, ScenarioSpec,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "coordwise",
    about = "Coordinate-wise energy-decrease analysis and multi-agent simulation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Weak,
    Strict,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a platoon config; write trajectory, step log, and report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_traj: PathBuf,
        #[arg(long)]
        out_log: PathBuf,
        /// Optional per-directed-edge perturbation CSV.
        #[arg(long)]
        out_perturbations: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check conditions and classify a trajectory CSV against an energy.
    Analyze {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "weak")]
        mode: Mode,
        /// Report JSON path; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate the condition-(b) kernel certificate at one point.
    ConditionB {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated coordinates, e.g. "2,0.5".
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 1e-8)]
        rank_tol: f64,
    },
    /// Generate a built-in scenario trajectory CSV.
    Scenario {
        /// One of: example1, spiral, quad-descent.
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_traj: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    fn divergence(message: impl Into<String>) -> Self {
        Self { code: EXIT_DIVERGENCE, message: message.into() }
    }
}

macro_rules! cfg_try {
    ($e:expr) => {
        $e.map_err(|err| Failure::config(err.to_string()))?
    };
}

fn load_document(path: &Path) -> Result<(ConfigDocument, String), Failure> {
    let bytes = cfg_try!(std::fs::read(path)
        .map_err(|e| format!("{}: {e}", path.display())));
    let text = cfg_try!(String::from_utf8(bytes.clone())
        .map_err(|e| format!("{}: {e}", path.display())));
    let doc = cfg_try!(parse_config(&text));
    Ok((doc, sha256_hex(&bytes)))
}

fn energy_profile_tol(traj: &Trajectory) -> f64 {
    let times = traj.times();
    let dt = if times.len() >= 2 { times[1] - times[0] } else { 1e-3 };
    10.0 * dt * dt
}

fn run_simulate(
    config: &Path,
    out_traj: &Path,
    out_log: &Path,
    out_perturbations: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<(), Failure> {
    let start = Instant::now();
    let (doc, hash) = load_document(config)?;
    let cfg: &MultiAgentConfig = match &doc.scenario {
        ScenarioSpec::Platoon { config } => config,
        other => {
            return Err(Failure::config(format!(
                "simulate requires a platoon scenario, got {}",
                scenario_kind(other)
            )))
        }
    };
    let params = doc.analysis.resolve();

    let out = match cfg.simulate() {
        Ok(out) => out,
        Err(SimError::Diverged { t, partial }) => {
            // flush what we have before reporting failure
            let _ = csvio::write_trajectory_file(out_traj, &partial.trajectory);
            let _ = csvio::write_step_log_file(out_log, &partial.log);
            if let Some(p) = out_perturbations {
                let _ = csvio::write_perturbations_file(p, &partial.log, &cfg.directed_pairs());
            }
            return Err(Failure::divergence(format!(
                "state diverged to non-finite values at t = {t}; partial trajectory flushed"
            )));
        }
        Err(SimError::MultiAgent(e)) => return Err(Failure::config(e.to_string())),
    };

    cfg_try!(csvio::write_trajectory_file(out_traj, &out.trajectory));
    cfg_try!(csvio::write_step_log_file(out_log, &out.log));
    if let Some(p) = out_perturbations {
        cfg_try!(csvio::write_perturbations_file(p, &out.log, &cfg.directed_pairs()));
    }

    let v = cfg_try!(cfg.energy());
    let mut report = RunReport::new(params.clone());
    report.config_sha256 = Some(hash);
    report.config_version = Some(doc.version.clone());

    let weak = cfg_try!(check_condition_cw(&out.trajectory, &v, params.condition_tol));
    report.weak_condition = Some(ConditionSummary::from(&weak));
    let strict = cfg_try!(check_condition_strict(
        &out.trajectory,
        &v,
        params.zero_tol,
        params.condition_tol
    ));
    report.strict_condition = Some(ConditionSummary::from(&strict));
    let profile = cfg_try!(energy_profile_monotone(
        &out.trajectory,
        &v,
        10.0 * cfg.dt * cfg.dt
    ));
    report.energy = Some(EnergySummary::from(&profile));
    let verdict = cfg_try!(classify_convergence(&out.trajectory, &v, &params));
    report.set_verdict(&verdict);
    let sp_point: Vec<f64> = match &verdict {
        ConvergenceVerdict::Converged { limit, .. } => limit.iter().cloned().collect(),
        _ => out.trajectory.states().last().expect("nonempty").iter().cloned().collect(),
    };
    report.sp = Some(cfg.sp_membership(&sp_point, params.grad_tol));
    report.wall_clock_seconds = start.elapsed().as_secs_f64();

    if let Some(p) = report_path {
        cfg_try!(std::fs::write(p, report.to_json())
            .map_err(|e| format!("{}: {e}", p.display())));
    }
    Ok(())
}

fn run_analyze(
    traj_path: &Path,
    config: &Path,
    mode: Mode,
    report_path: Option<&Path>,
) -> Result<(), Failure> {
    let start = Instant::now();
    let (doc, hash) = load_document(config)?;
    let v: EnergyFunction = cfg_try!(doc.scenario.energy());
    let traj = cfg_try!(csvio::read_trajectory_file(traj_path));
    if traj.dimension() != v.dimension() {
        return Err(Failure::config(format!(
            "trajectory dimension {} does not match energy dimension {}",
            traj.dimension(),
            v.dimension()
        )));
    }
    let params = doc.analysis.resolve();
    let traj = cfg_try!(estimate_derivatives(&traj));

    let mut report = RunReport::new(params.clone());
    report.config_sha256 = Some(hash);
    report.config_version = Some(doc.version.clone());
    match mode {
        Mode::Weak => {
            let r = cfg_try!(check_condition_cw(&traj, &v, params.condition_tol));
            report.weak_condition = Some(ConditionSummary::from(&r));
        }
        Mode::Strict => {
            let r = cfg_try!(check_condition_strict(
                &traj,
                &v,
                params.zero_tol,
                params.condition_tol
            ));
            report.strict_condition = Some(ConditionSummary::from(&r));
        }
    }
    let profile = cfg_try!(energy_profile_monotone(&traj, &v, energy_profile_tol(&traj)));
    report.energy = Some(EnergySummary::from(&profile));
    let verdict = cfg_try!(classify_convergence(&traj, &v, &params));
    report.set_verdict(&verdict);
    report.wall_clock_seconds = start.elapsed().as_secs_f64();

    match report_path {
        Some(p) => cfg_try!(std::fs::write(p, report.to_json())
            .map_err(|e| format!("{}: {e}", p.display()))),
        None => print!("{}", report.to_json()),
    }
    Ok(())
}

fn run_condition_b(config: &Path, point: &str, rank_tol: f64) -> Result<(), Failure> {
    let (doc, _) = load_document(config)?;
    let v = cfg_try!(doc.scenario.energy());
    let coords: Vec<f64> = cfg_try!(point
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad coordinate '{s}': {e}")))
        .collect::<Result<_, _>>());
    if coords.len() != v.dimension() {
        return Err(Failure::config(format!(
            "point has {} coordinates, energy expects {}",
            coords.len(),
            v.dimension()
        )));
    }
    let cert = cfg_try!(condition_b_certificate(&v, &DVector::from_vec(coords), rank_tol));
    let mut text = cfg_try!(serde_json::to_string_pretty(&cert));
    text.push('\n');
    print!("{text}");
    Ok(())
}

fn scenario_kind(spec: &ScenarioSpec) -> &'static str {
    match spec {
        ScenarioSpec::Example1 { .. } => "example1",
        ScenarioSpec::Spiral { .. } => "spiral",
        ScenarioSpec::Platoon { .. } => "platoon",
        ScenarioSpec::QuadraticDescent { .. } => "quadratic_descent",
        ScenarioSpec::ExternalTrajectory { .. } => "external_trajectory",
    }
}

fn run_scenario(
    name: &str,
    t_end: f64,
    dt: f64,
    seed: u64,
    out_traj: &Path,
) -> Result<(), Failure> {
    let traj = match name {
        "example1" => cfg_try!(example1_trajectory(t_end, dt)),
        "spiral" => cfg_try!(spiral_trajectory(t_end, dt)),
        "quad-descent" => {
            let (q, gains, y0) = default_quad_descent(seed);
            cfg_try!(quadratic_descent_trajectory(&q, &gains, &y0, t_end, dt, seed))
        }
        other => {
            return Err(Failure::config(format!(
                "unknown scenario '{other}'; valid names: example1, spiral, quad-descent"
            )))
        }
    };
    cfg_try!(csvio::write_trajectory_file(out_traj, &traj));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, out_traj, out_log, out_perturbations, report } => {
            run_simulate(
                &config,
                &out_traj,
                &out_log,
                out_perturbations.as_deref(),
                report.as_deref(),
            )
        }
        Command::Analyze { traj, config, mode, report } => {
            run_analyze(&traj, &config, mode, report.as_deref())
        }
        Command::ConditionB { config, point, rank_tol } => {
            run_condition_b(&config, &point, rank_tol)
        }
        Command::Scenario { name, t_end, dt, seed, out_traj } => {
            run_scenario(&name, t_end, dt, seed, &out_traj)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
