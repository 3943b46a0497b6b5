//! Canonical scenario builders and the JSON configuration schema.
//!
//! A `ConfigDocument` is a strict, versioned JSON file describing one
//! scenario (an analytic trajectory, a platoon simulation, a gain-scheduled
//! quadratic descent, or an external CSV trajectory plus its energy) together
//! with optional analysis tolerance overrides. Strict parsing (unknown fields
//! rejected) keeps scenario files auditable artifacts of record.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisParams, Trajectory};
use crate::energy::{Edge, EdgePotential, EnergyError, EnergyFunction, PotentialKind};
use crate::multiagent::{
    mix_seed, ActuatorModel, EdgeConfig, MultiAgentConfig, MultiAgentError, PerturbationModel,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Json(String),
    #[error("unsupported config version '{got}' (expected \"1\")")]
    VersionMismatch { got: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    MultiAgent(#[from] MultiAgentError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Serializable description of an energy function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergySpec {
    /// `V(x) = x^T Q x`, `q` given row-major.
    Quadratic { q: Vec<Vec<f64>> },
    Pairwise { n: usize, edges: Vec<PairwiseEdgeSpec> },
    BoxDistanceQuartic { lower: Vec<f64>, upper: Vec<f64> },
    /// `V(x) = ||x||_2`; evaluation away from the origin only.
    EuclideanNorm { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairwiseEdgeSpec {
    pub a: usize,
    pub b: usize,
    pub potential: EdgePotential,
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ScenarioError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(ScenarioError::Invalid(format!(
            "matrix must be square and nonempty, got {} rows",
            n
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl EnergySpec {
    pub fn to_energy(&self) -> Result<EnergyFunction, ScenarioError> {
        match self {
            EnergySpec::Quadratic { q } => {
                Ok(EnergyFunction::quadratic(matrix_from_rows(q)?)?)
            }
            EnergySpec::Pairwise { n, edges } => {
                let edges = edges
                    .iter()
                    .map(|e| Edge { a: e.a, b: e.b, potential: e.potential.clone() })
                    .collect();
                Ok(EnergyFunction::pairwise(*n, edges)?)
            }
            EnergySpec::BoxDistanceQuartic { lower, upper } => {
                Ok(EnergyFunction::box_distance_quartic(
                    DVector::from_column_slice(lower),
                    DVector::from_column_slice(upper),
                )?)
            }
            EnergySpec::EuclideanNorm { n } => Ok(EnergyFunction::euclidean_norm(*n)?),
        }
    }
}

/// Per-coordinate gain schedule for the quadratic-descent scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GainSchedule {
    Constant { kappa: f64 },
    /// Alternating active/idle segments with lengths drawn uniformly from
    /// `[tau, 2 tau]` per coordinate stream; active gain is `kappa_max`,
    /// idle gain 0. Every active interval has length >= tau.
    SeededStopGo { tau: f64, kappa_max: f64 },
}

impl GainSchedule {
    fn validate(&self) -> Result<(), ScenarioError> {
        match self {
            GainSchedule::Constant { kappa } if *kappa >= 0.0 => Ok(()),
            GainSchedule::SeededStopGo { tau, kappa_max }
                if *tau > 0.0 && *kappa_max > 0.0 =>
            {
                Ok(())
            }
            other => Err(ScenarioError::Invalid(format!("invalid gain schedule {other:?}"))),
        }
    }

    /// Materializes the schedule over `[0, t_end]` as `(segment_end, kappa)`
    /// pairs; `stream` individualizes the random stream per coordinate.
    fn segments(&self, t_end: f64, seed: u64, stream: u64) -> Vec<(f64, f64)> {
        match *self {
            GainSchedule::Constant { kappa } => vec![(t_end, kappa)],
            GainSchedule::SeededStopGo { tau, kappa_max } => {
                let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(&[seed, stream]));
                let mut active = rng.gen_bool(0.5);
                let mut t = 0.0;
                let mut out = Vec::new();
                while t < t_end {
                    let len = rng.gen_range(tau..2.0 * tau);
                    t += len;
                    out.push((t, if active { kappa_max } else { 0.0 }));
                    active = !active;
                }
                out
            }
        }
    }
}

/// One scenario: either an analytic trajectory family, a simulation config,
/// or an external trajectory paired with its energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    /// `y(t) = (2 + e^{-t}, sin t)` against the box energy `C = [-1,1]^2`.
    Example1 { t_end: f64, dt: f64 },
    /// `y(t) = (1 + e^{-t})(cos t, sin t)` against `V = ||x||_2`. The energy
    /// is not twice differentiable at the origin; this scenario stays on
    /// `||x|| >= 1` and only illustrates that a decreasing energy does not
    /// imply convergence.
    Spiral { t_end: f64, dt: f64 },
    Platoon { config: MultiAgentConfig },
    QuadraticDescent {
        q: Vec<Vec<f64>>,
        gains: Vec<GainSchedule>,
        y0: Vec<f64>,
        t_end: f64,
        dt: f64,
        seed: u64,
    },
    ExternalTrajectory { csv_path: String, energy: EnergySpec },
}

impl ScenarioSpec {
    /// The energy function this scenario is analyzed against.
    pub fn energy(&self) -> Result<EnergyFunction, ScenarioError> {
        match self {
            ScenarioSpec::Example1 { .. } => Ok(EnergyFunction::box_distance_quartic(
                DVector::from_vec(vec![-1.0, -1.0]),
                DVector::from_vec(vec![1.0, 1.0]),
            )?),
            ScenarioSpec::Spiral { .. } => Ok(EnergyFunction::euclidean_norm(2)?),
            ScenarioSpec::Platoon { config } => Ok(config.energy()?),
            ScenarioSpec::QuadraticDescent { q, .. } => {
                Ok(EnergyFunction::quadratic(matrix_from_rows(q)?)?)
            }
            ScenarioSpec::ExternalTrajectory { energy, .. } => energy.to_energy(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        match self {
            ScenarioSpec::Example1 { t_end, dt } | ScenarioSpec::Spiral { t_end, dt } => {
                check_grid(*t_end, *dt)
            }
            ScenarioSpec::Platoon { config } => Ok(config.validate()?),
            ScenarioSpec::QuadraticDescent { q, gains, y0, t_end, dt, .. } => {
                check_grid(*t_end, *dt)?;
                let q = matrix_from_rows(q)?;
                if y0.len() != q.nrows() {
                    return Err(ScenarioError::Invalid(format!(
                        "y0 has length {}, expected {}",
                        y0.len(),
                        q.nrows()
                    )));
                }
                if gains.len() != q.nrows() {
                    return Err(ScenarioError::Invalid(format!(
                        "need one gain schedule per coordinate ({}), got {}",
                        q.nrows(),
                        gains.len()
                    )));
                }
                for g in gains {
                    g.validate()?;
                }
                require_spd(&q)?;
                Ok(())
            }
            ScenarioSpec::ExternalTrajectory { csv_path, energy } => {
                energy.to_energy()?;
                if !Path::new(csv_path).exists() {
                    return Err(ScenarioError::Invalid(format!(
                        "trajectory file '{csv_path}' does not exist"
                    )));
                }
                Ok(())
            }
        }
    }
}

fn check_grid(t_end: f64, dt: f64) -> Result<(), ScenarioError> {
    if !(dt > 0.0) || !(t_end > 0.0) || !t_end.is_finite() {
        return Err(ScenarioError::Invalid(format!(
            "need t_end > 0 and dt > 0, got t_end = {t_end}, dt = {dt}"
        )));
    }
    Ok(())
}

fn require_spd(q: &DMatrix<f64>) -> Result<(), ScenarioError> {
    let sym_dev = (q - q.transpose()).amax();
    if sym_dev > 1e-12 * q.amax().max(1.0) {
        return Err(ScenarioError::Invalid(format!(
            "Q must be symmetric (max asymmetry {sym_dev:e})"
        )));
    }
    let eigs = q.clone().symmetric_eigenvalues();
    let min = eigs.min();
    if min <= 1e-12 * q.amax().max(1.0) {
        return Err(ScenarioError::Invalid(format!(
            "Q must be positive definite (smallest eigenvalue {min:e})"
        )));
    }
    Ok(())
}

/// Time grid `0, dt, 2 dt, ...` covering `[0, t_end]`.
fn grid(t_end: f64, dt: f64) -> Vec<f64> {
    let ratio = t_end / dt;
    let steps = if (ratio - ratio.round()).abs() < 1e-9 { ratio.round() } else { ratio.ceil() };
    (0..=steps as usize).map(|k| k as f64 * dt).collect()
}

/// Samples `y(t) = (2 + e^{-t}, sin t)` with its closed-form derivative.
pub fn example1_trajectory(t_end: f64, dt: f64) -> Result<Trajectory, ScenarioError> {
    check_grid(t_end, dt)?;
    let times = grid(t_end, dt);
    let states = times
        .iter()
        .map(|&t| DVector::from_vec(vec![2.0 + (-t).exp(), t.sin()]))
        .collect();
    let derivs = times
        .iter()
        .map(|&t| DVector::from_vec(vec![-(-t).exp(), t.cos()]))
        .collect();
    Trajectory::new(times, states, Some(derivs))
        .map_err(|e| ScenarioError::Invalid(e.to_string()))
}

/// Samples `y(t) = (1 + e^{-t})(cos t, sin t)` with its closed-form
/// derivative. `||y(t)|| = 1 + e^{-t}` decreases strictly while the
/// trajectory orbits forever.
pub fn spiral_trajectory(t_end: f64, dt: f64) -> Result<Trajectory, ScenarioError> {
    check_grid(t_end, dt)?;
    let times = grid(t_end, dt);
    let states = times
        .iter()
        .map(|&t| {
            let r = 1.0 + (-t).exp();
            DVector::from_vec(vec![r * t.cos(), r * t.sin()])
        })
        .collect();
    let derivs = times
        .iter()
        .map(|&t| {
            let r = 1.0 + (-t).exp();
            let rp = -(-t).exp();
            DVector::from_vec(vec![rp * t.cos() - r * t.sin(), rp * t.sin() + r * t.cos()])
        })
        .collect();
    Trajectory::new(times, states, Some(derivs))
        .map_err(|e| ScenarioError::Invalid(e.to_string()))
}

/// Edge potential families selectable for platoon builders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlatoonPotential {
    Quadratic { weight: f64 },
    QuadQuartic { weight: f64, quartic: f64 },
    Cosh { weight: f64 },
}

/// Perturbation assignments for platoon builders, applied per edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlatoonPerturbation {
    Zero,
    /// Sinusoids in both directions with per-edge frequencies and phases.
    Sinusoid { amplitude_frac: f64 },
    SeededUniform { hold_dt: f64 },
    AdversarialStall,
    /// Forward direction sinusoidal, reverse direction adversarial.
    SinusoidStallMix { amplitude_frac: f64 },
}

/// Builds a path-graph platoon 0-1-...-(n-1) with identical edge potentials
/// whose minimum sits at gap `spacing`. The initial state is the equally
/// spaced profile with seeded uniform jitter of amplitude `spacing / 4`, so
/// dead zones are not hit trivially at t = 0. Defaults: dt = 1e-3,
/// t_end = 200 (both plain fields, adjustable on the returned config).
pub fn build_platoon(
    n: usize,
    spacing: f64,
    potential: PlatoonPotential,
    pbar: f64,
    perturbation: PlatoonPerturbation,
    actuator: ActuatorModel,
    seed: u64,
) -> Result<MultiAgentConfig, ScenarioError> {
    if n < 2 {
        return Err(ScenarioError::Invalid(format!("platoon needs n >= 2, got {n}")));
    }
    let kind = match potential {
        PlatoonPotential::Quadratic { weight } => {
            PotentialKind::QuadraticSpacing { weight, spacing }
        }
        PlatoonPotential::QuadQuartic { weight, quartic } => {
            PotentialKind::QuadQuartic { weight, spacing, quartic }
        }
        PlatoonPotential::Cosh { weight } => PotentialKind::Cosh { weight, spacing },
    };
    let pot = EdgePotential::new(kind, pbar)?;
    let mut edges = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let (forward, reverse) = match perturbation {
            PlatoonPerturbation::Zero => (PerturbationModel::Zero, PerturbationModel::Zero),
            PlatoonPerturbation::Sinusoid { amplitude_frac } => (
                PerturbationModel::Sinusoid {
                    amplitude_frac,
                    omega: 1.0 + 0.1 * i as f64,
                    phase: 0.7 * i as f64,
                },
                PerturbationModel::Sinusoid {
                    amplitude_frac,
                    omega: 1.3 + 0.1 * i as f64,
                    phase: 1.1 * i as f64,
                },
            ),
            PlatoonPerturbation::SeededUniform { hold_dt } => (
                PerturbationModel::SeededUniform { seed: 2 * i as u64, hold_dt },
                PerturbationModel::SeededUniform { seed: 2 * i as u64 + 1, hold_dt },
            ),
            PlatoonPerturbation::AdversarialStall => (
                PerturbationModel::AdversarialStall,
                PerturbationModel::AdversarialStall,
            ),
            PlatoonPerturbation::SinusoidStallMix { amplitude_frac } => (
                PerturbationModel::Sinusoid {
                    amplitude_frac,
                    omega: 1.0 + 0.1 * i as f64,
                    phase: 0.7 * i as f64,
                },
                PerturbationModel::AdversarialStall,
            ),
        };
        edges.push(EdgeConfig {
            a: i,
            b: i + 1,
            potential: pot.clone(),
            perturbation_forward: forward,
            perturbation_reverse: reverse,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(&[seed, 0x706c_6174]));
    let jitter = spacing / 4.0;
    let y0 = (0..n)
        .map(|i| i as f64 * spacing + rng.gen_range(-jitter..jitter))
        .collect();
    Ok(MultiAgentConfig {
        n,
        edges,
        actuators: vec![actuator; n],
        y0,
        dt: 1e-3,
        t_end: 200.0,
        seed,
    })
}

/// Euler-integrates `dy_i = -kappa_i(t) * (2 Q y)_i` with per-coordinate
/// nonnegative gain schedules, storing the analytic derivative samples. Every
/// sampled decrease product is `-kappa_i * grad_i^2 <= 0` exactly.
pub fn quadratic_descent_trajectory(
    q: &DMatrix<f64>,
    gains: &[GainSchedule],
    y0: &DVector<f64>,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory, ScenarioError> {
    check_grid(t_end, dt)?;
    require_spd(q)?;
    let n = q.nrows();
    if y0.len() != n || gains.len() != n {
        return Err(ScenarioError::Invalid(format!(
            "expected y0 and gains of length {n}, got {} and {}",
            y0.len(),
            gains.len()
        )));
    }
    for g in gains {
        g.validate()?;
    }
    let segments: Vec<Vec<(f64, f64)>> =
        gains.iter().enumerate().map(|(i, g)| g.segments(t_end, seed, i as u64)).collect();
    let mut cursor = vec![0usize; n];
    let times = grid(t_end, dt);
    let mut states = Vec::with_capacity(times.len());
    let mut derivs = Vec::with_capacity(times.len());
    let mut y = y0.clone();
    for &t in &times {
        let grad = 2.0 * q * &y;
        let mut dy = DVector::zeros(n);
        for i in 0..n {
            let segs = &segments[i];
            while cursor[i] + 1 < segs.len() && t >= segs[cursor[i]].0 {
                cursor[i] += 1;
            }
            dy[i] = -segs[cursor[i]].1 * grad[i];
        }
        states.push(y.clone());
        derivs.push(dy.clone());
        y += dt * dy;
    }
    Trajectory::new(times, states, Some(derivs))
        .map_err(|e| ScenarioError::Invalid(e.to_string()))
}

/// The Q = I4 + R setup for the strongly convex descent scenario: R is a
/// seeded random symmetric matrix scaled to spectral norm 0.5, so Q's
/// eigenvalues lie in [0.5, 1.5].
pub fn default_quad_descent(seed: u64) -> (DMatrix<f64>, Vec<GainSchedule>, DVector<f64>) {
    let n = 4;
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(&[seed, 0x7164]));
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-1.0..1.0);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    let spectral = r.clone().symmetric_eigenvalues().amax();
    r *= 0.5 / spectral;
    let q = DMatrix::identity(n, n) + r;
    let gains = vec![GainSchedule::SeededStopGo { tau: 0.5, kappa_max: 1.0 }; n];
    let y0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    (q, gains, y0)
}

/// Optional overrides for the `AnalysisParams` defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOverrides {
    pub condition_tol: Option<f64>,
    pub zero_tol: Option<f64>,
    pub grad_tol: Option<f64>,
    pub rank_tol: Option<f64>,
    pub eps_conv: Option<f64>,
    pub tail_fraction: Option<f64>,
    pub cluster_radius: Option<f64>,
    pub radius_threshold: Option<f64>,
}

impl AnalysisOverrides {
    pub fn resolve(&self) -> AnalysisParams {
        let d = AnalysisParams::default();
        AnalysisParams {
            condition_tol: self.condition_tol.unwrap_or(d.condition_tol),
            zero_tol: self.zero_tol.unwrap_or(d.zero_tol),
            grad_tol: self.grad_tol.unwrap_or(d.grad_tol),
            rank_tol: self.rank_tol.unwrap_or(d.rank_tol),
            eps_conv: self.eps_conv.unwrap_or(d.eps_conv),
            tail_fraction: self.tail_fraction.unwrap_or(d.tail_fraction),
            cluster_radius: self.cluster_radius.unwrap_or(d.cluster_radius),
            radius_threshold: self.radius_threshold.unwrap_or(d.radius_threshold),
        }
    }
}

pub const CONFIG_VERSION: &str = "1";

/// Top-level config file: version tag, one scenario, optional tolerance
/// overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub version: String,
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub analysis: AnalysisOverrides,
}

impl ConfigDocument {
    pub fn new(scenario: ScenarioSpec) -> Self {
        Self { version: CONFIG_VERSION.into(), scenario, analysis: AnalysisOverrides::default() }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != CONFIG_VERSION {
            return Err(ScenarioError::VersionMismatch { got: self.version.clone() });
        }
        self.scenario.validate()
    }
}

pub fn parse_config(text: &str) -> Result<ConfigDocument, ScenarioError> {
    let doc: ConfigDocument =
        serde_json::from_str(text).map_err(|e| ScenarioError::Json(e.to_string()))?;
    doc.validate()?;
    Ok(doc)
}

pub fn load_config(path: &Path) -> Result<ConfigDocument, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), source: e })?;
    parse_config(&text)
}

pub fn save_config(doc: &ConfigDocument, path: &Path) -> Result<(), ScenarioError> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| ScenarioError::Json(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), source: e })
}
