//! Robust multi-agent consensus under bounded measurement perturbations and
//! sign-preserving actuator nonlinearities.
//!
//! Each agent holds a scalar position and measures the relative positions of
//! its graph neighbors up to a bounded perturbation. From the known bound it
//! computes an interval certain to contain its local gradient component and
//! moves only when that interval has a definite sign (dead-zone control). The
//! resulting trajectory satisfies the strict coordinate-wise decrease
//! condition by construction, at every integration step.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::Trajectory;
use crate::energy::{Edge, EdgePotential, EnergyError, EnergyFunction};

#[derive(Debug, Error)]
pub enum MultiAgentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("({i}, {j}) is not a directed measurement edge")]
    NonEdge { i: usize, j: usize },
    #[error("expected {expected} measurements for agent {agent}, got {got}")]
    MissingMeasurement { agent: usize, expected: usize, got: usize },
    #[error("inverted bound interval: g_minus = {g_minus} > g_plus = {g_plus}")]
    InvertedInterval { g_minus: f64, g_plus: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("iteration cap of {0} exceeded")]
    IterationCap(usize),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Bounded measurement perturbation, one model per edge-direction. The
/// emitted value is hard-clamped to `[-pbar, pbar]` as a last stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationModel {
    Zero,
    /// `p(t) = s * pbar` for a fixed `s` in `[-1, 1]`.
    Constant { s: f64 },
    /// `p(t) = amplitude_frac * pbar * sin(omega t + phase)`.
    Sinusoid { amplitude_frac: f64, omega: f64, phase: f64 },
    /// Piecewise-constant uniform noise, held for `hold_dt` so trajectories
    /// are stable under dt refinement. One deterministic stream per
    /// edge-direction, split from the master seed.
    SeededUniform { seed: u64, hold_dt: f64 },
    /// Greedy adversary: picks `p` from `{-pbar, +pbar}` per step to push the
    /// observer's bound interval toward containing 0, evaluated against the
    /// agent's partial sums in fixed edge order.
    AdversarialStall,
}

impl PerturbationModel {
    fn validate(&self) -> Result<(), MultiAgentError> {
        match self {
            PerturbationModel::Constant { s } => {
                if !(*s >= -1.0 && *s <= 1.0) {
                    return Err(MultiAgentError::InvalidConfig(format!(
                        "constant perturbation s must be in [-1, 1], got {s}"
                    )));
                }
            }
            PerturbationModel::Sinusoid { amplitude_frac, omega, phase } => {
                if !(*amplitude_frac >= 0.0 && *amplitude_frac <= 1.0) {
                    return Err(MultiAgentError::InvalidConfig(format!(
                        "sinusoid amplitude_frac must be in [0, 1], got {amplitude_frac}"
                    )));
                }
                if !omega.is_finite() || !phase.is_finite() {
                    return Err(MultiAgentError::InvalidConfig(
                        "sinusoid omega and phase must be finite".into(),
                    ));
                }
            }
            PerturbationModel::SeededUniform { hold_dt, .. } => {
                if !(*hold_dt > 0.0) {
                    return Err(MultiAgentError::InvalidConfig(format!(
                        "hold_dt must be > 0, got {hold_dt}"
                    )));
                }
            }
            PerturbationModel::Zero | PerturbationModel::AdversarialStall => {}
        }
        Ok(())
    }
}

/// First-order agent dynamics `dy_i = h(t, u_i)` with `h(t, 0) = 0` and
/// `h(t, u) * u >= 0` (sign preservation; `h` may be 0 while `u` is not).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ActuatorModel {
    Identity,
    Gain { kappa: f64 },
    /// `kappa * u` during the first `duty` fraction of each period, else 0.
    StopGo { period: f64, duty: f64, kappa: f64 },
    /// `clamp(kappa * u, -cap, cap)`.
    Saturation { kappa: f64, cap: f64 },
}

impl ActuatorModel {
    fn validate(&self) -> Result<(), MultiAgentError> {
        match self {
            ActuatorModel::Identity => Ok(()),
            ActuatorModel::Gain { kappa } if *kappa > 0.0 => Ok(()),
            ActuatorModel::StopGo { period, duty, kappa }
                if *period > 0.0 && *duty > 0.0 && *duty <= 1.0 && *kappa > 0.0 =>
            {
                Ok(())
            }
            ActuatorModel::Saturation { kappa, cap } if *kappa > 0.0 && *cap > 0.0 => Ok(()),
            other => Err(MultiAgentError::InvalidConfig(format!(
                "invalid actuator parameters: {other:?}"
            ))),
        }
    }

    /// `dy_i = h(t, u)`.
    pub fn apply(&self, t: f64, u: f64) -> f64 {
        match *self {
            ActuatorModel::Identity => u,
            ActuatorModel::Gain { kappa } => kappa * u,
            ActuatorModel::StopGo { period, duty, kappa } => {
                let frac = (t / period).rem_euclid(1.0);
                if frac < duty {
                    kappa * u
                } else {
                    0.0
                }
            }
            ActuatorModel::Saturation { kappa, cap } => (kappa * u).clamp(-cap, cap),
        }
    }

    /// Recurring-activity witness `(alpha, tau)`: `|h(t, u)| >= alpha |u|` on
    /// infinitely many disjoint intervals of length at least `tau`. An
    /// infinite `tau` means the bound holds for all times. For `Saturation`
    /// the witness exists only under a declared input bound `|u| <= m`.
    pub fn activity_witness(&self, input_bound: Option<f64>) -> Option<(f64, f64)> {
        match *self {
            ActuatorModel::Identity => Some((1.0, f64::INFINITY)),
            ActuatorModel::Gain { kappa } => Some((kappa, f64::INFINITY)),
            ActuatorModel::StopGo { period, duty, kappa } => Some((kappa, duty * period)),
            ActuatorModel::Saturation { kappa, cap } => {
                input_bound.map(|m| (kappa.min(cap / m), f64::INFINITY))
            }
        }
    }
}

/// One undirected edge with its potential and the perturbation model of each
/// measurement direction (`forward`: `a` observes `b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub a: usize,
    pub b: usize,
    pub potential: EdgePotential,
    pub perturbation_forward: PerturbationModel,
    pub perturbation_reverse: PerturbationModel,
}

/// Full description of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiAgentConfig {
    pub n: usize,
    pub edges: Vec<EdgeConfig>,
    pub actuators: Vec<ActuatorModel>,
    pub y0: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
}

/// A directed measurement edge: `observer` measures `neighbor`.
#[derive(Debug, Clone, Copy)]
struct DirectedEdge {
    edge: usize,
    observer: usize,
    neighbor: usize,
    forward: bool,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn mix_seed(parts: &[u64]) -> u64 {
    let mut acc = 0x243F_6A88_85A3_08D3u64;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

/// Per-step simulation record.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub u: Vec<f64>,
    pub g_minus: Vec<f64>,
    pub g_plus: Vec<f64>,
    /// Realized perturbations per directed edge, in directed-edge order
    /// (forward then reverse of each configured edge).
    pub perturbations: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trajectory: Trajectory,
    pub log: Vec<StepRecord>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("state diverged to non-finite values at t = {t}")]
    Diverged { t: f64, partial: Box<SimOutput> },
    #[error(transparent)]
    MultiAgent(#[from] MultiAgentError),
}

impl MultiAgentConfig {
    pub fn validate(&self) -> Result<(), MultiAgentError> {
        if self.n < 2 {
            return Err(MultiAgentError::InvalidConfig(format!(
                "need at least 2 agents, got {}",
                self.n
            )));
        }
        if self.actuators.len() != self.n {
            return Err(MultiAgentError::InvalidConfig(format!(
                "expected {} actuators, got {}",
                self.n,
                self.actuators.len()
            )));
        }
        if self.y0.len() != self.n {
            return Err(MultiAgentError::InvalidConfig(format!(
                "y0 has length {}, expected {}",
                self.y0.len(),
                self.n
            )));
        }
        if !self.y0.iter().all(|v| v.is_finite()) {
            return Err(MultiAgentError::InvalidConfig("y0 must be finite".into()));
        }
        if !(self.dt > 0.0) {
            return Err(MultiAgentError::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end > self.dt) {
            return Err(MultiAgentError::InvalidConfig(format!(
                "t_end must exceed dt, got t_end = {}, dt = {}",
                self.t_end, self.dt
            )));
        }
        for e in &self.edges {
            if e.a >= self.n || e.b >= self.n || e.a == e.b {
                return Err(MultiAgentError::InvalidConfig(format!(
                    "invalid edge ({}, {}) for n = {}",
                    e.a, e.b, self.n
                )));
            }
            e.potential
                .validate()
                .map_err(|err| MultiAgentError::InvalidConfig(err.to_string()))?;
            e.perturbation_forward.validate()?;
            e.perturbation_reverse.validate()?;
        }
        for a in &self.actuators {
            a.validate()?;
        }
        // connectivity (checked through the energy construction)
        let energy = self.energy()?;
        if !energy.is_connected().unwrap_or(false) {
            return Err(MultiAgentError::InvalidConfig(
                "measurement graph must be connected".into(),
            ));
        }
        Ok(())
    }

    /// The global pairwise energy of this configuration.
    pub fn energy(&self) -> Result<EnergyFunction, MultiAgentError> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge { a: e.a, b: e.b, potential: e.potential.clone() })
            .collect();
        Ok(EnergyFunction::pairwise(self.n, edges)?)
    }

    /// (observer, neighbor) pairs in the order used by
    /// `StepRecord::perturbations`.
    pub fn directed_pairs(&self) -> Vec<(usize, usize)> {
        self.directed_edges().iter().map(|de| (de.observer, de.neighbor)).collect()
    }

    fn directed_edges(&self) -> Vec<DirectedEdge> {
        let mut out = Vec::with_capacity(2 * self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            out.push(DirectedEdge { edge: k, observer: e.a, neighbor: e.b, forward: true });
            out.push(DirectedEdge { edge: k, observer: e.b, neighbor: e.a, forward: false });
        }
        out
    }

    /// `f'_{observer,neighbor}(z)` for a directed edge.
    fn directed_deriv(&self, de: &DirectedEdge, z: f64) -> f64 {
        let pot = &self.edges[de.edge].potential;
        if de.forward {
            pot.deriv(z)
        } else {
            -pot.deriv(-z)
        }
    }

    /// Bound-interval contribution of one directed edge given a measurement:
    /// `(min, max)` over `p in {-pbar, +pbar}` of `-f'(measured + p)`.
    fn edge_bounds(&self, de: &DirectedEdge, measured: f64) -> (f64, f64) {
        let pbar = self.edges[de.edge].potential.pbar;
        let a = -self.directed_deriv(de, measured - pbar);
        let b = -self.directed_deriv(de, measured + pbar);
        (a.min(b), a.max(b))
    }

    fn non_adversarial_perturbation(&self, de: &DirectedEdge, t: f64) -> Option<f64> {
        let ec = &self.edges[de.edge];
        let pbar = ec.potential.pbar;
        let model = if de.forward { &ec.perturbation_forward } else { &ec.perturbation_reverse };
        let raw = match model {
            PerturbationModel::Zero => 0.0,
            PerturbationModel::Constant { s } => s * pbar,
            PerturbationModel::Sinusoid { amplitude_frac, omega, phase } => {
                amplitude_frac * pbar * (omega * t + phase).sin()
            }
            PerturbationModel::SeededUniform { seed, hold_dt } => {
                let window = ((t + 1e-12) / hold_dt).floor() as u64;
                let lo = de.observer.min(de.neighbor) as u64;
                let hi = de.observer.max(de.neighbor) as u64;
                let dir = u64::from(de.forward);
                let s = mix_seed(&[self.seed, *seed, lo, hi, dir, window]);
                let mut rng = ChaCha12Rng::seed_from_u64(s);
                if pbar > 0.0 {
                    rng.gen_range(-pbar..=pbar)
                } else {
                    0.0
                }
            }
            PerturbationModel::AdversarialStall => return None,
        };
        Some(raw.clamp(-pbar, pbar))
    }

    /// Realized perturbations for every directed edge at `(t, y)`. Adversarial
    /// entries are chosen greedily per observer in fixed edge order so that
    /// the observer's accumulating bound interval is pushed toward containing 0.
    pub fn realized_perturbations(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let directed = self.directed_edges();
        let mut p = vec![0.0f64; directed.len()];
        // partial (lo, hi) interval sums per observer, built in edge order
        let mut lo_sum = vec![0.0f64; self.n];
        let mut hi_sum = vec![0.0f64; self.n];
        for (idx, de) in directed.iter().enumerate() {
            let gap = y[de.neighbor] - y[de.observer];
            let chosen = match self.non_adversarial_perturbation(de, t) {
                Some(v) => v,
                None => {
                    let pbar = self.edges[de.edge].potential.pbar;
                    let mut best = -pbar;
                    let mut best_obj = f64::INFINITY;
                    for cand in [-pbar, pbar] {
                        let (lo, hi) = self.edge_bounds(de, gap + cand);
                        let obj =
                            (lo_sum[de.observer] + lo + hi_sum[de.observer] + hi).abs();
                        if obj < best_obj {
                            best_obj = obj;
                            best = cand;
                        }
                    }
                    best
                }
            };
            p[idx] = chosen;
            let (lo, hi) = self.edge_bounds(de, gap + chosen);
            lo_sum[de.observer] += lo;
            hi_sum[de.observer] += hi;
        }
        p
    }

    /// The perturbed relative measurement `y_j - y_i + p_ij(t)` taken by
    /// agent `i` of its neighbor `j`.
    pub fn measure(&self, i: usize, j: usize, t: f64, y: &[f64]) -> Result<f64, MultiAgentError> {
        let directed = self.directed_edges();
        let idx = directed
            .iter()
            .position(|de| de.observer == i && de.neighbor == j)
            .ok_or(MultiAgentError::NonEdge { i, j })?;
        let p = self.realized_perturbations(t, y);
        Ok(y[j] - y[i] + p[idx])
    }

    /// Certified bounds `(g_minus, g_plus)` on agent `i`'s gradient component
    /// from its measurements, one per observer-edge of `i` in directed-edge
    /// order. Exact for the shipped convex potentials (endpoint evaluation).
    pub fn robust_bounds(
        &self,
        i: usize,
        measurements: &[f64],
    ) -> Result<(f64, f64), MultiAgentError> {
        let directed = self.directed_edges();
        let mine: Vec<&DirectedEdge> = directed.iter().filter(|de| de.observer == i).collect();
        if mine.len() != measurements.len() {
            return Err(MultiAgentError::MissingMeasurement {
                agent: i,
                expected: mine.len(),
                got: measurements.len(),
            });
        }
        let mut g_minus = 0.0;
        let mut g_plus = 0.0;
        for (de, &m) in mine.iter().zip(measurements) {
            let (lo, hi) = self.edge_bounds(de, m);
            g_minus += lo;
            g_plus += hi;
        }
        Ok((g_minus, g_plus))
    }
}

/// Dead-zone control law: move only when the certified interval has a
/// definite sign. `u > 0` implies `g_plus < 0`; `u < 0` implies
/// `g_minus > 0`; an interval straddling 0 gives `u = 0`.
pub fn control(g_minus: f64, g_plus: f64) -> Result<f64, MultiAgentError> {
    if g_minus > g_plus {
        return Err(MultiAgentError::InvertedInterval { g_minus, g_plus });
    }
    Ok(-g_minus.max(0.0) - g_plus.min(0.0))
}

/// Result of one explicit-Euler step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub y_next: Vec<f64>,
    pub record: StepRecord,
    /// `dy_i = h_i(t, u_i)` at the pre-step state.
    pub velocity: Vec<f64>,
}

impl MultiAgentConfig {
    /// Evaluates measurements, bounds, controls and actuators at `(t, y)` and
    /// advances one explicit Euler step.
    pub fn step(&self, t: f64, y: &[f64]) -> Result<StepResult, MultiAgentError> {
        if !y.iter().all(|v| v.is_finite()) {
            return Err(MultiAgentError::NonFiniteState { t });
        }
        let directed = self.directed_edges();
        let perturbations = self.realized_perturbations(t, y);
        let mut g_minus = vec![0.0f64; self.n];
        let mut g_plus = vec![0.0f64; self.n];
        for (idx, de) in directed.iter().enumerate() {
            let measured = y[de.neighbor] - y[de.observer] + perturbations[idx];
            let (lo, hi) = self.edge_bounds(de, measured);
            g_minus[de.observer] += lo;
            g_plus[de.observer] += hi;
        }
        let mut u = vec![0.0f64; self.n];
        let mut velocity = vec![0.0f64; self.n];
        let mut y_next = y.to_vec();
        for i in 0..self.n {
            u[i] = control(g_minus[i], g_plus[i])?;
            velocity[i] = self.actuators[i].apply(t, u[i]);
            y_next[i] = y[i] + self.dt * velocity[i];
        }
        Ok(StepResult {
            y_next,
            record: StepRecord { t, u, g_minus, g_plus, perturbations },
            velocity,
        })
    }

    fn sample_count(&self) -> usize {
        let ratio = self.t_end / self.dt;
        let steps = if (ratio - ratio.round()).abs() < 1e-9 { ratio.round() } else { ratio.ceil() };
        steps as usize
    }

    /// Integrates the system with explicit Euler over `[0, t_end]`, sampling
    /// every `dt`. Derivative samples `dy(t_k) = h(t_k, u(t_k))` are stored
    /// analytically. Deterministic for a fixed config and seed.
    pub fn simulate(&self) -> Result<SimOutput, SimError> {
        self.validate()?;
        let steps = self.sample_count();
        let mut times = Vec::with_capacity(steps + 1);
        let mut states = Vec::with_capacity(steps + 1);
        let mut derivs = Vec::with_capacity(steps + 1);
        let mut log = Vec::with_capacity(steps + 1);
        let mut y = self.y0.clone();
        for k in 0..=steps {
            let t = k as f64 * self.dt;
            let result = match self.step(t, &y) {
                Ok(r) => r,
                Err(MultiAgentError::NonFiniteState { .. }) => {
                    let trajectory = Trajectory::new(times, states, Some(derivs))
                        .map_err(|e| MultiAgentError::InvalidConfig(e.to_string()))?;
                    return Err(SimError::Diverged {
                        t,
                        partial: Box::new(SimOutput { trajectory, log }),
                    });
                }
                Err(e) => return Err(e.into()),
            };
            times.push(t);
            states.push(DVector::from_column_slice(&y));
            derivs.push(DVector::from_column_slice(&result.velocity));
            log.push(result.record);
            if k < steps {
                y = result.y_next;
            }
        }
        let trajectory = Trajectory::new(times, states, Some(derivs))
            .map_err(|e| MultiAgentError::InvalidConfig(e.to_string()))?;
        Ok(SimOutput { trajectory, log })
    }

    /// Perturbation-inflated gradient bounds evaluated at a true state:
    /// `g~_i^+ = -sum f'_ij(x_j - x_i - 2 pbar)`, `g~_i^-` with `+ 2 pbar`.
    pub fn tilde_bounds(&self, x: &[f64]) -> Vec<(f64, f64)> {
        let directed = self.directed_edges();
        let mut out = vec![(0.0f64, 0.0f64); self.n];
        for de in &directed {
            let gap = x[de.neighbor] - x[de.observer];
            let pbar = self.edges[de.edge].potential.pbar;
            out[de.observer].0 -= self.directed_deriv(de, gap + 2.0 * pbar);
            out[de.observer].1 -= self.directed_deriv(de, gap - 2.0 * pbar);
        }
        out
    }
}

/// Per-agent residual-set membership: `g~_i^- <= tol` and `g~_i^+ >= -tol`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AgentSp {
    pub g_minus_tilde: f64,
    pub g_plus_tilde: f64,
    pub member: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpReport {
    pub agents: Vec<AgentSp>,
    pub member: bool,
}

impl MultiAgentConfig {
    /// Tests membership of `x` in the guaranteed limit set (the intersection
    /// of all agents' inflated dead zones).
    pub fn sp_membership(&self, x: &[f64], tol: f64) -> SpReport {
        let agents: Vec<AgentSp> = self
            .tilde_bounds(x)
            .into_iter()
            .map(|(lo, hi)| AgentSp {
                g_minus_tilde: lo,
                g_plus_tilde: hi,
                member: lo <= tol && hi >= -tol,
            })
            .collect();
        let member = agents.iter().all(|a| a.member);
        SpReport { agents, member }
    }
}

/// Minimizer of a pairwise energy restricted to the zero-sum subspace.
#[derive(Debug, Clone)]
pub struct MinimizerResult {
    pub x: DVector<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
}

const MINIMIZER_ITERATION_CAP: usize = 1_000_000;

/// Projected gradient descent with backtracking on the subspace
/// `sum_i x_i = 0`, run until the projected gradient norm falls below `tol`.
pub fn find_constrained_minimizer(
    v: &EnergyFunction,
    tol: f64,
) -> Result<MinimizerResult, MultiAgentError> {
    if v.edges().is_none() {
        return Err(MultiAgentError::InvalidConfig(
            "constrained minimizer requires a pairwise energy".into(),
        ));
    }
    if !v.is_connected().unwrap_or(false) {
        return Err(MultiAgentError::InvalidConfig(
            "constrained minimizer requires a connected graph".into(),
        ));
    }
    let n = v.dimension();
    let mut x = DVector::zeros(n);
    let mut fx = v.value(&x)?;
    for iter in 0..MINIMIZER_ITERATION_CAP {
        let g = v.gradient(&x)?;
        let mean = g.sum() / n as f64;
        let gp = g.map(|gi| gi - mean);
        let gp_norm = gp.norm();
        if gp_norm < tol {
            return Ok(MinimizerResult { x, grad_norm: gp_norm, iterations: iter });
        }
        // Armijo backtracking
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &x - step * &gp;
            let fc = v.value(&cand)?;
            if fc <= fx - 1e-4 * step * gp_norm * gp_norm {
                x = cand;
                fx = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // step underflow: gradient is at numerical noise level
            return Ok(MinimizerResult { x, grad_norm: gp_norm, iterations: iter });
        }
    }
    Err(MultiAgentError::IterationCap(MINIMIZER_ITERATION_CAP))
}

/// Largest consecutive increase of `max_k(y_k - x*_k)` and largest
/// consecutive decrease of `min_k(y_k - x*_k)` along the samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub max_upper_increase: f64,
    pub max_lower_decrease: f64,
}

pub fn envelope_monotonicity_check(traj: &Trajectory, x_star: &DVector<f64>) -> EnvelopeReport {
    let mut max_upper_increase = 0.0f64;
    let mut max_lower_decrease = 0.0f64;
    let mut prev: Option<(f64, f64)> = None;
    for y in traj.states() {
        let shifted = y - x_star;
        let upper = shifted.max();
        let lower = shifted.min();
        if let Some((pu, pl)) = prev {
            max_upper_increase = max_upper_increase.max(upper - pu);
            max_lower_decrease = max_lower_decrease.max(pl - lower);
        }
        prev = Some((upper, lower));
    }
    EnvelopeReport { max_upper_increase, max_lower_decrease }
}
