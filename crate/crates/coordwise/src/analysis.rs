//! Trajectory-side checks: coordinate-wise decrease conditions, energy
//! monotonicity, accumulation-point estimation, Hessian kernel certificates
//! and the convergence/condition-(b) classification.
//!
//! All checks are sampled: a condition that holds almost everywhere in
//! continuous time can only be verified at the sample points, so analytic
//! derivative samples are preferred over finite-difference estimates whenever
//! they are available.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{EnergyError, EnergyFunction};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("trajectory has too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("trajectory times must be strictly increasing (violation at index {0})")]
    NonIncreasingTimes(usize),
    #[error("trajectory contains a non-finite value at sample {0}")]
    NonFiniteState(usize),
    #[error("inconsistent trajectory shapes: {0}")]
    ShapeMismatch(String),
    #[error("derivative samples are missing; call estimate_derivatives first")]
    DerivativesMissing,
    #[error("matrix is not symmetric within tolerance (max asymmetry {0:e})")]
    NonSymmetric(f64),
    #[error("basis columns are not orthonormal (max deviation {0:e})")]
    NonOrthonormal(f64),
    #[error("empty trajectory tail")]
    EmptyTail,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Time samples of a trajectory `y(t)`, optionally with derivative samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    derivatives: Option<Vec<DVector<f64>>>,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        states: Vec<DVector<f64>>,
        derivatives: Option<Vec<DVector<f64>>>,
    ) -> Result<Self, AnalysisError> {
        if times.len() != states.len() {
            return Err(AnalysisError::ShapeMismatch(format!(
                "{} times but {} states",
                times.len(),
                states.len()
            )));
        }
        if times.is_empty() {
            return Err(AnalysisError::TooFewSamples { need: 1, got: 0 });
        }
        let dim = states[0].len();
        for (k, t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(AnalysisError::NonFiniteState(k));
            }
            if k > 0 && times[k] <= times[k - 1] {
                return Err(AnalysisError::NonIncreasingTimes(k));
            }
        }
        for (k, s) in states.iter().enumerate() {
            if s.len() != dim {
                return Err(AnalysisError::ShapeMismatch(format!(
                    "state {} has dimension {}, expected {}",
                    k,
                    s.len(),
                    dim
                )));
            }
            if !s.iter().all(|v| v.is_finite()) {
                return Err(AnalysisError::NonFiniteState(k));
            }
        }
        if let Some(d) = &derivatives {
            if d.len() != times.len() {
                return Err(AnalysisError::ShapeMismatch(format!(
                    "{} derivative samples but {} states",
                    d.len(),
                    times.len()
                )));
            }
            for (k, s) in d.iter().enumerate() {
                if s.len() != dim {
                    return Err(AnalysisError::ShapeMismatch(format!(
                        "derivative {} has dimension {}, expected {}",
                        k,
                        s.len(),
                        dim
                    )));
                }
            }
        }
        Ok(Self { times, states, derivatives })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.states[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn derivatives(&self) -> Option<&[DVector<f64>]> {
        self.derivatives.as_deref()
    }

    pub fn has_derivatives(&self) -> bool {
        self.derivatives.is_some()
    }
}

/// Fills in derivative samples by finite differences: central differences at
/// interior samples, one-sided at the endpoints. Pre-existing derivative
/// samples are never overwritten.
pub fn estimate_derivatives(traj: &Trajectory) -> Result<Trajectory, AnalysisError> {
    if traj.has_derivatives() {
        return Ok(traj.clone());
    }
    let n = traj.len();
    if n < 3 {
        return Err(AnalysisError::TooFewSamples { need: 3, got: n });
    }
    let t = traj.times();
    let y = traj.states();
    let mut d = Vec::with_capacity(n);
    d.push((&y[1] - &y[0]) / (t[1] - t[0]));
    for k in 1..n - 1 {
        d.push((&y[k + 1] - &y[k - 1]) / (t[k + 1] - t[k - 1]));
    }
    d.push((&y[n - 1] - &y[n - 2]) / (t[n - 1] - t[n - 2]));
    Trajectory::new(t.to_vec(), y.to_vec(), Some(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionMode {
    /// `dy_i * grad_i <= 0` at every sample and coordinate.
    Weak,
    /// A moving coordinate must have certified strict descent:
    /// `|dy_i| > zero_tol` and `dy_i * grad_i >= -tol` is a violation.
    Strict,
}

/// A flagged sample/coordinate pair with its decrease product.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Violation {
    pub sample: usize,
    pub coordinate: usize,
    pub product: f64,
}

/// Per-sample, per-coordinate products `dy_i(t_k) * grad_i(y(t_k))` with the
/// entries that violate the requested condition.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub mode: ConditionMode,
    pub samples: usize,
    pub coordinates: usize,
    pub violations: Vec<Violation>,
    /// Largest product observed over the checked entries (all entries in weak
    /// mode, moving coordinates in strict mode). `-inf` if nothing was checked.
    pub worst_violation: f64,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn checked_pairs(&self) -> usize {
        self.samples * self.coordinates
    }
}

fn condition_products(
    traj: &Trajectory,
    v: &EnergyFunction,
) -> Result<Vec<DVector<f64>>, AnalysisError> {
    let derivs = traj.derivatives().ok_or(AnalysisError::DerivativesMissing)?;
    let mut out = Vec::with_capacity(traj.len());
    for (y, dy) in traj.states().iter().zip(derivs) {
        let g = v.gradient(y)?;
        out.push(dy.component_mul(&g));
    }
    Ok(out)
}

/// Checks the weak coordinate-wise decrease condition along the samples:
/// flags every `(k, i)` with `dy_i(t_k) * grad_i(y(t_k)) > tol`.
pub fn check_condition_cw(
    traj: &Trajectory,
    v: &EnergyFunction,
    tol: f64,
) -> Result<ConditionReport, AnalysisError> {
    let products = condition_products(traj, v)?;
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (k, p) in products.iter().enumerate() {
        for i in 0..p.len() {
            worst = worst.max(p[i]);
            if p[i] > tol {
                violations.push(Violation { sample: k, coordinate: i, product: p[i] });
            }
        }
    }
    Ok(ConditionReport {
        mode: ConditionMode::Weak,
        samples: traj.len(),
        coordinates: traj.dimension(),
        violations,
        worst_violation: worst,
    })
}

/// Checks the strict condition: any coordinate moving faster than `zero_tol`
/// must have `dy_i * grad_i < -tol`.
pub fn check_condition_strict(
    traj: &Trajectory,
    v: &EnergyFunction,
    zero_tol: f64,
    tol: f64,
) -> Result<ConditionReport, AnalysisError> {
    let products = condition_products(traj, v)?;
    let derivs = traj.derivatives().ok_or(AnalysisError::DerivativesMissing)?;
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (k, (p, dy)) in products.iter().zip(derivs).enumerate() {
        for i in 0..p.len() {
            if dy[i].abs() > zero_tol {
                worst = worst.max(p[i]);
                if p[i] >= -tol {
                    violations.push(Violation { sample: k, coordinate: i, product: p[i] });
                }
            }
        }
    }
    Ok(ConditionReport {
        mode: ConditionMode::Strict,
        samples: traj.len(),
        coordinates: traj.dimension(),
        violations,
        worst_violation: worst,
    })
}

/// Energy values along the trajectory with the largest consecutive increase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyProfile {
    pub values: Vec<f64>,
    pub max_increase: f64,
    pub monotone: bool,
}

pub fn energy_profile_monotone(
    traj: &Trajectory,
    v: &EnergyFunction,
    tol: f64,
) -> Result<EnergyProfile, AnalysisError> {
    if traj.len() < 2 {
        return Err(AnalysisError::TooFewSamples { need: 2, got: traj.len() });
    }
    let mut values = Vec::with_capacity(traj.len());
    for y in traj.states() {
        values.push(v.value(y)?);
    }
    let mut max_increase = 0.0f64;
    for k in 1..values.len() {
        max_increase = max_increase.max(values[k] - values[k - 1]);
    }
    Ok(EnergyProfile { monotone: max_increase <= tol, values, max_increase })
}

/// Greedy radius clustering of the trajectory tail. Cluster seeds are fixed by
/// sample order; centers are the member means, ordered by member count
/// (descending, ties by first appearance).
pub fn estimate_accumulation_points(
    traj: &Trajectory,
    tail_fraction: f64,
    cluster_radius: f64,
) -> Result<Vec<DVector<f64>>, AnalysisError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(AnalysisError::InvalidParam(format!(
            "tail_fraction must be in (0, 1], got {tail_fraction}"
        )));
    }
    if !(cluster_radius > 0.0) {
        return Err(AnalysisError::InvalidParam(format!(
            "cluster_radius must be > 0, got {cluster_radius}"
        )));
    }
    let n = traj.len();
    let tail_len = ((tail_fraction * n as f64).ceil() as usize).clamp(1, n);
    let tail = &traj.states()[n - tail_len..];
    if tail.is_empty() {
        return Err(AnalysisError::EmptyTail);
    }
    let mut seeds: Vec<DVector<f64>> = Vec::new();
    let mut sums: Vec<DVector<f64>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for y in tail {
        let mut assigned = false;
        for (c, seed) in seeds.iter().enumerate() {
            if (y - seed).norm() <= cluster_radius {
                sums[c] += y;
                counts[c] += 1;
                assigned = true;
                break;
            }
        }
        if !assigned {
            seeds.push(y.clone());
            sums.push(y.clone());
            counts.push(1);
        }
    }
    let mut order: Vec<usize> = (0..seeds.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .map(|c| &sums[c] / counts[c] as f64)
        .collect())
}

/// Orthonormal basis of the numerical kernel of a symmetric matrix: right
/// singular vectors whose singular values fall below `rank_tol * max(1, sigma_max)`.
pub fn hessian_kernel_basis(
    h: &DMatrix<f64>,
    rank_tol: f64,
) -> Result<DMatrix<f64>, AnalysisError> {
    let asym = (h - h.transpose()).amax();
    if asym > 1e-10 * h.amax().max(1.0) {
        return Err(AnalysisError::NonSymmetric(asym));
    }
    let n = h.nrows();
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sigma_max = svd.singular_values.amax();
    let threshold = rank_tol * sigma_max.max(1.0);
    let mut cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] < threshold)
        .collect();
    // smallest singular values first
    cols.sort_by(|&a, &b| {
        svd.singular_values[a]
            .partial_cmp(&svd.singular_values[b])
            .unwrap()
    });
    let mut basis = DMatrix::zeros(n, cols.len());
    for (j, &i) in cols.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    Ok(basis)
}

/// Numerical certificate for condition (b): the stacked `2n x n` system
/// `[hessian; diag(gradient)] v = 0` admits a nontrivial solution iff the
/// stacked matrix is rank deficient.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConditionBReport {
    pub point: Vec<f64>,
    /// Smallest singular value of the stacked matrix.
    pub sigma_min: f64,
    /// Largest singular value of the stacked matrix.
    pub sigma_max: f64,
    /// `sigma_min < rank_tol * max(1, sigma_max)`
    pub holds: bool,
    /// Unit right singular vector for `sigma_min`.
    pub kernel_vector: Vec<f64>,
    /// `v_i * grad_i(x)` for the candidate kernel vector.
    pub per_coordinate_products: Vec<f64>,
}

pub fn condition_b_certificate(
    v: &EnergyFunction,
    x: &DVector<f64>,
    rank_tol: f64,
) -> Result<ConditionBReport, AnalysisError> {
    let n = x.len();
    let h = v.hessian(x)?;
    let g = v.gradient(x)?;
    let mut stacked = DMatrix::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&h);
    for i in 0..n {
        stacked[(n + i, i)] = g[i];
    }
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut min_idx = 0;
    let mut max_idx = 0;
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] < svd.singular_values[min_idx] {
            min_idx = i;
        }
        if svd.singular_values[i] > svd.singular_values[max_idx] {
            max_idx = i;
        }
    }
    let sigma_min = svd.singular_values[min_idx];
    let sigma_max = svd.singular_values[max_idx];
    let kernel_vector: Vec<f64> = v_t.row(min_idx).iter().cloned().collect();
    let per_coordinate_products = kernel_vector.iter().zip(g.iter()).map(|(a, b)| a * b).collect();
    Ok(ConditionBReport {
        point: x.iter().cloned().collect(),
        sigma_min,
        sigma_max,
        holds: sigma_min < rank_tol * sigma_max.max(1.0),
        kernel_vector,
        per_coordinate_products,
    })
}

/// Whether the subspace spanned by the orthonormal columns of `basis` contains
/// a nonzero vector with at least one zero entry. For a single basis vector
/// this reduces to an entry test; any subspace of dimension >= 2 contains such
/// a vector.
pub fn kernel_zero_component_property(
    basis: &DMatrix<f64>,
    zero_tol: f64,
) -> Result<bool, AnalysisError> {
    let d = basis.ncols();
    if d == 0 {
        return Ok(false);
    }
    let gram = basis.transpose() * basis;
    let dev = (&gram - DMatrix::identity(d, d)).amax();
    if dev > 1e-8 {
        return Err(AnalysisError::NonOrthonormal(dev));
    }
    if d >= 2 {
        return Ok(true);
    }
    Ok(basis.column(0).iter().any(|v| v.abs() < zero_tol))
}

/// Coordinates on which the gradient of `V` (numerically) vanishes at `point`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KMembership {
    pub point: Vec<f64>,
    pub indices: Vec<usize>,
}

pub fn k_membership(
    v: &EnergyFunction,
    x: &DVector<f64>,
    grad_tol: f64,
) -> Result<KMembership, AnalysisError> {
    let g = v.gradient(x)?;
    let indices = (0..g.len()).filter(|&i| g[i].abs() <= grad_tol).collect();
    Ok(KMembership { point: x.iter().cloned().collect(), indices })
}

/// Tolerances and thresholds for the classification pipeline.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnalysisParams {
    /// Tolerance on the decrease products of the weak condition.
    pub condition_tol: f64,
    /// Below this speed a coordinate counts as stopped (strict mode).
    pub zero_tol: f64,
    /// Gradient-component tolerance for K-membership.
    pub grad_tol: f64,
    /// Relative singular-value threshold for rank decisions.
    pub rank_tol: f64,
    /// Tail diameter below which the trajectory counts as converged.
    pub eps_conv: f64,
    /// Fraction of samples forming the analyzed tail.
    pub tail_fraction: f64,
    /// Greedy clustering radius for accumulation-point estimation.
    pub cluster_radius: f64,
    /// Norm beyond which the trajectory counts as escaping.
    pub radius_threshold: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            condition_tol: 1e-9,
            zero_tol: 1e-12,
            grad_tol: 1e-8,
            rank_tol: 1e-8,
            eps_conv: 1e-4,
            tail_fraction: 0.25,
            cluster_radius: 1e-3,
            radius_threshold: 1e6,
        }
    }
}

/// Outcome of the trajectory classification.
#[derive(Debug, Clone)]
pub enum ConvergenceVerdict {
    Converged {
        limit: DVector<f64>,
        tail_diameter: f64,
    },
    NotConverged {
        accumulation_points: Vec<DVector<f64>>,
        condition_b: Vec<ConditionBReport>,
    },
    Unbounded {
        exit_radius: f64,
    },
    Inconclusive {
        reason: String,
    },
}

/// Upper bound on the tail diameter; exact when the tail is small, otherwise
/// the bounding-box diagonal (within a factor sqrt(n) of the true diameter).
fn tail_diameter(tail: &[DVector<f64>]) -> f64 {
    let n = tail[0].len();
    let mut lo = tail[0].clone();
    let mut hi = tail[0].clone();
    for y in tail.iter().skip(1) {
        for i in 0..n {
            lo[i] = lo[i].min(y[i]);
            hi[i] = hi[i].max(y[i]);
        }
    }
    let bbox_diag = (&hi - &lo).norm();
    let max_range = (0..n).map(|i| hi[i] - lo[i]).fold(0.0f64, f64::max);
    if bbox_diag == max_range || tail.len() <= 2 {
        // 1-D ranges (or a degenerate tail): the bound is exact.
        return bbox_diag;
    }
    // Exact pairwise maximum on at most 2000 evenly strided samples.
    let stride = (tail.len() + 1999) / 2000;
    let pts: Vec<&DVector<f64>> = tail.iter().step_by(stride).collect();
    let mut diam = 0.0f64;
    for (i, a) in pts.iter().enumerate() {
        for b in pts.iter().skip(i + 1) {
            diam = diam.max((*a - *b).norm());
        }
    }
    // The subsampled estimate is a lower bound; keep the conservative side
    // when deciding convergence by reporting the larger of the stride-exact
    // diameter and the per-coordinate range bound.
    diam.max(max_range)
}

/// Classifies the trajectory per the convergence dichotomy: converged,
/// escaped to infinity, or not converged with condition-(b) certificates at
/// every estimated accumulation point. Inconclusive when the weak condition
/// fails or the trajectory is too short.
pub fn classify_convergence(
    traj: &Trajectory,
    v: &EnergyFunction,
    params: &AnalysisParams,
) -> Result<ConvergenceVerdict, AnalysisError> {
    if traj.len() < 10 {
        return Ok(ConvergenceVerdict::Inconclusive {
            reason: format!("trajectory has only {} samples (need at least 10)", traj.len()),
        });
    }
    let traj = estimate_derivatives(traj)?;
    let weak = check_condition_cw(&traj, v, params.condition_tol)?;
    if !weak.passed() {
        return Ok(ConvergenceVerdict::Inconclusive {
            reason: format!(
                "coordinate-wise decrease condition violated at {} of {} sample-coordinate pairs (worst product {:e})",
                weak.violations.len(),
                weak.checked_pairs(),
                weak.worst_violation
            ),
        });
    }

    // Escape test: norm exceeds the threshold and never falls back below half.
    let norms: Vec<f64> = traj.states().iter().map(|y| y.norm()).collect();
    if let Some(first) = norms.iter().position(|&r| r > params.radius_threshold) {
        if norms[first..].iter().all(|&r| r > 0.5 * params.radius_threshold) {
            return Ok(ConvergenceVerdict::Unbounded { exit_radius: norms[first] });
        }
    }

    let n = traj.len();
    let tail_len = ((params.tail_fraction * n as f64).ceil() as usize).clamp(1, n);
    let tail = &traj.states()[n - tail_len..];
    let diameter = tail_diameter(tail);
    if diameter < params.eps_conv {
        let mut limit = DVector::zeros(traj.dimension());
        for y in tail {
            limit += y;
        }
        limit /= tail.len() as f64;
        return Ok(ConvergenceVerdict::Converged { limit, tail_diameter: diameter });
    }

    let centers =
        estimate_accumulation_points(&traj, params.tail_fraction, params.cluster_radius)?;
    let mut reports = Vec::with_capacity(centers.len());
    for c in &centers {
        reports.push(condition_b_certificate(v, c, params.rank_tol)?);
    }
    Ok(ConvergenceVerdict::NotConverged {
        accumulation_points: centers,
        condition_b: reports,
    })
}
