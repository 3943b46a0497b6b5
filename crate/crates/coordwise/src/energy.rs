//! Twice-differentiable energy functions with exact gradients and Hessians.
//!
//! Four families are provided:
//! - `Quadratic`: `V(x) = x^T Q x` for a symmetric `Q`.
//! - `Pairwise`: a graph-coupled energy `V(x) = sum_i sum_{j~i} f_ij(x_j - x_i)`,
//!   where each undirected edge carries one potential and the reverse direction
//!   is materialized through the symmetry `f_ji(z) = f_ij(-z)`. Each undirected
//!   edge is therefore counted twice, once per direction.
//! - `BoxDistanceQuartic`: the fourth power of the Euclidean distance to an
//!   axis-aligned box.
//! - `EuclideanNorm`: `V(x) = ||x||_2`, a demo energy for the spiral scenario.
//!   It is not C^2 at the origin and is meant to be evaluated away from it;
//!   at exactly 0 the gradient and Hessian are reported as 0.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric (max asymmetry {max_asym:e})")]
    NonSymmetric { max_asym: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Shape of an edge potential `f(z)`. All shipped kinds are C^2 with locally
/// Lipschitz second derivative, locally strongly convex, attain their minimum
/// value 0 at `z = spacing`, and have nondecreasing `f'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialKind {
    /// `f(z) = w (z - d)^2 / 2`
    QuadraticSpacing { weight: f64, spacing: f64 },
    /// `f(z) = w (z - d)^2 / 2 + beta (z - d)^4`
    QuadQuartic { weight: f64, spacing: f64, quartic: f64 },
    /// `f(z) = w (cosh(z - d) - 1)`
    Cosh { weight: f64, spacing: f64 },
}

/// An edge potential together with its perturbation bound `pbar`, shared by
/// both directions of the edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgePotential {
    pub kind: PotentialKind,
    #[serde(default)]
    pub pbar: f64,
}

impl EdgePotential {
    pub fn new(kind: PotentialKind, pbar: f64) -> Result<Self, EnergyError> {
        let p = Self { kind, pbar };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if !self.pbar.is_finite() || self.pbar < 0.0 {
            return Err(EnergyError::InvalidParams(format!(
                "pbar must be finite and >= 0, got {}",
                self.pbar
            )));
        }
        match self.kind {
            PotentialKind::QuadraticSpacing { weight, spacing }
            | PotentialKind::Cosh { weight, spacing } => {
                if !(weight > 0.0) || !spacing.is_finite() {
                    return Err(EnergyError::InvalidParams(format!(
                        "potential requires weight > 0 and finite spacing, got w={weight}, d={spacing}"
                    )));
                }
            }
            PotentialKind::QuadQuartic { weight, spacing, quartic } => {
                if !(weight > 0.0) || !spacing.is_finite() || !(quartic >= 0.0) {
                    return Err(EnergyError::InvalidParams(format!(
                        "quad-quartic requires weight > 0 and quartic >= 0, got w={weight}, d={spacing}, beta={quartic}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `f(z)`, normalized so the minimum value is 0.
    pub fn value(&self, z: f64) -> f64 {
        match self.kind {
            PotentialKind::QuadraticSpacing { weight, spacing } => {
                let s = z - spacing;
                0.5 * weight * s * s
            }
            PotentialKind::QuadQuartic { weight, spacing, quartic } => {
                let s = z - spacing;
                0.5 * weight * s * s + quartic * s * s * s * s
            }
            PotentialKind::Cosh { weight, spacing } => weight * ((z - spacing).cosh() - 1.0),
        }
    }

    /// `f'(z)`; nondecreasing for every shipped kind.
    pub fn deriv(&self, z: f64) -> f64 {
        match self.kind {
            PotentialKind::QuadraticSpacing { weight, spacing } => weight * (z - spacing),
            PotentialKind::QuadQuartic { weight, spacing, quartic } => {
                let s = z - spacing;
                weight * s + 4.0 * quartic * s * s * s
            }
            PotentialKind::Cosh { weight, spacing } => weight * (z - spacing).sinh(),
        }
    }

    /// `f''(z)`; strictly positive on a neighborhood of the minimum.
    pub fn second_deriv(&self, z: f64) -> f64 {
        match self.kind {
            PotentialKind::QuadraticSpacing { weight, .. } => weight,
            PotentialKind::QuadQuartic { weight, spacing, quartic } => {
                let s = z - spacing;
                weight + 12.0 * quartic * s * s
            }
            PotentialKind::Cosh { weight, spacing } => weight * (z - spacing).cosh(),
        }
    }
}

/// One undirected edge `{a, b}` of the coupling graph with its stored
/// potential `f_ab`. The reverse potential is `f_ba(z) = f_ab(-z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub potential: EdgePotential,
}

impl Edge {
    /// `f'_{observer,other}(z)` where `z = x_other - x_observer`.
    pub fn deriv_from(&self, observer: usize, z: f64) -> f64 {
        if observer == self.a {
            self.potential.deriv(z)
        } else {
            // f_ba(z) = f_ab(-z)  =>  f'_ba(z) = -f'_ab(-z)
            -self.potential.deriv(-z)
        }
    }

    /// `f''_{observer,other}(z)` where `z = x_other - x_observer`.
    pub fn second_deriv_from(&self, observer: usize, z: f64) -> f64 {
        if observer == self.a {
            self.potential.second_deriv(z)
        } else {
            self.potential.second_deriv(-z)
        }
    }

    pub fn other(&self, observer: usize) -> usize {
        if observer == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone)]
enum Family {
    Quadratic {
        q: DMatrix<f64>,
        psd: bool,
    },
    Pairwise {
        n: usize,
        edges: Vec<Edge>,
        connected: bool,
    },
    BoxDistanceQuartic {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    EuclideanNorm {
        n: usize,
    },
}

/// An evaluable energy `V` with exact gradient and Hessian.
///
/// Immutable after construction; evaluation is a pure function and safe for
/// concurrent read-only use.
#[derive(Debug, Clone)]
pub struct EnergyFunction {
    family: Family,
    dim: usize,
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), EnergyError> {
    let scale = m.amax().max(1.0);
    let mut max_asym = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            max_asym = max_asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if max_asym > 1e-12 * scale {
        return Err(EnergyError::NonSymmetric { max_asym });
    }
    Ok(())
}

fn graph_connected(n: usize, edges: &[Edge]) -> bool {
    if n == 0 {
        return false;
    }
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push(e.b);
        adj[e.b].push(e.a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}

impl EnergyFunction {
    /// `V(x) = x^T Q x`. `Q` must be symmetric; positive semi-definiteness is
    /// recorded but not required.
    pub fn quadratic(q: DMatrix<f64>) -> Result<Self, EnergyError> {
        if q.nrows() != q.ncols() || q.nrows() == 0 {
            return Err(EnergyError::InvalidParams(format!(
                "Q must be square and non-empty, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        check_symmetric(&q)?;
        let dim = q.nrows();
        let sym = (q.clone() + q.transpose()) * 0.5;
        let eigs = sym.symmetric_eigenvalues();
        let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let psd = min_eig >= -1e-10 * q.amax().max(1.0);
        Ok(Self {
            family: Family::Quadratic { q, psd },
            dim,
        })
    }

    /// Graph-coupled pairwise energy on `n` nodes. Edge indices must be valid
    /// and distinct per edge; connectivity is checked and recorded.
    pub fn pairwise(n: usize, edges: Vec<Edge>) -> Result<Self, EnergyError> {
        if n == 0 {
            return Err(EnergyError::InvalidParams("n must be positive".into()));
        }
        for e in &edges {
            if e.a >= n || e.b >= n {
                return Err(EnergyError::InvalidParams(format!(
                    "edge ({}, {}) out of range for n = {}",
                    e.a, e.b, n
                )));
            }
            if e.a == e.b {
                return Err(EnergyError::InvalidParams(format!("self-loop at node {}", e.a)));
            }
            e.potential.validate()?;
        }
        let connected = graph_connected(n, &edges);
        Ok(Self {
            family: Family::Pairwise { n, edges, connected },
            dim: n,
        })
    }

    /// `V(x) = d^4(x, C)` for the axis-aligned box `C = prod [l_i, u_i]`.
    pub fn box_distance_quartic(
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self, EnergyError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(EnergyError::InvalidParams(
                "lower and upper must be non-empty and of equal length".into(),
            ));
        }
        for i in 0..lower.len() {
            if !(lower[i] < upper[i]) {
                return Err(EnergyError::InvalidParams(format!(
                    "box requires lower < upper, got [{}, {}] at coordinate {}",
                    lower[i], upper[i], i
                )));
            }
        }
        let dim = lower.len();
        Ok(Self {
            family: Family::BoxDistanceQuartic { lower, upper },
            dim,
        })
    }

    /// `V(x) = ||x||_2`. Not C^2 at the origin; intended for evaluation away
    /// from it (spiral demo).
    pub fn euclidean_norm(n: usize) -> Result<Self, EnergyError> {
        if n == 0 {
            return Err(EnergyError::InvalidParams("n must be positive".into()));
        }
        Ok(Self {
            family: Family::EuclideanNorm { n },
            dim: n,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Whether `Q` was found PSD at construction (quadratic family only).
    pub fn is_psd(&self) -> Option<bool> {
        match &self.family {
            Family::Quadratic { psd, .. } => Some(*psd),
            _ => None,
        }
    }

    /// Whether the coupling graph is connected (pairwise family only).
    pub fn is_connected(&self) -> Option<bool> {
        match &self.family {
            Family::Pairwise { connected, .. } => Some(*connected),
            _ => None,
        }
    }

    pub fn edges(&self) -> Option<&[Edge]> {
        match &self.family {
            Family::Pairwise { edges, .. } => Some(edges),
            _ => None,
        }
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<(), EnergyError> {
        if x.len() != self.dim {
            return Err(EnergyError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Signed clamp excesses `e_i = max(x_i - u_i, 0) + min(x_i - l_i, 0)`.
    fn box_excess(lower: &DVector<f64>, upper: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| {
            (x[i] - upper[i]).max(0.0) + (x[i] - lower[i]).min(0.0)
        })
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64, EnergyError> {
        self.check_dim(x)?;
        Ok(match &self.family {
            Family::Quadratic { q, .. } => (x.transpose() * q * x)[(0, 0)],
            Family::Pairwise { edges, .. } => {
                // Each undirected edge counted twice: f_ab(z) + f_ba(-z) = 2 f_ab(z).
                edges
                    .iter()
                    .map(|e| 2.0 * e.potential.value(x[e.b] - x[e.a]))
                    .sum()
            }
            Family::BoxDistanceQuartic { lower, upper } => {
                let e = Self::box_excess(lower, upper, x);
                let d2 = e.norm_squared();
                d2 * d2
            }
            Family::EuclideanNorm { .. } => x.norm(),
        })
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>, EnergyError> {
        self.check_dim(x)?;
        Ok(match &self.family {
            Family::Quadratic { q, .. } => 2.0 * (q * x),
            Family::Pairwise { n, edges, .. } => {
                let mut g = DVector::zeros(*n);
                for e in edges {
                    let fp = e.potential.deriv(x[e.b] - x[e.a]);
                    // grad_i = -2 sum_{j~i} f'_ij(x_j - x_i)
                    g[e.a] -= 2.0 * fp;
                    g[e.b] += 2.0 * fp;
                }
                g
            }
            Family::BoxDistanceQuartic { lower, upper } => {
                let e = Self::box_excess(lower, upper, x);
                let d2 = e.norm_squared();
                4.0 * d2 * e
            }
            Family::EuclideanNorm { n } => {
                let r = x.norm();
                if r == 0.0 {
                    DVector::zeros(*n)
                } else {
                    x / r
                }
            }
        })
    }

    pub fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, EnergyError> {
        self.check_dim(x)?;
        Ok(match &self.family {
            Family::Quadratic { q, .. } => 2.0 * q,
            Family::Pairwise { n, edges, .. } => {
                // Laplacian of the weighted graph with edge weights 2 f''_ij.
                let mut h = DMatrix::zeros(*n, *n);
                for e in edges {
                    let fpp = e.potential.second_deriv(x[e.b] - x[e.a]);
                    h[(e.a, e.b)] -= 2.0 * fpp;
                    h[(e.b, e.a)] -= 2.0 * fpp;
                    h[(e.a, e.a)] += 2.0 * fpp;
                    h[(e.b, e.b)] += 2.0 * fpp;
                }
                h
            }
            Family::BoxDistanceQuartic { lower, upper } => {
                let e = Self::box_excess(lower, upper, x);
                let d2 = e.norm_squared();
                let n = x.len();
                DMatrix::from_fn(n, n, |i, j| {
                    let mut v = 8.0 * e[i] * e[j];
                    if i == j && e[i] != 0.0 {
                        v += 4.0 * d2;
                    }
                    v
                })
            }
            Family::EuclideanNorm { n } => {
                let r = x.norm();
                if r == 0.0 {
                    DMatrix::zeros(*n, *n)
                } else {
                    let u = x / r;
                    (DMatrix::identity(*n, *n) - &u * u.transpose()) / r
                }
            }
        })
    }
}

/// Result of the finite-difference self-check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FdReport {
    pub max_rel_err_grad: f64,
    pub max_rel_err_hess: f64,
}

impl EnergyFunction {
    /// Compares the analytic gradient against central differences of the value
    /// and the analytic Hessian against central differences of the gradient.
    /// Relative errors are normalized by `max(1, ||analytic||_max)`.
    pub fn fd_consistency(&self, x: &DVector<f64>, h: f64) -> Result<FdReport, EnergyError> {
        self.check_dim(x)?;
        if !(h > 0.0) {
            return Err(EnergyError::InvalidParams(format!("h must be > 0, got {h}")));
        }
        let n = self.dim;
        let grad = self.gradient(x)?;
        let hess = self.hessian(x)?;

        let mut max_abs_grad_err = 0.0f64;
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (self.value(&xp)? - self.value(&xm)?) / (2.0 * h);
            max_abs_grad_err = max_abs_grad_err.max((fd - grad[i]).abs());
        }
        let max_rel_err_grad = max_abs_grad_err / grad.amax().max(1.0);

        let mut max_abs_hess_err = 0.0f64;
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (self.gradient(&xp)? - self.gradient(&xm)?) / (2.0 * h);
            for i in 0..n {
                max_abs_hess_err = max_abs_hess_err.max((col[i] - hess[(i, j)]).abs());
            }
        }
        let max_rel_err_hess = max_abs_hess_err / hess.amax().max(1.0);

        Ok(FdReport {
            max_rel_err_grad,
            max_rel_err_hess,
        })
    }
}
