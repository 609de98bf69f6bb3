//! Energy surfaces, metrics, run configuration and iteration traces.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, IpmError, Result};
use crate::objective::PenaltyKind;
use crate::problems::periodic::PeriodicGrid;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// A smooth energy `V` on `R^dim`.
///
/// `gradient` returns the Riesz representer of `dV` in the surface's base
/// pairing `⟨u, v⟩ = w Σ u_i v_i`, with `w = pairing_weight()`. For ordinary
/// surfaces `w = 1` and this is the usual gradient; discretized fields use
/// the quadrature weight, so the gradient is the discrete L² variational
/// derivative. `hessian_action` and `dense_hessian` follow the same convention.
pub trait PotentialSurface: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> f64;

    fn gradient(&self, x: &Vector) -> Vector;

    /// Hessian-vector product. Defaults to central differences of the gradient.
    fn hessian_action(&self, x: &Vector, v: &Vector) -> Vector {
        let eps = default_fd_step(x, v);
        central_difference(self, x, v, eps)
    }

    fn dense_hessian(&self, _x: &Vector) -> Option<Matrix> {
        None
    }

    fn pairing_weight(&self) -> f64 {
        1.0
    }

    /// Optional preconditioner applied to metric-gradient steps of size `dt`
    /// during inner minimization. Must be self-adjoint and positive in the
    /// metric so that preconditioned steps remain descent directions.
    fn precondition_step(&self, _dt: f64, step: Vector) -> Vector {
        step
    }
}

/// Step used by [`hess_vec_fd`] when the caller has no better choice:
/// `sqrt(eps_mach) (1 + ‖x‖) / ‖v‖`.
pub fn default_fd_step(x: &Vector, v: &Vector) -> f64 {
    let vn = v.norm();
    let base = f64::EPSILON.sqrt() * (1.0 + x.norm());
    if vn > 0.0 {
        base / vn
    } else {
        base
    }
}

fn central_difference<S: PotentialSurface + ?Sized>(
    surface: &S,
    x: &Vector,
    v: &Vector,
    eps: f64,
) -> Vector {
    let plus = surface.gradient(&(x + v * eps));
    let minus = surface.gradient(&(x - v * eps));
    (plus - minus) / (2.0 * eps)
}

/// Central-difference Hessian-vector product
/// `(∇V(x + εv) − ∇V(x − εv)) / 2ε`.
pub fn hess_vec_fd<S: PotentialSurface + ?Sized>(
    surface: &S,
    x: &Vector,
    v: &Vector,
    eps: f64,
) -> Result<Vector> {
    check_dim(surface.dim(), x.len())?;
    check_dim(surface.dim(), v.len())?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(IpmError::InvalidArgument(format!("fd step must be positive, got {eps}")));
    }
    if !v.iter().all(|c| c.is_finite()) {
        return Err(IpmError::InvalidArgument("direction is not finite".into()));
    }
    let hv = central_difference(surface, x, v, eps);
    if hv.iter().all(|c| c.is_finite()) {
        Ok(hv)
    } else {
        Err(IpmError::NumericalFailure(
            "non-finite gradient in Hessian-vector product".into(),
        ))
    }
}

/// Largest relative error between central differences of `value` and the
/// directional derivative from `gradient`, over `n_dirs` random unit
/// directions. Errors are measured relative to `max(1, |∂_d V|)`.
pub fn gradient_consistency<S: PotentialSurface + ?Sized>(
    surface: &S,
    x: &Vector,
    n_dirs: usize,
    seed: u64,
) -> Result<f64> {
    check_dim(surface.dim(), x.len())?;
    if n_dirs == 0 {
        return Err(IpmError::InvalidArgument("n_dirs must be at least 1".into()));
    }
    let w = surface.pairing_weight();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grad = surface.gradient(x);
    let h = f64::EPSILON.cbrt() * (1.0 + x.amax());
    let mut worst: f64 = 0.0;
    for _ in 0..n_dirs {
        let d = random_unit(&mut rng, x.len());
        let fd = (surface.value(&(x + &d * h)) - surface.value(&(x - &d * h))) / (2.0 * h);
        let analytic = w * grad.dot(&d);
        if !fd.is_finite() || !analytic.is_finite() {
            return Err(IpmError::NumericalFailure(
                "non-finite value in gradient check".into(),
            ));
        }
        worst = worst.max((fd - analytic).abs() / analytic.abs().max(1.0));
    }
    Ok(worst)
}

pub(crate) fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let v = Vector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Which inner product the saddle search works in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    Euclidean,
    DiscreteHminus1,
}

/// Inner product used for eigenvectors, projectors and gradient flows.
///
/// Alongside the metric pairing `⟨·,·⟩_M` there is a base pairing
/// `⟨u, v⟩_B = w Σ u_i v_i` in which surface gradients are expressed.
/// The metric gradient of a functional with base gradient `g` is the vector
/// `G` with `⟨G, v⟩_M = ⟨g, v⟩_B` for all admissible `v`.
#[derive(Debug, Clone)]
pub enum Metric {
    /// `⟨u, v⟩ = Σ u_i v_i`; every vector is admissible.
    Euclidean,
    /// `⟨u, v⟩ = ⟨u, (−Δ)⁻¹ v⟩_{L²}` on zero-mean periodic grid functions.
    Hminus1(PeriodicGrid),
}

impl Metric {
    pub fn hminus1(n: usize) -> Result<Self> {
        Ok(Metric::Hminus1(PeriodicGrid::new(n)?))
    }

    pub fn kind(&self) -> MetricKind {
        match self {
            Metric::Euclidean => MetricKind::Euclidean,
            Metric::Hminus1(_) => MetricKind::DiscreteHminus1,
        }
    }

    pub fn base_weight(&self) -> f64 {
        match self {
            Metric::Euclidean => 1.0,
            Metric::Hminus1(g) => g.spacing(),
        }
    }

    pub fn base_dot(&self, u: &Vector, v: &Vector) -> f64 {
        self.base_weight() * u.dot(v)
    }

    pub fn base_norm(&self, u: &Vector) -> f64 {
        self.base_dot(u, u).sqrt()
    }

    pub fn inner(&self, u: &Vector, v: &Vector) -> f64 {
        match self {
            Metric::Euclidean => u.dot(v),
            Metric::Hminus1(g) => g.l2_inner(&g.remove_mean(u), &g.inv_neg_laplacian_projected(v)),
        }
    }

    pub fn norm(&self, u: &Vector) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// Converts a base-pairing gradient into the metric gradient
    /// (identity for Euclidean, `−Δ g` for H⁻¹).
    pub fn to_metric_gradient(&self, g: &Vector) -> Vector {
        match self {
            Metric::Euclidean => g.clone(),
            Metric::Hminus1(grid) => grid.neg_laplacian(g),
        }
    }

    /// Orthogonal projection onto the subspace where the metric is definite.
    pub fn project_admissible(&self, v: &Vector) -> Vector {
        match self {
            Metric::Euclidean => v.clone(),
            Metric::Hminus1(g) => g.remove_mean(v),
        }
    }

    /// Base-pairing representer of `⟨v, ·⟩_M`, i.e. `d` with
    /// `⟨d, w⟩_B = ⟨v, w⟩_M` for all `w`.
    pub fn riesz_dual(&self, v: &Vector) -> Vector {
        match self {
            Metric::Euclidean => v.clone(),
            Metric::Hminus1(g) => g.inv_neg_laplacian_projected(v),
        }
    }

    /// Matrix `T` (dim × r) whose columns span the admissible subspace and
    /// are orthonormal in the metric: `Tᵀ M T = I`.
    pub fn whitening(&self, dim: usize) -> Matrix {
        match self {
            Metric::Euclidean => Matrix::identity(dim, dim),
            Metric::Hminus1(g) => {
                let (mut q, ks) = g.zero_mean_fourier_basis();
                let h = g.spacing();
                for (j, k) in ks.iter().enumerate() {
                    let s = (g.neg_laplacian_symbol(*k) / h).sqrt();
                    q.column_mut(j).scale_mut(s);
                }
                q
            }
        }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            Metric::Euclidean => Ok(()),
            Metric::Hminus1(g) => check_dim(g.len(), dim),
        }
    }
}

/// Knobs of the iterative proximal minimization loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpmConfig {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    /// Gradient steps per subproblem (`M`).
    pub inner_steps: usize,
    pub dt: f64,
    /// Stop once the gradient norm falls to this value.
    pub tol: f64,
    pub max_outer: usize,
    pub penalty: PenaltyKind,
    pub eig_tol: f64,
    pub seed: u64,
    /// Gradient or iterate norms above this mark a run as diverged.
    pub blowup: f64,
    /// Backtracking (halving, sufficient decrease with c = 1e-4) on each inner step.
    pub line_search: bool,
    /// Count inner steps that increase the subproblem objective.
    pub check_descent: bool,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            rho: 100.0,
            inner_steps: 100,
            dt: 0.01,
            tol: 1e-8,
            max_outer: 200,
            penalty: PenaltyKind::SeparableQuartic,
            eig_tol: 1e-8,
            seed: 0,
            blowup: 1e6,
            line_search: false,
            check_descent: false,
        }
    }
}

impl IpmConfig {
    pub fn new(alpha: f64, beta: f64, rho: f64, inner_steps: usize, dt: f64, tol: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            beta,
            rho,
            inner_steps,
            dt,
            tol,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(IpmError::InvalidConfig(msg));
        if !(self.alpha + self.beta > 1.0) {
            return bad(format!(
                "alpha + beta must exceed 1, got {} + {}",
                self.alpha, self.beta
            ));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return bad(format!("rho must be finite and non-negative, got {}", self.rho));
        }
        if self.inner_steps == 0 {
            return bad("inner_steps must be positive".into());
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_outer == 0 {
            return bad("max_outer must be positive".into());
        }
        if !(self.eig_tol > 0.0) {
            return bad(format!("eig_tol must be positive, got {}", self.eig_tol));
        }
        if !(self.blowup > 0.0) {
            return bad(format!("blowup threshold must be positive, got {}", self.blowup));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub outer_index: usize,
    pub point: Vector,
    /// Norm of the metric gradient of `V`, measured in the base (L²) norm.
    pub grad_norm: f64,
    pub lambda1: f64,
    pub inner_steps_taken: usize,
    /// Seconds since the start of the run.
    pub wall_time: f64,
    /// Inner steps in this outer iteration that increased the subproblem objective.
    pub descent_violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStatus {
    Converged,
    MaxIterations,
    Diverged,
    NumericalFailure,
}

impl TraceStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceStatus::Converged => "converged",
            TraceStatus::MaxIterations => "max_iterations",
            TraceStatus::Diverged => "diverged",
            TraceStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub status: TraceStatus,
    pub final_point: Vector,
    /// Set when any inner step increased the subproblem objective.
    pub step_size_warning: bool,
    /// Reason attached to `NumericalFailure` or `Diverged`.
    pub failure: Option<String>,
}

impl IterationTrace {
    pub fn converged(&self) -> bool {
        self.status == TraceStatus::Converged
    }

    pub fn outer_iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.outer_index)
    }

    pub fn grad_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.grad_norm).collect()
    }

    pub fn last_grad_norm(&self) -> Option<f64> {
        self.records.last().map(|r| r.grad_norm)
    }
}
