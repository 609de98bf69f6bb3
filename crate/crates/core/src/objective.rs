//! The reflected auxiliary function `W`, its proximal penalization `W̃ρ`,
//! and the quartic penalties.
//!
//! With `Π` the metric-orthogonal projector onto the span of the modes,
//!
//! ```text
//! W(y; x, u)  = (1 − α) V(y) + α V(y − Π(y − x)) − β V(x + Π(y − x))
//! W̃ρ(y; x, u) = W(y; x, u) + ρ d(x, y)
//! ```
//!
//! Gradients are first formed in the surface's base pairing and then
//! converted to the metric gradient on request.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, IpmError, Result};
use crate::linalg::symmetric_eigen;
use crate::minmode::ModeSet;
use crate::model::{IpmConfig, Matrix, Metric, PotentialSurface, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PenaltyKind {
    /// `d(x, y) = Σ (x_i − y_i)⁴`
    #[default]
    SeparableQuartic,
    /// `d(x, y) = (Σ (x_i − y_i)²)²`
    EuclideanQuartic,
}

impl PenaltyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PenaltyKind::SeparableQuartic => "separable",
            PenaltyKind::EuclideanQuartic => "euclidean",
        }
    }

    /// Penalty of the displacement `r = y − x` under quadrature weight `w`
    /// (`w Σ r⁴` or `(w Σ r²)²`).
    pub fn value(&self, r: &Vector, w: f64) -> f64 {
        match self {
            PenaltyKind::SeparableQuartic => w * r.iter().map(|c| c.powi(4)).sum::<f64>(),
            PenaltyKind::EuclideanQuartic => {
                let s = w * r.norm_squared();
                s * s
            }
        }
    }

    /// Gradient in `y` in the weighted pairing `w Σ u_i v_i`.
    pub fn gradient(&self, r: &Vector, w: f64) -> Vector {
        match self {
            PenaltyKind::SeparableQuartic => r.map(|c| 4.0 * c * c * c),
            PenaltyKind::EuclideanQuartic => r * (4.0 * w * r.norm_squared()),
        }
    }

    /// Coordinate Hessian in `y`.
    pub fn hessian(&self, r: &Vector, w: f64) -> Matrix {
        let n = r.len();
        match self {
            PenaltyKind::SeparableQuartic => {
                Matrix::from_diagonal(&r.map(|c| 12.0 * w * c * c))
            }
            PenaltyKind::EuclideanQuartic => {
                let s = w * r.norm_squared();
                Matrix::identity(n, n) * (4.0 * s * w) + (r * r.transpose()) * (8.0 * w * w)
            }
        }
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = IpmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separable" | "separable-quartic" => Ok(PenaltyKind::SeparableQuartic),
            "euclidean" | "euclidean-quartic" => Ok(PenaltyKind::EuclideanQuartic),
            other => Err(IpmError::InvalidArgument(format!("unknown penalty '{other}'"))),
        }
    }
}

/// A penalty together with its weight `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub rho: f64,
}

/// `d(x, y)` in the plain Euclidean pairing (the weight `ρ` is not applied).
pub fn penalty_value(p: &PenaltySpec, x: &Vector, y: &Vector) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    Ok(p.kind.value(&(y - x), 1.0))
}

/// `∇_y d(x, y)` in the plain Euclidean pairing.
pub fn penalty_grad_y(p: &PenaltySpec, x: &Vector, y: &Vector) -> Result<Vector> {
    check_dim(x.len(), y.len())?;
    Ok(p.kind.gradient(&(y - x), 1.0))
}

/// Center point and frozen modes defining the projector `Π`.
#[derive(Debug, Clone)]
pub struct ReflectionFrame {
    pub center: Vector,
    modes: Vec<Vector>,
    duals: Vec<Vector>,
    base_weight: f64,
}

impl ReflectionFrame {
    /// `modes` must be metric-orthonormal.
    pub fn new(metric: &Metric, center: Vector, modes: Vec<Vector>) -> Result<Self> {
        metric.check_dim(center.len())?;
        for v in &modes {
            check_dim(center.len(), v.len())?;
        }
        let duals = modes.iter().map(|v| metric.riesz_dual(v)).collect();
        Ok(Self {
            center,
            modes,
            duals,
            base_weight: metric.base_weight(),
        })
    }

    pub fn from_modes(metric: &Metric, center: Vector, modes: &ModeSet) -> Result<Self> {
        Self::new(metric, center, modes.vectors())
    }

    pub fn modes(&self) -> &[Vector] {
        &self.modes
    }

    pub fn k(&self) -> usize {
        self.modes.len()
    }

    fn bdot(&self, a: &Vector, b: &Vector) -> f64 {
        self.base_weight * a.dot(b)
    }

    /// `Π w = Σ v_i ⟨v_i, w⟩_M`.
    pub fn project(&self, w: &Vector) -> Vector {
        let mut out = Vector::zeros(w.len());
        for (v, d) in self.modes.iter().zip(&self.duals) {
            out.axpy(self.bdot(d, w), v, 1.0);
        }
        out
    }

    /// Adjoint of `Π` in the base pairing, `Π* g = Σ (M v_i) ⟨v_i, g⟩_B`.
    pub fn project_adjoint(&self, g: &Vector) -> Vector {
        let mut out = Vector::zeros(g.len());
        for (v, d) in self.modes.iter().zip(&self.duals) {
            out.axpy(self.bdot(v, g), d, 1.0);
        }
        out
    }

    /// The two reflected arguments `(y − Π(y−x), x + Π(y−x))`.
    pub fn arguments(&self, y: &Vector) -> (Vector, Vector) {
        let p = self.project(&(y - &self.center));
        (y - &p, &self.center + p)
    }
}

fn check_inputs<S: PotentialSurface + ?Sized>(
    surface: &S,
    frame: &ReflectionFrame,
    y: &Vector,
) -> Result<()> {
    check_dim(surface.dim(), y.len())?;
    check_dim(surface.dim(), frame.center.len())
}

/// `W(y; x, u)`.
pub fn w_value<S: PotentialSurface + ?Sized>(
    surface: &S,
    frame: &ReflectionFrame,
    y: &Vector,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    check_inputs(surface, frame, y)?;
    Ok(w_value_unchecked(surface, frame, y, alpha, beta))
}

pub(crate) fn w_value_unchecked<S: PotentialSurface + ?Sized>(
    surface: &S,
    frame: &ReflectionFrame,
    y: &Vector,
    alpha: f64,
    beta: f64,
) -> f64 {
    let (a, b) = frame.arguments(y);
    (1.0 - alpha) * surface.value(y) + alpha * surface.value(&a) - beta * surface.value(&b)
}

/// `W̃ρ(y; x, u)`; the penalty term is not evaluated when `ρ = 0`.
pub fn w_tilde_value<S: PotentialSurface + ?Sized>(
    surface: &S,
    frame: &ReflectionFrame,
    y: &Vector,
    config: &IpmConfig,
) -> Result<f64> {
    check_inputs(surface, frame, y)?;
    Ok(w_tilde_value_unchecked(surface, frame, y, config))
}

pub(crate) fn w_tilde_value_unchecked<S: PotentialSurface + ?Sized>(
    surface: &S,
    frame: &ReflectionFrame,
    y: &Vector,
    config: &IpmConfig,
) -> f64 {
    let w = w_value_unchecked(surface, frame, y, config.alpha, config.beta);
    if config.rho == 0.0 {
        w
    } else {
        w + config.rho * config.penalty.value(&(y - &frame.center), frame.base_weight)
    }
}

/// Base-pairing gradient of `W` in `y`.
pub fn w_grad<S: PotentialSurface + ?Sized>(
    surface: &S,
    frame: &ReflectionFrame,
    y: &Vector,
    alpha: f64,
    beta: f64,
) -> Result<Vector> {
    check_inputs(surface, frame, y)?;
    Ok(w_grad_unchecked(surface, frame, y, alpha, beta))
}

fn w_grad_unchecked<S: PotentialSurface + ?Sized>(
    surface: &S,
    frame: &ReflectionFrame,
    y: &Vector,
    alpha: f64,
    beta: f64,
) -> Vector {
    let (a, b) = frame.arguments(y);
    let ga = surface.gradient(&a);
    let gb = surface.gradient(&b);
    let mut g = &ga - frame.project_adjoint(&ga);
    g *= alpha;
    g.axpy(-beta, &frame.project_adjoint(&gb), 1.0);
    if alpha != 1.0 {
        g.axpy(1.0 - alpha, &surface.gradient(y), 1.0);
    }
    g
}

/// Base-pairing gradient of `W̃ρ` in `y`.
pub fn w_tilde_grad<S: PotentialSurface + ?Sized>(
    surface: &S,
    frame: &ReflectionFrame,
    y: &Vector,
    config: &IpmConfig,
) -> Result<Vector> {
    check_inputs(surface, frame, y)?;
    Ok(w_tilde_grad_unchecked(surface, frame, y, config))
}

pub(crate) fn w_tilde_grad_unchecked<S: PotentialSurface + ?Sized>(
    surface: &S,
    frame: &ReflectionFrame,
    y: &Vector,
    config: &IpmConfig,
) -> Vector {
    let mut g = w_grad_unchecked(surface, frame, y, config.alpha, config.beta);
    if config.rho != 0.0 {
        let pg = config.penalty.gradient(&(y - &frame.center), frame.base_weight);
        g.axpy(config.rho, &pg, 1.0);
    }
    g
}

/// Metric gradient of `W̃ρ` (what the inner gradient flow follows).
pub fn w_tilde_metric_grad<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    frame: &ReflectionFrame,
    y: &Vector,
    config: &IpmConfig,
) -> Result<Vector> {
    let g = w_tilde_grad(surface, frame, y, config)?;
    Ok(metric.project_admissible(&metric.to_metric_gradient(&g)))
}

/// `ℋ(x; x)` assembled from a symmetric Hessian `h` and the projector onto
/// its `k` lowest eigenvectors.
pub fn aux_hessian_center_matrix(h: &Matrix, alpha: f64, beta: f64, k: usize) -> Result<Matrix> {
    let n = h.nrows();
    if k == 0 || k > n {
        return Err(IpmError::InvalidArgument(format!("k = {k} out of range for dim {n}")));
    }
    let (_, vecs) = symmetric_eigen(h)?;
    let v = vecs.columns(0, k);
    let p = &v * v.transpose();
    let q = Matrix::identity(n, n) - &p;
    let out = h * (1.0 - alpha) + (&q * h * &q) * alpha - (&p * h * &p) * beta;
    Ok((&out + out.transpose()) * 0.5)
}

/// `ℋ(x; x)` for the index-1 frame at `x` (Euclidean metric, dense Hessian).
pub fn aux_hessian_center<S: PotentialSurface + ?Sized>(
    surface: &S,
    x: &Vector,
    alpha: f64,
    beta: f64,
) -> Result<Matrix> {
    check_dim(surface.dim(), x.len())?;
    let h = surface.dense_hessian(x).ok_or(IpmError::DenseHessianUnavailable)?;
    aux_hessian_center_matrix(&h, alpha, beta, 1)
}

/// `ρ̄ = (1 + 2|α| + |β|) λ̄ / λ̄_ε`.
///
/// Only meaningful for penalties whose Hessian is uniformly positive on the
/// sphere of radius ε, i.e. [`PenaltyKind::EuclideanQuartic`] with
/// `λ̄_ε = 4ε²` (see [`euclidean_quartic_lambda_eps`]). The separable quartic
/// has no such bound in dimension > 1.
pub fn rho_bar_estimate(lambda_bar: f64, alpha: f64, beta: f64, lambda_eps_bar: f64) -> Result<f64> {
    if !(lambda_bar > 0.0) || !(lambda_eps_bar > 0.0) {
        return Err(IpmError::InvalidArgument(format!(
            "rho_bar needs positive eigenvalue bounds, got {lambda_bar} and {lambda_eps_bar}"
        )));
    }
    Ok((1.0 + 2.0 * alpha.abs() + beta.abs()) * lambda_bar / lambda_eps_bar)
}

/// Smallest Hessian eigenvalue of `(‖r‖²)²` over `‖r‖ = ε`.
pub fn euclidean_quartic_lambda_eps(eps: f64) -> f64 {
    4.0 * eps * eps
}
