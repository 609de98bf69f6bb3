//! Ginzburg-Landau energy on a periodic 1D grid and its Cahn-Hilliard
//! (H⁻¹ gradient flow) saddle search.
//!
//! `F(φ) = h Σ_i [ κ²/2 ((φ_{i+1} − φ_i)/h)² + (φ_i² − 1)²/4 ]`, with the
//! L² variational derivative `δF = −κ²Δφ + φ³ − φ` and Hessian
//! `B = −κ²Δ + diag(3φ² − 1)`.

use std::f64::consts::SQRT_2;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, IpmError, Result};
use crate::linalg::symmetric_eigen;
use crate::minmode::{min_mode, min_modes_k, SpectralPair};
use crate::model::{IpmConfig, Matrix, Metric, PotentialSurface, Vector};
use crate::objective::{w_tilde_grad, PenaltyKind, ReflectionFrame};
use crate::problems::periodic::PeriodicGrid;

pub const CH_KAPPA: f64 = 0.04;
pub const CH_MASS: f64 = 0.6;
pub const CH_CELLS: usize = 100;
pub const CH_DT: f64 = 0.1;
pub const CH_TOL: f64 = 1e-6;
/// Weights of the reflected functional: `W = V(φ) − 2 V(φ̂)`.
pub const CH_ALPHA: f64 = 0.0;
pub const CH_BETA: f64 = 2.0;
pub const CH_STABILIZER: f64 = 10.0;
/// Allowed drift of the mean of a state away from the prescribed mass.
pub const MASS_TOL: f64 = 1e-12;

/// Discretized Ginzburg-Landau energy; the surface seen by the saddle search.
#[derive(Debug, Clone)]
pub struct CahnHilliard {
    grid: PeriodicGrid,
    kappa: f64,
    stabilizer: f64,
}

impl CahnHilliard {
    pub fn new(n: usize, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(IpmError::InvalidArgument(format!("kappa must be positive, got {kappa}")));
        }
        Ok(Self {
            grid: PeriodicGrid::new(n)?,
            kappa,
            stabilizer: CH_STABILIZER,
        })
    }

    pub fn standard() -> Self {
        Self::new(CH_CELLS, CH_KAPPA).expect("standard parameters")
    }

    /// Sets `S` in the inner-step preconditioner
    /// `(I + Δt (−Δ)(κ²(−Δ) + S))⁻¹`; `S = 0` keeps only the stiff fourth-order part.
    pub fn with_stabilizer(mut self, s: f64) -> Result<Self> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(IpmError::InvalidArgument(format!("stabilizer must be non-negative, got {s}")));
        }
        self.stabilizer = s;
        Ok(self)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn stabilizer(&self) -> f64 {
        self.stabilizer
    }

    pub fn metric(&self) -> Metric {
        Metric::Hminus1(self.grid.clone())
    }

    /// Dense `B = −κ²Δ + diag(3φ² − 1)`.
    pub fn hessian_matrix(&self, phi: &Vector) -> Matrix {
        let mut b = self.grid.laplacian_matrix() * (-self.kappa * self.kappa);
        for i in 0..phi.len() {
            b[(i, i)] += 3.0 * phi[i] * phi[i] - 1.0;
        }
        b
    }

    /// `‖Δ δF(φ)‖_{L²}`, the stationarity measure in the H⁻¹ geometry.
    pub fn hminus1_gradient_norm(&self, phi: &Vector) -> f64 {
        self.grid.l2_norm(&self.grid.laplacian(&self.gradient(phi)))
    }
}

impl PotentialSurface for CahnHilliard {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn value(&self, phi: &Vector) -> f64 {
        let n = self.grid.len();
        let h = self.grid.spacing();
        let k2 = self.kappa * self.kappa;
        let mut acc = 0.0;
        for i in 0..n {
            let d = (phi[(i + 1) % n] - phi[i]) / h;
            let f = phi[i] * phi[i] - 1.0;
            acc += 0.5 * k2 * d * d + 0.25 * f * f;
        }
        h * acc
    }

    fn gradient(&self, phi: &Vector) -> Vector {
        let lap = self.grid.laplacian(phi);
        let k2 = self.kappa * self.kappa;
        Vector::from_fn(phi.len(), |i, _| -k2 * lap[i] + phi[i].powi(3) - phi[i])
    }

    fn hessian_action(&self, phi: &Vector, v: &Vector) -> Vector {
        let lap = self.grid.laplacian(v);
        let k2 = self.kappa * self.kappa;
        Vector::from_fn(v.len(), |i, _| -k2 * lap[i] + (3.0 * phi[i] * phi[i] - 1.0) * v[i])
    }

    fn dense_hessian(&self, phi: &Vector) -> Option<Matrix> {
        Some(self.hessian_matrix(phi))
    }

    fn pairing_weight(&self) -> f64 {
        self.grid.spacing()
    }

    fn precondition_step(&self, dt: f64, step: Vector) -> Vector {
        let k2 = self.kappa * self.kappa;
        let s = self.stabilizer;
        let out = self.grid.apply_multiplier(&step, |k| {
            let mu = self.grid.neg_laplacian_symbol(k);
            1.0 / (1.0 + dt * mu * (k2 * mu + s))
        });
        self.grid.remove_mean(&out)
    }
}

/// A state on the periodic grid together with its model parameters.
#[derive(Debug, Clone)]
pub struct ChGrid {
    pub surface: CahnHilliard,
    pub mass: f64,
    pub phi: Vector,
}

impl ChGrid {
    pub fn new(surface: CahnHilliard, mass: f64, phi: Vector) -> Result<Self> {
        check_dim(surface.dim(), phi.len())?;
        if !phi.iter().all(|v| v.is_finite()) {
            return Err(IpmError::InvalidArgument("state is not finite".into()));
        }
        let mean = surface.grid.mean(&phi);
        if (mean - mass).abs() > MASS_TOL {
            return Err(IpmError::InvalidArgument(format!(
                "state mean {mean} differs from mass {mass}"
            )));
        }
        Ok(Self { surface, mass, phi })
    }

    pub fn n_cells(&self) -> usize {
        self.surface.dim()
    }

    pub fn spacing(&self) -> f64 {
        self.surface.grid.spacing()
    }

    pub fn kappa(&self) -> f64 {
        self.surface.kappa
    }

    pub fn mean(&self) -> f64 {
        self.surface.grid.mean(&self.phi)
    }
}

pub fn gl_energy(state: &ChGrid) -> f64 {
    state.surface.value(&state.phi)
}

/// `δF/δφ = −κ²Δφ + φ³ − φ`.
pub fn gl_l2_variation(state: &ChGrid) -> Vector {
    state.surface.gradient(&state.phi)
}

/// Lowest eigenpair of the H⁻¹ Hessian, `B v = λ (−Δ)⁻¹ v` on zero-mean
/// vectors, with `‖v‖_{H⁻¹} = 1`.
pub fn ch_min_mode(state: &ChGrid, eig_tol: f64) -> Result<SpectralPair> {
    min_mode(&state.surface, &state.surface.metric(), &state.phi, eig_tol, None)
}

/// The `k` lowest eigenvalues of the H⁻¹ Hessian, without the gap check of
/// [`ch_min_mode`] (uniform states have exactly repeated Fourier pairs).
pub fn ch_lowest_eigenvalues(state: &ChGrid, k: usize) -> Result<Vec<f64>> {
    let surface = &state.surface;
    let t = surface.metric().whitening(state.n_cells());
    let hb = surface.hessian_matrix(&state.phi) * surface.pairing_weight();
    let (values, _) = symmetric_eigen(&(t.transpose() * hb * &t))?;
    Ok(values.into_iter().take(k).collect())
}

/// Discrete generator of translations, the central difference of `φ`.
pub fn translation_mode(state: &ChGrid) -> Vector {
    let n = state.n_cells();
    let h = state.spacing();
    let p = &state.phi;
    Vector::from_fn(n, |i, _| (p[(i + 1) % n] - p[(i + n - 1) % n]) / (2.0 * h))
}

/// Index certificate of a CH critical point.
///
/// Periodic states have a neutral translation direction whose discrete
/// pinning is far below double-precision resolution, so the sign of the
/// corresponding eigenvalue is not meaningful. The certificate therefore
/// reports the full spectrum together with the overlap of the second mode
/// with the translation generator, and the spectrum on the metric-orthogonal
/// complement of that generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChIndexCertificate {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `|⟨v₂, τ⟩_M| / ‖τ‖_M`.
    pub lambda2_translation_overlap: f64,
    /// Lowest two eigenvalues with the translation direction removed.
    pub reduced: [f64; 2],
}

impl ChIndexCertificate {
    /// `λ₁ < 0 < λ₂` modulo translation.
    pub fn is_index_one(&self) -> bool {
        self.reduced[0] < 0.0 && self.reduced[1] > 0.0
    }
}

pub fn ch_index_certificate(state: &ChGrid, eig_tol: f64) -> Result<ChIndexCertificate> {
    let surface = &state.surface;
    let metric = surface.metric();
    let modes = min_modes_k(surface, &metric, &state.phi, 2, eig_tol)?;
    let tau = translation_mode(state);
    let tau_norm = metric.norm(&tau);
    if !(tau_norm > 0.0) {
        return Err(IpmError::InvalidArgument("uniform state has no translation mode".into()));
    }
    let overlap = metric.inner(&modes.pairs[1].eigenvector, &tau).abs() / tau_norm;

    let t = metric.whitening(state.n_cells());
    let hb = surface.hessian_matrix(&state.phi) * surface.pairing_weight();
    let c = t.transpose() * hb * &t;
    let coords = Vector::from_fn(t.ncols(), |j, _| metric.inner(&t.column(j).into_owned(), &tau) / tau_norm);
    let p = Matrix::identity(t.ncols(), t.ncols()) - &coords * coords.transpose();
    let (full, _) = symmetric_eigen(&c)?;
    let shift = 2.0 * full.last().copied().unwrap_or(0.0).abs() + 1.0;
    let reduced_op = &p * c * &p + (&coords * coords.transpose()) * shift;
    let (reduced, _) = symmetric_eigen(&reduced_op)?;
    Ok(ChIndexCertificate {
        lambda1: modes.pairs[0].eigenvalue,
        lambda2: modes.pairs[1].eigenvalue,
        lambda2_translation_overlap: overlap,
        reduced: [reduced[0], reduced[1]],
    })
}

/// Base (L²) gradient of the penalized reflected functional
/// `F(φ) − 2F(φ̂) + ρ h Σ (φ − φ_k)⁴`, with `φ̂ = φ_k + ⟨v₁, φ − φ_k⟩_{H⁻¹} v₁`:
///
/// `δF(φ) − 2 (−Δ)⁻¹v₁ ⟨v₁, δF(φ̂)⟩_{L²} + 4ρ(φ − φ_k)³`.
pub fn ch_aux_gradient(
    surface: &CahnHilliard,
    phi: &Vector,
    phi_k: &Vector,
    v1: &SpectralPair,
    rho: f64,
) -> Result<Vector> {
    check_dim(surface.dim(), phi.len())?;
    check_dim(surface.dim(), phi_k.len())?;
    check_dim(surface.dim(), v1.eigenvector.len())?;
    let metric = surface.metric();
    let frame = ReflectionFrame::new(&metric, phi_k.clone(), vec![v1.eigenvector.clone()])?;
    w_tilde_grad(surface, &frame, phi, &ch_config(rho, 10)?)
}

/// Saddle-search configuration used for the CH experiments.
pub fn ch_config(rho: f64, inner_steps: usize) -> Result<IpmConfig> {
    let cfg = IpmConfig {
        alpha: CH_ALPHA,
        beta: CH_BETA,
        rho,
        inner_steps,
        dt: CH_DT,
        tol: CH_TOL,
        penalty: PenaltyKind::SeparableQuartic,
        ..IpmConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Two-interface profile: a region of the minority phase `−1` of width
/// `width` centered at `center`, shifted to the prescribed mass.
pub fn two_interface_profile(grid: &PeriodicGrid, kappa: f64, mass: f64, center: f64, width: f64) -> Vector {
    let x = grid.nodes();
    let p = x.map(|t| {
        let d = (t - center).abs();
        let d = d.min(1.0 - d);
        -((0.5 * width - d) / (SQRT_2 * kappa)).tanh()
    });
    shift_to_mass(grid, &p, mass)
}

pub fn shift_to_mass(grid: &PeriodicGrid, p: &Vector, mass: f64) -> Vector {
    let m = grid.mean(p);
    p.map(|v| v - m + mass)
}

/// Generated initial states.
///
/// `phi01..phi03` interpolate between the uniform state and a two-interface
/// profile (minority width `(1 − mass)/2`, centered at x = 1/2) with weights
/// [`ChInitial::weight`]; `phi04` is `sin(2πx)` shifted to the mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChInitial {
    Phi01,
    Phi02,
    Phi03,
    Phi04,
}

impl ChInitial {
    pub const ALL: [ChInitial; 4] = [ChInitial::Phi01, ChInitial::Phi02, ChInitial::Phi03, ChInitial::Phi04];
    pub const TABLE: [ChInitial; 3] = [ChInitial::Phi01, ChInitial::Phi02, ChInitial::Phi03];

    pub fn as_str(&self) -> &'static str {
        match self {
            ChInitial::Phi01 => "phi01",
            ChInitial::Phi02 => "phi02",
            ChInitial::Phi03 => "phi03",
            ChInitial::Phi04 => "phi04",
        }
    }

    /// Interpolation weight toward the two-interface profile.
    pub fn weight(&self) -> Option<f64> {
        match self {
            ChInitial::Phi01 => Some(0.25),
            ChInitial::Phi02 => Some(0.3),
            ChInitial::Phi03 => Some(0.35),
            ChInitial::Phi04 => None,
        }
    }

    pub fn profile(&self, surface: &CahnHilliard, mass: f64) -> Vector {
        let grid = surface.grid();
        match self.weight() {
            Some(s) => {
                let p = two_interface_profile(grid, surface.kappa(), mass, 0.5, 0.5 * (1.0 - mass));
                let phi = p.map(|v| mass + s * (v - mass));
                shift_to_mass(grid, &phi, mass)
            }
            None => {
                let x = grid.nodes();
                shift_to_mass(grid, &x.map(|t| (2.0 * std::f64::consts::PI * t).sin()), mass)
            }
        }
    }

    pub fn state(&self, surface: &CahnHilliard, mass: f64) -> Result<ChGrid> {
        let phi = self.profile(surface, mass);
        ChGrid::new(surface.clone(), mass, phi)
    }
}

impl FromStr for ChInitial {
    type Err = IpmError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| IpmError::InvalidArgument(format!("unknown initial state '{s}'")))
    }
}
