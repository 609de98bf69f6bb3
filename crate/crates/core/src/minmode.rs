//! Lowest eigenpairs of the metric-self-adjoint Hessian.
//!
//! The operator is `A = M⁻¹ B Hb`, the metric gradient of the Hessian
//! action, restricted to the admissible subspace. Two backends:
//!
//! * dense: when the surface exposes a dense Hessian and `dim ≤ 256`, the
//!   whitened matrix `Tᵀ (w Hb) T` (with `Tᵀ M T = I`) is diagonalized by
//!   Jacobi rotations;
//! * matrix-free: shifted power iteration on `σI − A`, with `σ` from a power
//!   estimate of `|λ|_max`, deflating previously found modes by metric
//!   projection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, IpmError, Result};
use crate::linalg::symmetric_eigen;
use crate::model::{random_unit, Matrix, Metric, PotentialSurface, Vector};

pub const DENSE_DIM_LIMIT: usize = 256;
const POWER_MAX_ITERS: usize = 200_000;
const NORM_ESTIMATE_ITERS: usize = 60;
const STAGNATION_ITERS: usize = 500;
const START_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPair {
    pub eigenvalue: f64,
    /// Unit vector in the metric.
    pub eigenvector: Vector,
}

/// `k` eigenpairs with strictly ascending eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub pairs: Vec<SpectralPair>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.eigenvalue).collect()
    }

    pub fn vectors(&self) -> Vec<Vector> {
        self.pairs.iter().map(|p| p.eigenvector.clone()).collect()
    }

    pub fn lambda1(&self) -> f64 {
        self.pairs[0].eigenvalue
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Dense,
    MatrixFree,
}

/// Flips `v` so that its largest-magnitude component (first on ties) is positive.
pub fn fix_sign(v: &mut Vector) {
    let mut best = 0usize;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Metric Hessian action `A v`.
pub fn metric_hessian_action<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x: &Vector,
    v: &Vector,
) -> Vector {
    metric.project_admissible(&metric.to_metric_gradient(&surface.hessian_action(x, v)))
}

/// `‖A v − λ v‖_M`.
pub fn residual<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x: &Vector,
    pair: &SpectralPair,
) -> f64 {
    let av = metric_hessian_action(surface, metric, x, &pair.eigenvector);
    metric.norm(&(av - &pair.eigenvector * pair.eigenvalue))
}

pub fn select_backend<S: PotentialSurface + ?Sized>(surface: &S, x: &Vector) -> (Backend, Option<Matrix>) {
    if surface.dim() <= DENSE_DIM_LIMIT {
        if let Some(h) = surface.dense_hessian(x) {
            return (Backend::Dense, Some(h));
        }
    }
    (Backend::MatrixFree, None)
}

fn validate_point<S: PotentialSurface + ?Sized>(surface: &S, metric: &Metric, x: &Vector) -> Result<()> {
    check_dim(surface.dim(), x.len())?;
    metric.check_dim(x.len())?;
    if !x.iter().all(|c| c.is_finite()) {
        return Err(IpmError::NumericalFailure("eigen solve at non-finite point".into()));
    }
    Ok(())
}

/// Smallest eigenpair of the metric Hessian at `x`.
pub fn min_mode<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x: &Vector,
    eig_tol: f64,
    v_init: Option<&Vector>,
) -> Result<SpectralPair> {
    let inits = v_init.map(|v| vec![v.clone()]);
    let modes = lowest_modes(surface, metric, x, 1, eig_tol, inits.as_deref())?;
    Ok(modes.pairs.into_iter().next().expect("one mode"))
}

/// Lowest `k` eigenpairs, obtained by repeated minimum-mode solves on the
/// operator deflated by the modes already found.
pub fn min_modes_k<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x: &Vector,
    k: usize,
    eig_tol: f64,
) -> Result<ModeSet> {
    lowest_modes(surface, metric, x, k, eig_tol, None)
}

/// As [`min_modes_k`], with warm starts for the matrix-free backend.
pub fn min_modes_k_warm<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x: &Vector,
    k: usize,
    eig_tol: f64,
    v_init: Option<&[Vector]>,
) -> Result<ModeSet> {
    lowest_modes(surface, metric, x, k, eig_tol, v_init)
}

fn lowest_modes<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x: &Vector,
    k: usize,
    eig_tol: f64,
    v_init: Option<&[Vector]>,
) -> Result<ModeSet> {
    validate_point(surface, metric, x)?;
    if !(eig_tol > 0.0) {
        return Err(IpmError::InvalidArgument(format!("eig_tol must be positive, got {eig_tol}")));
    }
    let (backend, dense) = select_backend(surface, x);
    let modes = match backend {
        Backend::Dense => dense_modes(metric, x.len(), &dense.expect("dense"), surface.pairing_weight(), k, eig_tol)?,
        Backend::MatrixFree => power_modes(surface, metric, x, k, eig_tol, v_init)?,
    };
    for pair in &modes.pairs {
        let r = residual(surface, metric, x, pair);
        if !(r <= eig_tol * (1.0 + pair.eigenvalue.abs())) {
            return Err(IpmError::EigSolverFailure { residual: r });
        }
    }
    Ok(modes)
}

/// Dense route on an explicit base-representer Hessian `hb`.
pub fn dense_modes(
    metric: &Metric,
    dim: usize,
    hb: &Matrix,
    weight: f64,
    k: usize,
    eig_tol: f64,
) -> Result<ModeSet> {
    let t = metric.whitening(dim);
    let rank = t.ncols();
    if k == 0 || k > rank {
        return Err(IpmError::InvalidArgument(format!(
            "requested {k} modes from an operator of rank {rank}"
        )));
    }
    let c = match metric {
        Metric::Euclidean => hb * weight,
        _ => t.transpose() * (hb * weight) * &t,
    };
    let c = (&c + c.transpose()) * 0.5;
    let (values, vectors) = symmetric_eigen(&c)?;
    check_gaps(&values[..(k + 1).min(rank)], eig_tol)?;
    let pairs = (0..k)
        .map(|j| {
            let mut v = match metric {
                Metric::Euclidean => vectors.column(j).into_owned(),
                _ => &t * vectors.column(j),
            };
            let norm = metric.norm(&v);
            v /= norm;
            fix_sign(&mut v);
            SpectralPair { eigenvalue: values[j], eigenvector: v }
        })
        .collect();
    Ok(ModeSet { pairs })
}

fn check_gaps(values: &[f64], eig_tol: f64) -> Result<()> {
    for w in values.windows(2) {
        let gap = w[1] - w[0];
        if gap < eig_tol {
            return Err(IpmError::DegenerateSpectrum { gap, tol: eig_tol });
        }
    }
    Ok(())
}

fn deflate(metric: &Metric, v: &mut Vector, found: &[SpectralPair]) {
    for p in found {
        let c = metric.inner(&p.eigenvector, v);
        v.axpy(-c, &p.eigenvector, 1.0);
    }
}

fn power_modes<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x: &Vector,
    k: usize,
    eig_tol: f64,
    v_init: Option<&[Vector]>,
) -> Result<ModeSet> {
    let n = x.len();
    let rank = match metric {
        Metric::Euclidean => n,
        Metric::Hminus1(_) => n - 1,
    };
    if k == 0 || k > rank {
        return Err(IpmError::InvalidArgument(format!(
            "requested {k} modes from an operator of rank {rank}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let op = |v: &Vector| metric_hessian_action(surface, metric, x, v);

    // power estimate of |λ|_max
    let mut z = metric.project_admissible(&random_unit(&mut rng, n));
    z /= metric.norm(&z);
    let mut spectral_radius: f64 = 0.0;
    for _ in 0..NORM_ESTIMATE_ITERS {
        let az = op(&z);
        let nz = metric.norm(&az);
        if !nz.is_finite() {
            return Err(IpmError::NumericalFailure("non-finite Hessian action".into()));
        }
        spectral_radius = spectral_radius.max(nz);
        if nz == 0.0 {
            break;
        }
        z = az / nz;
    }
    let sigma = 1.1 * spectral_radius + 1e-12;

    let mut found: Vec<SpectralPair> = Vec::with_capacity(k);
    for i in 0..k {
        let mut v = match v_init.and_then(|vs| vs.get(i)) {
            Some(v0) if v0.len() == n => metric.project_admissible(v0),
            _ => metric.project_admissible(&random_unit(&mut rng, n)),
        };
        deflate(metric, &mut v, &found);
        let mut norm = metric.norm(&v);
        if !(norm > 1e-12) {
            v = metric.project_admissible(&random_unit(&mut rng, n));
            deflate(metric, &mut v, &found);
            norm = metric.norm(&v);
        }
        v /= norm;
        // iterate well below the tolerance; stop early once the residual
        // stagnates at the floor set by round-off and earlier deflations
        let mut best: Option<(f64, f64, Vector)> = None;
        let mut since_best = 0usize;
        for _ in 0..POWER_MAX_ITERS {
            let av = op(&v);
            let lambda = metric.inner(&v, &av);
            let r = metric.norm(&(&av - &v * lambda));
            if !r.is_finite() {
                return Err(IpmError::NumericalFailure("non-finite power iterate".into()));
            }
            let scale = eig_tol * (1.0 + lambda.abs());
            if best.as_ref().map_or(true, |b| r < b.0) {
                best = Some((r, lambda, v.clone()));
                since_best = 0;
            } else {
                since_best += 1;
            }
            if r <= 1e-3 * scale || (since_best > STAGNATION_ITERS && best.as_ref().unwrap().0 <= 0.5 * scale) {
                break;
            }
            let mut next = &v * sigma - av;
            deflate(metric, &mut next, &found);
            let nn = metric.norm(&next);
            if !(nn > 0.0) {
                return Err(IpmError::EigSolverFailure { residual: r });
            }
            v = next / nn;
        }
        let (r, lambda, best_v) = best.expect("at least one iteration");
        if !(r <= 0.5 * eig_tol * (1.0 + lambda.abs())) {
            return Err(IpmError::EigSolverFailure { residual: r });
        }
        v = best_v;
        fix_sign(&mut v);
        found.push(SpectralPair { eigenvalue: lambda, eigenvector: v });
    }
    for w in found.windows(2) {
        if !(w[1].eigenvalue > w[0].eigenvalue) {
            return Err(IpmError::DegenerateSpectrum {
                gap: w[1].eigenvalue - w[0].eigenvalue,
                tol: eig_tol,
            });
        }
    }
    Ok(ModeSet { pairs: found })
}

/// Result of [`index_region_membership`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexRegion {
    pub member: bool,
    /// `λ_k` or `λ_{k+1}` lies within `eig_tol` of zero.
    pub boundary: bool,
    pub lambda_k: f64,
    pub lambda_k1: f64,
}

/// Whether `λ_k(x) < 0 < λ_{k+1}(x)` with margin `eig_tol`.
pub fn index_region_membership<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x: &Vector,
    k: usize,
    eig_tol: f64,
) -> Result<IndexRegion> {
    if k == 0 || k >= x.len() {
        return Err(IpmError::InvalidArgument(format!("index {k} out of range for dim {}", x.len())));
    }
    let modes = min_modes_k(surface, metric, x, k + 1, eig_tol)?;
    let lk = modes.pairs[k - 1].eigenvalue;
    let lk1 = modes.pairs[k].eigenvalue;
    let boundary = lk.abs() <= eig_tol || lk1.abs() <= eig_tol;
    Ok(IndexRegion {
        member: !boundary && lk < 0.0 && lk1 > 0.0,
        boundary,
        lambda_k: lk,
        lambda_k1: lk1,
    })
}

/// Deflated Hessian action `H_i v = H v − Σ_{j<i} λ_j v_j ⟨v_j, v⟩_M`
/// in metric form, where `modes` holds the first `i-1` eigenpairs.
pub fn deflated_action<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x: &Vector,
    modes: &[SpectralPair],
    v: &Vector,
) -> Vector {
    let mut out = metric_hessian_action(surface, metric, x, v);
    for p in modes {
        let c = p.eigenvalue * metric.inner(&p.eigenvector, v);
        out.axpy(-c, &p.eigenvector, 1.0);
    }
    out
}
