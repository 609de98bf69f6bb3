//! Uniform periodic 1D grid with the 3-point Laplacian and its Fourier
//! diagonalization.
//!
//! Nodes are `x_i = i h` for `i = 0..n`, `h = 1/n`, with `x_n` identified
//! with `x_0`. The discrete L² pairing is `h Σ u_i v_i`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{IpmError, Result};
use crate::model::{Matrix, Vector};

/// Relative tolerance on the mean of vectors handed to [`PeriodicGrid::inv_neg_laplacian`].
pub const ZERO_MEAN_TOL: f64 = 1e-10;

#[derive(Clone)]
pub struct PeriodicGrid {
    n: usize,
    h: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("n", &self.n)
            .field("h", &self.h)
            .finish()
    }
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(IpmError::InvalidArgument(format!(
                "periodic grid needs at least 3 cells, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            h: 1.0 / n as f64,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> Vector {
        Vector::from_fn(self.n, |i, _| i as f64 * self.h)
    }

    /// Eigenvalue of `-Δ_h` for wavenumber `k`: `(4/h²) sin²(πk/n)`.
    pub fn neg_laplacian_symbol(&self, k: usize) -> f64 {
        let s = (PI * k as f64 / self.n as f64).sin();
        4.0 * s * s / (self.h * self.h)
    }

    pub fn laplacian(&self, v: &Vector) -> Vector {
        let n = self.n;
        let h2 = self.h * self.h;
        Vector::from_fn(n, |i, _| {
            let left = v[(i + n - 1) % n];
            let right = v[(i + 1) % n];
            (right - 2.0 * v[i] + left) / h2
        })
    }

    pub fn neg_laplacian(&self, v: &Vector) -> Vector {
        -self.laplacian(v)
    }

    /// Dense matrix of the periodic 3-point Laplacian.
    pub fn laplacian_matrix(&self) -> Matrix {
        let n = self.n;
        let h2 = self.h * self.h;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = -2.0 / h2;
            m[(i, (i + 1) % n)] += 1.0 / h2;
            m[(i, (i + n - 1) % n)] += 1.0 / h2;
        }
        m
    }

    pub fn mean(&self, v: &Vector) -> f64 {
        v.sum() / self.n as f64
    }

    pub fn remove_mean(&self, v: &Vector) -> Vector {
        let m = self.mean(v);
        v.map(|x| x - m)
    }

    /// Discrete L² pairing `h Σ u_i v_i`.
    pub fn l2_inner(&self, u: &Vector, v: &Vector) -> f64 {
        self.h * u.dot(v)
    }

    pub fn l2_norm(&self, u: &Vector) -> f64 {
        self.l2_inner(u, u).sqrt()
    }

    /// Applies a real, even Fourier multiplier `m(k)` (with `m(k) = m(n-k)`).
    pub fn apply_multiplier(&self, v: &Vector, multiplier: impl Fn(usize) -> f64) -> Vector {
        let n = self.n;
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            *c *= multiplier(k.min(n - k));
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        Vector::from_iterator(n, buf.iter().map(|c| c.re * scale))
    }

    /// Solves `-Δ w = u` with `mean(w) = 0`. `u` must have zero mean.
    pub fn inv_neg_laplacian(&self, u: &Vector) -> Result<Vector> {
        let mean = self.mean(u);
        let scale = u.amax().max(1.0);
        if mean.abs() > ZERO_MEAN_TOL * scale {
            return Err(IpmError::NonZeroMean(mean));
        }
        Ok(self.inv_neg_laplacian_projected(u))
    }

    /// `(-Δ)⁺ u`: the pseudo-inverse, which discards the mean of `u`.
    pub fn inv_neg_laplacian_projected(&self, u: &Vector) -> Vector {
        let w = self.apply_multiplier(u, |k| {
            if k == 0 {
                0.0
            } else {
                1.0 / self.neg_laplacian_symbol(k)
            }
        });
        self.remove_mean(&w)
    }

    /// H⁻¹ inner product `⟨u, (-Δ)⁻¹ v⟩_{L²}` of zero-mean vectors.
    pub fn hminus1_inner(&self, u: &Vector, v: &Vector) -> Result<f64> {
        let mean_u = self.mean(u);
        if mean_u.abs() > ZERO_MEAN_TOL * u.amax().max(1.0) {
            return Err(IpmError::NonZeroMean(mean_u));
        }
        let w = self.inv_neg_laplacian(v)?;
        Ok(self.l2_inner(u, &w))
    }

    /// Real orthonormal Fourier basis of the zero-mean subspace, ordered by
    /// wavenumber (cos before sin), as columns of an `n × (n-1)` matrix.
    /// Column `j` pairs with the wavenumber returned in the second element.
    pub fn zero_mean_fourier_basis(&self) -> (Matrix, Vec<usize>) {
        let n = self.n;
        let mut cols = Vec::with_capacity(n - 1);
        let mut ks = Vec::with_capacity(n - 1);
        for k in 1..=n / 2 {
            let theta = 2.0 * PI * k as f64 / n as f64;
            if 2 * k == n {
                let c = 1.0 / (n as f64).sqrt();
                cols.push(Vector::from_fn(n, |i, _| if i % 2 == 0 { c } else { -c }));
                ks.push(k);
            } else {
                let c = (2.0 / n as f64).sqrt();
                cols.push(Vector::from_fn(n, |i, _| c * (theta * i as f64).cos()));
                ks.push(k);
                cols.push(Vector::from_fn(n, |i, _| c * (theta * i as f64).sin()));
                ks.push(k);
            }
        }
        (Matrix::from_columns(&cols), ks)
    }
}
