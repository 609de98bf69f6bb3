//! Quadratic surfaces and their quartic perturbations.

use crate::error::{IpmError, Result};
use crate::model::{Matrix, PotentialSurface, Vector};

/// `V(x) = ½ xᵀ H x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    h: Matrix,
}

impl Quadratic {
    pub fn new(h: Matrix) -> Result<Self> {
        if h.nrows() != h.ncols() || h.nrows() == 0 {
            return Err(IpmError::InvalidArgument("Hessian must be square and non-empty".into()));
        }
        let asym = (&h - h.transpose()).amax();
        if asym > 1e-12 * (1.0 + h.amax()) {
            return Err(IpmError::InvalidArgument(format!("Hessian is not symmetric ({asym:e})")));
        }
        Ok(Self { h })
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self { h: Matrix::from_diagonal(&Vector::from_column_slice(d)) }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.h
    }
}

impl PotentialSurface for Quadratic {
    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.h * x))
    }

    fn gradient(&self, x: &Vector) -> Vector {
        &self.h * x
    }

    fn hessian_action(&self, _x: &Vector, v: &Vector) -> Vector {
        &self.h * v
    }

    fn dense_hessian(&self, _x: &Vector) -> Option<Matrix> {
        Some(self.h.clone())
    }
}

/// `V(x) = ½ Σ d_i x_i² + q Σ x_i⁴ + tᵀ x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedQuadratic {
    pub diag: Vector,
    pub quartic: f64,
    pub tilt: Vector,
}

impl PerturbedQuadratic {
    pub fn new(diag: &[f64], quartic: f64, tilt: &[f64]) -> Result<Self> {
        if diag.len() != tilt.len() || diag.is_empty() {
            return Err(IpmError::DimensionMismatch { expected: diag.len(), got: tilt.len() });
        }
        Ok(Self {
            diag: Vector::from_column_slice(diag),
            quartic,
            tilt: Vector::from_column_slice(tilt),
        })
    }

    /// The index-2 test surface: `d = (−2, −1, 3)`, small quartic and tilt.
    pub fn index2_example() -> Self {
        Self::new(&[-2.0, -1.0, 3.0], 0.1, &[0.05, 0.02, -0.03]).expect("valid")
    }
}

impl PotentialSurface for PerturbedQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        let mut v = self.tilt.dot(x);
        for i in 0..x.len() {
            v += 0.5 * self.diag[i] * x[i] * x[i] + self.quartic * x[i].powi(4);
        }
        v
    }

    fn gradient(&self, x: &Vector) -> Vector {
        Vector::from_fn(x.len(), |i, _| {
            self.diag[i] * x[i] + 4.0 * self.quartic * x[i].powi(3) + self.tilt[i]
        })
    }

    fn hessian_action(&self, x: &Vector, v: &Vector) -> Vector {
        Vector::from_fn(x.len(), |i, _| (self.diag[i] + 12.0 * self.quartic * x[i] * x[i]) * v[i])
    }

    fn dense_hessian(&self, x: &Vector) -> Option<Matrix> {
        Some(Matrix::from_diagonal(&Vector::from_fn(x.len(), |i, _| {
            self.diag[i] + 12.0 * self.quartic * x[i] * x[i]
        })))
    }
}
