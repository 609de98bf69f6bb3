//! Two-dimensional three-hole potential.
//!
//! ```text
//! V(x, y) = 3 e^{−x² − (y − 1/3)²} − 3 e^{−x² − (y − 5/3)²}
//!         − 5 e^{−(x − 1)² − y²} − 5 e^{−(x + 1)² − y²}
//!         + x⁴/5 + (y − 1/3)⁴/5
//! ```
//!
//! Minima near (±1, 0) and (0, 1.5); index-1 saddles at (±0.61727, 1.10273)
//! and (0, −0.31582). The potential is even in `x`.

use crate::error::{check_dim, Result};
use crate::model::{Matrix, PotentialSurface, Vector};

/// (amplitude, center x, center y) of the Gaussian terms.
const WELLS: [(f64, f64, f64); 4] = [
    (3.0, 0.0, 1.0 / 3.0),
    (-3.0, 0.0, 5.0 / 3.0),
    (-5.0, 1.0, 0.0),
    (-5.0, -1.0, 0.0),
];
const CONFINE: f64 = 0.2;
const CONFINE_Y0: f64 = 1.0 / 3.0;

/// Published index-1 saddles, five decimals.
pub const TOY_SADDLES: [[f64; 2]; 3] = [[0.61727, 1.10273], [-0.61727, 1.10273], [0.0, -0.31582]];

/// Published minima (approximate).
pub const TOY_MINIMA: [[f64; 2]; 3] = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.5]];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Toy2D;

impl Toy2D {
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        let g = |(a, cx, cy): (f64, f64, f64)| a * (-(x - cx).powi(2) - (y - cy).powi(2)).exp();
        // the mirrored wells are added first so that V(x, y) = V(-x, y) holds bitwise
        let pair = g(WELLS[2]) + g(WELLS[3]);
        CONFINE * (x.powi(4) + (y - CONFINE_Y0).powi(4)) + g(WELLS[0]) + g(WELLS[1]) + pair
    }

    pub fn gradient_at(&self, x: f64, y: f64) -> [f64; 2] {
        let term = |(a, cx, cy): (f64, f64, f64)| {
            let (dx, dy) = (x - cx, y - cy);
            let e = a * (-dx * dx - dy * dy).exp();
            [-2.0 * dx * e, -2.0 * dy * e]
        };
        let [w0, w1, w2, w3] = WELLS.map(term);
        let pair = [w2[0] + w3[0], w2[1] + w3[1]];
        [
            4.0 * CONFINE * x.powi(3) + w0[0] + w1[0] + pair[0],
            4.0 * CONFINE * (y - CONFINE_Y0).powi(3) + w0[1] + w1[1] + pair[1],
        ]
    }

    pub fn hessian_at(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let term = |(a, cx, cy): (f64, f64, f64)| {
            let (dx, dy) = (x - cx, y - cy);
            let e = a * (-dx * dx - dy * dy).exp();
            [(4.0 * dx * dx - 2.0) * e, (4.0 * dy * dy - 2.0) * e, 4.0 * dx * dy * e]
        };
        let [w0, w1, w2, w3] = WELLS.map(term);
        let pair = [w2[0] + w3[0], w2[1] + w3[1], w2[2] + w3[2]];
        let hxx = 12.0 * CONFINE * x * x + w0[0] + w1[0] + pair[0];
        let hyy = 12.0 * CONFINE * (y - CONFINE_Y0).powi(2) + w0[1] + w1[1] + pair[1];
        let hxy = w0[2] + w1[2] + pair[2];
        [[hxx, hxy], [hxy, hyy]]
    }
}

impl PotentialSurface for Toy2D {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, p: &Vector) -> f64 {
        self.value_at(p[0], p[1])
    }

    fn gradient(&self, p: &Vector) -> Vector {
        let g = self.gradient_at(p[0], p[1]);
        Vector::from_vec(g.to_vec())
    }

    fn hessian_action(&self, p: &Vector, v: &Vector) -> Vector {
        let h = self.hessian_at(p[0], p[1]);
        Vector::from_vec(vec![
            h[0][0] * v[0] + h[0][1] * v[1],
            h[1][0] * v[0] + h[1][1] * v[1],
        ])
    }

    fn dense_hessian(&self, p: &Vector) -> Option<Matrix> {
        let h = self.hessian_at(p[0], p[1]);
        Some(Matrix::from_row_slice(2, 2, &[h[0][0], h[0][1], h[1][0], h[1][1]]))
    }
}

pub fn toy_value(p: &Vector) -> Result<f64> {
    check_dim(2, p.len())?;
    Ok(Toy2D.value(p))
}

pub fn toy_grad(p: &Vector) -> Result<Vector> {
    check_dim(2, p.len())?;
    Ok(Toy2D.gradient(p))
}

pub fn toy_hess(p: &Vector) -> Result<Matrix> {
    check_dim(2, p.len())?;
    Ok(Toy2D.dense_hessian(p).expect("toy Hessian"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_saddles_are_nearly_critical() {
        for s in TOY_SADDLES {
            let g = Toy2D.gradient_at(s[0], s[1]);
            assert!(g[0].hypot(g[1]) <= 1e-3, "{s:?}: {g:?}");
        }
    }

    #[test]
    fn mirror_symmetry_is_exact() {
        for &(x, y) in &[(0.3, 0.2), (1.7, -0.4), (-2.1, 2.2)] {
            assert_eq!(Toy2D.value_at(x, y), Toy2D.value_at(-x, y));
        }
    }

    #[test]
    fn dimension_checked() {
        assert!(toy_value(&Vector::zeros(3)).is_err());
        assert!(toy_grad(&Vector::zeros(2)).is_ok());
    }
}
