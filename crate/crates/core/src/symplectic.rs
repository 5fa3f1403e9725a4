//! Standard symplectic structure on `R^{2n}` (coordinates `(x, xi)`), the
//! associated midpoint/difference chart on pairs, and its inverse.

use ndarray::Array2;

use crate::error::{CoreError, Result};
use crate::C64;

/// The standard block matrix `J = [[0, I], [-I, 0]]` together with the
/// bilinear form `sigma(X, Y) = (J X) . Y`.
#[derive(Debug, Clone)]
pub struct SymplecticStructure {
    n: usize,
}

impl SymplecticStructure {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::InvalidParam("symplectic dimension n must be positive".into()));
        }
        Ok(SymplecticStructure { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Dense `J` with exact 0/±1 entries.
    pub fn j_matrix(&self) -> Array2<f64> {
        let d = self.dim();
        let mut j = Array2::zeros((d, d));
        for i in 0..self.n {
            j[(i, self.n + i)] = 1.0;
            j[(self.n + i, i)] = -1.0;
        }
        j
    }

    /// `J v = (v_xi, -v_x)`.
    pub fn j_apply(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim());
        for i in 0..self.n {
            out[i] = v[self.n + i];
            out[self.n + i] = -v[i];
        }
    }

    /// `J^{-1} v = -J v = (-v_xi, v_x)`.
    pub fn j_inv_apply(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = -v[self.n + i];
            out[self.n + i] = v[i];
        }
    }

    /// `sigma(X, Y) = X_xi . Y_x - X_x . Y_xi` on real vectors.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        let mut s = 0.0;
        for i in 0..self.n {
            s += x[self.n + i] * y[i] - x[i] * y[self.n + i];
        }
        s
    }

    /// Bilinear extension of the form to complex vectors.
    pub fn form_cx(&self, x: &[C64], y: &[C64]) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..self.n {
            s += x[self.n + i] * y[i] - x[i] * y[self.n + i];
        }
        s
    }

    /// Midpoint/rotated-difference chart on pairs of phase-space points:
    /// `q(x, y) = ((x + y)/2, J^{-1}(y - x))`, a bijection of `E x E` onto
    /// `E x E*` used to turn two-point kernels into weight arguments.
    pub fn q_map(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        debug_assert_eq!(y.len(), d);
        debug_assert_eq!(out.len(), 2 * d);
        let mut diff = vec![0.0; d];
        for i in 0..d {
            out[i] = 0.5 * (x[i] + y[i]);
            diff[i] = y[i] - x[i];
        }
        let (_, tail) = out.split_at_mut(d);
        self.j_inv_apply(&diff, tail);
    }

    pub fn q_map_vec(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.dim()];
        self.q_map(x, y, &mut out);
        out
    }

    /// Inverse chart: given `(s, xi)` returns `(x, y)` with
    /// `x = s - J xi / 2`, `y = s + J xi / 2`.
    pub fn q_inverse(&self, q: &[f64], x: &mut [f64], y: &mut [f64]) {
        let d = self.dim();
        debug_assert_eq!(q.len(), 2 * d);
        let mut jxi = vec![0.0; d];
        self.j_apply(&q[d..], &mut jxi);
        for i in 0..d {
            x[i] = q[i] - 0.5 * jxi[i];
            y[i] = q[i] + 0.5 * jxi[i];
        }
    }
}
