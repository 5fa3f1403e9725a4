//! Complex quadratic forms in grouped variables.
//!
//! A form is `z ↦ ½ zᵗ M z` with `M` complex symmetric and the coordinates of
//! `z` partitioned into named groups (position block, auxiliary block, ...).
//! The one nontrivial operation is stationary elimination of a group: solving
//! `∂_y(½ zᵗ M z) = 0` for the group `y` and substituting back, which yields
//! the Schur complement of the remaining variables together with the linear
//! map giving the stationary point. Repeated elimination is how completed
//! squares, induced weights, and composed phases are produced downstream.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::C64;

/// `½ zᵗ M z` with `M` complex symmetric, coordinates split into groups.
#[derive(Debug, Clone)]
pub struct QuadForm {
    /// Sizes of the variable groups, in coordinate order.
    pub groups: Vec<usize>,
    /// Symmetric coefficient matrix of the full variable vector.
    pub mat: DMatrix<C64>,
}

/// Result of eliminating one group at its stationary point.
#[derive(Debug, Clone)]
pub struct CriticalData {
    /// The reduced form in the remaining groups (same order, one group gone).
    pub form: QuadForm,
    /// Linear map sending the remaining variables to the stationary value of
    /// the eliminated group: `y* = map · u`.
    pub map: DMatrix<C64>,
}

impl QuadForm {
    /// The zero form on the given variable groups.
    pub fn zero(groups: Vec<usize>) -> Self {
        let dim = groups.iter().sum();
        QuadForm {
            groups,
            mat: DMatrix::zeros(dim, dim),
        }
    }

    /// Builds a form from an explicit coefficient matrix, symmetrizing it so
    /// that only the symmetric part (the part that matters for `½ zᵗ M z`)
    /// is retained.
    pub fn new(groups: Vec<usize>, mat: DMatrix<C64>) -> Result<Self> {
        let dim: usize = groups.iter().sum();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(CoreError::DimMismatch {
                context: "quadratic form coefficient matrix",
                expected: dim,
                got: mat.nrows().max(mat.ncols()),
            });
        }
        let sym = (&mat + mat.transpose()).scale(0.5);
        Ok(QuadForm { groups, mat: sym })
    }

    /// Total number of scalar variables.
    pub fn dim(&self) -> usize {
        self.groups.iter().sum()
    }

    fn offset(&self, g: usize) -> usize {
        self.groups[..g].iter().sum()
    }

    /// Copy of the `(g, h)` coefficient block.
    pub fn block(&self, g: usize, h: usize) -> DMatrix<C64> {
        let (og, oh) = (self.offset(g), self.offset(h));
        self.mat
            .view((og, oh), (self.groups[g], self.groups[h]))
            .into_owned()
    }

    /// Installs a coefficient block and its mirrored transpose, so that for
    /// `g ≠ h` the form gains the cross term `z_gᵗ B z_h` and for `g = h`
    /// the diagonal term `½ z_gᵗ B z_g` (with `B` symmetric).
    pub fn set_block(&mut self, g: usize, h: usize, b: &DMatrix<C64>) {
        assert_eq!(b.nrows(), self.groups[g], "block row count");
        assert_eq!(b.ncols(), self.groups[h], "block column count");
        let (og, oh) = (self.offset(g), self.offset(h));
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                self.mat[(og + i, oh + j)] = b[(i, j)];
                self.mat[(oh + j, og + i)] = b[(i, j)];
            }
        }
    }

    /// Evaluates `½ zᵗ M z`.
    pub fn eval(&self, z: &[C64]) -> C64 {
        assert_eq!(z.len(), self.dim(), "variable count");
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..z.len() {
            for j in 0..z.len() {
                acc += z[i] * self.mat[(i, j)] * z[j];
            }
        }
        acc * 0.5
    }

    /// The form with every coefficient multiplied by `c`.
    pub fn scaled(&self, c: C64) -> Self {
        QuadForm {
            groups: self.groups.clone(),
            mat: self.mat.map(|z| z * c),
        }
    }

    /// Sum of two forms on identical variable groups.
    pub fn add(&self, other: &QuadForm) -> Result<Self> {
        if self.groups != other.groups {
            return Err(CoreError::DimMismatch {
                context: "quadratic form sum",
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(QuadForm {
            groups: self.groups.clone(),
            mat: &self.mat + &other.mat,
        })
    }

    /// Eliminates one variable group at its stationary point.
    ///
    /// Writing the form as `½ uᵗ P u + uᵗ Q y + ½ yᵗ R y` with `y` the chosen
    /// group, the stationary point is `y* = −R⁻¹ Qᵗ u` and the reduced form
    /// has matrix `P − Q R⁻¹ Qᵗ` (the Schur complement). Fails when the
    /// stationary equation is singular.
    pub fn critical_value(&self, group: usize) -> Result<CriticalData> {
        assert!(group < self.groups.len(), "group index");
        let dim = self.dim();
        let (oy, ny) = (self.offset(group), self.groups[group]);
        let kept: Vec<usize> = (0..dim).filter(|&i| i < oy || i >= oy + ny).collect();

        let r = self
            .mat
            .view((oy, oy), (ny, ny))
            .into_owned()
            .try_inverse()
            .ok_or(CoreError::Singular {
                context: "stationary-variable block",
            })?;
        let nk = kept.len();
        let mut q = DMatrix::zeros(nk, ny);
        let mut p = DMatrix::zeros(nk, nk);
        for (a, &i) in kept.iter().enumerate() {
            for j in 0..ny {
                q[(a, j)] = self.mat[(i, oy + j)];
            }
            for (b, &j) in kept.iter().enumerate() {
                p[(a, b)] = self.mat[(i, j)];
            }
        }
        let map = -(&r * q.transpose());
        let reduced = &p + &q * &map;

        let mut groups = self.groups.clone();
        groups.remove(group);
        Ok(CriticalData {
            form: QuadForm::new(groups, reduced)?,
            map,
        })
    }
}

/// Real-matrix convenience: lifts an `f64` matrix into the complex field.
pub fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

/// Largest absolute imaginary part, for asserting that a form that should be
/// real actually came out real.
pub fn max_imag(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

/// Real parts of a complex matrix.
pub fn realify(m: &DMatrix<C64>) -> DMatrix<f64> {
    m.map(|z| z.re)
}
