//! Lattices in phase space and partition-of-unity diagnostics for their
//! window sums `sum_gamma chi(X - gamma)`.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::grid::RealGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    /// `exp(-|x|^2 / scale^2)`.
    Gaussian,
    /// Separable `prod_a cos^2(pi t_a / (2 scale))` supported on `|t_a| <= scale`;
    /// tiles to exactly 1 on the integer lattice scaled by `scale`.
    Bump,
}

/// A translated, scaled, amplitude-carrying window on `R^D`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub kind: WindowKind,
    pub center: Vec<f64>,
    pub scale: f64,
    pub amplitude: f64,
}

impl WindowSpec {
    pub fn new(kind: WindowKind, center: Vec<f64>, scale: f64, amplitude: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) || !amplitude.is_finite() {
            return Err(CoreError::InvalidParam(format!(
                "window scale/amplitude invalid: {scale}, {amplitude}"
            )));
        }
        Ok(WindowSpec { kind, center, scale, amplitude })
    }

    /// The canonical unit Gaussian window `2^{D/2} e^{-|x - center|^2}` used
    /// by the short-time Fourier analysis of symbols.
    pub fn gaussian_f0(center: Vec<f64>) -> Self {
        let amp = (2.0f64).powf(center.len() as f64 / 2.0);
        WindowSpec {
            kind: WindowKind::Gaussian,
            center,
            scale: 1.0,
            amplitude: amp,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// One separable factor, without amplitude.
    fn factor(&self, u: f64) -> f64 {
        match self.kind {
            WindowKind::Gaussian => (-u * u / (self.scale * self.scale)).exp(),
            WindowKind::Bump => {
                if u.abs() >= self.scale {
                    0.0
                } else {
                    let c = (std::f64::consts::FRAC_PI_2 * u / self.scale).cos();
                    c * c
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.center.len());
        let mut p = self.amplitude;
        for (v, c) in x.iter().zip(&self.center) {
            p *= self.factor(v - c);
        }
        p
    }

    /// Radius beyond which the window is negligible (zero for bumps, below
    /// `e^{-49}` of peak for Gaussians).
    pub fn reach(&self) -> f64 {
        match self.kind {
            WindowKind::Gaussian => 7.0 * self.scale,
            WindowKind::Bump => self.scale * (self.center.len() as f64).sqrt(),
        }
    }
}

/// A full-rank lattice `B Z^D` with an attached window.
#[derive(Debug, Clone)]
pub struct Lattice {
    /// Column-major generator matrix: lattice points are `B k`, `k` integer.
    pub basis: DMatrix<f64>,
    pub window: WindowSpec,
    inv_basis: DMatrix<f64>,
}

impl Lattice {
    pub fn new(basis: DMatrix<f64>, window: WindowSpec) -> Result<Self> {
        let d = window.dim();
        if basis.nrows() != d || basis.ncols() != d {
            return Err(CoreError::DimMismatch {
                context: "lattice basis shape",
                expected: d,
                got: basis.nrows(),
            });
        }
        let inv_basis = basis
            .clone()
            .try_inverse()
            .ok_or(CoreError::Singular { context: "lattice basis" })?;
        Ok(Lattice { basis, window, inv_basis })
    }

    /// Diagonal lattice `diag(steps) Z^D`.
    pub fn rectangular(steps: &[f64], window: WindowSpec) -> Result<Self> {
        let d = steps.len();
        let mut b = DMatrix::zeros(d, d);
        for (i, &s) in steps.iter().enumerate() {
            b[(i, i)] = s;
        }
        Lattice::new(b, window)
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.basis[(i, j)] == 0.0))
    }

    /// All lattice points `B k` with `|B k| <= r`, in a deterministic order
    /// (lexicographic in `k`).
    pub fn points_within(&self, r: f64) -> Vec<Vec<f64>> {
        let d = self.dim();
        if !(r.is_finite() && r >= 0.0) {
            return Vec::new();
        }
        // |k_i| = |invB (Bk)|_i <= sum_j |invB_ij| r on the ball.
        let mut kmax = vec![0i64; d];
        for i in 0..d {
            let mut bound = 0.0;
            for j in 0..d {
                bound += self.inv_basis[(i, j)].abs() * r;
            }
            kmax[i] = bound.ceil() as i64;
        }
        let mut out: Vec<Vec<f64>> = Vec::new();
        let r2 = r * r;
        let mut k = kmax.iter().map(|&m| -m).collect::<Vec<i64>>();
        'outer: loop {
            let mut g = vec![0.0f64; d];
            for i in 0..d {
                for j in 0..d {
                    g[i] += self.basis[(i, j)] * k[j] as f64;
                }
            }
            if g.iter().map(|v| v * v).sum::<f64>() <= r2 {
                out.push(g);
            }
            for i in (0..d).rev() {
                k[i] += 1;
                if k[i] <= kmax[i] {
                    continue 'outer;
                }
                k[i] = -kmax[i];
                if i == 0 {
                    break 'outer;
                }
            }
        }
        out
    }

    /// Max over grid nodes of `|sum_gamma chi(X - gamma) - 1|`.
    /// Uses a separable per-axis evaluation for diagonal bases, and a direct
    /// truncated lattice sum otherwise.
    pub fn partition_check(&self, grid: &RealGrid) -> Result<f64> {
        if grid.dim() != self.dim() {
            return Err(CoreError::DimMismatch {
                context: "partition_check",
                expected: self.dim(),
                got: grid.dim(),
            });
        }
        if self.is_diagonal() {
            self.partition_check_separable(grid)
        } else {
            self.partition_check_direct(grid)
        }
    }

    fn partition_check_separable(&self, grid: &RealGrid) -> Result<f64> {
        let d = self.dim();
        let w = &self.window;
        let reach = w.reach();
        // Per-axis sums over the 1-d sublattices; the product set structure
        // turns the lattice sum into a product of these.
        let mut axis_sums: Vec<Vec<f64>> = Vec::with_capacity(d);
        for a in 0..d {
            let step = self.basis[(a, a)];
            let ax = grid.axis(a);
            let mut sums = Vec::with_capacity(ax.points);
            for idx in 0..ax.points {
                let t = ax.node(idx) - w.center[a];
                let kmax = ((t.abs() + reach) / step.abs()).ceil() as i64;
                let mut s = 0.0;
                for k in -kmax..=kmax {
                    s += w.factor(t - step * k as f64);
                }
                sums.push(s);
            }
            axis_sums.push(sums);
        }
        let mut worst = 0.0f64;
        let mut idx = vec![0usize; d];
        for flat in 0..grid.len() {
            grid.multi_index(flat, &mut idx);
            let mut p = w.amplitude;
            for a in 0..d {
                p *= axis_sums[a][idx[a]];
            }
            worst = worst.max((p - 1.0).abs());
        }
        Ok(worst)
    }

    /// Reference path: enumerate lattice points in a box large enough to cover
    /// every grid node out to the window reach, then sum directly.
    pub fn partition_check_direct(&self, grid: &RealGrid) -> Result<f64> {
        let d = self.dim();
        let w = &self.window;
        let reach = w.reach();
        // |k_i| <= sum_j |invB_ij| (L_j + |c_j| + reach) covers every
        // contributing lattice point for every node.
        let mut kmax = vec![0i64; d];
        for i in 0..d {
            let mut bound = 0.0;
            for j in 0..d {
                bound += self.inv_basis[(i, j)].abs()
                    * (grid.axis(j).half_width + w.center[j].abs() + reach);
            }
            kmax[i] = bound.ceil() as i64 + 1;
        }
        let mut gammas: Vec<Vec<f64>> = Vec::new();
        let mut k = vec![-kmax[0]; d];
        for i in 1..d {
            k[i] = -kmax[i];
        }
        let keep2 = {
            let mut r = 0.0;
            for j in 0..d {
                r += grid.axis(j).half_width + w.center[j].abs() + reach;
            }
            r * r
        };
        'outer: loop {
            let mut g = vec![0.0f64; d];
            for i in 0..d {
                for j in 0..d {
                    g[i] += self.basis[(i, j)] * k[j] as f64;
                }
            }
            if g.iter().map(|v| v * v).sum::<f64>() <= keep2 {
                gammas.push(g);
            }
            for i in (0..d).rev() {
                k[i] += 1;
                if k[i] <= kmax[i] {
                    continue 'outer;
                }
                k[i] = -kmax[i];
                if i == 0 {
                    break 'outer;
                }
            }
        }
        if gammas.len() * grid.len() > 50_000_000 {
            return Err(CoreError::InvalidParam(format!(
                "direct partition check too large: {} lattice points x {} nodes",
                gammas.len(),
                grid.len()
            )));
        }
        let reach2 = reach * reach;
        let mut worst = 0.0f64;
        let mut x = vec![0.0f64; d];
        let mut shifted = vec![0.0f64; d];
        for flat in 0..grid.len() {
            grid.node(flat, &mut x);
            let mut s = 0.0;
            for g in &gammas {
                let mut r2 = 0.0;
                for i in 0..d {
                    let u = x[i] - w.center[i] - g[i];
                    shifted[i] = u + w.center[i];
                    r2 += u * u;
                }
                if r2 <= reach2 {
                    s += w.eval(&shifted);
                }
            }
            worst = worst.max((s - 1.0).abs());
        }
        Ok(worst)
    }
}
