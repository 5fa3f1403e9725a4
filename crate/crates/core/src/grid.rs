//! Uniform endpoint-excluded grids and complex samples on them.
//!
//! Axis `a` with half width `L` and `N` points (N even) carries the nodes
//! `-L + k * (2L/N)`, `k = 0..N-1`. The right endpoint `+L` is excluded, so
//! the trapezoid rule on the induced torus is plain summation with weight
//! `spacing^dim`, and the conjugate DFT axis has spacing `pi / L`.

use crate::error::{CoreError, Result};
use crate::C64;

/// One grid axis: half width and node count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub half_width: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn new(half_width: f64, points: usize) -> Self {
        AxisSpec { half_width, points }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Conjugate DFT axis: spacing `pi/L`, same node count, centered.
    pub fn dual(&self) -> AxisSpec {
        let spacing = std::f64::consts::PI / self.half_width;
        AxisSpec {
            half_width: 0.5 * spacing * self.points as f64,
            points: self.points,
        }
    }

    pub fn node(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.node(k)).collect()
    }
}

/// Tensor-product grid. Most grids are isotropic (one `(L, N)` for every
/// axis); quantization grids mix a spatial axis with its widened conjugate
/// axis, which is why the axes are stored individually.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    axes: Vec<AxisSpec>,
}

impl RealGrid {
    pub fn isotropic(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        RealGrid::from_axes(vec![AxisSpec::new(half_width, points_per_axis); dim])
    }

    pub fn from_axes(axes: Vec<AxisSpec>) -> Result<Self> {
        if axes.is_empty() {
            return Err(CoreError::InvalidParam("grid needs at least one axis".into()));
        }
        for (a, ax) in axes.iter().enumerate() {
            if ax.points == 0 || ax.points % 2 != 0 {
                return Err(CoreError::InvalidGridPoints {
                    axis: a,
                    points: ax.points,
                });
            }
            if !(ax.half_width.is_finite() && ax.half_width > 0.0) {
                return Err(CoreError::InvalidHalfWidth {
                    axis: a,
                    half_width: ax.half_width,
                });
            }
        }
        Ok(RealGrid { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, a: usize) -> &AxisSpec {
        &self.axes[a]
    }

    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    pub fn spacing(&self, a: usize) -> f64 {
        self.axes[a].spacing()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|ax| ax.points).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|ax| ax.points).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Product of axis spacings: the quadrature weight of every node.
    pub fn quad_weight(&self) -> f64 {
        self.axes.iter().map(|ax| ax.spacing()).product()
    }

    pub fn is_isotropic(&self) -> bool {
        self.axes.iter().all(|ax| ax == &self.axes[0])
    }

    /// Half width of the first axis; meaningful for isotropic grids.
    pub fn half_width(&self) -> f64 {
        self.axes[0].half_width
    }

    /// Node count of the first axis; meaningful for isotropic grids.
    pub fn points_per_axis(&self) -> usize {
        self.axes[0].points
    }

    /// Conjugate grid: every axis replaced by its DFT dual.
    pub fn dual(&self) -> RealGrid {
        RealGrid {
            axes: self.axes.iter().map(|ax| ax.dual()).collect(),
        }
    }

    /// Concatenate the axes of two grids.
    pub fn product(&self, other: &RealGrid) -> RealGrid {
        let mut axes = self.axes.clone();
        axes.extend_from_slice(&other.axes);
        RealGrid { axes }
    }

    /// Keep every `factor`-th node per axis; nodes stay a subset of `self`.
    pub fn decimate(&self, factor: usize) -> Result<RealGrid> {
        if factor == 0 {
            return Err(CoreError::InvalidParam("decimation factor must be positive".into()));
        }
        let axes = self
            .axes
            .iter()
            .map(|ax| {
                if ax.points % factor != 0 || (ax.points / factor) % 2 != 0 {
                    return Err(CoreError::InvalidParam(format!(
                        "cannot decimate axis with {} points by {}",
                        ax.points, factor
                    )));
                }
                Ok(AxisSpec::new(ax.half_width, ax.points / factor))
            })
            .collect::<Result<Vec<_>>>()?;
        RealGrid::from_axes(axes)
    }

    /// Row-major flat index, axis 0 slowest.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim());
        let mut flat = 0;
        for (a, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.axes[a].points);
            flat = flat * self.axes[a].points + i;
        }
        flat
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim()).rev() {
            let n = self.axes[a].points;
            out[a] = flat % n;
            flat /= n;
        }
    }

    /// Coordinates of the node with the given flat index.
    pub fn node(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for a in (0..self.dim()).rev() {
            let n = self.axes[a].points;
            out[a] = self.axes[a].node(rest % n);
            rest /= n;
        }
    }

    pub fn node_vec(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.node(flat, &mut out);
        out
    }

    /// True if the multi-index touches the first or last node of any axis.
    pub fn is_boundary(&self, flat: usize) -> bool {
        let mut rest = flat;
        for a in (0..self.dim()).rev() {
            let n = self.axes[a].points;
            let i = rest % n;
            if i == 0 || i + 1 == n {
                return true;
            }
            rest /= n;
        }
        false
    }
}

/// Complex samples over a [`RealGrid`], stored row-major (axis 0 slowest).
#[derive(Debug, Clone)]
pub struct GridSamples {
    pub grid: RealGrid,
    pub values: Vec<C64>,
}

/// Samples of a function on configuration space (`dim = n`).
pub type SampledFunction = GridSamples;

/// Samples of a phase-space symbol (`dim = 2n`); operations that need the
/// split into base and cotangent coordinates check the parity of `dim`.
pub type SampledSymbol = GridSamples;

impl GridSamples {
    pub fn new(grid: RealGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::SampleCount {
                context: "GridSamples::new",
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(CoreError::NonFinite { index });
        }
        Ok(GridSamples { grid, values })
    }

    pub fn zeros(grid: RealGrid) -> Self {
        let n = grid.len();
        GridSamples {
            grid,
            values: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// Sample a closure at every node, in flat order.
    pub fn from_fn(grid: RealGrid, mut f: impl FnMut(&[f64]) -> C64) -> Self {
        let dim = grid.dim();
        let mut x = vec![0.0; dim];
        let mut values = Vec::with_capacity(grid.len());
        for flat in 0..grid.len() {
            grid.node(flat, &mut x);
            values.push(f(&x));
        }
        GridSamples { grid, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grid inner product `sum a conj(b) * quad_weight`.
    pub fn inner(&self, other: &GridSamples) -> C64 {
        debug_assert_eq!(self.grid, other.grid);
        let mut acc = C64::new(0.0, 0.0);
        for (a, b) in self.values.iter().zip(&other.values) {
            acc += a * b.conj();
        }
        acc * self.grid.quad_weight()
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * self.grid.quad_weight()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest modulus among nodes on the boundary shell of the box.
    pub fn boundary_max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for (flat, v) in self.values.iter().enumerate() {
            if self.grid.is_boundary(flat) {
                m = m.max(v.norm());
            }
        }
        m
    }

    pub fn scaled(&self, c: C64) -> GridSamples {
        GridSamples {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &GridSamples) -> GridSamples {
        debug_assert_eq!(self.grid, other.grid);
        GridSamples {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &GridSamples) -> GridSamples {
        debug_assert_eq!(self.grid, other.grid);
        GridSamples {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridSamples) -> GridSamples {
        debug_assert_eq!(self.grid, other.grid);
        GridSamples {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn conj(&self) -> GridSamples {
        GridSamples {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }
}
