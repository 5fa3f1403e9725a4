//! DFT-based Fourier calculus with the analytic normalization
//! `Fu(xi) = integral e^{-i x xi} u(x) dx`, realized as DFT times the node
//! spacing. Input lives on a grid, output on its conjugate grid, and
//! `inverse(forward(u)) == u` holds to rounding because the twiddle factors
//! are exact sign flips for endpoint-excluded centered grids.

use rustfft::FftPlanner;

use crate::error::{CoreError, Result};
use crate::grid::{AxisSpec, GridSamples, RealGrid};
use crate::C64;

fn lane_apply(values: &mut [C64], shape: &[usize], axis: usize, mut f: impl FnMut(&mut [C64])) {
    let n = shape[axis];
    let suffix: usize = shape[axis + 1..].iter().product();
    let prefix: usize = shape[..axis].iter().product();
    let mut lane = vec![C64::new(0.0, 0.0); n];
    for b in 0..prefix {
        for s in 0..suffix {
            let base = b * n * suffix + s;
            for (t, slot) in lane.iter_mut().enumerate() {
                *slot = values[base + t * suffix];
            }
            f(&mut lane);
            for (t, slot) in lane.iter().enumerate() {
                values[base + t * suffix] = *slot;
            }
        }
    }
}

fn fft_axes(values: &mut [C64], shape: &[usize], axes: &[usize], inverse: bool) {
    let mut planner = FftPlanner::new();
    for &axis in axes {
        let plan = if inverse {
            planner.plan_fft_inverse(shape[axis])
        } else {
            planner.plan_fft_forward(shape[axis])
        };
        lane_apply(values, shape, axis, |lane| plan.process(lane));
    }
}

/// Multiply by `(-1)^(sum of multi-index entries over the listed axes)` in
/// place.
fn checkerboard(values: &mut [C64], shape: &[usize], axes: &[usize]) {
    let dim = shape.len();
    for (flat, v) in values.iter_mut().enumerate() {
        let mut rest = flat;
        let mut parity = 0usize;
        for a in (0..dim).rev() {
            let idx = rest % shape[a];
            rest /= shape[a];
            if axes.contains(&a) {
                parity += idx;
            }
        }
        if parity % 2 == 1 {
            *v = -*v;
        }
    }
}

/// Multiply by `(-1)^(sum of (index + points/2) over the listed axes)` in
/// place: the sorted-output twiddle of the centered transform.
fn centered_sign(values: &mut [C64], shape: &[usize], axes: &[usize]) {
    let dim = shape.len();
    let half_sum: usize = axes.iter().map(|&a| shape[a] / 2).sum();
    for (flat, v) in values.iter_mut().enumerate() {
        let mut rest = flat;
        let mut parity = half_sum;
        for a in (0..dim).rev() {
            let idx = rest % shape[a];
            rest /= shape[a];
            if axes.contains(&a) {
                parity += idx;
            }
        }
        if parity % 2 == 1 {
            *v = -*v;
        }
    }
}

fn all_axes(dim: usize) -> Vec<usize> {
    (0..dim).collect()
}

fn grids_match(a: &RealGrid, b: &RealGrid) -> bool {
    a.dim() == b.dim()
        && a.axes().iter().zip(b.axes()).all(|(x, y)| {
            x.points == y.points && (x.half_width - y.half_width).abs() <= 1e-12 * x.half_width.abs().max(1.0)
        })
}

/// Forward transform along the listed axes only; those axes of the output
/// grid are replaced by their conjugates, the rest stay untouched.
pub fn forward_axes(u: &GridSamples, axes: &[usize]) -> GridSamples {
    let shape = u.grid.shape();
    let mut values = u.values.clone();
    checkerboard(&mut values, &shape, axes);
    fft_axes(&mut values, &shape, axes, false);
    centered_sign(&mut values, &shape, axes);
    let scale: f64 = axes.iter().map(|&a| u.grid.spacing(a)).product();
    for v in &mut values {
        *v *= scale;
    }
    let new_axes = u
        .grid
        .axes()
        .iter()
        .enumerate()
        .map(|(a, ax)| if axes.contains(&a) { ax.dual() } else { *ax })
        .collect();
    GridSamples {
        grid: RealGrid::from_axes(new_axes).expect("dual axes are valid"),
        values,
    }
}

/// Forward transform onto the conjugate grid, sorted by ascending frequency.
pub fn forward(u: &GridSamples) -> GridSamples {
    forward_axes(u, &all_axes(u.grid.dim()))
}

/// Inverse transform along the listed axes, mapping each from conjugate
/// samples back onto the corresponding target axis.
pub fn inverse_axes(f: &GridSamples, axes: &[usize], targets: &[AxisSpec]) -> Result<GridSamples> {
    if axes.len() != targets.len() {
        return Err(CoreError::DimMismatch {
            context: "fourier::inverse_axes",
            expected: axes.len(),
            got: targets.len(),
        });
    }
    for (&a, t) in axes.iter().zip(targets) {
        let want = t.dual();
        let have = f.grid.axis(a);
        let ok = have.points == want.points
            && (have.half_width - want.half_width).abs() <= 1e-12 * want.half_width.max(1.0);
        if !ok {
            return Err(CoreError::GridMismatch {
                context: "fourier::inverse_axes",
                detail: format!("axis {a} is not conjugate to the requested target axis"),
            });
        }
    }
    let shape = f.grid.shape();
    let mut values = f.values.clone();
    centered_sign(&mut values, &shape, axes);
    fft_axes(&mut values, &shape, axes, true);
    checkerboard(&mut values, &shape, axes);
    let scale: f64 = targets
        .iter()
        .map(|t| 1.0 / (t.spacing() * t.points as f64))
        .product();
    for v in &mut values {
        *v *= scale;
    }
    let new_axes = f
        .grid
        .axes()
        .iter()
        .enumerate()
        .map(|(a, ax)| match axes.iter().position(|&b| b == a) {
            Some(i) => targets[i],
            None => *ax,
        })
        .collect();
    Ok(GridSamples {
        grid: RealGrid::from_axes(new_axes).expect("target axes are valid"),
        values,
    })
}

/// Inverse transform from samples on `target.dual()` back onto `target`.
pub fn inverse(f: &GridSamples, target: &RealGrid) -> Result<GridSamples> {
    if !grids_match(&f.grid, &target.dual()) {
        return Err(CoreError::GridMismatch {
            context: "fourier::inverse",
            detail: "input does not live on the conjugate of the target grid".into(),
        });
    }
    inverse_axes(f, &all_axes(target.dim()), target.axes())
}

/// Band-limited translation `u(x - s)` via a frequency ramp.
pub fn shift(u: &GridSamples, s: &[f64]) -> Result<GridSamples> {
    if s.len() != u.grid.dim() {
        return Err(CoreError::DimMismatch {
            context: "fourier::shift",
            expected: u.grid.dim(),
            got: s.len(),
        });
    }
    let mut f = forward(u);
    let dual = f.grid.clone();
    let dim = dual.dim();
    let mut xi = vec![0.0; dim];
    for (flat, v) in f.values.iter_mut().enumerate() {
        dual.node(flat, &mut xi);
        let phase: f64 = xi.iter().zip(s).map(|(a, b)| a * b).sum();
        *v *= C64::from_polar(1.0, -phase);
    }
    inverse(&f, &u.grid)
}

/// Trigonometric interpolation onto the half-spacing grid along the listed
/// axes (same box, twice the nodes). Original nodes keep their values exactly.
pub fn upsample2_axes(u: &GridSamples, axes: &[usize]) -> GridSamples {
    let mut values = u.values.clone();
    let mut shape = u.grid.shape();
    let mut planner = FftPlanner::new();
    for &axis in axes {
        let n = shape[axis];
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(2 * n);
        let mut new_shape = shape.clone();
        new_shape[axis] = 2 * n;
        let new_len: usize = new_shape.iter().product();
        let mut out = vec![C64::new(0.0, 0.0); new_len];

        let suffix: usize = shape[axis + 1..].iter().product();
        let prefix: usize = shape[..axis].iter().product();
        let mut lane = vec![C64::new(0.0, 0.0); n];
        let mut big = vec![C64::new(0.0, 0.0); 2 * n];
        for b in 0..prefix {
            for s in 0..suffix {
                let base_in = b * n * suffix + s;
                for (t, slot) in lane.iter_mut().enumerate() {
                    *slot = values[base_in + t * suffix];
                }
                fwd.process(&mut lane);
                // Centered zero-pad: frequencies [0, n/2) stay, (n/2, n) move
                // up by n (negative frequencies), and the Nyquist coefficient
                // is split evenly between +n/2 and -n/2 so that real data
                // stays real and the interpolant of a lattice delta vanishes
                // at every other whole-lattice point.
                for v in big.iter_mut() {
                    *v = C64::new(0.0, 0.0);
                }
                for j in 0..n / 2 {
                    big[j] = lane[j];
                }
                big[n / 2] = 0.5 * lane[n / 2];
                big[n / 2 + n] = 0.5 * lane[n / 2];
                for j in n / 2 + 1..n {
                    big[j + n] = lane[j];
                }
                inv.process(&mut big);
                let base_out = b * 2 * n * suffix + s;
                let scale = 1.0 / n as f64;
                for (t, slot) in big.iter().enumerate() {
                    out[base_out + t * suffix] = *slot * scale;
                }
            }
        }
        values = out;
        shape = new_shape;
    }
    let new_axes = u
        .grid
        .axes()
        .iter()
        .enumerate()
        .map(|(a, ax)| {
            if axes.contains(&a) {
                AxisSpec::new(ax.half_width, 2 * ax.points)
            } else {
                *ax
            }
        })
        .collect();
    GridSamples {
        grid: RealGrid::from_axes(new_axes).expect("doubled grid is valid"),
        values,
    }
}

/// Trigonometric interpolation onto the half-spacing grid on every axis.
pub fn upsample2(u: &GridSamples) -> GridSamples {
    upsample2_axes(u, &all_axes(u.grid.dim()))
}

/// Two-fold upsampling of a doubled grid `(x, y)` — axes `i` and `pairs + i`
/// hold the two copies of coordinate `i` — with the joint Nyquist content of
/// each axis pair placed on the opposite-sign frequency combinations. On the
/// pair lattice the modes `(-1)^(a+b)` and `(-1)^(a-b)` coincide, and only
/// the difference flavor survives the sheared change of variables, so this
/// assignment keeps the sum flavor (which the coarse symbol grid cannot
/// represent anyway) out of the interpolant entirely.
pub(crate) fn upsample2_paired(u: &GridSamples, pairs: usize) -> GridSamples {
    let dim = u.grid.dim();
    assert_eq!(dim, 2 * pairs, "paired upsampling needs a doubled grid");
    let shape = u.grid.shape();
    let mut spectrum = u.values.clone();
    fft_axes(&mut spectrum, &shape, &all_axes(dim), false);

    let big_shape: Vec<usize> = shape.iter().map(|&s| 2 * s).collect();
    let big_len: usize = big_shape.iter().product();
    let mut big = vec![C64::new(0.0, 0.0); big_len];
    let mut src = vec![0usize; dim];
    // Per axis pair, the joint placements of a source bin: a non-Nyquist bin
    // keeps its frequency branch, a single Nyquist index splits evenly over
    // +n/2 and -n/2, and a doubly-Nyquist bin goes onto the two mixed-sign
    // combinations with half weight each.
    let place = |bin: usize, n: usize| -> Vec<(usize, f64)> {
        if bin < n / 2 {
            vec![(bin, 1.0)]
        } else if bin > n / 2 {
            vec![(bin + n, 1.0)]
        } else {
            vec![(n / 2, 0.5), (n / 2 + n, 0.5)]
        }
    };
    for (flat, &coeff) in spectrum.iter().enumerate() {
        if coeff == C64::new(0.0, 0.0) {
            continue;
        }
        let mut rest = flat;
        for a in (0..dim).rev() {
            src[a] = rest % shape[a];
            rest /= shape[a];
        }
        // Joint placements accumulate pair by pair.
        let mut targets: Vec<(Vec<usize>, f64)> = vec![(vec![0; dim], 1.0)];
        for i in 0..pairs {
            let (nx, ny) = (shape[i], shape[pairs + i]);
            let joint: Vec<(usize, usize, f64)> =
                if src[i] == nx / 2 && src[pairs + i] == ny / 2 {
                    vec![(nx / 2, ny / 2 + ny, 0.5), (nx / 2 + nx, ny / 2, 0.5)]
                } else {
                    let xs = place(src[i], nx);
                    let ys = place(src[pairs + i], ny);
                    xs.iter()
                        .flat_map(|&(bx, wx)| ys.iter().map(move |&(by, wy)| (bx, by, wx * wy)))
                        .collect()
                };
            let mut next = Vec::with_capacity(targets.len() * joint.len());
            for (idx, w) in &targets {
                for &(bx, by, wj) in &joint {
                    let mut idx2 = idx.clone();
                    idx2[i] = bx;
                    idx2[pairs + i] = by;
                    next.push((idx2, w * wj));
                }
            }
            targets = next;
        }
        for (idx, w) in targets {
            let mut flat_out = 0usize;
            for a in 0..dim {
                flat_out = flat_out * big_shape[a] + idx[a];
            }
            big[flat_out] += coeff * w;
        }
    }
    fft_axes(&mut big, &big_shape, &all_axes(dim), true);
    let scale = 1.0 / u.grid.len() as f64;
    for v in &mut big {
        *v *= scale;
    }
    let new_axes = u
        .grid
        .axes()
        .iter()
        .map(|ax| AxisSpec::new(ax.half_width, 2 * ax.points))
        .collect();
    GridSamples {
        grid: RealGrid::from_axes(new_axes).expect("doubled grid is valid"),
        values: big,
    }
}

/// Band-limiting decimation along the listed axes: keep the inner half of the
/// spectrum, drop the rest, and sample on the twice-coarser grid. Exact left
/// inverse of [`upsample2_axes`] on the same axes.
pub fn downsample2_axes(u: &GridSamples, axes: &[usize]) -> GridSamples {
    let mut values = u.values.clone();
    let mut shape = u.grid.shape();
    let mut planner = FftPlanner::new();
    for &axis in axes {
        let big = shape[axis];
        let n = big / 2;
        let fwd = planner.plan_fft_forward(big);
        let inv = planner.plan_fft_inverse(n);
        let mut new_shape = shape.clone();
        new_shape[axis] = n;
        let new_len: usize = new_shape.iter().product();
        let mut out = vec![C64::new(0.0, 0.0); new_len];

        let suffix: usize = shape[axis + 1..].iter().product();
        let prefix: usize = shape[..axis].iter().product();
        let mut lane = vec![C64::new(0.0, 0.0); big];
        let mut small = vec![C64::new(0.0, 0.0); n];
        for b in 0..prefix {
            for s in 0..suffix {
                let base_in = b * big * suffix + s;
                for (t, slot) in lane.iter_mut().enumerate() {
                    *slot = values[base_in + t * suffix];
                }
                fwd.process(&mut lane);
                // Inner band: frequencies [0, n/2) stay put, (-n/2, 0) come
                // from the top of the big array, and the two half-weight
                // Nyquist bins recombine into the coarse Nyquist coefficient.
                for j in 0..n / 2 {
                    small[j] = lane[j];
                }
                small[n / 2] = lane[n / 2] + lane[n / 2 + n];
                for j in n / 2 + 1..n {
                    small[j] = lane[j + big - n];
                }
                inv.process(&mut small);
                let base_out = b * n * suffix + s;
                let scale = 1.0 / big as f64;
                for (t, slot) in small.iter().enumerate() {
                    out[base_out + t * suffix] = *slot * scale;
                }
            }
        }
        values = out;
        shape = new_shape;
    }
    let new_axes = u
        .grid
        .axes()
        .iter()
        .enumerate()
        .map(|(a, ax)| {
            if axes.contains(&a) {
                AxisSpec::new(ax.half_width, ax.points / 2)
            } else {
                *ax
            }
        })
        .collect();
    GridSamples {
        grid: RealGrid::from_axes(new_axes).expect("halved grid is valid"),
        values,
    }
}

/// Exact evaluation of the trigonometric interpolant at arbitrary points.
/// Periodic in each axis with period `2 L`; intended for points inside the box.
pub struct TrigInterp {
    grid: RealGrid,
    coeffs: Vec<C64>,
}

impl TrigInterp {
    pub fn new(u: &GridSamples) -> Self {
        let shape = u.grid.shape();
        let mut coeffs = u.values.clone();
        fft_axes(&mut coeffs, &shape, &all_axes(shape.len()), false);
        TrigInterp {
            grid: u.grid.clone(),
            coeffs,
        }
    }

    pub fn grid(&self) -> &RealGrid {
        &self.grid
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        debug_assert_eq!(x.len(), self.grid.dim());
        let dim = self.grid.dim();
        // Per-axis phase tables with the 1/n normalization folded in.
        let phases: Vec<Vec<C64>> = (0..dim)
            .map(|a| {
                let ax = self.grid.axis(a);
                let n = ax.points as i64;
                let t = (x[a] + ax.half_width) / (2.0 * ax.half_width);
                (0..n)
                    .map(|j| {
                        let f = if j < n / 2 { j } else { j - n };
                        let theta = std::f64::consts::TAU * f as f64 * t;
                        C64::from_polar(1.0 / n as f64, theta)
                    })
                    .collect()
            })
            .collect();
        // Contract the fastest axis repeatedly.
        let mut cur = self.coeffs.clone();
        for a in (0..dim).rev() {
            let n = self.grid.axis(a).points;
            let blocks = cur.len() / n;
            let table = &phases[a];
            let mut next = Vec::with_capacity(blocks);
            for b in 0..blocks {
                let mut acc = C64::new(0.0, 0.0);
                for (j, p) in table.iter().enumerate() {
                    acc += cur[b * n + j] * p;
                }
                next.push(acc);
            }
            cur = next;
        }
        cur[0]
    }

    /// Evaluate on a product lattice given per-axis point lists, contracting
    /// one phase matrix per axis; equal to [`TrigInterp::eval`] at every
    /// combination but cheaper by a factor of the lattice size.
    /// Output is row-major with axis `a` running over `axis_points[a]`.
    pub fn eval_grid(&self, axis_points: &[Vec<f64>]) -> Vec<C64> {
        let dim = self.grid.dim();
        debug_assert_eq!(axis_points.len(), dim);
        let mut shape = self.grid.shape();
        let mut cur = self.coeffs.clone();
        for a in 0..dim {
            let ax = self.grid.axis(a);
            let n = ax.points;
            let out_n = axis_points[a].len();
            let mut table = Vec::with_capacity(out_n * n);
            for &x in &axis_points[a] {
                let t = (x + ax.half_width) / (2.0 * ax.half_width);
                for j in 0..n as i64 {
                    let f = if j < n as i64 / 2 { j } else { j - n as i64 };
                    let theta = std::f64::consts::TAU * f as f64 * t;
                    table.push(C64::from_polar(1.0 / n as f64, theta));
                }
            }
            let suffix: usize = shape[a + 1..].iter().product();
            let prefix: usize = shape[..a].iter().product();
            let mut next = vec![C64::new(0.0, 0.0); prefix * out_n * suffix];
            for p in 0..prefix {
                for k in 0..out_n {
                    for j in 0..n {
                        let phase = table[k * n + j];
                        let src = (p * n + j) * suffix;
                        let dst = (p * out_n + k) * suffix;
                        for s in 0..suffix {
                            next[dst + s] += cur[src + s] * phase;
                        }
                    }
                }
            }
            cur = next;
            shape[a] = out_n;
        }
        cur
    }
}
