//! Magnetic phase-space translations on the weighted transform side, coherent
//! states, the rank-one decomposition of Weyl operators, effective kernels on
//! the complex product domain, and the exact intertwining of linear flows
//! with the transform.
//!
//! Geometry conventions: the weight graph `{(x, λ_ξ(x))}` is parametrized by
//! its base point throughout, and every graph integral is a Lebesgue sum in
//! the base coordinates times the chart volume [`Weight::vol`].

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::bargmann::{
    bargmann_transform, h2_inner, hermite_batch, hp_norm, ComplexGrid, ComplexGridFunction, Setup,
    Weight,
};
use crate::error::{CoreError, Result};
use crate::fourier::{self, TrigInterp};
use crate::grid::{GridSamples, RealGrid, SampledFunction, SampledSymbol};
use crate::symplectic::SymplecticStructure;
use crate::warn::{Flagged, Warning};
use crate::weyl::symbol_to_kernel;
use crate::{C64, PExponent};

/// Base-coordinate integration box for the windowed-symbol factor. The step
/// must keep the carrier `e^{2iσ(X,W)}` below Nyquist for `|X|` up to the
/// quadrature radius: `π/h > 2‖σ‖R + spectral width of the window`.
const WINDOW_HALF: f64 = 8.0;
const WINDOW_POINTS: usize = 96;
/// Window nodes whose Gaussian factor falls below `e^{−36}` are skipped.
const WINDOW_CUT: f64 = 36.0;
/// Outermost-shell mass ratio that triggers the truncation advisory.
const TAIL_RATIO: f64 = 0.01;
/// Reality defect allowed before a form stops being graph-real.
const REALITY_TOL: f64 = 1e-12;

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_real(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Coefficients of a holomorphic linear form `ℓ(x, ξ) = lx·x + lxi·ξ` on
/// complex phase space.
///
/// The quantized flow `e^{−iℓ(x,D)}` acts as the three-factor operator
/// `e^{−(i/2)lx·x} ∘ τ_{lxi} ∘ e^{−(i/2)lx·x}`. It preserves the weighted
/// norms exactly when the form is real on the weight graph, which for the
/// graph `{(x, λ_ξ(x))}` reads `lx + λ_ξ(lxi) = 0`.
#[derive(Debug, Clone)]
pub struct LinearFormEll {
    pub lx: Vec<C64>,
    pub lxi: Vec<C64>,
}

impl LinearFormEll {
    pub fn zero(n: usize) -> Self {
        LinearFormEll {
            lx: vec![C64::new(0.0, 0.0); n],
            lxi: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// The form generating the phase-space translation by the graph point
    /// over `base`: shift part `−base`, modulation part `λ_ξ(base)`.
    pub fn graph_translation(weight: &Weight, base: &[C64]) -> Self {
        LinearFormEll {
            lx: weight.lambda_xi(base),
            lxi: base.iter().map(|z| -z).collect(),
        }
    }

    /// Largest component violation of `lx + λ_ξ(lxi) = 0`.
    pub fn reality_defect(&self, weight: &Weight) -> f64 {
        let lam = weight.lambda_xi(&self.lxi);
        self.lx
            .iter()
            .zip(&lam)
            .map(|(a, b)| (a + b).norm())
            .fold(0.0, f64::max)
    }

    /// True when the form is real on the weight graph, so the translation it
    /// generates is an isometry of the weighted spaces.
    pub fn is_real(&self, weight: &Weight) -> bool {
        let scale = self
            .lx
            .iter()
            .chain(&self.lxi)
            .map(|z| z.norm())
            .fold(1.0, f64::max);
        self.reality_defect(weight) <= REALITY_TOL * scale
    }
}

/// Applies `e^{−(i/2)lx·x} ∘ τ_{lxi} ∘ e^{−(i/2)lx·x}` to samples on the
/// complex box. The translation goes through the damped field `v·e^{−Φ}`
/// (band-limited, so the complex shift is a frequency ramp on the joint
/// grid); the weight is restored analytically at the shifted argument.
///
/// Each shift component must stay within half the box so the translated mass
/// remains interior; larger shifts are rejected.
pub fn magnetic_translate(
    v: &ComplexGridFunction,
    ell: &LinearFormEll,
    weight: &Weight,
) -> Result<ComplexGridFunction> {
    let n = v.grid.n();
    if ell.lx.len() != n || ell.lxi.len() != n {
        return Err(CoreError::DimMismatch {
            context: "magnetic translation form",
            expected: n,
            got: ell.lx.len(),
        });
    }
    for a in 0..n {
        let hw_re = v.grid.re_grid.axis(a).half_width;
        let hw_im = v.grid.im_grid.axis(a).half_width;
        if ell.lxi[a].re.abs() > 0.5 * hw_re || ell.lxi[a].im.abs() > 0.5 * hw_im {
            return Err(CoreError::InvalidParam(format!(
                "translation by {} exceeds half the box ({hw_re}, {hw_im})",
                ell.lxi[a]
            )));
        }
    }
    let len = v.grid.len();
    let mut buf = Vec::new();
    let mut damped = Vec::with_capacity(len);
    for flat in 0..len {
        v.grid.node(flat, &mut buf);
        damped.push(v.values()[flat] * (-weight.phi_at(&buf)).exp());
    }
    let damped = GridSamples::new(v.grid.joint().clone(), damped)?;
    let mut s = vec![0.0; 2 * n];
    for a in 0..n {
        s[a] = ell.lxi[a].re;
        s[n + a] = ell.lxi[a].im;
    }
    let moved = fourier::shift(&damped, &s)?;
    // Combined exponent of the weight restoration and the two modulation
    // factors; for graph-real forms the real parts cancel against `Φ(x)`, so
    // a single `exp` avoids intermediate overflow.
    let half_cross = dot(&ell.lx, &ell.lxi) * 0.5;
    let mut shifted = vec![C64::new(0.0, 0.0); n];
    let mut values = Vec::with_capacity(len);
    for flat in 0..len {
        v.grid.node(flat, &mut buf);
        for a in 0..n {
            shifted[a] = buf[a] - ell.lxi[a];
        }
        let expo = C64::new(weight.phi_at(&shifted), 0.0)
            + C64::i() * (half_cross - dot(&ell.lx, &buf));
        values.push(moved.values[flat] * expo.exp());
    }
    Ok(ComplexGridFunction {
        grid: v.grid.clone(),
        samples: GridSamples::new(v.grid.joint().clone(), values)?,
    })
}

/// A normalized translate of the ground image, labelled by the base point of
/// the graph point it is concentrated at.
#[derive(Debug, Clone)]
pub struct CoherentState {
    pub base: Vec<C64>,
    pub values: ComplexGridFunction,
}

fn ground_image(setup: &Setup) -> Result<ComplexGridFunction> {
    let e0 = hermite_batch(&setup.rgrid, 1)?.remove(0);
    Ok(bargmann_transform(&setup.phase, &e0, &setup.cgrid)?.value)
}

fn coherent_from(setup: &Setup, v0: &ComplexGridFunction, base: &[C64]) -> Result<CoherentState> {
    let ell = LinearFormEll::graph_translation(&setup.weight, base);
    let moved = magnetic_translate(v0, &ell, &setup.weight)?;
    let norm = hp_norm(&moved, &setup.weight, PExponent::Two).value;
    if !(norm.is_finite() && norm > 0.0) {
        return Err(CoreError::InvalidParam(format!(
            "translated state norm degenerated to {norm}"
        )));
    }
    Ok(CoherentState {
        base: base.to_vec(),
        values: moved.scaled(C64::new(1.0 / norm, 0.0)),
    })
}

/// The coherent state at the graph point over `base`.
pub fn coherent_state(setup: &Setup, base: &[C64]) -> Result<CoherentState> {
    if base.len() != setup.phase.n {
        return Err(CoreError::DimMismatch {
            context: "coherent state base point",
            expected: setup.phase.n,
            got: base.len(),
        });
    }
    let v0 = ground_image(setup)?;
    coherent_from(setup, &v0, base)
}

fn to_complex(node: &[f64]) -> Vec<C64> {
    let n = node.len() / 2;
    (0..n).map(|i| C64::new(node[i], node[n + i])).collect()
}

fn coherent_table(setup: &Setup, nodes: &[Vec<f64>]) -> Result<Vec<CoherentState>> {
    let v0 = ground_image(setup)?;
    nodes
        .iter()
        .map(|node| coherent_from(setup, &v0, &to_complex(node)))
        .collect()
}

/// Ball-truncated midpoint lattice on the base chart of the graph, used for
/// the double phase-space quadrature.
#[derive(Debug, Clone)]
pub struct RankOneQuadrature {
    /// Base coordinates (length `2n`) of the kept nodes.
    pub y_nodes: Vec<Vec<f64>>,
    pub t_nodes: Vec<Vec<f64>>,
    pub radius: f64,
    pub points: usize,
    n: usize,
}

impl RankOneQuadrature {
    pub fn new(n: usize, radius: f64, points: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(CoreError::InvalidParam(format!(
                "quadrature radius must be positive, got {radius}"
            )));
        }
        if points < 2 {
            return Err(CoreError::InvalidParam(format!(
                "quadrature needs at least 2 points per axis, got {points}"
            )));
        }
        let d = 2 * n;
        let s = 2.0 * radius / points as f64;
        let total = points.pow(d as u32);
        let mut nodes = Vec::new();
        for flat in 0..total {
            let mut rest = flat;
            let mut node = vec![0.0; d];
            for c in (0..d).rev() {
                let k = rest % points;
                rest /= points;
                node[c] = -radius + (k as f64 + 0.5) * s;
            }
            if dot_real(&node, &node) <= radius * radius {
                nodes.push(node);
            }
        }
        Ok(RankOneQuadrature {
            y_nodes: nodes.clone(),
            t_nodes: nodes,
            radius,
            points,
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Lattice step per axis.
    pub fn step(&self) -> f64 {
        2.0 * self.radius / self.points as f64
    }

    /// Cell volume in the base chart.
    pub fn cell(&self) -> f64 {
        self.step().powi(2 * self.n as i32)
    }
}

/// `(𝒯u, V_T)·(V_Y, 𝒯v)`: the matrix element of the rank-one projector pair
/// at the graph points over `y_base` and `t_base`.
pub fn rank_one_element(
    setup: &Setup,
    y_base: &[C64],
    t_base: &[C64],
    u: &SampledFunction,
    v: &SampledFunction,
) -> Result<C64> {
    let tu = bargmann_transform(&setup.phase, u, &setup.cgrid)?.value;
    let tv = bargmann_transform(&setup.phase, v, &setup.cgrid)?.value;
    let v0 = ground_image(setup)?;
    let vy = coherent_from(setup, &v0, y_base)?;
    let vt = coherent_from(setup, &v0, t_base)?;
    let w = &setup.weight;
    Ok(h2_inner(&tu, &vt.values, w) * h2_inner(&vy.values, &tv, w))
}

/// Symbol data pulled back to the base chart of the graph and tabulated on
/// the window grid, together with the geometry factors of every node.
struct WindowTable {
    /// Pulled-back symbol, zero where the pullback leaves the sample box.
    bw: Vec<C64>,
    /// Real phase-space image `G·w` of each node, stride `2n`.
    gw: Vec<f64>,
    /// `|G·w|²` per node.
    gg: Vec<f64>,
    /// `σ_base·w` per node, stride `2n`.
    sw: Vec<f64>,
    cell: f64,
    len: usize,
    dim: usize,
}

fn window_table(weight: &Weight, a: &SampledSymbol, wgrid: &RealGrid) -> Result<WindowTable> {
    let d = 2 * weight.n;
    if a.grid.dim() != d {
        return Err(CoreError::DimMismatch {
            context: "symbol dimension for the graph pullback",
            expected: d,
            got: a.grid.dim(),
        });
    }
    let interp = TrigInterp::new(a);
    let len = wgrid.len();
    let mut bw = Vec::with_capacity(len);
    let mut gw = vec![0.0; len * d];
    let mut gg = Vec::with_capacity(len);
    let mut sw = vec![0.0; len * d];
    let mut node = vec![0.0; d];
    for flat in 0..len {
        wgrid.node(flat, &mut node);
        let g = &mut gw[flat * d..(flat + 1) * d];
        for i in 0..d {
            let mut acc = 0.0;
            let mut sacc = 0.0;
            for j in 0..d {
                acc += weight.pullback[(i, j)] * node[j];
                sacc += weight.sigma_base[(i, j)] * node[j];
            }
            g[i] = acc;
            sw[flat * d + i] = sacc;
        }
        gg.push(dot_real(g, g));
        // The pullback image can leave the symbol's sample box; extend by
        // zero rather than wrapping periodically.
        let inside = (0..d).all(|i| g[i].abs() <= a.grid.axis(i).half_width);
        bw.push(if inside {
            interp.eval(g)
        } else {
            C64::new(0.0, 0.0)
        });
    }
    Ok(WindowTable {
        bw,
        gw,
        gg,
        sw,
        cell: wgrid.quad_weight(),
        len,
        dim: d,
    })
}

/// `π^{−n} ∫ e^{2iσ(X,W)} 2ⁿ e^{−|G(W−c)|²} b(W) dW` over the graph, with
/// `X`, `c` in base coordinates and the symplectic measure folded in.
fn window_fourier(table: &WindowTable, weight: &Weight, c: &[f64], xb: &[f64]) -> C64 {
    let d = table.dim;
    let mut gc = vec![0.0; d];
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += weight.pullback[(i, j)] * c[j];
        }
        gc[i] = acc;
    }
    let gc2 = dot_real(&gc, &gc);
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..table.len {
        let b = table.bw[j];
        if b.re == 0.0 && b.im == 0.0 {
            continue;
        }
        let g = &table.gw[j * d..(j + 1) * d];
        let er = -(table.gg[j] - 2.0 * dot_real(g, &gc) + gc2);
        if er < -WINDOW_CUT {
            continue;
        }
        let s = &table.sw[j * d..(j + 1) * d];
        let ei = 2.0 * dot_real(xb, s);
        acc += b * C64::new(er, ei).exp();
    }
    let n = weight.n as i32;
    acc * 2f64.powi(n) * weight.vol / std::f64::consts::PI.powi(n) * table.cell
}

/// Infinity operator norm of the restricted symplectic form; scales the
/// per-cell phase increment of the oscillatory pair factor.
fn sigma_norm(weight: &Weight) -> f64 {
    let d = 2 * weight.n;
    (0..d)
        .map(|i| (0..d).map(|j| weight.sigma_base[(i, j)].abs()).sum())
        .fold(0.0, f64::max)
}

/// Evaluates `(a^w u, v)` through the rank-one decomposition: the double
/// graph integral of the oscillatory pair factor, the windowed-symbol
/// transform, and the coherent matrix elements.
///
/// Advisories: the outermost quadrature shell carrying more than 1% of the
/// accumulated mass, and a per-cell phase increment of the pair factor beyond
/// `π/2`.
pub fn rank_one_reconstruct(
    setup: &Setup,
    a: &SampledSymbol,
    u: &SampledFunction,
    v: &SampledFunction,
    quad: &RankOneQuadrature,
) -> Result<Flagged<C64>> {
    let n = setup.phase.n;
    if quad.n != n {
        return Err(CoreError::DimMismatch {
            context: "quadrature dimension",
            expected: n,
            got: quad.n,
        });
    }
    let w = &setup.weight;
    let d = 2 * n;
    let wgrid = RealGrid::isotropic(d, WINDOW_HALF, WINDOW_POINTS)?;
    let table = window_table(w, a, &wgrid)?;
    let tu = bargmann_transform(&setup.phase, u, &setup.cgrid)?.value;
    let tv = bargmann_transform(&setup.phase, v, &setup.cgrid)?.value;
    let states = coherent_table(setup, &quad.y_nodes)?;
    let ip_u: Vec<C64> = states.iter().map(|s| h2_inner(&tu, &s.values, w)).collect();
    let ip_v: Vec<C64> = states.iter().map(|s| h2_inner(&s.values, &tv, w)).collect();

    // σ_base·t per node, for the pair phase.
    let st: Vec<Vec<f64>> = quad
        .t_nodes
        .iter()
        .map(|t| {
            (0..d)
                .map(|i| (0..d).map(|j| w.sigma_base[(i, j)] * t[j]).sum())
                .collect()
        })
        .collect();

    let step = quad.step();
    let inner = quad.radius - step;
    let mut total = C64::new(0.0, 0.0);
    let mut mass = 0.0;
    let mut shell = 0.0;
    let mut c = vec![0.0; d];
    let mut xb = vec![0.0; d];
    for (alpha, y) in quad.y_nodes.iter().enumerate() {
        let y_outer = dot_real(y, y) > inner * inner;
        for (beta, t) in quad.t_nodes.iter().enumerate() {
            for i in 0..d {
                c[i] = -0.5 * (y[i] + t[i]);
                xb[i] = 0.5 * (y[i] - t[i]);
            }
            let phase = 0.5 * dot_real(y, &st[beta]);
            let f = window_fourier(&table, w, &c, &xb);
            let term = C64::from_polar(1.0, phase) * f * ip_u[beta] * ip_v[alpha];
            total += term;
            let mag = term.norm();
            mass += mag;
            if y_outer || dot_real(t, t) > inner * inner {
                shell += mag;
            }
        }
    }
    let measure = (w.vol * quad.cell()).powi(2);
    let prefactor = 1.0
        / (2f64.powi(n as i32) * (2.0 * std::f64::consts::PI).powi(2 * n as i32));
    let value = total * measure * prefactor;

    let mut warnings = Vec::new();
    if mass > 0.0 && shell / mass > TAIL_RATIO {
        warnings.push(Warning::TailTruncation {
            context: "outermost quadrature shell of the pair integral".into(),
            ratio: shell / mass,
        });
    }
    let increment = sigma_norm(w) * quad.radius * step / 2.0;
    if increment > std::f64::consts::FRAC_PI_2 {
        warnings.push(Warning::PhaseResolution {
            max_increment: increment,
        });
    }
    Ok(Flagged::with(value, warnings))
}

/// `(𝒯u, V_node)` for every node of the quadrature.
pub fn overlap_profile(
    setup: &Setup,
    quad: &RankOneQuadrature,
    u: &SampledFunction,
) -> Result<Vec<C64>> {
    let tu = bargmann_transform(&setup.phase, u, &setup.cgrid)?.value;
    let states = coherent_table(setup, &quad.t_nodes)?;
    Ok(states
        .iter()
        .map(|s| h2_inner(&tu, &s.values, &setup.weight))
        .collect())
}

/// Real double-phase-space coordinates of a pair of graph points: midpoint
/// and rotated difference of the pulled-back pair.
pub fn graph_pair_coordinates(weight: &Weight, y: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    let d = 2 * weight.n;
    if y.len() != d || t.len() != d {
        return Err(CoreError::DimMismatch {
            context: "graph pair base coordinates",
            expected: d,
            got: y.len().max(t.len()),
        });
    }
    let apply = |v: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|i| (0..d).map(|j| weight.pullback[(i, j)] * v[j]).sum())
            .collect()
    };
    let sy = SymplecticStructure::new(weight.n)?;
    Ok(sy.q_map_vec(&apply(y), &apply(t)))
}

/// Weighted kernel table over a product of complex boxes: entry `(i, j)` is
/// the kernel at the `i`-th x node and `j`-th z node.
#[derive(Debug, Clone)]
pub struct EffectiveKernel {
    pub xgrid: ComplexGrid,
    pub zgrid: ComplexGrid,
    pub values: Array2<C64>,
}

fn axis_nodes(grid: &RealGrid) -> Vec<Vec<f64>> {
    (0..grid.dim()).map(|a| grid.axis(a).nodes()).collect()
}

/// Assembles the weighted kernel of `a^w` from the rank-one decomposition:
/// the pair integral applied to the damped coherent fields
/// `E_Y(x)·conj(E_T(z))` instead of the scalar matrix elements.
pub fn effective_kernel_assembly(
    setup: &Setup,
    a: &SampledSymbol,
    quad: &RankOneQuadrature,
    xgrid: &ComplexGrid,
    zgrid: &ComplexGrid,
) -> Result<Flagged<EffectiveKernel>> {
    let n = setup.phase.n;
    if quad.n != n || xgrid.n() != n || zgrid.n() != n {
        return Err(CoreError::DimMismatch {
            context: "kernel tabulation dimension",
            expected: n,
            got: quad.n,
        });
    }
    let w = &setup.weight;
    let d = 2 * n;
    let wgrid = RealGrid::isotropic(d, WINDOW_HALF, WINDOW_POINTS)?;
    let table = window_table(w, a, &wgrid)?;
    let states = coherent_table(setup, &quad.y_nodes)?;

    // Damped fields E_j = V_j e^{−Φ} interpolated onto the tabulation boxes.
    let len = setup.cgrid.len();
    let mut buf = Vec::new();
    let mut ex = Vec::with_capacity(states.len());
    let mut ez = Vec::with_capacity(states.len());
    let mut sup = Vec::with_capacity(states.len());
    for state in &states {
        let mut damped = Vec::with_capacity(len);
        let mut peak = 0.0f64;
        for flat in 0..len {
            setup.cgrid.node(flat, &mut buf);
            let val = state.values.values()[flat] * (-w.phi_at(&buf)).exp();
            peak = peak.max(val.norm());
            damped.push(val);
        }
        let interp = TrigInterp::new(&GridSamples::new(setup.cgrid.joint().clone(), damped)?);
        ex.push(interp.eval_grid(&axis_nodes(xgrid.joint())));
        ez.push(interp.eval_grid(&axis_nodes(zgrid.joint())));
        sup.push(peak);
    }

    let st: Vec<Vec<f64>> = quad
        .t_nodes
        .iter()
        .map(|t| {
            (0..d)
                .map(|i| (0..d).map(|j| w.sigma_base[(i, j)] * t[j]).sum())
                .collect()
        })
        .collect();

    let nx = xgrid.len();
    let nz = zgrid.len();
    let step = quad.step();
    let inner = quad.radius - step;
    let mut mass = 0.0;
    let mut shell = 0.0;
    let mut c = vec![0.0; d];
    let mut xb = vec![0.0; d];
    // Separable accumulation: fold the pair weight into per-T profiles over
    // the x box, then contract against the conjugated z fields.
    let mut profiles = vec![C64::new(0.0, 0.0); states.len() * nx];
    for (alpha, y) in quad.y_nodes.iter().enumerate() {
        let y_outer = dot_real(y, y) > inner * inner;
        for (beta, t) in quad.t_nodes.iter().enumerate() {
            for i in 0..d {
                c[i] = -0.5 * (y[i] + t[i]);
                xb[i] = 0.5 * (y[i] - t[i]);
            }
            let phase = 0.5 * dot_real(y, &st[beta]);
            let wgt = C64::from_polar(1.0, phase) * window_fourier(&table, w, &c, &xb);
            let mag = wgt.norm() * sup[alpha] * sup[beta];
            mass += mag;
            if y_outer || dot_real(t, t) > inner * inner {
                shell += mag;
            }
            let row = &mut profiles[beta * nx..(beta + 1) * nx];
            for (p, e) in row.iter_mut().zip(&ex[alpha]) {
                *p += wgt * e;
            }
        }
    }
    let measure = (w.vol * quad.cell()).powi(2);
    let prefactor = 1.0
        / (2f64.powi(n as i32) * (2.0 * std::f64::consts::PI).powi(2 * n as i32));
    let scale = C64::new(measure * prefactor, 0.0);
    let mut values = Array2::from_elem((nx, nz), C64::new(0.0, 0.0));
    for beta in 0..states.len() {
        let row = &profiles[beta * nx..(beta + 1) * nx];
        for i in 0..nx {
            let pi = row[i];
            if pi.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..nz {
                values[(i, j)] += pi * ez[beta][j].conj();
            }
        }
    }
    values.mapv_inplace(|z| z * scale);

    let mut warnings = Vec::new();
    if mass > 0.0 && shell / mass > TAIL_RATIO {
        warnings.push(Warning::TailTruncation {
            context: "outermost quadrature shell of the kernel assembly".into(),
            ratio: shell / mass,
        });
    }
    let increment = sigma_norm(w) * quad.radius * step / 2.0;
    if increment > std::f64::consts::FRAC_PI_2 {
        warnings.push(Warning::PhaseResolution {
            max_increment: increment,
        });
    }
    Ok(Flagged::with(
        EffectiveKernel {
            xgrid: xgrid.clone(),
            zgrid: zgrid.clone(),
            values,
        },
        warnings,
    ))
}

/// Cross-check route for the weighted kernel: quantize the symbol on the real
/// side and push the kernel through the transform in the first slot and the
/// conjugated transform in the second.
pub fn effective_kernel_transform(
    setup: &Setup,
    aq: &SampledSymbol,
    xgrid: &ComplexGrid,
    zgrid: &ComplexGrid,
) -> Result<Flagged<EffectiveKernel>> {
    let n = setup.phase.n;
    if xgrid.n() != n || zgrid.n() != n {
        return Err(CoreError::DimMismatch {
            context: "kernel tabulation dimension",
            expected: n,
            got: xgrid.n(),
        });
    }
    let kernel = symbol_to_kernel(aq)?;
    let warnings = kernel.warnings;
    let kernel = kernel.value;
    let fgrid = kernel.grid.clone();
    let nk = fgrid.len();
    let side = setup.phase.c_phi * fgrid.quad_weight();
    let mut ynode = vec![0.0; n];
    let ynodes: Vec<Vec<C64>> = (0..nk)
        .map(|flat| {
            fgrid.node(flat, &mut ynode);
            ynode.iter().map(|&t| C64::new(t, 0.0)).collect()
        })
        .collect();

    let phase_matrix = |grid: &ComplexGrid, conjugate: bool| -> DMatrix<C64> {
        let mut buf = Vec::new();
        DMatrix::from_fn(grid.len(), nk, |i, alpha| {
            grid.node(i, &mut buf);
            let damp = (-setup.weight.phi_at(&buf)).exp() * side;
            let ph = (C64::i() * setup.phase.phi_value(&buf, &ynodes[alpha])).exp();
            let ph = if conjugate { ph.conj() } else { ph };
            ph * damp
        })
    };
    let mx = phase_matrix(xgrid, false);
    let mz = phase_matrix(zgrid, true);
    let kd = DMatrix::from_fn(nk, nk, |i, j| kernel.entries[(i, j)]);
    let product = &mx * &kd * mz.transpose();
    let values = Array2::from_shape_fn((xgrid.len(), zgrid.len()), |(i, j)| product[(i, j)]);
    Ok(Flagged::with(
        EffectiveKernel {
            xgrid: xgrid.clone(),
            zgrid: zgrid.clone(),
            values,
        },
        warnings,
    ))
}

/// `e^{−iℓ(x,D)}u` for a real linear form on real phase space, by the same
/// three-factor formula as the complex-side translation.
fn weyl_translate_real(u: &SampledFunction, ell: &LinearFormEll) -> Result<SampledFunction> {
    let n = u.grid.dim();
    let lx: Vec<f64> = ell.lx.iter().map(|z| z.re).collect();
    let lxi: Vec<f64> = ell.lxi.iter().map(|z| z.re).collect();
    let modulate = |g: &SampledFunction| -> SampledFunction {
        let mut node = vec![0.0; n];
        let mut values = Vec::with_capacity(g.values.len());
        for flat in 0..g.values.len() {
            g.grid.node(flat, &mut node);
            let ph = -0.5 * dot_real(&lx, &node);
            values.push(g.values[flat] * C64::from_polar(1.0, ph));
        }
        GridSamples::new(g.grid.clone(), values).expect("modulation keeps the grid")
    };
    let first = modulate(u);
    let moved = fourier::shift(&first, &lxi)?;
    Ok(modulate(&moved))
}

/// Pullback `ℓ∘κ⁻¹` of a linear form along the canonical map: the form whose
/// quantized flow on the transform side matches the real-side flow of `ℓ`.
fn pullback_linear_form(setup: &Setup, ell: &LinearFormEll) -> LinearFormEll {
    let n = setup.phase.n;
    let zero = vec![C64::new(0.0, 0.0); n];
    let eval = |x: &[C64], xi: &[C64]| -> C64 {
        let (y, eta) = setup.phase.kappa_inverse(x, xi);
        dot(&ell.lx, &y) + dot(&ell.lxi, &eta)
    };
    let mut lx = Vec::with_capacity(n);
    let mut lxi = Vec::with_capacity(n);
    for i in 0..n {
        let mut basis = zero.clone();
        basis[i] = C64::new(1.0, 0.0);
        lx.push(eval(&basis, &zero));
        lxi.push(eval(&zero, &basis));
    }
    LinearFormEll { lx, lxi }
}

/// `‖𝒯(e^{−iℓ(x,D)}u) − e^{−ik(x,D)}𝒯u‖` in the weighted square norm, with
/// `k = ℓ∘κ⁻¹`: the defect of the exact intertwining of linear flows.
pub fn egorov_check(setup: &Setup, u: &SampledFunction, ell: &LinearFormEll) -> Result<f64> {
    let n = setup.phase.n;
    if ell.lx.len() != n || ell.lxi.len() != n {
        return Err(CoreError::DimMismatch {
            context: "flow generator dimension",
            expected: n,
            got: ell.lx.len(),
        });
    }
    let imag = ell
        .lx
        .iter()
        .chain(&ell.lxi)
        .map(|z| z.im.abs())
        .fold(0.0, f64::max);
    if imag > REALITY_TOL {
        return Err(CoreError::InvalidParam(format!(
            "flow generator must be real on real phase space, imaginary part {imag:.3e}"
        )));
    }
    let moved = weyl_translate_real(u, ell)?;
    let lhs = bargmann_transform(&setup.phase, &moved, &setup.cgrid)?.value;
    let tu = bargmann_transform(&setup.phase, u, &setup.cgrid)?.value;
    let k = pullback_linear_form(setup, ell);
    let rhs = magnetic_translate(&tu, &k, &setup.weight)?;
    let diff = ComplexGridFunction {
        grid: lhs.grid.clone(),
        samples: lhs.samples.sub(&rhs.samples),
    };
    Ok(h2_inner(&diff, &diff, &setup.weight).re.max(0.0).sqrt())
}
