//! Gaussian-kernel integral transforms onto weighted spaces of functions on
//! a complex box.
//!
//! A transform here is `u ↦ C ∫ e^{iφ(x,y)} u(y) dy` with `φ` a holomorphic
//! quadratic form in `(x, y) ∈ Cⁿ × Cⁿ` whose data satisfies `det φ″_{xy} ≠ 0`
//! and `Im φ″_{yy} > 0`. Each such phase induces a real quadratic weight
//! `Φ(x) = max_y(−Im φ(x,y))`, a holomorphic polarization `Ψ` with
//! `Ψ(x, x̄) = Φ(x)`, and a complex-linear canonical map `κ` sending the real
//! phase space onto the graph `{(x, (2/i)∂ₓΦ)}`. The module tabulates the
//! transform and its adjoint on rectangular complex grids, computes the
//! weighted `p`-norms, the orthogonal projection with kernel `e^{2Ψ(x,ȳ)}`,
//! and the Gaussian kernel connecting two different transforms.
//!
//! The overall constant of each transform and the projection constant are
//! calibrated numerically: `C` so that the ground Gaussian has unit image
//! norm, and the projection constant by least squares on that image.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::fourier;
use crate::grid::{GridSamples, RealGrid};
use crate::quadform::{complexify, max_imag, realify, QuadForm};
use crate::warn::{Flagged, Warning};
use crate::{C64, PExponent};

/// Default real-side integration box. The step must keep the transform's
/// oscillation `e^{i x·B y}` below Nyquist for every `x` in the complex box:
/// `π/h > max|Re(Bᵗx)| + spectral width of the integrand` — here 31.4 > ~28
/// for the widest registered mixing block.
const REAL_HALF_WIDTH: f64 = 10.0;
const REAL_POINTS: usize = 200;
/// Default complex box: half width per real coordinate and points per axis.
/// The step must resolve adjoint, kernel, and translation phases at the box
/// corners, which grow linearly with the corner coordinates.
const CPLX_HALF_WIDTH: f64 = 10.0;
const CPLX_POINTS: usize = 80;
/// Boundary-mass ratio above which integration carries an advisory.
const EDGE_WARN: f64 = 1e-10;

fn matvec(m: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m.nrows()];
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i] += m[(i, j)] * v[j];
        }
    }
    out
}

fn matvec_t(m: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m.ncols()];
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out[j] += m[(i, j)] * v[i];
        }
    }
    out
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `xᵗ M y` for the (complex bilinear) coefficient pairing.
fn quad_xy(m: &DMatrix<C64>, x: &[C64], y: &[C64]) -> C64 {
    dot(&matvec(m, y), x)
}

fn check_symmetric(m: &DMatrix<C64>, what: &str) -> Result<()> {
    let dev = (m - m.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > 1e-12 {
        return Err(CoreError::PhaseInvalid(format!(
            "{what} block is not symmetric (deviation {dev:.2e})"
        )));
    }
    Ok(())
}

/// Holomorphic quadratic phase `φ(x,y) = ½xᵗAx + xᵗBy + ½yᵗCy` together with
/// the calibrated positive constant of its integral transform.
#[derive(Debug, Clone)]
pub struct QuadraticPhase {
    pub n: usize,
    pub a: DMatrix<C64>,
    pub b: DMatrix<C64>,
    pub c: DMatrix<C64>,
    /// Overall transform constant; 1 until calibrated by [`Setup`].
    pub c_phi: f64,
    binv: DMatrix<C64>,
    btinv: DMatrix<C64>,
}

impl QuadraticPhase {
    /// Validates the defining blocks: `A`, `C` symmetric, `B` invertible,
    /// `Im C` positive definite, and the induced weight strictly
    /// plurisubharmonic.
    pub fn new(n: usize, a: DMatrix<C64>, b: DMatrix<C64>, c: DMatrix<C64>) -> Result<Self> {
        for (m, what) in [(&a, "A"), (&b, "B"), (&c, "C")] {
            if m.nrows() != n || m.ncols() != n {
                return Err(CoreError::DimMismatch {
                    context: "quadratic phase block",
                    expected: n,
                    got: m.nrows().max(m.ncols()),
                });
            }
            if what != "B" {
                check_symmetric(m, what)?;
            }
        }
        let im_c = DMatrix::from_fn(n, n, |i, j| c[(i, j)].im);
        let min_eig = im_c
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig <= 1e-12 {
            return Err(CoreError::PhaseInvalid(format!(
                "Im C must be positive definite, smallest eigenvalue {min_eig:.2e}"
            )));
        }
        let binv = b.clone().try_inverse().ok_or(CoreError::Singular {
            context: "phase mixing block",
        })?;
        let btinv = b.transpose().try_inverse().ok_or(CoreError::Singular {
            context: "phase mixing block",
        })?;
        let phase = QuadraticPhase {
            n,
            a,
            b,
            c,
            c_phi: 1.0,
            binv,
            btinv,
        };
        // Strict plurisubharmonicity of the induced weight.
        phase.weight()?;
        Ok(phase)
    }

    /// `φ(x, y)` for complex arguments.
    pub fn phi_value(&self, x: &[C64], y: &[C64]) -> C64 {
        quad_xy(&self.a, x, x) * 0.5 + quad_xy(&self.b, x, y) + quad_xy(&self.c, y, y) * 0.5
    }

    /// The canonical map `(y, −φ′_y) ↦ (x, φ′ₓ)`: maps `(y, η)` to `(x, ξ)`
    /// with `x` solving `−(Bᵗx + Cy) = η`.
    pub fn kappa(&self, y: &[C64], eta: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let cy = matvec(&self.c, y);
        let rhs: Vec<C64> = eta.iter().zip(&cy).map(|(e, c)| -(e + c)).collect();
        let x = matvec(&self.btinv, &rhs);
        let ax = matvec(&self.a, &x);
        let by = matvec(&self.b, y);
        let xi = ax.iter().zip(&by).map(|(p, q)| p + q).collect();
        (x, xi)
    }

    /// Inverse of [`Self::kappa`]: from `(x, ξ)` recovers `(y, η)`.
    pub fn kappa_inverse(&self, x: &[C64], xi: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let ax = matvec(&self.a, x);
        let rhs: Vec<C64> = xi.iter().zip(&ax).map(|(s, p)| s - p).collect();
        let y = matvec(&self.binv, &rhs);
        let btx = matvec_t(&self.b, x);
        let cy = matvec(&self.c, &y);
        let eta = btx.iter().zip(&cy).map(|(p, q)| -(p + q)).collect();
        (y, eta)
    }

    /// Exponent `g` of the ground-state image: the critical value in `y` of
    /// `φ(x,y) + i y²/2`, as a holomorphic form in `x`.
    pub fn ground_state_exponent(&self) -> Result<QuadForm> {
        let n = self.n;
        let mut f = QuadForm::zero(vec![n, n]);
        f.set_block(0, 0, &self.a);
        f.set_block(0, 1, &self.b);
        let ci = &self.c + DMatrix::<C64>::identity(n, n).map(|z| z * C64::i());
        f.set_block(1, 1, &ci);
        Ok(f.critical_value(1)?.form)
    }

    /// The induced weight data: `Φ`, its polarization, the graph-chart
    /// pullback of `κ⁻¹`, and the restricted symplectic structure.
    pub fn weight(&self) -> Result<Weight> {
        let n = self.n;
        // −Im φ as a real form over (Re x, Im x, y); its maximizer in y
        // exists because Im C > 0 makes the y-problem strictly concave.
        let neg_im = |m: &DMatrix<C64>| m.map(|z| C64::new(-z.im, 0.0));
        let neg_re = |m: &DMatrix<C64>| m.map(|z| C64::new(-z.re, 0.0));
        let mut f = QuadForm::zero(vec![n, n, n]);
        f.set_block(0, 0, &neg_im(&self.a));
        f.set_block(1, 1, &self.a.map(|z| C64::new(z.im, 0.0)));
        f.set_block(0, 1, &neg_re(&self.a));
        f.set_block(0, 2, &neg_im(&self.b));
        f.set_block(1, 2, &neg_re(&self.b));
        f.set_block(2, 2, &neg_im(&self.c));
        let crit = f.critical_value(2)?;
        if max_imag(&crit.form.mat) > 1e-10 {
            return Err(CoreError::PhaseInvalid(
                "induced weight came out non-real".into(),
            ));
        }
        let phi_mat = realify(&crit.form.mat);

        // Polarization: substitute x₁ = (x+w)/2, x₂ = (x−w)/(2i) and read off
        // the blocks of the resulting holomorphic form in (x, w).
        let half = C64::new(0.5, 0.0);
        let mhalf_i = C64::new(0.0, -0.5);
        let mut u = DMatrix::<C64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            u[(i, i)] = half;
            u[(i, n + i)] = half;
            u[(n + i, i)] = mhalf_i;
            u[(n + i, n + i)] = -mhalf_i;
        }
        let mc = u.transpose() * complexify(&phi_mat) * &u;
        let pol = QuadForm::new(vec![n, n], mc)?;
        let psi11 = pol.block(0, 0);
        let psi12 = pol.block(0, 1);
        let psi22 = pol.block(1, 1);

        // The mixed block is the complex Hessian of Φ; strict
        // plurisubharmonicity = positive definiteness.
        let herm_dev = (&psi12 - psi12.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm_dev > 1e-10 {
            return Err(CoreError::PhaseInvalid(format!(
                "mixed polarization block is not Hermitian (deviation {herm_dev:.2e})"
            )));
        }
        let levi_min = psi12
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if levi_min <= 1e-10 {
            return Err(CoreError::PhaseInvalid(format!(
                "weight is not strictly plurisubharmonic, smallest complex Hessian eigenvalue {levi_min:.2e}"
            )));
        }

        // Frequency component of the weight graph at the real basis points,
        // then the restricted symplectic form and the chart pullback.
        let lam = |v: &[f64]| -> Vec<C64> {
            let mut g = vec![0.0; 2 * n];
            for i in 0..2 * n {
                for j in 0..2 * n {
                    g[i] += phi_mat[(i, j)] * v[j];
                }
            }
            (0..n).map(|i| C64::new(-g[n + i], -g[i])).collect()
        };
        let mut basis_x: Vec<Vec<C64>> = Vec::with_capacity(2 * n);
        let mut basis_xi: Vec<Vec<C64>> = Vec::with_capacity(2 * n);
        for j in 0..2 * n {
            let mut v = vec![0.0; 2 * n];
            v[j] = 1.0;
            let x: Vec<C64> = (0..n).map(|i| C64::new(v[i], v[n + i])).collect();
            basis_xi.push(lam(&v));
            basis_x.push(x);
        }
        let mut sigma_base = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for j in 0..2 * n {
            for k in 0..2 * n {
                let s = dot(&basis_xi[j], &basis_x[k]) - dot(&basis_x[j], &basis_xi[k]);
                if s.im.abs() > 1e-10 {
                    return Err(CoreError::PhaseInvalid(
                        "restricted symplectic form came out non-real".into(),
                    ));
                }
                sigma_base[(j, k)] = s.re;
            }
        }
        let vol = sigma_base.determinant().abs().sqrt();
        if !(vol.is_finite() && vol > 1e-10) {
            return Err(CoreError::PhaseInvalid(
                "degenerate restricted symplectic volume".into(),
            ));
        }
        let mut pullback = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for j in 0..2 * n {
            let (y, eta) = self.kappa_inverse(&basis_x[j], &basis_xi[j]);
            for i in 0..n {
                if y[i].im.abs() > 1e-8 || eta[i].im.abs() > 1e-8 {
                    return Err(CoreError::PhaseInvalid(
                        "weight graph does not pull back to real phase space".into(),
                    ));
                }
                pullback[(i, j)] = y[i].re;
                pullback[(n + i, j)] = eta[i].re;
            }
        }

        Ok(Weight {
            n,
            phi_mat,
            psi11,
            psi12,
            psi22,
            a_phi: 1.0,
            sigma_base,
            vol,
            pullback,
        })
    }
}

/// The radial phase `(i/2)(x−y)² − (i/4)x²`.
pub fn radial_phase() -> QuadraticPhase {
    let e = |z: C64| DMatrix::from_element(1, 1, z);
    QuadraticPhase::new(1, e(C64::new(0.0, 0.5)), e(C64::new(0.0, -1.0)), e(C64::new(0.0, 1.0)))
        .expect("radial phase data is admissible")
}

/// The plane-like phase `i(x−y)²`, whose weight sees only `Im x`.
pub fn plane_like_phase() -> QuadraticPhase {
    let e = |z: C64| DMatrix::from_element(1, 1, z);
    QuadraticPhase::new(1, e(C64::new(0.0, 2.0)), e(C64::new(0.0, -2.0)), e(C64::new(0.0, 2.0)))
        .expect("plane-like phase data is admissible")
}

/// An asymmetric phase with a genuinely complex mixing block, for exercising
/// transform independence.
pub fn asymmetric_phase() -> QuadraticPhase {
    let e = |z: C64| DMatrix::from_element(1, 1, z);
    QuadraticPhase::new(
        1,
        e(C64::new(0.25, 0.25)),
        e(C64::new(-1.2, 0.3)),
        e(C64::new(0.2, 1.0)),
    )
    .expect("asymmetric phase data is admissible")
}

/// Weight data induced by a quadratic phase: the real form `Φ`, its
/// holomorphic polarization `Ψ`, and the graph-chart geometry of
/// `{(x, (2/i)∂ₓΦ)}`.
#[derive(Debug, Clone)]
pub struct Weight {
    pub n: usize,
    /// `Φ(x) = ½ vᵗ (phi_mat) v` over `v = (Re x, Im x)`.
    pub phi_mat: DMatrix<f64>,
    /// Polarization blocks: `Ψ(x,w) = ½xᵗ(psi11)x + xᵗ(psi12)w + ½wᵗ(psi22)w`.
    pub psi11: DMatrix<C64>,
    pub psi12: DMatrix<C64>,
    pub psi22: DMatrix<C64>,
    /// Projection constant; 1 until calibrated by [`Setup`].
    pub a_phi: f64,
    /// Restricted symplectic form in base coordinates.
    pub sigma_base: DMatrix<f64>,
    /// Volume density of the graph chart (Pfaffian modulus of `sigma_base`).
    pub vol: f64,
    /// Real-linear map taking a base point of the weight graph to the
    /// corresponding real phase-space point under the inverse canonical map.
    pub pullback: DMatrix<f64>,
}

impl Weight {
    fn split(x: &[C64]) -> Vec<f64> {
        let n = x.len();
        let mut v = vec![0.0; 2 * n];
        for i in 0..n {
            v[i] = x[i].re;
            v[n + i] = x[i].im;
        }
        v
    }

    /// `Φ(x)`.
    pub fn phi_at(&self, x: &[C64]) -> f64 {
        let v = Self::split(x);
        let mut acc = 0.0;
        for i in 0..v.len() {
            for j in 0..v.len() {
                acc += v[i] * self.phi_mat[(i, j)] * v[j];
            }
        }
        0.5 * acc
    }

    /// Frequency component of the weight graph: `(2/i)∂ₓΦ`.
    pub fn lambda_xi(&self, x: &[C64]) -> Vec<C64> {
        let v = Self::split(x);
        let n = self.n;
        let mut g = vec![0.0; 2 * n];
        for i in 0..2 * n {
            for j in 0..2 * n {
                g[i] += self.phi_mat[(i, j)] * v[j];
            }
        }
        (0..n).map(|i| C64::new(-g[n + i], -g[i])).collect()
    }

    /// The polarization `Ψ(x, w)` at complex arguments.
    pub fn psi_at(&self, x: &[C64], w: &[C64]) -> C64 {
        quad_xy(&self.psi11, x, x) * 0.5 + quad_xy(&self.psi12, x, w) + quad_xy(&self.psi22, w, w) * 0.5
    }
}

/// Rectangular box in `Cⁿ`: a real grid for the real parts and one for the
/// imaginary parts, tabulated jointly in row-major order with the real axes
/// slower.
#[derive(Debug, Clone)]
pub struct ComplexGrid {
    pub re_grid: RealGrid,
    pub im_grid: RealGrid,
    joint: RealGrid,
}

impl ComplexGrid {
    pub fn new(re_grid: RealGrid, im_grid: RealGrid) -> Result<Self> {
        if re_grid.dim() != im_grid.dim() {
            return Err(CoreError::DimMismatch {
                context: "complex grid real/imaginary parts",
                expected: re_grid.dim(),
                got: im_grid.dim(),
            });
        }
        let axes: Vec<_> = re_grid
            .axes()
            .iter()
            .chain(im_grid.axes().iter())
            .cloned()
            .collect();
        let joint = RealGrid::from_axes(axes)?;
        Ok(ComplexGrid {
            re_grid,
            im_grid,
            joint,
        })
    }

    pub fn isotropic(n: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        Self::new(
            RealGrid::isotropic(n, half_width, points_per_axis)?,
            RealGrid::isotropic(n, half_width, points_per_axis)?,
        )
    }

    pub fn n(&self) -> usize {
        self.re_grid.dim()
    }

    /// The underlying `2n`-dimensional real grid.
    pub fn joint(&self) -> &RealGrid {
        &self.joint
    }

    pub fn len(&self) -> usize {
        self.joint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joint.len() == 0
    }

    /// Complex coordinates of a flat node index.
    pub fn node(&self, flat: usize, buf: &mut Vec<C64>) {
        let n = self.n();
        let mut v = vec![0.0; 2 * n];
        self.joint.node(flat, &mut v);
        buf.clear();
        buf.extend((0..n).map(|i| C64::new(v[i], v[n + i])));
    }

    /// Lebesgue quadrature weight of one cell.
    pub fn quad_weight(&self) -> f64 {
        self.joint.quad_weight()
    }
}

/// Complex samples over a [`ComplexGrid`].
#[derive(Debug, Clone)]
pub struct ComplexGridFunction {
    pub grid: ComplexGrid,
    pub samples: GridSamples,
}

impl ComplexGridFunction {
    pub fn from_fn(grid: ComplexGrid, f: impl Fn(&[C64]) -> C64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut buf = Vec::new();
        for flat in 0..grid.len() {
            grid.node(flat, &mut buf);
            values.push(f(&buf));
        }
        let samples = GridSamples::new(grid.joint().clone(), values)
            .expect("length matches grid by construction");
        ComplexGridFunction { grid, samples }
    }

    pub fn values(&self) -> &[C64] {
        &self.samples.values
    }

    pub fn scaled(&self, c: C64) -> Self {
        ComplexGridFunction {
            grid: self.grid.clone(),
            samples: self.samples.scaled(c),
        }
    }
}

/// First `count` Hermite functions on a one-dimensional grid, generated by
/// the ladder recurrence from the unit-norm ground Gaussian.
pub fn hermite_batch(grid: &RealGrid, count: usize) -> Result<Vec<GridSamples>> {
    if grid.dim() != 1 {
        return Err(CoreError::DimMismatch {
            context: "Hermite batch grid",
            expected: 1,
            got: grid.dim(),
        });
    }
    let nodes: Vec<f64> = (0..grid.len())
        .map(|k| {
            let mut v = [0.0];
            grid.node(k, &mut v);
            v[0]
        })
        .collect();
    let mut batch: Vec<GridSamples> = Vec::with_capacity(count);
    for k in 0..count {
        let values: Vec<C64> = if k == 0 {
            let c = std::f64::consts::PI.powf(-0.25);
            nodes.iter().map(|&x| C64::new(c * (-0.5 * x * x).exp(), 0.0)).collect()
        } else if k == 1 {
            let prev = &batch[0].values;
            nodes
                .iter()
                .zip(prev)
                .map(|(&x, &p)| p * (2.0f64).sqrt() * x)
                .collect()
        } else {
            let (head, tail) = batch.split_at(k - 1);
            let (p2, p1) = (&head[k - 2].values, &tail[0].values);
            let c1 = (2.0 / k as f64).sqrt();
            let c2 = ((k - 1) as f64 / k as f64).sqrt();
            nodes
                .iter()
                .enumerate()
                .map(|(i, &x)| p1[i] * c1 * x - p2[i] * c2)
                .collect()
        };
        batch.push(GridSamples::new(grid.clone(), values)?);
    }
    Ok(batch)
}

/// The unitary Fourier transform `(2π)^{−n/2} ∫ e^{−ix·ξ} u dx`, tabulated on
/// the dual grid.
pub fn fourier_unitary(u: &GridSamples) -> GridSamples {
    let n = u.grid.dim();
    fourier::forward(u).scaled(C64::new(
        (2.0 * std::f64::consts::PI).powf(-(n as f64) / 2.0),
        0.0,
    ))
}

/// Tabulates `C_φ ∫ e^{iφ(x,y)} u(y) dy` at every node of the complex grid.
pub fn bargmann_transform(
    phase: &QuadraticPhase,
    u: &GridSamples,
    cgrid: &ComplexGrid,
) -> Result<Flagged<ComplexGridFunction>> {
    let n = phase.n;
    if u.grid.dim() != n || cgrid.n() != n {
        return Err(CoreError::DimMismatch {
            context: "transform input dimension",
            expected: n,
            got: u.grid.dim(),
        });
    }
    let mut warnings = Vec::new();
    let peak = u.max_abs();
    if peak > 0.0 {
        let ratio = u.boundary_max_abs() / peak;
        if ratio > EDGE_WARN {
            warnings.push(Warning::BoundaryMass {
                context: "real-side samples at the integration box edge".into(),
                ratio,
            });
        }
    }

    let qw = u.grid.quad_weight();
    let ylen = u.grid.len();
    let mut ybuf = vec![0.0; n];
    let mut ys: Vec<Vec<C64>> = Vec::with_capacity(ylen);
    let mut half_cy = Vec::with_capacity(ylen);
    for k in 0..ylen {
        u.grid.node(k, &mut ybuf);
        let y: Vec<C64> = ybuf.iter().map(|&t| C64::new(t, 0.0)).collect();
        half_cy.push(quad_xy(&phase.c, &y, &y) * 0.5);
        ys.push(y);
    }

    let mut xbuf = Vec::new();
    let scale = C64::new(phase.c_phi * qw, 0.0);
    let mut values = Vec::with_capacity(cgrid.len());
    for flat in 0..cgrid.len() {
        cgrid.node(flat, &mut xbuf);
        let half_ax = quad_xy(&phase.a, &xbuf, &xbuf) * 0.5;
        let btx = matvec_t(&phase.b, &xbuf);
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..ylen {
            let ph = half_ax + dot(&btx, &ys[k]) + half_cy[k];
            acc += (C64::i() * ph).exp() * u.values[k];
        }
        values.push(acc * scale);
    }
    let samples = GridSamples::new(cgrid.joint().clone(), values)?;
    Ok(Flagged {
        value: ComplexGridFunction {
            grid: cgrid.clone(),
            samples,
        },
        warnings,
    })
}

/// Adjoint of the transform with respect to the weighted inner product:
/// `y ↦ C_φ ∫ conj(e^{iφ(w,y)}) V(w) e^{−2Φ(w)} L(dw)` at real `y`.
pub fn bargmann_adjoint(
    phase: &QuadraticPhase,
    weight: &Weight,
    v: &ComplexGridFunction,
    rgrid: &RealGrid,
) -> Result<Flagged<GridSamples>> {
    let n = phase.n;
    if rgrid.dim() != n || v.grid.n() != n {
        return Err(CoreError::DimMismatch {
            context: "adjoint input dimension",
            expected: n,
            got: rgrid.dim(),
        });
    }
    let wlen = v.grid.len();
    let qw = v.grid.quad_weight();
    let mut wbuf = Vec::new();
    let mut weighted = Vec::with_capacity(wlen);
    let mut half_aw = Vec::with_capacity(wlen);
    let mut btw = Vec::with_capacity(wlen);
    let mut peak: f64 = 0.0;
    let mut edge: f64 = 0.0;
    let joint = v.grid.joint();
    for flat in 0..wlen {
        v.grid.node(flat, &mut wbuf);
        let damp = (-2.0 * weight.phi_at(&wbuf)).exp();
        let val = v.values()[flat] * damp;
        let mag = val.norm();
        peak = peak.max(mag);
        if joint.is_boundary(flat) {
            edge = edge.max(mag);
        }
        weighted.push(val * qw);
        half_aw.push(quad_xy(&phase.a, &wbuf, &wbuf) * 0.5);
        btw.push(matvec_t(&phase.b, &wbuf));
    }
    let mut warnings = Vec::new();
    if peak > 0.0 && edge / peak > EDGE_WARN {
        warnings.push(Warning::BoundaryMass {
            context: "weighted samples at the complex box edge".into(),
            ratio: edge / peak,
        });
    }

    let mut ybuf = vec![0.0; n];
    let mut values = Vec::with_capacity(rgrid.len());
    for k in 0..rgrid.len() {
        rgrid.node(k, &mut ybuf);
        let y: Vec<C64> = ybuf.iter().map(|&t| C64::new(t, 0.0)).collect();
        let half_cy = quad_xy(&phase.c, &y, &y) * 0.5;
        let mut acc = C64::new(0.0, 0.0);
        for w in 0..wlen {
            let ph = half_aw[w] + dot(&btw[w], &y) + half_cy;
            acc += (C64::i() * ph).exp().conj() * weighted[w];
        }
        values.push(acc * phase.c_phi);
    }
    Ok(Flagged {
        value: GridSamples::new(rgrid.clone(), values)?,
        warnings,
    })
}

/// Weighted `p`-norm `‖V e^{−Φ}‖_{L^p}` over the complex box.
pub fn hp_norm(v: &ComplexGridFunction, weight: &Weight, p: PExponent) -> Flagged<f64> {
    let qw = v.grid.quad_weight();
    let joint = v.grid.joint();
    let mut buf = Vec::new();
    let mut peak: f64 = 0.0;
    let mut edge: f64 = 0.0;
    let mut sum = 0.0;
    let mut sup: f64 = 0.0;
    for flat in 0..v.grid.len() {
        v.grid.node(flat, &mut buf);
        let m = v.values()[flat].norm() * (-weight.phi_at(&buf)).exp();
        peak = peak.max(m);
        if joint.is_boundary(flat) {
            edge = edge.max(m);
        }
        match p {
            PExponent::One => sum += m * qw,
            PExponent::Two => sum += m * m * qw,
            PExponent::Infinity => sup = sup.max(m),
        }
    }
    let value = match p {
        PExponent::One => sum,
        PExponent::Two => sum.sqrt(),
        PExponent::Infinity => sup,
    };
    let mut warnings = Vec::new();
    if !matches!(p, PExponent::Infinity) && peak > 0.0 && edge / peak > EDGE_WARN {
        warnings.push(Warning::BoundaryMass {
            context: "weighted integrand at the complex box edge".into(),
            ratio: edge / peak,
        });
    }
    Flagged { value, warnings }
}

/// Weighted inner product `(U, V) = ∫ U conj(V) e^{−2Φ} L(dx)`.
pub fn h2_inner(u: &ComplexGridFunction, v: &ComplexGridFunction, weight: &Weight) -> C64 {
    debug_assert_eq!(u.grid.len(), v.grid.len());
    let qw = u.grid.quad_weight();
    let mut buf = Vec::new();
    let mut acc = C64::new(0.0, 0.0);
    for flat in 0..u.grid.len() {
        u.grid.node(flat, &mut buf);
        let damp = (-2.0 * weight.phi_at(&buf)).exp();
        acc += u.values()[flat] * v.values()[flat].conj() * damp;
    }
    acc * qw
}

/// Raw projection integral `∫ e^{2Ψ(x,ȳ)} g(y) e^{−2Φ(y)} L(dy)` evaluated at
/// the listed flat indices; the integral always runs over the whole grid.
fn projection_at(
    g: &ComplexGridFunction,
    weight: &Weight,
    targets: &[usize],
) -> (Vec<C64>, Vec<Warning>) {
    let len = g.grid.len();
    let qw = g.grid.quad_weight();
    let joint = g.grid.joint();
    let mut buf = Vec::new();
    let mut weighted = Vec::with_capacity(len);
    let mut psi22_half = Vec::with_capacity(len);
    let mut wys = Vec::with_capacity(len);
    let mut peak: f64 = 0.0;
    let mut edge: f64 = 0.0;
    for flat in 0..len {
        g.grid.node(flat, &mut buf);
        let damp = (-2.0 * weight.phi_at(&buf)).exp();
        let val = g.values()[flat] * damp;
        let mag = val.norm();
        peak = peak.max(mag);
        if joint.is_boundary(flat) {
            edge = edge.max(mag);
        }
        let wy: Vec<C64> = buf.iter().map(|z| z.conj()).collect();
        psi22_half.push(quad_xy(&weight.psi22, &wy, &wy) * 0.5);
        wys.push(wy);
        weighted.push(val * qw);
    }
    let mut warnings = Vec::new();
    if peak > 0.0 && edge / peak > EDGE_WARN {
        warnings.push(Warning::BoundaryMass {
            context: "weighted samples at the complex box edge".into(),
            ratio: edge / peak,
        });
    }

    let mut values = Vec::with_capacity(targets.len());
    for &flat in targets {
        g.grid.node(flat, &mut buf);
        let half_11 = quad_xy(&weight.psi11, &buf, &buf) * 0.5;
        let p12x = matvec_t(&weight.psi12, &buf);
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..len {
            let expo = (half_11 + dot(&p12x, &wys[k]) + psi22_half[k]) * 2.0;
            acc += expo.exp() * weighted[k];
        }
        values.push(acc);
    }
    (values, warnings)
}

/// Orthogonal projection onto the transform range: kernel `a_Φ e^{2Ψ(x,ȳ)}`
/// against the weighted measure.
pub fn reproducing_projection(g: &ComplexGridFunction, weight: &Weight) -> Flagged<ComplexGridFunction> {
    let all: Vec<usize> = (0..g.grid.len()).collect();
    let (mut values, warnings) = projection_at(g, weight, &all);
    let scale = C64::new(weight.a_phi, 0.0);
    for v in &mut values {
        *v *= scale;
    }
    let samples =
        GridSamples::new(g.grid.joint().clone(), values).expect("projection keeps the grid");
    Flagged {
        value: ComplexGridFunction {
            grid: g.grid.clone(),
            samples,
        },
        warnings,
    }
}

/// A calibrated transform: phase constant fixed so the ground Gaussian has
/// unit image norm, projection constant fitted on that image.
#[derive(Debug, Clone)]
pub struct Setup {
    pub phase: QuadraticPhase,
    pub weight: Weight,
    pub rgrid: RealGrid,
    pub cgrid: ComplexGrid,
}

impl Setup {
    pub fn with_grids(phase: QuadraticPhase, rgrid: RealGrid, cgrid: ComplexGrid) -> Result<Setup> {
        let mut phase = phase;
        phase.c_phi = 1.0;
        let mut weight = phase.weight()?;
        let e0 = hermite_batch(&rgrid, 1)?.remove(0);
        let t0 = bargmann_transform(&phase, &e0, &cgrid)?.value;
        let norm = hp_norm(&t0, &weight, PExponent::Two).value;
        if !(norm.is_finite() && norm > 0.0) {
            return Err(CoreError::PhaseInvalid(
                "transform normalization integral degenerated".into(),
            ));
        }
        phase.c_phi = 1.0 / norm;
        let t0 = t0.scaled(C64::new(1.0 / norm, 0.0));
        weight.a_phi = 1.0;
        // Least-squares fit of the projection constant on the ground image.
        // The kernel integral runs over the full grid; evaluating it on a
        // strided node subset already overdetermines the single scalar.
        let joint = cgrid.joint();
        let shape = joint.shape();
        let stride = shape.iter().map(|&n| (n / 20).max(1)).collect::<Vec<_>>();
        let targets: Vec<usize> = (0..joint.len())
            .filter(|&flat| {
                let mut rest = flat;
                for a in (0..shape.len()).rev() {
                    if rest % shape[a] % stride[a] != 0 {
                        return false;
                    }
                    rest /= shape[a];
                }
                true
            })
            .collect();
        let (k0, _) = projection_at(&t0, &weight, &targets);
        let mut buf = Vec::new();
        let mut num = 0.0;
        let mut den = 0.0;
        for (&flat, k) in targets.iter().zip(&k0) {
            cgrid.node(flat, &mut buf);
            let damp = (-2.0 * weight.phi_at(&buf)).exp();
            num += (k.conj() * t0.values()[flat]).re * damp;
            den += k.norm_sqr() * damp;
        }
        if !(den.is_finite() && den > 0.0 && num > 0.0) {
            return Err(CoreError::PhaseInvalid(
                "projection normalization fit degenerated".into(),
            ));
        }
        weight.a_phi = num / den;
        Ok(Setup {
            phase,
            weight,
            rgrid,
            cgrid,
        })
    }

    pub fn new(phase: QuadraticPhase) -> Result<Setup> {
        Setup::with_grids(
            phase,
            RealGrid::isotropic(1, REAL_HALF_WIDTH, REAL_POINTS)?,
            ComplexGrid::isotropic(1, CPLX_HALF_WIDTH, CPLX_POINTS)?,
        )
    }
}

/// The `p`-th weighted norm of the transform image of `u`.
pub fn mod_norm(setup: &Setup, u: &GridSamples, p: PExponent) -> Result<Flagged<f64>> {
    let t = bargmann_transform(&setup.phase, u, &setup.cgrid)?;
    let mut warnings = t.warnings;
    let norm = hp_norm(&t.value, &setup.weight, p);
    warnings.extend(norm.warnings);
    Ok(Flagged {
        value: norm.value,
        warnings,
    })
}

/// Applies the composition `𝒯₂ ∘ 𝒯₁*` to a function on the first complex
/// box through the Gaussian kernel obtained by exact stationary elimination
/// of the shared real variable.
pub fn change_of_transform(
    v: &ComplexGridFunction,
    from: &Setup,
    to: &Setup,
) -> Result<Flagged<ComplexGridFunction>> {
    let n = from.phase.n;
    if to.phase.n != n || v.grid.n() != n {
        return Err(CoreError::DimMismatch {
            context: "transform change dimension",
            expected: n,
            got: to.phase.n,
        });
    }
    // Exponent: 2q(x,z) = i · vc_y(φ₂(x,y) − conj-form φ₁(z,y)).
    let conj_m = |m: &DMatrix<C64>| m.map(|z| z.conj());
    let mut f = QuadForm::zero(vec![n, n, n]);
    f.set_block(0, 0, &to.phase.a);
    f.set_block(0, 2, &to.phase.b);
    let h = &to.phase.c - conj_m(&from.phase.c);
    f.set_block(2, 2, &h);
    f.set_block(1, 1, &conj_m(&from.phase.a).map(|z| -z));
    f.set_block(1, 2, &conj_m(&from.phase.b).map(|z| -z));
    let crit = f.critical_value(2)?;
    let expo = crit.form.scaled(C64::i());

    // Gaussian constant of the eliminated integral.
    let det = (h.map(|z| -C64::i() * z)).determinant();
    let gauss = (2.0 * std::f64::consts::PI).powf(n as f64 / 2.0) / det.sqrt();
    let scale = gauss * from.phase.c_phi * to.phase.c_phi;

    let wlen = v.grid.len();
    let qw = v.grid.quad_weight();
    let joint = v.grid.joint();
    let mut buf = Vec::new();
    let mut weighted = Vec::with_capacity(wlen);
    let mut zs = Vec::with_capacity(wlen);
    let mut peak: f64 = 0.0;
    let mut edge: f64 = 0.0;
    for flat in 0..wlen {
        v.grid.node(flat, &mut buf);
        let damp = (-2.0 * from.weight.phi_at(&buf)).exp();
        let val = v.values()[flat] * damp;
        let mag = v.values()[flat].norm() * (-from.weight.phi_at(&buf)).exp();
        peak = peak.max(mag);
        if joint.is_boundary(flat) {
            edge = edge.max(mag);
        }
        zs.push(buf.iter().map(|z| z.conj()).collect::<Vec<C64>>());
        weighted.push(val * qw);
    }
    let mut warnings = Vec::new();
    if peak > 0.0 && edge / peak > EDGE_WARN {
        warnings.push(Warning::BoundaryMass {
            context: "weighted samples at the source complex box edge".into(),
            ratio: edge / peak,
        });
    }

    let mut values = Vec::with_capacity(to.cgrid.len());
    let mut z_full = vec![C64::new(0.0, 0.0); 2 * n];
    for flat in 0..to.cgrid.len() {
        to.cgrid.node(flat, &mut buf);
        z_full[..n].copy_from_slice(&buf);
        let mut acc = C64::new(0.0, 0.0);
        for w in 0..wlen {
            z_full[n..].copy_from_slice(&zs[w]);
            acc += expo.eval(&z_full).exp() * weighted[w];
        }
        values.push(acc * scale);
    }
    let samples = GridSamples::new(to.cgrid.joint().clone(), values)?;
    Ok(Flagged {
        value: ComplexGridFunction {
            grid: to.cgrid.clone(),
            samples,
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::SymplecticStructure;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn phases() -> Vec<QuadraticPhase> {
        vec![radial_phase(), plane_like_phase(), asymmetric_phase()]
    }

    /// Calibrated default setups are costly to build; share them per phase.
    fn setup(which: usize) -> &'static Setup {
        static CACHE: [OnceLock<Setup>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        CACHE[which].get_or_init(|| {
            let phase = match which {
                0 => radial_phase(),
                1 => plane_like_phase(),
                _ => asymmetric_phase(),
            };
            Setup::new(phase).unwrap()
        })
    }

    fn setups() -> impl Iterator<Item = &'static Setup> {
        (0..3).map(setup)
    }

    fn rc(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn radial_weight_is_a_quarter_norm_squared() {
        let w = radial_phase().weight().unwrap();
        for (i, j, want) in [(0, 0, 0.5), (1, 1, 0.5), (0, 1, 0.0)] {
            assert!((w.phi_mat[(i, j)] - want).abs() < 1e-12);
        }
        let x = [C64::new(1.3, -0.7)];
        assert!((w.phi_at(&x) - x[0].norm_sqr() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn plane_like_weight_depends_only_on_the_imaginary_part() {
        let w = plane_like_phase().weight().unwrap();
        for (i, j, want) in [(0, 0, 0.0), (1, 1, 2.0), (0, 1, 0.0)] {
            assert!((w.phi_mat[(i, j)] - want).abs() < 1e-12);
        }
        let x = [C64::new(5.0, -0.8)];
        assert!((w.phi_at(&x) - 0.64).abs() < 1e-12);
    }

    #[test]
    fn weight_scales_linearly_with_the_phase() {
        let lam = 1.7;
        let p = asymmetric_phase();
        let scaled = QuadraticPhase::new(
            1,
            p.a.map(|z| z * lam),
            p.b.map(|z| z * lam),
            p.c.map(|z| z * lam),
        )
        .unwrap();
        let (w, ws) = (p.weight().unwrap(), scaled.weight().unwrap());
        let dev = (&ws.phi_mat - &w.phi_mat.map(|t| t * lam))
            .iter()
            .map(|t| t.abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12);
    }

    #[test]
    fn polarization_restricts_to_the_weight_on_the_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for phase in phases() {
            let w = phase.weight().unwrap();
            for _ in 0..100 {
                let x = [rc(&mut rng)];
                let xb = [x[0].conj()];
                let psi = w.psi_at(&x, &xb);
                assert!(psi.im.abs() < 1e-12);
                assert!((psi.re - w.phi_at(&x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn polarization_gap_controls_the_offdiagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for phase in phases() {
            let w = phase.weight().unwrap();
            let mut c_fit = f64::INFINITY;
            for _ in 0..200 {
                let x = [rc(&mut rng)];
                let y = [rc(&mut rng)];
                let d2 = (x[0] - y[0]).norm_sqr();
                if d2 < 0.01 {
                    continue;
                }
                let lhs = w.phi_at(&x) + w.phi_at(&y) - 2.0 * w.psi_at(&x, &[y[0].conj()]).re;
                assert!(lhs > -1e-10);
                c_fit = c_fit.min(lhs / d2);
            }
            assert!(c_fit > 0.01, "fitted gap constant {c_fit}");
        }
    }

    #[test]
    fn levi_form_is_positive_for_registered_phases() {
        for phase in phases() {
            let w = phase.weight().unwrap();
            let min_eig = w
                .psi12
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(min_eig > 1e-10);
        }
    }

    #[test]
    fn kappa_maps_real_points_onto_the_weight_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for phase in phases() {
            let w = phase.weight().unwrap();
            for _ in 0..50 {
                let y = [C64::new(rng.gen_range(-3.0..3.0), 0.0)];
                let eta = [C64::new(rng.gen_range(-3.0..3.0), 0.0)];
                let (x, xi) = phase.kappa(&y, &eta);
                let expect = w.lambda_xi(&x);
                assert!((xi[0] - expect[0]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn kappa_of_the_plane_like_phase_shears_by_half_the_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let phase = plane_like_phase();
        for _ in 0..20 {
            let y = [rc(&mut rng)];
            let h = [rc(&mut rng)];
            let (x, xi) = phase.kappa(&y, &h);
            assert!((x[0] - (y[0] - C64::i() * h[0] * 0.5)).norm() < 1e-12);
            assert!((xi[0] - h[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn kappa_preserves_the_symplectic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sy = SymplecticStructure::new(1).unwrap();
        for phase in phases() {
            for _ in 0..20 {
                let u = [rc(&mut rng), rc(&mut rng)];
                let v = [rc(&mut rng), rc(&mut rng)];
                let (ux, uxi) = phase.kappa(&u[..1], &u[1..]);
                let (vx, vxi) = phase.kappa(&v[..1], &v[1..]);
                let before = sy.form_cx(&u, &v);
                let after = sy.form_cx(&[ux[0], uxi[0]], &[vx[0], vxi[0]]);
                assert!((before - after).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn kappa_inverse_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for phase in phases() {
            for _ in 0..20 {
                let y = [rc(&mut rng)];
                let eta = [rc(&mut rng)];
                let (x, xi) = phase.kappa(&y, &eta);
                let (y2, eta2) = phase.kappa_inverse(&x, &xi);
                assert!((y2[0] - y[0]).norm() < 1e-12);
                assert!((eta2[0] - eta[0]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hermite_batch_is_orthonormal() {
        let grid = RealGrid::isotropic(1, REAL_HALF_WIDTH, REAL_POINTS).unwrap();
        let batch = hermite_batch(&grid, 5).unwrap();
        let qw = grid.quad_weight();
        for i in 0..5 {
            for j in 0..5 {
                let g: C64 = batch[i]
                    .values
                    .iter()
                    .zip(&batch[j].values)
                    .map(|(a, b)| a * b.conj())
                    .sum::<C64>()
                    * qw;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn transform_is_unitary_on_the_hermite_batch() {
        for s in setups() {
            let batch = hermite_batch(&s.rgrid, 5).unwrap();
            for u in &batch {
                let t = bargmann_transform(&s.phase, u, &s.cgrid).unwrap();
                assert!(t.is_clean());
                let r = hp_norm(&t.value, &s.weight, PExponent::Two).value / u.l2_norm();
                assert!((r - 1.0).abs() < 1e-6, "norm ratio {r}");
            }
        }
    }

    #[test]
    fn ground_state_transform_is_a_pure_gaussian_phase() {
        for s in setups() {
            let e0 = hermite_batch(&s.rgrid, 1).unwrap().remove(0);
            let t0 = bargmann_transform(&s.phase, &e0, &s.cgrid).unwrap().value;
            let g = s.phase.ground_state_exponent().unwrap();
            let mut buf = Vec::new();
            // Weighted peak sets the scale; compare the ratio T e0 / e^{ig}
            // where the weighted modulus is not negligible.
            let mut peak: f64 = 0.0;
            let mut mags = Vec::with_capacity(t0.grid.len());
            for flat in 0..t0.grid.len() {
                t0.grid.node(flat, &mut buf);
                let m = t0.values()[flat].norm() * (-s.weight.phi_at(&buf)).exp();
                peak = peak.max(m);
                mags.push(m);
            }
            let mut ratio0 = None;
            let mut worst: f64 = 0.0;
            for flat in 0..t0.grid.len() {
                if mags[flat] < 1e-5 * peak {
                    continue;
                }
                t0.grid.node(flat, &mut buf);
                let r = t0.values()[flat] / (C64::i() * g.eval(&buf)).exp();
                let r0 = *ratio0.get_or_insert(r);
                worst = worst.max((r - r0).norm() / r0.norm());
            }
            assert!(worst < 1e-6, "ratio spread {worst}");
        }
    }

    #[test]
    fn ground_state_exponent_dominates_the_weight() {
        // The combined exponent Φ + Im g behaves like |x|²: positive on the
        // direction circle with a bounded anisotropy ratio.
        for phase in phases() {
            let s = phase.weight().unwrap();
            let g = phase.ground_state_exponent().unwrap();
            let mut min_v = f64::INFINITY;
            let mut max_v = f64::MIN;
            for k in 0..64 {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                let x = [C64::new(th.cos(), th.sin())];
                let v = s.phi_at(&x) + g.eval(&x).im;
                min_v = min_v.min(v);
                max_v = max_v.max(v);
            }
            assert!(min_v > 0.05, "direction minimum {min_v}");
            assert!(max_v / min_v < 50.0);
        }
    }

    #[test]
    fn adjoint_inverts_the_transform_on_the_batch() {
        for s in setups() {
            let batch = hermite_batch(&s.rgrid, 5).unwrap();
            for u in &batch {
                let t = bargmann_transform(&s.phase, u, &s.cgrid).unwrap().value;
                let back = bargmann_adjoint(&s.phase, &s.weight, &t, &s.rgrid)
                    .unwrap()
                    .value;
                let err = back.sub(u).l2_norm() / u.l2_norm();
                assert!(err < 1e-6, "round trip error {err}");
            }
        }
    }

    #[test]
    fn adjoint_recovers_the_ground_state_norm() {
        let s = setup(0);
        let e0 = hermite_batch(&s.rgrid, 1).unwrap().remove(0);
        let t0 = bargmann_transform(&s.phase, &e0, &s.cgrid).unwrap().value;
        let back = bargmann_adjoint(&s.phase, &s.weight, &t0, &s.rgrid)
            .unwrap()
            .value;
        assert!((back.l2_norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn adjoint_pairs_with_the_transform() {
        let s = setup(2);
        let batch = hermite_batch(&s.rgrid, 4).unwrap();
        let u = &batch[1];
        // A non-holomorphic test function on the complex box.
        let v = ComplexGridFunction::from_fn(s.cgrid.clone(), |x| {
            let z = x[0];
            (C64::new(1.0, 0.0) + z.conj() * 0.3) * C64::new((-z.norm_sqr() / 3.0).exp(), 0.0)
        });
        let lhs = {
            let t = bargmann_transform(&s.phase, u, &s.cgrid).unwrap().value;
            h2_inner(&t, &v, &s.weight)
        };
        let rhs = {
            let tv = bargmann_adjoint(&s.phase, &s.weight, &v, &s.rgrid)
                .unwrap()
                .value;
            let qw = s.rgrid.quad_weight();
            u.values
                .iter()
                .zip(&tv.values)
                .map(|(a, b)| a * b.conj())
                .sum::<C64>()
                * qw
        };
        assert!((lhs - rhs).norm() < 1e-6 * lhs.norm());
    }

    #[test]
    fn transform_growth_slopes_match_hermite_order() {
        let s = setup(0);
        let batch = hermite_batch(&s.rgrid, 3).unwrap();
        let t = bargmann_transform(&s.phase, &batch[2], &s.cgrid).unwrap().value;
        // Along the positive real axis, log of the weighted modulus against
        // log<x> must fall faster than any fixed power; check the two
        // polynomial slopes from the statement.
        let mut pts = Vec::new();
        let mut buf = Vec::new();
        for flat in 0..t.grid.len() {
            t.grid.node(flat, &mut buf);
            let x = buf[0];
            if x.im.abs() < 1e-9 && x.re > 1.5 && x.re < 6.5 {
                let m = t.values()[flat].norm() * (-s.weight.phi_at(&buf)).exp();
                if m > 0.0 {
                    pts.push(((1.0 + x.re * x.re).sqrt().ln(), m.ln()));
                }
            }
        }
        assert!(pts.len() > 6);
        let n = pts.len() as f64;
        let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope < -4.0, "decay slope {slope}");
        // Empirical constants for the two powers stay finite.
        for nn in [2.0, 4.0] {
            let c = pts
                .iter()
                .map(|p| (p.1 + nn * p.0).exp())
                .fold(0.0, f64::max);
            assert!(c.is_finite() && c > 0.0);
        }
    }

    #[test]
    fn norms_vanish_only_with_the_function() {
        let s = setup(0);
        let zero = ComplexGridFunction::from_fn(s.cgrid.clone(), |_| C64::new(0.0, 0.0));
        for p in [PExponent::One, PExponent::Two, PExponent::Infinity] {
            assert_eq!(hp_norm(&zero, &s.weight, p).value, 0.0);
        }
        let e0 = hermite_batch(&s.rgrid, 1).unwrap().remove(0);
        let t0 = bargmann_transform(&s.phase, &e0, &s.cgrid).unwrap().value;
        let lam = C64::new(-1.3, 0.4);
        for p in [PExponent::One, PExponent::Two, PExponent::Infinity] {
            let a = hp_norm(&t0.scaled(lam), &s.weight, p).value;
            let b = hp_norm(&t0, &s.weight, p).value * lam.norm();
            assert!((a - b).abs() < 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn pointwise_values_are_controlled_by_the_norms() {
        let s = setup(0);
        let batch = hermite_batch(&s.rgrid, 3).unwrap();
        for u in &batch {
            let t = bargmann_transform(&s.phase, u, &s.cgrid).unwrap().value;
            let sup = hp_norm(&t, &s.weight, PExponent::Infinity).value;
            for p in [PExponent::One, PExponent::Two] {
                let np = hp_norm(&t, &s.weight, p).value;
                let c = sup / np;
                assert!(c.is_finite() && c > 0.0 && c < 10.0, "embedding constant {c}");
            }
        }
    }

    #[test]
    fn square_modulation_norm_is_the_l2_norm() {
        let s = setup(2);
        let batch = hermite_batch(&s.rgrid, 5).unwrap();
        for u in &batch {
            let m = mod_norm(&s, u, PExponent::Two).unwrap().value;
            assert!((m - u.l2_norm()).abs() < 1e-6);
        }
    }

    #[test]
    fn modulation_norms_are_scale_homogeneous() {
        let s = setup(0);
        let batch = hermite_batch(&s.rgrid, 2).unwrap();
        let u = batch[1].scaled(C64::new(0.3, -0.2)).add(&batch[0]);
        let lam = C64::new(0.7, 1.9);
        for p in [PExponent::One, PExponent::Two, PExponent::Infinity] {
            let a = mod_norm(&s, &u.scaled(lam), p).unwrap().value;
            let b = mod_norm(&s, &u, p).unwrap().value * lam.norm();
            assert!((a - b).abs() < 1e-12 * b);
        }
    }

    #[test]
    fn modulation_norms_are_fourier_invariant_for_the_radial_phase() {
        let s = setup(0);
        let batch = hermite_batch(&s.rgrid, 4).unwrap();
        let u = batch[0].add(&batch[1]).add(&batch[3].scaled(C64::i()));
        let fu = fourier_unitary(&u);
        assert!((fu.l2_norm() - u.l2_norm()).abs() < 1e-10);
        let s_dual =
            Setup::with_grids(radial_phase(), fu.grid.clone(), s.cgrid.clone()).unwrap();
        for p in [PExponent::One, PExponent::Two, PExponent::Infinity] {
            let a = mod_norm(&s, &u, p).unwrap().value;
            let b = mod_norm(&s_dual, &fu, p).unwrap().value;
            assert!((a - b).abs() < 1e-5 * a, "p {:?}: {a} vs {b}", p);
        }
    }

    #[test]
    fn projection_fixes_transforms() {
        for s in [setup(0), setup(2)] {
            let batch = hermite_batch(&s.rgrid, 4).unwrap();
            for k in [0usize, 2, 3] {
                let t = bargmann_transform(&s.phase, &batch[k], &s.cgrid).unwrap().value;
                let pt = reproducing_projection(&t, &s.weight).value;
                let sup = hp_norm(&t, &s.weight, PExponent::Infinity).value;
                let mut buf = Vec::new();
                let mut worst: f64 = 0.0;
                for flat in 0..t.grid.len() {
                    t.grid.node(flat, &mut buf);
                    let d = (pt.values()[flat] - t.values()[flat]).norm()
                        * (-s.weight.phi_at(&buf)).exp();
                    worst = worst.max(d);
                }
                assert!(worst < 1e-5 * sup, "projection defect {worst}");
            }
        }
    }

    #[test]
    fn projection_is_idempotent_on_rough_data() {
        let s = setup(0);
        let g = ComplexGridFunction::from_fn(s.cgrid.clone(), |x| {
            let z = x[0];
            (C64::new(1.0, 0.0) + z.conj() * 0.5 + z * 0.3)
                * C64::new((-z.norm_sqr()).exp(), 0.0)
        });
        let p1 = reproducing_projection(&g, &s.weight).value;
        let p2 = reproducing_projection(&p1, &s.weight).value;
        let sup = hp_norm(&p1, &s.weight, PExponent::Infinity).value;
        let mut buf = Vec::new();
        let mut worst: f64 = 0.0;
        for flat in 0..p1.grid.len() {
            p1.grid.node(flat, &mut buf);
            let d = (p2.values()[flat] - p1.values()[flat]).norm()
                * (-s.weight.phi_at(&buf)).exp();
            worst = worst.max(d);
        }
        assert!(sup > 0.0);
        assert!(worst < 1e-5 * sup, "idempotence defect {worst} vs scale {sup}");
    }

    #[test]
    fn projection_normalization_matches_the_radial_closed_form() {
        let s = setup(0);
        let want = 1.0 / (2.0 * std::f64::consts::PI);
        assert!(
            (s.weight.a_phi - want).abs() < 1e-3 * want,
            "projection constant {} vs {want}",
            s.weight.a_phi
        );
    }

    #[test]
    fn change_of_transform_is_the_identity_on_a_fixed_phase() {
        let s = setup(0);
        let batch = hermite_batch(&s.rgrid, 4).unwrap();
        for k in [0usize, 3] {
            let t = bargmann_transform(&s.phase, &batch[k], &s.cgrid).unwrap().value;
            let out = change_of_transform(&t, &s, &s).unwrap().value;
            let sup = hp_norm(&t, &s.weight, PExponent::Infinity).value;
            let mut buf = Vec::new();
            let mut worst: f64 = 0.0;
            for flat in 0..t.grid.len() {
                t.grid.node(flat, &mut buf);
                let d = (out.values()[flat] - t.values()[flat]).norm()
                    * (-s.weight.phi_at(&buf)).exp();
                worst = worst.max(d);
            }
            assert!(worst < 1e-5 * sup, "identity defect {worst}");
        }
    }

    #[test]
    fn change_of_transform_agrees_with_the_direct_route() {
        let s1 = setup(0);
        let s2 = setup(1);
        let batch = hermite_batch(&s1.rgrid, 5).unwrap();
        for k in [0usize, 1, 4] {
            let t1 = bargmann_transform(&s1.phase, &batch[k], &s1.cgrid).unwrap().value;
            let moved = change_of_transform(&t1, &s1, &s2).unwrap().value;
            let t2 = bargmann_transform(&s2.phase, &batch[k], &s2.cgrid).unwrap().value;
            let sup = hp_norm(&t2, &s2.weight, PExponent::Infinity).value;
            let mut buf = Vec::new();
            let mut worst: f64 = 0.0;
            for flat in 0..t2.grid.len() {
                t2.grid.node(flat, &mut buf);
                let d = (moved.values()[flat] - t2.values()[flat]).norm()
                    * (-s2.weight.phi_at(&buf)).exp();
                worst = worst.max(d);
            }
            assert!(worst < 1e-5 * sup, "transport defect {worst} for batch {k}");
        }
    }

    #[test]
    fn transported_norms_stay_within_a_fixed_bracket() {
        let s1 = setup(0);
        let s2 = setup(2);
        let batch = hermite_batch(&s1.rgrid, 5).unwrap();
        let bracket = |s1: &Setup, s2: &Setup| -> Vec<(f64, f64)> {
            [PExponent::One, PExponent::Two, PExponent::Infinity]
                .iter()
                .map(|&p| {
                    let mut lo = f64::INFINITY;
                    let mut hi = 0.0f64;
                    for u in &batch {
                        let a = mod_norm(s1, u, p).unwrap().value;
                        let b = mod_norm(s2, u, p).unwrap().value;
                        let r = b / a;
                        assert!(r.is_finite() && r > 0.0);
                        lo = lo.min(r);
                        hi = hi.max(r);
                    }
                    (lo, hi)
                })
                .collect()
        };
        let coarse = bracket(&s1, &s2);
        for &(lo, hi) in &coarse {
            assert!(hi / lo < 10.0, "norm ratio bracket [{lo}, {hi}]");
        }
        // Stability under doubling the complex resolution.
        let fine_c = ComplexGrid::isotropic(1, CPLX_HALF_WIDTH, 2 * CPLX_POINTS).unwrap();
        let f1 = Setup::with_grids(radial_phase(), s1.rgrid.clone(), fine_c.clone()).unwrap();
        let f2 = Setup::with_grids(asymmetric_phase(), s2.rgrid.clone(), fine_c).unwrap();
        let fine = bracket(&f1, &f2);
        for (c, f) in coarse.iter().zip(&fine) {
            assert!((c.0 - f.0).abs() < 0.1 * f.0, "lower end moved {} -> {}", c.0, f.0);
            assert!((c.1 - f.1).abs() < 0.1 * f.1, "upper end moved {} -> {}", c.1, f.1);
        }
    }

    #[test]
    fn transform_change_kernel_has_a_positive_quadratic_gap() {
        // The exponent q(x, w̄) linking the plane-like and radial data
        // satisfies Φ₂(x) + Φ₁(w) − 2 Re q(x, w̄) ≥ c|x − χ(w)|² for a real
        // linear χ; recover χ by minimizing in x and fit c.
        let s1 = setup(0);
        let s2 = setup(1);
        let n = 1;
        let conj_m = |m: &DMatrix<C64>| m.map(|z| z.conj());
        let mut f = QuadForm::zero(vec![n, n, n]);
        f.set_block(0, 0, &s2.phase.a);
        f.set_block(0, 2, &s2.phase.b);
        f.set_block(2, 2, &(&s2.phase.c - conj_m(&s1.phase.c)));
        f.set_block(1, 1, &conj_m(&s1.phase.a).map(|z| -z));
        f.set_block(1, 2, &conj_m(&s1.phase.b).map(|z| -z));
        let qform = f.critical_value(2).unwrap().form.scaled(C64::new(0.0, 0.5));
        let val = |x: C64, w: C64| -> f64 {
            let q = qform.eval(&[x, w.conj()]);
            s2.weight.phi_at(&[x]) + s1.weight.phi_at(&[w]) - 2.0 * q.re
        };
        // Quadratic coefficients of the real form in (x1, x2, w1, w2).
        let basis = [
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ];
        let at = |v: &[f64; 4]| val(basis[0] * v[0] + basis[1] * v[1], basis[0] * v[2] + basis[1] * v[3]);
        let mut smat = DMatrix::<f64>::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                let mut ei = [0.0; 4];
                let mut ej = [0.0; 4];
                ei[i] = 1.0;
                ej[j] = 1.0;
                let mut eij = [0.0; 4];
                eij[i] += 1.0;
                eij[j] += 1.0;
                smat[(i, j)] = at(&eij) - at(&ei) - at(&ej);
            }
        }
        let hxx = smat.view((0, 0), (2, 2)).into_owned();
        let hxw = smat.view((0, 2), (2, 2)).into_owned();
        let min_e = hxx
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(min_e > 0.0, "x-Hessian must be positive, got {min_e}");
        let chi = -(hxx.try_inverse().unwrap() * hxw);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut c_fit = f64::INFINITY;
        for _ in 0..100 {
            let x = rc(&mut rng);
            let w = rc(&mut rng);
            let cw = &chi * nalgebra::DVector::from_column_slice(&[w.re, w.im]);
            let d2 = (x - C64::new(cw[0], cw[1])).norm_sqr();
            if d2 < 0.01 {
                continue;
            }
            let lhs = val(x, w);
            assert!(lhs > -1e-10);
            c_fit = c_fit.min(lhs / d2);
        }
        assert!(c_fit > 0.005, "fitted gap constant {c_fit}");
    }

    #[test]
    fn rejected_phase_data_names_the_failing_condition() {
        let e = |z: C64| DMatrix::from_element(1, 1, z);
        // Im C not positive.
        assert!(matches!(
            QuadraticPhase::new(1, e(C64::i()), e(C64::new(1.0, 0.0)), e(C64::new(0.5, -0.1))),
            Err(CoreError::PhaseInvalid(_))
        ));
        // Singular mixing block.
        assert!(matches!(
            QuadraticPhase::new(1, e(C64::i()), e(C64::new(0.0, 0.0)), e(C64::i())),
            Err(CoreError::Singular { .. })
        ));
    }
}

