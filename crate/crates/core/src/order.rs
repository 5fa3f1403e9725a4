//! Weight (order) functions: positive functions `m` on `R^D` that are slowly
//! varying against the Peetre bracket, `m(X) <= C0 <X - Y>^{N0} m(Y)`.
//!
//! The registry is a closed set of families so that the growth certificate
//! `(C0, N0)` can always be produced: analytic families carry exact constants,
//! the Gaussian-decay surrogate and tabulations are certified empirically on a
//! working grid and stamped afterwards.

use crate::error::{CoreError, Result};
use crate::grid::RealGrid;

/// `<x> = sqrt(1 + |x|^2)`.
pub fn bracket(x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|v| v * v).sum();
    (1.0 + s).sqrt()
}

fn bracket_diff(x: &[f64], y: &[f64]) -> f64 {
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (1.0 + s).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightFamily {
    /// `m = value`.
    Constant { value: f64 },
    /// `m(X) = <X>^s`.
    BracketPower { s: f64 },
    /// `m(T, Xi) = <T>^{s1} <Xi>^{s2}` on the split into two halves.
    AnisotropicBracket { s1: f64, s2: f64 },
    /// `m(X) = e^{-|X|^2 / width}`: admissible only on a bounded working box,
    /// certified empirically there.
    GaussianDecay { width: f64 },
    /// Values on a grid, evaluated by multilinear interpolation with clamping
    /// to the box; the output family of weight composition.
    Tabulated { grid: RealGrid, values: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct OrderFunction {
    pub dim: usize,
    pub family: WeightFamily,
    /// Certified growth constants; `c0` is `+inf` until a family without
    /// analytic constants has been certified on a working grid.
    pub c0: f64,
    pub n0: f64,
}

impl OrderFunction {
    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(CoreError::InvalidParam(format!(
                "constant weight must be positive, got {value}"
            )));
        }
        Ok(OrderFunction {
            dim,
            family: WeightFamily::Constant { value },
            c0: 1.0,
            n0: 0.0,
        })
    }

    pub fn bracket_power(dim: usize, s: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(CoreError::InvalidParam("bracket exponent must be finite".into()));
        }
        Ok(OrderFunction {
            dim,
            family: WeightFamily::BracketPower { s },
            c0: (2.0f64).powf(0.5 * s.abs()),
            n0: s.abs(),
        })
    }

    pub fn anisotropic(dim: usize, s1: f64, s2: f64) -> Result<Self> {
        if dim % 2 != 0 {
            return Err(CoreError::DimMismatch {
                context: "anisotropic weight needs an even ambient dimension",
                expected: dim + 1,
                got: dim,
            });
        }
        Ok(OrderFunction {
            dim,
            family: WeightFamily::AnisotropicBracket { s1, s2 },
            c0: (2.0f64).powf(0.5 * (s1.abs() + s2.abs())),
            n0: s1.abs() + s2.abs(),
        })
    }

    pub fn gaussian_decay(dim: usize, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(CoreError::InvalidParam("gaussian width must be positive".into()));
        }
        Ok(OrderFunction {
            dim,
            family: WeightFamily::GaussianDecay { width },
            c0: f64::INFINITY,
            n0: 0.0,
        })
    }

    pub fn tabulated(grid: RealGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::SampleCount {
                context: "OrderFunction::tabulated",
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(&bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(CoreError::NonPositiveWeight {
                family: "tabulated",
                value: bad,
                point: vec![],
            });
        }
        Ok(OrderFunction {
            dim: grid.dim(),
            family: WeightFamily::Tabulated { grid, values },
            c0: f64::INFINITY,
            n0: 0.0,
        })
    }

    /// Stamp empirically certified constants.
    pub fn with_certification(mut self, c0: f64, n0: f64) -> Self {
        self.c0 = c0;
        self.n0 = n0;
        self
    }

    pub fn family_tag(&self) -> &'static str {
        match self.family {
            WeightFamily::Constant { .. } => "constant",
            WeightFamily::BracketPower { .. } => "bracket-power",
            WeightFamily::AnisotropicBracket { .. } => "anisotropic-bracket",
            WeightFamily::GaussianDecay { .. } => "gaussian-decay",
            WeightFamily::Tabulated { .. } => "tabulated",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.family {
            WeightFamily::Constant { value } => *value,
            WeightFamily::BracketPower { s } => bracket(x).powf(*s),
            WeightFamily::AnisotropicBracket { s1, s2 } => {
                let half = self.dim / 2;
                bracket(&x[..half]).powf(*s1) * bracket(&x[half..]).powf(*s2)
            }
            WeightFamily::GaussianDecay { width } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (-r2 / width).exp()
            }
            WeightFamily::Tabulated { grid, values } => interp_multilinear(grid, values, x),
        }
    }

    /// Pointwise product when the result stays inside the registry.
    /// Constants multiply, exponents add.
    pub fn try_product(&self, other: &OrderFunction) -> Option<OrderFunction> {
        if self.dim != other.dim {
            return None;
        }
        let family = match (&self.family, &other.family) {
            (WeightFamily::Constant { value: a }, WeightFamily::Constant { value: b }) => {
                WeightFamily::Constant { value: a * b }
            }
            (WeightFamily::BracketPower { s: a }, WeightFamily::BracketPower { s: b }) => {
                WeightFamily::BracketPower { s: a + b }
            }
            (
                WeightFamily::AnisotropicBracket { s1: a1, s2: a2 },
                WeightFamily::AnisotropicBracket { s1: b1, s2: b2 },
            ) => WeightFamily::AnisotropicBracket {
                s1: a1 + b1,
                s2: a2 + b2,
            },
            (WeightFamily::GaussianDecay { width: a }, WeightFamily::GaussianDecay { width: b }) => {
                WeightFamily::GaussianDecay {
                    width: 1.0 / (1.0 / a + 1.0 / b),
                }
            }
            _ => return None,
        };
        Some(OrderFunction {
            dim: self.dim,
            family,
            c0: self.c0 * other.c0,
            n0: self.n0 + other.n0,
        })
    }
}

/// Multilinear interpolation on the tabulation grid, clamped to the box.
fn interp_multilinear(grid: &RealGrid, values: &[f64], x: &[f64]) -> f64 {
    let dim = grid.dim();
    let mut lo = vec![0usize; dim];
    let mut frac = vec![0.0f64; dim];
    for a in 0..dim {
        let ax = grid.axis(a);
        let t = (x[a] + ax.half_width) / ax.spacing();
        let t = t.clamp(0.0, (ax.points - 1) as f64);
        let mut i = t.floor() as usize;
        let mut f = t - i as f64;
        if f < 1e-9 {
            f = 0.0;
        } else if f > 1.0 - 1e-9 && i + 1 < ax.points {
            i += 1;
            f = 0.0;
        }
        if i + 1 >= ax.points {
            i = ax.points - 1;
            f = 0.0;
        }
        lo[a] = i;
        frac[a] = f;
    }
    let mut acc = 0.0;
    let corners = 1usize << dim;
    let mut idx = vec![0usize; dim];
    for corner in 0..corners {
        let mut w = 1.0;
        for a in 0..dim {
            if corner >> a & 1 == 1 {
                w *= frac[a];
                idx[a] = lo[a] + 1;
            } else {
                w *= 1.0 - frac[a];
                idx[a] = lo[a];
            }
        }
        if w != 0.0 {
            acc += w * values[grid.flat_index(&idx)];
        }
    }
    acc
}

/// Result of an empirical growth certification.
#[derive(Debug, Clone)]
pub struct Certification {
    pub c0: f64,
    pub n0: f64,
    pub worst_x: Vec<f64>,
    pub worst_y: Vec<f64>,
}

/// Smallest `C0` with `m(X) <= C0 <X-Y>^{N0} m(Y)` over all node pairs of the
/// grid. Fails loudly if `m` is not strictly positive and finite somewhere.
pub fn certify_order_function(m: &OrderFunction, grid: &RealGrid, n0: f64) -> Result<Certification> {
    if grid.dim() != m.dim {
        return Err(CoreError::DimMismatch {
            context: "certify_order_function",
            expected: m.dim,
            got: grid.dim(),
        });
    }
    let len = grid.len();
    let dim = grid.dim();
    let mut nodes = vec![0.0f64; len * dim];
    let mut vals = vec![0.0f64; len];
    for flat in 0..len {
        let slot = &mut nodes[flat * dim..(flat + 1) * dim];
        grid.node(flat, slot);
        let v = m.eval(slot);
        if !(v.is_finite() && v > 0.0) {
            return Err(CoreError::NonPositiveWeight {
                family: m.family_tag(),
                value: v,
                point: slot.to_vec(),
            });
        }
        vals[flat] = v;
    }
    let mut best = 0.0f64;
    let mut arg = (0usize, 0usize);
    for i in 0..len {
        let xi = &nodes[i * dim..(i + 1) * dim];
        for k in 0..len {
            let yk = &nodes[k * dim..(k + 1) * dim];
            let ratio = vals[i] / (bracket_diff(xi, yk).powf(n0) * vals[k]);
            if ratio > best {
                best = ratio;
                arg = (i, k);
            }
        }
    }
    Ok(Certification {
        c0: best,
        n0,
        worst_x: nodes[arg.0 * dim..(arg.0 + 1) * dim].to_vec(),
        worst_y: nodes[arg.1 * dim..(arg.1 + 1) * dim].to_vec(),
    })
}
