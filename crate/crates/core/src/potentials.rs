//! Potential functions and the builtin catalog.
//!
//! Every potential exposes its value and gradient; the Laplacian is an
//! optional capability used only by quadrature diagnostics. The catalog
//! (see `docs/potentials.md`) is:
//!
//! | name                       | U(x)                                         |
//! |----------------------------|----------------------------------------------|
//! | `quadratic_d`              | `|x|²/2`                                     |
//! | `double_well_1d`           | `(x²−1)²`                                    |
//! | `tilted_double_well_1d`    | `x⁴ − 2x² + δx − m(δ)`                       |
//! | `double_well_2d`           | `(x²−1)² + y²`                               |
//! | `oscillating_confining_1d` | `x²/2 + a(1 − cos ωx)`                       |
//! | `explosive_alpha`          | `−(1+|x|²)^α`                                |
//! | `loglog_d`                 | `a·log(½·log(e² + |x|²))`                    |

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Growth class of a potential at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthClass {
    /// `U ≥ 0`, `min U = 0`, `U → ∞`.
    Confining,
    /// `U ≥ −L(1+|x|²)`: no explosion for any bounded β.
    BoundedBelowQuadratic,
    /// Violates the quadratic lower bound; solutions may blow up.
    Explosive,
    /// Outside the integrability assumption (e.g. `loglog_d`).
    Exploratory,
}

impl fmt::Display for GrowthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GrowthClass::Confining => "confining",
            GrowthClass::BoundedBelowQuadratic => "bounded-below-quadratic",
            GrowthClass::Explosive => "explosive",
            GrowthClass::Exploratory => "exploratory",
        };
        f.write_str(s)
    }
}

/// Static description of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialMeta {
    pub name: String,
    pub dim: usize,
    /// Exponent with `∫ e^{−α₀U} < ∞`, when known.
    pub alpha0: Option<f64>,
    pub growth: GrowthClass,
    /// Constant `L` of the bound `U(x) ≥ −L(1+|x|²)`.
    pub quadratic_bound: Option<f64>,
    pub known_c_star: Option<f64>,
    pub known_global_minima: Option<Vec<Vec<f64>>>,
    pub has_laplacian: bool,
    /// Half-width of a box that holds the interesting part of the landscape.
    pub scale: f64,
}

pub trait Potential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇U(x)` into `grad`.
    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    /// Value and gradient in one pass.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.gradient(x, grad);
        self.value(x)
    }

    fn laplacian(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn meta(&self) -> &PotentialMeta;
}

/// Result of [`eval_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub laplacian: Option<f64>,
}

/// Value, gradient and (when supported) Laplacian at `x`.
pub fn eval_all(p: &dyn Potential, x: &[f64]) -> Result<Evaluation> {
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    let mut gradient = vec![0.0; x.len()];
    let value = p.value_and_gradient(x, &mut gradient);
    let laplacian = if p.meta().has_laplacian {
        p.laplacian(x)
    } else {
        None
    };
    let finite = value.is_finite()
        && gradient.iter().all(|g| g.is_finite())
        && laplacian.is_none_or(f64::is_finite);
    if !finite {
        return Err(Error::NonFinite { x: x.to_vec() });
    }
    Ok(Evaluation {
        value,
        gradient,
        laplacian,
    })
}

/// Max over coordinates of `|analytic − central difference| / (1 + |analytic|)`.
pub fn check_gradient(p: &dyn Potential, x: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::param("h", "step must be positive"));
    }
    let analytic = eval_all(p, x)?.gradient;
    let mut probe = x.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = p.value(&probe);
        probe[i] = x[i] - h;
        let down = p.value(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite { x: x.to_vec() });
        }
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((analytic[i] - fd).abs() / (1.0 + analytic[i].abs()));
    }
    Ok(worst)
}

/// Names accepted by [`builtin`].
pub const CATALOG: [&str; 7] = [
    "quadratic_d",
    "double_well_1d",
    "tilted_double_well_1d",
    "double_well_2d",
    "oscillating_confining_1d",
    "explosive_alpha",
    "loglog_d",
];

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Quadratic,
    DoubleWell1d,
    Tilted { delta: f64, shift: f64 },
    DoubleWell2d,
    Oscillating { amp: f64, freq: f64 },
    Explosive { alpha: f64 },
    LogLog { a: f64 },
}

/// A member of the builtin catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinPotential {
    shape: Shape,
    meta: PotentialMeta,
}

fn take_param(
    params: &BTreeMap<String, f64>,
    used: &mut Vec<String>,
    key: &str,
    default: f64,
) -> f64 {
    used.push(key.to_string());
    params.get(key).copied().unwrap_or(default)
}

fn dim_param(v: f64) -> Result<usize> {
    if v.fract() != 0.0 || !(1.0..=16.0).contains(&v) {
        return Err(Error::param("d", "must be an integer in 1..=16"));
    }
    Ok(v as usize)
}

/// Builds a catalog potential. Unknown parameter keys are rejected.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<BuiltinPotential> {
    let mut used = Vec::new();
    let p = match name {
        "quadratic_d" => {
            let d = dim_param(take_param(params, &mut used, "d", 1.0))?;
            BuiltinPotential {
                shape: Shape::Quadratic,
                meta: PotentialMeta {
                    name: name.into(),
                    dim: d,
                    alpha0: Some(1.0),
                    growth: GrowthClass::Confining,
                    quadratic_bound: Some(0.0),
                    known_c_star: Some(0.0),
                    known_global_minima: Some(vec![vec![0.0; d]]),
                    has_laplacian: true,
                    scale: 4.0,
                },
            }
        }
        "double_well_1d" => BuiltinPotential {
            shape: Shape::DoubleWell1d,
            meta: PotentialMeta {
                name: name.into(),
                dim: 1,
                alpha0: Some(1.0),
                growth: GrowthClass::Confining,
                quadratic_bound: Some(0.0),
                known_c_star: Some(1.0),
                known_global_minima: Some(vec![vec![-1.0], vec![1.0]]),
                has_laplacian: true,
                scale: 2.0,
            },
        },
        "tilted_double_well_1d" => {
            let delta = take_param(params, &mut used, "delta", 0.5);
            if !(delta.abs() < 1.5) {
                return Err(Error::param("delta", "must satisfy |delta| < 1.5"));
            }
            let [left, mid, right] = quartic_critical_points(delta);
            let raw = |x: f64| x.powi(4) - 2.0 * x * x + delta * x;
            let (ul, ur) = (raw(left), raw(right));
            let shift = ul.min(ur);
            let mut minima = Vec::new();
            if ul <= ur {
                minima.push(vec![left]);
            }
            if ur <= ul {
                minima.push(vec![right]);
            }
            let c_star = raw(mid) - ul.max(ur);
            BuiltinPotential {
                shape: Shape::Tilted { delta, shift },
                meta: PotentialMeta {
                    name: name.into(),
                    dim: 1,
                    alpha0: Some(1.0),
                    growth: GrowthClass::Confining,
                    quadratic_bound: Some(0.0),
                    known_c_star: Some(c_star),
                    known_global_minima: Some(minima),
                    has_laplacian: true,
                    scale: 2.0,
                },
            }
        }
        "double_well_2d" => BuiltinPotential {
            shape: Shape::DoubleWell2d,
            meta: PotentialMeta {
                name: name.into(),
                dim: 2,
                alpha0: Some(1.0),
                growth: GrowthClass::Confining,
                quadratic_bound: Some(0.0),
                known_c_star: Some(1.0),
                known_global_minima: Some(vec![vec![-1.0, 0.0], vec![1.0, 0.0]]),
                has_laplacian: true,
                scale: 2.0,
            },
        },
        "oscillating_confining_1d" => {
            let amp = take_param(params, &mut used, "amplitude", 1.0);
            let freq = take_param(params, &mut used, "frequency", 5.0);
            if !(amp >= 0.0) || !(freq > 0.0) {
                return Err(Error::param(
                    "amplitude/frequency",
                    "need amplitude >= 0 and frequency > 0",
                ));
            }
            BuiltinPotential {
                shape: Shape::Oscillating { amp, freq },
                meta: PotentialMeta {
                    name: name.into(),
                    dim: 1,
                    alpha0: Some(1.0),
                    growth: GrowthClass::Confining,
                    quadratic_bound: Some(0.0),
                    known_c_star: None,
                    known_global_minima: Some(vec![vec![0.0]]),
                    has_laplacian: true,
                    scale: 4.0,
                },
            }
        }
        "explosive_alpha" => {
            let alpha = take_param(params, &mut used, "alpha", 1.5);
            let d = dim_param(take_param(params, &mut used, "d", 1.0))?;
            if !(alpha > 0.0) {
                return Err(Error::param("alpha", "must be > 0"));
            }
            let explosive = alpha > 1.0;
            BuiltinPotential {
                shape: Shape::Explosive { alpha },
                meta: PotentialMeta {
                    name: name.into(),
                    dim: d,
                    alpha0: None,
                    growth: if explosive {
                        GrowthClass::Explosive
                    } else {
                        GrowthClass::BoundedBelowQuadratic
                    },
                    quadratic_bound: if explosive { None } else { Some(1.0) },
                    known_c_star: None,
                    known_global_minima: None,
                    has_laplacian: true,
                    scale: 4.0,
                },
            }
        }
        "loglog_d" => {
            let a = take_param(params, &mut used, "a", 1.0);
            let d = dim_param(take_param(params, &mut used, "d", 3.0))?;
            if !(a > 0.0) {
                return Err(Error::param("a", "must be > 0"));
            }
            BuiltinPotential {
                shape: Shape::LogLog { a },
                meta: PotentialMeta {
                    name: name.into(),
                    dim: d,
                    alpha0: None,
                    growth: GrowthClass::Exploratory,
                    quadratic_bound: Some(0.0),
                    known_c_star: Some(0.0),
                    known_global_minima: Some(vec![vec![0.0; d]]),
                    has_laplacian: true,
                    scale: 4.0,
                },
            }
        }
        other => return Err(Error::UnknownPotential(other.to_string())),
    };
    if let Some(extra) = params.keys().find(|k| !used.contains(k)) {
        return Err(Error::param(extra, format!("not a parameter of {name}")));
    }
    Ok(p)
}

/// Convenience for parameterless construction.
pub fn builtin_default(name: &str) -> Result<BuiltinPotential> {
    builtin(name, &BTreeMap::new())
}

/// Roots of `4x³ − 4x + δ` in increasing order, for `|δ| < 8/√27`.
fn quartic_critical_points(delta: f64) -> [f64; 3] {
    // depressed cubic t³ + p t + q with p = −1, q = δ/4
    let q = delta / 4.0;
    let r = 2.0 / 3.0_f64.sqrt();
    let phi = ((3.0 * q / -2.0) * 3.0_f64.sqrt()).clamp(-1.0, 1.0).acos() / 3.0;
    let mut roots = [0usize, 1, 2].map(|k| {
        r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos()
    });
    for root in roots.iter_mut() {
        for _ in 0..4 {
            let f = *root * *root * *root - *root + q;
            let df = 3.0 * *root * *root - 1.0;
            if df != 0.0 {
                *root -= f / df;
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

impl Potential for BuiltinPotential {
    fn dim(&self) -> usize {
        self.meta.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self.shape {
            Shape::Quadratic => 0.5 * norm_sq(x),
            Shape::DoubleWell1d => {
                let s = x[0] * x[0] - 1.0;
                s * s
            }
            Shape::Tilted { delta, shift } => {
                let v = x[0];
                let v2 = v * v;
                v2 * v2 - 2.0 * v2 + delta * v - shift
            }
            Shape::DoubleWell2d => {
                let s = x[0] * x[0] - 1.0;
                s * s + x[1] * x[1]
            }
            Shape::Oscillating { amp, freq } => {
                0.5 * x[0] * x[0] + amp * (1.0 - (freq * x[0]).cos())
            }
            Shape::Explosive { alpha } => -(1.0 + norm_sq(x)).powf(alpha),
            Shape::LogLog { a } => {
                let g = (std::f64::consts::E.powi(2) + norm_sq(x)).ln();
                a * (0.5 * g).ln()
            }
        }
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        match self.shape {
            Shape::Quadratic => grad.copy_from_slice(x),
            Shape::DoubleWell1d => grad[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0),
            Shape::Tilted { delta, .. } => grad[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0) + delta,
            Shape::DoubleWell2d => {
                grad[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0);
                grad[1] = 2.0 * x[1];
            }
            Shape::Oscillating { amp, freq } => {
                grad[0] = x[0] + amp * freq * (freq * x[0]).sin();
            }
            Shape::Explosive { alpha } => {
                let k = -2.0 * alpha * (1.0 + norm_sq(x)).powf(alpha - 1.0);
                for (g, xi) in grad.iter_mut().zip(x) {
                    *g = k * xi;
                }
            }
            Shape::LogLog { a } => {
                let s = std::f64::consts::E.powi(2) + norm_sq(x);
                let k = 2.0 * a / (s.ln() * s);
                for (g, xi) in grad.iter_mut().zip(x) {
                    *g = k * xi;
                }
            }
        }
    }

    fn laplacian(&self, x: &[f64]) -> Option<f64> {
        let d = self.meta.dim as f64;
        Some(match self.shape {
            Shape::Quadratic => d,
            Shape::DoubleWell1d | Shape::Tilted { .. } => 12.0 * x[0] * x[0] - 4.0,
            Shape::DoubleWell2d => 12.0 * x[0] * x[0] - 2.0,
            Shape::Oscillating { amp, freq } => 1.0 + amp * freq * freq * (freq * x[0]).cos(),
            Shape::Explosive { alpha } => {
                let r2 = norm_sq(x);
                let s = 1.0 + r2;
                -2.0 * alpha
                    * (s.powf(alpha - 1.0) * d + 2.0 * (alpha - 1.0) * s.powf(alpha - 2.0) * r2)
            }
            Shape::LogLog { a } => {
                let r2 = norm_sq(x);
                let s = std::f64::consts::E.powi(2) + r2;
                let g = s.ln();
                let gs = g * s;
                a * (2.0 * d / gs - 4.0 * r2 * (1.0 + g) / (gs * gs))
            }
        })
    }

    fn meta(&self) -> &PotentialMeta {
        &self.meta
    }
}

/// One monomial `coef · Π x_i^{powers_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// User-defined polynomial potential, loaded from config.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPotential {
    terms: Vec<Monomial>,
    offset: f64,
    meta: PotentialMeta,
}

impl PolynomialPotential {
    /// `offset` is subtracted from every value (use it to put `min U` at 0).
    pub fn new(
        dim: usize,
        terms: Vec<Monomial>,
        offset: f64,
        growth: GrowthClass,
        scale: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        if let Some(t) = terms.iter().find(|t| t.powers.len() != dim) {
            return Err(Error::param(
                "terms",
                format!("monomial {:?} does not have {dim} exponents", t.powers),
            ));
        }
        if !terms.iter().all(|t| t.coef.is_finite()) || !offset.is_finite() {
            return Err(Error::param("terms", "coefficients must be finite"));
        }
        Ok(Self {
            terms,
            offset,
            meta: PotentialMeta {
                name: "polynomial".into(),
                dim,
                alpha0: None,
                growth,
                quadratic_bound: None,
                known_c_star: None,
                known_global_minima: None,
                has_laplacian: true,
                scale,
            },
        })
    }

    /// `U ≡ 0` in `dim` dimensions (pure Brownian motion).
    pub fn zero(dim: usize) -> Self {
        let mut p = Self::new(dim, Vec::new(), 0.0, GrowthClass::Exploratory, 4.0)
            .expect("zero polynomial is valid");
        p.meta.name = "zero".into();
        p.meta.quadratic_bound = Some(0.0);
        p
    }
}

fn ipow(x: f64, k: u32) -> f64 {
    x.powi(k as i32)
}

impl Potential for PolynomialPotential {
    fn dim(&self) -> usize {
        self.meta.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.powers.iter().zip(x).map(|(&k, &xi)| ipow(xi, k)).product::<f64>())
            .sum::<f64>()
            - self.offset
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for t in &self.terms {
            for (i, g) in grad.iter_mut().enumerate() {
                let k = t.powers[i];
                if k == 0 {
                    continue;
                }
                let mut prod = t.coef * k as f64 * ipow(x[i], k - 1);
                for (j, (&kj, &xj)) in t.powers.iter().zip(x).enumerate() {
                    if j != i {
                        prod *= ipow(xj, kj);
                    }
                }
                *g += prod;
            }
        }
    }

    fn laplacian(&self, x: &[f64]) -> Option<f64> {
        let mut sum = 0.0;
        for t in &self.terms {
            for i in 0..x.len() {
                let k = t.powers[i];
                if k < 2 {
                    continue;
                }
                let mut prod = t.coef * (k * (k - 1)) as f64 * ipow(x[i], k - 2);
                for (j, (&kj, &xj)) in t.powers.iter().zip(x).enumerate() {
                    if j != i {
                        prod *= ipow(xj, kj);
                    }
                }
                sum += prod;
            }
        }
        Some(sum)
    }

    fn meta(&self) -> &PotentialMeta {
        &self.meta
    }
}

pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}
