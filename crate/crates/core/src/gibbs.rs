//! Gibbs measures `μ_β(dx) = Z_β^{−1} e^{−βU(x)} dx` by quadrature.
//!
//! Rules:
//!
//! * box, `d ≤ 2`: composite Simpson on a uniform tensor grid;
//! * torus `[−L, L)^d`: trapezoid on the periodic grid;
//! * box, `d ≥ 3`: Monte Carlo with uniform samples and a standard error.
//!
//! All sums are shifted by the smallest sampled value of `U`, so `log Z` is
//! available even when `e^{−βU}` underflows everywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{GrowthClass, Potential};
use crate::quadrature;

/// Target `β·(U − min U)` on the faces of an automatic box.
const AUTO_BOX_EXPONENT: f64 = 40.0;
/// Seed of the Monte Carlo rule.
const MC_SEED: u64 = 0x5eed_9177;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Periodic `[−half_width, half_width)^d`.
    Torus { half_width: f64 },
    /// Cube grown from the potential's scale until `β(U − min U) ≥ 40` on
    /// its faces. Confining potentials only.
    Auto,
}

impl Domain {
    pub fn cube(half_width: f64, dim: usize) -> Self {
        Domain::Box {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
        }
    }
}

/// Quadrature value with an optional Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub std_err: Option<f64>,
}

/// Default number of intervals per axis (1-D, 2-D) or samples (`d ≥ 3`).
pub fn default_resolution(dim: usize) -> usize {
    match dim {
        1 => 4000,
        2 => 400,
        _ => 1_000_000,
    }
}

#[derive(Debug, Clone)]
enum Rule {
    Grid {
        lo: Vec<f64>,
        h: Vec<f64>,
        /// Nodes per axis.
        n: Vec<usize>,
        periodic: bool,
    },
    MonteCarlo {
        lo: Vec<f64>,
        hi: Vec<f64>,
        samples: usize,
    },
}

/// A Gibbs measure with its normalization computed once.
#[derive(Debug, Clone)]
pub struct GibbsMeasure<'a> {
    p: &'a dyn Potential,
    beta: f64,
    domain: Domain,
    rule: Rule,
    shift: f64,
    /// `∫ e^{−β(U − shift)}`.
    z_shifted: f64,
    z_std_err: Option<f64>,
}

fn simpson_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n - 1 {
        1.0 / 3.0
    } else if i % 2 == 1 {
        4.0 / 3.0
    } else {
        2.0 / 3.0
    }
}

/// Points on the faces of `[−r, r]^d`, about 20k in total.
fn face_points(r: f64, dim: usize, mut visit: impl FnMut(&[f64])) {
    if dim == 1 {
        visit(&[-r]);
        visit(&[r]);
        return;
    }
    let m = ((20_000f64).powf(1.0 / (dim - 1) as f64).floor() as usize).clamp(3, 2001);
    let per_face = m.pow((dim - 1) as u32);
    let mut x = vec![0.0; dim];
    for axis in 0..dim {
        for sign in [-1.0, 1.0] {
            for flat in 0..per_face {
                let mut rem = flat;
                for (j, xj) in x.iter_mut().enumerate() {
                    if j == axis {
                        *xj = sign * r;
                    } else {
                        *xj = -r + 2.0 * r * (rem % m) as f64 / (m - 1) as f64;
                        rem /= m;
                    }
                }
                visit(&x);
            }
        }
    }
}

fn estimate_min(p: &dyn Potential, r: f64) -> f64 {
    let d = p.dim();
    let mut best = p.value(&vec![0.0; d]);
    if let Some(mins) = &p.meta().known_global_minima {
        for m in mins {
            best = best.min(p.value(m));
        }
    }
    let m: usize = match d {
        1 => 4001,
        2 => 201,
        3 => 41,
        _ => 5,
    };
    let total = m.pow(d as u32);
    let mut x = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for xj in x.iter_mut() {
            *xj = -r + 2.0 * r * (rem % m) as f64 / (m - 1) as f64;
            rem /= m;
        }
        best = best.min(p.value(&x));
    }
    best
}

/// Half-width of the automatic box for `p` at inverse temperature `beta`.
pub fn auto_half_width(p: &dyn Potential, beta: f64) -> Result<f64> {
    if p.meta().growth != GrowthClass::Confining {
        return Err(Error::Domain(format!(
            "{} is not confining; give an explicit box",
            p.meta().name
        )));
    }
    let base = p.meta().scale.max(1.0);
    let umin = estimate_min(p, base);
    let mut r = base;
    for _ in 0..80 {
        let mut face_min = f64::INFINITY;
        face_points(r, p.dim(), |x| face_min = face_min.min(p.value(x)));
        if beta * (face_min - umin) >= AUTO_BOX_EXPONENT {
            return Ok(r);
        }
        r *= 1.25;
    }
    Err(Error::Domain(format!(
        "no box up to half-width {r} holds the mass of {}",
        p.meta().name
    )))
}

impl<'a> GibbsMeasure<'a> {
    pub fn new(p: &'a dyn Potential, beta: f64, domain: Domain, resolution: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param("beta", "must be a positive finite number"));
        }
        let d = p.dim();
        let domain = match domain {
            Domain::Auto => Domain::cube(auto_half_width(p, beta)?, d),
            other => other,
        };
        let rule = match &domain {
            Domain::Box { lo, hi } => {
                if lo.len() != d || hi.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: lo.len().min(hi.len()),
                    });
                }
                if lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
                    return Err(Error::param("domain", "need lo < hi on every axis"));
                }
                if d <= 2 {
                    if resolution < 2 {
                        return Err(Error::param("resolution", "need at least 2 intervals"));
                    }
                    let cells = resolution + resolution % 2;
                    Rule::Grid {
                        lo: lo.clone(),
                        h: lo.iter().zip(hi).map(|(a, b)| (b - a) / cells as f64).collect(),
                        n: vec![cells + 1; d],
                        periodic: false,
                    }
                } else {
                    if resolution < 1000 {
                        return Err(Error::param("resolution", "need at least 1000 samples"));
                    }
                    Rule::MonteCarlo {
                        lo: lo.clone(),
                        hi: hi.clone(),
                        samples: resolution,
                    }
                }
            }
            Domain::Torus { half_width } => {
                if !(*half_width > 0.0) {
                    return Err(Error::param("half_width", "must be > 0"));
                }
                if d > 2 {
                    return Err(Error::Domain("torus quadrature supports d <= 2".into()));
                }
                if resolution < 4 {
                    return Err(Error::param("resolution", "need at least 4 nodes"));
                }
                Rule::Grid {
                    lo: vec![-half_width; d],
                    h: vec![2.0 * half_width / resolution as f64; d],
                    n: vec![resolution; d],
                    periodic: true,
                }
            }
            Domain::Auto => unreachable!(),
        };
        let mut gm = Self {
            p,
            beta,
            domain,
            rule,
            shift: 0.0,
            z_shifted: 0.0,
            z_std_err: None,
        };
        let mut umin = f64::INFINITY;
        let mut bad = None;
        gm.for_each_node(|x, _, u| {
            if !u.is_finite() && bad.is_none() {
                bad = Some(x.to_vec());
            }
            umin = umin.min(u);
        });
        if let Some(x) = bad {
            return Err(Error::NonFinite { x });
        }
        gm.shift = umin;
        let (z, se) = gm.integrate_shifted(|_, _| 1.0);
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Domain(format!("non-positive partition function {z}")));
        }
        gm.z_shifted = z;
        gm.z_std_err = se;
        Ok(gm)
    }

    /// Visits quadrature nodes as `(x, weight, U(x))`.
    fn for_each_node(&self, mut f: impl FnMut(&[f64], f64, f64)) {
        let d = self.p.dim();
        match &self.rule {
            Rule::Grid { lo, h, n, periodic } => {
                let total: usize = n.iter().product();
                let mut x = vec![0.0; d];
                for flat in 0..total {
                    let mut rem = flat;
                    let mut w = 1.0;
                    for j in 0..d {
                        let k = rem % n[j];
                        rem /= n[j];
                        x[j] = lo[j] + h[j] * k as f64;
                        w *= h[j] * if *periodic { 1.0 } else { simpson_weight(k, n[j]) };
                    }
                    f(&x, w, self.p.value(&x));
                }
            }
            Rule::MonteCarlo { lo, hi, samples } => {
                let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
                let w = vol / *samples as f64;
                let mut rng = ChaCha8Rng::seed_from_u64(MC_SEED);
                let mut x = vec![0.0; d];
                for _ in 0..*samples {
                    for j in 0..d {
                        x[j] = rng.random_range(lo[j]..hi[j]);
                    }
                    f(&x, w, self.p.value(&x));
                }
            }
        }
    }

    /// `∫ g(x, U) e^{−β(U − shift)}` and, for Monte Carlo, its standard error.
    fn integrate_shifted(&self, g: impl Fn(&[f64], f64) -> f64) -> (f64, Option<f64>) {
        let (mut s, mut s2, mut count) = (0.0, 0.0, 0usize);
        self.for_each_node(|x, w, u| {
            let v = w * g(x, u) * (-self.beta * (u - self.shift)).exp();
            s += v;
            s2 += v * v;
            count += 1;
        });
        match self.rule {
            Rule::MonteCarlo { .. } => {
                let n = count as f64;
                let mean = s / n;
                let var = (s2 / n - mean * mean).max(0.0);
                (s, Some((var * n).sqrt()))
            }
            Rule::Grid { .. } => (s, None),
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn log_z(&self) -> f64 {
        self.z_shifted.ln() - self.beta * self.shift
    }

    pub fn partition_function(&self) -> Integral {
        let scale = (-self.beta * self.shift).exp();
        Integral {
            value: self.z_shifted * scale,
            std_err: self.z_std_err.map(|s| s * scale),
        }
    }

    /// Normalized density `e^{−βU(x)} / Z`.
    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        -self.beta * (self.p.value(x) - self.shift) - self.z_shifted.ln()
    }

    /// `∫ density` by an independent rule: per-cell 16-point Gauss–Legendre
    /// in 1-D, the measure's own rule otherwise.
    pub fn total_mass(&self) -> f64 {
        match (&self.rule, &self.domain) {
            (Rule::Grid { lo, h, n, periodic: false }, _) if self.p.dim() == 1 => {
                let f = |t: f64| self.density(&[t]);
                (0..n[0] - 1)
                    .map(|k| {
                        let a = lo[0] + h[0] * k as f64;
                        quadrature::integrate(f, a, a + h[0], 1)
                    })
                    .sum()
            }
            _ => self.integrate_shifted(|_, _| 1.0).0 / self.z_shifted,
        }
    }

    /// `E_μ[U]`.
    pub fn mean_energy(&self) -> f64 {
        self.integrate_shifted(|_, u| u).0 / self.z_shifted
    }

    /// `μ_β(U > eps)`.
    pub fn tail_mass(&self, eps: f64) -> Result<Integral> {
        if !(eps > 0.0) {
            return Err(Error::param("eps", "must be > 0"));
        }
        if let (Rule::Grid { lo, h, n, periodic: false }, 1) = (&self.rule, self.p.dim()) {
            return Ok(Integral {
                value: self.tail_1d(lo[0], h[0], n[0] - 1, eps) / self.z_shifted,
                std_err: None,
            });
        }
        let (s, se) = self.integrate_shifted(|_, u| if u > eps { 1.0 } else { 0.0 });
        Ok(Integral {
            value: s / self.z_shifted,
            std_err: se.map(|e| e / self.z_shifted),
        })
    }

    /// Cell-wise Gauss–Legendre on `{U > eps}`, crossings found by bisection.
    fn tail_1d(&self, lo: f64, h: f64, cells: usize, eps: f64) -> f64 {
        let u = |t: f64| self.p.value(&[t]);
        let f = |t: f64| (-self.beta * (u(t) - self.shift)).exp();
        let crossing = |mut a: f64, mut b: f64| {
            let above_a = u(a) > eps;
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if (u(m) > eps) == above_a {
                    a = m
                } else {
                    b = m
                }
            }
            0.5 * (a + b)
        };
        let mut total = 0.0;
        for k in 0..cells {
            let a = lo + h * k as f64;
            let b = a + h;
            match (u(a) > eps, u(b) > eps) {
                (true, true) => total += quadrature::integrate(f, a, b, 1),
                (false, false) => {}
                (true, false) => total += quadrature::integrate(f, a, crossing(a, b), 1),
                (false, true) => total += quadrature::integrate(f, crossing(a, b), b, 1),
            }
        }
        total
    }
}

/// `Z_β` on `domain`.
pub fn partition_function(p: &dyn Potential, beta: f64, domain: Domain, resolution: usize) -> Result<Integral> {
    Ok(GibbsMeasure::new(p, beta, domain, resolution)?.partition_function())
}

/// `μ_β(U > eps)` on `domain`.
pub fn tail_mass(p: &dyn Potential, beta: f64, eps: f64, domain: Domain, resolution: usize) -> Result<Integral> {
    GibbsMeasure::new(p, beta, domain, resolution)?.tail_mass(eps)
}

/// `Z_{α₀} e^{−(β−α₀)ε} / Z_β`, the upper bound on `μ_β(U > ε)` for `U ≥ 0`.
pub fn tail_bound(
    p: &dyn Potential,
    alpha0: f64,
    beta: f64,
    eps: f64,
    domain: Domain,
    resolution: usize,
) -> Result<f64> {
    if !(beta > alpha0) {
        return Err(Error::param("beta", "must exceed alpha0"));
    }
    let za = GibbsMeasure::new(p, alpha0, domain.clone(), resolution)?.log_z();
    let zb = GibbsMeasure::new(p, beta, domain, resolution)?.log_z();
    Ok((za - (beta - alpha0) * eps - zb).exp())
}

/// `min over betas of Z_β·(β+1)^d`, with the per-β values.
pub fn z_lower_bound_fit(
    p: &dyn Potential,
    betas: &[f64],
    domain: Domain,
    resolution: usize,
) -> Result<(f64, Vec<f64>)> {
    if betas.len() < 4 {
        return Err(Error::param("betas", "need at least 4 values"));
    }
    if betas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("betas", "must be increasing"));
    }
    let d = p.dim() as f64;
    let vals = betas
        .iter()
        .map(|&b| {
            let z = GibbsMeasure::new(p, b, domain.clone(), resolution)?.partition_function().value;
            if !(z > 0.0) {
                return Err(Error::Domain(format!("non-positive Z at beta = {b}")));
            }
            Ok(z * (b + 1.0).powf(d))
        })
        .collect::<Result<Vec<_>>>()?;
    let kappa = vals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((kappa, vals))
}

/// `Σ f_i²/μ_i · h` with `μ_i ∝ e^{−βU_i}` normalized on the same grid.
///
/// Evaluated in log space, so nodes where `e^{−βU}` underflows still count;
/// nodes with `f_i = 0` contribute nothing. By Cauchy–Schwarz the result is
/// `≥ (Σ f_i h)²`.
pub fn chi_square(f: &[f64], u: &[f64], beta: f64, h: f64) -> Result<f64> {
    if f.len() != u.len() || f.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: f.len(),
        });
    }
    if let Some(i) = f.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::NegativeMass { cell: i, value: f[i] });
    }
    let umin = u.iter().copied().fold(f64::INFINITY, f64::min);
    let log_z = u.iter().map(|ui| (-beta * (ui - umin)).exp()).sum::<f64>().ln() + h.ln();
    Ok(f.iter()
        .zip(u)
        .filter(|(fi, _)| **fi > 0.0)
        .map(|(fi, ui)| (2.0 * fi.ln() + beta * (ui - umin) + log_z).exp() * h)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{builtin, builtin_default, PolynomialPotential};
    use std::f64::consts::PI;

    #[test]
    fn gaussian_partition_functions() {
        let q1 = builtin_default("quadratic_d").unwrap();
        let z = partition_function(&q1, 2.0, Domain::Auto, 4000).unwrap().value;
        assert!((z / PI.sqrt() - 1.0).abs() < 1e-10, "{z}");
        let q2 = builtin("quadratic_d", &[("d".to_string(), 2.0)].into()).unwrap();
        let z = partition_function(&q2, 1.0, Domain::Auto, 400).unwrap().value;
        assert!((z / (2.0 * PI) - 1.0).abs() < 1e-8, "{z}");
    }

    #[test]
    fn tail_is_zero_above_max() {
        let q = builtin_default("quadratic_d").unwrap();
        let t = tail_mass(&q, 1.0, 100.0, Domain::cube(3.0, 1), 400).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(tail_mass(&q, 1.0, 0.0, Domain::Auto, 400).is_err());
    }

    #[test]
    fn flat_torus() {
        let zero = PolynomialPotential::zero(1);
        let gm = GibbsMeasure::new(&zero, 3.0, Domain::Torus { half_width: 2.0 }, 64).unwrap();
        assert!((gm.partition_function().value - 4.0).abs() < 1e-14);
        let (kappa, _) =
            z_lower_bound_fit(&zero, &[1.0, 2.0, 4.0, 8.0], Domain::Torus { half_width: 2.0 }, 64).unwrap();
        assert!((kappa - 8.0).abs() < 1e-12);
        let u = vec![0.0; 64];
        let f = vec![0.25; 64];
        assert!((chi_square(&f, &u, 3.0, 4.0 / 64.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_confining_auto_box() {
        let e = builtin_default("explosive_alpha").unwrap();
        assert!(matches!(partition_function(&e, 1.0, Domain::Auto, 400), Err(Error::Domain(_))));
        let q = builtin_default("quadratic_d").unwrap();
        assert!(partition_function(&q, 0.0, Domain::Auto, 400).is_err());
    }

    #[test]
    fn normalization_and_energy() {
        let dw = builtin_default("double_well_1d").unwrap();
        for &b in &[0.5, 5.0, 40.0] {
            let gm = GibbsMeasure::new(&dw, b, Domain::Auto, 4000).unwrap();
            assert!((gm.total_mass() - 1.0).abs() < 1e-8, "beta {b}");
        }
        let q = builtin_default("quadratic_d").unwrap();
        let gm = GibbsMeasure::new(&q, 4.0, Domain::Auto, 4000).unwrap();
        assert!((gm.mean_energy() - 0.125).abs() < 1e-9);
    }

    #[test]
    fn monte_carlo_fallback() {
        let q = builtin("quadratic_d", &[("d".to_string(), 3.0)].into()).unwrap();
        let z = partition_function(&q, 1.0, Domain::cube(6.0, 3), 200_000).unwrap();
        let exact = (2.0 * PI).powf(1.5);
        let se = z.std_err.unwrap();
        assert!((z.value - exact).abs() < 4.0 * se, "{} vs {exact} (se {se})", z.value);
    }
}
