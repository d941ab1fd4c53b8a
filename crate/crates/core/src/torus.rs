//! Localization of a confining potential onto the flat torus `[−L, L)^d`.
//!
//! `U_K = K·χ(U/K)` where the cap `χ` is the identity on `u ≤ 1` and rises
//! smoothly to the plateau `1 + m/2` for `u ≥ 1 + m`:
//!
//! ```text
//! χ(u)  = u                                 u ≤ 1
//! χ(u)  = 1 + m·s((u − 1)/m)                u > 1
//! s(v)  = v − ∫_0^{min(v,1)} φ − (v − 1)₊   (so s = ½ for v ≥ 1)
//! φ(t)  = ψ(t) / (ψ(t) + ψ(1 − t)),  ψ(t) = e^{−1/t} for t > 0, else 0
//! χ'(u) = 1 − φ((u − 1)/m)
//! ```
//!
//! `χ` is C^∞ and non-decreasing, so `U_K = U` on `{U ≤ K}`, `U_K ≤ U`
//! everywhere and `U_K` is constant near the faces of the box, which makes
//! it a smooth periodic function.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::potentials::{GrowthClass, Potential, PotentialMeta};
use crate::quadrature;

fn psi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step from 0 (t ≤ 0) to 1 (t ≥ 1).
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = psi(t);
        a / (a + psi(1.0 - t))
    }
}

/// The cap `χ` with margin `m`.
pub fn cap(u: f64, margin: f64) -> f64 {
    if u <= 1.0 {
        return u;
    }
    let v = (u - 1.0) / margin;
    let s = if v >= 1.0 {
        0.5
    } else {
        v - quadrature::integrate(smooth_step, 0.0, v, 16)
    };
    1.0 + margin * s
}

/// `χ'(u)`.
pub fn cap_slope(u: f64, margin: f64) -> f64 {
    if u <= 1.0 {
        1.0
    } else {
        1.0 - smooth_step((u - 1.0) / margin)
    }
}

/// `x mod 2L` into `[−L, L)`, coordinate-wise.
pub fn wrap(x: &mut [f64], half_width: f64) {
    let period = 2.0 * half_width;
    for xi in x.iter_mut() {
        let mut r = *xi - period * ((*xi + half_width) / period).floor();
        if r >= half_width {
            r -= period;
        }
        if r < -half_width {
            r += period;
        }
        *xi = r;
    }
}

/// Energy level `K`, half-width `L_K` and the capped potential `U_K`.
#[derive(Debug, Clone)]
pub struct TorusSpec {
    base: Arc<dyn Potential>,
    level: f64,
    half_width: f64,
    margin: f64,
    meta: PotentialMeta,
}

/// Grid nodes per axis used to validate the localization.
const CHECK_NODES: [usize; 4] = [0, 2001, 201, 41];

impl TorusSpec {
    pub const DEFAULT_MARGIN: f64 = 0.1;

    /// Validates `{U ≤ K} ⊂ [−(L−1), L−1]^d` and `U ≥ K(1+m)` on the faces,
    /// both on a check grid.
    pub fn new(base: Arc<dyn Potential>, level: f64, half_width: f64, margin: f64) -> Result<Self> {
        let d = base.dim();
        if d > 3 {
            return Err(Error::Domain("torus localization supports d <= 3".into()));
        }
        if !(level > 0.0) {
            return Err(Error::param("K", "must be > 0"));
        }
        if !(half_width > 1.0) {
            return Err(Error::param("L_K", "must be > 1"));
        }
        if !(margin > 0.0 && margin <= 1.0) {
            return Err(Error::param("margin", "must be in (0, 1]"));
        }
        let n = CHECK_NODES[d];
        let h = 2.0 * half_width / (n - 1) as f64;
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        let total = n.pow(d as u32);
        for flat in 0..total {
            let mut r = flat;
            for i in 0..d {
                idx[i] = r % n;
                r /= n;
                x[i] = -half_width + h * idx[i] as f64;
            }
            let u = base.value(&x);
            let inner = x.iter().all(|v| v.abs() <= half_width - 1.0);
            if !inner && u <= level {
                return Err(Error::Domain(format!(
                    "{{U <= {level}}} is not inside [-(L_K-1), L_K-1]^d: U({x:?}) = {u}"
                )));
            }
            let on_face = idx.iter().any(|&k| k == 0 || k == n - 1);
            if on_face && u < level * (1.0 + margin) {
                return Err(Error::Domain(format!(
                    "U_K is not constant near the faces: U({x:?}) = {u}"
                )));
            }
        }
        let mut meta = base.meta().clone();
        meta.name = format!("torus({})", meta.name);
        meta.growth = GrowthClass::Confining;
        meta.known_c_star = None;
        meta.has_laplacian = false;
        meta.scale = half_width;
        Ok(Self {
            base,
            level,
            half_width,
            margin,
            meta,
        })
    }

    /// Picks the smallest `L_K` on a 0.25 lattice that passes [`TorusSpec::new`].
    pub fn auto(base: Arc<dyn Potential>, level: f64) -> Result<Self> {
        let mut last = None;
        for k in 5..=400 {
            let half_width = 0.25 * k as f64;
            match Self::new(base.clone(), level, half_width, Self::DEFAULT_MARGIN) {
                Ok(ts) => return Ok(ts),
                Err(e @ Error::Domain(_)) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap_or(Error::EmptyGrid))
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn base(&self) -> &Arc<dyn Potential> {
        &self.base
    }

    /// Plateau value `K(1 + m/2)`, the maximum of `U_K`.
    pub fn max_value(&self) -> f64 {
        self.level * (1.0 + 0.5 * self.margin)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| *v >= -self.half_width && *v < self.half_width)
    }
}

impl Potential for TorusSpec {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let u = self.base.value(x);
        if u <= self.level {
            u
        } else {
            self.level * cap(u / self.level, self.margin)
        }
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.value_and_gradient(x, grad);
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let u = self.base.value_and_gradient(x, grad);
        if u <= self.level {
            return u;
        }
        let slope = cap_slope(u / self.level, self.margin);
        grad.iter_mut().for_each(|g| *g *= slope);
        self.level * cap(u / self.level, self.margin)
    }

    fn meta(&self) -> &PotentialMeta {
        &self.meta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{builtin_default, check_gradient};

    fn dw_torus() -> TorusSpec {
        TorusSpec::new(Arc::new(builtin_default("double_well_1d").unwrap()), 5.0, 3.0, 0.1).unwrap()
    }

    #[test]
    fn step_integrates_to_half() {
        let area = quadrature::integrate(smooth_step, 0.0, 1.0, 4);
        assert!((area - 0.5).abs() < 1e-12, "{area}");
        // continuity of the cap at the plateau
        let m = 0.1;
        assert!((cap(1.0 + m * (1.0 - 1e-9), m) - (1.0 + 0.5 * m)).abs() < 1e-9);
    }

    #[test]
    fn cap_is_monotone_and_bounded() {
        let m = 0.1;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..5000 {
            let u = 0.9 + i as f64 * 1e-4;
            let c = cap(u, m);
            assert!(c >= prev - 1e-15, "u={u} {c} < {prev}");
            assert!(c <= u + 1e-15 && c <= 1.0 + m);
            prev = c;
        }
    }

    #[test]
    fn wrap_examples() {
        let l = 3.0;
        let mut x = [l + 0.3];
        wrap(&mut x, l);
        assert!((x[0] - (-l + 0.3)).abs() < 1e-12);
        let mut y = [-l, l, -l - 1e-17, 17.2, -9.0];
        wrap(&mut y, l);
        assert!(y.iter().all(|v| *v >= -l && *v < l), "{y:?}");
        assert_eq!(y[0], -l);
        assert_eq!(y[1], -l);
    }

    #[test]
    fn capped_potential_agrees_below_level() {
        let ts = dw_torus();
        let base = builtin_default("double_well_1d").unwrap();
        for i in 0..=600 {
            let x = [-3.0 + 0.01 * i as f64];
            let u = base.value(&x);
            let uk = ts.value(&x);
            if u <= 5.0 {
                assert_eq!(u, uk);
            } else {
                assert!(uk <= u && uk <= ts.max_value() + 1e-12);
            }
            assert!(uk >= 0.0);
        }
        // gradient consistent inside the transition band too
        for &x in &[1.8, 1.84, 1.87, 1.9] {
            assert!(check_gradient(&ts, &[x], 1e-6).unwrap() < 1e-5);
        }
    }

    #[test]
    fn rejects_too_narrow_box() {
        let base: Arc<dyn Potential> = Arc::new(builtin_default("double_well_1d").unwrap());
        assert!(TorusSpec::new(base.clone(), 5.0, 2.0, 0.1).is_err());
        let auto = TorusSpec::auto(base, 5.0).unwrap();
        assert!(auto.half_width() <= 3.0);
    }
}
