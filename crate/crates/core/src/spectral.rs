//! Spectral gap of the generator `L_β φ = ½(φ″ − βU′φ′)` on a 1-D ring.
//!
//! With nodes `x_i = −L + ih`, masses `m_i = e^{−βU(x_i)}h` and midpoint
//! weights `w_{i+½} = e^{−βU(x_i + h/2)}`, the discrete Dirichlet form is
//!
//! ```text
//! Q(φ) = ½ Σ w_{i+½} ((φ_{i+1} − φ_i)/h)² h
//! ```
//!
//! and `−L = M⁻¹A`. The symmetrized matrix `S = M^{½}(−L)M^{−½}` is
//! tridiagonal with two corner entries:
//!
//! ```text
//! S_ii      = [e^{−β(U_{i+½} − U_i)} + e^{−β(U_{i−½} − U_i)}] / (2h²)
//! S_{i,i+1} = −e^{−β(U_{i+½} − (U_i + U_{i+1})/2)} / (2h²)
//! ```
//!
//! Only energy differences enter, so the entries stay representable for any
//! `β`. Eigenvalues come from Sturm counts: nodes `0..n−1` are eliminated as
//! a tridiagonal chain while the last node is kept as a border, then the
//! border pivot is formed from the accumulated fill.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::stats::linear_fit;
use crate::torus::TorusSpec;

/// Smallest gap that bisection can resolve reliably.
pub const GAP_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    pub beta: f64,
    pub h: f64,
    /// `U` at the nodes.
    pub u: Vec<f64>,
    /// `U` at `x_i + h/2`.
    pub u_mid: Vec<f64>,
    /// `S_ii`.
    pub diag: Vec<f64>,
    /// `S_{i,i+1 mod n}`.
    pub off: Vec<f64>,
}

impl GeneratorMatrix {
    /// Ring generator from node and midpoint values (`u_mid[i]` sits between
    /// nodes `i` and `i+1 mod n`).
    pub fn from_ring(u: Vec<f64>, u_mid: Vec<f64>, h: f64, beta: f64) -> Result<Self> {
        let n = u.len();
        if n < 3 || u_mid.len() != n {
            return Err(Error::param("n", "ring needs at least 3 nodes and one midpoint per edge"));
        }
        if !(h > 0.0) || !(beta >= 0.0) {
            return Err(Error::param("h, beta", "need h > 0 and beta >= 0"));
        }
        if u.iter().chain(&u_mid).any(|v| !v.is_finite()) {
            return Err(Error::param("u", "potential values must be finite"));
        }
        let c = 1.0 / (2.0 * h * h);
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n];
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            diag[i] = c * ((-beta * (u_mid[i] - u[i])).exp() + (-beta * (u_mid[prev] - u[i])).exp());
            off[i] = -c * (-beta * (u_mid[i] - 0.5 * (u[i] + u[next]))).exp();
        }
        Ok(Self {
            beta,
            h,
            u,
            u_mid,
            diag,
            off,
        })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    /// `(−L)_{ij}` of the unsymmetrized operator (zero off the ring).
    pub fn minus_l(&self, i: usize, j: usize) -> f64 {
        let n = self.n();
        let c = 1.0 / (2.0 * self.h * self.h);
        if i == j {
            self.diag[i]
        } else if j == (i + 1) % n {
            -c * (-self.beta * (self.u_mid[i] - self.u[i])).exp()
        } else if i == (j + 1) % n {
            -c * (-self.beta * (self.u_mid[j] - self.u[i])).exp()
        } else {
            0.0
        }
    }

    /// `(−L)φ` as a sum of edge differences, so constants map to exactly 0.
    pub fn apply_minus_l(&self, phi: &[f64]) -> Vec<f64> {
        let n = self.n();
        let c = 1.0 / (2.0 * self.h * self.h);
        (0..n)
            .map(|i| {
                let prev = (i + n - 1) % n;
                let next = (i + 1) % n;
                c * ((-self.beta * (self.u_mid[i] - self.u[i])).exp() * (phi[i] - phi[next])
                    + (-self.beta * (self.u_mid[prev] - self.u[i])).exp() * (phi[i] - phi[prev]))
            })
            .collect()
    }

    /// Node masses `e^{−β(U_i − min U)}h` (shifted to avoid underflow).
    pub fn masses(&self) -> Vec<f64> {
        let umin = self.u.iter().copied().fold(f64::INFINITY, f64::min);
        self.u.iter().map(|v| (-self.beta * (v - umin)).exp() * self.h).collect()
    }

    /// Number of eigenvalues of `S` strictly below `lambda`.
    ///
    /// Symmetric elimination of the chain with Bunch's 1×1/2×2 pivoting for
    /// tridiagonals, carrying the border column along; the last chain node
    /// and the border form a final 2×2 block whose inertia is read off
    /// directly.
    pub fn count_below(&self, lambda: f64) -> usize {
        const ALPHA: f64 = 0.618_033_988_749_895;
        let n = self.n();
        let last = n - 1;
        let a = |i: usize| self.diag[i] - lambda;
        // coupling of chain node i to the border
        let b = |i: usize| {
            let mut v = 0.0;
            if i == 0 {
                v += self.off[last];
            }
            if i == last - 1 {
                v += self.off[last - 1];
            }
            v
        };
        let mut count = 0;
        let mut d = a(0);
        let mut c = b(0);
        let mut border = a(last);
        let mut i = 0;
        while i < last - 1 {
            let e = self.off[i];
            let g = a(i + 1);
            let sigma = e.abs().max(g.abs()).max(self.off[i + 1].abs());
            if d != 0.0 && d.abs() * sigma >= ALPHA * e * e {
                if d < 0.0 {
                    count += 1;
                }
                border -= c * c / d;
                let l = e / d;
                c = b(i + 1) - l * c;
                d = g - l * e;
                i += 1;
            } else {
                let det = d * g - e * e;
                count += block_negatives(d, g, det);
                let f2 = b(i + 1);
                let y1 = (g * c - e * f2) / det;
                let y2 = (d * f2 - e * c) / det;
                border -= c * y1 + f2 * y2;
                if i + 2 < last {
                    let e2 = self.off[i + 1];
                    d = a(i + 2) - e2 * e2 * d / det;
                    c = b(i + 2) - e2 * y2;
                } else {
                    return count + usize::from(border < 0.0);
                }
                i += 2;
            }
        }
        count + block_negatives(d, border, d * border - c * c)
    }

    /// The `k`-th smallest eigenvalue (from 0) by bisection.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        let n = self.n();
        if k >= n {
            return Err(Error::Eigen(format!("index {k} out of range for n = {n}")));
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let r = self.off[i].abs() + self.off[(i + n - 1) % n].abs();
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(Error::Eigen("bisection did not converge".into()))
    }
}

/// Negative eigenvalues of the symmetric 2×2 block with diagonal `(p, r)`.
fn block_negatives(p: f64, r: f64, det: f64) -> usize {
    if det < 0.0 {
        1
    } else if det > 0.0 {
        if p < 0.0 {
            2
        } else {
            0
        }
    } else {
        usize::from(p + r < 0.0)
    }
}

/// Generator of `U_K` on the ring `[−L_K, L_K)` with `n` nodes.
pub fn assemble(ts: &TorusSpec, beta: f64, n: usize) -> Result<GeneratorMatrix> {
    if ts.dim() != 1 {
        return Err(Error::Domain("spectral gaps are computed in d = 1 only".into()));
    }
    if n < 16 {
        return Err(Error::param("n", "need at least 16 nodes"));
    }
    let l = ts.half_width();
    let h = 2.0 * l / n as f64;
    let u = (0..n).map(|i| ts.value(&[-l + h * i as f64])).collect();
    let u_mid = (0..n).map(|i| ts.value(&[-l + h * (i as f64 + 0.5)])).collect();
    GeneratorMatrix::from_ring(u, u_mid, h, beta)
}

/// Smallest eigenvalue (≈ 0) and gap of `−L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub beta: f64,
    pub lambda0: f64,
    pub gap: f64,
}

pub fn spectral_gap(gm: &GeneratorMatrix) -> Result<Gap> {
    let lambda0 = gm.eigenvalue(0)?;
    if lambda0.abs() > 1e-10 {
        return Err(Error::Eigen(format!("smallest eigenvalue {lambda0:e} is not 0")));
    }
    Ok(Gap {
        beta: gm.beta,
        lambda0,
        gap: gm.eigenvalue(1)?,
    })
}

/// Polynomial factor removed from `log λ` before fitting the rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prefactor {
    /// `(β+1)^{2−5d}`.
    Hks,
    /// `β`, the small-temperature prefactor of a single barrier crossing.
    Kramers,
    None,
}

impl Prefactor {
    fn log_factor(self, beta: f64, dim: usize) -> f64 {
        match self {
            Prefactor::Hks => (2.0 - 5.0 * dim as f64) * (beta + 1.0).ln(),
            Prefactor::Kramers => beta.ln(),
            Prefactor::None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapFit {
    pub prefactor: Prefactor,
    /// `−slope` of `log λ − log(prefactor)` against `β`.
    pub rate: f64,
    /// `exp(intercept)`.
    pub constant: f64,
    pub gaps: Vec<Gap>,
}

/// Gaps at every β (computed in parallel, ordered by input).
pub fn gaps(ts: &TorusSpec, betas: &[f64], n: usize) -> Result<Vec<Gap>> {
    betas
        .par_iter()
        .map(|&b| spectral_gap(&assemble(ts, b, n)?))
        .collect()
}

/// Least-squares decay rate of the gap.
pub fn fit_gap_exponent(ts: &TorusSpec, betas: &[f64], n: usize, prefactor: Prefactor) -> Result<GapFit> {
    let g = gaps(ts, betas, n)?;
    fit_gaps(g, prefactor)
}

/// Fit from precomputed gaps.
pub fn fit_gaps(gaps: Vec<Gap>, prefactor: Prefactor) -> Result<GapFit> {
    if gaps.len() < 6 {
        return Err(Error::param("betas", "need at least 6 values"));
    }
    let bmin = gaps.iter().map(|g| g.beta).fold(f64::INFINITY, f64::min);
    let bmax = gaps.iter().map(|g| g.beta).fold(0.0, f64::max);
    if !(bmin > 0.0 && bmax >= 3.0 * bmin) {
        return Err(Error::param("betas", "must be positive and span a factor of at least 3"));
    }
    for g in &gaps {
        if g.gap < GAP_FLOOR {
            return Err(Error::GapFloor {
                beta: g.beta,
                gap: g.gap,
            });
        }
    }
    let x: Vec<f64> = gaps.iter().map(|g| g.beta).collect();
    let y: Vec<f64> = gaps
        .iter()
        .map(|g| g.gap.ln() - prefactor.log_factor(g.beta, 1))
        .collect();
    let (a, b) = linear_fit(&x, &y);
    Ok(GapFit {
        prefactor,
        rate: -b,
        constant: a.exp(),
        gaps,
    })
}
