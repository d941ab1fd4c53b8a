//! Finite-volume solver for `∂_t f = ½ (e^{−βU} (f e^{βU})′)′` in one dimension.
//!
//! Cells have width `h` and centres `x_i`; `U_{i+½}` is the value at the face
//! between cells `i` and `i+1`. The face flux is
//!
//! ```text
//! F_{i+½} = ½ (f_{i+1} e^{β(U_{i+1} − U_{i+½})} − f_i e^{β(U_i − U_{i+½})}) / h
//! ```
//!
//! and `f_i ← f_i + dt (F_{i+½} − F_{i−½}) / h` with `β` taken at the step
//! midpoint. Fluxes telescope, so mass is conserved up to roundoff, and the
//! discrete Gibbs density `f_i ∝ e^{−βU_i}` has zero flux. The explicit
//! update keeps `f ≥ 0` whenever `dt·D_i ≤ 1` with
//! `D_i = ½ (e^{β(U_i − U_{i+½})} + e^{β(U_i − U_{i−½})}) / h²`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs;
use crate::potentials::Potential;
use crate::schedule::BetaSchedule;

/// Negative values above `−CLIP` are treated as roundoff and clipped.
pub const CLIP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    NoFlux,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpGrid {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
    pub boundary: Boundary,
}

impl FpGrid {
    pub fn new(lo: f64, hi: f64, cells: usize, boundary: Boundary) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::param("bounds", "need finite lo < hi"));
        }
        if !(4..=1 << 20).contains(&cells) {
            return Err(Error::param("cells", "need 4 to 2^20 cells"));
        }
        Ok(Self {
            lo,
            hi,
            cells,
            boundary,
        })
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.h()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    /// Cell index containing `x` (clamped to the grid).
    pub fn cell_of(&self, x: f64) -> usize {
        let k = ((x - self.lo) / self.h()).floor();
        (k.max(0.0) as usize).min(self.cells - 1)
    }
}

/// Potential values sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
struct Sampled {
    /// At cell centres.
    u: Vec<f64>,
    /// `u_face[i]` at the face between cells `i` and `i+1` (for periodic
    /// grids the last face sits at `hi`).
    u_face: Vec<f64>,
}

fn sample(grid: &FpGrid, p: &dyn Potential) -> Result<Sampled> {
    if p.dim() != 1 {
        return Err(Error::Domain("the Fokker–Planck solver is one-dimensional".into()));
    }
    let h = grid.h();
    let faces = match grid.boundary {
        Boundary::NoFlux => grid.cells - 1,
        Boundary::Periodic => grid.cells,
    };
    let eval = |x: f64| {
        let v = p.value(&[x]);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { x: vec![x] })
        }
    };
    Ok(Sampled {
        u: (0..grid.cells).map(|i| eval(grid.center(i))).collect::<Result<_>>()?,
        u_face: (0..faces).map(|i| eval(grid.lo + (i + 1) as f64 * h)).collect::<Result<_>>()?,
    })
}

/// Cell averages of a probability density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub grid: FpGrid,
    pub f: Vec<f64>,
    pub t: f64,
}

impl DensityGrid {
    /// Cell values `g(x_i)` normalized so that `Σ f_i h = 1`.
    pub fn from_fn(grid: FpGrid, g: impl Fn(f64) -> f64) -> Result<Self> {
        let f: Vec<f64> = (0..grid.cells).map(|i| g(grid.center(i))).collect();
        Self::normalized(grid, f)
    }

    pub fn normalized(grid: FpGrid, mut f: Vec<f64>) -> Result<Self> {
        if f.len() != grid.cells {
            return Err(Error::DimensionMismatch {
                expected: grid.cells,
                got: f.len(),
            });
        }
        if let Some(i) = f.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::NegativeMass { cell: i, value: f[i] });
        }
        let mass: f64 = f.iter().sum::<f64>() * grid.h();
        if !(mass > 0.0) {
            return Err(Error::param("f", "density has zero mass"));
        }
        f.iter_mut().for_each(|v| *v /= mass);
        Ok(Self { grid, f, t: 0.0 })
    }

    pub fn uniform(grid: FpGrid) -> Self {
        Self::from_fn(grid, |_| 1.0).expect("uniform density is valid")
    }

    /// Discrete Gibbs density `∝ e^{−βU(x_i)}`, an exact fixed point.
    pub fn gibbs(grid: FpGrid, p: &dyn Potential, beta: f64) -> Result<Self> {
        let s = sample(&grid, p)?;
        let umin = s.u.iter().copied().fold(f64::INFINITY, f64::min);
        Self::normalized(grid, s.u.iter().map(|u| (-beta * (u - umin)).exp()).collect())
    }

    /// Gaussian bump `N(mean, sd²)` restricted to the grid.
    pub fn gaussian(grid: FpGrid, mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) {
            return Err(Error::param("sd", "must be > 0"));
        }
        Self::from_fn(grid, |x| (-0.5 * ((x - mean) / sd).powi(2)).exp())
    }

    pub fn mass(&self) -> f64 {
        self.f.iter().sum::<f64>() * self.grid.h()
    }
}

/// `u = Σ U(x_i) f_i h`.
pub fn moment_u(dg: &DensityGrid, p: &dyn Potential) -> Result<f64> {
    let s = sample(&dg.grid, p)?;
    Ok(moment_sampled(&dg.f, &s.u, dg.grid.h()))
}

fn moment_sampled(f: &[f64], u: &[f64], h: f64) -> f64 {
    f.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() * h
}

/// `κ = Σ f_i log(1 + f_i e^{βU(x_i)}) h`.
pub fn entropy_kappa(dg: &DensityGrid, p: &dyn Potential, beta: f64) -> Result<f64> {
    let s = sample(&dg.grid, p)?;
    Ok(kappa_sampled(&dg.f, &s.u, beta, dg.grid.h()))
}

/// `log(1 + e^s)` without overflow.
fn softplus(s: f64) -> f64 {
    if s > 30.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

fn kappa_sampled(f: &[f64], u: &[f64], beta: f64, h: f64) -> f64 {
    f.iter()
        .zip(u)
        .filter(|(fi, _)| **fi > 0.0)
        .map(|(fi, ui)| fi * softplus(fi.ln() + beta * ui))
        .sum::<f64>()
        * h
}

/// Largest `dt` keeping the update positive for every `β` in `[beta_lo, beta_hi]`.
pub fn stable_dt(grid: &FpGrid, p: &dyn Potential, beta_lo: f64, beta_hi: f64) -> Result<f64> {
    let s = sample(grid, p)?;
    Ok(stable_dt_sampled(grid, &s, beta_lo, beta_hi))
}

fn stable_dt_sampled(grid: &FpGrid, s: &Sampled, beta_lo: f64, beta_hi: f64) -> f64 {
    let n = grid.cells;
    let h = grid.h();
    let mut worst = 0.0_f64;
    for i in 0..n {
        let mut d = 0.0;
        for face in faces_of(grid, i) {
            let delta = s.u[i] - s.u_face[face];
            d += (beta_lo * delta).exp().max((beta_hi * delta).exp());
        }
        worst = worst.max(0.5 * d / (h * h));
    }
    1.0 / worst
}

/// Face indices adjacent to cell `i`.
fn faces_of(grid: &FpGrid, i: usize) -> impl Iterator<Item = usize> {
    let n = grid.cells;
    let periodic = grid.boundary == Boundary::Periodic;
    let left = if i > 0 {
        Some(i - 1)
    } else if periodic {
        Some(n - 1)
    } else {
        None
    };
    let right = if i + 1 < n || periodic { Some(i) } else { None };
    left.into_iter().chain(right)
}

/// Which quantities to record at checkpoints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvolveOptions {
    /// Times in `(0, t_end]`; `t_end` is always recorded.
    pub checkpoints: Vec<f64>,
    pub chi_square: bool,
    pub densities: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpCheckpoint {
    pub t: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub mass: f64,
    pub u: f64,
    /// `κ(f_t)` at `β_t`.
    pub kappa: f64,
    /// `∫_0^t β′_s u_s ds` accumulated step by step.
    pub int_beta_prime_u: f64,
    pub chi2: Option<f64>,
    pub density: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpRun {
    pub checkpoints: Vec<FpCheckpoint>,
    pub steps: u64,
    /// Cells clipped from tiny negative values to zero.
    pub clipped: u64,
    pub final_state: DensityGrid,
}

impl FpRun {
    /// CSV with header `t,beta,mass,u,kappa,chi2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,beta,mass,u,kappa,chi2")?;
        for c in &self.checkpoints {
            let chi = c.chi2.map_or(String::new(), |v| v.to_string());
            writeln!(w, "{},{},{},{},{},{}", c.t, c.beta, c.mass, c.u, c.kappa, chi)?;
        }
        Ok(())
    }
}

fn checkpoint(dg: &DensityGrid, s: &Sampled, sched: &BetaSchedule, opts: &EvolveOptions, acc: f64) -> Result<FpCheckpoint> {
    let h = dg.grid.h();
    let beta = sched.beta_at(dg.t);
    Ok(FpCheckpoint {
        t: dg.t,
        beta,
        beta_prime: sched.beta_prime_at(dg.t),
        mass: dg.mass(),
        u: moment_sampled(&dg.f, &s.u, h),
        kappa: kappa_sampled(&dg.f, &s.u, beta, h),
        int_beta_prime_u: acc,
        chi2: if opts.chi_square {
            Some(gibbs::chi_square(&dg.f, &s.u, beta, h)?)
        } else {
            None
        },
        density: opts.densities.then(|| dg.f.clone()),
    })
}

/// Evolves `dg` to `t_end` with steps of at most `dt`. The first checkpoint
/// is the initial state.
pub fn evolve(dg: &DensityGrid, p: &dyn Potential, sched: &BetaSchedule, t_end: f64, dt: f64, opts: &EvolveOptions) -> Result<FpRun> {
    if !(t_end > dg.t) || !t_end.is_finite() {
        return Err(Error::param("t_end", "must be a finite time after the current one"));
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be > 0"));
    }
    let grid = dg.grid;
    let s = sample(&grid, p)?;
    let (b0, b1) = (sched.beta_at(dg.t), sched.beta_at(t_end));
    let bound = stable_dt_sampled(&grid, &s, b0.min(b1), b0.max(b1));
    if dt > bound {
        return Err(Error::Unstable { dt, bound });
    }
    let mut times: Vec<f64> = opts.checkpoints.iter().copied().filter(|t| *t > dg.t && *t < t_end).collect();
    times.push(t_end);
    times.sort_by(f64::total_cmp);
    times.dedup();

    let n = grid.cells;
    let h = grid.h();
    let faces = s.u_face.len();
    let mut state = dg.clone();
    let mut next = vec![0.0; n];
    let mut flux = vec![0.0; faces];
    let mut acc = 0.0;
    let mut steps = 0u64;
    let mut clipped = 0u64;
    let mut out = vec![checkpoint(&state, &s, sched, opts, acc)?];
    // e^{β(U_i − U_face)} for the left and right cells of every face
    let mut left = vec![0.0; faces];
    let mut right = vec![0.0; faces];
    let mut cached_beta = f64::NAN;

    for &target in &times {
        while state.t < target {
            let step = if state.t + dt >= target * (1.0 - 1e-15) { target - state.t } else { dt };
            let beta = sched.beta_at(state.t + 0.5 * step);
            if beta != cached_beta {
                for k in 0..faces {
                    let r = (k + 1) % n;
                    left[k] = (beta * (s.u[k] - s.u_face[k])).exp();
                    right[k] = (beta * (s.u[r] - s.u_face[k])).exp();
                }
                cached_beta = beta;
            }
            let u_before = moment_sampled(&state.f, &s.u, h);
            let bp = sched.beta_prime_at(state.t + 0.5 * step);
            for k in 0..faces {
                let r = (k + 1) % n;
                flux[k] = 0.5 * (state.f[r] * right[k] - state.f[k] * left[k]) / h;
            }
            let c = step / h;
            for i in 0..n {
                let mut div = 0.0;
                if i < faces {
                    div += flux[i];
                }
                if i > 0 {
                    div -= flux[i - 1];
                } else if grid.boundary == Boundary::Periodic {
                    div -= flux[faces - 1];
                }
                next[i] = state.f[i] + c * div;
            }
            let mut negative = false;
            for (i, v) in next.iter_mut().enumerate() {
                if *v < 0.0 {
                    if *v < -CLIP {
                        return Err(Error::NegativeMass { cell: i, value: *v });
                    }
                    *v = 0.0;
                    clipped += 1;
                    negative = true;
                }
            }
            if negative {
                let m: f64 = next.iter().sum::<f64>() * h;
                next.iter_mut().for_each(|v| *v /= m);
            }
            std::mem::swap(&mut state.f, &mut next);
            let u_after = moment_sampled(&state.f, &s.u, h);
            acc += 0.5 * (u_before + u_after) * bp * step;
            state.t = if step == dt { state.t + dt } else { target };
            steps += 1;
        }
        out.push(checkpoint(&state, &s, sched, opts, acc)?);
    }
    Ok(FpRun {
        checkpoints: out,
        steps,
        clipped,
        final_state: state,
    })
}

/// Outcome of the a-priori energy bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperBoundReport {
    /// `(κ(f₀) − log a₀)/(β₀ − α₀)` with `a₀ = 1/Z_{α₀}`.
    pub bound: f64,
    pub max_u: f64,
    pub max_ratio: f64,
    pub holds: bool,
    /// Worst `h_t − h_0 − ∫β′u` over the checkpoints.
    pub entropy_slack: f64,
    pub entropy_holds: bool,
}

/// Checks `u_t ≤ (κ(f₀) − log a₀)/(β₀ − α₀)` at every checkpoint and the
/// integrated entropy inequality `h_t ≤ h_0 + ∫β′u` within `entropy_tol`.
pub fn verify_super_bound(run: &FpRun, alpha0: f64, log_z_alpha0: f64, entropy_tol: f64) -> Result<SuperBoundReport> {
    let first = run.checkpoints.first().ok_or(Error::EmptyGrid)?;
    let beta0 = first.beta;
    if !(beta0 > alpha0) {
        return Err(Error::param("alpha0", format!("need beta0 = {beta0} > alpha0 = {alpha0}")));
    }
    let bound = (first.kappa + log_z_alpha0) / (beta0 - alpha0);
    let max_u = run.checkpoints.iter().map(|c| c.u).fold(f64::NEG_INFINITY, f64::max);
    let slack = run
        .checkpoints
        .iter()
        .map(|c| c.kappa - first.kappa - c.int_beta_prime_u)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SuperBoundReport {
        bound,
        max_u,
        max_ratio: max_u / bound,
        holds: max_u <= bound,
        entropy_slack: slack,
        entropy_holds: slack <= entropy_tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub initial: f64,
    pub bound: f64,
    pub max: f64,
    pub trajectory: Vec<(f64, f64)>,
    pub holds: bool,
}

/// Checks `χ²(f_t, μ_{β_t}) ≤ max(2, χ²(f₀, μ_{β₀}))` at every checkpoint.
pub fn verify_chi_square_bound(run: &FpRun) -> Result<ChiSquareReport> {
    let trajectory = run
        .checkpoints
        .iter()
        .map(|c| {
            c.chi2
                .map(|v| (c.t, v))
                .ok_or_else(|| Error::param("run", "chi-square was not recorded"))
        })
        .collect::<Result<Vec<_>>>()?;
    let initial = trajectory.first().ok_or(Error::EmptyGrid)?.1;
    let bound = initial.max(2.0);
    let max = trajectory.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(ChiSquareReport {
        initial,
        bound,
        max,
        holds: max <= bound,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{builtin_default, PolynomialPotential};
    use crate::schedule::CoolingSchedule;

    fn dw() -> crate::potentials::BuiltinPotential {
        builtin_default("double_well_1d").unwrap()
    }

    #[test]
    fn gibbs_density_is_stationary() {
        let grid = FpGrid::new(-2.5, 2.5, 200, Boundary::NoFlux).unwrap();
        let f0 = DensityGrid::gibbs(grid, &dw(), 3.0).unwrap();
        let run = evolve(&f0, &dw(), &BetaSchedule::Constant(3.0), 1.0, 1e-4, &EvolveOptions::default()).unwrap();
        let diff = run
            .final_state
            .f
            .iter()
            .zip(&f0.f)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn heat_equation_flattens() {
        let zero = PolynomialPotential::zero(1);
        let grid = FpGrid::new(-1.0, 1.0, 50, Boundary::NoFlux).unwrap();
        let f0 = DensityGrid::gaussian(grid, 0.3, 0.1).unwrap();
        let opts = EvolveOptions {
            checkpoints: vec![0.1, 0.2, 0.5, 1.0],
            densities: true,
            ..Default::default()
        };
        let run = evolve(&f0, &zero, &BetaSchedule::Constant(1.0), 10.0, 2e-4, &opts).unwrap();
        let var = |f: &Vec<f64>| {
            let m = f.iter().sum::<f64>() / f.len() as f64;
            f.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        };
        let v: Vec<f64> = run.checkpoints.iter().map(|c| var(c.density.as_ref().unwrap())).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
        assert!(run.final_state.f.iter().all(|x| (x - 0.5).abs() < 1e-3));
    }

    #[test]
    fn annealing_conserves_mass_on_torus() {
        let grid = FpGrid::new(-3.0, 3.0, 120, Boundary::Periodic).unwrap();
        let f0 = DensityGrid::uniform(grid);
        let sched: BetaSchedule = CoolingSchedule::new(2.0, 1.0).unwrap().into();
        let opts = EvolveOptions {
            checkpoints: vec![0.5, 1.0, 1.5],
            chi_square: true,
            ..Default::default()
        };
        let dt = stable_dt(&grid, &dw(), 1.0, sched.beta_at(2.0)).unwrap();
        let run = evolve(&f0, &dw(), &sched, 2.0, dt, &opts).unwrap();
        for c in &run.checkpoints {
            assert!((c.mass - 1.0).abs() < 1e-12);
            assert!(c.chi2.unwrap() >= 1.0 - 1e-12);
        }
        assert_eq!(run.checkpoints.len(), 5);
        assert_eq!(run.checkpoints.last().unwrap().t, 2.0);
    }

    #[test]
    fn moments_and_kappa() {
        let q = builtin_default("quadratic_d").unwrap();
        let grid = FpGrid::new(-4.0, 4.0, 4000, Boundary::NoFlux).unwrap();
        let f = DensityGrid::gibbs(grid, &q, 2.0).unwrap();
        assert!((moment_u(&f, &q).unwrap() - 0.25).abs() < 1e-6);
        let zero = PolynomialPotential::zero(1);
        let grid = FpGrid::new(-2.0, 2.0, 100, Boundary::Periodic).unwrap();
        let k = entropy_kappa(&DensityGrid::uniform(grid), &zero, 5.0).unwrap();
        assert!((k - 1.25f64.ln()).abs() < 1e-14);
        // no overflow for huge βU
        let f = DensityGrid::uniform(FpGrid::new(-2.0, 2.0, 100, Boundary::NoFlux).unwrap());
        assert!(entropy_kappa(&f, &dw(), 1e4).unwrap().is_finite());
    }

    #[test]
    fn rejects_unstable_step() {
        let grid = FpGrid::new(-2.5, 2.5, 400, Boundary::NoFlux).unwrap();
        let f0 = DensityGrid::uniform(grid);
        let bound = stable_dt(&grid, &dw(), 1.0, 1.0).unwrap();
        let r = evolve(&f0, &dw(), &BetaSchedule::Constant(1.0), 1.0, 2.0 * bound, &EvolveOptions::default());
        assert!(matches!(r, Err(Error::Unstable { .. })));
    }
}
