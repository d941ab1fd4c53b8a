//! Euler–Maruyama integration of
//!
//! ```text
//! X_t = x₀ + B_t − ½ ∫_0^t β_s ∇U(X_s) ds
//! ```
//!
//! in `R^d`, and of the same equation on the torus `[−L_K, L_K)^d` with the
//! capped potential `U_K`. Step sizes are drift-limited: every step moves
//! the deterministic part by at most `drift_cap` (or `drift_cap·max(1,|x|)`
//! in relative mode).

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{norm, Potential};
use crate::rng::{PathSeed, Purpose};
use crate::schedule::BetaSchedule;
use crate::torus::{self, TorusSpec};

/// How `drift_cap` bounds the drift displacement of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftCapMode {
    /// `|drift·dt| ≤ drift_cap`.
    Absolute,
    /// `|drift·dt| ≤ drift_cap·max(1, |x|)`; needed to follow blow-ups.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub dt_max: f64,
    pub drift_cap: f64,
    pub dt_min: f64,
    pub mode: DriftCapMode,
}

const TINY: f64 = 1e-300;

/// `dt = min(dt_max, drift_cap / (½β|∇U| + tiny))`, absolute mode, `dt_min = 1e−12`.
pub fn default_step_policy(dt_max: f64, drift_cap: f64) -> StepPolicy {
    StepPolicy {
        dt_max,
        drift_cap,
        dt_min: 1e-12,
        mode: DriftCapMode::Absolute,
    }
}

impl Default for StepPolicy {
    fn default() -> Self {
        default_step_policy(1e-2, 0.1)
    }
}

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0) {
            return Err(Error::param("dt_max", "must be > 0"));
        }
        if !(self.drift_cap > 0.0) {
            return Err(Error::param("drift_cap", "must be > 0"));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return Err(Error::param("dt_min", "must be in (0, dt_max]"));
        }
        Ok(())
    }

    /// Step size at inverse temperature `beta`, gradient norm and position norm.
    #[inline]
    pub fn dt(&self, beta: f64, grad_norm: f64, x_norm: f64) -> f64 {
        let cap = match self.mode {
            DriftCapMode::Absolute => self.drift_cap,
            DriftCapMode::Relative => self.drift_cap * x_norm.max(1.0),
        };
        self.dt_max.min(cap / (0.5 * beta * grad_norm + TINY))
    }
}

/// One Euler–Maruyama step: `x′ = x + √dt·noise − ½β(t)∇U(x)dt`.
pub fn step(
    p: &dyn Potential,
    sched: &BetaSchedule,
    x: &[f64],
    t: f64,
    dt: f64,
    noise: &[f64],
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be > 0"));
    }
    if noise.len() != p.dim() || x.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: noise.len().min(x.len()),
        });
    }
    let mut grad = vec![0.0; x.len()];
    p.gradient(x, &mut grad);
    if !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFiniteDrift { t, x: x.to_vec() });
    }
    let beta = sched.beta_at(t);
    let sq = dt.sqrt();
    Ok(x.iter()
        .zip(&grad)
        .zip(noise)
        .map(|((xi, gi), ni)| xi + sq * ni - 0.5 * beta * gi * dt)
        .collect())
}

/// Checkpoints, horizon and stopping rules of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub policy: StepPolicy,
    /// Sorted times in `(0, horizon]`; the horizon is always recorded.
    pub checkpoints: Vec<f64>,
    pub explosion_radius: f64,
    /// Radii `n` whose exit times `ζ_n` are recorded.
    pub exit_radii: Vec<f64>,
}

impl SimConfig {
    pub const DEFAULT_EXPLOSION_RADIUS: f64 = 1e6;

    pub fn new(horizon: f64, policy: StepPolicy) -> Self {
        Self {
            horizon,
            policy,
            checkpoints: vec![horizon],
            explosion_radius: Self::DEFAULT_EXPLOSION_RADIUS,
            exit_radii: Vec::new(),
        }
    }

    pub fn with_checkpoints(mut self, mut times: Vec<f64>) -> Self {
        times.retain(|t| *t > 0.0 && *t < self.horizon);
        times.push(self.horizon);
        times.sort_by(f64::total_cmp);
        times.dedup();
        self.checkpoints = times;
        self
    }

    pub fn with_explosion_radius(mut self, r: f64) -> Self {
        self.explosion_radius = r;
        self
    }

    pub fn with_exit_radii(mut self, mut radii: Vec<f64>) -> Self {
        radii.sort_by(f64::total_cmp);
        self.exit_radii = radii;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("horizon", "must be a positive finite time"));
        }
        if !(self.explosion_radius > 0.0) {
            return Err(Error::param("explosion_radius", "must be > 0"));
        }
        self.policy.validate()
    }
}

/// `count` log-spaced times ending at `horizon`, the first at `horizon / 10^(count−1)`.
pub fn log_checkpoints(horizon: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| horizon * 10f64.powi(k as i32 - (count as i32 - 1)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Status {
    Completed,
    Exploded { time: f64 },
    Error { time: f64, message: String },
}

/// Recorded path: values at checkpoints, running suprema, exit times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    /// `sup_{s ≤ t} U(X_s)` over all steps up to each checkpoint.
    pub sup_energy: Vec<f64>,
    /// `sup_{s ≤ t} |X_s|` up to each checkpoint.
    pub sup_radius: Vec<f64>,
    /// `(n, ζ_n)`; `None` when radius `n` was never reached.
    pub exit_times: Vec<(f64, Option<f64>)>,
    pub status: Status,
    pub steps: u64,
    pub seed: u64,
    pub index: u64,
}

impl Trajectory {
    /// Final energy, `None` for paths that did not complete.
    pub fn final_energy(&self) -> Option<f64> {
        match self.status {
            Status::Completed => self.energies.last().copied(),
            _ => None,
        }
    }

    /// Overall `sup U` over the simulated span.
    pub fn max_energy(&self) -> f64 {
        self.sup_energy.last().copied().unwrap_or(f64::NAN)
    }

    /// CSV with header `t,x1..xd,U,supU`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.positions.first().map_or(0, Vec::len);
        let mut header = String::from("t");
        for i in 1..=d {
            header.push_str(&format!(",x{i}"));
        }
        writeln!(w, "{header},U,supU")?;
        for k in 0..self.times.len() {
            write!(w, "{}", self.times[k])?;
            for v in &self.positions[k] {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{},{}", self.energies[k], self.sup_energy[k])?;
        }
        Ok(())
    }
}

/// Draws the initial state before any noise; used by ensembles.
pub type InitialState<'a> = &'a (dyn Fn(&mut rand_chacha::ChaCha8Rng) -> Vec<f64> + Sync);

struct Integrator<'a> {
    p: &'a dyn Potential,
    sched: &'a BetaSchedule,
    cfg: &'a SimConfig,
    wrap: Option<f64>,
}

impl Integrator<'_> {
    fn run(&self, x0: &[f64], seed: PathSeed) -> Trajectory {
        let d = self.p.dim();
        let cfg = self.cfg;
        let mut rng = seed.rng(Purpose::Noise);
        let mut x = x0.to_vec();
        let mut grad = vec![0.0; d];
        let mut t = 0.0;
        let mut u = self.p.value_and_gradient(&x, &mut grad);
        let mut sup_u = u;
        let mut sup_r = norm(&x);
        let mut exits: Vec<(f64, Option<f64>)> =
            cfg.exit_radii.iter().map(|&n| (n, None)).collect();
        let record_exits = |r: f64, t: f64, exits: &mut Vec<(f64, Option<f64>)>| {
            for e in exits.iter_mut() {
                if e.1.is_none() && r >= e.0 {
                    e.1 = Some(t);
                }
            }
        };
        record_exits(sup_r, 0.0, &mut exits);

        let n_ck = cfg.checkpoints.len();
        let mut traj = Trajectory {
            times: Vec::with_capacity(n_ck),
            positions: Vec::with_capacity(n_ck),
            energies: Vec::with_capacity(n_ck),
            sup_energy: Vec::with_capacity(n_ck),
            sup_radius: Vec::with_capacity(n_ck),
            exit_times: Vec::new(),
            status: Status::Completed,
            steps: 0,
            seed: seed.master,
            index: seed.index,
        };
        let mut next = 0;
        let mut steps = 0u64;
        while next < n_ck {
            let target = cfg.checkpoints[next];
            let gnorm = norm(&grad);
            if !(gnorm.is_finite() && u.is_finite()) {
                traj.status = Status::Error {
                    time: t,
                    message: format!("non-finite drift at x = {x:?}"),
                };
                break;
            }
            let beta = self.sched.beta_at(t);
            let xnorm = norm(&x);
            let mut dt = cfg.policy.dt(beta, gnorm, xnorm);
            if dt < cfg.policy.dt_min {
                traj.status = Status::Error {
                    time: t,
                    message: format!(
                        "step underflow: dt = {dt:e} < dt_min = {:e} at |x| = {xnorm:e}, |grad U| = {gnorm:e}",
                        cfg.policy.dt_min
                    ),
                };
                break;
            }
            let landing = t + dt >= target * (1.0 - 1e-15);
            if landing {
                dt = target - t;
            }
            let sq = dt.sqrt();
            let k = 0.5 * beta * dt;
            for (xi, gi) in x.iter_mut().zip(&grad) {
                let z: f64 = rng.sample(StandardNormal);
                *xi += sq * z - k * gi;
            }
            if let Some(l) = self.wrap {
                torus::wrap(&mut x, l);
            }
            t = if landing { target } else { t + dt };
            steps += 1;
            let r = norm(&x);
            if r > sup_r {
                sup_r = r;
                record_exits(r, t, &mut exits);
            }
            if !(r < cfg.explosion_radius) {
                traj.status = Status::Exploded { time: t };
                break;
            }
            u = self.p.value_and_gradient(&x, &mut grad);
            if u > sup_u {
                sup_u = u;
            }
            if landing {
                traj.times.push(t);
                traj.positions.push(x.clone());
                traj.energies.push(u);
                traj.sup_energy.push(sup_u);
                traj.sup_radius.push(sup_r);
                next += 1;
            }
        }
        traj.exit_times = exits;
        traj.steps = steps;
        traj
    }
}

/// Integrates the SDE in `R^d`. Deterministic in `(inputs, seed)`.
pub fn simulate(
    p: &dyn Potential,
    sched: &BetaSchedule,
    x0: &[f64],
    cfg: &SimConfig,
    seed: PathSeed,
) -> Result<Trajectory> {
    cfg.validate()?;
    if x0.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: x0.len(),
        });
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::param("x0", "must be finite"));
    }
    Ok(Integrator {
        p,
        sched,
        cfg,
        wrap: None,
    }
    .run(x0, seed))
}

/// Integrates on the torus: same noise as [`simulate`], positions wrapped
/// into `[−L_K, L_K)^d` after every step. Explosion is impossible.
pub fn simulate_torus(
    ts: &TorusSpec,
    sched: &BetaSchedule,
    x0: &[f64],
    cfg: &SimConfig,
    seed: PathSeed,
) -> Result<Trajectory> {
    cfg.validate()?;
    if x0.len() != ts.dim() {
        return Err(Error::DimensionMismatch {
            expected: ts.dim(),
            got: x0.len(),
        });
    }
    if !ts.contains(x0) {
        return Err(Error::Domain(format!(
            "x0 = {x0:?} is outside [-{l}, {l})^d",
            l = ts.half_width()
        )));
    }
    let mut cfg = cfg.clone();
    cfg.explosion_radius = f64::INFINITY;
    Ok(Integrator {
        p: ts,
        sched,
        cfg: &cfg,
        wrap: Some(ts.half_width()),
    }
    .run(x0, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{builtin, builtin_default, PolynomialPotential};
    use crate::schedule::CoolingSchedule;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn quad(d: usize) -> crate::potentials::BuiltinPotential {
        let mut m = BTreeMap::new();
        m.insert("d".to_string(), d as f64);
        builtin("quadratic_d", &m).unwrap()
    }

    #[test]
    fn step_examples() {
        let zero = PolynomialPotential::zero(3);
        let sched = BetaSchedule::Constant(1.0);
        let noise = [1.0, -0.5, 2.0];
        let next = step(&zero, &sched, &[0.0; 3], 0.0, 1.0, &noise).unwrap();
        assert_eq!(next, noise.to_vec());

        let dw = builtin_default("double_well_1d").unwrap();
        assert_eq!(step(&dw, &sched, &[1.0], 3.0, 0.1, &[0.0]).unwrap(), vec![1.0]);
        assert!(step(&dw, &sched, &[1.0], 0.0, 0.0, &[0.0]).is_err());
        assert!(step(&dw, &sched, &[1.0], 0.0, 0.1, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn noiseless_steps_track_the_ode() {
        // x' = −½βx with β = 2: x(t) = x0 e^{−t}
        let q = quad(1);
        let sched = BetaSchedule::Annealing(CoolingSchedule::new(1e6, 2.0).unwrap());
        let dt = 1e-3;
        let mut x = vec![1.5];
        let mut t = 0.0;
        for _ in 0..1000 {
            x = step(&q, &sched, &x, t, dt, &[0.0]).unwrap();
            t += dt;
        }
        let exact = 1.5 * (-t).exp();
        assert!((x[0] - exact).abs() < 2.0 * dt * exact, "{} vs {}", x[0], exact);
    }

    #[test]
    fn default_policy_examples() {
        let pol = default_step_policy(0.5, 0.1);
        assert_eq!(pol.dt(1.0, 0.0, 0.0), 0.5);
        let q = quad(2);
        let x = [60.0, 80.0];
        let mut g = [0.0; 2];
        q.gradient(&x, &mut g);
        let dt = pol.dt(1.0, norm(&g), norm(&x));
        assert!((dt - 0.002).abs() < 1e-15);
        let pol = default_step_policy(1e-3, 0.1);
        assert_eq!(pol.dt(1.0, norm(&g), norm(&x)), 1e-3);
    }

    #[test]
    fn trajectory_is_deterministic_and_consistent() {
        let dw = builtin_default("double_well_1d").unwrap();
        let sched = BetaSchedule::Annealing(CoolingSchedule::new(2.0, 0.5).unwrap());
        let cfg = SimConfig::new(20.0, StepPolicy::default())
            .with_checkpoints(vec![1.0, 5.0, 10.0])
            .with_exit_radii(vec![1.5, 0.5, 1.2]);
        let a = simulate(&dw, &sched, &[-1.0], &cfg, PathSeed::new(11, 2)).unwrap();
        let b = simulate(&dw, &sched, &[-1.0], &cfg, PathSeed::new(11, 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.times, vec![1.0, 5.0, 10.0, 20.0]);
        assert_eq!(a.status, Status::Completed);
        for w in a.sup_energy.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for k in 0..a.times.len() {
            assert!(a.energies[k] <= a.sup_energy[k]);
            assert!(norm(&a.positions[k]) <= a.sup_radius[k]);
        }
        let zetas: Vec<f64> = a.exit_times.iter().map(|e| e.1.unwrap_or(f64::INFINITY)).collect();
        for w in zetas.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let c = simulate(&dw, &sched, &[-1.0], &cfg, PathSeed::new(11, 3)).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn brownian_second_moment() {
        // E|B_T|² = dT; 10⁴ paths, 3 standard errors
        let zero = PolynomialPotential::zero(2);
        let sched = BetaSchedule::Constant(1.0);
        let t_end = 2.0;
        let cfg = SimConfig::new(t_end, default_step_policy(0.25, 0.1));
        let x0 = [0.3, -0.7];
        let samples: Vec<f64> = (0..10_000)
            .map(|i| {
                let tr = simulate(&zero, &sched, &x0, &cfg, PathSeed::new(5, i)).unwrap();
                let p = &tr.positions[0];
                (p[0] - x0[0]).powi(2) + (p[1] - x0[1]).powi(2)
            })
            .collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - 2.0 * t_end).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn step_underflow_is_reported() {
        let ex = builtin("explosive_alpha", &[("alpha".to_string(), 1.5)].into()).unwrap();
        let sched = BetaSchedule::Constant(1.0);
        let mut pol = default_step_policy(1e-2, 1e-3);
        pol.dt_min = 1e-4;
        let cfg = SimConfig::new(10.0, pol);
        let tr = simulate(&ex, &sched, &[2.0], &cfg, PathSeed::new(1, 0)).unwrap();
        assert!(matches!(tr.status, Status::Error { .. }), "{:?}", tr.status);
    }

    #[test]
    fn explosion_is_declared_by_radius() {
        let ex = builtin("explosive_alpha", &[("alpha".to_string(), 1.5)].into()).unwrap();
        let sched = BetaSchedule::Constant(1.0);
        let mut pol = default_step_policy(1e-2, 0.05);
        pol.mode = DriftCapMode::Relative;
        let cfg = SimConfig::new(10.0, pol).with_exit_radii(vec![10.0, 1e3]);
        let tr = simulate(&ex, &sched, &[2.0], &cfg, PathSeed::new(3, 0)).unwrap();
        let Status::Exploded { time } = tr.status else {
            panic!("{:?}", tr.status)
        };
        assert!(time < 10.0);
        let z10 = tr.exit_times[0].1.unwrap();
        let z1000 = tr.exit_times[1].1.unwrap();
        assert!(z10 <= z1000 && z1000 <= time);
    }

    #[test]
    fn torus_paths_stay_in_domain_and_couple() {
        let base: Arc<dyn Potential> = Arc::new(builtin_default("double_well_1d").unwrap());
        let ts = TorusSpec::new(base.clone(), 5.0, 3.0, 0.1).unwrap();
        let sched = BetaSchedule::Annealing(CoolingSchedule::new(2.0, 0.3).unwrap());
        let cfg = SimConfig::new(50.0, StepPolicy::default())
            .with_checkpoints((1..50).map(|k| k as f64).collect());
        let mut coupled = 0;
        for i in 0..40 {
            let seed = PathSeed::new(9, i);
            let tor = simulate_torus(&ts, &sched, &[-1.0], &cfg, seed).unwrap();
            assert_eq!(tor.status, Status::Completed);
            for (k, pos) in tor.positions.iter().enumerate() {
                assert!(ts.contains(pos));
                assert!(tor.energies[k] <= ts.max_value() + 1e-12);
            }
            let flat = simulate(base.as_ref(), &sched, &[-1.0], &cfg, seed).unwrap();
            // identical while the R^d path stays below K − margin
            for k in 0..flat.times.len() {
                if flat.sup_energy[k] <= 5.0 - 0.5 {
                    assert_eq!(flat.positions[k], tor.positions[k]);
                    coupled += 1;
                }
            }
        }
        assert!(coupled > 100);
        assert!(simulate_torus(&ts, &sched, &[3.5], &cfg, PathSeed::new(0, 0)).is_err());
    }
}
