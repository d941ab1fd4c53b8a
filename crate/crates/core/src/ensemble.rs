//! Monte Carlo experiments over independent annealing paths.
//!
//! Path `i` draws its noise (and, when sampled, its initial point) from the
//! streams of `PathSeed { master: seed, index: i }`, and results are
//! collected in index order. Output is therefore identical for any number of
//! workers.

use std::io::{self, Write};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::rng::{PathSeed, Purpose};
use crate::schedule::{BetaSchedule, CoolingSchedule};
use crate::sde::{self, InitialState, SimConfig, Status, Trajectory};
use crate::stats::Proportion;

/// Largest tolerated fraction of paths ending in a numerical error.
pub const ERROR_BUDGET: f64 = 0.01;

/// Where paths start.
#[derive(Clone, Copy)]
pub enum Start<'a> {
    Fixed(&'a [f64]),
    Sampled(InitialState<'a>),
}

/// Runs `n` paths on `workers` threads.
pub fn simulate_ensemble(
    p: &dyn Potential,
    sched: &BetaSchedule,
    start: Start<'_>,
    cfg: &SimConfig,
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<Trajectory>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let ps = PathSeed::new(seed, i);
                match start {
                    Start::Fixed(x0) => sde::simulate(p, sched, x0, cfg, ps),
                    Start::Sampled(init) => {
                        let x0 = init(&mut ps.rng(Purpose::InitialState));
                        sde::simulate(p, sched, &x0, cfg, ps)
                    }
                }
            })
            .collect()
    })
}

fn check_error_budget(paths: &[Trajectory]) -> Result<usize> {
    let errors = paths.iter().filter(|t| matches!(t.status, Status::Error { .. })).count();
    if errors as f64 > ERROR_BUDGET * paths.len() as f64 {
        let first = paths
            .iter()
            .find_map(|t| match &t.status {
                Status::Error { message, .. } => Some(message.clone()),
                _ => None,
            })
            .unwrap_or_default();
        return Err(Error::Domain(format!(
            "{errors} of {} paths failed numerically (first: {first})",
            paths.len()
        )));
    }
    Ok(errors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub index: u64,
    pub status: Status,
    /// `U` at each reached checkpoint.
    pub energies: Vec<f64>,
    pub sup_energy: f64,
    pub steps: u64,
}

impl From<&Trajectory> for PathRecord {
    fn from(t: &Trajectory) -> Self {
        Self {
            index: t.index,
            status: t.status.clone(),
            energies: t.energies.clone(),
            sup_energy: t.max_energy(),
            steps: t.steps,
        }
    }
}

/// Summary of a success (or stuck) experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub experiment: String,
    pub n_paths: usize,
    pub seed: u64,
    pub c: f64,
    pub beta0: f64,
    pub eps: f64,
    pub checkpoints: Vec<f64>,
    /// `P(U(X_t) > ε)` per checkpoint over paths without numerical errors.
    pub exceed: Vec<Proportion>,
    pub explosion: Proportion,
    pub errors: usize,
    pub paths: Vec<PathRecord>,
}

impl EnsembleStats {
    pub fn final_exceed(&self) -> Proportion {
        *self.exceed.last().expect("at least one checkpoint")
    }

    /// True when the estimate strictly decreases over the last `k` checkpoints.
    pub fn decreasing_over_last(&self, k: usize) -> bool {
        let n = self.exceed.len();
        n >= k && self.exceed[n - k..].windows(2).all(|w| w[1].estimate < w[0].estimate)
    }

    /// CSV with header `t,n,exceed,estimate,lo,hi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,n,exceed,estimate,lo,hi")?;
        for (t, p) in self.checkpoints.iter().zip(&self.exceed) {
            writeln!(w, "{t},{},{},{},{},{}", p.trials, p.successes, p.estimate, p.lo, p.hi)?;
        }
        Ok(())
    }

    /// CSV with header `index,status,final_U,sup_U,steps`.
    pub fn write_paths_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,status,final_U,sup_U,steps")?;
        for r in &self.paths {
            let status = match r.status {
                Status::Completed => "completed",
                Status::Exploded { .. } => "exploded",
                Status::Error { .. } => "error",
            };
            let fin = r.energies.last().map_or(String::new(), |v| v.to_string());
            writeln!(w, "{},{status},{fin},{},{}", r.index, r.sup_energy, r.steps)?;
        }
        Ok(())
    }
}

/// Inputs of [`run_success_experiment`].
#[derive(Debug, Clone)]
pub struct SuccessSpec {
    pub potential: Arc<dyn Potential>,
    pub c: f64,
    pub beta0: f64,
    pub x0: Vec<f64>,
    pub eps: f64,
    pub cfg: SimConfig,
    pub n_paths: usize,
    pub seed: u64,
    pub workers: usize,
}

/// Estimates `P(U(X_t) > ε)` at the configured checkpoints.
pub fn run_success_experiment(spec: &SuccessSpec) -> Result<EnsembleStats> {
    if spec.n_paths < 100 {
        return Err(Error::param("n_paths", "need at least 100 paths"));
    }
    if !(spec.eps > 0.0) {
        return Err(Error::param("eps", "must be > 0"));
    }
    let sched: BetaSchedule = CoolingSchedule::new(spec.c, spec.beta0)?.into();
    let paths = simulate_ensemble(
        spec.potential.as_ref(),
        &sched,
        Start::Fixed(&spec.x0),
        &spec.cfg,
        spec.n_paths,
        spec.seed,
        spec.workers,
    )?;
    let errors = check_error_budget(&paths)?;
    let exceed = spec
        .cfg
        .checkpoints
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let (mut hits, mut trials) = (0, 0);
            for t in &paths {
                match t.status {
                    Status::Error { .. } => {}
                    Status::Exploded { .. } => {
                        hits += 1;
                        trials += 1;
                    }
                    Status::Completed => {
                        trials += 1;
                        if t.energies[k] > spec.eps {
                            hits += 1;
                        }
                    }
                }
            }
            Proportion::new(hits, trials)
        })
        .collect();
    let exploded = paths.iter().filter(|t| matches!(t.status, Status::Exploded { .. })).count();
    Ok(EnsembleStats {
        experiment: "success".into(),
        n_paths: spec.n_paths,
        seed: spec.seed,
        c: spec.c,
        beta0: spec.beta0,
        eps: spec.eps,
        checkpoints: spec.cfg.checkpoints.clone(),
        exceed,
        explosion: Proportion::new(exploded as u64, spec.n_paths as u64),
        errors,
        paths: paths.iter().map(PathRecord::from).collect(),
    })
}

/// Inputs of [`run_absorption_experiment`].
#[derive(Debug, Clone)]
pub struct AbsorptionSpec {
    pub potential: Arc<dyn Potential>,
    /// Initial points are uniform on `{U ≤ A} ∩ [−box, box]^d`.
    pub a_level: f64,
    pub sample_box: f64,
    pub k_levels: Vec<f64>,
    pub c: f64,
    pub beta0: f64,
    pub cfg: SimConfig,
    pub n_paths: usize,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionStats {
    pub seed: u64,
    pub beta0: f64,
    pub k_levels: Vec<f64>,
    pub checkpoints: Vec<f64>,
    /// `absorbed[j][k]`: `P(sup_{s ≤ t_j} U(X_s) ≤ K_k)`.
    pub absorbed: Vec<Vec<Proportion>>,
    /// Smallest `K` whose final estimate is at least ½.
    pub smallest_k_half: Option<f64>,
    pub errors: usize,
}

impl AbsorptionStats {
    pub fn final_row(&self) -> &[Proportion] {
        self.absorbed.last().expect("at least one checkpoint")
    }

    /// CSV with header `t,K,n,absorbed,estimate,lo,hi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,K,n,absorbed,estimate,lo,hi")?;
        for (t, row) in self.checkpoints.iter().zip(&self.absorbed) {
            for (k, p) in self.k_levels.iter().zip(row) {
                writeln!(w, "{t},{k},{},{},{},{},{}", p.trials, p.successes, p.estimate, p.lo, p.hi)?;
            }
        }
        Ok(())
    }
}

/// Uniform sample of `{U ≤ level}` inside `[−half_width, half_width]^d` by rejection.
pub fn sample_sublevel<R: Rng>(p: &dyn Potential, level: f64, half_width: f64, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; p.dim()];
    for _ in 0..1_000_000 {
        for xi in x.iter_mut() {
            *xi = rng.random_range(-half_width..=half_width);
        }
        if p.value(&x) <= level {
            return x;
        }
    }
    panic!("sublevel set {{U <= {level}}} not hit in 10^6 draws");
}

/// Estimates `P(sup_{t ≤ T} U(X_t) ≤ K)` for every `K`.
pub fn run_absorption_experiment(spec: &AbsorptionSpec) -> Result<AbsorptionStats> {
    if spec.k_levels.is_empty() {
        return Err(Error::param("k_levels", "need at least one level"));
    }
    if spec.k_levels.iter().any(|k| *k < spec.a_level) {
        return Err(Error::param("k_levels", "every K must be >= A"));
    }
    if !(spec.sample_box > 0.0) {
        return Err(Error::param("sample_box", "must be > 0"));
    }
    // fail fast rather than panic inside a worker
    {
        let mut probe = PathSeed::new(spec.seed, 0).rng(Purpose::InitialState);
        let p = spec.potential.as_ref();
        let hit = (0..100_000).any(|_| {
            let x: Vec<f64> = (0..p.dim()).map(|_| probe.random_range(-spec.sample_box..=spec.sample_box)).collect();
            p.value(&x) <= spec.a_level
        });
        if !hit {
            return Err(Error::Domain(format!("{{U <= {}}} is empty or tiny in the sampling box", spec.a_level)));
        }
    }
    let sched: BetaSchedule = CoolingSchedule::new(spec.c, spec.beta0)?.into();
    let p = spec.potential.as_ref();
    let init = |rng: &mut rand_chacha::ChaCha8Rng| sample_sublevel(p, spec.a_level, spec.sample_box, rng);
    let paths = simulate_ensemble(p, &sched, Start::Sampled(&init), &spec.cfg, spec.n_paths, spec.seed, spec.workers)?;
    let errors = check_error_budget(&paths)?;
    let ok: Vec<&Trajectory> = paths.iter().filter(|t| t.status == Status::Completed).collect();
    let absorbed: Vec<Vec<Proportion>> = (0..spec.cfg.checkpoints.len())
        .map(|j| {
            spec.k_levels
                .iter()
                .map(|&k| {
                    let hits = ok.iter().filter(|t| t.sup_energy[j] <= k).count();
                    Proportion::new(hits as u64, ok.len() as u64)
                })
                .collect()
        })
        .collect();
    let last = absorbed.last().expect("horizon checkpoint");
    let smallest_k_half = spec
        .k_levels
        .iter()
        .zip(last)
        .filter(|(_, p)| p.estimate >= 0.5)
        .map(|(k, _)| *k)
        .fold(None, |acc: Option<f64>, k| Some(acc.map_or(k, |a| a.min(k))));
    Ok(AbsorptionStats {
        seed: spec.seed,
        beta0: spec.beta0,
        k_levels: spec.k_levels.clone(),
        checkpoints: spec.cfg.checkpoints.clone(),
        absorbed,
        smallest_k_half,
        errors,
    })
}

/// Inputs of [`run_explosion_experiment`].
#[derive(Debug, Clone)]
pub struct ExplosionSpec {
    pub alphas: Vec<f64>,
    pub dim: usize,
    pub x0: Vec<f64>,
    pub beta: BetaSchedule,
    pub cfg: SimConfig,
    pub n_paths: usize,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplosionRow {
    pub alpha: f64,
    pub exploded: Proportion,
    /// Paths stopped by step underflow or non-finite drift.
    pub numerical_errors: usize,
    pub max_radius: f64,
}

/// Fraction of paths of `U = −(1+|x|²)^α` that reach the explosion radius.
/// Every `α` reuses the same path indices (common noise).
pub fn run_explosion_experiment(spec: &ExplosionSpec) -> Result<Vec<ExplosionRow>> {
    if spec.cfg.explosion_radius < 1e4 {
        return Err(Error::param("explosion_radius", "must be >= 1e4"));
    }
    spec.alphas
        .iter()
        .map(|&alpha| {
            if !(alpha > 0.0) {
                return Err(Error::param("alpha", "must be > 0"));
            }
            let params = [("alpha".to_string(), alpha), ("d".to_string(), spec.dim as f64)].into();
            let p = crate::potentials::builtin("explosive_alpha", &params)?;
            let paths = simulate_ensemble(&p, &spec.beta, Start::Fixed(&spec.x0), &spec.cfg, spec.n_paths, spec.seed, spec.workers)?;
            let exploded = paths.iter().filter(|t| matches!(t.status, Status::Exploded { .. })).count();
            let errors = paths.iter().filter(|t| matches!(t.status, Status::Error { .. })).count();
            let max_radius = paths
                .iter()
                .filter_map(|t| t.sup_radius.last().copied())
                .fold(0.0, f64::max);
            Ok(ExplosionRow {
                alpha,
                exploded: Proportion::new(exploded as u64, spec.n_paths as u64),
                numerical_errors: errors,
                max_radius,
            })
        })
        .collect()
}

/// CSV with header `alpha,n,exploded,fraction,lo,hi,errors`.
pub fn write_explosion_csv<W: Write>(rows: &[ExplosionRow], mut w: W) -> io::Result<()> {
    writeln!(w, "alpha,n,exploded,fraction,lo,hi,errors")?;
    for r in rows {
        let p = r.exploded;
        writeln!(w, "{},{},{},{},{},{},{}", r.alpha, p.trials, p.successes, p.estimate, p.lo, p.hi, r.numerical_errors)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub multiplier: f64,
    pub c: f64,
    /// `P(U(X_T) ≤ ε)`.
    pub success: Proportion,
    pub stats: EnsembleStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    pub c_star: f64,
    pub rows: Vec<PhaseRow>,
    /// Adjacent pairs `(i, i+1)` where success drops by more than the
    /// tolerance.
    pub violations: Vec<(usize, usize)>,
    pub monotone: bool,
}

impl PhaseTable {
    /// CSV with header `multiplier,c,n,success,estimate,lo,hi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "multiplier,c,n,success,estimate,lo,hi")?;
        for r in &self.rows {
            let p = r.success;
            writeln!(w, "{},{},{},{},{},{},{}", r.multiplier, r.c, p.trials, p.successes, p.estimate, p.lo, p.hi)?;
        }
        Ok(())
    }
}

/// Success probability per multiplier of `c*`, common noise across rows.
/// Rows are sorted by multiplier; monotonicity allows drops of up to
/// `tolerance_se` combined standard errors.
pub fn run_phase_sweep(base: &SuccessSpec, c_star: f64, multipliers: &[f64], tolerance_se: f64) -> Result<PhaseTable> {
    if !(c_star > 0.0) {
        return Err(Error::param("c_star", "phase sweeps need c* > 0"));
    }
    let mut ms = multipliers.to_vec();
    ms.sort_by(f64::total_cmp);
    let rows = ms
        .iter()
        .map(|&m| {
            let mut spec = base.clone();
            spec.c = m * c_star;
            let stats = run_success_experiment(&spec)?;
            let f = stats.final_exceed();
            Ok(PhaseRow {
                multiplier: m,
                c: spec.c,
                success: Proportion::new(f.trials - f.successes, f.trials),
                stats,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let violations: Vec<(usize, usize)> = (1..rows.len())
        .filter(|&i| {
            let (a, b) = (rows[i - 1].success, rows[i].success);
            let se = (a.std_err().powi(2) + b.std_err().powi(2)).sqrt();
            b.estimate < a.estimate - tolerance_se * se
        })
        .map(|i| (i - 1, i))
        .collect();
    Ok(PhaseTable {
        c_star,
        monotone: violations.is_empty(),
        rows,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::builtin_default;
    use crate::sde::default_step_policy;

    fn spec(workers: usize) -> SuccessSpec {
        SuccessSpec {
            potential: Arc::new(builtin_default("double_well_1d").unwrap()),
            c: 2.0,
            beta0: 0.5,
            x0: vec![-1.0],
            eps: 0.2,
            cfg: SimConfig::new(5.0, default_step_policy(1e-2, 0.1)).with_checkpoints(vec![1.0, 2.0]),
            n_paths: 100,
            seed: 11,
            workers,
        }
    }

    #[test]
    fn identical_for_any_worker_count() {
        let a = run_success_experiment(&spec(1)).unwrap();
        let b = run_success_experiment(&spec(3)).unwrap();
        assert_eq!(a, b);
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.paths.len(), 100);
        assert!(a.exceed.iter().all(|p| p.lo <= p.estimate && p.estimate <= p.hi));
    }

    #[test]
    fn absorption_is_monotone() {
        let s = AbsorptionSpec {
            potential: Arc::new(builtin_default("double_well_1d").unwrap()),
            a_level: 0.5,
            sample_box: 2.0,
            k_levels: vec![0.5, 1.0, 2.0, 100.0],
            c: 2.0,
            beta0: 4.0,
            cfg: SimConfig::new(4.0, default_step_policy(1e-2, 0.1)).with_checkpoints(vec![1.0, 2.0]),
            n_paths: 200,
            seed: 5,
            workers: 1,
        };
        let r = run_absorption_experiment(&s).unwrap();
        for row in &r.absorbed {
            assert!(row.windows(2).all(|w| w[0].estimate <= w[1].estimate));
            assert_eq!(row.last().unwrap().estimate, 1.0);
        }
        for k in 0..4 {
            assert!(r.absorbed.windows(2).all(|w| w[1][k].estimate <= w[0][k].estimate));
        }
        assert!(r.smallest_k_half.is_some());
    }

    #[test]
    fn rejects_small_ensembles() {
        let mut s = spec(1);
        s.n_paths = 10;
        assert!(run_success_experiment(&s).is_err());
    }
}
