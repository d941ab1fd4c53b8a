//! One function per experiment kind. Each writes its CSV files, patches the
//! resolved config with values it computed, and returns a JSON summary.

use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anneal_core::barriers::{c_star, c_star_torus, GridSpec};
use anneal_core::ensemble::{
    run_absorption_experiment, run_explosion_experiment, run_phase_sweep, run_success_experiment, write_explosion_csv,
    AbsorptionSpec, ExplosionSpec, SuccessSpec,
};
use anneal_core::fokker_planck::{
    evolve, stable_dt, verify_chi_square_bound, verify_super_bound, Boundary, DensityGrid, EvolveOptions, FpGrid,
};
use anneal_core::gibbs::{default_resolution, tail_bound, Domain, GibbsMeasure};
use anneal_core::sde::{SimConfig, StepPolicy};
use anneal_core::spectral::{fit_gaps, gaps, Prefactor};
use anneal_core::{builtin, BetaSchedule, CoolingSchedule, Potential, TorusSpec};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, InitialKind, Kind};
use crate::error::CliError;
use crate::output::{resolve_out_dir, unix_time, RunDir};

/// What a finished experiment reports.
#[derive(Debug)]
pub struct Report {
    pub dir: std::path::PathBuf,
    pub summary: Value,
    /// Failed checks; empty when all passed.
    pub failures: Vec<String>,
}

struct Outcome {
    summary: Value,
    failures: Vec<String>,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self {
            summary,
            failures: Vec::new(),
        }
    }
}

/// Resolves defaults, runs the experiment and writes every artifact.
/// Check failures are returned as [`CliError::Check`] after the files are on disk.
pub fn execute(cfg: &ExperimentConfig, out_flag: Option<&Path>) -> Result<Report, CliError> {
    cfg.validate()?;
    let mut resolved = cfg.resolve();
    let base = resolve_out_dir(out_flag, cfg.out_dir.as_deref());
    resolved.out_dir = Some(base.clone());
    let mut rd = RunDir::create(base.join(resolved.name()))?;
    let started = unix_time();
    let clock = Instant::now();
    rd.log(
        "info",
        "start",
        json!({ "experiment": resolved.experiment.as_str(), "seed": resolved.seed, "workers": resolved.workers }),
    );
    let result = match resolved.experiment {
        Kind::Run => run_success(&mut resolved, &mut rd),
        Kind::Absorption => run_absorption(&mut resolved, &mut rd),
        Kind::Barriers => run_barriers(&mut resolved, &mut rd),
        Kind::Gibbs => run_gibbs(&mut resolved, &mut rd),
        Kind::Spectral => run_spectral(&mut resolved, &mut rd),
        Kind::Fp1d => run_fp1d(&mut resolved, &mut rd),
        Kind::Phase => run_phase(&mut resolved, &mut rd),
        Kind::Explosion => run_explosion(&mut resolved, &mut rd),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            rd.log("error", "failed", json!({ "kind": e.kind(), "message": e.to_string() }));
            return Err(e);
        }
    };
    rd.write_text("config.resolved.toml", &resolved.to_toml())?;
    rd.write_json("summary.json", &outcome.summary)?;
    let elapsed = clock.elapsed().as_secs_f64();
    let mut outputs = rd.written().to_vec();
    outputs.push("meta.json".into());
    let meta = json!({
        "tool": "anneal",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": resolved.experiment.as_str(),
        "name": resolved.name(),
        "seed": resolved.seed,
        "workers": resolved.workers,
        "started_unix": started,
        "elapsed_seconds": elapsed,
        "checks_passed": outcome.failures.is_empty(),
        "outputs": outputs,
    });
    rd.write_json("meta.json", &meta)?;
    rd.log("info", "done", json!({ "elapsed_seconds": elapsed, "failures": outcome.failures }));
    let report = Report {
        dir: rd.dir.clone(),
        summary: outcome.summary,
        failures: outcome.failures,
    };
    if report.failures.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Check(report.failures.join("; ")))
    }
}

fn potential(cfg: &ExperimentConfig) -> Result<Arc<dyn Potential>, CliError> {
    Ok(Arc::new(builtin(&cfg.potential.name, &cfg.potential.params)?))
}

fn seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

fn workers(cfg: &ExperimentConfig) -> usize {
    cfg.workers.unwrap_or(1)
}

fn sim_config(cfg: &ExperimentConfig) -> SimConfig {
    let b = &cfg.budget;
    let policy = StepPolicy {
        dt_max: b.dt_max.expect("resolved"),
        drift_cap: b.drift_cap.expect("resolved"),
        dt_min: b.dt_min.expect("resolved"),
        mode: b.drift_mode.expect("resolved"),
    };
    let mut sc = SimConfig::new(b.horizon.expect("resolved"), policy);
    if let Some(cp) = &b.checkpoints {
        sc = sc.with_checkpoints(cp.clone());
    }
    if let Some(r) = cfg.events.explosion_radius {
        sc = sc.with_explosion_radius(r);
    }
    if let Some(radii) = &cfg.events.exit_radii {
        sc = sc.with_exit_radii(radii.clone());
    }
    sc
}

/// Box of `[domain]`, or the cube `[−scale, scale]^d`.
fn box_bounds(cfg: &ExperimentConfig, p: &dyn Potential) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    match &cfg.domain {
        Some(d) => {
            if d.lo.len() != p.dim() {
                return Err(CliError::invalid(format!(
                    "domain: {} bounds for a {}-dimensional potential",
                    d.lo.len(),
                    p.dim()
                )));
            }
            Ok((d.lo.clone(), d.hi.clone()))
        }
        None => {
            let s = p.meta().scale;
            Ok((vec![-s; p.dim()], vec![s; p.dim()]))
        }
    }
}

fn default_grid_nodes(dim: usize) -> usize {
    match dim {
        1 => 2001,
        2 => 201,
        _ => 41,
    }
}

/// `c*` from the catalog when known, otherwise from a grid sweep.
fn critical_depth(cfg: &ExperimentConfig, p: &dyn Potential) -> Result<(f64, &'static str), CliError> {
    if let Some(c) = p.meta().known_c_star {
        return Ok((c, "catalog"));
    }
    let (lo, hi) = box_bounds(cfg, p)?;
    let nodes = vec![cfg.budget.resolution.unwrap_or(default_grid_nodes(p.dim())); p.dim()];
    let grid = GridSpec::new(lo, hi, nodes, anneal_core::barriers::Adjacency::default_for(p.dim()), false)?;
    Ok((c_star(&grid, &grid.sample(p)?)?.c_star, "grid"))
}

fn cooling_rate(cfg: &ExperimentConfig, p: &dyn Potential) -> Result<(f64, Option<f64>), CliError> {
    let s = &cfg.schedule;
    match (s.c, s.multiplier) {
        (Some(c), _) => Ok((c, None)),
        (None, Some(m)) => {
            let (cs, _) = critical_depth(cfg, p)?;
            if !(cs > 0.0) {
                return Err(CliError::invalid(format!(
                    "schedule.multiplier needs c* > 0, but {} has c* = {cs}",
                    p.meta().name
                )));
            }
            Ok((m * cs, Some(cs)))
        }
        (None, None) => Err(CliError::invalid("set schedule.c or schedule.multiplier")),
    }
}

fn x0(cfg: &ExperimentConfig, p: &dyn Potential) -> Result<Vec<f64>, CliError> {
    let x = cfg.events.x0.clone().expect("validated");
    if x.len() != p.dim() {
        return Err(CliError::invalid(format!(
            "events.x0 has {} coordinates, the potential has dimension {}",
            x.len(),
            p.dim()
        )));
    }
    Ok(x)
}

fn success_spec(cfg: &ExperimentConfig, p: Arc<dyn Potential>, c: f64) -> Result<SuccessSpec, CliError> {
    Ok(SuccessSpec {
        x0: x0(cfg, p.as_ref())?,
        potential: p,
        c,
        beta0: cfg.schedule.beta0.expect("resolved"),
        eps: cfg.events.eps.expect("resolved"),
        cfg: sim_config(cfg),
        n_paths: cfg.budget.n_paths.expect("resolved"),
        seed: seed(cfg),
        workers: workers(cfg),
    })
}

fn run_success(cfg: &mut ExperimentConfig, rd: &mut RunDir) -> Result<Outcome, CliError> {
    if cfg.schedule.constant_beta.is_some() {
        return Err(CliError::invalid("run: anneals; use schedule.c or schedule.multiplier"));
    }
    let p = potential(cfg)?;
    let (c, c_star) = cooling_rate(cfg, p.as_ref())?;
    let stats = run_success_experiment(&success_spec(cfg, p, c)?)?;
    rd.write_with("run.csv", |w| stats.write_csv(w))?;
    rd.write_with("paths.csv", |w| stats.write_paths_csv(w))?;
    let fin = stats.final_exceed();
    let mut failures = Vec::new();
    if let Some(max) = cfg.checks.max_final_exceed {
        if fin.estimate >= max {
            failures.push(format!("final P(U > eps) = {} is not below {max}", fin.estimate));
        }
    }
    Ok(Outcome {
        summary: json!({
            "c": c,
            "c_star": c_star,
            "final_exceed": fin,
            "decreasing_over_last_3": stats.decreasing_over_last(3),
            "explosion": stats.explosion,
            "errors": stats.errors,
        }),
        failures,
    })
}

fn run_absorption(cfg: &mut ExperimentConfig, rd: &mut RunDir) -> Result<Outcome, CliError> {
    let p = potential(cfg)?;
    let (c, c_star) = cooling_rate(cfg, p.as_ref())?;
    let spec = AbsorptionSpec {
        potential: p,
        a_level: cfg.events.a_level.expect("validated"),
        sample_box: cfg.events.sample_box.expect("resolved"),
        k_levels: cfg.events.k_levels.clone().expect("validated"),
        c,
        beta0: cfg.schedule.beta0.expect("resolved"),
        cfg: sim_config(cfg),
        n_paths: cfg.budget.n_paths.expect("resolved"),
        seed: seed(cfg),
        workers: workers(cfg),
    };
    let stats = run_absorption_experiment(&spec)?;
    rd.write_with("absorption.csv", |w| stats.write_csv(w))?;
    Ok(Outcome::ok(json!({
        "c": c,
        "c_star": c_star,
        "final": stats.final_row(),
        "smallest_k_half": stats.smallest_k_half,
        "errors": stats.errors,
    })))
}

fn torus_spec(cfg: &mut ExperimentConfig, p: Arc<dyn Potential>) -> Result<TorusSpec, CliError> {
    let t = cfg.torus.as_mut().expect("validated");
    let ts = match t.half_width {
        Some(hw) => TorusSpec::new(p, t.level, hw, t.margin.unwrap_or(0.1))?,
        None => TorusSpec::auto(p, t.level)?,
    };
    t.half_width = Some(ts.half_width());
    t.margin = Some(ts.margin());
    Ok(ts)
}

fn run_barriers(cfg: &mut ExperimentConfig, rd: &mut RunDir) -> Result<Outcome, CliError> {
    let p = potential(cfg)?;
    let res = cfg.budget.resolution.expect("resolved");
    let (grid, result) = if cfg.torus.is_some() {
        let ts = torus_spec(cfg, p.clone())?;
        c_star_torus(&ts, res)?
    } else {
        let (lo, hi) = box_bounds(cfg, p.as_ref())?;
        cfg.domain = Some(crate::config::DomainSpec {
            lo: lo.clone(),
            hi: hi.clone(),
        });
        let d = p.dim();
        let grid = GridSpec::new(lo, hi, vec![res; d], anneal_core::barriers::Adjacency::default_for(d), false)?;
        let r = c_star(&grid, &grid.sample(p.as_ref())?)?;
        (grid, r)
    };
    rd.write_with("merge_events.csv", |w| result.write_events_csv(w))?;
    rd.write_json("barriers.json", &json!({ "grid": grid, "result": result }))?;
    Ok(Outcome::ok(json!({
        "c_star": result.c_star,
        "saddle_level": result.saddle_level,
        "global_min_value": result.global_min_value,
        "argmax": [grid.coords(result.argmax.0), grid.coords(result.argmax.1)],
        "known_c_star": p.meta().known_c_star,
        "merge_events": result.merge_events.len(),
    })))
}

fn run_gibbs(cfg: &mut ExperimentConfig, rd: &mut RunDir) -> Result<Outcome, CliError> {
    let p = potential(cfg)?;
    let res = *cfg.budget.resolution.get_or_insert(default_resolution(p.dim()));
    let domain = match &cfg.domain {
        Some(d) => Domain::Box {
            lo: d.lo.clone(),
            hi: d.hi.clone(),
        },
        None => Domain::Auto,
    };
    let eps = cfg.events.eps.expect("resolved");
    let alpha0 = cfg.events.alpha0.expect("resolved");
    let betas = cfg.budget.betas.clone().expect("resolved");
    let mut rows = Vec::new();
    for &beta in &betas {
        let gm = GibbsMeasure::new(p.as_ref(), beta, domain.clone(), res)?;
        let z = gm.partition_function();
        let tail = gm.tail_mass(eps)?;
        let bound = if beta > alpha0 {
            Some(tail_bound(p.as_ref(), alpha0, beta, eps, domain.clone(), res)?)
        } else {
            None
        };
        rows.push((beta, z, tail, bound, gm.mean_energy()));
    }
    rd.write_with("gibbs.csv", |w| {
        writeln!(w, "beta,z,z_se,tail,tail_se,bound,mean_energy")?;
        for (beta, z, tail, bound, mu) in &rows {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let (zs, ts, b) = (opt(z.std_err), opt(tail.std_err), opt(*bound));
            writeln!(w, "{beta},{},{zs},{},{ts},{b},{mu}", z.value, tail.value)?;
        }
        Ok(())
    })?;
    let slope = if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.2.value.ln()).collect();
        Some(anneal_core::stats::linear_fit(&x, &y).1)
    } else {
        None
    };
    let bounds_hold = rows
        .iter()
        .all(|(_, _, t, b, _)| b.is_none_or(|b| t.value <= b * (1.0 + 1e-9)));
    Ok(Outcome::ok(json!({
        "eps": eps,
        "alpha0": alpha0,
        "log_tail_slope": slope,
        "tail_bound_holds": bounds_hold,
    })))
}

fn run_spectral(cfg: &mut ExperimentConfig, rd: &mut RunDir) -> Result<Outcome, CliError> {
    let p = potential(cfg)?;
    if p.dim() != 1 {
        return Err(CliError::invalid("spectral: the generator is assembled in one dimension only"));
    }
    let ts = torus_spec(cfg, p)?;
    let n = cfg.budget.resolution.expect("resolved");
    let betas = cfg.budget.betas.clone().expect("resolved");
    let prefactor = cfg.spectral.as_ref().and_then(|s| s.prefactor).expect("resolved");
    let g = gaps(&ts, &betas, n)?;
    rd.write_with("spectral.csv", |w| {
        writeln!(w, "beta,lambda0,gap")?;
        for x in &g {
            writeln!(w, "{},{},{}", x.beta, x.lambda0, x.gap)?;
        }
        Ok(())
    })?;
    let fits = [Prefactor::Hks, Prefactor::Kramers, Prefactor::None]
        .into_iter()
        .map(|pf| fit_gaps(g.clone(), pf).map(|f| (pf, f.rate, f.constant)))
        .collect::<Result<Vec<_>, _>>()?;
    let (_, barrier) = c_star_torus(&ts, n.max(4000))?;
    let rate = fits.iter().find(|f| f.0 == prefactor).expect("all prefactors fitted").1;
    let rel = (rate - barrier.c_star).abs() / barrier.c_star;
    let mut failures = Vec::new();
    if let Some(tol) = cfg.checks.rate_rel_tol {
        if !(rel <= tol) {
            failures.push(format!("gap rate {rate} is {rel:.3} away from c* = {}", barrier.c_star));
        }
    }
    Ok(Outcome {
        summary: json!({
            "prefactor": prefactor,
            "rate": rate,
            "c_star_torus": barrier.c_star,
            "relative_error": rel,
            "fits": fits.iter().map(|(pf, r, k)| json!({ "prefactor": pf, "rate": r, "constant": k })).collect::<Vec<_>>(),
        }),
        failures,
    })
}

fn run_fp1d(cfg: &mut ExperimentConfig, rd: &mut RunDir) -> Result<Outcome, CliError> {
    let base = potential(cfg)?;
    if base.dim() != 1 {
        return Err(CliError::invalid("fp1d: one-dimensional potentials only"));
    }
    let fp = cfg.fp.clone().expect("resolved");
    let cells = fp.cells.expect("resolved");
    let boundary = fp.boundary.expect("resolved");
    let (p, grid, z_domain): (Arc<dyn Potential>, FpGrid, Domain) = if cfg.torus.is_some() {
        let ts = torus_spec(cfg, base)?;
        let hw = ts.half_width();
        (Arc::new(ts), FpGrid::new(-hw, hw, cells, boundary)?, Domain::Torus { half_width: hw })
    } else {
        let d = cfg.domain.clone().expect("validated");
        let domain = Domain::Box {
            lo: d.lo.clone(),
            hi: d.hi.clone(),
        };
        (base, FpGrid::new(d.lo[0], d.hi[0], cells, boundary)?, domain)
    };
    if boundary == Boundary::NoFlux && cfg.torus.is_some() {
        return Err(CliError::invalid("fp1d: a [torus] run needs fp.boundary = \"periodic\""));
    }
    let horizon = cfg.budget.horizon.expect("resolved");
    let (sched, c): (BetaSchedule, Option<f64>) = match cfg.schedule.constant_beta {
        Some(b) => (BetaSchedule::Constant(b), None),
        None => {
            let (c, _) = cooling_rate(cfg, p.as_ref())?;
            (CoolingSchedule::new(c, cfg.schedule.beta0.expect("resolved"))?.into(), Some(c))
        }
    };
    let f0 = match fp.initial.expect("resolved") {
        InitialKind::Uniform => DensityGrid::uniform(grid),
        InitialKind::Gaussian => {
            let (Some(m), Some(s)) = (fp.mean, fp.sd) else {
                return Err(CliError::invalid("fp.initial = \"gaussian\" needs fp.mean and fp.sd"));
            };
            DensityGrid::gaussian(grid, m, s)?
        }
        InitialKind::Gibbs => {
            let b = fp.initial_beta.unwrap_or_else(|| sched.beta_at(0.0));
            cfg.fp.as_mut().expect("resolved").initial_beta = Some(b);
            DensityGrid::gibbs(grid, p.as_ref(), b)?
        }
    };
    let dt = match fp.dt {
        Some(dt) => dt,
        None => 0.9 * stable_dt(&grid, p.as_ref(), sched.beta_at(0.0), sched.beta_at(horizon))?,
    };
    cfg.fp.as_mut().expect("resolved").dt = Some(dt);
    let opts = EvolveOptions {
        checkpoints: cfg.budget.checkpoints.clone().expect("resolved"),
        chi_square: fp.chi_square.expect("resolved"),
        densities: fp.densities.expect("resolved"),
    };
    let run = evolve(&f0, p.as_ref(), &sched, horizon, dt, &opts)?;
    rd.write_with("fp1d.csv", |w| run.write_csv(w))?;
    if opts.densities {
        rd.write_with("densities.csv", |w| {
            write!(w, "x")?;
            for c in &run.checkpoints {
                write!(w, ",t={}", c.t)?;
            }
            writeln!(w)?;
            for i in 0..grid.cells {
                write!(w, "{}", grid.center(i))?;
                for c in &run.checkpoints {
                    write!(w, ",{}", c.density.as_ref().map_or(f64::NAN, |d| d[i]))?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;
    }
    let mut failures = Vec::new();
    let alpha0 = cfg.events.alpha0.expect("resolved");
    let beta0 = sched.beta_at(0.0);
    let energy = if beta0 > alpha0 {
        let log_z = GibbsMeasure::new(p.as_ref(), alpha0, z_domain, default_resolution(1))?.log_z();
        let rep = verify_super_bound(&run, alpha0, log_z, cfg.checks.entropy_tol.expect("resolved"))?;
        if !rep.holds {
            failures.push(format!("energy {} exceeds the bound {}", rep.max_u, rep.bound));
        }
        if !rep.entropy_holds {
            failures.push(format!("entropy inequality violated by {}", rep.entropy_slack));
        }
        serde_json::to_value(&rep).expect("serializable")
    } else {
        Value::Null
    };
    let chi = if opts.chi_square {
        let rep = verify_chi_square_bound(&run)?;
        if !rep.holds {
            failures.push(format!("chi-square {} exceeds max(2, initial) = {}", rep.max, rep.bound));
        }
        json!({ "initial": rep.initial, "bound": rep.bound, "max": rep.max, "holds": rep.holds })
    } else {
        Value::Null
    };
    let last = run.checkpoints.last().expect("final checkpoint");
    Ok(Outcome {
        summary: json!({
            "c": c,
            "dt": dt,
            "steps": run.steps,
            "clipped": run.clipped,
            "final_mass": last.mass,
            "final_u": last.u,
            "energy_bound": energy,
            "chi_square": chi,
        }),
        failures,
    })
}

fn run_phase(cfg: &mut ExperimentConfig, rd: &mut RunDir) -> Result<Outcome, CliError> {
    let p = potential(cfg)?;
    let (cs, source) = critical_depth(cfg, p.as_ref())?;
    let multipliers = cfg.schedule.multipliers.clone().expect("validated");
    let base = success_spec(cfg, p, cs)?;
    let tol = cfg.checks.monotone_se.expect("resolved");
    let table = run_phase_sweep(&base, cs, &multipliers, tol)?;
    rd.write_with("phase.csv", |w| table.write_csv(w))?;
    rd.write_with("phase_checkpoints.csv", |w| {
        writeln!(w, "multiplier,t,n,exceed,estimate,lo,hi")?;
        for r in &table.rows {
            for (t, e) in r.stats.checkpoints.iter().zip(&r.stats.exceed) {
                writeln!(w, "{},{t},{},{},{},{},{}", r.multiplier, e.trials, e.successes, e.estimate, e.lo, e.hi)?;
            }
        }
        Ok(())
    })?;
    let mut failures = Vec::new();
    if !table.monotone {
        failures.push(format!("success is not monotone in the multiplier: pairs {:?}", table.violations));
    }
    Ok(Outcome {
        summary: json!({
            "c_star": cs,
            "c_star_source": source,
            "rows": table.rows.iter().map(|r| json!({ "multiplier": r.multiplier, "c": r.c, "success": r.success })).collect::<Vec<_>>(),
            "monotone": table.monotone,
            "violations": table.violations,
        }),
        failures,
    })
}

fn run_explosion(cfg: &mut ExperimentConfig, rd: &mut RunDir) -> Result<Outcome, CliError> {
    if cfg.potential.name != "explosive_alpha" {
        return Err(CliError::invalid("explosion: potential.name must be \"explosive_alpha\""));
    }
    if cfg.potential.params.contains_key("alpha") {
        return Err(CliError::invalid("explosion: set events.alphas, not potential.params.alpha"));
    }
    let dim = cfg.potential.params.get("d").copied().unwrap_or(1.0);
    if dim.fract() != 0.0 || !(1.0..=16.0).contains(&dim) {
        return Err(CliError::invalid("potential.params.d: must be an integer in 1..=16"));
    }
    let dim = dim as usize;
    let x0 = cfg.events.x0.get_or_insert_with(|| vec![2.0; dim]).clone();
    if x0.len() != dim {
        return Err(CliError::invalid("events.x0: length must equal potential.params.d"));
    }
    let spec = ExplosionSpec {
        alphas: cfg.events.alphas.clone().expect("validated"),
        dim,
        x0,
        beta: BetaSchedule::Constant(cfg.schedule.constant_beta.expect("resolved")),
        cfg: sim_config(cfg),
        n_paths: cfg.budget.n_paths.expect("resolved"),
        seed: seed(cfg),
        workers: workers(cfg),
    };
    let rows = run_explosion_experiment(&spec)?;
    rd.write_with("explosion.csv", |w| write_explosion_csv(&rows, w))?;
    Ok(Outcome::ok(json!({ "rows": rows })))
}
