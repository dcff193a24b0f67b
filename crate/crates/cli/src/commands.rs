use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use phasefront::evolve::{self, Integrator, PhaseTimings, Scheme};
use phasefront::fronts::{fit_exponent, FitOptions, PowerFit};
use phasefront::io::{num, read_fronts, write_fronts, write_snapshot};
use phasefront::operators::cfl_dt;
use phasefront::steady::{halfplane_slopes, solve_phi_minus, solve_phi_plus, SteadySummary};
use phasefront::subsolution::{run_pipeline, Checkpoint, SubsolutionSummary};
use phasefront::trajectory::Stage;
use phasefront::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;

fn out_dir(config: &RunConfig, default: &str) -> Result<PathBuf> {
    let dir = config.out.clone().unwrap_or_else(|| PathBuf::from(default));
    fs::create_dir_all(&dir).map_err(|e| {
        Error::config(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })?;
    fs::write(dir.join("config.toml"), config.to_toml())?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn show_config(config: &RunConfig) -> Result<()> {
    print!("{}", config.to_toml());
    Ok(())
}

pub fn simulate(config: &RunConfig) -> Result<()> {
    let evolve_cfg = config.evolve_config()?;
    let spec = config.grid()?;
    let reaction = config.reaction()?;
    let dir = out_dir(config, "run")?;
    let out = evolve::run(&evolve_cfg, spec, reaction)?;

    for (k, snap) in out.snapshots.iter().enumerate() {
        write_snapshot(dir.join(format!("snapshot_{k:03}.csv")), snap)?;
    }
    if !out.densities.is_empty() {
        let mut text = format!("# {} {} {}\n", spec.nx, spec.x_min, spec.x_max);
        for (snap, rho) in out.snapshots.iter().zip(&out.densities) {
            text.push_str(&num(snap.time));
            for v in rho {
                write!(text, ",{}", num(*v)).unwrap();
            }
            text.push('\n');
        }
        fs::write(dir.join("densities.csv"), text)?;
    }
    write_fronts(dir.join("fronts.csv"), &out.fronts)?;
    let f = &out.fronts;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "command": "simulate",
            "config": config,
            "run": out.summary,
            "level": f.level,
            "fit_window": evolve_cfg.fit_window,
            "fit_x": f.fit_x,
            "fit_theta": f.fit_theta,
            "fit_rho": f.fit_rho,
            "gamma_hat": f.gamma_hat,
        }),
    )?;

    let s = &out.summary;
    println!(
        "{} steps to t = {} on {} cells ({:.2}s); {} snapshots in {}",
        s.steps,
        s.final_time,
        s.cells,
        s.timings.total,
        out.snapshots.len(),
        dir.display()
    );
    for (name, fit) in [("x", f.fit_x), ("theta", f.fit_theta), ("rho", f.fit_rho)] {
        if let Some(fit) = fit {
            println!("front_{name} ~ {:.4} t^{:.4}", fit.a, fit.p);
        }
    }
    match &s.aborted {
        Some(why) => Err(Error::Truncation(why.clone())),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct SteadyEntry {
    drift: [f64; 2],
    plus: SteadySummary,
    minus: SteadySummary,
    min_margin: f64,
}

pub fn steady(config: &RunConfig) -> Result<()> {
    let problems = config.steady_problems()?;
    let dir = out_dir(config, "steady")?;
    let mut entries = Vec::new();
    for (k, (disc, ring)) in problems.iter().enumerate() {
        let suffix = if k == 0 {
            String::new()
        } else {
            format!("_{k}")
        };
        let plus = solve_phi_plus(disc)?;
        let minus = solve_phi_minus(ring)?;
        write_snapshot(dir.join(format!("phi_plus{suffix}.csv")), &plus.field)?;
        write_snapshot(dir.join(format!("phi_minus{suffix}.csv")), &minus.field)?;
        let mut text = String::from("angle,slope_plus,slope_minus\n");
        let mut margin = f64::INFINITY;
        for (p, m) in plus.normals.iter().zip(&minus.normals) {
            writeln!(text, "{},{},{}", num(p.angle), num(p.slope), num(m.slope)).unwrap();
            margin = margin.min(p.slope.abs() - m.slope.abs());
        }
        fs::write(dir.join(format!("normals{suffix}.csv")), text)?;
        println!(
            "drift {:?}: {}, residuals {:.1e}/{:.1e}, plateau L = {:?}, min |∂φ⁺| - |∂φ⁻| = {margin:.5}",
            disc.drift,
            if plus.nontrivial { "nontrivial" } else { "collapsed to 0" },
            plus.residual,
            minus.residual,
            plus.plateau_radius,
        );
        entries.push(SteadyEntry {
            drift: disc.drift,
            plus: plus.summary(),
            minus: minus.summary(),
            min_margin: margin,
        });
    }
    let (zp, zm) = halfplane_slopes(config.model.alpha, config.model.params().r)?;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "command": "steady",
            "config": config,
            "halfplane_slopes": { "plus": zp, "minus": zm },
            "solves": entries,
        }),
    )
}

fn stage_name(s: Stage) -> &'static str {
    match s {
        Stage::Climb => "climb",
        Stage::Run => "run",
    }
}

pub fn subsolution(config: &RunConfig) -> Result<()> {
    let cfg = config.subsolution_config()?;
    let dir = out_dir(config, "subsolution")?;
    let out = run_pipeline(&cfg)?;
    let summary: &SubsolutionSummary = &out.summary;

    let table = |value: fn(&Checkpoint) -> f64, name: &str| {
        let mut text = format!("time,stage,{name}\n");
        for c in &summary.checkpoints {
            writeln!(
                text,
                "{},{},{}",
                num(c.time),
                stage_name(c.stage),
                num(value(c))
            )
            .unwrap();
        }
        text
    };
    fs::write(dir.join("ordering.csv"), table(|c| c.margin, "margin"))?;
    fs::write(dir.join("domination.csv"), table(|c| c.excess, "excess"))?;
    for (k, (state, w)) in out.states.iter().zip(&out.w).enumerate() {
        write_snapshot(dir.join(format!("w_{k:03}.csv")), w)?;
        write_snapshot(dir.join(format!("v_plus_{k:03}.csv")), &state.v_plus)?;
        write_snapshot(dir.join(format!("v_minus_{k:03}.csv")), &state.v_minus)?;
    }
    let ordering = summary.min_margin > 0.0;
    let domination = summary.max_excess <= config.subsolution.excess_tol;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "command": "subsolution",
            "config": config,
            "grid": cfg.grid,
            "x_edge": cfg.x_edge,
            "summary": summary,
            "ordering_ok": ordering,
            "domination_ok": domination,
            "inclusion_ok": summary.inclusion.in_block,
        }),
    )?;
    println!(
        "ordering: min margin {:.5} ({}); domination: max(w - u) = {:.3e} ({}); \
         E0 ∪ A0 inside x ≤ 0 block: {} (annulus reaches x = {:.3}); datum edge x = {:.3}",
        summary.min_margin,
        if ordering { "ok" } else { "violated" },
        summary.max_excess,
        if domination { "ok" } else { "violated" },
        summary.inclusion.in_block,
        summary.inclusion.x_right,
        cfg.x_edge,
    );
    Ok(())
}

pub fn analyze(config: &RunConfig) -> Result<()> {
    let a = &config.analyze;
    let run = a
        .run
        .clone()
        .ok_or_else(|| Error::config("analyze needs --run DIR"))?;
    // The run's own configuration supplies the level and the grid floors.
    let recorded: Option<RunConfig> = fs::read_to_string(run.join("summary.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| v.get("config").cloned())
        .and_then(|c| serde_json::from_value(c).ok());
    let run_level = recorded.as_ref().map(|c| c.model.level);
    let level = match (a.m, run_level) {
        (Some(m), Some(l)) if (m - l).abs() > 1e-12 => {
            return Err(Error::config(format!(
                "fronts.csv in {} was recorded at level {l}, not {m}",
                run.display()
            )))
        }
        (Some(m), _) => m,
        (None, Some(l)) => l,
        (None, None) => {
            return Err(Error::config(
                "no summary.json in the run directory; pass --m",
            ))
        }
    };
    let series = read_fronts(run.join("fronts.csv"), level)?;
    let (dx, dtheta) = match &recorded {
        Some(c) => {
            let g = c.grid()?;
            (g.dx(), g.dtheta())
        }
        None => (0.0, 0.0),
    };
    let x_opts = FitOptions {
        window: a.window,
        min_position: 10.0 * dx,
    };
    let t_opts = FitOptions {
        window: a.window,
        min_position: 10.0 * dtheta,
    };
    let fit_x: Result<PowerFit> = fit_exponent(&series.times, &series.front_x, x_opts);
    let fit_theta = fit_exponent(&series.times, &series.theta_displacement(), t_opts).ok();
    let fit_rho = series
        .front_rho
        .as_ref()
        .and_then(|r| fit_exponent(&series.times, r, x_opts).ok());
    let gamma_hat = match (series.times.last(), series.front_x.last()) {
        (Some(&t), Some(&x)) if t > 0.0 && x.is_finite() => Some(x / t.powf(1.5)),
        _ => None,
    };
    let fit = fit_x?;
    write_json(
        &run.join("fit.json"),
        &json!({
            "level": level,
            "window": a.window,
            "p": fit.p,
            "A": fit.a,
            "residual": fit.residual,
            "t_start": fit.t_start,
            "t_end": fit.t_end,
            "samples": fit.samples,
            "gamma_hat": gamma_hat,
            "fit_theta": fit_theta,
            "fit_rho": fit_rho,
        }),
    )?;
    println!(
        "front_x ~ {:.4} t^{:.4} over t in [{:.2}, {:.2}] ({} samples, rms {:.2e}); gamma_hat = {:?}",
        fit.a, fit.p, fit.t_start, fit.t_end, fit.samples, fit.residual, gamma_hat
    );
    Ok(())
}

#[derive(Serialize)]
struct BenchRun {
    scheme: Scheme,
    workers: usize,
    dt: f64,
    best_seconds: f64,
    seconds_per_step: f64,
    cells_per_second: f64,
    phases: PhaseTimings,
    checksum: String,
}

pub fn bench(config: &RunConfig) -> Result<()> {
    let spec = config.grid()?;
    let reaction = config.reaction()?;
    let evolve_cfg = config.evolve_config()?;
    let b = &config.bench;
    if b.steps == 0 || b.repeats == 0 || b.workers.is_empty() {
        return Err(Error::config(
            "bench needs steps, repeats and workers to be non-empty/positive",
        ));
    }
    let initial = evolve_cfg.initial.build(&spec)?;
    let cores = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let mut runs = Vec::new();
    for scheme in [Scheme::ExplicitEuler, Scheme::Imex] {
        let dt = match scheme {
            Scheme::ExplicitEuler => cfl_dt(&spec, spec.theta_max, &reaction),
            Scheme::Imex => evolve_cfg.dt.unwrap_or(0.05),
        };
        for &w in &b.workers {
            let workers = if w == 0 { cores } else { w };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))?;
            let mut best: Option<(f64, PhaseTimings, u64)> = None;
            for _ in 0..b.repeats {
                let (secs, timings, sum) = pool.install(|| -> Result<_> {
                    let mut u = initial.clone();
                    let mut integ = Integrator::new(spec, reaction, evolve_cfg.freeze_trait, &u);
                    let clock = Instant::now();
                    for _ in 0..b.steps {
                        integ.step(scheme, &mut u, dt)?;
                    }
                    let secs = clock.elapsed().as_secs_f64();
                    let mut t = integ.timings;
                    t.total = secs;
                    Ok((secs, t, u.checksum()))
                })?;
                if best.as_ref().is_none_or(|(s, _, _)| secs < *s) {
                    best = Some((secs, timings, sum));
                }
            }
            let (secs, phases, sum) = best.expect("at least one repeat");
            runs.push(BenchRun {
                scheme,
                workers,
                dt,
                best_seconds: secs,
                seconds_per_step: secs / b.steps as f64,
                cells_per_second: (spec.len() * b.steps) as f64 / secs,
                phases,
                checksum: format!("{sum:016x}"),
            });
        }
    }
    let deterministic = [Scheme::ExplicitEuler, Scheme::Imex].iter().all(|s| {
        let sums: Vec<&str> = runs
            .iter()
            .filter(|r| r.scheme == *s)
            .map(|r| r.checksum.as_str())
            .collect();
        sums.windows(2).all(|w| w[0] == w[1])
    });
    for r in &runs {
        println!(
            "{:<14} workers {:>3}: {:.3e} s/step, {:.3e} cells/s, checksum {}",
            format!("{:?}", r.scheme),
            r.workers,
            r.seconds_per_step,
            r.cells_per_second,
            r.checksum
        );
    }
    println!(
        "cells {}, checksums identical across worker counts: {deterministic}",
        spec.len()
    );
    let report = json!({
        "command": "bench",
        "cells": spec.len(),
        "steps": b.steps,
        "repeats": b.repeats,
        "deterministic": deterministic,
        "runs": runs,
    });
    if config.out.is_some() {
        let dir = out_dir(config, "bench")?;
        write_json(&dir.join("bench.json"), &report)?;
    }
    if deterministic {
        Ok(())
    } else {
        Err(Error::Numerical(
            "checksums differ across worker counts".into(),
        ))
    }
}
