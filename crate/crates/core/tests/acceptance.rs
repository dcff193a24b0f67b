//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs sequentially (each criterion already uses every core) and exits
//! non-zero if any criterion fails. Expect several minutes in the test
//! profile.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use phasefront::evolve::{self, EvolveConfig, InitialData, Scheme};
use phasefront::steady::{halfplane_slopes, solve_phi_minus, solve_phi_plus, SteadyProblem};
use phasefront::subsolution::{run_pipeline, SubsolutionConfig};
use phasefront::trajectory::{spreading_constant, Trajectory};
use phasefront::{Field, GridSpec, ModelParams, ModifiedBistable, Reaction};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cubic(u: f64, alpha: f64) -> f64 {
    u * (u - alpha) * (1.0 - u)
}

fn rk4(u0: f64, alpha: f64, dt: f64, t_end: f64) -> f64 {
    let n = (t_end / dt).round() as usize;
    let mut u = u0;
    for _ in 0..n {
        let k1 = cubic(u, alpha);
        let k2 = cubic(u + 0.5 * dt * k1, alpha);
        let k3 = cubic(u + 0.5 * dt * k2, alpha);
        let k4 = cubic(u + dt * k3, alpha);
        u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    u
}

fn ode_oracle() -> Outcome {
    let alpha = 0.25;
    let spec = GridSpec::new(0.0, 1.0, 4, 1.0, 2.0, 4).unwrap();
    let mut cfg = EvolveConfig::new(Scheme::Imex, 10.0, InitialData::Constant { value: 0.5 });
    cfg.dt = Some(1e-3);
    cfg.snapshot_every = 1.0;
    cfg.abort_cells = 0;
    let out = evolve::run(&cfg, spec, Reaction::CubicBistable { alpha }).unwrap();
    let worst = out
        .snapshots
        .iter()
        .map(|s| {
            let exact = rk4(0.5, alpha, 1e-4, s.time);
            s.values
                .iter()
                .map(|v| (v - exact).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-4 && out.snapshots.len() == 11,
        format!(
            "sup error {worst:.2e} over {} snapshots (tol 1e-4)",
            out.snapshots.len()
        ),
    )
}

fn heat_mode() -> Outcome {
    let (lo, hi) = (1.0, 5.0);
    let k = std::f64::consts::PI / (hi - lo);
    let spec = GridSpec::new(0.0, 1.0, 4, lo, hi, 257).unwrap();
    let u0 = Field::from_fn(spec, |_, t| (k * (t - lo)).cos());
    let mut cfg = EvolveConfig::new(Scheme::Imex, 0.1, InitialData::Field(u0));
    cfg.dt = Some(1e-3);
    cfg.snapshot_every = 0.1;
    cfg.abort_cells = 0;
    let out = evolve::run(&cfg, spec, Reaction::Inert).unwrap();
    let last = out.snapshots.last().unwrap();
    // Projection onto the mode, trapezoid weights along θ.
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..spec.ntheta {
        let w = if j == 0 || j + 1 == spec.ntheta {
            0.5
        } else {
            1.0
        };
        let c = (k * (spec.theta(j) - lo)).cos();
        num += w * c * last.at(0, j);
        den += w * c * c;
    }
    let amp = num / den;
    let exact = (-k * k * 0.1).exp();
    let err = (amp - exact).abs();
    outcome(
        err <= 1e-3,
        format!("amplitude {amp:.6} vs {exact:.6}, error {err:.2e} (tol 1e-3)"),
    )
}

fn conservation() -> Outcome {
    let spec = GridSpec::new(-3.0, 5.0, 65, 1.0, 4.0, 49).unwrap();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..8)
        .map(|_| {
            (
                rng.random_range(-0.5..0.5),
                rng.random_range(0.2..2.0),
                rng.random_range(0.2..2.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let mut u = Field::from_fn(spec, |x, t| {
        1.0 + modes
            .iter()
            .map(|(a, kx, kt, ph)| a * (kx * x + kt * t + ph).sin())
            .sum::<f64>()
    });
    let reaction = Reaction::Inert;
    let dt = phasefront::operators::cfl_dt(&spec, spec.theta_max, &reaction);
    let start = u.integral();
    for _ in 0..1000 {
        u = evolve::step_explicit(&u, &reaction, dt).unwrap();
    }
    let drift = ((u.integral() - start) / start).abs();
    outcome(
        drift <= 1e-10,
        format!("relative drift {drift:.2e} over 1000 steps (tol 1e-10)"),
    )
}

fn domination() -> Outcome {
    let spec = GridSpec::new(-50.0, 800.0, 851, 1.0, 170.0, 339).unwrap();
    let mut cfg = EvolveConfig::new(Scheme::Imex, 60.0, InitialData::indicator(15.0));
    cfg.dt = Some(0.05);
    cfg.snapshot_every = 10.0;
    cfg.level = 0.3;
    let kpp = evolve::run(&cfg, spec, Reaction::KppMonostable).unwrap();
    let bis = evolve::run(&cfg, spec, Reaction::CubicBistable { alpha: 0.1 }).unwrap();
    let aborted = kpp.summary.aborted.clone().or(bis.summary.aborted.clone());
    let worst = kpp
        .snapshots
        .iter()
        .zip(&bis.snapshots)
        .map(|(a, b)| {
            b.values
                .iter()
                .zip(&a.values)
                .map(|(v, w)| v - w)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let n = kpp.snapshots.len().min(bis.snapshots.len());
    outcome(
        aborted.is_none() && n == 7 && worst <= 1e-8,
        format!(
            "max(bistable - monostable) = {worst:.2e} over {n} snapshots (tol 1e-8){}",
            aborted
                .map(|a| format!("; aborted: {a}"))
                .unwrap_or_default()
        ),
    )
}

struct ExponentRuns {
    p: Option<f64>,
    p_theta: Option<f64>,
    p_control: Option<f64>,
    aborted: Option<String>,
    literal_box: String,
}

fn exponent_runs() -> ExponentRuns {
    let base = |t_end: f64| {
        let mut cfg = EvolveConfig::new(Scheme::Imex, t_end, InitialData::indicator(15.0));
        cfg.dt = Some(0.05);
        cfg.level = 0.3;
        cfg.snapshot_every = 30.0;
        cfg
    };
    let reaction = Reaction::CubicBistable { alpha: 0.1 };

    // The box as first specified, θ ≤ 40, for the record.
    let literal = GridSpec::new(-50.0, 450.0, 2048, 1.0, 40.0, 192).unwrap();
    let lit = evolve::run(&base(120.0), literal, reaction).unwrap();
    let literal_box = match &lit.summary.aborted {
        Some(why) => format!(
            "θ ≤ 40 box stops at t = {:.1}: {why}",
            lit.summary.final_time
        ),
        None => "θ ≤ 40 box completes".to_string(),
    };

    let spec = GridSpec::new(-50.0, 450.0, 2048, 1.0, 100.0, 496).unwrap();
    let out = evolve::run(&base(120.0), spec, reaction).unwrap();

    let line = GridSpec::new(-50.0, 450.0, 2048, 1.0, 3.0, 3).unwrap();
    let mut frozen = base(120.0);
    frozen.freeze_trait = true;
    let ctl = evolve::run(&frozen, line, reaction).unwrap();

    ExponentRuns {
        p: out.fronts.fit_x.map(|f| f.p),
        p_theta: out.fronts.fit_theta.map(|f| f.p),
        p_control: ctl.fronts.fit_x.map(|f| f.p),
        aborted: out.summary.aborted.or(ctl.summary.aborted),
        literal_box,
    }
}

fn acceleration(runs: &ExponentRuns) -> Outcome {
    let ok = |p: Option<f64>, lo: f64, hi: f64| p.is_some_and(|p| p >= lo && p <= hi);
    let pass = runs.aborted.is_none()
        && ok(runs.p, 1.25, 1.65)
        && runs.p.is_some_and(|p| p > 1.1)
        && ok(runs.p_control, 0.9, 1.1);
    outcome(
        pass,
        format!(
            "p = {:?} (window [1.25, 1.65]), frozen-trait control p = {:?} (window [0.9, 1.1]); box θ ∈ [1, 100]; {}",
            runs.p, runs.p_control, runs.literal_box
        ),
    )
}

fn back_invasion(runs: &ExponentRuns) -> Outcome {
    let pass = runs.aborted.is_none() && runs.p_theta.is_some_and(|p| (0.85..=1.15).contains(&p));
    outcome(
        pass,
        format!("θ-front exponent {:?} (window [0.85, 1.15])", runs.p_theta),
    )
}

fn plateau() -> Outcome {
    let f = ModifiedBistable::new(0.25, 0.9).unwrap();
    let big = solve_phi_plus(&SteadyProblem::disc(40.0, [0.0, 0.0], f, 0.5).unwrap()).unwrap();
    let small = solve_phi_plus(&SteadyProblem::disc(2.0, [0.0, 0.0], f, 0.1).unwrap()).unwrap();
    let l = big.plateau_radius;
    let pass = big.nontrivial && l.is_some_and(|l| l <= 20.0) && !small.nontrivial;
    outcome(
        pass,
        format!(
            "Λ = 40: nontrivial = {}, L_0.05 = {:?} (need ≤ 20); Λ = 2: nontrivial = {} (max {:.2e})",
            big.nontrivial,
            l,
            small.nontrivial,
            small.field.max()
        ),
    )
}

fn normal_ordering() -> Outcome {
    let f = ModifiedBistable::new(0.25, 1.0).unwrap();
    let mut worst_margin = f64::INFINITY;
    let mut notes = Vec::new();
    for speed in [0.0, 0.02, 0.05] {
        let dirs: &[[f64; 2]] = if speed == 0.0 {
            &[[0.0, 0.0]]
        } else {
            &[[1.0, 0.0], [0.0, 1.0]]
        };
        for d in dirs {
            let drift = [speed * d[0], speed * d[1]];
            let plus = solve_phi_plus(&SteadyProblem::disc(40.0, drift, f, 0.5).unwrap()).unwrap();
            let minus =
                solve_phi_minus(&SteadyProblem::annulus(40.0, drift, f, 0.5).unwrap()).unwrap();
            let m = plus
                .normals
                .iter()
                .zip(&minus.normals)
                .map(|(p, q)| p.slope.abs() - q.slope.abs())
                .fold(f64::INFINITY, f64::min);
            notes.push(format!("c∞ = {drift:?}: margin {m:.4}"));
            worst_margin = worst_margin.min(m);
        }
    }
    let (zp, zm) = halfplane_slopes(0.25, 1.0).unwrap();
    let plus = solve_phi_plus(&SteadyProblem::disc(80.0, [0.0, 0.0], f, 0.4).unwrap()).unwrap();
    let minus =
        solve_phi_minus(&SteadyProblem::annulus(80.0, [0.0, 0.0], f, 0.4).unwrap()).unwrap();
    let rel = |s: f64, z: f64| (s.abs() - z).abs() / z;
    let err_p = plus
        .normals
        .iter()
        .map(|n| rel(n.slope, zp))
        .fold(0.0, f64::max);
    let err_m = minus
        .normals
        .iter()
        .map(|n| rel(n.slope, zm))
        .fold(0.0, f64::max);
    let pass = worst_margin > 0.0 && err_p <= 0.05 && err_m <= 0.05;
    outcome(
        pass,
        format!(
            "Λ = 40 min margin {worst_margin:.4} [{}]; Λ = 80 slope errors {:.2}% / {:.2}% vs {zp:.5} / {zm:.5} (tol 5%)",
            notes.join(", "),
            100.0 * err_p,
            100.0 * err_m
        ),
    )
}

/// λ = 64 ≥ 40, θ = 2, Λ = λθ/8 = 16, c = 0.05, T = 40, α = 0.25, m = 0.3,
/// second-leg cap 0.75, frame spacing 0.4.
fn pipeline_params() -> ModelParams {
    ModelParams {
        alpha: 0.25,
        theta_min: 2.0,
        lambda: 64.0,
        r: ModelParams::default_r(0.25, 0.3),
        traj_speed: 0.05,
        bump_radius: 16.0,
        horizon: 40.0,
        level: 0.3,
    }
}

fn subsolution() -> Outcome {
    let enlarged = SubsolutionConfig::auto(pipeline_params(), 0.4).unwrap();
    let mut literal = enlarged.clone();
    literal.x_edge = 0.0;
    let lit = run_pipeline(&literal).unwrap().summary;
    let big = run_pipeline(&enlarged).unwrap().summary;
    let margins_ok = lit.checkpoints.iter().all(|c| c.margin > 0.0);
    let pass = margins_ok && lit.max_excess <= 1e-6 && lit.inclusion.in_block;
    outcome(
        pass,
        format!(
            "min margin {:.4} over {} checkpoints; max(w - u) = {:.3e} from the block x ≤ 0 (tol 1e-6); \
             inclusion in the block: {} (annulus reaches x = {:.2} > 0); \
             with the block edge moved to x = {:.2}: max(w - u) = {:.3e}, min margin {:.4}",
            lit.min_margin,
            lit.checkpoints.len(),
            lit.max_excess,
            lit.inclusion.in_block,
            lit.inclusion.x_right,
            enlarged.x_edge,
            big.max_excess,
            big.min_margin
        ),
    )
}

fn spreading_constant_trend() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for c in [0.05, 0.5, 2.0] {
        let gamma = spreading_constant(c);
        let ratio = Trajectory::new(c, 40.0, 1.0, 1e4)
            .unwrap()
            .spreading_ratio();
        let rel = (ratio - gamma).abs() / gamma;
        pass &= rel <= 0.1;
        notes.push(format!(
            "c = {c}: {ratio:.5} vs {gamma:.5} ({:.1}%)",
            100.0 * rel
        ));
    }
    outcome(pass, notes.join(", "))
}

fn nonlocal_probe() -> Outcome {
    let spec = GridSpec::new(-50.0, 450.0, 1024, 1.0, 100.0, 200).unwrap();
    let lambda = 15.0;
    let initial = InitialData::Indicator {
        lambda,
        x_edge: 0.0,
        amplitude: 1.0 / lambda,
    };
    let mut cfg = EvolveConfig::new(Scheme::Imex, 120.0, initial);
    cfg.dt = Some(0.05);
    cfg.level = 0.3;
    cfg.fronts_every = 1.0;
    let out = evolve::run(&cfg, spec, Reaction::NonlocalBistableRate { alpha: 0.1 }).unwrap();
    let p = out.fronts.fit_rho.map(|f| f.p);
    let pass = out.summary.aborted.is_none() && p.is_some_and(|p| p > 1.1);
    outcome(
        pass,
        format!("ρ-front exponent {p:?} (need > 1.1; exploratory)"),
    )
}

fn main() {
    let started = Instant::now();
    let mut failed = Vec::new();
    let mut report = |n: usize, f: &mut dyn FnMut() -> Outcome| {
        let clock = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(&mut *f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            outcome(false, format!("error: {msg}"))
        });
        let tag = if res.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n:>2}: {tag} ({:.1}s) {}",
            clock.elapsed().as_secs_f64(),
            res.detail
        );
        if !res.pass {
            failed.push(n);
        }
    };

    report(1, &mut ode_oracle);
    report(2, &mut heat_mode);
    report(3, &mut conservation);
    report(4, &mut domination);
    let clock = Instant::now();
    let runs = catch_unwind(exponent_runs).ok();
    println!(
        "(runs shared by criteria 5 and 6: {:.1}s)",
        clock.elapsed().as_secs_f64()
    );
    report(5, &mut || match &runs {
        Some(r) => acceleration(r),
        None => outcome(false, "exponent runs failed"),
    });
    report(6, &mut || match &runs {
        Some(r) => back_invasion(r),
        None => outcome(false, "exponent runs failed"),
    });
    report(7, &mut plateau);
    report(8, &mut normal_ordering);
    report(9, &mut subsolution);
    report(10, &mut spreading_constant_trend);
    report(11, &mut nonlocal_probe);

    println!(
        "acceptance: {}/11 passed in {:.0}s",
        11 - failed.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
