//! Sliding-bump sub-solution and its verification.
//!
//! Each leg of the trajectory carries a bump `α + v⁺` on the frame disc of
//! radius `Λ` and a dip `α - v⁻` on the surrounding annulus. The frame
//! fields start from the steady profiles `φ±` with the leg's limiting drift
//! and are marched with the time-dependent frame coefficients. Mapped back to
//! physical coordinates they give
//!
//! ```text
//! w = α + v⁺   inside the ellipse E,
//!     α - v⁻   on the annulus A,
//!     0        elsewhere,
//! ```
//!
//! which must stay below the solution `u` started from the block datum,
//! provided `|∂ν v⁺| ≥ |∂ν v⁻|` on the inner circle at all times.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{self, EvolveConfig, InitialData, RunSummary, Scheme};
use crate::frame::{frame_spec, normal_derivative, FrameCoeffs, FrameSource, Side, Sign};
use crate::grid::{sample, Field, GridSpec, Region};
use crate::model::{ModelParams, ModifiedBistable, Reaction};
use crate::steady::{solve_phi_minus, solve_phi_plus, SteadyProblem, SteadyReport, SteadySummary};
use crate::trajectory::{Stage, Trajectory};

/// Bound violations smaller than this are roundoff.
const BOUND_SLACK: f64 = 1e-9;

/// Steady seeds for one leg.
#[derive(Debug, Clone)]
pub struct StageSeed {
    pub stage: Stage,
    pub radius: f64,
    pub reaction: ModifiedBistable,
    pub plus: SteadyReport,
    pub minus: SteadyReport,
}

#[derive(Debug, Clone)]
pub struct Seeds {
    pub climb: StageSeed,
    pub run: StageSeed,
}

impl Seeds {
    pub fn get(&self, stage: Stage) -> &StageSeed {
        match stage {
            Stage::Climb => &self.climb,
            Stage::Run => &self.run,
        }
    }
}

/// Solves `φ±` for both legs: radius `Λ` with cap 1 on the climb, radius
/// `Λ/2` with cap `r` on the run, each with the leg's limiting drift.
///
/// Frame spacings are `(dy, dη)`; `tol` is the steady residual target.
pub fn compute_seeds(
    params: &ModelParams,
    dy: f64,
    deta: f64,
    tol: f64,
    angles: usize,
) -> Result<Seeds> {
    params.validate()?;
    let traj = Trajectory::from_params(params)?;
    let leg = |stage: Stage, radius: f64, cap: f64| -> Result<StageSeed> {
        let f = ModifiedBistable::new(params.alpha, cap)?;
        let drift = traj.limiting_drift(stage);
        let grid = frame_spec(radius, dy, deta)?;
        let mut disc = SteadyProblem::disc(radius, drift, f, dy)?;
        let mut ring = SteadyProblem::annulus(radius, drift, f, dy)?;
        for p in [&mut disc, &mut ring] {
            p.grid = grid;
            p.tol = tol;
            p.angles = angles;
        }
        Ok(StageSeed {
            stage,
            radius,
            reaction: f,
            plus: solve_phi_plus(&disc)?,
            minus: solve_phi_minus(&ring)?,
        })
    };
    Ok(Seeds {
        climb: leg(Stage::Climb, params.bump_radius, 1.0)?,
        run: leg(Stage::Run, params.bump_radius / 2.0, params.r)?,
    })
}

/// Frame fields at one instant.
#[derive(Debug, Clone)]
pub struct FrameState {
    pub time: f64,
    pub stage: Stage,
    pub v_plus: Field,
    pub v_minus: Field,
    /// `min |∂ν v⁺| - |∂ν v⁻|` over the sampled boundary angles.
    pub margin: f64,
}

/// `min_k |∂ν v⁺(a_k)| - |∂ν v⁻(a_k)|` over `angles` equispaced angles.
pub fn ordering_margin(
    seed: &StageSeed,
    v_plus: &Field,
    v_minus: &Field,
    angles: usize,
) -> Result<f64> {
    if angles == 0 {
        return Err(Error::config("need at least one boundary angle"));
    }
    let mut worst = f64::INFINITY;
    for k in 0..angles {
        let a = k as f64 * std::f64::consts::TAU / angles as f64;
        let dp = normal_derivative(
            v_plus,
            seed.radius,
            a,
            Side::Inside,
            Some(0.0),
            Some(&seed.plus.domain),
        )?;
        let dm = normal_derivative(
            v_minus,
            seed.radius,
            a,
            Side::Outside,
            Some(0.0),
            Some(&seed.minus.domain),
        )?;
        worst = worst.min(dp.abs() - dm.abs());
    }
    Ok(worst)
}

struct Marcher<'a> {
    seed: &'a StageSeed,
    plus_src: FrameSource,
    minus_src: FrameSource,
    dt: f64,
    buf: Vec<f64>,
}

impl<'a> Marcher<'a> {
    fn new(seed: &'a StageSeed, traj: &Trajectory, start: f64, end: f64) -> Result<Self> {
        let reaction = Reaction::ModifiedBistable(seed.reaction);
        let plus_src = FrameSource::new(&reaction, Sign::Plus)?;
        let minus_src = FrameSource::new(&reaction, Sign::Minus)?;
        let mut dt = f64::INFINITY;
        for t in [start, end] {
            let k = traj.eval_stage(t, seed.stage)?.frame_coeffs();
            k.check(&seed.plus.domain)?;
            k.check(&seed.minus.domain)?;
            dt = dt
                .min(seed.plus.domain.stable_step(&k, &plus_src))
                .min(seed.minus.domain.stable_step(&k, &minus_src));
        }
        let n = seed
            .plus
            .domain
            .unknowns()
            .max(seed.minus.domain.unknowns());
        Ok(Self {
            seed,
            plus_src,
            minus_src,
            dt,
            buf: vec![0.0; n],
        })
    }

    fn step(&mut self, coeffs: &FrameCoeffs, v_plus: &mut Field, v_minus: &mut Field, h: f64) {
        for (field, report, src) in [
            (v_plus, &self.seed.plus, &self.plus_src),
            (v_minus, &self.seed.minus, &self.minus_src),
        ] {
            let dom = &report.domain;
            let res = &mut self.buf[..dom.unknowns()];
            dom.apply(&field.values, coeffs, src, res);
            for (s, r) in dom.stencils().iter().zip(res.iter()) {
                field.values[s.node] += h * r;
            }
            field.time += h;
        }
    }
}

fn check_bounds(field: &Field, upper: f64, what: &str) -> Result<()> {
    let (lo, hi) = (field.min(), field.max());
    if !(lo >= -BOUND_SLACK && hi <= upper + BOUND_SLACK) {
        return Err(Error::Numerical(format!(
            "{what} left [0, {upper}] at t = {}: range [{lo}, {hi}]",
            field.time
        )));
    }
    Ok(())
}

/// Marches both legs and records the frame fields at each requested time.
///
/// `times` must be sorted and lie in `[0, T]`. A request at `T/2` yields two
/// states: the end of the climb and the (re-seeded) start of the run.
pub fn march(
    traj: &Trajectory,
    seeds: &Seeds,
    times: &[f64],
    angles: usize,
) -> Result<Vec<FrameState>> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("checkpoint times must be sorted"));
    }
    let half = traj.horizon / 2.0;
    let eps = 1e-9 * traj.horizon;
    let mut out = Vec::new();
    for (stage, lo, hi) in [(Stage::Climb, 0.0, half), (Stage::Run, half, traj.horizon)] {
        let wanted: Vec<f64> = times
            .iter()
            .copied()
            .filter(|t| *t >= lo - eps && *t <= hi + eps)
            .collect();
        if wanted.is_empty() {
            continue;
        }
        let seed = seeds.get(stage);
        let mut marcher = Marcher::new(seed, traj, lo, hi)?;
        let mut vp = Field {
            time: lo,
            ..seed.plus.field.clone()
        };
        let mut vm = Field {
            time: lo,
            ..seed.minus.field.clone()
        };
        let cap = seed.reaction.r() - seed.reaction.alpha();
        for target in wanted {
            let target = target.clamp(lo, hi);
            while vp.time < target - eps {
                let h = marcher.dt.min(target - vp.time);
                let k = traj.eval_stage(vp.time, stage)?.frame_coeffs();
                marcher.step(&k, &mut vp, &mut vm, h);
                if (vp.time - target).abs() <= eps {
                    vp.time = target;
                    vm.time = target;
                }
            }
            check_bounds(&vp, cap, "v⁺")?;
            check_bounds(&vm, seed.reaction.alpha(), "v⁻")?;
            let margin = ordering_margin(seed, &vp, &vm, angles)?;
            out.push(FrameState {
                time: target,
                stage,
                v_plus: vp.clone(),
                v_minus: vm.clone(),
                margin,
            });
        }
    }
    Ok(out)
}

/// Maps a frame state to physical coordinates on `physical`.
pub fn assemble_w(
    traj: &Trajectory,
    seeds: &Seeds,
    state: &FrameState,
    physical: &GridSpec,
) -> Result<Field> {
    let seed = seeds.get(state.stage);
    let p = traj.eval_stage(state.time, state.stage)?;
    let alpha = seed.reaction.alpha();
    let radius = seed.radius;
    let (hx, ht) = Region::annulus(p.x, p.theta, radius).half_extent();
    if p.x - hx < physical.x_min
        || p.x + hx > physical.x_max
        || p.theta - ht < physical.theta_min
        || p.theta + ht > physical.theta_max
    {
        return Err(Error::Truncation(format!(
            "the annulus around ({:.3}, {:.3}) at t = {} leaves the physical grid",
            p.x, p.theta, state.time
        )));
    }
    let values = (0..physical.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % physical.nx, k / physical.nx);
            let (y, eta) = p.to_frame(physical.x(i), physical.theta(j));
            let rho = (y * y + eta * eta).sqrt();
            if rho < radius {
                sample(&state.v_plus, y, eta).map(|v| alpha + v)
            } else if rho <= 2.0 * radius {
                sample(&state.v_minus, y, eta).map(|v| alpha - v)
            } else {
                Ok(0.0)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Field::from_values(*physical, values, state.time)
}

/// `max (w - u)` over the grid.
pub fn domination_excess(w: &Field, u: &Field) -> Result<f64> {
    if w.spec != u.spec {
        return Err(Error::Shape("w and u live on different grids".into()));
    }
    Ok(w.values
        .iter()
        .zip(&u.values)
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Where `E₀ ∪ A₀` sits relative to the block `(-∞, 0] × [θ, (1+λ)θ]` and
/// to the block actually used as initial datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub x_right: f64,
    pub theta_low: f64,
    pub theta_high: f64,
    pub block_theta_max: f64,
    pub datum_x_edge: f64,
    /// Inside `(-∞, 0] × [θ, (1+λ)θ]`.
    pub in_block: bool,
    /// Inside `(-∞, x_edge] × [θ, (1+λ)θ]`.
    pub in_datum: bool,
}

/// Right edge `X0 + 2Λ√Θ0` of the initial annulus: the smallest block edge
/// that contains `E₀ ∪ A₀`.
pub fn enlarged_edge(params: &ModelParams) -> Result<f64> {
    let (x0, th0) = Trajectory::from_params(params)?.start();
    Ok(x0 + 2.0 * params.bump_radius * th0.sqrt())
}

/// Compares the extents directly. The θ test allows a relative slack of
/// `1e-12` because `Θ0 ± 2Λ` meets the block edges exactly when
/// `Λ = λθ/8`.
pub fn initial_inclusion(params: &ModelParams, datum_x_edge: f64) -> Result<InclusionReport> {
    let (_, th0) = Trajectory::from_params(params)?.start();
    let x_right = enlarged_edge(params)?;
    let theta_low = th0 - 2.0 * params.bump_radius;
    let theta_high = th0 + 2.0 * params.bump_radius;
    let top = params.block_theta_max();
    let slack = 1e-12 * top;
    let theta_ok = theta_low >= params.theta_min - slack && theta_high <= top + slack;
    Ok(InclusionReport {
        x_right,
        theta_low,
        theta_high,
        block_theta_max: top,
        datum_x_edge,
        in_block: theta_ok && x_right <= 0.0,
        in_datum: theta_ok && x_right <= datum_x_edge,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionConfig {
    pub params: ModelParams,
    /// Physical grid for `u` and `w`.
    pub grid: GridSpec,
    /// Right edge of the block datum for `u`.
    pub x_edge: f64,
    /// IMEX step for `u`.
    pub dt: f64,
    /// Checkpoints at multiples of this interval (must divide `T/2`).
    pub check_every: f64,
    pub steady_tol: f64,
    pub angles: usize,
}

impl SubsolutionConfig {
    /// A grid with `dθ = deta` and `dx = deta·√Θ0` (square frame cells),
    /// large enough for the annulus at every time and for the front of `u`,
    /// and the datum edge moved out to [`enlarged_edge`].
    pub fn auto(params: ModelParams, deta: f64) -> Result<Self> {
        params.validate()?;
        let traj = Trajectory::from_params(&params)?;
        let (x0, th0) = traj.start();
        let dx = deta * th0.sqrt();
        let x_edge = enlarged_edge(&params)?;
        let speed = std::f64::consts::SQRT_2 * (0.5 - params.alpha);
        let t = params.horizon;
        let theta_max = params.block_theta_max() + 1.5 * speed * t + 10.0 * deta;
        let x_min = x0 - 2.0 * params.bump_radius * th0.sqrt() - 10.0 * dx;
        let x_max = x_edge + 1.5 * speed * theta_max.sqrt() * t + 10.0 * dx;
        let nx = ((x_max - x_min) / dx).ceil() as usize + 1;
        let nt = ((theta_max - params.theta_min) / deta).ceil() as usize + 1;
        let grid = GridSpec::new(
            x_min,
            x_min + (nx - 1) as f64 * dx,
            nx,
            params.theta_min,
            params.theta_min + (nt - 1) as f64 * deta,
            nt,
        )?;
        Ok(Self {
            params,
            grid,
            x_edge,
            dt: 0.05,
            check_every: params.horizon / 8.0,
            steady_tol: 1e-8,
            angles: 64,
        })
    }

    /// Frame spacings `(dx/√Θ0, dθ)`.
    pub fn frame_spacing(&self) -> Result<(f64, f64)> {
        let (_, th0) = Trajectory::from_params(&self.params)?.start();
        Ok((self.grid.dx() / th0.sqrt(), self.grid.dtheta()))
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = self.params.problems();
        if !(self.dt > 0.0) {
            out.push(format!("dt = {} must be positive", self.dt));
        }
        if !(self.check_every > 0.0) {
            out.push("check_every must be positive".into());
        } else {
            let k = self.params.horizon / 2.0 / self.check_every;
            if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
                out.push(format!(
                    "check_every = {} must divide T/2 = {}",
                    self.check_every,
                    self.params.horizon / 2.0
                ));
            }
        }
        if !(self.steady_tol > 0.0) {
            out.push("steady_tol must be positive".into());
        }
        if self.angles == 0 {
            out.push("angles must be positive".into());
        }
        if (self.grid.theta_min - self.params.theta_min).abs() > 1e-12 * self.params.theta_min {
            out.push(format!(
                "grid theta_min {} must equal the model theta_min {}",
                self.grid.theta_min, self.params.theta_min
            ));
        }
        out
    }

    pub fn check_times(&self) -> Vec<f64> {
        let n = (self.params.horizon / self.check_every).round() as usize;
        (0..=n)
            .map(|k| (k as f64 * self.check_every).min(self.params.horizon))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub time: f64,
    pub stage: Stage,
    pub margin: f64,
    /// `max (w - u)`.
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsolutionSummary {
    pub seeds: Vec<SteadySummary>,
    pub checkpoints: Vec<Checkpoint>,
    pub inclusion: InclusionReport,
    pub min_margin: f64,
    pub max_excess: f64,
    pub run: RunSummary,
}

#[derive(Debug, Clone)]
pub struct SubsolutionOutput {
    pub summary: SubsolutionSummary,
    pub states: Vec<FrameState>,
    pub w: Vec<Field>,
    pub u: Vec<Field>,
}

/// Runs the full check: seeds, frame march, `u` from the block datum, and
/// the ordering and domination tests at every checkpoint.
pub fn run_pipeline(config: &SubsolutionConfig) -> Result<SubsolutionOutput> {
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let params = &config.params;
    let traj = Trajectory::from_params(params)?;
    let (dy, deta) = config.frame_spacing()?;
    let seeds = compute_seeds(params, dy, deta, config.steady_tol, config.angles)?;
    let times = config.check_times();
    let states = march(&traj, &seeds, &times, config.angles)?;

    let mut evolve_cfg = EvolveConfig::new(
        Scheme::Imex,
        params.horizon,
        InitialData::Indicator {
            lambda: params.lambda,
            x_edge: config.x_edge,
            amplitude: 1.0,
        },
    );
    evolve_cfg.dt = Some(config.dt);
    evolve_cfg.snapshot_every = config.check_every;
    evolve_cfg.fronts_every = config.check_every.min(0.5);
    evolve_cfg.level = params.level;
    let run = evolve::run(
        &evolve_cfg,
        config.grid,
        Reaction::CubicBistable {
            alpha: params.alpha,
        },
    )?;
    if let Some(why) = &run.summary.aborted {
        return Err(Error::Truncation(why.clone()));
    }

    let mut checkpoints = Vec::with_capacity(states.len());
    let mut w_fields = Vec::with_capacity(states.len());
    for state in &states {
        let u = run
            .snapshots
            .iter()
            .find(|s| (s.time - state.time).abs() <= 1e-9 * params.horizon)
            .ok_or_else(|| Error::Numerical(format!("no snapshot of u at t = {}", state.time)))?;
        let w = assemble_w(&traj, &seeds, state, &config.grid)?;
        checkpoints.push(Checkpoint {
            time: state.time,
            stage: state.stage,
            margin: state.margin,
            excess: domination_excess(&w, u)?,
        });
        w_fields.push(w);
    }
    let min_margin = checkpoints
        .iter()
        .map(|c| c.margin)
        .fold(f64::INFINITY, f64::min);
    let max_excess = checkpoints
        .iter()
        .map(|c| c.excess)
        .fold(f64::NEG_INFINITY, f64::max);
    let summary = SubsolutionSummary {
        seeds: [&seeds.climb, &seeds.run]
            .iter()
            .flat_map(|s| [s.plus.summary(), s.minus.summary()])
            .collect(),
        checkpoints,
        inclusion: initial_inclusion(params, config.x_edge)?,
        min_margin,
        max_excess,
        run: run.summary,
    };
    Ok(SubsolutionOutput {
        summary,
        states,
        w: w_fields,
        u: run.snapshots,
    })
}
