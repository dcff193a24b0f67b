//! Time integration of the Cauchy problems.
//!
//! Two schemes are offered. Forward Euler on [`rhs_local`] is the reference;
//! it needs `dt ≤ cfl_dt`. The IMEX scheme is a Strang splitting
//! reaction(½) → x-lines → θ-lines → reaction(½) where each diffusion half is
//! a backward-Euler tridiagonal solve and each reaction half is one Heun
//! (SSP-RK2) step. Backward Euler is chosen over Crank–Nicolson because it is
//! monotone for every `dt`, so discrete solutions keep the comparison
//! principle the analysis relies on.
//!
//! [`rhs_local`]: crate::operators::rhs_local

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fronts::{FitOptions, FrontSeries};
use crate::grid::{integrate_theta, Field, GridSpec};
use crate::linalg::{solve_columns_parallel, NeumannFactor};
use crate::model::Reaction;
use crate::operators::{cfl_dt, local_rhs_into};

/// Slack allowed outside the invariant range before a step is rejected.
pub const RANGE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExplicitEuler,
    Imex,
}

/// Initial data. Block data occupies `x ≤ x_edge, θ ≤ (1+λ)θ_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    /// `amplitude` inside the block, half of it on the block edges, 0 outside.
    Indicator {
        lambda: f64,
        x_edge: f64,
        amplitude: f64,
    },
    /// Product of linear ramps of the given width across both block edges.
    Smoothed {
        lambda: f64,
        width: f64,
        x_edge: f64,
        amplitude: f64,
    },
    Constant {
        value: f64,
    },
    /// Explicit data, e.g. read from a snapshot file. Not serialized.
    #[serde(skip)]
    Field(Field),
}

impl InitialData {
    pub fn indicator(lambda: f64) -> Self {
        InitialData::Indicator {
            lambda,
            x_edge: 0.0,
            amplitude: 1.0,
        }
    }

    pub fn build(&self, spec: &GridSpec) -> Result<Field> {
        let theta_min = spec.theta_min;
        match self {
            InitialData::Indicator {
                lambda,
                x_edge,
                amplitude,
            } => {
                let top = (1.0 + lambda) * theta_min;
                let tol_x = 1e-9 * spec.dx();
                let tol_t = 1e-9 * spec.dtheta();
                Ok(Field::from_fn(*spec, |x, t| {
                    if x > x_edge + tol_x || t > top + tol_t {
                        0.0
                    } else if (x - x_edge).abs() <= tol_x || (t - top).abs() <= tol_t {
                        0.5 * amplitude
                    } else {
                        *amplitude
                    }
                }))
            }
            InitialData::Smoothed {
                lambda,
                width,
                x_edge,
                amplitude,
            } => {
                if !(*width > 0.0) {
                    return Err(Error::config("smoothing width must be positive"));
                }
                let top = (1.0 + lambda) * theta_min;
                let ramp = |d: f64| (d / width + 0.5).clamp(0.0, 1.0);
                Ok(Field::from_fn(*spec, |x, t| {
                    amplitude * ramp(x_edge - x) * ramp(top - t)
                }))
            }
            InitialData::Constant { value } => Ok(Field::from_fn(*spec, |_, _| *value)),
            InitialData::Field(f) => {
                if f.spec != *spec {
                    return Err(Error::Shape(
                        "initial field does not match the run grid".into(),
                    ));
                }
                Ok(Field {
                    time: 0.0,
                    ..f.clone()
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub scheme: Scheme,
    /// Time step. `None` selects `cfl_dt` for the explicit scheme and 0.01
    /// for IMEX.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Snapshots are taken at multiples of this interval and at `t_end`.
    pub snapshot_every: f64,
    /// Fronts are sampled at multiples of this interval.
    pub fronts_every: f64,
    /// Level `m` of the tracked fronts.
    pub level: f64,
    pub initial: InitialData,
    /// Freeze the trait at `theta_min`: `u_t = θ_min u_xx + f(u)` row by row.
    pub freeze_trait: bool,
    /// Abort when a front comes within this many cells of `x_max` or `θ_max`;
    /// 0 disables the check (e.g. for spatially homogeneous data).
    pub abort_cells: usize,
    /// Late fraction of the run used by the exponent fits.
    pub fit_window: f64,
}

impl EvolveConfig {
    pub fn new(scheme: Scheme, t_end: f64, initial: InitialData) -> Self {
        Self {
            scheme,
            dt: None,
            t_end,
            snapshot_every: 30.0,
            fronts_every: 0.5,
            level: 0.5,
            initial,
            freeze_trait: false,
            abort_cells: 5,
            fit_window: 0.5,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                out.push(format!("dt = {dt} must be positive"));
            }
            if self.snapshot_every < dt {
                out.push(format!(
                    "snapshot_every = {} is below dt = {dt}",
                    self.snapshot_every
                ));
            }
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            out.push(format!(
                "t_end = {} must be finite and non-negative",
                self.t_end
            ));
        }
        if !(self.snapshot_every > 0.0) {
            out.push("snapshot_every must be positive".into());
        }
        if !(self.fronts_every > 0.0) {
            out.push("fronts_every must be positive".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            out.push(format!("level m = {} not in (0, 1)", self.level));
        }
        if !(self.fit_window > 0.0 && self.fit_window <= 1.0) {
            out.push(format!("fit_window = {} not in (0, 1]", self.fit_window));
        }
        out
    }
}

/// Wall-clock seconds spent per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub reaction: f64,
    pub x_lines: f64,
    pub theta_lines: f64,
    pub explicit: f64,
    pub fronts: f64,
    pub total: f64,
}

/// Advances one field in time, caching line factorizations per step size.
pub struct Integrator {
    spec: GridSpec,
    reaction: Reaction,
    freeze_trait: bool,
    x_factors: HashMap<u64, Vec<NeumannFactor>>,
    theta_factors: HashMap<u64, NeumannFactor>,
    scratch: Vec<f64>,
    lower: f64,
    upper: f64,
    pub timings: PhaseTimings,
}

impl Integrator {
    /// `initial` fixes the invariant range the steps are checked against.
    pub fn new(spec: GridSpec, reaction: Reaction, freeze_trait: bool, initial: &Field) -> Self {
        let (lo, hi) = (initial.min(), initial.max());
        let (lower, upper) = match reaction {
            Reaction::Inert => (lo, hi),
            Reaction::NonlocalBistableRate { .. } => (lo.min(0.0), f64::INFINITY),
            _ => (lo.min(0.0), hi.max(1.0)),
        };
        Self {
            spec,
            reaction,
            freeze_trait,
            x_factors: HashMap::new(),
            theta_factors: HashMap::new(),
            scratch: vec![0.0; spec.len()],
            lower,
            upper,
            timings: PhaseTimings::default(),
        }
    }

    fn x_diffusivity(&self, j: usize) -> f64 {
        if self.freeze_trait {
            self.spec.theta_min
        } else {
            self.spec.theta(j)
        }
    }

    pub fn cfl(&self) -> f64 {
        let theta_max = if self.freeze_trait {
            self.spec.theta_min
        } else {
            self.spec.theta_max
        };
        if self.freeze_trait {
            let dx = self.spec.dx();
            0.9 / (2.0 * theta_max / (dx * dx) + self.reaction.lipschitz())
        } else {
            cfl_dt(&self.spec, theta_max, &self.reaction)
        }
    }

    fn check_range(&self, values: &[f64]) -> Result<()> {
        let (lo, hi) = (self.lower - RANGE_EPS, self.upper + RANGE_EPS);
        match values.iter().position(|v| !(*v >= lo && *v <= hi)) {
            None => Ok(()),
            Some(k) => Err(Error::Numerical(format!(
                "value {} at flat index {k} left the invariant range [{}, {}]; the step is unstable",
                values[k], self.lower, self.upper
            ))),
        }
    }

    pub fn step_explicit(&mut self, u: &mut Field, dt: f64) -> Result<()> {
        let cfl = self.cfl();
        if !(dt > 0.0) || dt > cfl * (1.0 + 1e-12) {
            return Err(Error::Numerical(format!(
                "explicit step {dt} violates the CFL limit {cfl}"
            )));
        }
        let clock = Instant::now();
        let rho = self.reaction.is_nonlocal().then(|| integrate_theta(u));
        local_rhs_into(
            &self.spec,
            &u.values,
            &self.reaction,
            rho.as_deref(),
            self.freeze_trait,
            &mut self.scratch,
        );
        u.values
            .par_iter_mut()
            .zip(self.scratch.par_iter())
            .for_each(|(v, r)| *v += dt * r);
        u.time += dt;
        self.timings.explicit += clock.elapsed().as_secs_f64();
        self.check_range(&u.values)
    }

    pub fn step_imex(&mut self, u: &mut Field, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Numerical(format!("IMEX step {dt} must be positive")));
        }
        self.reaction_half(u, 0.5 * dt);

        let clock = Instant::now();
        let nx = self.spec.nx;
        let key = dt.to_bits();
        if !self.x_factors.contains_key(&key) {
            let idx2 = 1.0 / (self.spec.dx() * self.spec.dx());
            let rows: Vec<_> = (0..self.spec.ntheta)
                .map(|j| NeumannFactor::new(nx, dt * self.x_diffusivity(j) * idx2))
                .collect();
            self.x_factors.insert(key, rows);
        }
        let rows = &self.x_factors[&key];
        u.values
            .par_chunks_mut(nx)
            .zip(rows.par_iter())
            .for_each(|(row, f)| f.solve(row));
        self.timings.x_lines += clock.elapsed().as_secs_f64();

        if !self.freeze_trait {
            let clock = Instant::now();
            let idt2 = 1.0 / (self.spec.dtheta() * self.spec.dtheta());
            let nt = self.spec.ntheta;
            let factor = self
                .theta_factors
                .entry(key)
                .or_insert_with(|| NeumannFactor::new(nt, dt * idt2));
            solve_columns_parallel(factor, &mut u.values, nx);
            self.timings.theta_lines += clock.elapsed().as_secs_f64();
        }

        self.reaction_half(u, 0.5 * dt);
        u.time += dt;
        self.check_range(&u.values)
    }

    /// One Heun step of the pointwise reaction ODE.
    fn reaction_half(&mut self, u: &mut Field, h: f64) {
        let clock = Instant::now();
        let f = self.reaction;
        match f {
            Reaction::Inert => {}
            Reaction::NonlocalBistableRate { .. } => {
                let nx = self.spec.nx;
                let rho = integrate_theta(u);
                // Predictor in scratch, then corrector in place.
                self.scratch
                    .par_chunks_mut(nx)
                    .zip(u.values.par_chunks(nx))
                    .for_each(|(pred, row)| {
                        for ((p, n), r) in pred.iter_mut().zip(row).zip(&rho) {
                            *p = n + h * n * f.eval(*r);
                        }
                    });
                let pred = Field {
                    spec: self.spec,
                    values: std::mem::take(&mut self.scratch),
                    time: u.time,
                };
                let rho_star = integrate_theta(&pred);
                u.values
                    .par_chunks_mut(nx)
                    .zip(pred.values.par_chunks(nx))
                    .for_each(|(row, prow)| {
                        for (((n, p), r), rs) in row.iter_mut().zip(prow).zip(&rho).zip(&rho_star) {
                            *n += 0.5 * h * (*n * f.eval(*r) + p * f.eval(*rs));
                        }
                    });
                self.scratch = pred.values;
            }
            _ => {
                u.values.par_iter_mut().for_each(|v| {
                    let k1 = f.eval(*v);
                    let k2 = f.eval(*v + h * k1);
                    *v += 0.5 * h * (k1 + k2);
                });
            }
        }
        self.timings.reaction += clock.elapsed().as_secs_f64();
    }

    pub fn step(&mut self, scheme: Scheme, u: &mut Field, dt: f64) -> Result<()> {
        match scheme {
            Scheme::ExplicitEuler => self.step_explicit(u, dt),
            Scheme::Imex => self.step_imex(u, dt),
        }
    }
}

/// One forward-Euler step of `u_t = θ u_xx + u_θθ + f`.
pub fn step_explicit(state: &Field, reaction: &Reaction, dt: f64) -> Result<Field> {
    let mut u = state.clone();
    Integrator::new(state.spec, *reaction, false, state).step_explicit(&mut u, dt)?;
    Ok(u)
}

/// One Strang-split IMEX step of `u_t = θ u_xx + u_θθ + f`.
pub fn step_imex(state: &Field, reaction: &Reaction, dt: f64) -> Result<Field> {
    let mut u = state.clone();
    Integrator::new(state.spec, *reaction, false, state).step_imex(&mut u, dt)?;
    Ok(u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scheme: Scheme,
    pub reaction: String,
    pub dt: f64,
    pub steps: usize,
    pub final_time: f64,
    pub cells: usize,
    /// Set when the run stopped early because a front neared the box edge.
    pub aborted: Option<String>,
    pub timings: PhaseTimings,
    pub final_checksum: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub snapshots: Vec<Field>,
    /// `ρ(x)` at every snapshot (nonlocal runs only).
    pub densities: Vec<Vec<f64>>,
    pub fronts: FrontSeries,
    pub summary: RunSummary,
}

/// Largest θ at which any column crosses (or still exceeds) level `m`.
fn level_theta_reach(u: &Field, m: f64) -> f64 {
    let s = &u.spec;
    let mut best = f64::NEG_INFINITY;
    for j in (0..s.ntheta).rev() {
        if u.row(j).iter().any(|v| *v >= m) {
            best = s.theta(j);
            break;
        }
    }
    best
}

fn event_times(every: f64, t_end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * every;
        if t > t_end * (1.0 + 1e-12) + 1e-12 {
            break;
        }
        out.push(t.min(t_end));
        k += 1;
    }
    if out
        .last()
        .is_none_or(|t| (t_end - t) > 1e-9 * every.max(t_end))
    {
        out.push(t_end);
    }
    out
}

/// Integrates from the initial data to `t_end`.
///
/// Snapshots land exactly on their times: the step before an event is
/// shortened when needed. For the nonlocal model the tracked quantity is the
/// density `ρ`; the truncation check on `n` uses the level `m` times the
/// initial peak.
pub fn run(config: &EvolveConfig, spec: GridSpec, reaction: Reaction) -> Result<RunOutput> {
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    if config.freeze_trait && reaction.is_nonlocal() {
        return Err(Error::config(
            "freeze_trait is only meaningful for local reactions",
        ));
    }
    let started = Instant::now();
    let mut u = config.initial.build(&spec)?;
    let mut integ = Integrator::new(spec, reaction, config.freeze_trait, &u);
    let dt = match (config.dt, config.scheme) {
        (Some(dt), _) => dt,
        (None, Scheme::ExplicitEuler) => integ.cfl(),
        (None, Scheme::Imex) => 0.01,
    };
    if config.scheme == Scheme::ExplicitEuler && dt > integ.cfl() * (1.0 + 1e-12) {
        return Err(Error::config(format!(
            "explicit dt = {dt} exceeds the CFL limit {}",
            integ.cfl()
        )));
    }

    let nonlocal = reaction.is_nonlocal();
    let field_level = if nonlocal {
        config.level * u.max()
    } else {
        config.level
    };
    let mut fronts = FrontSeries::new(config.level);
    let mut snapshots = Vec::new();
    let mut densities = Vec::new();

    let mut snaps = event_times(config.snapshot_every, config.t_end);
    let mut samples = event_times(config.fronts_every, config.t_end);
    snaps.reverse();
    samples.reverse();

    let x_limit = spec.x_max - config.abort_cells as f64 * spec.dx();
    let theta_limit = spec.theta_max - config.abort_cells as f64 * spec.dtheta();
    let mut aborted = None;
    let mut steps = 0usize;

    loop {
        let take_snap = snaps
            .last()
            .is_some_and(|t| (t - u.time).abs() <= 1e-9 * dt);
        let take_sample = samples
            .last()
            .is_some_and(|t| (t - u.time).abs() <= 1e-9 * dt);
        if take_snap || take_sample {
            let clock = Instant::now();
            let rho = nonlocal.then(|| integrate_theta(&u));
            if take_snap {
                snaps.pop();
                snapshots.push(u.clone());
                if let Some(r) = &rho {
                    densities.push(r.clone());
                }
            }
            if take_sample {
                samples.pop();
                if nonlocal {
                    let mut scaled = FrontSeries::new(field_level);
                    scaled.push(&u, None);
                    fronts.times.push(u.time);
                    fronts.front_x.push(scaled.front_x[0]);
                    fronts.front_theta.push(scaled.front_theta[0]);
                    let f = crate::fronts::profile_front(
                        &spec,
                        rho.as_deref().unwrap_or(&[]),
                        config.level,
                    );
                    fronts.front_rho.get_or_insert_with(Vec::new).push(f);
                } else {
                    fronts.push(&u, None);
                }
                let fx = if nonlocal {
                    fronts
                        .front_rho
                        .as_ref()
                        .and_then(|r| r.last().copied())
                        .unwrap_or(f64::NEG_INFINITY)
                } else {
                    *fronts.front_x.last().unwrap_or(&f64::NEG_INFINITY)
                };
                let check = config.abort_cells > 0;
                if check && fx >= x_limit {
                    aborted = Some(format!(
                        "front at x = {fx:.3} is within {} cells of x_max = {} at t = {:.3}",
                        config.abort_cells, spec.x_max, u.time
                    ));
                }
                if check && !config.freeze_trait && aborted.is_none() {
                    let reach = level_theta_reach(&u, field_level);
                    if reach >= theta_limit {
                        aborted = Some(format!(
                            "level set reaches θ = {reach:.3}, within {} cells of theta_max = {} at t = {:.3}",
                            config.abort_cells, spec.theta_max, u.time
                        ));
                    }
                }
            }
            integ.timings.fronts += clock.elapsed().as_secs_f64();
        }
        if aborted.is_some() || u.time >= config.t_end - 1e-9 * dt {
            break;
        }
        let next = snaps
            .last()
            .copied()
            .unwrap_or(f64::INFINITY)
            .min(samples.last().copied().unwrap_or(f64::INFINITY))
            .min(config.t_end);
        let remaining = next - u.time;
        let h = if remaining <= dt * (1.0 + 1e-9) {
            remaining
        } else {
            dt
        };
        integ.step(config.scheme, &mut u, h)?;
        if (u.time - next).abs() <= 1e-9 * dt {
            u.time = next;
        }
        steps += 1;
    }
    if aborted.is_some() && snapshots.last().is_none_or(|s| s.time < u.time) {
        snapshots.push(u.clone());
        if nonlocal {
            densities.push(integrate_theta(&u));
        }
    }

    let x_opts = FitOptions {
        window: config.fit_window,
        min_position: 10.0 * spec.dx(),
    };
    let theta_opts = FitOptions {
        window: config.fit_window,
        min_position: 10.0 * spec.dtheta(),
    };
    fronts.fit(x_opts, theta_opts);
    integ.timings.total = started.elapsed().as_secs_f64();
    let summary = RunSummary {
        scheme: config.scheme,
        reaction: reaction.name().to_string(),
        dt,
        steps,
        final_time: u.time,
        cells: spec.len(),
        aborted,
        timings: integ.timings,
        final_checksum: u.checksum(),
    };
    Ok(RunOutput {
        snapshots,
        densities,
        fronts,
        summary,
    })
}
