//! Run configuration: a TOML file with one section per concern, plus
//! `--key value` overrides from the command line.
//!
//! Every key has a default, so an empty file (or no file) is a valid
//! configuration. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use phasefront::evolve::{EvolveConfig, InitialData, Scheme};
use phasefront::steady::SteadyProblem;
use phasefront::subsolution::{enlarged_edge, SubsolutionConfig};
use phasefront::{Error, GridSpec, ModelParams, ModifiedBistable, Reaction, Result};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: f64,
    pub theta_min: f64,
    pub lambda: f64,
    /// Cap of the second-leg nonlinearity; default `(1 + max(m, 2α))/2`.
    pub r: Option<f64>,
    pub traj_speed: f64,
    /// Bump radius `Λ`; default `λθ/8`.
    pub bump_radius: Option<f64>,
    pub horizon: f64,
    /// Tracked level `m`.
    pub level: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            theta_min: 1.0,
            lambda: 15.0,
            r: None,
            traj_speed: 0.05,
            bump_radius: None,
            horizon: 40.0,
            level: 0.5,
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            alpha: self.alpha,
            theta_min: self.theta_min,
            lambda: self.lambda,
            r: self
                .r
                .unwrap_or_else(|| ModelParams::default_r(self.alpha, self.level)),
            traj_speed: self.traj_speed,
            bump_radius: self
                .bump_radius
                .unwrap_or(self.lambda * self.theta_min / 8.0),
            horizon: self.horizon,
            level: self.level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    /// The lower trait edge is `model.theta_min`.
    pub theta_max: f64,
    pub ntheta: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            x_min: -50.0,
            x_max: 450.0,
            nx: 1024,
            theta_max: 100.0,
            ntheta: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionKind {
    Bistable,
    Modified,
    Kpp,
    Nonlocal,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Indicator,
    Smoothed,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    pub reaction: ReactionKind,
    pub scheme: Scheme,
    /// Step; default 0.05 for IMEX, the CFL step for explicit Euler.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub snapshot_every: f64,
    pub fronts_every: f64,
    pub initial: InitialKind,
    /// Ramp width for `initial = "smoothed"`.
    pub smooth_width: f64,
    /// Snapshot file for `initial = "file"`.
    pub initial_file: Option<PathBuf>,
    /// Right edge of the block datum.
    pub x_edge: f64,
    /// Height of the block; default 1, or `1/(λθ)` for the nonlocal model.
    pub amplitude: Option<f64>,
    pub freeze_trait: bool,
    pub abort_cells: usize,
    pub fit_window: f64,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            reaction: ReactionKind::Bistable,
            scheme: Scheme::Imex,
            dt: None,
            t_end: 120.0,
            snapshot_every: 30.0,
            fronts_every: 0.5,
            initial: InitialKind::Indicator,
            smooth_width: 1.0,
            initial_file: None,
            x_edge: 0.0,
            amplitude: None,
            freeze_trait: false,
            abort_cells: 5,
            fit_window: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadySection {
    /// Disc radius `Λ`.
    pub radius: f64,
    /// Constant drifts `c∞` to solve for.
    pub drifts: Vec<[f64; 2]>,
    pub spacing: f64,
    pub tol: f64,
    pub max_steps: usize,
    pub epsilon: f64,
    pub angles: usize,
}

impl Default for SteadySection {
    fn default() -> Self {
        Self {
            radius: 40.0,
            drifts: vec![[0.0, 0.0]],
            spacing: 0.5,
            tol: 1e-8,
            max_steps: 1_000_000,
            epsilon: 0.05,
            angles: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsolutionSection {
    /// Trait spacing; `dx = dθ·√Θ0` so that frame cells are square.
    pub dtheta: f64,
    pub dt: f64,
    /// Checkpoint interval; default `T/8`.
    pub check_every: Option<f64>,
    /// Right edge of the block datum; default `X0 + 2Λ√Θ0`, the smallest
    /// edge containing the initial annulus.
    pub x_edge: Option<f64>,
    pub tol: f64,
    pub angles: usize,
    /// Largest `max(w - u)` accepted as domination.
    pub excess_tol: f64,
}

impl Default for SubsolutionSection {
    fn default() -> Self {
        Self {
            dtheta: 0.4,
            dt: 0.05,
            check_every: None,
            x_edge: None,
            tol: 1e-8,
            angles: 64,
            excess_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub run: Option<PathBuf>,
    /// Level of the fronts in `fronts.csv`; default: the level recorded in
    /// the run's summary.
    pub m: Option<f64>,
    pub window: f64,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            run: None,
            m: None,
            window: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub steps: usize,
    pub repeats: usize,
    /// Worker counts compared for determinism; 0 means all cores.
    pub workers: Vec<usize>,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            steps: 20,
            repeats: 3,
            workers: vec![1, 0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub model: ModelSection,
    pub grid: GridSection,
    pub evolve: EvolveSection,
    pub steady: SteadySection,
    pub subsolution: SubsolutionSection,
    pub analyze: AnalyzeSection,
    pub bench: BenchSection,
}

/// Short names accepted on the command line.
const ALIASES: &[(&str, &str)] = &[
    ("lambda-cap", "steady.radius"),
    ("m", "model.level"),
    ("level", "model.level"),
    ("t-end", "evolve.t_end"),
    ("reaction", "evolve.reaction"),
    ("scheme", "evolve.scheme"),
    ("dt", "evolve.dt"),
    ("alpha", "model.alpha"),
    ("r", "model.r"),
    ("lambda", "model.lambda"),
    ("run", "analyze.run"),
    ("window", "analyze.window"),
    ("out", "out"),
];

const SECTIONS: &[&str] = &[
    "model",
    "grid",
    "evolve",
    "steady",
    "subsolution",
    "analyze",
    "bench",
];

fn default_table() -> Table {
    Table::try_from(RunConfig::default()).expect("defaults serialize")
}

/// Resolves a command-line key to a `section.key` path.
fn resolve_key(key: &str) -> Result<Vec<String>> {
    if let Some((_, path)) = ALIASES.iter().find(|(a, _)| *a == key) {
        return Ok(path.split('.').map(String::from).collect());
    }
    let key = key.replace('-', "_");
    if let Some((section, field)) = key.split_once('.') {
        return Ok(vec![section.to_string(), field.to_string()]);
    }
    let defaults = default_table();
    let mut hits: Vec<&str> = SECTIONS
        .iter()
        .copied()
        .filter(|s| {
            defaults
                .get(*s)
                .and_then(Value::as_table)
                .is_some_and(|t| t.contains_key(&key))
        })
        .collect();
    // Optional fields are absent from the serialized defaults.
    for (section, field) in [
        ("model", "r"),
        ("model", "bump_radius"),
        ("evolve", "dt"),
        ("evolve", "initial_file"),
        ("evolve", "amplitude"),
        ("subsolution", "check_every"),
        ("subsolution", "x_edge"),
        ("analyze", "m"),
    ] {
        if field == key && !hits.contains(&section) {
            hits.push(section);
        }
    }
    match hits.as_slice() {
        [one] => Ok(vec![one.to_string(), key]),
        [] => Err(Error::config(format!("unknown option --{key}"))),
        many => Err(Error::config(format!(
            "--{key} is ambiguous; use one of {}",
            many.iter()
                .map(|s| format!("--{s}.{key}"))
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}

/// Reads a command-line value as a TOML value: numbers, booleans and
/// arrays are recognised, anything else is a string.
fn parse_value(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Splits `--key value` / `--key=value` pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::config(format!("expected --key value, got '{arg}'")))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else {
            let v = it
                .next()
                .ok_or_else(|| Error::config(format!("--{key} needs a value")))?;
            out.push((key.to_string(), v.clone()));
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Loads the file (if any) and applies the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::config(format!("cannot read config {}: {e}", p.display()))
                })?;
                text.parse::<Table>()
                    .map_err(|e| Error::config(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        let mut problems = Vec::new();
        for (key, raw) in overrides {
            match resolve_key(key) {
                Ok(path) => {
                    let value = parse_value(raw);
                    if path.len() == 1 {
                        table.insert(path[0].clone(), value);
                    } else {
                        let section = table
                            .entry(path[0].clone())
                            .or_insert_with(|| Value::Table(Table::new()));
                        match section.as_table_mut() {
                            Some(t) => {
                                t.insert(path[1].clone(), value);
                            }
                            None => problems.push(format!("'{}' is not a section", path[0])),
                        }
                    }
                }
                Err(Error::Config(p)) => problems.extend(p),
                Err(e) => problems.push(e.to_string()),
            }
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let g = &self.grid;
        GridSpec::new(
            g.x_min,
            g.x_max,
            g.nx,
            self.model.theta_min,
            g.theta_max,
            g.ntheta,
        )
    }

    pub fn reaction(&self) -> Result<Reaction> {
        let m = &self.model;
        Ok(match self.evolve.reaction {
            ReactionKind::Bistable => Reaction::CubicBistable { alpha: m.alpha },
            ReactionKind::Modified => {
                Reaction::ModifiedBistable(ModifiedBistable::new(m.alpha, m.params().r)?)
            }
            ReactionKind::Kpp => Reaction::KppMonostable,
            ReactionKind::Nonlocal => Reaction::NonlocalBistableRate { alpha: m.alpha },
            ReactionKind::None => Reaction::Inert,
        })
    }

    /// Checks the parameters `simulate` and `bench` use.
    fn model_basics(&self) -> Vec<String> {
        // Only the trajectory-specific checks are irrelevant here.
        let mut p = self.model.params();
        p.bump_radius = p.bump_radius.min(p.lambda * p.theta_min / 8.0);
        p.problems()
    }

    pub fn evolve_config(&self) -> Result<EvolveConfig> {
        let e = &self.evolve;
        let m = &self.model;
        let mut problems = self.model_basics();
        let amplitude = e
            .amplitude
            .unwrap_or(if e.reaction == ReactionKind::Nonlocal {
                1.0 / (m.lambda * m.theta_min)
            } else {
                1.0
            });
        let initial = match e.initial {
            InitialKind::Indicator => InitialData::Indicator {
                lambda: m.lambda,
                x_edge: e.x_edge,
                amplitude,
            },
            InitialKind::Smoothed => InitialData::Smoothed {
                lambda: m.lambda,
                width: e.smooth_width,
                x_edge: e.x_edge,
                amplitude,
            },
            InitialKind::File => match &e.initial_file {
                Some(path) => InitialData::Field(phasefront::io::read_snapshot(path)?),
                None => {
                    problems.push("initial = \"file\" needs evolve.initial_file".into());
                    InitialData::Constant { value: 0.0 }
                }
            },
        };
        let mut cfg = EvolveConfig::new(e.scheme, e.t_end, initial);
        cfg.dt = e.dt.or(match e.scheme {
            Scheme::Imex => Some(0.05),
            Scheme::ExplicitEuler => None,
        });
        cfg.snapshot_every = e.snapshot_every;
        cfg.fronts_every = e.fronts_every;
        cfg.level = m.level;
        cfg.freeze_trait = e.freeze_trait;
        cfg.abort_cells = e.abort_cells;
        cfg.fit_window = e.fit_window;
        problems.extend(cfg.problems());
        if let Err(Error::Config(p)) = self.grid() {
            problems.extend(p);
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems))
        }
    }

    /// One problem pair (disc, annulus) per configured drift.
    pub fn steady_problems(&self) -> Result<Vec<(SteadyProblem, SteadyProblem)>> {
        let s = &self.steady;
        let f = ModifiedBistable::new(self.model.alpha, self.model.params().r)?;
        if s.drifts.is_empty() {
            return Err(Error::config("steady.drifts must list at least one drift"));
        }
        s.drifts
            .iter()
            .map(|&drift| {
                let mut disc = SteadyProblem::disc(s.radius, drift, f, s.spacing)?;
                let mut ring = SteadyProblem::annulus(s.radius, drift, f, s.spacing)?;
                for p in [&mut disc, &mut ring] {
                    p.tol = s.tol;
                    p.max_steps = s.max_steps;
                    p.epsilon = s.epsilon;
                    p.angles = s.angles;
                }
                Ok((disc, ring))
            })
            .collect()
    }

    pub fn subsolution_config(&self) -> Result<SubsolutionConfig> {
        let params = self.model.params();
        params.validate()?;
        let s = &self.subsolution;
        let mut cfg = SubsolutionConfig::auto(params, s.dtheta)?;
        cfg.dt = s.dt;
        if let Some(every) = s.check_every {
            cfg.check_every = every;
        }
        cfg.x_edge = match s.x_edge {
            Some(x) => x,
            None => enlarged_edge(&params)?,
        };
        cfg.steady_tol = s.tol;
        cfg.angles = s.angles;
        let problems = cfg.problems();
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems))
        }
    }
}
