//! Level-set fronts and power-law fits of their motion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

/// Rightmost downward crossing of level `m` in a sampled profile.
///
/// Returns the interpolated coordinate, `hi` if the last sample is still at
/// or above `m`, and `-∞` if no sample reaches `m`.
fn rightmost_crossing(
    values: impl Iterator<Item = f64> + Clone,
    lo: f64,
    h: f64,
    hi: f64,
    m: f64,
) -> f64 {
    let n = values.clone().count();
    let mut last = None;
    let mut prev: Option<f64> = None;
    for (k, v) in values.enumerate() {
        if let Some(p) = prev {
            if p >= m && v < m {
                last = Some(lo + h * ((k - 1) as f64 + (p - m) / (p - v)));
            }
        }
        if k + 1 == n && v >= m {
            return hi;
        }
        prev = Some(v);
    }
    last.unwrap_or(f64::NEG_INFINITY)
}

/// `max{x : u(x, θ) = m}` over all θ-rows.
pub fn front_x(field: &Field, m: f64) -> f64 {
    let s = &field.spec;
    (0..s.ntheta)
        .map(|j| {
            let row = field.row(j);
            rightmost_crossing(row.iter().copied(), s.x_min, s.dx(), s.x_max, m)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest θ at which some column with `x ≤ 0` crosses level `m`.
pub fn front_theta(field: &Field, m: f64) -> f64 {
    let s = &field.spec;
    (0..s.nx)
        .filter(|&i| s.x(i) <= 0.0)
        .map(|i| {
            let col = (0..s.ntheta).map(move |j| field.at(i, j));
            rightmost_crossing(col, s.theta_min, s.dtheta(), s.theta_max, m)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Rightmost crossing of a per-column profile such as the density `ρ(x)`.
pub fn profile_front(spec: &GridSpec, profile: &[f64], m: f64) -> f64 {
    rightmost_crossing(
        profile.iter().copied(),
        spec.x_min,
        spec.dx(),
        spec.x_max,
        m,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Fraction of the time axis, counted from the end, used for the fit.
    pub window: f64,
    /// Samples at or below this position are discarded.
    pub min_position: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            window: 0.5,
            min_position: 0.0,
        }
    }
}

/// Result of fitting `x ≈ A t^p` in log–log coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub p: f64,
    pub a: f64,
    /// RMS residual of the log–log fit.
    pub residual: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 8;

/// Least squares of `log x` against `log t` over the late part of a series.
pub fn fit_exponent(times: &[f64], positions: &[f64], opts: FitOptions) -> Result<PowerFit> {
    if times.len() != positions.len() {
        return Err(Error::Shape(format!(
            "{} times but {} positions",
            times.len(),
            positions.len()
        )));
    }
    if !(opts.window > 0.0 && opts.window <= 1.0) {
        return Err(Error::config(format!(
            "fit window {} not in (0, 1]",
            opts.window
        )));
    }
    let t_last = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t_first = times.iter().copied().fold(f64::INFINITY, f64::min);
    let cut = t_last - opts.window * (t_last - t_first);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(positions)
        .filter(|(t, x)| {
            **t >= cut && **t > 0.0 && x.is_finite() && **x > opts.min_position.max(0.0)
        })
        .map(|(t, x)| (t.ln(), x.ln()))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::Numerical(format!(
            "only {} usable samples in the fit window (need {MIN_FIT_SAMPLES} with positive position)",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxx, sxy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (x - mx), b + (x - mx) * (y - my))
    });
    if sxx <= 0.0 {
        return Err(Error::Numerical("fit window spans a single time".into()));
    }
    let p = sxy / sxx;
    let c = my - p * mx;
    let residual = (pts
        .iter()
        .map(|(x, y)| (y - c - p * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PowerFit {
        p,
        a: c.exp(),
        residual,
        t_start: pts[0].0.exp(),
        t_end: pts[pts.len() - 1].0.exp(),
        samples: pts.len(),
    })
}

/// Front positions over time plus their fits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontSeries {
    pub level: f64,
    pub times: Vec<f64>,
    pub front_x: Vec<f64>,
    pub front_theta: Vec<f64>,
    /// Front of the density `ρ = ∫ n dθ` (nonlocal runs only).
    pub front_rho: Option<Vec<f64>>,
    pub fit_x: Option<PowerFit>,
    /// Fit of the θ-front displacement from its initial position.
    pub fit_theta: Option<PowerFit>,
    pub fit_rho: Option<PowerFit>,
    /// `front_x(T) / T^{3/2}` at the last sample.
    pub gamma_hat: Option<f64>,
}

impl FrontSeries {
    pub fn new(level: f64) -> Self {
        Self {
            level,
            ..Self::default()
        }
    }

    pub fn push(&mut self, field: &Field, rho: Option<&[f64]>) {
        if let Some(last) = self.times.last() {
            assert!(
                field.time > *last,
                "front samples must have increasing times"
            );
        }
        self.times.push(field.time);
        self.front_x.push(front_x(field, self.level));
        self.front_theta.push(front_theta(field, self.level));
        if let Some(rho) = rho {
            let f = profile_front(&field.spec, rho, self.level);
            self.front_rho.get_or_insert_with(Vec::new).push(f);
        }
    }

    /// Fits every tracked front. Failures leave the corresponding fit empty.
    pub fn fit(&mut self, x_opts: FitOptions, theta_opts: FitOptions) {
        self.fit_x = fit_exponent(&self.times, &self.front_x, x_opts).ok();
        self.fit_rho = self
            .front_rho
            .as_ref()
            .and_then(|r| fit_exponent(&self.times, r, x_opts).ok());
        let disp = self.theta_displacement();
        self.fit_theta = fit_exponent(&self.times, &disp, theta_opts).ok();
        self.gamma_hat = match (self.times.last(), self.front_x.last()) {
            (Some(&t), Some(&x)) if t > 0.0 && x.is_finite() => Some(x / t.powf(1.5)),
            _ => None,
        };
    }

    pub fn theta_displacement(&self) -> Vec<f64> {
        let start = self.front_theta.first().copied().unwrap_or(f64::NAN);
        self.front_theta.iter().map(|t| t - start).collect()
    }
}
