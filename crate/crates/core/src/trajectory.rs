//! The two-leg path along which the bump is slid.
//!
//! With `x0 = -λθ/4` and `Θ0 = (1 + 3λ/4)θ` (θ the minimal trait):
//!
//! ```text
//! t ∈ [0, T/2]:  (X, Θ) = (x0, c t + Θ0)
//! t ∈ [T/2, T]:  (X, Θ) = (x0 + c (t - T/2) T / √Θmid, Θmid),   Θmid = cT/2 + Θ0
//! ```
//!
//! The first leg climbs in trait at speed `c`; the second runs in space at
//! the speed `cT/√Θmid`, so that `X(T) ~ √(c/2) T^{3/2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameCoeffs;
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Climb,
    Run,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub x: f64,
    pub theta: f64,
    pub x_dot: f64,
    pub theta_dot: f64,
}

impl TrajectoryPoint {
    /// Frame coefficients `c1, c2, d` induced by the motion at this point.
    pub fn frame_coeffs(&self) -> FrameCoeffs {
        FrameCoeffs::from_motion(self.x_dot, self.theta, self.theta_dot)
    }

    /// `(y, η) = ((x - X)/√Θ, θ - Θ)`.
    pub fn to_frame(&self, x: f64, theta: f64) -> (f64, f64) {
        ((x - self.x) / self.theta.sqrt(), theta - self.theta)
    }

    pub fn from_frame(&self, y: f64, eta: f64) -> (f64, f64) {
        (self.x + y * self.theta.sqrt(), self.theta + eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub speed: f64,
    pub lambda: f64,
    pub theta_min: f64,
    pub horizon: f64,
}

impl Trajectory {
    pub fn new(speed: f64, lambda: f64, theta_min: f64, horizon: f64) -> Result<Self> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("c", speed),
            ("lambda", lambda),
            ("theta_min", theta_min),
            ("T", horizon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("{name} = {v} must be positive"));
            }
        }
        if bad.is_empty() {
            Ok(Self {
                speed,
                lambda,
                theta_min,
                horizon,
            })
        } else {
            Err(Error::Config(bad))
        }
    }

    pub fn from_params(p: &ModelParams) -> Result<Self> {
        Self::new(p.traj_speed, p.lambda, p.theta_min, p.horizon)
    }

    pub fn start(&self) -> (f64, f64) {
        (
            -self.lambda * self.theta_min / 4.0,
            (1.0 + 0.75 * self.lambda) * self.theta_min,
        )
    }

    /// Trait level held during the second leg.
    pub fn theta_mid(&self) -> f64 {
        self.speed * self.horizon / 2.0 + self.start().1
    }

    /// Spatial speed of the second leg, `cT/√Θmid`.
    pub fn run_speed(&self) -> f64 {
        self.speed * self.horizon / self.theta_mid().sqrt()
    }

    /// Evaluates the given leg; each formula is used as written on its own
    /// interval, which gives the one-sided derivatives at `T/2`.
    pub fn eval_stage(&self, t: f64, stage: Stage) -> Result<TrajectoryPoint> {
        let half = self.horizon / 2.0;
        let (lo, hi) = match stage {
            Stage::Climb => (0.0, half),
            Stage::Run => (half, self.horizon),
        };
        if !(t >= lo - 1e-12 * self.horizon && t <= hi + 1e-12 * self.horizon) {
            return Err(Error::config(format!(
                "t = {t} outside the {stage:?} leg [{lo}, {hi}]"
            )));
        }
        let (x0, th0) = self.start();
        Ok(match stage {
            Stage::Climb => TrajectoryPoint {
                x: x0,
                theta: self.speed * t + th0,
                x_dot: 0.0,
                theta_dot: self.speed,
            },
            Stage::Run => TrajectoryPoint {
                x: x0 + self.run_speed() * (t - half),
                theta: self.theta_mid(),
                x_dot: self.run_speed(),
                theta_dot: 0.0,
            },
        })
    }

    /// Position and velocity; the second leg applies from `T/2` on.
    pub fn eval(&self, t: f64) -> Result<TrajectoryPoint> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::config(format!(
                "t = {t} outside [0, {}]",
                self.horizon
            )));
        }
        let stage = if t < self.horizon / 2.0 {
            Stage::Climb
        } else {
            Stage::Run
        };
        self.eval_stage(t, stage)
    }

    /// Limits of `(c1, c2)` as `λ → ∞` on each leg: `(0, c)` and `(cT/Θmid, 0)`.
    pub fn limiting_drift(&self, stage: Stage) -> [f64; 2] {
        match stage {
            Stage::Climb => [0.0, self.speed],
            Stage::Run => [self.speed * self.horizon / self.theta_mid(), 0.0],
        }
    }

    /// `X(T) / T^{3/2}`.
    pub fn spreading_ratio(&self) -> f64 {
        let end = self.eval(self.horizon).expect("horizon is on the path");
        end.x / self.horizon.powf(1.5)
    }
}

/// `γ = √(c/2)`, the limit of `X_T(T) / T^{3/2}`.
pub fn spreading_constant(c: f64) -> f64 {
    (c / 2.0).sqrt()
}
