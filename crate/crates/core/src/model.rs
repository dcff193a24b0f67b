//! Model constants and the reaction terms.
//!
//! The local problem is `u_t = θ u_xx + u_θθ + f(u)` on `x ∈ ℝ, θ ≥ θ_min`.
//! Besides the cubic Allee nonlinearity `u(u-α)(1-u)` the sub-solution
//! construction needs a capped variant `f_r` that vanishes at `r ≤ 1`:
//!
//! ```text
//! f_r(u) = u(u-α)(1-u)          u ≤ α
//!        = c_r u(u-α)(r-u)      u ≥ α,   c_r = (1-α)/(r-α)
//! ```
//!
//! `c_r` is chosen so that both branches have the same slope `α(1-α)` at
//! `u = α`, which makes `f_r` C¹ there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar constants shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Allee threshold, in `(0, 1/2)`.
    pub alpha: f64,
    /// Smallest trait value; the trait axis is `[theta_min, ∞)`.
    pub theta_min: f64,
    /// Width factor of the initial block `x ≤ 0, θ ∈ [θ_min, (1+λ)θ_min]`.
    pub lambda: f64,
    /// Cap of the modified nonlinearity, in `(2α, 1]`.
    pub r: f64,
    /// Trait speed `c` of the first leg of the trajectory.
    pub traj_speed: f64,
    /// Radius `Λ` of the moving bump, in frame units.
    pub bump_radius: f64,
    /// Horizon `T` of the trajectory.
    pub horizon: f64,
    /// Height `m` of the tracked level set.
    pub level: f64,
}

impl ModelParams {
    /// Default cap for the second leg: midway between `max(m, 2α)` and 1.
    pub fn default_r(alpha: f64, level: f64) -> f64 {
        0.5 * (1.0 + level.max(2.0 * alpha))
    }

    /// Lists every violated invariant. Empty means valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let finite = [
            ("alpha", self.alpha),
            ("theta_min", self.theta_min),
            ("lambda", self.lambda),
            ("r", self.r),
            ("traj_speed", self.traj_speed),
            ("bump_radius", self.bump_radius),
            ("horizon", self.horizon),
            ("level", self.level),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                out.push(format!("{name} must be finite, got {v}"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            out.push(format!("alpha must lie in (0, 1/2), got {}", self.alpha));
        }
        if !(self.r > 2.0 * self.alpha) {
            out.push(format!(
                "r must exceed 2*alpha = {}, got {}",
                2.0 * self.alpha,
                self.r
            ));
        }
        if self.r > 1.0 {
            out.push(format!("r must be at most 1, got {}", self.r));
        }
        if !(self.theta_min > 0.0) {
            out.push(format!(
                "theta_min must be positive, got {}",
                self.theta_min
            ));
        }
        if !(self.lambda > 0.0) {
            out.push(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            out.push(format!("level m must lie in (0, 1), got {}", self.level));
        }
        if !(self.traj_speed > 0.0) {
            out.push(format!(
                "traj_speed must be positive, got {}",
                self.traj_speed
            ));
        }
        if !(self.horizon > 0.0) {
            out.push(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.bump_radius > 0.0) {
            out.push(format!(
                "bump_radius must be positive, got {}",
                self.bump_radius
            ));
        }
        let cap = self.lambda * self.theta_min / 8.0;
        if self.bump_radius > cap * (1.0 + 1e-12) {
            out.push(format!(
                "bump_radius {} exceeds lambda*theta_min/8 = {cap}",
                self.bump_radius
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Upper edge of the initial block in θ.
    pub fn block_theta_max(&self) -> f64 {
        (1.0 + self.lambda) * self.theta_min
    }
}

/// The capped bistable nonlinearity `f_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModifiedBistable {
    alpha: f64,
    r: f64,
    c_r: f64,
}

impl ModifiedBistable {
    pub fn new(alpha: f64, r: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if !(alpha > 0.0 && alpha < 0.5) {
            problems.push(format!("alpha must lie in (0, 1/2), got {alpha}"));
        }
        if !(r > 2.0 * alpha && r <= 1.0) {
            problems.push(format!("r must lie in (2*alpha, 1], got {r}"));
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        Ok(Self {
            alpha,
            r,
            c_r: (1.0 - alpha) / (r - alpha),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn c_r(&self) -> f64 {
        self.c_r
    }

    pub fn eval(&self, u: f64) -> f64 {
        let a = self.alpha;
        if u <= a {
            u * (u - a) * (1.0 - u)
        } else {
            self.c_r * u * (u - a) * (self.r - u)
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        let a = self.alpha;
        if u <= a {
            -3.0 * u * u + 2.0 * (1.0 + a) * u - a
        } else {
            self.c_r * (-3.0 * u * u + 2.0 * (self.r + a) * u - a * self.r)
        }
    }

    /// Closed-form `∫_0^u f_r(s) ds`.
    pub fn antiderivative(&self, u: f64) -> f64 {
        let a = self.alpha;
        let lower = |s: f64| -s.powi(4) / 4.0 + (1.0 + a) * s.powi(3) / 3.0 - a * s * s / 2.0;
        if u <= a {
            return lower(u);
        }
        let r = self.r;
        let upper = |s: f64| {
            self.c_r * (-s.powi(4) / 4.0 + (r + a) * s.powi(3) / 3.0 - a * r * s * s / 2.0)
        };
        lower(a) + upper(u) - upper(a)
    }

    /// `∫_a^b f_r(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    /// Bound on `|f_r'|` over `[0, 1]`.
    pub fn lipschitz(&self) -> f64 {
        let a = self.alpha;
        let lower = max_abs_quadratic(-3.0, 2.0 * (1.0 + a), -a, 0.0, a);
        let upper = self.c_r * max_abs_quadratic(-3.0, 2.0 * (self.r + a), -a * self.r, a, 1.0);
        lower.max(upper)
    }
}

/// `max |p x² + q x + s|` over `[lo, hi]`.
fn max_abs_quadratic(p: f64, q: f64, s: f64, lo: f64, hi: f64) -> f64 {
    let eval = |x: f64| (p * x * x + q * x + s).abs();
    let mut best = eval(lo).max(eval(hi));
    if p != 0.0 {
        let vertex = -q / (2.0 * p);
        if vertex > lo && vertex < hi {
            best = best.max(eval(vertex));
        }
    }
    best
}

/// Selects the reaction term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Reaction {
    /// `u(u-α)(1-u)`.
    CubicBistable { alpha: f64 },
    /// `f_r`, see [`ModifiedBistable`].
    ModifiedBistable(ModifiedBistable),
    /// `u(1-u)`, the monostable comparison nonlinearity.
    KppMonostable,
    /// Nonlocal Allee term `n (ρ-α)(1-ρ)`. [`Reaction::eval`] returns the
    /// per-capita factor `(ρ-α)(1-ρ)` at `ρ = u`.
    NonlocalBistableRate { alpha: f64 },
    /// `f ≡ 0`, pure diffusion.
    Inert,
}

impl Reaction {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Reaction::CubicBistable { alpha } => u * (u - alpha) * (1.0 - u),
            Reaction::ModifiedBistable(f) => f.eval(u),
            Reaction::KppMonostable => u * (1.0 - u),
            Reaction::NonlocalBistableRate { alpha } => nonlocal_rate(alpha, u),
            Reaction::Inert => 0.0,
        }
    }

    pub fn is_nonlocal(&self) -> bool {
        matches!(self, Reaction::NonlocalBistableRate { .. })
    }

    /// Lipschitz bound on `[0, 1]` used for explicit step limits.
    ///
    /// For the nonlocal rate this bounds `|(ρ-α)(1-ρ)|` over `ρ ∈ [0, 2]`,
    /// which is the factor multiplying `n`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Reaction::CubicBistable { alpha } => {
                max_abs_quadratic(-3.0, 2.0 * (1.0 + alpha), -alpha, 0.0, 1.0)
            }
            Reaction::ModifiedBistable(f) => f.lipschitz(),
            Reaction::KppMonostable => 1.0,
            Reaction::NonlocalBistableRate { alpha } => {
                max_abs_quadratic(-1.0, 1.0 + alpha, -alpha, 0.0, 2.0)
            }
            Reaction::Inert => 0.0,
        }
    }

    /// Short stable name used in config files and reports.
    pub fn name(&self) -> &'static str {
        match self {
            Reaction::CubicBistable { .. } => "bistable",
            Reaction::ModifiedBistable(_) => "modified",
            Reaction::KppMonostable => "kpp",
            Reaction::NonlocalBistableRate { .. } => "nonlocal",
            Reaction::Inert => "none",
        }
    }
}

/// Per-capita growth `(ρ-α)(1-ρ)` of the nonlocal model.
pub fn nonlocal_rate(alpha: f64, rho: f64) -> f64 {
    (rho - alpha) * (1.0 - rho)
}

/// Signed area `∫_0^r f_r(s) ds`.
pub fn reaction_mass(alpha: f64, r: f64) -> Result<f64> {
    Ok(ModifiedBistable::new(alpha, r)?.antiderivative(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cubic_values() {
        let f = Reaction::CubicBistable { alpha: 0.25 };
        assert_eq!(f.eval(0.0), 0.0);
        assert!(close(f.eval(0.5), 0.0625, 1e-15));
        assert_eq!(f.eval(1.0), 0.0);
    }

    #[test]
    fn modified_values() {
        let f = ModifiedBistable::new(0.25, 0.9).unwrap();
        assert!(close(f.c_r(), 0.75 / 0.65, 1e-15));
        assert!(close(f.eval(0.5), 0.75 / 0.65 * 0.5 * 0.25 * 0.4, 1e-15));
        assert!(close(f.eval(0.5), 0.0576923, 1e-7));
        assert_eq!(f.eval(0.9), 0.0);
        // continuity and matching slopes at the threshold
        let a = 0.25;
        assert!(close(f.eval(a - 1e-12), f.eval(a + 1e-12), 1e-12));
        assert!(close(
            f.derivative(a - 1e-12),
            f.derivative(a + 1e-12),
            1e-9
        ));
        assert!(close(f.derivative(a), a * (1.0 - a), 1e-12));
    }

    #[test]
    fn nonlocal_rate_values() {
        assert_eq!(nonlocal_rate(0.25, 0.25), 0.0);
        assert_eq!(nonlocal_rate(0.25, 1.0), 0.0);
        assert!(close(nonlocal_rate(0.25, 0.625), 0.140625, 1e-15));
        // the vertex is the supremum over ρ ≥ 0
        for k in 0..=400 {
            let rho = k as f64 * 0.01;
            assert!(nonlocal_rate(0.25, rho) <= 0.140625 + 1e-15);
        }
    }

    #[test]
    fn masses() {
        // ∫_0^1 u(u-α)(1-u) du = (1-2α)/12
        assert!(close(reaction_mass(0.25, 1.0).unwrap(), 0.5 / 12.0, 1e-14));
        assert!(close(reaction_mass(0.25, 1.0).unwrap(), 0.0416667, 1e-7));
        let f = ModifiedBistable::new(0.25, 1.0).unwrap();
        assert!(close(f.integral(0.0, 0.25), -0.0022786, 1e-7));
        // symmetric cubic has zero mass (limit α → 1/2 with r = 1)
        let sym = |u: f64| -u.powi(4) / 4.0 + 1.5 * u.powi(3) / 3.0 - 0.5 * u * u / 2.0;
        assert!(close(sym(1.0), 0.0, 1e-15));
        assert!(reaction_mass(0.4999999, 1.0).unwrap().abs() < 1e-7);
    }

    #[test]
    fn antiderivative_matches_quadrature() {
        let f = ModifiedBistable::new(0.2, 0.7).unwrap();
        let n = 20_000;
        let h = 1.0 / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let a = k as f64 * h;
            // Simpson per panel
            acc += h / 6.0 * (f.eval(a) + 4.0 * f.eval(a + 0.5 * h) + f.eval(a + h));
            if k % 1000 == 999 {
                let u = (k + 1) as f64 * h;
                assert!(close(acc, f.antiderivative(u), 1e-12), "u={u}");
            }
        }
    }

    #[test]
    fn modified_below_cubic_with_roots_and_signs() {
        for &(alpha, r) in &[(0.25, 0.9), (0.1, 0.5), (0.4, 1.0), (0.05, 0.2)] {
            let f = ModifiedBistable::new(alpha, r).unwrap();
            let cubic = Reaction::CubicBistable { alpha };
            for k in 0..=10_000 {
                let u = k as f64 / 10_000.0;
                assert!(
                    f.eval(u) <= cubic.eval(u) + 1e-15,
                    "alpha={alpha} r={r} u={u}"
                );
                if u > 0.0 && u < alpha {
                    assert!(f.eval(u) < 0.0);
                }
                if u > alpha && u < r {
                    assert!(f.eval(u) > 0.0);
                }
            }
            assert_eq!(f.eval(0.0), 0.0);
            assert_eq!(f.eval(alpha), 0.0);
            assert_eq!(f.eval(r), 0.0);
        }
    }

    #[test]
    fn lipschitz_bounds_difference_quotients() {
        let reactions = [
            Reaction::CubicBistable { alpha: 0.1 },
            Reaction::ModifiedBistable(ModifiedBistable::new(0.25, 0.9).unwrap()),
            Reaction::ModifiedBistable(ModifiedBistable::new(0.3, 0.61).unwrap()),
            Reaction::KppMonostable,
        ];
        for f in reactions {
            let lip = f.lipschitz();
            let n = 5000;
            for k in 0..n {
                let a = k as f64 / n as f64;
                let b = (k + 1) as f64 / n as f64;
                let q = (f.eval(b) - f.eval(a)).abs() / (b - a);
                assert!(q <= lip * (1.0 + 1e-9), "{f:?}: {q} > {lip}");
            }
        }
    }

    #[test]
    fn kpp_dominates_cubic() {
        for alpha in [0.05, 0.1, 0.25, 0.45] {
            let cubic = Reaction::CubicBistable { alpha };
            for k in 0..=1000 {
                let u = k as f64 / 1000.0;
                let gap = Reaction::KppMonostable.eval(u) - cubic.eval(u);
                assert!(gap >= -1e-16);
                assert!(close(gap, u * (1.0 - u) * (1.0 + alpha - u), 1e-15));
            }
        }
    }

    #[test]
    fn params_validation_lists_every_problem() {
        let p = ModelParams {
            alpha: 0.6,
            theta_min: -1.0,
            lambda: 10.0,
            r: 1.5,
            traj_speed: 0.1,
            bump_radius: 1.0,
            horizon: 10.0,
            level: 1.5,
        };
        let problems = p.problems();
        assert!(problems.len() >= 4, "{problems:?}");
        let ok = ModelParams {
            alpha: 0.25,
            theta_min: 1.0,
            lambda: 16.0,
            r: 0.9,
            traj_speed: 0.1,
            bump_radius: 2.0,
            horizon: 10.0,
            level: 0.5,
        };
        assert!(ok.validate().is_ok());
        let too_wide = ModelParams {
            bump_radius: 2.5,
            ..ok
        };
        assert!(too_wide.validate().is_err());
        assert!(close(ModelParams::default_r(0.25, 0.3), 0.75, 1e-15));
        assert!(close(ModelParams::default_r(0.1, 0.6), 0.8, 1e-15));
    }
}
