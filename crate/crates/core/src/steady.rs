//! Steady bumps on the frame disc and annulus.
//!
//! `φ⁺` solves `-Δφ - c∞·∇φ = f_r(α + φ)` in `ρ < Λ` with `φ = 0` on the
//! circle; `φ⁻` solves `-Δφ - c∞·∇φ = -f_r(α - φ)` in `Λ < ρ < 2Λ` with
//! `φ = 0` inside and `α` outside. Both are found by pseudo-time marching
//! with per-node step sizes (Jacobi updates, so the result is independent of
//! the worker count). The zero function also solves the `φ⁺` problem; the
//! plateau-shaped starting guess selects the nontrivial branch when it
//! exists and collapse to zero is reported rather than treated as failure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{
    frame_spec, normal_derivative, FrameCoeffs, FrameDomain, FrameShape, FrameSource, Side, Sign,
};
use crate::grid::{Field, GridSpec};
use crate::model::{ModifiedBistable, Reaction};

/// Bound violations smaller than this are roundoff.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyProblem {
    pub shape: FrameShape,
    /// Constant drift `c∞`.
    pub drift: [f64; 2],
    pub reaction: ModifiedBistable,
    pub grid: GridSpec,
    /// Target sup-norm of the discrete residual.
    pub tol: f64,
    pub max_steps: usize,
    /// Plateau depth `ε` in `φ⁺ ≥ r - α - ε`.
    pub epsilon: f64,
    /// Number of equispaced boundary angles for the normal profile.
    pub angles: usize,
}

impl SteadyProblem {
    fn with_shape(
        shape: FrameShape,
        radius: f64,
        drift: [f64; 2],
        reaction: ModifiedBistable,
        spacing: f64,
    ) -> Result<Self> {
        Ok(Self {
            shape,
            drift,
            reaction,
            grid: frame_spec(radius, spacing, spacing)?,
            tol: 1e-8,
            max_steps: 1_000_000,
            epsilon: 0.05,
            angles: 64,
        })
    }

    /// `φ⁺` on the disc of radius `Λ`, on the frame box `[-2Λ-2, 2Λ+2]²`.
    pub fn disc(
        radius: f64,
        drift: [f64; 2],
        reaction: ModifiedBistable,
        spacing: f64,
    ) -> Result<Self> {
        Self::with_shape(
            FrameShape::Disc { radius },
            radius,
            drift,
            reaction,
            spacing,
        )
    }

    /// `φ⁻` on the annulus `Λ < ρ < 2Λ`.
    pub fn annulus(
        radius: f64,
        drift: [f64; 2],
        reaction: ModifiedBistable,
        spacing: f64,
    ) -> Result<Self> {
        Self::with_shape(
            FrameShape::Annulus {
                inner: radius,
                outer: 2.0 * radius,
            },
            radius,
            drift,
            reaction,
            spacing,
        )
    }

    pub fn sign(&self) -> Sign {
        match self.shape {
            FrameShape::Disc { .. } => Sign::Plus,
            FrameShape::Annulus { .. } => Sign::Minus,
        }
    }

    pub fn radius(&self) -> f64 {
        self.shape.inner_radius()
    }

    pub fn domain(&self) -> Result<FrameDomain> {
        let alpha = self.reaction.alpha();
        FrameDomain::new(self.grid, self.shape, 0.0, alpha)
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.radius() > 0.0) {
            out.push(format!("radius {} must be positive", self.radius()));
        }
        if self.drift.iter().any(|c| !c.is_finite()) {
            out.push("drift must be finite".into());
        }
        if !(self.tol > 0.0) {
            out.push(format!("tolerance {} must be positive", self.tol));
        }
        if self.max_steps == 0 {
            out.push("max_steps must be positive".into());
        }
        if !(self.epsilon > 0.0) {
            out.push("plateau epsilon must be positive".into());
        }
        if self.angles == 0 {
            out.push("need at least one boundary angle".into());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalSample {
    pub angle: f64,
    /// Derivative along the direction pointing away from the origin.
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct SteadyReport {
    pub field: Field,
    pub domain: FrameDomain,
    pub sign: Sign,
    pub drift: [f64; 2],
    /// Residual sup-norm recomputed after convergence.
    pub residual: f64,
    pub iterations: usize,
    /// `max φ⁺ ≥ (r - α)/2`; always true for `φ⁻`.
    pub nontrivial: bool,
    /// Smallest `L` with `φ⁺ ≥ r - α - ε` at distance `> L` from the circle.
    pub plateau_radius: Option<f64>,
    pub epsilon: f64,
    pub normals: Vec<NormalSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadySummary {
    pub sign: Sign,
    pub radius: f64,
    pub drift: [f64; 2],
    pub residual: f64,
    pub iterations: usize,
    pub nontrivial: bool,
    pub plateau_radius: Option<f64>,
    pub epsilon: f64,
}

impl SteadyReport {
    pub fn summary(&self) -> SteadySummary {
        SteadySummary {
            sign: self.sign,
            radius: self.domain.shape.inner_radius(),
            drift: self.drift,
            residual: self.residual,
            iterations: self.iterations,
            nontrivial: self.nontrivial,
            plateau_radius: self.plateau_radius,
            epsilon: self.epsilon,
        }
    }
}

/// Marches `v_t = L v` with per-node explicit steps until `sup |L v| ≤ tol`.
pub(crate) fn relax(
    domain: &FrameDomain,
    coeffs: &FrameCoeffs,
    source: &FrameSource,
    field: &mut Field,
    tol: f64,
    max_steps: usize,
) -> Result<(f64, usize)> {
    coeffs.check(domain)?;
    let steps = domain.local_steps(coeffs, source);
    let nodes: Vec<usize> = domain.stencils().iter().map(|s| s.node).collect();
    let mut res = vec![0.0; domain.unknowns()];
    domain.imprint(&mut field.values);
    for k in 0..=max_steps {
        domain.apply(&field.values, coeffs, source, &mut res);
        let sup = res.par_iter().map(|r| r.abs()).reduce(|| 0.0, f64::max);
        if !sup.is_finite() {
            return Err(Error::Numerical(format!(
                "pseudo-time iteration diverged after {k} steps"
            )));
        }
        if sup <= tol {
            return Ok((sup, k));
        }
        if k == max_steps {
            return Err(Error::Numerical(format!(
                "no convergence in {max_steps} pseudo-time steps (residual {sup:.3e}, tolerance {tol:.1e})"
            )));
        }
        for ((node, r), dt) in nodes.iter().zip(&res).zip(&steps) {
            field.values[*node] += dt * r;
        }
    }
    unreachable!()
}

fn solve(problem: &SteadyProblem, expect: Sign) -> Result<SteadyReport> {
    let problems = problem.problems();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    if problem.sign() != expect {
        return Err(Error::config(match expect {
            Sign::Plus => "φ⁺ is posed on a disc",
            Sign::Minus => "φ⁻ is posed on an annulus",
        }));
    }
    let f = problem.reaction;
    let (alpha, cap) = (f.alpha(), f.r() - f.alpha());
    let radius = problem.radius();
    let domain = problem.domain()?;
    let reaction = Reaction::ModifiedBistable(f);
    let source = FrameSource::new(&reaction, expect)?;
    let coeffs = FrameCoeffs::steady(problem.drift);

    let mut field = match problem.shape {
        FrameShape::Disc { .. } => domain.field_from_fn(|y, e| {
            (cap * (1.0 - (y * y + e * e) / (radius * radius))).clamp(0.0, cap)
        }),
        FrameShape::Annulus { inner, outer } => domain.field_from_fn(|y, e| {
            let rho = (y * y + e * e).sqrt();
            (alpha * (rho - inner) / (outer - inner)).clamp(0.0, alpha)
        }),
    };
    let (_, iterations) = relax(
        &domain,
        &coeffs,
        &source,
        &mut field,
        problem.tol,
        problem.max_steps,
    )?;
    let residual = domain.residual_sup(&field, &coeffs, &reaction, expect)?;

    let upper = if expect == Sign::Plus { cap } else { alpha };
    let (lo, hi) = (field.min(), field.max());
    if lo < -BOUND_SLACK || hi > upper + BOUND_SLACK {
        return Err(Error::Numerical(format!(
            "steady solution leaves [0, {upper}]: range [{lo}, {hi}]"
        )));
    }

    let nontrivial = expect == Sign::Minus || hi >= 0.5 * cap;
    let plateau_radius = (expect == Sign::Plus && nontrivial).then(|| {
        let floor = cap - problem.epsilon;
        domain
            .stencils()
            .iter()
            .filter(|s| field.values[s.node] < floor)
            .map(|s| radius - (s.y * s.y + s.eta * s.eta).sqrt())
            .fold(0.0, f64::max)
    });

    let side = if expect == Sign::Plus {
        Side::Inside
    } else {
        Side::Outside
    };
    let normals = (0..problem.angles)
        .map(|k| {
            let angle = k as f64 * std::f64::consts::TAU / problem.angles as f64;
            normal_derivative(&field, radius, angle, side, Some(0.0), Some(&domain))
                .map(|slope| NormalSample { angle, slope })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SteadyReport {
        field,
        domain,
        sign: expect,
        drift: problem.drift,
        residual,
        iterations,
        nontrivial,
        plateau_radius,
        epsilon: problem.epsilon,
        normals,
    })
}

pub fn solve_phi_plus(problem: &SteadyProblem) -> Result<SteadyReport> {
    solve(problem, Sign::Plus)
}

pub fn solve_phi_minus(problem: &SteadyProblem) -> Result<SteadyReport> {
    solve(problem, Sign::Minus)
}

/// Outward (away from the origin) normal derivative on the inner circle.
pub fn boundary_normal_derivative(report: &SteadyReport, angle: f64) -> Result<f64> {
    let side = match report.sign {
        Sign::Plus => Side::Inside,
        Sign::Minus => Side::Outside,
    };
    let radius = report.domain.shape.inner_radius();
    normal_derivative(
        &report.field,
        radius,
        angle,
        side,
        Some(0.0),
        Some(&report.domain),
    )
}

/// Boundary slopes of the one-dimensional profiles in a half-plane with
/// zero drift, from the first integrals `½ z'² = ∫ f`:
/// `(√(2∫_α^r f_r), √(-2∫_0^α f_r))`.
pub fn halfplane_slopes(alpha: f64, r: f64) -> Result<(f64, f64)> {
    let f = ModifiedBistable::new(alpha, r)?;
    let upper = f.integral(alpha, r);
    let lower = -f.integral(0.0, alpha);
    assert!(
        upper >= 0.0 && lower >= 0.0,
        "negative energy for α = {alpha}, r = {r}"
    );
    Ok(((2.0 * upper).sqrt(), (2.0 * lower).sqrt()))
}

#[cfg(test)]
pub(crate) mod radial {
    //! Radial profiles at zero drift by shooting, as an independent check.

    use crate::model::ModifiedBistable;

    const H: f64 = 1e-3;

    /// RK4 for `z'' = g(z) - z'/ρ` from `ρ0` to `ρ1`; `stop` may end early.
    pub fn integrate(
        g: impl Fn(f64) -> f64,
        rho0: f64,
        rho1: f64,
        mut z: f64,
        mut dz: f64,
        mut stop: impl FnMut(f64, f64, f64) -> bool,
    ) -> (f64, f64, f64) {
        let rhs = |rho: f64, z: f64, dz: f64| (dz, g(z) - dz / rho);
        let n = ((rho1 - rho0) / H).ceil() as usize;
        let h = (rho1 - rho0) / n as f64;
        let mut rho = rho0;
        for _ in 0..n {
            let (k1z, k1d) = rhs(rho, z, dz);
            let (k2z, k2d) = rhs(rho + 0.5 * h, z + 0.5 * h * k1z, dz + 0.5 * h * k1d);
            let (k3z, k3d) = rhs(rho + 0.5 * h, z + 0.5 * h * k2z, dz + 0.5 * h * k2d);
            let (k4z, k4d) = rhs(rho + h, z + h * k3z, dz + h * k3d);
            z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
            dz += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            rho += h;
            if stop(rho, z, dz) {
                break;
            }
        }
        (rho, z, dz)
    }

    /// `|∂ρ φ⁺(Λ)|` for the disc. Shoots on `ψ = r - α - φ⁺`, which solves
    /// `Δψ = f_r(r - ψ)`, from `ψ(0) = δ` and bisects on `log δ`. The source
    /// is written as `c_r (r-ψ)(r-α-ψ) ψ` so that `ψ ≪ 1e-16` still grows.
    pub fn plus_slope(f: ModifiedBistable, radius: f64) -> f64 {
        let cap = f.r() - f.alpha();
        let g = |psi: f64| f.c_r() * (f.r() - psi) * (cap - psi) * psi;
        let reach =
            |log_delta: f64| integrate(g, 1e-9, radius, log_delta.exp(), 0.0, |_, z, _| z >= cap);
        let (mut lo, mut hi) = (-700.0f64, cap.ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let (rho, z, _) = reach(mid);
            if z >= cap && rho < radius {
                hi = mid
            } else {
                lo = mid
            }
        }
        reach(hi).2
    }

    /// `∂ρ φ⁻(Λ)` for the annulus: shoot outward from `φ(Λ) = 0` with
    /// slope `s` on `Δφ = f_r(α - φ)`, bisect on `s` so `φ(2Λ) = α`.
    pub fn minus_slope(f: ModifiedBistable, radius: f64) -> f64 {
        let a = f.alpha();
        let g = |phi: f64| f.eval(a - phi);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let s = 0.5 * (lo + hi);
            let (rho, z, _) = integrate(g, radius, 2.0 * radius, 0.0, s, |_, z, dz| {
                z >= a || dz <= 0.0
            });
            if z >= a && rho < 2.0 * radius {
                hi = s
            } else {
                lo = s
            }
        }
        0.5 * (lo + hi)
    }
}
