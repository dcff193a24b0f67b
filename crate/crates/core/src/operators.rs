//! Discrete spatial operators.
//!
//! [`rhs_local`] is the right-hand side of the Cauchy problem on the physical
//! grid; [`rhs_frame`] is the moving-frame operator with drift and variable
//! y-diffusion, evaluated on a [`FrameDomain`].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{FrameCoeffs, FrameDomain, Sign};
use crate::grid::{Field, GridSpec};
use crate::model::Reaction;

/// Row-parallel kernel shared by [`rhs_local`] and the explicit stepper.
///
/// Writes `θ u_xx + u_θθ + f` into `out`. Every edge uses a mirrored ghost
/// (homogeneous Neumann). With `frozen_trait` the x-diffusivity is
/// `theta_min` on every row and the θ-diffusion is dropped.
pub(crate) fn local_rhs_into(
    spec: &GridSpec,
    u: &[f64],
    reaction: &Reaction,
    rho: Option<&[f64]>,
    frozen_trait: bool,
    out: &mut [f64],
) {
    let nx = spec.nx;
    let nt = spec.ntheta;
    let idx2 = 1.0 / (spec.dx() * spec.dx());
    let idt2 = 1.0 / (spec.dtheta() * spec.dtheta());
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row_out)| {
        let theta = if frozen_trait {
            spec.theta_min
        } else {
            spec.theta(j)
        };
        let row = &u[j * nx..(j + 1) * nx];
        let below = if j == 0 { j + 1 } else { j - 1 };
        let above = if j + 1 == nt { j - 1 } else { j + 1 };
        let rb = &u[below * nx..(below + 1) * nx];
        let ra = &u[above * nx..(above + 1) * nx];
        let cx = theta * idx2;
        for i in 0..nx {
            let left = if i == 0 { row[1] } else { row[i - 1] };
            let right = if i + 1 == nx { row[nx - 2] } else { row[i + 1] };
            let c = row[i];
            let mut v = cx * (left - 2.0 * c + right);
            if !frozen_trait {
                v += idt2 * (rb[i] - 2.0 * c + ra[i]);
            }
            v += match rho {
                Some(rho) => c * reaction.eval(rho[i]),
                None => reaction.eval(c),
            };
            row_out[i] = v;
        }
    });
}

/// `θ u_xx + u_θθ + f(u)`, or `… + n(ρ-α)(1-ρ)` for the nonlocal reaction.
///
/// `rho` must be supplied exactly when the reaction is nonlocal.
pub fn rhs_local(field: &Field, reaction: &Reaction, rho: Option<&[f64]>) -> Result<Field> {
    let spec = field.spec;
    match (reaction.is_nonlocal(), rho) {
        (true, Some(r)) if r.len() != spec.nx => {
            return Err(Error::Shape(format!(
                "density has length {}, grid has nx = {}",
                r.len(),
                spec.nx
            )))
        }
        (true, None) => return Err(Error::Shape("nonlocal reaction needs a density".into())),
        (false, Some(_)) => {
            return Err(Error::Shape("density supplied for a local reaction".into()))
        }
        _ => {}
    }
    let mut out = vec![0.0; spec.len()];
    local_rhs_into(&spec, &field.values, reaction, rho, false, &mut out);
    Ok(Field {
        spec,
        values: out,
        time: field.time,
    })
}

/// Moving-frame right-hand side
/// `d v_yy + v_ηη + c1 v_y + c2 v_η ± f(α ± v)` on unknown nodes, zero on
/// Dirichlet and exterior nodes.
pub fn rhs_frame(
    domain: &FrameDomain,
    field: &Field,
    coeffs: &FrameCoeffs,
    reaction: &Reaction,
    sign: Sign,
) -> Result<Field> {
    if field.spec != domain.spec {
        return Err(Error::Shape(
            "field and frame domain use different grids".into(),
        ));
    }
    coeffs.check(domain)?;
    let source = crate::frame::FrameSource::new(reaction, sign)?;
    let mut out = vec![0.0; field.spec.len()];
    let mut residual = vec![0.0; domain.unknowns()];
    domain.apply(&field.values, coeffs, &source, &mut residual);
    for (s, r) in domain.stencils().iter().zip(&residual) {
        out[s.node] = *r;
    }
    Ok(Field {
        spec: field.spec,
        values: out,
        time: field.time,
    })
}

/// Largest stable forward-Euler step, with safety factor 0.9:
/// `0.9 / (2 θ_max/dx² + 2/dθ² + L_f)`.
pub fn cfl_dt(spec: &GridSpec, theta_max: f64, reaction: &Reaction) -> f64 {
    let dx = spec.dx();
    let dt = spec.dtheta();
    0.9 / (2.0 * theta_max / (dx * dx) + 2.0 / (dt * dt) + reaction.lipschitz())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameShape;
    use crate::model::ModifiedBistable;

    fn spec() -> GridSpec {
        GridSpec::new(-3.0, 4.0, 29, 1.0, 3.0, 17).unwrap()
    }

    #[test]
    fn constant_field_gives_reaction() {
        let f = Reaction::CubicBistable { alpha: 0.25 };
        let u = Field::from_fn(spec(), |_, _| 0.7);
        let rhs = rhs_local(&u, &f, None).unwrap();
        for v in rhs.values {
            assert!((v - f.eval(0.7)).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_and_quadratic_profiles() {
        let s = spec();
        let u = Field::from_fn(s, |x, _| x);
        let rhs = rhs_local(&u, &Reaction::Inert, None).unwrap();
        for j in 0..s.ntheta {
            for i in 1..s.nx - 1 {
                assert!(rhs.at(i, j).abs() < 1e-11);
            }
        }
        let q = Field::from_fn(s, |x, _| x * x);
        let rhs = rhs_local(&q, &Reaction::Inert, None).unwrap();
        for j in 0..s.ntheta {
            for i in 1..s.nx - 1 {
                assert!((rhs.at(i, j) - 2.0 * s.theta(j)).abs() < 1e-9, "{i} {j}");
            }
        }
    }

    #[test]
    fn density_arguments_are_checked() {
        let u = Field::zeros(spec());
        let nl = Reaction::NonlocalBistableRate { alpha: 0.1 };
        assert!(rhs_local(&u, &nl, None).is_err());
        assert!(rhs_local(&u, &nl, Some(&[0.0; 3])).is_err());
        assert!(rhs_local(&u, &Reaction::KppMonostable, Some(&[0.0; 29])).is_err());
        assert!(rhs_local(&u, &nl, Some(&[0.0; 29])).is_ok());
    }

    #[test]
    fn nonlocal_term_uses_density() {
        let s = spec();
        let u = Field::from_fn(s, |_, _| 0.5);
        let rho: Vec<f64> = (0..s.nx).map(|i| 0.1 * i as f64).collect();
        let rhs = rhs_local(
            &u,
            &Reaction::NonlocalBistableRate { alpha: 0.2 },
            Some(&rho),
        )
        .unwrap();
        for j in 0..s.ntheta {
            for (i, r) in rho.iter().enumerate() {
                let expect = 0.5 * (r - 0.2) * (1.0 - r);
                assert!((rhs.at(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn weighted_sum_of_diffusion_vanishes() {
        let s = spec();
        let u = Field::from_fn(s, |x, t| (0.7 * x).sin() * (1.3 * t).cos() + 0.1 * x * t);
        let rhs = rhs_local(&u, &Reaction::Inert, None).unwrap();
        let total = rhs.integral();
        let scale: f64 = rhs.values.iter().map(|v| v.abs()).sum();
        assert!(total.abs() < 1e-13 * scale, "{total}");
    }

    #[test]
    fn cfl_formula() {
        let s = GridSpec::new(0.0, 10.0, 11, 0.0, 10.0, 11).unwrap();
        assert!((cfl_dt(&s, 1.0, &Reaction::Inert) - 0.225).abs() < 1e-15);
        let fine = GridSpec::new(0.0, 10.0, 21, 0.0, 10.0, 11).unwrap();
        let ratio = cfl_dt(&fine, 100.0, &Reaction::Inert) / cfl_dt(&s, 100.0, &Reaction::Inert);
        assert!((ratio - 0.25).abs() < 0.01);
        let mut last = f64::INFINITY;
        for tm in [1.0, 10.0, 100.0, 1000.0] {
            let dt = cfl_dt(&s, tm, &Reaction::KppMonostable);
            assert!(dt < last);
            last = dt;
        }
    }

    #[test]
    fn frame_rhs_matches_local_on_trait_independent_data() {
        // θ-independent data on the θ = 1 row against a large frame disc.
        let s = GridSpec::new(-10.0, 10.0, 81, 1.0, 3.0, 9).unwrap();
        let profile = |x: f64| 0.3 + 0.2 * (0.4 * x).sin();
        let f = ModifiedBistable::new(0.25, 0.9).unwrap();
        let u = Field::from_fn(s, |x, _| 0.25 + profile(x));
        let local = rhs_local(&u, &Reaction::ModifiedBistable(f), None).unwrap();

        let fs = GridSpec::new(-10.0, 10.0, 81, -10.0, 10.0, 81).unwrap();
        let dom = FrameDomain::new(fs, FrameShape::Disc { radius: 9.5 }, 0.0, 0.0).unwrap();
        let v = Field::from_fn(fs, |y, _| profile(y));
        let frame = rhs_frame(
            &dom,
            &v,
            &FrameCoeffs::steady([0.0, 0.0]),
            &Reaction::ModifiedBistable(f),
            Sign::Plus,
        )
        .unwrap();
        let mid = fs.ntheta / 2;
        for i in 10..71 {
            let a = local.at(i, 0);
            let b = frame.at(i, mid);
            assert!((a - b).abs() < 1e-12, "i={i}: {a} vs {b}");
        }
    }
}
