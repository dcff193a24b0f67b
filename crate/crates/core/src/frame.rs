//! Discs and annuli embedded in a Cartesian frame grid.
//!
//! In the moving coordinates `y = (x - X)/√Θ`, `η = θ - Θ` the bump lives on
//! the fixed disc `E_Λ = {ρ < Λ}` and the annulus `A_Λ = {Λ < ρ < 2Λ}`.
//! Unknown nodes near a circle use shortened stencil arms that end exactly on
//! the circle (Shortley–Weller), so Dirichlet data is imposed on the true
//! curve rather than on a staircase. A node closer than a quarter spacing to
//! a circle is pinned to that circle's boundary value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample, Field, GridSpec};
use crate::model::Reaction;

/// Fraction of the smaller spacing below which a node is pinned.
const PIN_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FrameShape {
    Disc { radius: f64 },
    Annulus { inner: f64, outer: f64 },
}

impl FrameShape {
    pub fn inner_radius(&self) -> f64 {
        match *self {
            FrameShape::Disc { radius } => radius,
            FrameShape::Annulus { inner, .. } => inner,
        }
    }

    pub fn outer_radius(&self) -> f64 {
        match *self {
            FrameShape::Disc { radius } => radius,
            FrameShape::Annulus { outer, .. } => outer,
        }
    }
}

/// `+` for `v⁺` (source `f(α + v)`), `-` for `v⁻` (source `-f(α - v)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// Drift and diffusion coefficients of the frame equation at one instant:
/// `c1(y) = c1_const + c1_slope·y`, `c2`, `d(η) = 1 + η/Θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameCoeffs {
    pub c1_const: f64,
    pub c1_slope: f64,
    pub c2: f64,
    /// Current `Θ_T`; `None` means `d ≡ 1`.
    pub theta_center: Option<f64>,
}

impl FrameCoeffs {
    /// Constant drift `c∞` and unit diffusion, as in the steady problems.
    pub fn steady(drift: [f64; 2]) -> Self {
        Self {
            c1_const: drift[0],
            c1_slope: 0.0,
            c2: drift[1],
            theta_center: None,
        }
    }

    /// Coefficients induced by a trajectory point.
    pub fn from_motion(x_dot: f64, theta: f64, theta_dot: f64) -> Self {
        Self {
            c1_const: x_dot / theta.sqrt(),
            c1_slope: theta_dot / (2.0 * theta),
            c2: theta_dot,
            theta_center: Some(theta),
        }
    }

    #[inline]
    pub fn c1(&self, y: f64) -> f64 {
        self.c1_const + self.c1_slope * y
    }

    #[inline]
    pub fn d(&self, eta: f64) -> f64 {
        match self.theta_center {
            Some(th) => 1.0 + eta / th,
            None => 1.0,
        }
    }

    /// `d > 0` on every unknown node of the domain.
    pub fn check(&self, domain: &FrameDomain) -> Result<()> {
        let worst = domain
            .stencils
            .iter()
            .map(|s| self.d(s.eta))
            .fold(f64::INFINITY, f64::min);
        if worst > 0.0 {
            Ok(())
        } else {
            Err(Error::Numerical(format!(
                "frame diffusion d = 1 + η/Θ reaches {worst} ≤ 0; increase lambda or shrink the bump"
            )))
        }
    }
}

/// Source term of the frame equation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FrameSource {
    reaction: Reaction,
    alpha: f64,
    sign: Sign,
}

impl FrameSource {
    pub(crate) fn new(reaction: &Reaction, sign: Sign) -> Result<Self> {
        let alpha = match *reaction {
            Reaction::ModifiedBistable(f) => f.alpha(),
            Reaction::CubicBistable { alpha } => alpha,
            Reaction::Inert => 0.0,
            other => {
                return Err(Error::config(format!(
                    "frame equations need a bistable reaction, got {}",
                    other.name()
                )))
            }
        };
        Ok(Self {
            reaction: *reaction,
            alpha,
            sign,
        })
    }

    #[inline]
    fn eval(&self, v: f64) -> f64 {
        match self.sign {
            Sign::Plus => self.reaction.eval(self.alpha + v),
            Sign::Minus => -self.reaction.eval(self.alpha - v),
        }
    }

    fn lipschitz(&self) -> f64 {
        self.reaction.lipschitz()
    }
}

/// Where a stencil arm ends: on a grid node or on a circle with known data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmEnd {
    Node(usize),
    Boundary(f64),
}

/// Non-uniform three-point weights along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AxisWeights {
    ends: [ArmEnd; 2],
    /// Second derivative: `w[0] v_lo + w[1] v_hi - (w[0]+w[1]) v_0`.
    second: [f64; 2],
    /// First derivative: `g[0] v_lo + g[1] v_hi + g0 v_0`.
    first: [f64; 3],
}

impl AxisWeights {
    fn new(lo: ArmEnd, a: f64, hi: ArmEnd, b: f64) -> Self {
        let s = a + b;
        Self {
            ends: [lo, hi],
            second: [2.0 / (a * s), 2.0 / (b * s)],
            first: [-b / (a * s), a / (b * s), (b - a) / (a * b)],
        }
    }

    #[inline]
    fn values(&self, v: &[f64]) -> (f64, f64) {
        let get = |e: ArmEnd| match e {
            ArmEnd::Node(k) => v[k],
            ArmEnd::Boundary(g) => g,
        };
        (get(self.ends[0]), get(self.ends[1]))
    }

    fn diag(&self) -> f64 {
        self.second[0] + self.second[1]
    }
}

/// Stencil of one unknown node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStencil {
    pub node: usize,
    pub y: f64,
    pub eta: f64,
    y_axis: AxisWeights,
    eta_axis: AxisWeights,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NodeKind {
    Unknown,
    /// Pinned or exterior node holding its Dirichlet value.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct FrameDomain {
    pub spec: GridSpec,
    pub shape: FrameShape,
    /// Dirichlet value on the inner circle (`ρ = Λ`).
    pub inner_value: f64,
    /// Dirichlet value on the outer circle of an annulus.
    pub outer_value: f64,
    kinds: Vec<NodeKind>,
    stencils: Vec<NodeStencil>,
}

impl FrameDomain {
    pub fn new(
        spec: GridSpec,
        shape: FrameShape,
        inner_value: f64,
        outer_value: f64,
    ) -> Result<Self> {
        let (r_in, r_out) = (shape.inner_radius(), shape.outer_radius());
        if !(r_in > 0.0 && r_out >= r_in) {
            return Err(Error::config(format!(
                "invalid frame radii {r_in}, {r_out}"
            )));
        }
        if spec.x_min > -r_out
            || spec.x_max < r_out
            || spec.theta_min > -r_out
            || spec.theta_max < r_out
        {
            return Err(Error::Truncation(format!(
                "frame grid does not contain the circle of radius {r_out}"
            )));
        }
        let (hy, he) = (spec.dx(), spec.dtheta());
        let pin = PIN_FRACTION * hy.min(he);

        let classify = |y: f64, eta: f64| -> NodeKind {
            let rho = (y * y + eta * eta).sqrt();
            match shape {
                FrameShape::Disc { radius } => {
                    if radius - rho < pin {
                        NodeKind::Fixed(inner_value)
                    } else {
                        NodeKind::Unknown
                    }
                }
                FrameShape::Annulus { inner, outer } => {
                    if rho - inner < pin {
                        NodeKind::Fixed(inner_value)
                    } else if outer - rho < pin {
                        NodeKind::Fixed(outer_value)
                    } else {
                        NodeKind::Unknown
                    }
                }
            }
        };

        let mut kinds = Vec::with_capacity(spec.len());
        for j in 0..spec.ntheta {
            for i in 0..spec.nx {
                kinds.push(classify(spec.x(i), spec.theta(j)));
            }
        }

        // Is the neighbour on the same side of every circle as the node?
        let inside = |y: f64, eta: f64| -> bool {
            let rho2 = y * y + eta * eta;
            match shape {
                FrameShape::Disc { radius } => rho2 < radius * radius,
                FrameShape::Annulus { inner, outer } => {
                    rho2 > inner * inner && rho2 < outer * outer
                }
            }
        };

        let mut stencils = Vec::new();
        for j in 0..spec.ntheta {
            for i in 0..spec.nx {
                let node = spec.index(i, j);
                if kinds[node] != NodeKind::Unknown {
                    continue;
                }
                let (y, eta) = (spec.x(i), spec.theta(j));
                let arm = |di: isize, dj: isize, h: f64| -> Result<(ArmEnd, f64)> {
                    let ni = i as isize + di;
                    let nj = j as isize + dj;
                    if ni < 0 || nj < 0 || ni as usize >= spec.nx || nj as usize >= spec.ntheta {
                        return Err(Error::Truncation("frame stencil leaves the grid".into()));
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    let (qy, qe) = (spec.x(ni), spec.theta(nj));
                    let q = spec.index(ni, nj);
                    let e = (di as f64, dj as f64);
                    let q_rho = (qy * qy + qe * qe).sqrt();
                    // Circle nearest to the neighbour, with its boundary value.
                    let (radius, value) = match shape {
                        FrameShape::Disc { radius } => (radius, inner_value),
                        FrameShape::Annulus { inner, outer } => {
                            if (q_rho - inner).abs() <= (q_rho - outer).abs() {
                                (inner, inner_value)
                            } else {
                                (outer, outer_value)
                            }
                        }
                    };
                    let crossing = first_crossing(y, eta, e, radius);
                    if inside(qy, qe) {
                        if kinds[q] == NodeKind::Unknown {
                            return Ok((ArmEnd::Node(q), h));
                        }
                        // Pinned neighbour: end on the circle just beyond it
                        // when the crossing is close, else use the pinned node.
                        return Ok(match crossing {
                            Some(s) if s > h && s <= 2.0 * h => (ArmEnd::Boundary(value), s),
                            _ => (ArmEnd::Node(q), h),
                        });
                    }
                    let s = crossing.unwrap_or(h).clamp(pin, h);
                    Ok((ArmEnd::Boundary(value), s))
                };
                let (l, a) = arm(-1, 0, hy)?;
                let (r, b) = arm(1, 0, hy)?;
                let (d, c) = arm(0, -1, he)?;
                let (u, e) = arm(0, 1, he)?;
                stencils.push(NodeStencil {
                    node,
                    y,
                    eta,
                    y_axis: AxisWeights::new(l, a, r, b),
                    eta_axis: AxisWeights::new(d, c, u, e),
                });
            }
        }
        if stencils.is_empty() {
            return Err(Error::config(
                "frame domain has no unknown nodes; refine the grid",
            ));
        }
        Ok(Self {
            spec,
            shape,
            inner_value,
            outer_value,
            kinds,
            stencils,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.stencils.len()
    }

    pub fn stencils(&self) -> &[NodeStencil] {
        &self.stencils
    }

    pub fn is_unknown(&self, node: usize) -> bool {
        self.kinds[node] == NodeKind::Unknown
    }

    /// A field with every non-unknown node set to its Dirichlet value and
    /// unknowns given by `f(y, η)`.
    pub fn field_from_fn(&self, mut f: impl FnMut(f64, f64) -> f64) -> Field {
        let spec = self.spec;
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.ntheta {
            for i in 0..spec.nx {
                let node = spec.index(i, j);
                values.push(match self.kinds[node] {
                    NodeKind::Unknown => f(spec.x(i), spec.theta(j)),
                    NodeKind::Fixed(v) => v,
                });
            }
        }
        Field {
            spec,
            values,
            time: 0.0,
        }
    }

    /// Overwrites non-unknown nodes with their Dirichlet values.
    pub fn imprint(&self, values: &mut [f64]) {
        for (v, k) in values.iter_mut().zip(&self.kinds) {
            if let NodeKind::Fixed(g) = k {
                *v = *g;
            }
        }
    }

    /// Operator value at every unknown node, in stencil order.
    pub(crate) fn apply(
        &self,
        v: &[f64],
        coeffs: &FrameCoeffs,
        source: &FrameSource,
        out: &mut [f64],
    ) {
        out.par_iter_mut()
            .zip(self.stencils.par_iter())
            .for_each(|(o, s)| {
                *o = stencil_value(s, v, coeffs, source);
            });
    }

    /// Largest stable (monotone) explicit step at one node.
    fn local_step(s: &NodeStencil, coeffs: &FrameCoeffs, lip: f64) -> f64 {
        let d = coeffs.d(s.eta);
        let c1 = coeffs.c1(s.y);
        let diag = d * s.y_axis.diag()
            + s.eta_axis.diag()
            + (c1 * s.y_axis.first[2]).abs()
            + (coeffs.c2 * s.eta_axis.first[2]).abs()
            + lip;
        1.0 / diag
    }

    /// Per-node explicit steps with safety factor 0.9.
    pub(crate) fn local_steps(&self, coeffs: &FrameCoeffs, source: &FrameSource) -> Vec<f64> {
        let lip = source.lipschitz();
        self.stencils
            .iter()
            .map(|s| 0.9 * Self::local_step(s, coeffs, lip))
            .collect()
    }

    /// Uniform explicit step stable at every node, safety factor 0.9.
    pub(crate) fn stable_step(&self, coeffs: &FrameCoeffs, source: &FrameSource) -> f64 {
        let lip = source.lipschitz();
        0.9 * self
            .stencils
            .iter()
            .map(|s| Self::local_step(s, coeffs, lip))
            .fold(f64::INFINITY, f64::min)
    }

    /// Sup norm of the operator over unknown nodes, computed from scratch.
    pub fn residual_sup(
        &self,
        field: &Field,
        coeffs: &FrameCoeffs,
        reaction: &Reaction,
        sign: Sign,
    ) -> Result<f64> {
        let source = FrameSource::new(reaction, sign)?;
        Ok(self
            .stencils
            .iter()
            .map(|s| stencil_value(s, &field.values, coeffs, &source).abs())
            .fold(0.0, f64::max))
    }
}

/// Smallest positive `s` with `|p + s e| = radius`, for a unit axis vector `e`.
fn first_crossing(y: f64, eta: f64, e: (f64, f64), radius: f64) -> Option<f64> {
    let pe = y * e.0 + eta * e.1;
    let c = y * y + eta * eta - radius * radius;
    let disc = pe * pe - c;
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    [-pe - root, -pe + root]
        .into_iter()
        .filter(|s| *s > 0.0)
        .reduce(f64::min)
}

#[inline]
fn stencil_value(s: &NodeStencil, v: &[f64], coeffs: &FrameCoeffs, source: &FrameSource) -> f64 {
    let v0 = v[s.node];
    let (yl, yr) = s.y_axis.values(v);
    let (ed, eu) = s.eta_axis.values(v);
    let [wl, wr] = s.y_axis.second;
    let [wd, wu] = s.eta_axis.second;
    let v_yy = wl * yl + wr * yr - (wl + wr) * v0;
    let v_ee = wd * ed + wu * eu - (wd + wu) * v0;
    let [gl, gr, g0] = s.y_axis.first;
    let [gd, gu, ge] = s.eta_axis.first;
    let v_y = gl * yl + gr * yr + g0 * v0;
    let v_e = gd * ed + gu * eu + ge * v0;
    coeffs.d(s.eta) * v_yy + v_ee + coeffs.c1(s.y) * v_y + coeffs.c2 * v_e + source.eval(v0)
}

/// Which side of the circle `ρ = radius` a field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Inside,
    Outside,
}

/// Outward (away from the origin) normal derivative at `radius·(cos a, sin a)`.
///
/// Fits a cubic through the boundary value and samples at distances
/// `h, 2h, 3h` into the field's side, `h = max(dy, dη)`. With a domain the
/// samples are biquadratic interpolants built from unknown nodes only;
/// without one they are bilinear and `h` is widened to `1.5·max(dy, dη)` so
/// that every cell used lies on the field's side. `boundary_value = None`
/// samples the field at the boundary point itself.
pub fn normal_derivative(
    field: &Field,
    radius: f64,
    angle: f64,
    side: Side,
    boundary_value: Option<f64>,
    domain: Option<&FrameDomain>,
) -> Result<f64> {
    let h = match domain {
        Some(_) => field.spec.dx().max(field.spec.dtheta()),
        None => normal_spacing(&field.spec),
    };
    let (c, s) = (angle.cos(), angle.sin());
    let dir = match side {
        Side::Inside => -1.0,
        Side::Outside => 1.0,
    };
    if side == Side::Inside && radius <= 3.0 * h + 2.0 * field.spec.dx().max(field.spec.dtheta()) {
        return Err(Error::config(format!(
            "radius {radius} too small for the normal stencil with spacing {h}"
        )));
    }
    let at = |dist: f64| -> Result<f64> {
        let rr = radius + dir * dist;
        match domain {
            Some(d) => sample_biquadratic(field, rr * c, rr * s, |k| d.is_unknown(k)),
            None => sample(field, rr * c, rr * s),
        }
    };
    let f0 = match boundary_value {
        Some(v) => v,
        None => at(0.0)?,
    };
    let (f1, f2, f3) = (at(h)?, at(2.0 * h)?, at(3.0 * h)?);
    let slope_into = (-11.0 * f0 + 18.0 * f1 - 9.0 * f2 + 2.0 * f3) / (6.0 * h);
    Ok(dir * slope_into)
}

/// Biquadratic Lagrange interpolation on a 3×3 block of nodes accepted by
/// `valid`. The block nearest to the point is tried first, then blocks shifted
/// by up to two nodes.
pub fn sample_biquadratic(
    field: &Field,
    x: f64,
    theta: f64,
    valid: impl Fn(usize) -> bool,
) -> Result<f64> {
    let s = &field.spec;
    if !s.contains(x, theta) || !x.is_finite() || !theta.is_finite() {
        return Err(Error::OutOfBounds { x, theta });
    }
    let fx = (x - s.x_min) / s.dx();
    let ft = (theta - s.theta_min) / s.dtheta();
    let clamp = |v: f64, n: usize| (v.round() as isize).clamp(1, n as isize - 2);
    let (i0, j0) = (clamp(fx, s.nx), clamp(ft, s.ntheta));
    let mut shifts: Vec<(isize, isize)> = (-2..=2)
        .flat_map(|a| (-2..=2).map(move |b| (a, b)))
        .collect();
    shifts.sort_by(|p, q| {
        let d = |(a, b): (isize, isize)| {
            let dx = (i0 + a) as f64 - fx;
            let dy = (j0 + b) as f64 - ft;
            dx * dx + dy * dy
        };
        d(*p).total_cmp(&d(*q))
    });
    for (a, b) in shifts {
        let (ic, jc) = (i0 + a, j0 + b);
        if ic < 1 || jc < 1 || ic > s.nx as isize - 2 || jc > s.ntheta as isize - 2 {
            continue;
        }
        let (ic, jc) = (ic as usize, jc as usize);
        let ok = (jc - 1..=jc + 1).all(|j| (ic - 1..=ic + 1).all(|i| valid(s.index(i, j))));
        if !ok {
            continue;
        }
        let wx = lagrange3(fx - ic as f64);
        let wt = lagrange3(ft - jc as f64);
        let mut acc = 0.0;
        for (bj, wj) in wt.iter().enumerate() {
            for (bi, wi) in wx.iter().enumerate() {
                acc += wj * wi * field.at(ic + bi - 1, jc + bj - 1);
            }
        }
        return Ok(acc);
    }
    Err(Error::config(format!(
        "no interior 3x3 block near ({x}, {theta}); the region is too thin for the grid"
    )))
}

fn lagrange3(t: f64) -> [f64; 3] {
    [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)]
}

pub fn normal_spacing(spec: &GridSpec) -> f64 {
    1.5 * spec.dx().max(spec.dtheta())
}

/// Frame grid covering `[-2Λ-2, 2Λ+2]²` with spacings `(dy, dη)`.
pub fn frame_spec(radius: f64, dy: f64, deta: f64) -> Result<GridSpec> {
    let half = 2.0 * radius + 2.0;
    let ny = (2.0 * half / dy).round().max(2.0) as usize + 1;
    let ne = (2.0 * half / deta).round().max(2.0) as usize + 1;
    GridSpec::new(-half, half, ny, -half, half, ne)
}
