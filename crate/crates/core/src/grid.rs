//! Uniform rectangular grids over the truncated `(x, θ)` plane and the fields
//! sampled on them.
//!
//! Values are stored row-major with θ as the slow index: node `(i, j)` lives
//! at `j * nx + i`, where `i` indexes x and `j` indexes θ. The same types are
//! reused for moving-frame fields, with `(y, η)` in place of `(x, θ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub ntheta: usize,
}

impl GridSpec {
    pub fn new(
        x_min: f64,
        x_max: f64,
        nx: usize,
        theta_min: f64,
        theta_max: f64,
        ntheta: usize,
    ) -> Result<Self> {
        let spec = Self {
            x_min,
            x_max,
            nx,
            theta_min,
            theta_max,
            ntheta,
        };
        let problems = spec.problems();
        if problems.is_empty() {
            Ok(spec)
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Square-celled grid covering `[lo, hi]²` with the requested spacing
    /// (rounded so that both endpoints are nodes).
    pub fn square(lo: f64, hi: f64, spacing: f64) -> Result<Self> {
        let cells = ((hi - lo) / spacing).round().max(2.0) as usize;
        Self::new(lo, hi, cells + 1, lo, hi, cells + 1)
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.nx < 3 {
            out.push(format!("nx must be at least 3, got {}", self.nx));
        }
        if self.ntheta < 3 {
            out.push(format!("ntheta must be at least 3, got {}", self.ntheta));
        }
        if !(self.x_max > self.x_min) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            out.push(format!(
                "need x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            ));
        }
        if !(self.theta_max > self.theta_min)
            || !self.theta_min.is_finite()
            || !self.theta_max.is_finite()
        {
            out.push(format!(
                "need theta_min < theta_max, got [{}, {}]",
                self.theta_min, self.theta_max
            ));
        }
        out
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dtheta(&self) -> f64 {
        (self.theta_max - self.theta_min) / (self.ntheta - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        if j + 1 == self.ntheta {
            self.theta_max
        } else {
            self.theta_min + j as f64 * self.dtheta()
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn contains(&self, x: f64, theta: f64) -> bool {
        x >= self.x_min && x <= self.x_max && theta >= self.theta_min && theta <= self.theta_max
    }

    /// Trapezoid weight of node `(i, j)`: `dx·dθ` scaled by ½ on each edge.
    pub fn trapezoid_weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i + 1 == self.nx { 0.5 } else { 1.0 };
        let wt = if j == 0 || j + 1 == self.ntheta {
            0.5
        } else {
            1.0
        };
        wx * wt * self.dx() * self.dtheta()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.len()],
            time: 0.0,
        }
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.ntheta {
            let theta = spec.theta(j);
            for i in 0..spec.nx {
                values.push(f(spec.x(i), theta));
            }
        }
        Self {
            spec,
            values,
            time: 0.0,
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Shape(format!(
                "expected {} values for a {}x{} grid, got {}",
                spec.len(),
                spec.nx,
                spec.ntheta,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite value at flat index {k}"
            )));
        }
        Ok(Self { spec, values, time })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let nx = self.spec.nx;
        &self.values[j * nx..(j + 1) * nx]
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Trapezoid quadrature of the field over the box.
    pub fn integral(&self) -> f64 {
        let s = &self.spec;
        let mut total = 0.0;
        for j in 0..s.ntheta {
            for i in 0..s.nx {
                total += s.trapezoid_weight(i, j) * self.at(i, j);
            }
        }
        total
    }

    /// Order-sensitive FNV-1a hash of the raw bit patterns.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.values {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Trapezoid integral over θ of every x-column: `ρ(x) = ∫ n dθ`.
pub fn integrate_theta(field: &Field) -> Vec<f64> {
    let s = &field.spec;
    let h = s.dtheta();
    let mut rho = vec![0.0; s.nx];
    for j in 0..s.ntheta {
        let w = if j == 0 || j + 1 == s.ntheta {
            0.5 * h
        } else {
            h
        };
        for (acc, v) in rho.iter_mut().zip(field.row(j)) {
            *acc += w * v;
        }
    }
    rho
}

/// Bilinear interpolation at `(x, θ)`.
pub fn sample(field: &Field, x: f64, theta: f64) -> Result<f64> {
    let s = &field.spec;
    if !s.contains(x, theta) || !x.is_finite() || !theta.is_finite() {
        return Err(Error::OutOfBounds { x, theta });
    }
    let fx = (x - s.x_min) / s.dx();
    let ft = (theta - s.theta_min) / s.dtheta();
    let i = (fx.floor() as usize).min(s.nx - 2);
    let j = (ft.floor() as usize).min(s.ntheta - 2);
    let tx = fx - i as f64;
    let tt = ft - j as f64;
    let v00 = field.at(i, j);
    let v10 = field.at(i + 1, j);
    let v01 = field.at(i, j + 1);
    let v11 = field.at(i + 1, j + 1);
    Ok((1.0 - tt) * ((1.0 - tx) * v00 + tx * v10) + tt * ((1.0 - tx) * v01 + tx * v11))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    Ellipse,
    Annulus,
}

/// Moving ellipse `(x-X)²/Θ + (θ-Θ)² ≤ Λ²`, or the annulus between radius
/// `Λ` and `2Λ` in the same anisotropic metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub kind: RegionKind,
    pub center_x: f64,
    pub center_theta: f64,
    pub radius: f64,
}

impl Region {
    pub fn ellipse(center_x: f64, center_theta: f64, radius: f64) -> Self {
        Self {
            kind: RegionKind::Ellipse,
            center_x,
            center_theta,
            radius,
        }
    }

    pub fn annulus(center_x: f64, center_theta: f64, radius: f64) -> Self {
        Self {
            kind: RegionKind::Annulus,
            center_x,
            center_theta,
            radius,
        }
    }

    /// `(x-X)²/Θ + (θ-Θ)²`.
    pub fn form(&self, x: f64, theta: f64) -> f64 {
        let dx = x - self.center_x;
        let dt = theta - self.center_theta;
        dx * dx / self.center_theta + dt * dt
    }

    pub fn outer_radius(&self) -> f64 {
        match self.kind {
            RegionKind::Ellipse => self.radius,
            RegionKind::Annulus => 2.0 * self.radius,
        }
    }

    /// Half-widths of the bounding box in x and θ.
    pub fn half_extent(&self) -> (f64, f64) {
        let r = self.outer_radius();
        (r * self.center_theta.sqrt(), r)
    }

    fn check(&self) -> Result<()> {
        if !(self.radius > 0.0) || !(self.center_theta > 0.0) {
            return Err(Error::config(format!(
                "region needs radius > 0 and center_theta > 0, got {} and {}",
                self.radius, self.center_theta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeLabel {
    InteriorE,
    BoundaryE,
    AnnulusA,
    /// Outer rim of the annulus.
    BoundaryA,
    Outside,
}

/// Labels every node against an ellipse and its surrounding annulus.
///
/// A node whose metric radius `√form` lies within half a cell diagonal
/// (measured in the same metric) of `Λ` or `2Λ` is a boundary node.
pub fn classify(spec: &GridSpec, inner: &Region, outer: &Region) -> Result<Vec<NodeLabel>> {
    inner.check()?;
    outer.check()?;
    let lam_in = inner.radius;
    let lam_out = outer.outer_radius();
    let tol = |reg: &Region| {
        0.5 * (spec.dx() * spec.dx() / reg.center_theta + spec.dtheta() * spec.dtheta()).sqrt()
    };
    let (tol_in, tol_out) = (tol(inner), tol(outer));

    let (hx, ht) = outer.half_extent();
    let overlaps = outer.center_x + hx >= spec.x_min
        && outer.center_x - hx <= spec.x_max
        && outer.center_theta + ht >= spec.theta_min
        && outer.center_theta - ht <= spec.theta_max;
    if !overlaps {
        return Err(Error::Truncation(format!(
            "region centred at ({}, {}) lies entirely outside the grid",
            outer.center_x, outer.center_theta
        )));
    }

    let mut labels = Vec::with_capacity(spec.len());
    for j in 0..spec.ntheta {
        let theta = spec.theta(j);
        for i in 0..spec.nx {
            let x = spec.x(i);
            let rin = inner.form(x, theta).sqrt();
            let rout = outer.form(x, theta).sqrt();
            let label = if (rin - lam_in).abs() <= tol_in {
                NodeLabel::BoundaryE
            } else if rin < lam_in {
                NodeLabel::InteriorE
            } else if (rout - lam_out).abs() <= tol_out {
                NodeLabel::BoundaryA
            } else if rout < lam_out {
                NodeLabel::AnnulusA
            } else {
                NodeLabel::Outside
            };
            labels.push(label);
        }
    }
    Ok(labels)
}
