//! Planar singular solutions u(z) = z₂/|z|² centred just outside a boundary
//! point, their boundary traces, and the calibration constants c₀(h), c₁(h).

use std::f64::consts::FRAC_PI_4;

use thiserror::Error;

use crate::fem::{BoundaryData, BoundaryTrace, FemError};
use crate::geometry::{BoundaryFrame, Domain, Mesh, Point};
use crate::quadrature::{integrate_with_breaks, QuadratureError, Tolerance};

/// Half-plane limit of c₀(h): ∫_{x₂>1} |x|⁻⁴ dx.
pub const HALF_PLANE_C0: f64 = FRAC_PI_4;
/// Flat-boundary limit of c₁(h).
pub const HALF_PLANE_C1: f64 = -FRAC_PI_4;

/// Relative accuracy demanded of the calibration quadratures.
const CALIBRATION_RTOL: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SingularError {
    #[error("evaluation at the pole (|z| = {0:e})")]
    Pole(f64),
    #[error("offset h must be positive and finite, got {0}")]
    InvalidOffset(f64),
    #[error("h = {h} exceeds validity radius / 5 = {limit}")]
    OffsetTooLarge { h: f64, limit: f64 },
    #[error("boundary conductivity {value} at node {index} is not positive")]
    NonPositiveGamma { index: usize, value: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// u_h in the frame of a boundary point: z = R(x − y) + h e₂.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularFamily {
    frame: BoundaryFrame,
    h: f64,
}

impl SingularFamily {
    pub fn new(frame: BoundaryFrame, h: f64) -> Result<Self, SingularError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(SingularError::InvalidOffset(h));
        }
        Ok(Self { frame, h })
    }

    pub fn frame(&self) -> &BoundaryFrame {
        &self.frame
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Always 2 for this implementation.
    pub fn dimension(&self) -> usize {
        2
    }

    /// The pole −h e₂ in global coordinates (outside Ω, along the outward normal).
    pub fn pole(&self) -> Point {
        self.frame.inverse([0.0, -self.h])
    }

    fn z(&self, x: Point) -> Result<Point, SingularError> {
        let l = self.frame.forward(x);
        let z = [l[0], l[1] + self.h];
        let r = z[0].hypot(z[1]);
        if r < 1e-14 {
            return Err(SingularError::Pole(r));
        }
        Ok(z)
    }

    pub fn u_value(&self, x: Point) -> Result<f64, SingularError> {
        let z = self.z(x)?;
        Ok(z[1] / (z[0] * z[0] + z[1] * z[1]))
    }

    /// Gradient in global coordinates.
    pub fn u_gradient(&self, x: Point) -> Result<Point, SingularError> {
        let z = self.z(x)?;
        let r2 = z[0] * z[0] + z[1] * z[1];
        // ∇u = e₂/|z|² − 2 z₂ z/|z|⁴
        let k = 2.0 * z[1] / (r2 * r2);
        let local = [-k * z[0], 1.0 / r2 - k * z[1]];
        Ok(self.frame.inverse_vector(local))
    }
}

/// f₀ = h^{n/2} u_h at the boundary vertices.
pub fn trace_f0(family: &SingularFamily, mesh: &Mesh) -> Result<BoundaryData, SingularError> {
    let scale = family.h.sqrt().powi(family.dimension() as i32);
    let mut err = None;
    let data = BoundaryData::from_fn(mesh, |p, _| match family.u_value(p) {
        Ok(u) => scale * u,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(data),
    }
}

/// f₁ = h^{n/2} γ^{−1/2} u_h, with γ read from the boundary trace.
pub fn trace_f1(
    family: &SingularFamily,
    mesh: &Mesh,
    gamma: &BoundaryTrace,
) -> Result<BoundaryData, SingularError> {
    let f0 = trace_f0(family, mesh)?;
    let mut values = Vec::with_capacity(f0.len());
    for (index, (v, s)) in f0.values().iter().zip(mesh.boundary_params()).enumerate() {
        let g = gamma.value(*s);
        if !(g > 0.0) {
            return Err(SingularError::NonPositiveGamma { index, value: g });
        }
        values.push(v / g.sqrt());
    }
    Ok(BoundaryData::new(mesh, values)?)
}

fn check_offset(frame: &BoundaryFrame, h: f64) -> Result<(), SingularError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(SingularError::InvalidOffset(h));
    }
    let limit = frame.validity_radius() / 5.0;
    if h > limit {
        return Err(SingularError::OffsetTooLarge { h, limit });
    }
    Ok(())
}

fn tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-15,
        rel: 1e-11,
        max_intervals: 20_000,
    }
}

fn accept(value: f64, error: f64) -> Result<f64, SingularError> {
    if error <= CALIBRATION_RTOL * value.abs() {
        Ok(value)
    } else {
        Err(QuadratureError {
            estimate: value,
            error,
            intervals: 0,
        }
        .into())
    }
}

/// Breakpoints s₀ ± h·2^k, k ≥ −2, inside (s₀ − L/2, s₀ + L/2), plus corners.
fn peak_breaks(domain: &Domain, s0: f64, h: f64) -> Vec<f64> {
    let half = 0.5 * domain.length();
    let mut b = vec![s0];
    let mut w = 0.25 * h;
    while w < half {
        b.push(s0 - w);
        b.push(s0 + w);
        w *= 2.0;
    }
    for &c in domain.corners() {
        // representative of the corner in the window around s₀
        let d = (c - s0 + half).rem_euclid(domain.length()) - half;
        b.push(s0 + d);
    }
    b
}

/// c₁(h) = −½ hⁿ⁻¹ ∫_∂Ω u_h² ds.
pub fn c1_constant(domain: &Domain, frame: &BoundaryFrame, h: f64) -> Result<f64, SingularError> {
    check_offset(frame, h)?;
    let fam = SingularFamily::new(frame.clone(), h)?;
    let s0 = frame.param();
    let half = 0.5 * domain.length();
    let integrand = |s: f64| {
        let z = fam.z(domain.point(s)).map(|z| z[1] / (z[0] * z[0] + z[1] * z[1]));
        z.map(|u| u * u).unwrap_or(f64::NAN)
    };
    let r = integrate_with_breaks(
        integrand,
        s0 - half,
        s0 + half,
        &peak_breaks(domain, s0, h),
        tolerance(),
    )?;
    let value = -0.5 * h * r.value;
    accept(value, 0.5 * h * r.error)
}

/// Distance from the pole to the boundary point at `s`, with monotone pieces
/// between refined extrema.
struct PoleDistance<'a> {
    domain: &'a Domain,
    pole: Point,
    /// (s, d) at the extrema in increasing s over one period; the last piece
    /// wraps to the first extremum plus L
    extrema: Vec<(f64, f64)>,
}

impl<'a> PoleDistance<'a> {
    fn new(domain: &'a Domain, pole: Point, s0: f64, h: f64) -> Self {
        let d = |s: f64| {
            let p = domain.point(s);
            (p[0] - pole[0]).hypot(p[1] - pole[1])
        };
        let l = domain.length();
        // sampling resolves d on the scale of d itself, and every corner
        let mut s_nodes: Vec<f64> = Vec::new();
        let mut s = s0 - 0.5 * l;
        let end = s0 + 0.5 * l;
        while s < end {
            s_nodes.push(s);
            let step = (0.02 * d(s)).clamp(0.01 * h, l / 512.0);
            s += step;
        }
        for &c in domain.corners() {
            let rep = (c - s0 + 0.5 * l).rem_euclid(l) - 0.5 * l + s0;
            s_nodes.push(rep);
        }
        s_nodes.sort_by(f64::total_cmp);
        s_nodes.dedup();
        let vals: Vec<f64> = s_nodes.iter().map(|&s| d(s)).collect();
        let n = s_nodes.len();
        let at = |i: isize| -> (f64, f64) {
            let k = i.rem_euclid(n as isize) as usize;
            let shift = i.div_euclid(n as isize) as f64 * l;
            (s_nodes[k] + shift, vals[k])
        };
        let mut extrema = Vec::new();
        for i in 0..n as isize {
            let (sp, dp) = at(i - 1);
            let (sc, dc) = at(i);
            let (sn, dn) = at(i + 1);
            let is_min = dc <= dp && dc < dn;
            let is_max = dc >= dp && dc > dn;
            if is_min || is_max {
                let sign = if is_min { 1.0 } else { -1.0 };
                let (se, de) = golden(|s| sign * d(s), sp, sn, sc);
                extrema.push((se, sign * de));
            }
        }
        extrema.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            domain,
            pole,
            extrema,
        }
    }

    fn distance(&self, s: f64) -> f64 {
        let p = self.domain.point(s);
        (p[0] - self.pole[0]).hypot(p[1] - self.pole[1])
    }

    fn min(&self) -> f64 {
        self.extrema.iter().map(|e| e.1).fold(f64::INFINITY, f64::min)
    }

    fn max(&self) -> f64 {
        self.extrema.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    /// Polar angles (about the pole) of the boundary points at distance `r`.
    fn crossing_angles(&self, r: f64) -> Vec<f64> {
        let l = self.domain.length();
        let m = self.extrema.len();
        let mut out = Vec::new();
        for i in 0..m {
            let (sa, da) = self.extrema[i];
            let (mut sb, db) = self.extrema[(i + 1) % m];
            if i + 1 == m {
                sb += l;
            }
            if (r - da) * (r - db) > 0.0 || da == db {
                continue;
            }
            let increasing = db > da;
            let (mut lo, mut hi) = (sa, sb);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if (self.distance(mid) < r) == increasing {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let p = self.domain.point(0.5 * (lo + hi));
            out.push((p[1] - self.pole[1]).atan2(p[0] - self.pole[0]));
        }
        out
    }

    /// Angular measure of {θ : pole + r e_θ ∈ Ω}.
    fn arc_measure(&self, r: f64) -> f64 {
        let mut angles = self.crossing_angles(r);
        if angles.len() < 2 {
            return 0.0;
        }
        angles.sort_by(f64::total_cmp);
        let tau = std::f64::consts::TAU;
        let mut total = 0.0;
        for i in 0..angles.len() {
            let a = angles[i];
            let b = if i + 1 < angles.len() {
                angles[i + 1]
            } else {
                angles[0] + tau
            };
            let mid = 0.5 * (a + b);
            let q = [self.pole[0] + r * mid.cos(), self.pole[1] + r * mid.sin()];
            if self.domain.inside(q) {
                total += b - a;
            }
        }
        total
    }
}

/// Golden-section minimization of `f` on `[a, b]`, seeded by `x0`.
fn golden(f: impl Fn(f64) -> f64, a: f64, b: f64, x0: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    for _ in 0..100 {
        if hi - lo <= 1e-15 * (1.0 + lo.abs()) {
            break;
        }
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let xm = 0.5 * (lo + hi);
    let (fm, f0) = (f(xm), f(x0));
    if f0 < fm {
        (x0, f0)
    } else {
        (xm, fm)
    }
}

/// c₀(h) = hⁿ ∫_Ω |∇u_h|² dx, integrated over annuli about the pole:
/// hⁿ ∫ m(r) r⁻³ dr with m(r) the angular measure of Ω on the circle of
/// radius r (in the plane |∇u_h| = |z|⁻²).
pub fn c0_constant(domain: &Domain, frame: &BoundaryFrame, h: f64) -> Result<f64, SingularError> {
    check_offset(frame, h)?;
    let fam = SingularFamily::new(frame.clone(), h)?;
    let pd = PoleDistance::new(domain, fam.pole(), frame.param(), h);
    let (rmin, rmax) = (pd.min(), pd.max());
    let mut breaks: Vec<f64> = pd.extrema.iter().map(|e| e.1).collect();
    let mut r = rmin;
    while r < rmax {
        breaks.push(r);
        r *= 2.0;
    }
    let res = integrate_with_breaks(
        |r| pd.arc_measure(r) / (r * r * r),
        rmin,
        rmax,
        &breaks,
        tolerance(),
    )?;
    accept(h * h * res.value, h * h * res.error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{boundary_frame, build_domain, DomainSpec};

    #[test]
    fn u_value_examples() {
        let frame = BoundaryFrame::from_normal([0.0, 0.0], [0.0, -1.0]);
        let f1 = SingularFamily::new(frame.clone(), 1.0).unwrap();
        assert_eq!(f1.u_value([0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(f1.u_value([0.0, 0.0]).unwrap(), 1.0);
        let f2 = SingularFamily::new(frame, 0.1).unwrap();
        assert!((f2.u_value([0.1, 0.0]).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(f1.u_value([0.0, -1.0]), Err(SingularError::Pole(_))));
    }

    #[test]
    fn u_gradient_examples() {
        let frame = BoundaryFrame::from_normal([0.0, 0.0], [0.0, -1.0]);
        // x = z − h e₂
        let f = SingularFamily::new(frame, 1.0).unwrap();
        let g = f.u_gradient([0.0, 0.0]).unwrap();
        assert!((g[0]).abs() < 1e-15 && (g[1] + 1.0).abs() < 1e-15);
        let g = f.u_gradient([1.0, -1.0]).unwrap();
        assert!((g[0]).abs() < 1e-15 && (g[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn offset_must_respect_validity_radius() {
        let d = build_domain(&DomainSpec::UnitDisk).unwrap();
        let frame = boundary_frame(&d, 0.0).unwrap();
        assert!(matches!(
            c0_constant(&d, &frame, 0.2),
            Err(SingularError::OffsetTooLarge { .. })
        ));
        assert!(c1_constant(&d, &frame, -1.0).is_err());
    }

    #[test]
    fn disk_arc_measure_matches_law_of_cosines() {
        let d = build_domain(&DomainSpec::UnitDisk).unwrap();
        let pole = [1.1, 0.0];
        let pd = PoleDistance::new(&d, pole, 0.0, 0.1);
        assert!((pd.min() - 0.1).abs() < 1e-12);
        assert!((pd.max() - 2.1).abs() < 1e-12);
        for r in [0.15, 0.5, 1.0, 2.0] {
            // circle |x| = 1 meets |x − P| = r where cos φ = (|P|² + r² − 1)/(2|P|r)
            let c: f64 = (1.21 + r * r - 1.0) / (2.2 * r);
            let expected = 2.0 * c.acos();
            assert!((pd.arc_measure(r) - expected).abs() < 1e-10, "r={r}");
        }
    }
}
