//! Computational domains, boundary parametrizations and local boundary frames.
//!
//! Every domain is parametrized by arclength `s ∈ [0, L)` traversed
//! counterclockwise, so the interior lies to the left of the tangent and the
//! outward normal is the tangent rotated clockwise.

mod mesh;

use std::f64::consts::TAU;

use thiserror::Error;

use crate::quadrature::{gauss_legendre, gk15};

pub use mesh::{make_mesh, BoundaryEdge, Mesh, MeshOptions, MeshStats, Refinement};

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not simple: edges {0} and {1} intersect")]
    NonSimplePolygon(usize, usize),
    #[error("polygon has a zero-length edge at vertex {0}")]
    DegenerateEdge(usize),
    #[error("radius function is not strictly positive (min {min:e} near θ = {theta})")]
    NonPositiveRadius { min: f64, theta: f64 },
    #[error("normal undefined at corner parameter s = {0}")]
    NormalUndefined(f64),
    #[error("|x'| = {requested} exceeds the frame validity radius {radius}")]
    OutsideValidityRadius { requested: f64, radius: f64 },
    #[error("invalid mesh request: {0}")]
    InvalidMeshRequest(String),
    #[error("mesh quality bound violated: {0}")]
    MeshQuality(String),
    #[error("triangulation failed: {0}")]
    Triangulation(String),
}

/// Finite Fourier series `r(θ) = mean + Σ_k cos[k-1]·cos kθ + sin[k-1]·sin kθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusSeries {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl RadiusSeries {
    pub fn value(&self, theta: f64) -> f64 {
        self.value_and_derivative(theta).0
    }

    pub fn value_and_derivative(&self, theta: f64) -> (f64, f64) {
        let mut r = self.mean;
        let mut dr = 0.0;
        let terms = self.cos.len().max(self.sin.len());
        for k in 1..=terms {
            let a = self.cos.get(k - 1).copied().unwrap_or(0.0);
            let b = self.sin.get(k - 1).copied().unwrap_or(0.0);
            let kf = k as f64;
            let (s, c) = (kf * theta).sin_cos();
            r += a * c + b * s;
            dr += kf * (-a * s + b * c);
        }
        (r, dr)
    }

    fn derivative_bound(&self) -> f64 {
        let mut m = 0.0;
        for (k, a) in self.cos.iter().enumerate() {
            m += (k + 1) as f64 * a.abs();
        }
        for (k, b) in self.sin.iter().enumerate() {
            m += (k + 1) as f64 * b.abs();
        }
        m
    }

    /// Series of the same curve rotated counterclockwise by `angle`.
    pub fn rotated(&self, angle: f64) -> Self {
        // r'(θ) = r(θ − φ)
        let terms = self.cos.len().max(self.sin.len());
        let mut cos = vec![0.0; terms];
        let mut sin = vec![0.0; terms];
        for k in 1..=terms {
            let a = self.cos.get(k - 1).copied().unwrap_or(0.0);
            let b = self.sin.get(k - 1).copied().unwrap_or(0.0);
            let (s, c) = (k as f64 * angle).sin_cos();
            cos[k - 1] = a * c - b * s;
            sin[k - 1] = a * s + b * c;
        }
        Self {
            mean: self.mean,
            cos,
            sin,
        }
    }
}

/// Descriptor accepted by [`build_domain`].
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    UnitDisk,
    Star(RadiusSeries),
    Polygon(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainKind {
    UnitDisk,
    Star,
    Polygon,
}

const STAR_PANELS: usize = 2048;

#[derive(Debug, Clone)]
enum Shape {
    Disk,
    Star {
        series: RadiusSeries,
        /// cumulative arclength at θ_k = 2πk/STAR_PANELS, k = 0..=STAR_PANELS
        table: Vec<f64>,
        gl_nodes: Vec<f64>,
        gl_weights: Vec<f64>,
    },
    Polygon {
        vertices: Vec<Point>,
        /// arclength at each vertex; last entry is the perimeter
        cumulative: Vec<f64>,
    },
}

/// A bounded planar domain with an arclength boundary parametrization.
#[derive(Debug, Clone)]
pub struct Domain {
    shape: Shape,
    length: f64,
    corners: Vec<f64>,
}

pub fn build_domain(spec: &DomainSpec) -> Result<Domain, GeometryError> {
    match spec {
        DomainSpec::UnitDisk => Ok(Domain {
            shape: Shape::Disk,
            length: TAU,
            corners: Vec::new(),
        }),
        DomainSpec::Star(series) => build_star(series),
        DomainSpec::Polygon(vertices) => build_polygon(vertices),
    }
}

fn build_star(series: &RadiusSeries) -> Result<Domain, GeometryError> {
    let samples = 8192;
    let dtheta = TAU / samples as f64;
    let mut min = f64::INFINITY;
    let mut arg = 0.0;
    for i in 0..samples {
        let t = i as f64 * dtheta;
        let r = series.value(t);
        if r < min {
            min = r;
            arg = t;
        }
    }
    // between samples r can dip by at most max|r'|·Δθ/2
    let margin = series.derivative_bound() * dtheta * 0.5;
    if !(min - margin > 0.0) {
        return Err(GeometryError::NonPositiveRadius { min, theta: arg });
    }
    let (gl_nodes, gl_weights) = gauss_legendre(10);
    let speed = |t: f64| {
        let (r, dr) = series.value_and_derivative(t);
        (r * r + dr * dr).sqrt()
    };
    let mut table = Vec::with_capacity(STAR_PANELS + 1);
    table.push(0.0);
    let h = TAU / STAR_PANELS as f64;
    let mut acc = 0.0;
    for k in 0..STAR_PANELS {
        let a = k as f64 * h;
        acc += gk15(&mut |t| speed(t), a, a + h).value;
        table.push(acc);
    }
    Ok(Domain {
        shape: Shape::Star {
            series: series.clone(),
            table,
            gl_nodes,
            gl_weights,
        },
        length: acc,
        corners: Vec::new(),
    })
}

fn build_polygon(input: &[Point]) -> Result<Domain, GeometryError> {
    let n = input.len();
    if n < 3 {
        return Err(GeometryError::TooFewVertices(n));
    }
    for i in 0..n {
        let j = (i + 1) % n;
        if dist(input[i], input[j]) <= 1e-14 {
            return Err(GeometryError::DegenerateEdge(i));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(input[i], input[(i + 1) % n], input[j], input[(j + 1) % n]) {
                return Err(GeometryError::NonSimplePolygon(i, j));
            }
        }
    }
    let mut vertices = input.to_vec();
    let signed: f64 = (0..n)
        .map(|i| cross(vertices[i], vertices[(i + 1) % n]))
        .sum();
    if signed < 0.0 {
        vertices.reverse();
    }
    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0.0);
    for i in 0..n {
        let l = dist(vertices[i], vertices[(i + 1) % n]);
        cumulative.push(cumulative[i] + l);
    }
    let length = cumulative[n];
    let corners = (0..n)
        .filter(|&i| {
            let prev = vertices[(i + n - 1) % n];
            let next = vertices[(i + 1) % n];
            let a = sub(vertices[i], prev);
            let b = sub(next, vertices[i]);
            cross(a, b).abs() > 1e-12 * norm(a) * norm(b)
        })
        .map(|i| cumulative[i])
        .collect();
    Ok(Domain {
        shape: Shape::Polygon {
            vertices,
            cumulative,
        },
        length,
        corners,
    })
}

impl Domain {
    pub fn kind(&self) -> DomainKind {
        match self.shape {
            Shape::Disk => DomainKind::UnitDisk,
            Shape::Star { .. } => DomainKind::Star,
            Shape::Polygon { .. } => DomainKind::Polygon,
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Boundary parameters where the normal is discontinuous.
    pub fn corners(&self) -> &[f64] {
        &self.corners
    }

    pub fn wrap(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.length);
        if w >= self.length {
            0.0
        } else {
            w
        }
    }

    /// Periodic distance between two boundary parameters.
    pub fn param_distance(&self, a: f64, b: f64) -> f64 {
        let d = self.wrap(a - b);
        d.min(self.length - d)
    }

    pub fn distance_to_nearest_corner(&self, s: f64) -> f64 {
        self.corners
            .iter()
            .map(|c| self.param_distance(s, *c))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_corner(&self, s: f64) -> bool {
        self.distance_to_nearest_corner(s) <= 1e-9 * self.length
    }

    pub fn point(&self, s: f64) -> Point {
        let s = self.wrap(s);
        match &self.shape {
            Shape::Disk => [s.cos(), s.sin()],
            Shape::Star { series, .. } => {
                let t = self.star_theta(s);
                let r = series.value(t);
                [r * t.cos(), r * t.sin()]
            }
            Shape::Polygon {
                vertices,
                cumulative,
            } => {
                let i = polygon_edge(cumulative, s);
                let a = vertices[i];
                let b = vertices[(i + 1) % vertices.len()];
                let t = (s - cumulative[i]) / (cumulative[i + 1] - cumulative[i]);
                lerp(a, b, t)
            }
        }
    }

    /// Unit tangent in the direction of increasing `s`. At a polygon corner
    /// this returns the tangent of the edge starting there.
    pub fn tangent(&self, s: f64) -> Point {
        let s = self.wrap(s);
        match &self.shape {
            Shape::Disk => [-s.sin(), s.cos()],
            Shape::Star { series, .. } => {
                let t = self.star_theta(s);
                let (r, dr) = series.value_and_derivative(t);
                let (sn, cs) = t.sin_cos();
                let d = [dr * cs - r * sn, dr * sn + r * cs];
                scale(d, 1.0 / norm(d))
            }
            Shape::Polygon {
                vertices,
                cumulative,
            } => {
                let i = polygon_edge(cumulative, s);
                let d = sub(vertices[(i + 1) % vertices.len()], vertices[i]);
                scale(d, 1.0 / norm(d))
            }
        }
    }

    /// Outward unit normal; rejected at corners.
    pub fn normal(&self, s: f64) -> Result<Point, GeometryError> {
        if self.is_corner(s) {
            return Err(GeometryError::NormalUndefined(s));
        }
        let t = self.tangent(s);
        Ok([t[1], -t[0]])
    }

    pub fn inside(&self, p: Point) -> bool {
        match &self.shape {
            Shape::Disk => p[0] * p[0] + p[1] * p[1] < 1.0,
            Shape::Star { series, .. } => {
                let r = norm(p);
                r < series.value(p[1].atan2(p[0]))
            }
            Shape::Polygon { vertices, .. } => point_in_polygon(vertices, p),
        }
    }

    /// Unsigned distance from `p` to the boundary curve.
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        match &self.shape {
            Shape::Disk => (1.0 - norm(p)).abs(),
            Shape::Polygon { vertices, .. } => {
                let n = vertices.len();
                (0..n)
                    .map(|i| point_segment_distance(p, vertices[i], vertices[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
            Shape::Star { series, .. } => {
                let x = |t: f64| {
                    let r = series.value(t);
                    [r * t.cos(), r * t.sin()]
                };
                let samples = 256;
                let dt = TAU / samples as f64;
                let mut best = (f64::INFINITY, 0.0);
                for i in 0..samples {
                    let t = i as f64 * dt;
                    let d = dist(x(t), p);
                    if d < best.0 {
                        best = (d, t);
                    }
                }
                let (mut lo, mut hi) = (best.1 - dt, best.1 + dt);
                // golden-section refinement on the bracketing samples
                let g = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..60 {
                    let m1 = hi - g * (hi - lo);
                    let m2 = lo + g * (hi - lo);
                    if dist(x(m1), p) < dist(x(m2), p) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                dist(x(0.5 * (lo + hi)), p).min(best.0)
            }
        }
    }

    /// Boundary parameter of the point of ∂Ω closest to `p` (for points on or
    /// very near the boundary).
    pub fn parameter_of(&self, p: Point) -> f64 {
        match &self.shape {
            Shape::Disk => self.wrap(p[1].atan2(p[0])),
            Shape::Star { .. } => {
                let t = p[1].atan2(p[0]).rem_euclid(TAU);
                self.star_arclength(t)
            }
            Shape::Polygon {
                vertices,
                cumulative,
            } => {
                let n = vertices.len();
                let mut best = (f64::INFINITY, 0.0);
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let ab = sub(b, a);
                    let t = (dot(sub(p, a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
                    let d = dist(p, lerp(a, b, t));
                    if d < best.0 {
                        best = (d, cumulative[i] + t * (cumulative[i + 1] - cumulative[i]));
                    }
                }
                self.wrap(best.1)
            }
        }
    }

    /// Axis-aligned bounding box `[min, max]`.
    pub fn bounding_box(&self) -> [Point; 2] {
        match &self.shape {
            Shape::Disk => [[-1.0, -1.0], [1.0, 1.0]],
            Shape::Polygon { vertices, .. } => bbox_of(vertices.iter().copied()),
            Shape::Star { series, .. } => {
                let rmax = (0..4096)
                    .map(|i| series.value(i as f64 * TAU / 4096.0))
                    .fold(0.0, f64::max)
                    + series.derivative_bound() * TAU / 8192.0;
                [[-rmax, -rmax], [rmax, rmax]]
            }
        }
    }

    /// Vertices of a polygonal domain (counterclockwise).
    pub fn polygon_vertices(&self) -> Option<&[Point]> {
        match &self.shape {
            Shape::Polygon { vertices, .. } => Some(vertices),
            _ => None,
        }
    }

    fn star_theta(&self, s: f64) -> f64 {
        let Shape::Star {
            series,
            table,
            gl_nodes,
            gl_weights,
        } = &self.shape
        else {
            unreachable!("star_theta on a non-star domain")
        };
        let h = TAU / STAR_PANELS as f64;
        let k = match table.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(k) => return (k as f64 * h).min(TAU),
            Err(k) => k.clamp(1, STAR_PANELS) - 1,
        };
        let a = k as f64 * h;
        let frac = (s - table[k]) / (table[k + 1] - table[k]);
        let mut t = a + frac * h;
        let speed = |t: f64| {
            let (r, dr) = series.value_and_derivative(t);
            (r * r + dr * dr).sqrt()
        };
        for _ in 0..8 {
            let half = 0.5 * (t - a);
            let mid = 0.5 * (t + a);
            let partial: f64 = gl_nodes
                .iter()
                .zip(gl_weights)
                .map(|(x, w)| w * speed(mid + half * x))
                .sum::<f64>()
                * half;
            let g = table[k] + partial - s;
            let dt = g / speed(t);
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        t
    }

    fn star_arclength(&self, theta: f64) -> f64 {
        let Shape::Star {
            series,
            table,
            gl_nodes,
            gl_weights,
        } = &self.shape
        else {
            unreachable!("star_arclength on a non-star domain")
        };
        let h = TAU / STAR_PANELS as f64;
        let k = ((theta / h).floor() as usize).min(STAR_PANELS - 1);
        let a = k as f64 * h;
        let half = 0.5 * (theta - a);
        let mid = 0.5 * (theta + a);
        let partial: f64 = gl_nodes
            .iter()
            .zip(gl_weights)
            .map(|(x, w)| {
                let (r, dr) = series.value_and_derivative(mid + half * x);
                w * (r * r + dr * dr).sqrt()
            })
            .sum::<f64>()
            * half;
        self.wrap(table[k] + partial)
    }

    /// Radius of the ball around `point(s)` inside which ∂Ω is a single graph
    /// over the tangent line, and a bound on that graph's slope there.
    fn graph_region(&self, s: f64, frame_rot: &[[f64; 2]; 2], base: Point) -> (f64, f64) {
        match &self.shape {
            Shape::Disk => {
                let d: f64 = 0.5;
                (d, d / (1.0 - d * d).sqrt())
            }
            Shape::Polygon {
                vertices,
                cumulative,
            } => {
                let n = vertices.len();
                let edge = polygon_edge(cumulative, self.wrap(s));
                let mut d = self
                    .corners
                    .iter()
                    .map(|c| dist(self.point(*c), base))
                    .fold(f64::INFINITY, f64::min);
                for i in 0..n {
                    if i != edge {
                        d = d.min(point_segment_distance(base, vertices[i], vertices[(i + 1) % n]));
                    }
                }
                (0.5 * d, 0.0)
            }
            Shape::Star { .. } => {
                // walk along the boundary from s in both directions while the
                // local tangent keeps slope ≤ √3; the graph region is bounded by
                // where that arc ends and by any other part of ∂Ω coming close
                let samples = 4096;
                let ds = self.length / samples as f64;
                let slope_at = |t: f64| {
                    let tl = rotate(frame_rot, self.tangent(t));
                    (tl[1] / tl[0], tl[0])
                };
                let mut arc_end = [samples / 2; 2];
                let mut max_slope: f64 = 0.0;
                for (dir_idx, dir) in [1.0, -1.0].iter().enumerate() {
                    for k in 1..samples / 2 {
                        let t = s + dir * k as f64 * ds;
                        let (slope, tx) = slope_at(t);
                        if tx < 0.5 {
                            arc_end[dir_idx] = k;
                            break;
                        }
                        if dist(self.point(t), base) <= 0.5 {
                            max_slope = max_slope.max(slope.abs());
                        }
                    }
                }
                let mut radius: f64 = 0.5;
                for k in 0..samples {
                    let off = k as f64 * ds;
                    let fwd = k.min(samples - k);
                    let on_arc = if k <= samples / 2 {
                        k < arc_end[0]
                    } else {
                        fwd < arc_end[1]
                    };
                    if !on_arc {
                        radius = radius.min(0.9 * dist(self.point(s + off), base));
                    }
                }
                (radius, max_slope)
            }
        }
    }
}

fn polygon_edge(cumulative: &[f64], s: f64) -> usize {
    let n = cumulative.len() - 1;
    match cumulative.binary_search_by(|v| v.total_cmp(&s)) {
        Ok(k) => k.min(n - 1),
        Err(k) => (k - 1).min(n - 1),
    }
}

/// Rigid motion `x ↦ R(x − y)` placing a boundary point at the origin with the
/// outward normal mapped to `−e₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFrame {
    base: Point,
    param: f64,
    rotation: [[f64; 2]; 2],
    validity_radius: f64,
    lipschitz: f64,
}

pub fn boundary_frame(domain: &Domain, s: f64) -> Result<BoundaryFrame, GeometryError> {
    let s = domain.wrap(s);
    let nu = domain.normal(s)?;
    // R = [[-ν₂, ν₁], [-ν₁, -ν₂]] is the unique rotation with Rν = (0, -1)
    let rotation = [[-nu[1], nu[0]], [-nu[0], -nu[1]]];
    let base = domain.point(s);
    let (validity_radius, lipschitz) = domain.graph_region(s, &rotation, base);
    Ok(BoundaryFrame {
        base,
        param: s,
        rotation,
        validity_radius,
        lipschitz,
    })
}

impl BoundaryFrame {
    /// A frame at an arbitrary base point with a given outward normal; used for
    /// the half-plane reference configuration.
    pub fn from_normal(base: Point, normal: Point) -> Self {
        let n = norm(normal);
        let nu = [normal[0] / n, normal[1] / n];
        Self {
            base,
            param: 0.0,
            rotation: [[-nu[1], nu[0]], [-nu[0], -nu[1]]],
            validity_radius: f64::INFINITY,
            lipschitz: 0.0,
        }
    }

    pub fn base(&self) -> Point {
        self.base
    }

    pub fn param(&self) -> f64 {
        self.param
    }

    pub fn rotation(&self) -> [[f64; 2]; 2] {
        self.rotation
    }

    pub fn validity_radius(&self) -> f64 {
        self.validity_radius
    }

    /// Bound on |ψ'| inside the validity radius.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn forward(&self, x: Point) -> Point {
        rotate(&self.rotation, sub(x, self.base))
    }

    pub fn inverse(&self, z: Point) -> Point {
        let r = &self.rotation;
        add(self.base, [r[0][0] * z[0] + r[1][0] * z[1], r[0][1] * z[0] + r[1][1] * z[1]])
    }

    /// Vector (not point) expressed in the global frame.
    pub fn inverse_vector(&self, v: Point) -> Point {
        let r = &self.rotation;
        [r[0][0] * v[0] + r[1][0] * v[1], r[0][1] * v[0] + r[1][1] * v[1]]
    }
}

/// The local graph ψ with `(x', ψ(x'))` on ∂Ω in frame coordinates.
pub fn local_graph(domain: &Domain, frame: &BoundaryFrame, x1: f64) -> Result<f64, GeometryError> {
    let radius = frame.validity_radius;
    if x1.abs() > radius {
        return Err(GeometryError::OutsideValidityRadius {
            requested: x1.abs(),
            radius,
        });
    }
    if x1 == 0.0 {
        return Ok(0.0);
    }
    let s0 = frame.param;
    let local = |t: f64| frame.forward(domain.point(t));
    // local x₁ increases with s along the graph arc
    let dir = x1.signum();
    let step = radius / 16.0;
    let mut lo = s0;
    let mut hi = s0;
    let mut found = false;
    for k in 1..=128 {
        let t = s0 + dir * k as f64 * step;
        if dir * local(t)[0] >= dir * x1 {
            hi = t;
            found = true;
            break;
        }
        lo = t;
    }
    if !found {
        return Err(GeometryError::OutsideValidityRadius {
            requested: x1.abs(),
            radius,
        });
    }
    let (mut a, mut b) = if dir > 0.0 { (lo, hi) } else { (hi, lo) };
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if local(m)[0] < x1 {
            a = m;
        } else {
            b = m;
        }
    }
    let pa = local(a);
    let pb = local(b);
    if pb[0] == pa[0] {
        return Ok(pa[1]);
    }
    let t = (x1 - pa[0]) / (pb[0] - pa[0]);
    Ok(pa[1] + t * (pb[1] - pa[1]))
}

// --- small vector helpers -------------------------------------------------

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}
#[inline]
pub(crate) fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}
#[inline]
pub(crate) fn scale(a: Point, k: f64) -> Point {
    [a[0] * k, a[1] * k]
}
#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}
#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}
#[inline]
pub(crate) fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}
#[inline]
fn rotate(r: &[[f64; 2]; 2], v: Point) -> Point {
    [r[0][0] * v[0] + r[0][1] * v[1], r[1][0] * v[0] + r[1][1] * v[1]]
}

pub(crate) fn bbox_of(points: impl Iterator<Item = Point>) -> [Point; 2] {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        lo[0] = lo[0].min(p[0]);
        lo[1] = lo[1].min(p[1]);
        hi[0] = hi[0].max(p[0]);
        hi[1] = hi[1].max(p[1]);
    }
    [lo, hi]
}

pub(crate) fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let t = (dot(sub(p, a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
    dist(p, lerp(a, b, t))
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(sub(b, a), sub(c, a))
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: Point, b: Point, c: Point, d: f64| {
        d == 0.0
            && c[0] >= a[0].min(b[0])
            && c[0] <= a[0].max(b[0])
            && c[1] >= a[1].min(b[1])
            && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn point_in_polygon(vertices: &[Point], p: Point) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Counterclockwise rotation of a polygon or point set about the origin.
pub fn rotate_points(points: &[Point], angle: f64) -> Vec<Point> {
    let (s, c) = angle.sin_cos();
    points
        .iter()
        .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Domain {
        build_domain(&DomainSpec::Polygon(vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
        ]))
        .unwrap()
    }

    fn star() -> Domain {
        build_domain(&DomainSpec::Star(RadiusSeries {
            mean: 1.0,
            cos: vec![0.0, 0.0, 0.3],
            sin: vec![],
        }))
        .unwrap()
    }

    #[test]
    fn disk_length() {
        let d = build_domain(&DomainSpec::UnitDisk).unwrap();
        assert!((d.length() - TAU).abs() < 1e-10);
        assert!(d.corners().is_empty());
    }

    #[test]
    fn square_perimeter_and_corners() {
        let d = square();
        assert!((d.length() - 4.0).abs() < 1e-14);
        assert_eq!(d.corners().len(), 4);
    }

    #[test]
    fn clockwise_polygon_is_reoriented() {
        let d = build_domain(&DomainSpec::Polygon(vec![
            [0.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
            [1.0, 0.0],
        ]))
        .unwrap();
        let n = d.normal(0.5).unwrap();
        // first edge after reversal goes (1,0)->(1,1)? whichever, normal must point outward
        let p = d.point(0.5);
        assert!(!d.inside([p[0] + 1e-3 * n[0], p[1] + 1e-3 * n[1]]));
        assert!(d.inside([p[0] - 1e-3 * n[0], p[1] - 1e-3 * n[1]]));
    }

    #[test]
    fn star_length_matches_fine_trapezoid() {
        let d = star();
        // trapezoid oracle at 10⁶ samples: spectrally accurate for this periodic integrand
        let m = 1_000_000;
        let h = TAU / m as f64;
        let oracle: f64 = (0..m)
            .map(|i| {
                let t = i as f64 * h;
                let r = 1.0 + 0.3 * (3.0 * t).cos();
                let dr = -0.9 * (3.0 * t).sin();
                (r * r + dr * dr).sqrt()
            })
            .sum::<f64>()
            * h;
        assert!(((d.length() - oracle) / oracle).abs() < 1e-8, "{} vs {}", d.length(), oracle);
    }

    #[test]
    fn star_parametrization_is_arclength() {
        let d = star();
        let n = 20000;
        let ds = d.length() / n as f64;
        let mut poly = 0.0;
        for i in 0..n {
            poly += dist(d.point(i as f64 * ds), d.point((i + 1) as f64 * ds));
        }
        assert!(((poly - d.length()) / d.length()).abs() < 1e-7);
        // parameter inversion round trip
        for s in [0.0, 0.3, 1.7, 4.2, d.length() - 1e-3] {
            let back = d.parameter_of(d.point(s));
            assert!(d.param_distance(back, s) < 1e-10, "{s} -> {back}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            build_domain(&DomainSpec::Polygon(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])),
            Err(GeometryError::NonSimplePolygon(..))
        ));
        assert!(matches!(
            build_domain(&DomainSpec::Star(RadiusSeries {
                mean: 0.5,
                cos: vec![0.6],
                sin: vec![]
            })),
            Err(GeometryError::NonPositiveRadius { .. })
        ));
        assert!(matches!(
            build_domain(&DomainSpec::Polygon(vec![[0.0, 0.0], [1.0, 0.0]])),
            Err(GeometryError::TooFewVertices(2))
        ));
    }

    #[test]
    fn inside_is_consistent_with_boundary() {
        for d in [build_domain(&DomainSpec::UnitDisk).unwrap(), square(), star()] {
            for k in 0..200 {
                let s = k as f64 * d.length() / 200.0;
                if d.is_corner(s) {
                    continue;
                }
                let p = d.point(s);
                let n = d.normal(s).unwrap();
                let eps = 1e-6;
                assert!(d.inside([p[0] - eps * n[0], p[1] - eps * n[1]]));
                assert!(!d.inside([p[0] + eps * n[0], p[1] + eps * n[1]]));
                assert!((norm(n) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn disk_frame_examples() {
        let d = build_domain(&DomainSpec::UnitDisk).unwrap();
        let f = boundary_frame(&d, 0.0).unwrap();
        let r = f.rotation();
        let img = rotate(&r, [1.0, 0.0]);
        assert!((img[0]).abs() < 1e-15 && (img[1] + 1.0).abs() < 1e-15);
        let f2 = boundary_frame(&d, std::f64::consts::FRAC_PI_2).unwrap();
        let img = rotate(&f2.rotation(), [0.0, 1.0]);
        assert!(img[0].abs() < 1e-15 && (img[1] + 1.0).abs() < 1e-15);
        let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
        assert!((det - 1.0).abs() < 1e-15);
    }

    #[test]
    fn corner_frame_is_rejected() {
        let d = square();
        assert!(matches!(boundary_frame(&d, 1.0), Err(GeometryError::NormalUndefined(_))));
    }

    #[test]
    fn local_graph_examples() {
        let d = build_domain(&DomainSpec::UnitDisk).unwrap();
        let f = boundary_frame(&d, 1.234).unwrap();
        assert_eq!(local_graph(&d, &f, 0.0).unwrap(), 0.0);
        let psi = local_graph(&d, &f, 0.1).unwrap();
        assert!((psi - (1.0 - 0.99f64.sqrt())).abs() < 1e-10);
        let psi = local_graph(&d, &f, -0.1).unwrap();
        assert!((psi - (1.0 - 0.99f64.sqrt())).abs() < 1e-10);
        assert!(local_graph(&d, &f, 0.6).is_err());

        let sq = square();
        let f = boundary_frame(&sq, 0.5).unwrap();
        assert!((f.validity_radius() - 0.25).abs() < 1e-12);
        assert!(local_graph(&sq, &f, 0.1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn star_graph_is_tangent_at_origin() {
        let d = star();
        for s in [0.1, 1.0, 2.5, 5.0] {
            let f = boundary_frame(&d, s).unwrap();
            let dx = 1e-4;
            let left = local_graph(&d, &f, -dx).unwrap();
            let right = local_graph(&d, &f, dx).unwrap();
            assert!(((right - left) / (2.0 * dx)).abs() < 1e-6);
            assert!(f.validity_radius() > 0.05);
        }
    }
}
