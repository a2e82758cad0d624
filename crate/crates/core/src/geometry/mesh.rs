//! Graded triangular meshes of a [`Domain`].
//!
//! A graded point cloud (boundary points marched along arclength, interior
//! points from quadtree leaves) is triangulated with the boundary polyline as
//! constraints, then Delaunay refinement enforces the angle bound.

use std::collections::HashMap;

use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use super::{dist, norm, sub, Domain, GeometryError, Point};

/// Minimum interior angle every mesh must satisfy (degrees).
pub const MIN_ANGLE_DEG: f64 = 20.0;
const REFINE_ANGLE_DEG: f64 = 28.0;
/// Point spacing as a fraction of the requested element size.
const SPACING: f64 = 0.6;
/// Growth rate of the size field away from the refinement ball.
const GRADE: f64 = 0.3;

/// Localized refinement: element diameters ≤ `local_size` in the ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub center: Point,
    pub radius: f64,
    pub local_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    pub size: f64,
    pub refinement: Option<Refinement>,
}

impl MeshOptions {
    pub fn uniform(size: f64) -> Self {
        Self {
            size,
            refinement: None,
        }
    }

    fn size_at(&self, p: Point) -> f64 {
        match self.refinement {
            None => self.size,
            Some(r) => self.size_at_distance((dist(p, r.center) - r.radius).max(0.0)),
        }
    }

    /// Size field as a function of the distance to the refinement ball.
    fn size_at_distance(&self, d: f64) -> f64 {
        match self.refinement {
            None => self.size,
            Some(r) => (r.local_size + GRADE * d).min(self.size),
        }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if !(self.size > 0.0) || !self.size.is_finite() {
            return Err(GeometryError::InvalidMeshRequest(format!(
                "target size must be positive, got {}",
                self.size
            )));
        }
        if let Some(r) = self.refinement {
            if !(r.local_size > 0.0) || r.local_size > self.size {
                return Err(GeometryError::InvalidMeshRequest(format!(
                    "local size {} must lie in (0, target size {}]",
                    r.local_size, self.size
                )));
            }
            if !(r.radius >= 0.0) {
                return Err(GeometryError::InvalidMeshRequest(format!(
                    "refinement radius must be non-negative, got {}",
                    r.radius
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    /// Boundary parameters of the two endpoints.
    pub params: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub vertices: usize,
    pub triangles: usize,
    pub min_angle_deg: f64,
    pub max_diameter: f64,
    pub area: f64,
}

/// Conforming, positively oriented triangulation.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    /// boundary vertex ids sorted by boundary parameter
    boundary_vertices: Vec<usize>,
    boundary_params: Vec<f64>,
    is_boundary: Vec<bool>,
}

impl Mesh {
    /// Assemble a mesh from raw parts; boundary vertices are those on edges
    /// used by a single triangle. `param_of` supplies boundary parameters.
    pub fn from_parts(
        vertices: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        param_of: impl Fn(usize, Point) -> f64,
    ) -> Result<Self, GeometryError> {
        for (k, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(GeometryError::Triangulation(format!(
                    "triangle {k} references a missing vertex"
                )));
            }
            if signed_area(&vertices, *t) < 0.0 {
                t.swap(1, 2);
            }
        }
        let mut edge_count: HashMap<(usize, usize), u32> = HashMap::new();
        for t in &triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        if let Some(((a, b), c)) = edge_count.iter().find(|(_, c)| **c > 2) {
            return Err(GeometryError::Triangulation(format!(
                "edge ({a},{b}) shared by {c} triangles"
            )));
        }
        let mut is_boundary = vec![false; vertices.len()];
        let mut params = vec![f64::NAN; vertices.len()];
        let mut boundary_edges = Vec::new();
        let mut keys: Vec<_> = edge_count
            .iter()
            .filter(|(_, c)| **c == 1)
            .map(|(k, _)| *k)
            .collect();
        keys.sort_unstable();
        for &(a, b) in &keys {
            for v in [a, b] {
                if !is_boundary[v] {
                    is_boundary[v] = true;
                    params[v] = param_of(v, vertices[v]);
                }
            }
        }
        for (a, b) in keys {
            boundary_edges.push(BoundaryEdge {
                vertices: [a, b],
                params: [params[a], params[b]],
            });
        }
        let mut boundary_vertices: Vec<usize> =
            (0..vertices.len()).filter(|&v| is_boundary[v]).collect();
        boundary_vertices.sort_by(|&a, &b| params[a].total_cmp(&params[b]).then(a.cmp(&b)));
        let boundary_params = boundary_vertices.iter().map(|&v| params[v]).collect();
        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            boundary_vertices,
            boundary_params,
            is_boundary,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// Boundary vertex ids ordered by boundary parameter.
    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }

    /// Boundary parameters aligned with [`Mesh::boundary_vertices`].
    pub fn boundary_params(&self) -> &[f64] {
        &self.boundary_params
    }

    pub fn boundary_points(&self) -> Vec<Point> {
        self.boundary_vertices
            .iter()
            .map(|&v| self.vertices[v])
            .collect()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| signed_area(&self.vertices, self.triangles[t]))
            .sum()
    }

    pub fn stats(&self) -> MeshStats {
        let mut min_angle = f64::INFINITY;
        let mut max_diam: f64 = 0.0;
        for t in 0..self.triangles.len() {
            let p = self.triangle_points(t);
            min_angle = min_angle.min(min_angle_deg(p));
            max_diam = max_diam.max(diameter(p));
        }
        MeshStats {
            vertices: self.vertices.len(),
            triangles: self.triangles.len(),
            min_angle_deg: min_angle,
            max_diameter: max_diam,
            area: self.area(),
        }
    }

    /// Checks orientation, conformity and the angle bound.
    pub fn validate(&self) -> Result<MeshStats, GeometryError> {
        for (k, t) in self.triangles.iter().enumerate() {
            let a = signed_area(&self.vertices, *t);
            if !(a > 0.0) {
                return Err(GeometryError::MeshQuality(format!(
                    "triangle {k} has non-positive signed area {a:e}"
                )));
            }
        }
        // every boundary vertex must have exactly two boundary edges, which
        // rules out hanging vertices on interior edges
        let mut degree = vec![0u32; self.vertices.len()];
        for e in &self.boundary_edges {
            degree[e.vertices[0]] += 1;
            degree[e.vertices[1]] += 1;
        }
        if let Some(v) = self.boundary_vertices.iter().find(|&&v| degree[v] != 2) {
            return Err(GeometryError::MeshQuality(format!(
                "vertex {v} has {} boundary edges (non-conforming mesh)",
                degree[*v]
            )));
        }
        let stats = self.stats();
        if stats.min_angle_deg < MIN_ANGLE_DEG {
            return Err(GeometryError::MeshQuality(format!(
                "minimum angle {:.2}° below the {MIN_ANGLE_DEG}° bound",
                stats.min_angle_deg
            )));
        }
        Ok(stats)
    }
}

pub(crate) fn signed_area(vertices: &[Point], t: [usize; 3]) -> f64 {
    let [a, b, c] = t.map(|i| vertices[i]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn diameter(p: [Point; 3]) -> f64 {
    dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]))
}

fn min_angle_deg(p: [Point; 3]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..3 {
        let a = sub(p[(i + 1) % 3], p[i]);
        let b = sub(p[(i + 2) % 3], p[i]);
        let c = (a[0] * b[0] + a[1] * b[1]) / (norm(a) * norm(b));
        m = m.min(c.clamp(-1.0, 1.0).acos().to_degrees());
    }
    m
}

/// Boundary vertices marched along arclength with spacing ≤ SPACING·size,
/// corners included exactly. Returns `(parameters, points)`.
fn boundary_nodes(domain: &Domain, opts: &MeshOptions) -> (Vec<f64>, Vec<Point>) {
    let l = domain.length();
    let mut breaks: Vec<f64> = domain.corners().to_vec();
    breaks.sort_by(f64::total_cmp);
    let pieces: Vec<(f64, f64)> = if breaks.is_empty() {
        vec![(0.0, l)]
    } else {
        (0..breaks.len())
            .map(|i| {
                let a = breaks[i];
                let b = if i + 1 < breaks.len() {
                    breaks[i + 1]
                } else {
                    breaks[0] + l
                };
                (a, b)
            })
            .collect()
    };
    let closed_loop = breaks.is_empty();
    let mut params = Vec::new();
    for (a, b) in pieces {
        let len = b - a;
        // counting function N(s) = ∫ ds / spacing(s)
        let mut ts = vec![a];
        let mut ns = vec![0.0];
        let mut t = a;
        let mut acc = 0.0;
        while t < b {
            let sp = SPACING * opts.size_at(domain.point(t));
            let dt = (sp / 8.0).min(len / 8.0).min(b - t);
            let mid = SPACING * opts.size_at(domain.point(t + 0.5 * dt));
            acc += dt / mid;
            t += dt;
            ts.push(t);
            ns.push(acc);
        }
        let min_count = if closed_loop { 8 } else { 1 };
        let n = (acc.ceil() as usize).max(min_count);
        let mut j = 0;
        for k in 0..n {
            let target = acc * k as f64 / n as f64;
            while j + 1 < ns.len() && ns[j + 1] < target {
                j += 1;
            }
            let s = if k == 0 {
                a
            } else {
                let f = (target - ns[j]) / (ns[j + 1] - ns[j]);
                ts[j] + f * (ts[j + 1] - ts[j])
            };
            params.push(domain.wrap(s));
        }
    }
    let points = params.iter().map(|&s| domain.point(s)).collect();
    (params, points)
}

fn interior_nodes(domain: &Domain, opts: &MeshOptions) -> Vec<Point> {
    let [lo, hi] = domain.bounding_box();
    let side = (hi[0] - lo[0]).max(hi[1] - lo[1]) * 1.000_001;
    let mut out = Vec::new();
    let mut stack = vec![(lo[0], lo[1], side)];
    while let Some((x0, y0, s)) = stack.pop() {
        let c = [x0 + 0.5 * s, y0 + 0.5 * s];
        let inside = domain.inside(c);
        let half_diag = s * std::f64::consts::FRAC_1_SQRT_2;
        if !inside && domain.distance_to_boundary(c) > half_diag {
            continue;
        }
        let d = match opts.refinement {
            None => 0.0,
            Some(r) => {
                let dx = (r.center[0] - r.center[0].clamp(x0, x0 + s)).abs();
                let dy = (r.center[1] - r.center[1].clamp(y0, y0 + s)).abs();
                (dx.hypot(dy) - r.radius).max(0.0)
            }
        };
        let spacing = SPACING * opts.size_at_distance(d);
        if s > spacing {
            let h = 0.5 * s;
            stack.push((x0, y0, h));
            stack.push((x0 + h, y0, h));
            stack.push((x0, y0 + h, h));
            stack.push((x0 + h, y0 + h, h));
        } else if inside && domain.distance_to_boundary(c) >= 0.5 * SPACING * opts.size_at(c) {
            out.push(c);
        }
    }
    // the traversal order is deterministic; sort anyway so insertion order does
    // not depend on stack mechanics
    out.sort_by(|a, b| a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0])));
    out
}

type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;

fn inner_triangles(cdt: &Cdt, excluded: &[spade::handles::FixedFaceHandle<spade::handles::InnerTag>]) -> Vec<[usize; 3]> {
    let excluded: std::collections::HashSet<_> = excluded.iter().copied().collect();
    cdt.inner_faces()
        .filter(|f| !excluded.contains(&f.fix()))
        .map(|f| f.vertices().map(|v| v.fix().index()))
        .collect()
}

/// Generate a quality triangular mesh of `domain`.
pub fn make_mesh(domain: &Domain, opts: &MeshOptions) -> Result<Mesh, GeometryError> {
    opts.validate()?;
    let (params, bpoints) = boundary_nodes(domain, opts);
    let interior = interior_nodes(domain, opts);

    let mut cdt = Cdt::new();
    let tri_err = |e: spade::InsertionError| GeometryError::Triangulation(format!("{e:?}"));
    let mut handles = Vec::with_capacity(bpoints.len());
    for p in &bpoints {
        handles.push(cdt.insert(Point2::new(p[0], p[1])).map_err(tri_err)?);
    }
    let mut known_params: HashMap<usize, f64> = HashMap::new();
    for (h, s) in handles.iter().zip(&params) {
        known_params.insert(h.index(), *s);
    }
    for i in 0..handles.len() {
        cdt.add_constraint(handles[i], handles[(i + 1) % handles.len()]);
    }
    for p in &interior {
        cdt.insert(Point2::new(p[0], p[1])).map_err(tri_err)?;
    }

    let base_vertices = cdt.num_vertices();
    let mut excluded = Vec::new();
    for round in 0..12 {
        let result = cdt.refine(
            RefinementParameters::<f64>::new()
                .exclude_outer_faces(true)
                .with_angle_limit(AngleLimit::from_deg(REFINE_ANGLE_DEG))
                .with_max_additional_vertices(base_vertices * 4 + 10_000),
        );
        excluded = result.excluded_faces;
        let positions: Vec<Point> = cdt.vertices().map(|v| [v.position().x, v.position().y]).collect();
        let tris = inner_triangles(&cdt, &excluded);
        let mut extra = Vec::new();
        for t in &tris {
            let p = t.map(|i| positions[i]);
            let diam = diameter(p);
            let bound = size_bound(opts, p);
            if diam > bound {
                extra.push([
                    (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                    (p[0][1] + p[1][1] + p[2][1]) / 3.0,
                ]);
            }
        }
        if extra.is_empty() {
            break;
        }
        if round == 11 {
            return Err(GeometryError::MeshQuality(format!(
                "{} triangles still exceed the requested element size",
                extra.len()
            )));
        }
        for p in extra {
            cdt.insert(Point2::new(p[0], p[1])).map_err(tri_err)?;
        }
    }

    let positions: Vec<Point> = cdt.vertices().map(|v| [v.position().x, v.position().y]).collect();
    let tris = inner_triangles(&cdt, &excluded);
    // compact: drop vertices not referenced by an inner triangle
    let mut remap = vec![usize::MAX; positions.len()];
    let mut vertices = Vec::new();
    let mut origin = Vec::new();
    let mut triangles = Vec::with_capacity(tris.len());
    for t in tris {
        let mut out = [0; 3];
        for (k, v) in t.iter().enumerate() {
            if remap[*v] == usize::MAX {
                remap[*v] = vertices.len();
                vertices.push(positions[*v]);
                origin.push(*v);
            }
            out[k] = remap[*v];
        }
        triangles.push(out);
    }
    let mesh = Mesh::from_parts(vertices, triangles, |v, p| match known_params.get(&origin[v]) {
        Some(s) => *s,
        None => domain.parameter_of(p),
    })?;
    mesh.validate()?;
    Ok(mesh)
}

fn size_bound(opts: &MeshOptions, p: [Point; 3]) -> f64 {
    match opts.refinement {
        Some(r) if p.iter().any(|q| dist(*q, r.center) <= r.radius) => r.local_size,
        _ => opts.size,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_domain, DomainSpec, RadiusSeries};
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_mesh_area() {
        let d = build_domain(&DomainSpec::UnitDisk).unwrap();
        let m = make_mesh(&d, &MeshOptions::uniform(0.1)).unwrap();
        let st = m.validate().unwrap();
        assert!((PI - st.area).abs() <= 0.05);
        assert!(st.max_diameter <= 0.1 + 1e-12);
    }

    #[test]
    fn square_mesh_is_exact() {
        let d = build_domain(&DomainSpec::Polygon(vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
        ]))
        .unwrap();
        let m = make_mesh(&d, &MeshOptions::uniform(0.1)).unwrap();
        assert!((m.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn local_refinement_bounds_diameters() {
        let d = build_domain(&DomainSpec::UnitDisk).unwrap();
        let r = Refinement {
            center: [1.0, 0.0],
            radius: 0.2,
            local_size: 0.01,
        };
        let m = make_mesh(
            &d,
            &MeshOptions {
                size: 0.1,
                refinement: Some(r),
            },
        )
        .unwrap();
        for t in 0..m.triangles().len() {
            let p = m.triangle_points(t);
            if p.iter().any(|q| dist(*q, r.center) <= r.radius) {
                assert!(diameter(p) <= 0.01 + 1e-12);
            }
        }
    }

    #[test]
    fn star_mesh_is_valid() {
        let d = build_domain(&DomainSpec::Star(RadiusSeries {
            mean: 1.0,
            cos: vec![0.0, 0.0, 0.3],
            sin: vec![],
        }))
        .unwrap();
        let m = make_mesh(&d, &MeshOptions::uniform(0.08)).unwrap();
        m.validate().unwrap();
        // boundary parameters increase around the loop
        assert!(m.boundary_params().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_bad_requests() {
        let d = build_domain(&DomainSpec::UnitDisk).unwrap();
        assert!(make_mesh(&d, &MeshOptions::uniform(0.0)).is_err());
        let bad = MeshOptions {
            size: 0.1,
            refinement: Some(Refinement {
                center: [1.0, 0.0],
                radius: 0.1,
                local_size: 0.2,
            }),
        };
        assert!(matches!(make_mesh(&d, &bad), Err(GeometryError::InvalidMeshRequest(_))));
    }
}
