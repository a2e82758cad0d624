//! P1 finite elements for div(γ∇u) = 0 with Dirichlet data, and the
//! Dirichlet-to-Neumann quadratic form built on the discrete energy.

mod conductivity;
mod oracle;
mod solver;

use thiserror::Error;

use crate::geometry::{Mesh, Point};

pub use conductivity::{ConductivityField, Preset};
pub use oracle::{BoundaryTrace, Conductor, DtnOracle, Jitter};
pub use solver::{DirichletSystem, SolverKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("triangle {index} is degenerate (signed area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("boundary data has {got} values, mesh has {expected} boundary vertices")]
    DataLength { expected: usize, got: usize },
    #[error("boundary data value {index} is not finite")]
    NonFinite { index: usize },
    #[error("linear solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    Solver { iterations: usize, residual: f64 },
    #[error("invalid conductivity: {0}")]
    InvalidConductivity(String),
    #[error("mesh has no interior vertices")]
    NoInterior,
}

/// Dirichlet data at the boundary vertices of a mesh, in the order of
/// [`Mesh::boundary_vertices`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    values: Vec<f64>,
}

impl BoundaryData {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self, FemError> {
        let expected = mesh.boundary_vertices().len();
        if values.len() != expected {
            return Err(FemError::DataLength {
                expected,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(FemError::NonFinite { index });
        }
        Ok(Self { values })
    }

    /// Samples `f(point, boundary parameter)` at each boundary vertex.
    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(Point, f64) -> f64) -> Result<Self, FemError> {
        let values = mesh
            .boundary_vertices()
            .iter()
            .zip(mesh.boundary_params())
            .map(|(&v, &s)| f(mesh.vertices()[v], s))
            .collect();
        Self::new(mesh, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicates are summed in a fixed order (sorted by row, column, then
    /// insertion index).
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    /// max |a_ij − a_ji| / max |a_ij|
    pub fn asymmetry(&self) -> f64 {
        let mut scale: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                scale = scale.max(v.abs());
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

/// Per-element data: γ̄·area and the three P1 gradients.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Element {
    pub(crate) weight: f64,
    pub(crate) grads: [[f64; 2]; 3],
}

pub(crate) fn p1_gradients(p: [Point; 3]) -> (f64, [[f64; 2]; 3]) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]));
    let k = 0.5 / area;
    let g = [
        [(p[1][1] - p[2][1]) * k, (p[2][0] - p[1][0]) * k],
        [(p[2][1] - p[0][1]) * k, (p[0][0] - p[2][0]) * k],
        [(p[0][1] - p[1][1]) * k, (p[1][0] - p[0][0]) * k],
    ];
    (area, g)
}

/// γ̄ by the edge-midpoint rule.
fn element_mean(gamma: &ConductivityField, p: [Point; 3]) -> f64 {
    let mid = |a: Point, b: Point| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    (gamma.value(mid(p[0], p[1])) + gamma.value(mid(p[1], p[2])) + gamma.value(mid(p[2], p[0])))
        / 3.0
}

pub(crate) fn elements(mesh: &Mesh, gamma: &ConductivityField) -> Result<Vec<Element>, FemError> {
    (0..mesh.triangles().len())
        .map(|t| {
            let p = mesh.triangle_points(t);
            let (area, grads) = p1_gradients(p);
            if !(area > 0.0) {
                return Err(FemError::DegenerateTriangle { index: t, area });
            }
            Ok(Element {
                weight: element_mean(gamma, p) * area,
                grads,
            })
        })
        .collect()
}

/// Local stiffness matrix γ̄·A·∇φ_i·∇φ_j.
pub fn element_matrix(p: [Point; 3], gamma: &ConductivityField) -> Result<[[f64; 3]; 3], FemError> {
    let (area, g) = p1_gradients(p);
    if !(area > 0.0) {
        return Err(FemError::DegenerateTriangle { index: 0, area });
    }
    let w = element_mean(gamma, p) * area;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    Ok(k)
}

/// Global stiffness matrix over all vertices.
pub fn assemble(mesh: &Mesh, gamma: &ConductivityField) -> Result<CsrMatrix, FemError> {
    let elems = elements(mesh, gamma)?;
    Ok(stiffness(mesh, &elems))
}

pub(crate) fn stiffness(mesh: &Mesh, elems: &[Element]) -> CsrMatrix {
    let mut trip = Vec::with_capacity(9 * elems.len());
    for (t, e) in mesh.triangles().iter().zip(elems) {
        for i in 0..3 {
            for j in 0..3 {
                let g = &e.grads;
                trip.push((t[i], t[j], e.weight * (g[i][0] * g[j][0] + g[i][1] * g[j][1])));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), trip)
}

/// Σ_e γ̄_e A_e ∇u·∇v accumulated in element order.
pub(crate) fn energy(mesh: &Mesh, elems: &[Element], u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (t, e) in mesh.triangles().iter().zip(elems) {
        let mut gu = [0.0; 2];
        let mut gv = [0.0; 2];
        for k in 0..3 {
            gu[0] += u[t[k]] * e.grads[k][0];
            gu[1] += u[t[k]] * e.grads[k][1];
            gv[0] += v[t[k]] * e.grads[k][0];
            gv[1] += v[t[k]] * e.grads[k][1];
        }
        acc += e.weight * (gu[0] * gv[0] + gu[1] * gv[1]);
    }
    acc
}

/// Solves div(γ∇u) = 0 with u = f on the boundary; returns u at every vertex.
pub fn solve_dirichlet(
    mesh: &Mesh,
    gamma: &ConductivityField,
    f: &BoundaryData,
) -> Result<Vec<f64>, FemError> {
    DirichletSystem::new(mesh, gamma, SolverKind::Auto)?.solve(f)
}

/// Discrete Laplace energy ∫|∇u|² (γ ≡ 1) of the harmonic extension of `f`.
/// Involves no conductivity; used for mesh-consistent calibration.
pub fn reference_energy(mesh: &Mesh, f: &BoundaryData) -> Result<f64, FemError> {
    let sys = DirichletSystem::new(mesh, &ConductivityField::constant(1.0), SolverKind::Auto)?;
    let u = sys.solve(f)?;
    Ok(sys.energy(&u, &u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, make_mesh, DomainSpec, MeshOptions};

    #[test]
    fn reference_element() {
        let k = element_matrix([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &ConductivityField::constant(1.0))
            .unwrap();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn degenerate_triangle_is_named() {
        let err = element_matrix([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], &ConductivityField::constant(1.0))
            .unwrap_err();
        assert!(matches!(err, FemError::DegenerateTriangle { .. }));
    }

    #[test]
    fn disk_matrix_properties() {
        let d = build_domain(&DomainSpec::UnitDisk).unwrap();
        let m = make_mesh(&d, &MeshOptions::uniform(0.1)).unwrap();
        let k1 = assemble(&m, &ConductivityField::constant(1.0)).unwrap();
        let k2 = assemble(&m, &ConductivityField::constant(2.0)).unwrap();
        assert!(k1.asymmetry() <= 1e-14);
        for i in 0..k1.dim() {
            assert!(k1.row_sum(i).abs() <= 1e-10);
            for (j, v) in k1.row(i) {
                assert_eq!(k2.get(i, j), 2.0 * v);
            }
        }
    }

    #[test]
    fn csr_sums_duplicates() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 1, 1.0), (1, 0, 2.0), (0, 1, 0.5), (0, 0, 3.0)]);
        assert_eq!(a.get(0, 1), 1.5);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 3);
        let mut y = [0.0; 2];
        a.matvec(&[1.0, 2.0], &mut y);
        assert_eq!(y, [6.0, 2.0]);
    }
}
