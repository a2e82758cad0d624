use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use crate::geometry::Mesh;

use super::{elements, energy, stiffness, BoundaryData, ConductivityField, CsrMatrix, Element, FemError};

const PCG_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Sparse Cholesky, falling back to PCG if the factorization fails.
    Auto,
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients.
    Pcg,
}

enum Factor {
    Cholesky(Llt<usize, f64>),
    Pcg { inv_diag: Vec<f64> },
}

/// The interior block of the stiffness matrix after eliminating boundary
/// values, with its factorization. One system serves any number of solves.
pub struct DirichletSystem {
    mesh: Arc<Mesh>,
    elems: Vec<Element>,
    matrix: CsrMatrix,
    /// vertex → interior unknown index (usize::MAX for boundary vertices)
    interior_index: Vec<usize>,
    interior: Vec<usize>,
    /// interior-interior block
    k_ii: CsrMatrix,
    factor: Factor,
}

impl DirichletSystem {
    pub fn new(mesh: &Mesh, gamma: &ConductivityField, kind: SolverKind) -> Result<Self, FemError> {
        Self::shared(Arc::new(mesh.clone()), gamma, kind)
    }

    pub fn shared(mesh: Arc<Mesh>, gamma: &ConductivityField, kind: SolverKind) -> Result<Self, FemError> {
        // sequential factorization keeps results bitwise reproducible;
        // parallelism lives one level up, across independent solves
        faer::set_global_parallelism(faer::Par::Seq);
        let elems = elements(&mesh, gamma)?;
        let matrix = stiffness(&mesh, &elems);
        let n = mesh.num_vertices();
        let mut interior_index = vec![usize::MAX; n];
        let mut interior = Vec::new();
        for v in 0..n {
            if !mesh.is_boundary(v) {
                interior_index[v] = interior.len();
                interior.push(v);
            }
        }
        if interior.is_empty() {
            return Err(FemError::NoInterior);
        }
        let mut trip = Vec::with_capacity(matrix.nnz());
        for (i, &v) in interior.iter().enumerate() {
            for (w, a) in matrix.row(v) {
                let j = interior_index[w];
                if j != usize::MAX {
                    trip.push((i, j, a));
                }
            }
        }
        let k_ii = CsrMatrix::from_triplets(interior.len(), trip);
        let factor = match kind {
            SolverKind::Pcg => pcg_factor(&k_ii),
            SolverKind::Cholesky => cholesky(&k_ii).ok_or(FemError::Solver {
                iterations: 0,
                residual: f64::NAN,
            })?,
            SolverKind::Auto => cholesky(&k_ii).unwrap_or_else(|| pcg_factor(&k_ii)),
        };
        Ok(Self {
            mesh,
            elems,
            matrix,
            interior_index,
            interior,
            k_ii,
            factor,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn num_unknowns(&self) -> usize {
        self.interior.len()
    }

    /// Discrete solution at every vertex.
    pub fn solve(&self, f: &BoundaryData) -> Result<Vec<f64>, FemError> {
        let mesh = &self.mesh;
        let expected = mesh.boundary_vertices().len();
        if f.len() != expected {
            return Err(FemError::DataLength {
                expected,
                got: f.len(),
            });
        }
        let mut u = vec![0.0; mesh.num_vertices()];
        for (&v, &x) in mesh.boundary_vertices().iter().zip(f.values()) {
            u[v] = x;
        }
        let mut rhs = vec![0.0; self.interior.len()];
        for (i, &v) in self.interior.iter().enumerate() {
            rhs[i] = -self
                .matrix
                .row(v)
                .filter(|(w, _)| self.interior_index[*w] == usize::MAX)
                .map(|(w, a)| a * u[w])
                .sum::<f64>();
        }
        let rhs_norm = l2(&rhs);
        let x = if rhs_norm == 0.0 {
            vec![0.0; rhs.len()]
        } else {
            match &self.factor {
                Factor::Cholesky(llt) => {
                    let mut x = cholesky_solve(llt, &rhs);
                    // one step of iterative refinement if the residual is loose
                    let r = residual(&self.k_ii, &x, &rhs);
                    if l2(&r) > RESIDUAL_TOL * rhs_norm {
                        let dx = cholesky_solve(llt, &r);
                        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
                        let res = l2(&residual(&self.k_ii, &x, &rhs)) / rhs_norm;
                        if res > RESIDUAL_TOL {
                            return Err(FemError::Solver {
                                iterations: 2,
                                residual: res,
                            });
                        }
                    }
                    x
                }
                Factor::Pcg { inv_diag } => pcg(&self.k_ii, inv_diag, &rhs)?,
            }
        };
        for (i, &v) in self.interior.iter().enumerate() {
            u[v] = x[i];
        }
        Ok(u)
    }

    /// Σ_e γ̄ A ∇u·∇v over the mesh, in element order.
    pub fn energy(&self, u: &[f64], v: &[f64]) -> f64 {
        energy(&self.mesh, &self.elems, u, v)
    }
}

fn cholesky(k: &CsrMatrix) -> Option<Factor> {
    let n = k.dim();
    let mut trip = Vec::with_capacity(k.nnz() / 2 + n);
    for i in 0..n {
        for (j, a) in k.row(i) {
            if i >= j {
                trip.push(Triplet::new(i, j, a));
            }
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip).ok()?;
    mat.sp_cholesky(Side::Lower).ok().map(Factor::Cholesky)
}

fn cholesky_solve(llt: &Llt<usize, f64>, rhs: &[f64]) -> Vec<f64> {
    let mut b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    llt.solve_in_place(b.as_mut());
    (0..rhs.len()).map(|i| b[(i, 0)]).collect()
}

fn pcg_factor(k: &CsrMatrix) -> Factor {
    Factor::Pcg {
        inv_diag: (0..k.dim()).map(|i| 1.0 / k.get(i, i)).collect(),
    }
}

fn residual(k: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut ax = vec![0.0; x.len()];
    k.matvec(x, &mut ax);
    b.iter().zip(&ax).map(|(b, a)| b - a).collect()
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned CG to relative residual [`PCG_TOL`].
pub(crate) fn pcg(k: &CsrMatrix, inv_diag: &[f64], b: &[f64]) -> Result<Vec<f64>, FemError> {
    let n = b.len();
    let b_norm = l2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut kp = vec![0.0; n];
    let max_iter = 20 * n + 100;
    for it in 1..=max_iter {
        k.matvec(&p, &mut kp);
        let alpha = rz / dot(&p, &kp);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        if l2(&r) <= PCG_TOL * b_norm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        if !rz.is_finite() {
            return Err(FemError::Solver {
                iterations: it,
                residual: l2(&r) / b_norm,
            });
        }
    }
    Err(FemError::Solver {
        iterations: max_iter,
        residual: l2(&r) / b_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, make_mesh, DomainSpec, MeshOptions};

    fn disk_mesh(size: f64) -> Mesh {
        let d = build_domain(&DomainSpec::UnitDisk).unwrap();
        make_mesh(&d, &MeshOptions::uniform(size)).unwrap()
    }

    #[test]
    fn linear_data_is_reproduced() {
        let m = disk_mesh(0.1);
        let f = BoundaryData::from_fn(&m, |p, _| p[0]).unwrap();
        let u = super::super::solve_dirichlet(&m, &ConductivityField::constant(1.0), &f).unwrap();
        for (v, p) in m.vertices().iter().enumerate() {
            assert!((u[v] - p[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn constants_are_reproduced() {
        let m = disk_mesh(0.1);
        let f = BoundaryData::from_fn(&m, |_, _| 5.0).unwrap();
        let g = ConductivityField::new(
            super::super::Preset::Radial { b: 0.5 },
            [[-1.0, -1.0], [1.0, 1.0]],
        )
        .unwrap();
        let u = super::super::solve_dirichlet(&m, &g, &f).unwrap();
        assert!(u.iter().all(|x| (x - 5.0).abs() < 1e-10));
    }

    #[test]
    fn cholesky_and_pcg_agree() {
        let m = disk_mesh(0.05);
        let g = ConductivityField::new(
            super::super::Preset::Exponential { a: [0.5, 0.3] },
            [[-1.0, -1.0], [1.0, 1.0]],
        )
        .unwrap();
        let f = BoundaryData::from_fn(&m, |p, _| (3.0 * p[1].atan2(p[0])).cos() + p[0] * p[1]).unwrap();
        let a = DirichletSystem::new(&m, &g, SolverKind::Cholesky).unwrap();
        let b = DirichletSystem::new(&m, &g, SolverKind::Pcg).unwrap();
        let (ua, ub) = (a.solve(&f).unwrap(), b.solve(&f).unwrap());
        let diff = ua.iter().zip(&ub).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 1e-9, "{diff}");
        let (ea, eb) = (a.energy(&ua, &ua), b.energy(&ub, &ub));
        assert!(((ea - eb) / ea).abs() < 1e-10);
    }

    #[test]
    fn cos3_converges_at_second_order() {
        // exact solution r³cos 3θ
        let mut errs = Vec::new();
        for size in [0.1, 0.05] {
            let m = disk_mesh(size);
            let f = BoundaryData::from_fn(&m, |p, _| (3.0 * p[1].atan2(p[0])).cos()).unwrap();
            let u = super::super::solve_dirichlet(&m, &ConductivityField::constant(1.0), &f).unwrap();
            let e = m
                .vertices()
                .iter()
                .zip(&u)
                .map(|(p, u)| {
                    let (x, y) = (p[0], p[1]);
                    (u - (x * x * x - 3.0 * x * y * y)).abs()
                })
                .fold(0.0, f64::max);
            errs.push(e);
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 2.8 && ratio < 5.5, "ratio {ratio}, errors {errs:?}");
    }

    #[test]
    fn maximum_principle() {
        let m = disk_mesh(0.05);
        let g = ConductivityField::new(
            super::super::Preset::Bump {
                amplitude: 2.0,
                center: [0.3, 0.0],
                width: 0.25,
            },
            [[-1.0, -1.0], [1.0, 1.0]],
        )
        .unwrap();
        let f = BoundaryData::from_fn(&m, |p, _| (5.0 * p[0]).sin() + p[1]).unwrap();
        let u = super::super::solve_dirichlet(&m, &g, &f).unwrap();
        let (lo, hi) = f
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(u.iter().all(|x| *x >= lo - 1e-8 && *x <= hi + 1e-8));
    }
}
