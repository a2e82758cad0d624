//! Measurement interface: the conductivity lives inside [`Conductor`], which
//! hands out DtN oracles per mesh and, separately, the boundary trace of γ.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Domain, Mesh, Point};

use super::{BoundaryData, ConductivityField, DirichletSystem, FemError, SolverKind};

/// Optional multiplicative noise on oracle outputs: q ↦ q·(1 + ε·ξ), ξ
/// uniform in [−1, 1], seeded by the query data so results do not depend on
/// query order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jitter {
    pub epsilon: f64,
    pub seed: u64,
}

impl Jitter {
    fn apply(&self, value: f64, f: &BoundaryData, g: &BoundaryData) -> f64 {
        let mut key = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for v in f.values().iter().chain(g.values()) {
            key = (key ^ v.to_bits()).wrapping_mul(0x1000_0000_01b3);
        }
        let xi: f64 = ChaCha8Rng::seed_from_u64(key).random_range(-1.0..=1.0);
        value * (1.0 + self.epsilon * xi)
    }
}

/// Owner of a hidden conductivity. Issues [`DtnOracle`]s and the boundary
/// trace; it has no accessor for interior values of γ.
pub struct Conductor {
    gamma: ConductivityField,
    counter: Arc<AtomicUsize>,
    jitter: Option<Jitter>,
    solver: SolverKind,
}

impl Conductor {
    pub fn new(gamma: ConductivityField) -> Self {
        Self {
            gamma,
            counter: Arc::new(AtomicUsize::new(0)),
            jitter: None,
            solver: SolverKind::Auto,
        }
    }

    pub fn with_jitter(mut self, jitter: Option<Jitter>) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    /// Measurement oracle on `mesh`; its queries count towards [`Conductor::queries`].
    pub fn oracle(&self, mesh: Arc<Mesh>) -> Result<DtnOracle, FemError> {
        let system = DirichletSystem::shared(mesh, &self.gamma, self.solver)?;
        Ok(DtnOracle {
            system,
            counter: Arc::clone(&self.counter),
            jitter: self.jitter,
        })
    }

    /// γ restricted to ∂Ω, addressed by boundary parameter.
    pub fn boundary_trace(&self, domain: &Domain) -> BoundaryTrace {
        BoundaryTrace(Trace::Exact {
            gamma: self.gamma.clone(),
            domain: domain.clone(),
        })
    }

    /// Total number of quad/bilin queries over all issued oracles.
    pub fn queries(&self) -> usize {
        self.counter.load(Ordering::SeqCst)
    }
}

/// Opaque DtN quadratic/bilinear form on one mesh.
pub struct DtnOracle {
    system: DirichletSystem,
    counter: Arc<AtomicUsize>,
    jitter: Option<Jitter>,
}

impl DtnOracle {
    pub fn mesh(&self) -> &Mesh {
        self.system.mesh()
    }

    /// Boundary parameters of the nodes where data must be supplied.
    pub fn boundary_params(&self) -> &[f64] {
        self.system.mesh().boundary_params()
    }

    pub fn boundary_points(&self) -> Vec<Point> {
        self.system.mesh().boundary_points()
    }

    /// ⟨Λ_γ f, f⟩ = ∫γ|∇u_f|² on the discrete solution.
    pub fn quad(&self, f: &BoundaryData) -> Result<f64, FemError> {
        self.counter.fetch_add(1, Ordering::SeqCst);
        let u = self.system.solve(f)?;
        let q = self.system.energy(&u, &u);
        Ok(match &self.jitter {
            Some(j) => j.apply(q, f, f),
            None => q,
        })
    }

    /// ⟨Λ_γ f, g⟩ = ∫γ∇u_f·∇u_g.
    pub fn bilin(&self, f: &BoundaryData, g: &BoundaryData) -> Result<f64, FemError> {
        self.counter.fetch_add(1, Ordering::SeqCst);
        let u = self.system.solve(f)?;
        let v = self.system.solve(g)?;
        // symmetrize so bilin(f, g) and bilin(g, f) agree bitwise
        let b = 0.5 * (self.system.energy(&u, &v) + self.system.energy(&v, &u));
        Ok(match &self.jitter {
            Some(j) => j.apply(b, f, g),
            None => b,
        })
    }

    pub fn queries(&self) -> usize {
        self.counter.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone)]
enum Trace {
    Exact { gamma: ConductivityField, domain: Domain },
    Table {
        length: f64,
        params: Vec<f64>,
        values: Vec<f64>,
    },
}

/// γ on ∂Ω as a function of the boundary parameter: exact, or a periodic
/// piecewise-linear interpolant of estimates.
#[derive(Debug, Clone)]
pub struct BoundaryTrace(Trace);

impl BoundaryTrace {
    /// `params` need not be sorted; they are taken modulo `length`.
    pub fn piecewise_linear(length: f64, params: &[f64], values: &[f64]) -> Result<Self, FemError> {
        if params.is_empty() || params.len() != values.len() {
            return Err(FemError::DataLength {
                expected: params.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(FemError::InvalidConductivity(format!(
                "boundary estimate {index} is not a positive finite value"
            )));
        }
        let mut pairs: Vec<(f64, f64)> = params
            .iter()
            .map(|s| s.rem_euclid(length))
            .zip(values.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self(Trace::Table {
            length,
            params: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        }))
    }

    pub fn value(&self, s: f64) -> f64 {
        match &self.0 {
            Trace::Exact { gamma, domain } => gamma.value(domain.point(s)),
            Trace::Table {
                length,
                params,
                values,
            } => {
                let n = params.len();
                if n == 1 {
                    return values[0];
                }
                let s = s.rem_euclid(*length);
                // k: last node ≤ s, cyclically
                let k = match params.binary_search_by(|p| p.total_cmp(&s)) {
                    Ok(k) => return values[k],
                    Err(0) => n - 1,
                    Err(k) => k - 1,
                };
                let next = (k + 1) % n;
                let (a, b) = (params[k], params[next]);
                let span = (b - a).rem_euclid(*length);
                let t = if span == 0.0 {
                    0.0
                } else {
                    (s - a).rem_euclid(*length) / span
                };
                values[k] + t * (values[next] - values[k])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_linear_trace_wraps() {
        let t = BoundaryTrace::piecewise_linear(4.0, &[1.0, 3.0], &[1.0, 3.0]).unwrap();
        assert_eq!(t.value(1.0), 1.0);
        assert_eq!(t.value(2.0), 2.0);
        // wrap segment from 3 to 5 (≡ 1): 3 → 1
        assert_eq!(t.value(4.0), 2.0);
        assert_eq!(t.value(0.0), 2.0);
        assert_eq!(t.value(3.5), 2.5);
    }

    #[test]
    fn trace_rejects_non_positive() {
        assert!(BoundaryTrace::piecewise_linear(1.0, &[0.0], &[0.0]).is_err());
        assert!(BoundaryTrace::piecewise_linear(1.0, &[0.0, 0.5], &[1.0]).is_err());
    }
}
