//! Boundary recovery of γ and ∂_ν log γ from DtN measurements along a
//! decreasing sequence of offsets h.
//!
//! Everything here reaches the conductivity only through [`Conductor`]: DtN
//! oracles on meshes this module builds, and the boundary trace for the
//! normal-derivative stage.

mod fit;

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::fem::{reference_energy, BoundaryTrace, Conductor, FemError};
use crate::geometry::{boundary_frame, make_mesh, Domain, GeometryError, MeshOptions, Refinement};
use crate::singular::{c0_constant, c1_constant, trace_f0, trace_f1, SingularError, SingularFamily};

pub use fit::{fit_limit, Fit, FitModel, BETA_GRID};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconError {
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { got: usize, needed: usize },
    #[error("boundary point at parameter {param} is {distance} from a corner; need ≥ {required}")]
    NearCorner {
        param: f64,
        distance: f64,
        required: f64,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Singular(#[from] SingularError),
}

/// Which c₀ the measurements are normalized by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Calibration {
    /// c₀(h) by quadrature on the exact domain.
    Continuum,
    /// c₀ replaced by the discrete Laplace energy of f₀ on the measurement
    /// mesh, so the FEM bias shared by both terms cancels. Needs no
    /// conductivity information.
    Mesh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySchedule {
    hs: Vec<f64>,
    /// local mesh size = h·local_factor
    pub local_factor: f64,
    /// refinement radius = h·radius_factor
    pub radius_factor: f64,
    pub global_size: f64,
    pub model: FitModel,
}

impl RecoverySchedule {
    /// h_j = h0·2^{−j}, j = 0..steps, with local size h/8 within radius 5h.
    pub fn dyadic(h0: f64, steps: usize, model: FitModel) -> Result<Self, ReconError> {
        let hs = (0..steps).map(|j| h0 / 2f64.powi(j as i32)).collect();
        Self::new(hs, 0.125, 5.0, 0.1, model)
    }

    pub fn new(
        hs: Vec<f64>,
        local_factor: f64,
        radius_factor: f64,
        global_size: f64,
        model: FitModel,
    ) -> Result<Self, ReconError> {
        if hs.is_empty() {
            return Err(ReconError::Schedule("empty h list".into()));
        }
        if hs.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(ReconError::Schedule("h values must be positive".into()));
        }
        if hs.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ReconError::Schedule("h values must be strictly decreasing".into()));
        }
        if !(local_factor > 0.0 && local_factor <= 0.125) {
            return Err(ReconError::Schedule(format!(
                "local mesh factor {local_factor} violates h_min ≥ 8·local size"
            )));
        }
        if !(radius_factor > 0.0) || !(global_size > 0.0) {
            return Err(ReconError::Schedule("refinement radius and global size must be positive".into()));
        }
        Ok(Self {
            hs,
            local_factor,
            radius_factor,
            global_size,
            model,
        })
    }

    pub fn hs(&self) -> &[f64] {
        &self.hs
    }

    pub fn len(&self) -> usize {
        self.hs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hs.is_empty()
    }

    pub fn with_model(mut self, model: FitModel) -> Self {
        self.model = model;
        self
    }

    pub fn h_max(&self) -> f64 {
        self.hs[0]
    }

    fn mesh_options(&self, domain: &Domain, s: f64, h: f64) -> MeshOptions {
        let local = (h * self.local_factor).min(self.global_size);
        MeshOptions {
            size: self.global_size,
            refinement: Some(Refinement {
                center: domain.point(s),
                radius: h * self.radius_factor,
                local_size: local,
            }),
        }
    }
}

/// Measured sequence and its extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    pub exponent: f64,
    pub intercept: f64,
    pub residual: f64,
    pub flags: Vec<String>,
}

impl RateReport {
    pub fn from_fit(abscissae: Vec<f64>, values: Vec<f64>, fit: &Fit) -> Self {
        let mut flags = Vec::new();
        if fit.fallback {
            flags.push("singular fit; last value used".to_string());
        }
        Self {
            abscissae,
            values,
            exponent: fit.exponent,
            intercept: fit.limit,
            residual: fit.residual,
            flags,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueRow {
    pub h: f64,
    pub q0: f64,
    pub c0: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalRow {
    pub h: f64,
    pub q1: f64,
    pub c0: f64,
    pub c1: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueRecovery {
    pub param: f64,
    pub estimate: f64,
    pub rows: Vec<ValueRow>,
    pub report: RateReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalRecovery {
    pub param: f64,
    pub estimate: f64,
    pub rows: Vec<NormalRow>,
    pub report: RateReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    pub value_calibration: Calibration,
    pub normal_calibration: Calibration,
    /// flag ρ sequences whose last three steps move away from the limit by
    /// more than this relative amount
    pub monotone_tolerance: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            value_calibration: Calibration::Continuum,
            normal_calibration: Calibration::Mesh,
            monotone_tolerance: 0.1,
        }
    }
}

fn check_point(domain: &Domain, s: f64, schedule: &RecoverySchedule) -> Result<(), ReconError> {
    let required = 5.0 * schedule.h_max();
    let distance = domain.distance_to_nearest_corner(s);
    if distance < required {
        return Err(ReconError::NearCorner {
            param: s,
            distance,
            required,
        });
    }
    Ok(())
}

fn calibration(
    mode: Calibration,
    domain: &Domain,
    family: &SingularFamily,
    mesh: &crate::geometry::Mesh,
) -> Result<f64, ReconError> {
    Ok(match mode {
        Calibration::Continuum => c0_constant(domain, family.frame(), family.h())?,
        Calibration::Mesh => reference_energy(mesh, &trace_f0(family, mesh)?)?,
    })
}

/// Stage A: γ̂(y) from ρ(h) = ⟨Λ f₀,f₀⟩/c₀(h) → γ(y).
pub fn recover_value(
    conductor: &Conductor,
    domain: &Domain,
    s: f64,
    schedule: &RecoverySchedule,
    options: &RecoveryOptions,
) -> Result<ValueRecovery, ReconError> {
    check_point(domain, s, schedule)?;
    let frame = boundary_frame(domain, s)?;
    let rows = schedule
        .hs
        .par_iter()
        .map(|&h| -> Result<ValueRow, ReconError> {
            let family = SingularFamily::new(frame.clone(), h)?;
            let mesh = Arc::new(make_mesh(domain, &schedule.mesh_options(domain, s, h))?);
            let oracle = conductor.oracle(Arc::clone(&mesh))?;
            let q0 = oracle.quad(&trace_f0(&family, &mesh)?)?;
            let c0 = calibration(options.value_calibration, domain, &family, &mesh)?;
            Ok(ValueRow {
                h,
                q0,
                c0,
                rho: q0 / c0,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.rho)).collect();
    let fit = fit_limit(&points, schedule.model)?;
    let mut report = RateReport::from_fit(
        rows.iter().map(|r| r.h).collect(),
        rows.iter().map(|r| r.rho).collect(),
        &fit,
    );
    if !monotone_tail(&report.values, fit.limit, options.monotone_tolerance) {
        report.flags.push("rho not monotone over the last three steps".into());
    }
    Ok(ValueRecovery {
        param: s,
        estimate: fit.limit,
        rows,
        report,
    })
}

/// |v_j − L| nonincreasing over the last three entries, allowing one
/// inversion of at most `tol` relative.
fn monotone_tail(values: &[f64], limit: f64, tol: f64) -> bool {
    let n = values.len();
    if n < 3 {
        return true;
    }
    let e: Vec<f64> = values[n - 3..].iter().map(|v| (v - limit).abs()).collect();
    let mut inversions = 0;
    for w in e.windows(2) {
        if w[1] > w[0] {
            if w[1] - w[0] > tol * limit.abs() {
                return false;
            }
            inversions += 1;
        }
    }
    inversions <= 1
}

/// Stage B: ∂_ν log γ(y) from σ(h) = (⟨Λ f₁,f₁⟩ − c₀)/(c₁ h).
pub fn recover_normal(
    conductor: &Conductor,
    domain: &Domain,
    s: f64,
    gamma_boundary: &BoundaryTrace,
    schedule: &RecoverySchedule,
    options: &RecoveryOptions,
) -> Result<NormalRecovery, ReconError> {
    check_point(domain, s, schedule)?;
    let frame = boundary_frame(domain, s)?;
    let rows = schedule
        .hs
        .par_iter()
        .map(|&h| -> Result<NormalRow, ReconError> {
            let family = SingularFamily::new(frame.clone(), h)?;
            let mesh = Arc::new(make_mesh(domain, &schedule.mesh_options(domain, s, h))?);
            let oracle = conductor.oracle(Arc::clone(&mesh))?;
            let q1 = oracle.quad(&trace_f1(&family, &mesh, gamma_boundary)?)?;
            let c0 = calibration(options.normal_calibration, domain, &family, &mesh)?;
            let c1 = c1_constant(domain, &frame, h)?;
            if c1 == 0.0 {
                return Err(SingularError::InvalidOffset(h).into());
            }
            Ok(NormalRow {
                h,
                q1,
                c0,
                c1,
                sigma: (q1 - c0) / (c1 * h),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.sigma)).collect();
    let fit = fit_limit(&points, schedule.model)?;
    let report = RateReport::from_fit(
        rows.iter().map(|r| r.h).collect(),
        rows.iter().map(|r| r.sigma).collect(),
        &fit,
    );
    Ok(NormalRecovery {
        param: s,
        estimate: fit.limit,
        rows,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRecovery {
    /// stage A at every sample point (uniform samples ∪ targets), sorted by parameter
    pub stage_a: Vec<ValueRecovery>,
    pub stage_b: Vec<NormalRecovery>,
}

/// Stage A at `samples` uniformly spread points plus the targets; its
/// estimates, interpolated piecewise-linearly in the boundary parameter,
/// replace the exact boundary trace in stage B at each target.
///
/// A relative error ε in γ̂(y) shifts σ(h) by about −ε·c₀/(c₁h), so the
/// stage-B fit always carries an e/h term here.
pub fn recover_pipeline(
    conductor: &Conductor,
    domain: &Domain,
    targets: &[f64],
    samples: usize,
    value_schedule: &RecoverySchedule,
    normal_schedule: &RecoverySchedule,
    options: &RecoveryOptions,
) -> Result<PipelineRecovery, ReconError> {
    let mut params: Vec<f64> = (0..samples)
        .map(|k| domain.length() * k as f64 / samples as f64)
        .filter(|&s| domain.distance_to_nearest_corner(s) >= 5.0 * value_schedule.h_max())
        .collect();
    for &t in targets {
        let t = domain.wrap(t);
        if !params.iter().any(|&p| domain.param_distance(p, t) < 1e-12) {
            params.push(t);
        }
    }
    params.sort_by(f64::total_cmp);
    let stage_a = params
        .iter()
        .map(|&s| recover_value(conductor, domain, s, value_schedule, options))
        .collect::<Result<Vec<_>, _>>()?;
    let estimates: Vec<f64> = stage_a.iter().map(|r| r.estimate).collect();
    let trace = BoundaryTrace::piecewise_linear(domain.length(), &params, &estimates)?;
    let normal_schedule = normal_schedule.clone().with_model(normal_schedule.model.with_inverse());
    let stage_b = targets
        .iter()
        .map(|&s| recover_normal(conductor, domain, s, &trace, &normal_schedule, options))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PipelineRecovery { stage_a, stage_b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_validation() {
        assert!(RecoverySchedule::dyadic(0.1, 6, FitModel::affine()).is_ok());
        assert!(RecoverySchedule::new(vec![0.1, 0.1], 0.125, 5.0, 0.1, FitModel::affine()).is_err());
        assert!(RecoverySchedule::new(vec![0.1, 0.05], 0.2, 5.0, 0.1, FitModel::affine()).is_err());
        assert!(RecoverySchedule::new(vec![], 0.125, 5.0, 0.1, FitModel::affine()).is_err());
    }

    #[test]
    fn monotone_tail_tolerates_one_small_inversion() {
        assert!(monotone_tail(&[1.3, 1.2, 1.1, 1.05], 1.0, 0.1));
        assert!(monotone_tail(&[1.3, 1.1, 1.12, 1.05], 1.0, 0.1));
        assert!(!monotone_tail(&[1.3, 1.05, 1.3, 1.05], 1.0, 0.1));
    }
}
