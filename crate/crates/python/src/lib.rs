use std::path::PathBuf;
use std::sync::Arc;

use calderon_core::besov::{self, Curve};
use calderon_core::fem::{self, BoundaryData, ConductivityField, Conductor, Preset};
use calderon_core::geometry::{self, build_domain, make_mesh, DomainSpec, MeshOptions, RadiusSeries};
use calderon_core::harness::{self, ExperimentConfig, HarnessError, RunOptions};
use calderon_core::recon::{self, FitModel, RecoveryOptions, RecoverySchedule};
use calderon_core::singular;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Numerical(_) => runtime_err(e),
        other => value_err(other),
    }
}

/// Planar domain with an arclength boundary parameter.
#[pyclass(name = "Domain", frozen)]
struct PyDomain {
    inner: geometry::Domain,
}

#[pymethods]
impl PyDomain {
    #[staticmethod]
    fn disk() -> PyResult<Self> {
        Ok(Self {
            inner: build_domain(&DomainSpec::UnitDisk).map_err(value_err)?,
        })
    }

    /// r(θ) = mean + Σ cos[k-1]·cos kθ + sin[k-1]·sin kθ
    #[staticmethod]
    #[pyo3(signature = (mean, cos = vec![], sin = vec![]))]
    fn star(mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: build_domain(&DomainSpec::Star(RadiusSeries { mean, cos, sin })).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn polygon(vertices: Vec<(f64, f64)>) -> PyResult<Self> {
        let v = vertices.into_iter().map(|(x, y)| [x, y]).collect();
        Ok(Self {
            inner: build_domain(&DomainSpec::Polygon(v)).map_err(value_err)?,
        })
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length()
    }

    fn point(&self, s: f64) -> (f64, f64) {
        let p = self.inner.point(s);
        (p[0], p[1])
    }

    fn normal(&self, s: f64) -> PyResult<(f64, f64)> {
        let n = self.inner.normal(s).map_err(value_err)?;
        Ok((n[0], n[1]))
    }

    fn __repr__(&self) -> String {
        format!("Domain({:?}, length={})", self.inner.kind(), self.inner.length())
    }
}

/// Closed-form conductivity.
#[pyclass(name = "Conductivity", frozen)]
struct PyConductivity {
    inner: ConductivityField,
}

const BOX: [[f64; 2]; 2] = [[-2.0, -2.0], [2.0, 2.0]];

#[pymethods]
impl PyConductivity {
    #[staticmethod]
    fn constant(c: f64) -> PyResult<Self> {
        Self::make(Preset::Constant { c })
    }

    /// exp(a·x)
    #[staticmethod]
    fn exponential(a: (f64, f64)) -> PyResult<Self> {
        Self::make(Preset::Exponential { a: [a.0, a.1] })
    }

    /// 1 + b|x|²
    #[staticmethod]
    fn radial(b: f64) -> PyResult<Self> {
        Self::make(Preset::Radial { b })
    }

    fn value(&self, x: (f64, f64)) -> f64 {
        self.inner.value([x.0, x.1])
    }

    fn log_gradient(&self, x: (f64, f64)) -> (f64, f64) {
        let g = self.inner.log_gradient([x.0, x.1]);
        (g[0], g[1])
    }
}

impl PyConductivity {
    fn make(preset: Preset) -> PyResult<Self> {
        Ok(Self {
            inner: ConductivityField::new(preset, BOX).map_err(value_err)?,
        })
    }
}

/// Recovered limit plus the per-h sequence it was fitted from.
#[pyclass(name = "Recovery", frozen, get_all)]
struct PyRecovery {
    param: f64,
    estimate: f64,
    h: Vec<f64>,
    /// ρ(h) for the value stage, σ(h) for the normal stage
    sequence: Vec<f64>,
    queries: usize,
    flags: Vec<String>,
}

#[pymethods]
impl PyRecovery {
    fn __repr__(&self) -> String {
        format!("Recovery(param={}, estimate={}, steps={})", self.param, self.estimate, self.h.len())
    }
}

fn schedule(h0: f64, steps: usize, model: FitModel) -> PyResult<RecoverySchedule> {
    RecoverySchedule::dyadic(h0, steps, model).map_err(value_err)
}

/// γ at boundary parameter `s`, from DtN data only.
#[pyfunction]
#[pyo3(signature = (gamma, domain, s, h0 = 0.1, steps = 6))]
fn recover_value(py: Python<'_>, gamma: &PyConductivity, domain: &PyDomain, s: f64, h0: f64, steps: usize) -> PyResult<PyRecovery> {
    let sched = schedule(h0, steps, FitModel::affine())?;
    let conductor = Conductor::new(gamma.inner.clone());
    let r = py
        .detach(|| recon::recover_value(&conductor, &domain.inner, s, &sched, &RecoveryOptions::default()))
        .map_err(runtime_err)?;
    Ok(PyRecovery {
        param: r.param,
        estimate: r.estimate,
        h: r.rows.iter().map(|x| x.h).collect(),
        sequence: r.rows.iter().map(|x| x.rho).collect(),
        queries: conductor.queries(),
        flags: r.report.flags,
    })
}

/// ∂_ν log γ at boundary parameter `s`, given the exact boundary trace.
#[pyfunction]
#[pyo3(signature = (gamma, domain, s, h0 = 0.1, steps = 6))]
fn recover_normal(py: Python<'_>, gamma: &PyConductivity, domain: &PyDomain, s: f64, h0: f64, steps: usize) -> PyResult<PyRecovery> {
    let sched = schedule(h0, steps, FitModel::scanned())?;
    let conductor = Conductor::new(gamma.inner.clone());
    let trace = conductor.boundary_trace(&domain.inner);
    let r = py
        .detach(|| recon::recover_normal(&conductor, &domain.inner, s, &trace, &sched, &RecoveryOptions::default()))
        .map_err(runtime_err)?;
    Ok(PyRecovery {
        param: r.param,
        estimate: r.estimate,
        h: r.rows.iter().map(|x| x.h).collect(),
        sequence: r.rows.iter().map(|x| x.sigma).collect(),
        queries: conductor.queries(),
        flags: r.report.flags,
    })
}

/// (c0(h), c1(h)) at boundary parameter `s`.
#[pyfunction]
fn calibration_constants(domain: &PyDomain, s: f64, h: f64) -> PyResult<(f64, f64)> {
    let frame = geometry::boundary_frame(&domain.inner, s).map_err(value_err)?;
    let c0 = singular::c0_constant(&domain.inner, &frame, h).map_err(value_err)?;
    let c1 = singular::c1_constant(&domain.inner, &frame, h).map_err(value_err)?;
    Ok((c0, c1))
}

/// ⟨Λ_γ f, f⟩ for f = cos(kθ) on a uniform mesh of the given size.
#[pyfunction]
#[pyo3(signature = (gamma, domain, k, mesh_size = 0.05))]
fn dtn_cosine_energy(py: Python<'_>, gamma: &PyConductivity, domain: &PyDomain, k: f64, mesh_size: f64) -> PyResult<f64> {
    py.detach(|| -> Result<f64, String> {
        let mesh = Arc::new(make_mesh(&domain.inner, &MeshOptions::uniform(mesh_size)).map_err(|e| e.to_string())?);
        let f = BoundaryData::from_fn(&mesh, |p, _| (k * p[1].atan2(p[0])).cos()).map_err(|e| e.to_string())?;
        let oracle = Conductor::new(gamma.inner.clone()).oracle(mesh).map_err(|e| e.to_string())?;
        oracle.quad(&f).map_err(|e: fem::FemError| e.to_string())
    })
    .map_err(runtime_err)
}

/// Sampled function on the periodic unit grid.
#[pyclass(name = "GridFunction", frozen)]
struct PyGridFunction {
    inner: besov::GridFunction,
}

#[pymethods]
impl PyGridFunction {
    #[new]
    fn new(dim: usize, n: usize, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: besov::GridFunction::new(dim, n, values).map_err(value_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn lp_norm(&self, p: f64) -> f64 {
        self.inner.lp_norm(p)
    }

    /// Littlewood-Paley piece at dyadic frequency λ.
    fn band(&self, lam: usize) -> PyResult<Self> {
        Ok(Self {
            inner: besov::lp_project(&self.inner, lam).map_err(value_err)?,
        })
    }

    fn besov_norm(&self, s: f64, p: f64) -> PyResult<f64> {
        besov::besov_norm(&self.inner, s, p).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
#[pyo3(signature = (s, p, seed, n, dim = 2))]
fn synth_besov(py: Python<'_>, s: f64, p: f64, seed: u64, n: usize, dim: usize) -> PyResult<PyGridFunction> {
    Ok(PyGridFunction {
        inner: py.detach(|| besov::synth_besov(s, p, seed, n, dim)).map_err(value_err)?,
    })
}

/// Decay exponent of averaged |f − f(y)|^q on shrinking balls about y on
/// the horizontal line x₂ = height.
#[pyfunction]
#[pyo3(signature = (f, y, height = 0.5, q = 2.0))]
fn boundary_rate(py: Python<'_>, f: &PyGridFunction, y: (f64, f64), height: f64, q: f64) -> PyResult<f64> {
    let curve = Curve::line(height);
    py.detach(|| besov::boundary_rate(&f.inner, &curve, &[y.0, y.1], q))
        .map(|r| r.exponent)
        .map_err(value_err)
}

/// ∫ f²/|x − x₀|² over ‖f‖²_{H¹}, x₀ the box centre (n = 3).
#[pyfunction]
fn hardy_ratio(py: Python<'_>, f: &PyGridFunction) -> PyResult<f64> {
    py.detach(|| besov::hardy_check(&f.inner)).map(|r| r.ratio).map_err(value_err)
}

#[pyfunction]
fn bump(n: usize, centre: (f64, f64, f64), width: f64, power: i32) -> PyResult<PyGridFunction> {
    Ok(PyGridFunction {
        inner: besov::bump(n, [centre.0, centre.1, centre.2], width, power).map_err(value_err)?,
    })
}

/// Runs an experiment config (`key = value` text) into `out` and returns
/// the summary CSV.
#[pyfunction]
#[pyo3(signature = (config, out, test_mode = true))]
fn run_config(py: Python<'_>, config: &str, out: PathBuf, test_mode: bool) -> PyResult<String> {
    let cfg = ExperimentConfig::parse(config).map_err(value_err)?;
    cfg.validate().map_err(value_err)?;
    let result = py
        .detach(|| harness::run(&cfg, &RunOptions { out, test_mode }))
        .map_err(harness_err)?;
    Ok(result.summary.to_csv())
}

#[pyfunction]
fn config_hash(config: &str) -> PyResult<String> {
    Ok(ExperimentConfig::parse(config).map_err(value_err)?.hash())
}

#[pymodule]
fn calderon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", harness::VERSION)?;
    m.add_class::<PyDomain>()?;
    m.add_class::<PyConductivity>()?;
    m.add_class::<PyRecovery>()?;
    m.add_class::<PyGridFunction>()?;
    m.add_function(wrap_pyfunction!(recover_value, m)?)?;
    m.add_function(wrap_pyfunction!(recover_normal, m)?)?;
    m.add_function(wrap_pyfunction!(calibration_constants, m)?)?;
    m.add_function(wrap_pyfunction!(dtn_cosine_energy, m)?)?;
    m.add_function(wrap_pyfunction!(synth_besov, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_rate, m)?)?;
    m.add_function(wrap_pyfunction!(hardy_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(bump, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    Ok(())
}
