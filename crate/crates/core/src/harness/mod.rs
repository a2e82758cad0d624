//! Experiment orchestration: configuration, runs, CSV records, plots and
//! the verification suite.

mod config;
mod plot;
mod verify;

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::besov::{
    boundary_rates, bump, hardy_check, squared_rates, synth_besov, trace_battery, BesovError, Curve,
    GridFunction,
};
use crate::fem::{ConductivityField, Conductor, FemError, Jitter};
use crate::geometry::{boundary_frame, build_domain, Domain, GeometryError};
use crate::recon::{
    recover_normal, recover_pipeline, recover_value, NormalRecovery, ReconError, RecoveryOptions,
    RecoverySchedule, ValueRecovery,
};
use crate::singular::{c0_constant, c1_constant, SingularError};

pub use config::{BesovConfig, ConfigError, ExperimentConfig, HardyConfig, Mode, Points, ScheduleConfig};
pub use plot::{emit_plot, render_svg, PlotKind};
pub use verify::{verify, Check, VerifyOptions, VerifyReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Schema(String),
}

impl HarnessError {
    /// 2 for configuration and input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Numerical(_) => 3,
            _ => 2,
        }
    }

    fn config(key: &str, message: impl Into<String>) -> Self {
        HarnessError::Config(ConfigError {
            line: None,
            key: key.into(),
            message: message.into(),
        })
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

impl From<ReconError> for HarnessError {
    fn from(e: ReconError) -> Self {
        match e {
            ReconError::NearCorner { .. } => Self::config("points", e.to_string()),
            ReconError::Schedule(_) => Self::config("schedule", e.to_string()),
            ReconError::Singular(s) => s.into(),
            other => HarnessError::Numerical(other.to_string()),
        }
    }
}

impl From<SingularError> for HarnessError {
    fn from(e: SingularError) -> Self {
        match e {
            SingularError::OffsetTooLarge { .. } => Self::config("schedule.h0", e.to_string()),
            other => HarnessError::Numerical(other.to_string()),
        }
    }
}

impl From<FemError> for HarnessError {
    fn from(e: FemError) -> Self {
        match e {
            FemError::InvalidConductivity(_) => Self::config("gamma.kind", e.to_string()),
            other => HarnessError::Numerical(other.to_string()),
        }
    }
}

impl From<GeometryError> for HarnessError {
    fn from(e: GeometryError) -> Self {
        HarnessError::Numerical(e.to_string())
    }
}

impl From<BesovError> for HarnessError {
    fn from(e: BesovError) -> Self {
        match e {
            BesovError::TooFewRadii { .. } | BesovError::NonFinite(_) => HarnessError::Numerical(e.to_string()),
            other => Self::config("besov", other.to_string()),
        }
    }
}

/// `%.17g`, with `inf`/`-inf` for infinities.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let strip = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip(mantissa), exp.abs())
    } else {
        strip(&format!("{:.*}", (16 - exp) as usize, x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_g17(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(t) => t.clone(),
        }
    }
}

/// One CSV file: `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        self.rows
            .iter()
            .map(|r| match &r[j] {
                Cell::Num(x) => Some(*x),
                Cell::Int(i) => Some(*i as f64),
                Cell::Text(_) => None,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Summary row: mode, point, estimate, truth, rel_error. For rows whose
/// truth is zero the error is absolute; for check modes the truth column
/// holds the reference bound.
fn summary_row(table: &mut Table, mode: &str, point: Cell, estimate: f64, truth: f64) {
    let err = if truth == 0.0 {
        (estimate - truth).abs()
    } else {
        (estimate - truth) / truth.abs()
    };
    table.push(vec![
        Cell::Text(mode.into()),
        point,
        Cell::Num(estimate),
        Cell::Num(truth),
        Cell::Num(err),
    ]);
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    /// omit wall-clock timings so outputs are byte-reproducible
    pub test_mode: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub mode: Mode,
    pub config_hash: String,
    pub tables: Vec<Table>,
    pub summary: Table,
    pub timings: Vec<(String, f64)>,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

fn schedule(cfg: &ScheduleConfig, model: crate::recon::FitModel) -> Result<RecoverySchedule, HarnessError> {
    let hs = (0..cfg.steps).map(|j| cfg.h0 / 2f64.powi(j as i32)).collect();
    Ok(RecoverySchedule::new(hs, cfg.local_factor, cfg.radius_factor, cfg.global_size, model)?)
}

fn numbered(base: &str, i: usize, count: usize) -> String {
    if count == 1 {
        base.to_string()
    } else {
        format!("{base}_{i}")
    }
}

fn value_table(name: String, r: &ValueRecovery) -> Table {
    let mut t = Table::new(name, &["h", "q0", "c0", "rho"]);
    for row in &r.rows {
        t.push(vec![Cell::Num(row.h), Cell::Num(row.q0), Cell::Num(row.c0), Cell::Num(row.rho)]);
    }
    t
}

fn normal_table(name: String, r: &NormalRecovery) -> Table {
    let mut t = Table::new(name, &["h", "q1", "c0", "c1", "sigma"]);
    for row in &r.rows {
        t.push(vec![
            Cell::Num(row.h),
            Cell::Num(row.q1),
            Cell::Num(row.c0),
            Cell::Num(row.c1),
            Cell::Num(row.sigma),
        ]);
    }
    t
}

struct Truth {
    field: ConductivityField,
    domain: Domain,
}

impl Truth {
    fn value(&self, s: f64) -> f64 {
        self.field.value(self.domain.point(s))
    }

    fn normal_log_derivative(&self, s: f64) -> Result<f64, HarnessError> {
        let g = self.field.log_gradient(self.domain.point(s));
        let n = self.domain.normal(s)?;
        Ok(g[0] * n[0] + g[1] * n[1])
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Boundary points for the rate modes with x₁ in [0.3, 0.7]. On a straight
/// line they are distinct grid points so that y is a sample point.
pub fn rate_points(curve: &Curve, n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
    let ts: Vec<f64> = if matches!(curve, Curve::Line { .. }) {
        let first = (0.3 * n as f64).ceil() as usize;
        let last = (0.7 * n as f64).floor() as usize;
        let available = last - first + 1;
        if count <= available {
            rand::seq::index::sample(&mut rng, available, count)
                .into_iter()
                .map(|i| (first + i) as f64 / n as f64)
                .collect()
        } else {
            (0..count).map(|_| rng.random_range(first..=last) as f64 / n as f64).collect()
        }
    } else {
        (0..count).map(|_| rng.random_range(0.3..0.7)).collect()
    };
    ts.into_iter().map(|t| curve.point(2, t, 0.5)).collect()
}

/// The trace battery: synthetic functions cycling through the configured
/// smoothness values.
pub fn trace_functions(b: &BesovConfig, seed: u64) -> Result<Vec<GridFunction>, HarnessError> {
    let smooth = if b.battery_smoothness.is_empty() {
        vec![b.s]
    } else {
        b.battery_smoothness.clone()
    };
    (0..b.battery)
        .into_par_iter()
        .map(|i| Ok(synth_besov(smooth[i % smooth.len()], b.trace_p, seed.wrapping_add(i as u64), b.n, 2)?))
        .collect()
}

/// The Hardy battery: bumps (1 − t²)^m near the centre with random centre
/// offset ≤ 0.1 per axis, width in [0.1, 0.3] and m in 2..=6.
pub fn hardy_functions(h: &HardyConfig, seed: u64) -> Result<Vec<GridFunction>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0002);
    let specs: Vec<([f64; 3], f64, i32)> = (0..h.battery)
        .map(|_| {
            let c = [
                0.5 + rng.random_range(-0.1..0.1),
                0.5 + rng.random_range(-0.1..0.1),
                0.5 + rng.random_range(-0.1..0.1),
            ];
            (c, rng.random_range(0.1..0.3), rng.random_range(2..=6))
        })
        .collect();
    specs
        .into_par_iter()
        .map(|(c, w, m)| Ok(bump(h.n, c, w, m)?))
        .collect()
}

/// Runs one experiment and writes its CSVs, `summary.csv` and
/// `manifest.txt` into `opts.out`.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput, HarnessError> {
    let output = compute(config, opts.test_mode)?;
    write_output(&output, config, opts)?;
    Ok(output)
}

fn compute(config: &ExperimentConfig, test_mode: bool) -> Result<RunOutput, HarnessError> {
    let mut tables = Vec::new();
    let mut summary = Table::new("summary", &["mode", "point", "estimate", "truth", "rel_error"]);
    let mut timings = Vec::new();
    let start = Instant::now();
    let mut stage = |name: &str, t: Instant| timings.push((name.to_string(), t.elapsed().as_secs_f64()));

    match config.mode {
        Mode::Calibrate | Mode::Value | Mode::Normal | Mode::Pipeline => {
            let domain = build_domain(&config.domain).map_err(|e| HarnessError::config("domain.kind", e.to_string()))?;
            let points = config.points.resolve(domain.length());
            let truth = Truth {
                field: ConductivityField::new(config.gamma.clone(), domain.bounding_box())?,
                domain: domain.clone(),
            };
            let conductor = Conductor::new(truth.field.clone()).with_jitter(config.jitter.map(|epsilon| Jitter {
                epsilon,
                seed: config.seed,
            }));
            let options = RecoveryOptions {
                value_calibration: config.value_calibration,
                normal_calibration: config.normal_calibration,
                ..RecoveryOptions::default()
            };
            let vs = schedule(&config.schedule, config.schedule.value_model)?;
            let ns = schedule(&config.schedule, config.schedule.normal_model)?;
            match config.mode {
                Mode::Calibrate => {
                    let t = Instant::now();
                    let results = points
                        .par_iter()
                        .map(|&s| -> Result<Vec<(f64, f64, f64)>, HarnessError> {
                            if domain.distance_to_nearest_corner(s) < 5.0 * vs.h_max() {
                                return Err(ReconError::NearCorner {
                                    param: s,
                                    distance: domain.distance_to_nearest_corner(s),
                                    required: 5.0 * vs.h_max(),
                                }
                                .into());
                            }
                            let frame = boundary_frame(&domain, s)?;
                            vs.hs()
                                .iter()
                                .map(|&h| Ok((h, c0_constant(&domain, &frame, h)?, c1_constant(&domain, &frame, h)?)))
                                .collect()
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    for (i, (rows, &s)) in results.iter().zip(&points).enumerate() {
                        let mut table = Table::new(numbered("calibrate", i, points.len()), &["h", "c0", "c1"]);
                        for &(h, c0, c1) in rows {
                            table.push(vec![Cell::Num(h), Cell::Num(c0), Cell::Num(c1)]);
                        }
                        let last = rows.last().expect("non-empty schedule");
                        summary_row(&mut summary, "calibrate-c0", Cell::Num(s), last.1, FRAC_PI_4);
                        summary_row(&mut summary, "calibrate-c1", Cell::Num(s), last.2, -FRAC_PI_4);
                        tables.push(table);
                    }
                    stage("calibrate", t);
                }
                Mode::Value => {
                    let t = Instant::now();
                    let results = points
                        .par_iter()
                        .map(|&s| recover_value(&conductor, &domain, s, &vs, &options))
                        .collect::<Result<Vec<_>, _>>()?;
                    for (i, r) in results.iter().enumerate() {
                        tables.push(value_table(numbered("value", i, points.len()), r));
                        summary_row(&mut summary, "value", Cell::Num(r.param), r.estimate, truth.value(r.param));
                    }
                    stage("value", t);
                }
                Mode::Normal => {
                    let t = Instant::now();
                    let trace = conductor.boundary_trace(&domain);
                    let results = points
                        .par_iter()
                        .map(|&s| recover_normal(&conductor, &domain, s, &trace, &ns, &options))
                        .collect::<Result<Vec<_>, _>>()?;
                    for (i, r) in results.iter().enumerate() {
                        tables.push(normal_table(numbered("normal", i, points.len()), r));
                        summary_row(
                            &mut summary,
                            "normal",
                            Cell::Num(r.param),
                            r.estimate,
                            truth.normal_log_derivative(r.param)?,
                        );
                    }
                    stage("normal", t);
                }
                Mode::Pipeline => {
                    let t = Instant::now();
                    let p = recover_pipeline(&conductor, &domain, &points, config.pipeline_samples, &vs, &ns, &options)?;
                    for (i, r) in p.stage_a.iter().enumerate() {
                        tables.push(value_table(format!("pipeline_value_{i}"), r));
                        summary_row(&mut summary, "pipeline-value", Cell::Num(r.param), r.estimate, truth.value(r.param));
                    }
                    for (i, r) in p.stage_b.iter().enumerate() {
                        tables.push(normal_table(numbered("pipeline_normal", i, points.len()), r));
                        summary_row(
                            &mut summary,
                            "pipeline-normal",
                            Cell::Num(r.param),
                            r.estimate,
                            truth.normal_log_derivative(r.param)?,
                        );
                    }
                    stage("pipeline", t);
                }
                _ => unreachable!(),
            }
        }
        Mode::BesovRate => {
            let b = &config.besov;
            let t = Instant::now();
            let f = synth_besov(b.s, b.p, config.seed, b.n, 2)?;
            let pts = rate_points(&b.curve, b.n, b.points, config.seed);
            let floor = b.s - 1.0 / b.p;
            for (name, reports, label) in [
                ("besov_rate", boundary_rates(&f, &b.curve, &pts, b.q)?, "besov-rate"),
                ("besov_squared_rate", squared_rates(&f, &b.curve, &pts)?, "besov-squared-rate"),
            ] {
                let mut table = Table::new(name, &["point_index", "slope"]);
                for (i, r) in reports.iter().enumerate() {
                    table.push(vec![Cell::Int(i as i64), Cell::Num(r.exponent)]);
                }
                let med = median(reports.iter().map(|r| r.exponent).collect());
                summary_row(&mut summary, label, Cell::Text("median".into()), med, floor);
                tables.push(table);
            }
            stage("besov-rate", t);
        }
        Mode::TraceCheck => {
            let b = &config.besov;
            let t = Instant::now();
            let battery = trace_functions(b, config.seed)?;
            let report = trace_battery(&battery, &b.curve, &b.lambdas, b.trace_p, b.trace_q)?;
            let mut table = Table::new("trace_check", &["lambda", "ratio"]);
            for (l, r) in report.lambdas.iter().zip(&report.ratios) {
                table.push(vec![Cell::Int(*l as i64), Cell::Num(*r)]);
            }
            if report.ratios.len() >= 2 {
                let reference = 1.min(report.ratios.len() - 2);
                let last = report.ratios.len() - 1;
                summary_row(
                    &mut summary,
                    "trace-check",
                    Cell::Text(format!("{}/{}", report.lambdas[last], report.lambdas[reference])),
                    report.ratios[last] / report.ratios[reference],
                    2.0,
                );
            }
            tables.push(table);
            stage("trace-check", t);
        }
        Mode::HardyCheck => {
            let t = Instant::now();
            let battery = hardy_functions(&config.hardy, config.seed)?;
            let ratios = battery
                .par_iter()
                .map(|f| Ok(hardy_check(f)?.ratio))
                .collect::<Result<Vec<f64>, HarnessError>>()?;
            let mut table = Table::new("hardy_check", &["index", "ratio"]);
            for (i, r) in ratios.iter().enumerate() {
                table.push(vec![Cell::Int(i as i64), Cell::Num(*r)]);
            }
            let max = ratios.iter().copied().fold(0.0, f64::max);
            summary_row(&mut summary, "hardy-check", Cell::Text("max".into()), max, 4.0);
            tables.push(table);
            stage("hardy-check", t);
        }
    }
    timings.push(("total".into(), start.elapsed().as_secs_f64()));
    if test_mode {
        timings.clear();
    }
    Ok(RunOutput {
        mode: config.mode,
        config_hash: config.hash(),
        tables,
        summary,
        timings,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn write_output(output: &RunOutput, config: &ExperimentConfig, opts: &RunOptions) -> Result<(), HarnessError> {
    fs::create_dir_all(&opts.out).map_err(|e| HarnessError::io(&opts.out, e))?;
    let mut files = Vec::new();
    for t in output.tables.iter().chain(std::iter::once(&output.summary)) {
        let name = format!("{}.csv", t.name);
        write_file(&opts.out.join(&name), &t.to_csv())?;
        files.push(name);
    }
    let mut manifest = format!(
        "version = {VERSION}\nmode = {}\nconfig_hash = {}\nseed = {}\nfiles = {}\n",
        output.mode.name(),
        output.config_hash,
        config.seed,
        files.join(" ")
    );
    for (stage, secs) in &output.timings {
        manifest.push_str(&format!("stage.{stage}.seconds = {secs:.3}\n"));
    }
    write_file(&opts.out.join("manifest.txt"), &manifest)
}
