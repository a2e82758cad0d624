//! The property suite behind the `verify` verb. Each check writes its CSVs
//! under its own subdirectory of the output directory.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{run, write_file, Cell, ExperimentConfig, HarnessError, Mode, Points, RunOptions, RunOutput, Table};
use crate::besov::{boundary_rate, squared_rate, Curve, GridFunction};
use crate::fem::{BoundaryData, ConductivityField, Conductor, Preset};
use crate::geometry::{build_domain, make_mesh, DomainSpec, Mesh, MeshOptions};
use crate::recon::{recover_normal, recover_pipeline, recover_value, RecoveryOptions, RecoverySchedule};

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub out: PathBuf,
    pub seed: u64,
    /// rerun the suite into `out/rerun` and compare every CSV byte for byte
    pub reproducibility: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} criterion {}: {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.id,
                    c.name,
                    c.detail
                )
            })
            .collect()
    }
}

const BOX: [[f64; 2]; 2] = [[-1.0, -1.0], [1.0, 1.0]];

fn presets() -> [(&'static str, Preset); 3] {
    [
        ("const", Preset::Constant { c: 2.0 }),
        ("exp", Preset::Exponential { a: [0.5, 0.0] }),
        ("radial", Preset::Radial { b: 0.5 }),
    ]
}

struct Suite {
    out: PathBuf,
    seed: u64,
    checks: Vec<Check>,
}

impl Suite {
    fn config(&self, mode: Mode) -> ExperimentConfig {
        ExperimentConfig {
            mode,
            seed: self.seed,
            ..ExperimentConfig::default()
        }
    }

    fn run(&self, dir: &str, config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
        run(
            config,
            &RunOptions {
                out: self.out.join(dir),
                test_mode: true,
            },
        )
    }

    fn write(&self, dir: &str, table: &Table) -> Result<(), HarnessError> {
        let d = self.out.join(dir);
        fs::create_dir_all(&d).map_err(|e| HarnessError::io(&d, e))?;
        write_file(&d.join(format!("{}.csv", table.name)), &table.to_csv())
    }

    fn record(&mut self, id: usize, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            id,
            name: name.into(),
            passed,
            detail,
        });
    }

    /// Runs `f`; a harness error becomes a failed check instead of aborting
    /// the suite.
    fn guarded(&mut self, id: usize, name: &str, f: impl FnOnce(&mut Self) -> Result<(), HarnessError>) {
        if let Err(e) = f(self) {
            self.record(id, name, false, format!("error: {e}"));
        }
    }
}

fn summary_errors(out: &RunOutput) -> Vec<f64> {
    out.summary.column("rel_error").unwrap_or_default()
}

fn summary_estimates(out: &RunOutput) -> Vec<f64> {
    out.summary.column("estimate").unwrap_or_default()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn nonincreasing(errors: &[f64]) -> bool {
    errors.windows(2).all(|w| w[1] <= w[0])
}

fn calibration(s: &mut Suite) -> Result<(), HarnessError> {
    let t = Instant::now();
    let out = s.run("c1_calibrate", &s.config(Mode::Calibrate))?;
    let secs = t.elapsed().as_secs_f64();
    let table = out.table("calibrate").ok_or_else(|| HarnessError::Numerical("no calibrate table".into()))?;
    let (h, c0, c1) = (
        table.column("h").unwrap_or_default(),
        table.column("c0").unwrap_or_default(),
        table.column("c1").unwrap_or_default(),
    );
    let at = h
        .iter()
        .position(|&v| (v - 0.0125).abs() < 1e-12)
        .ok_or_else(|| HarnessError::Numerical("schedule does not contain h = 0.0125".into()))?;
    let e0 = (c0[at] / FRAC_PI_4 - 1.0).abs();
    let e1 = (c1[at] / -FRAC_PI_4 - 1.0).abs();
    let errs0: Vec<f64> = c0.iter().map(|c| (c - FRAC_PI_4).abs()).collect();
    let errs1: Vec<f64> = c1.iter().map(|c| (c + FRAC_PI_4).abs()).collect();
    let monotone = nonincreasing(&errs0) && nonincreasing(&errs1);
    s.record(
        1,
        "calibration constants",
        e0 <= 0.02 && e1 <= 0.05 && monotone && secs <= 30.0,
        format!("c0 err {e0:.4}, c1 err {e1:.4} at h=0.0125, monotone {monotone}, {secs:.1}s"),
    );
    Ok(())
}

fn value_recovery(s: &mut Suite) -> Result<(), HarnessError> {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for (name, preset) in presets() {
        let config = ExperimentConfig {
            gamma: preset,
            points: Points::Uniform(8),
            ..s.config(Mode::Value)
        };
        let out = s.run(&format!("c2_value_{name}"), &config)?;
        worst = worst.max(max_abs(&summary_errors(&out)));
    }
    let unit = ExperimentConfig {
        gamma: Preset::Constant { c: 1.0 },
        points: Points::List(vec![0.0]),
        ..s.config(Mode::Value)
    };
    let out = s.run("c2_value_unit", &unit)?;
    let rho = out
        .table("value")
        .and_then(|t| t.column("rho"))
        .and_then(|r| r.last().copied())
        .unwrap_or(f64::NAN);
    let secs = t.elapsed().as_secs_f64();
    s.record(
        2,
        "boundary value recovery",
        worst <= 0.05 && (rho - 1.0).abs() <= 0.02 && secs <= 600.0,
        format!("max rel error {worst:.4} over 3 presets x 8 points, unit rho(h_min) {rho:.4}, {secs:.1}s"),
    );
    Ok(())
}

fn normal_recovery(s: &mut Suite) -> Result<(), HarnessError> {
    let targets = [0.05, 0.15, 0.15];
    let mut ok = true;
    let mut detail = Vec::new();
    for ((name, preset), tol) in presets().into_iter().zip(targets) {
        let exact = ExperimentConfig {
            gamma: preset.clone(),
            ..s.config(Mode::Normal)
        };
        let exact = s.run(&format!("c3_normal_{name}"), &exact)?;
        let pipe = ExperimentConfig {
            gamma: preset,
            ..s.config(Mode::Pipeline)
        };
        let pipe = s.run(&format!("c3_pipeline_{name}"), &pipe)?;
        let est = summary_estimates(&exact)[0];
        let e_exact = summary_errors(&exact)[0].abs();
        let e_pipe = summary_errors(&pipe)
            .last()
            .copied()
            .unwrap_or(f64::NAN)
            .abs();
        ok &= e_exact <= tol && e_pipe <= e_exact + 0.05;
        detail.push(format!("{name}: d {est:.4} err {e_exact:.4}, pipeline err {e_pipe:.4}"));
    }
    s.record(3, "normal derivative recovery", ok, detail.join("; "));
    Ok(())
}

const RECON_SOURCES: [(&str, &str); 2] = [
    ("recon/mod.rs", include_str!("../recon/mod.rs")),
    ("recon/fit.rs", include_str!("../recon/fit.rs")),
];

const INTERIOR_ACCESS: [&str; 4] = ["ConductivityField", "Preset", ".gradient(", "log_gradient"];

fn oracle_discipline(s: &mut Suite) -> Result<(), HarnessError> {
    let domain = build_domain(&DomainSpec::UnitDisk)?;
    let gamma = ConductivityField::new(Preset::Exponential { a: [0.5, 0.0] }, BOX)?;
    let schedule = RecoverySchedule::dyadic(0.1, 4, crate::recon::FitModel::affine())?;
    let opts = RecoveryOptions::default();
    let mut table = Table::new("query_counts", &["stage", "points", "schedule", "queries"]);

    let c = Conductor::new(gamma.clone());
    recover_value(&c, &domain, 0.0, &schedule, &opts)?;
    table.push(vec![Cell::Text("value".into()), Cell::Int(1), Cell::Int(4), Cell::Int(c.queries() as i64)]);
    let ok_a = c.queries() == schedule.len();

    let c = Conductor::new(gamma.clone());
    let trace = c.boundary_trace(&domain);
    recover_normal(&c, &domain, 0.0, &trace, &schedule, &opts)?;
    table.push(vec![Cell::Text("normal".into()), Cell::Int(1), Cell::Int(4), Cell::Int(c.queries() as i64)]);
    let ok_b = c.queries() == schedule.len();

    let c = Conductor::new(gamma);
    let p = recover_pipeline(&c, &domain, &[0.0], 4, &schedule, &schedule, &opts)?;
    let points = p.stage_a.len() + p.stage_b.len();
    table.push(vec![
        Cell::Text("pipeline".into()),
        Cell::Int(points as i64),
        Cell::Int(4),
        Cell::Int(c.queries() as i64),
    ]);
    let ok_p = c.queries() == points * schedule.len();
    s.write("c4_oracle", &table)?;

    let leaks: Vec<String> = RECON_SOURCES
        .iter()
        .flat_map(|(file, src)| {
            INTERIOR_ACCESS
                .iter()
                .filter(|t| src.contains(**t))
                .map(move |t| format!("{file} mentions {t}"))
        })
        .collect();
    s.record(
        4,
        "oracle discipline",
        ok_a && ok_b && ok_p && leaks.is_empty(),
        format!(
            "queries per stage match schedule: value {ok_a}, normal {ok_b}, pipeline {ok_p}; interior access: {}",
            if leaks.is_empty() { "none".to_string() } else { leaks.join(", ") }
        ),
    );
    Ok(())
}

fn angular(mesh: &Mesh, f: impl Fn(f64) -> f64) -> Result<BoundaryData, HarnessError> {
    Ok(BoundaryData::from_fn(mesh, |p, _| f(p[1].atan2(p[0])))?)
}

fn dtn_anchors(s: &mut Suite) -> Result<(), HarnessError> {
    let domain = build_domain(&DomainSpec::UnitDisk)?;
    let mut table = Table::new("dtn_anchors", &["quantity", "value", "reference"]);
    let fine = Arc::new(make_mesh(&domain, &MeshOptions::uniform(0.02))?);
    let unit = Conductor::new(ConductivityField::constant(1.0)).oracle(Arc::clone(&fine))?;
    let mut worst_anchor = 0.0f64;
    for k in [1.0, 3.0] {
        let q = unit.quad(&angular(&fine, |t| (k * t).cos())?)?;
        worst_anchor = worst_anchor.max((q / (k * PI) - 1.0).abs());
        table.push(vec![Cell::Text(format!("cos{k}")), Cell::Num(q), Cell::Num(k * PI)]);
    }

    let coarse = Arc::new(make_mesh(&domain, &MeshOptions::uniform(0.05))?);
    let gamma = ConductivityField::new(Preset::Exponential { a: [0.5, 0.0] }, BOX)?;
    let oracle = Conductor::new(gamma).oracle(Arc::clone(&coarse))?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x5eed_0003);
    let random = |rng: &mut ChaCha8Rng| -> Result<BoundaryData, HarnessError> {
        let c: Vec<(f64, f64)> = (0..6)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        angular(&coarse, |t| {
            c.iter()
                .enumerate()
                .map(|(k, (a, b))| a * (k as f64 * t).cos() + b * (k as f64 * t).sin())
                .sum()
        })
    };
    let (mut asym, mut min_q) = (0.0f64, f64::INFINITY);
    for _ in 0..20 {
        let f = random(&mut rng)?;
        let g = random(&mut rng)?;
        let (fg, gf, qf) = (oracle.bilin(&f, &g)?, oracle.bilin(&g, &f)?, oracle.quad(&f)?);
        asym = asym.max((fg - gf).abs() / fg.abs().max(qf));
        min_q = min_q.min(qf);
    }
    table.push(vec![Cell::Text("max_asymmetry".into()), Cell::Num(asym), Cell::Num(1e-10)]);
    table.push(vec![Cell::Text("min_quad".into()), Cell::Num(min_q), Cell::Num(-1e-12)]);
    s.write("c5_dtn", &table)?;
    s.record(
        5,
        "DtN forward anchors",
        worst_anchor <= 0.02 && asym <= 1e-10 && min_q >= -1e-12,
        format!("k·pi anchors within {worst_anchor:.4}, asymmetry {asym:.1e}, min quad {min_q:.3e}"),
    );
    Ok(())
}

fn besov_rates(s: &mut Suite) -> Result<(), HarnessError> {
    let t = Instant::now();
    let n = 512;
    let line = Curve::line(0.5);
    let y = [0.5, 0.5];
    let mut table = Table::new("cusp_rates", &["beta", "rate", "squared_rate"]);
    let mut worst = 0.0f64;
    let mut sq_err = 0.0;
    for beta in [0.25, 0.5, 0.75, 1.0] {
        let f = GridFunction::from_fn(2, n, |x| ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).powf(beta / 2.0))?;
        let r = boundary_rate(&f, &line, &y, 2.0)?;
        let q = squared_rate(&f, &line, &y)?;
        worst = worst.max((r.exponent - beta).abs());
        if beta == 0.5 {
            sq_err = (q.exponent - 1.0).abs();
        }
        table.push(vec![Cell::Num(beta), Cell::Num(r.exponent), Cell::Num(q.exponent)]);
    }
    s.write("c6_besov", &table)?;
    let out = s.run("c6_besov", &s.config(Mode::BesovRate))?;
    let medians = summary_estimates(&out);
    let floor = 1.0 - 0.25 - 0.15;
    let secs = t.elapsed().as_secs_f64();
    s.record(
        6,
        "boundary rates",
        worst <= 0.1 && sq_err <= 0.15 && medians.len() == 2 && medians.iter().all(|m| *m >= floor) && secs <= 120.0,
        format!(
            "cusp slope error {worst:.3}, squared cusp error {sq_err:.3}, synth medians {:.3}/{:.3} vs floor {floor:.2}, {secs:.1}s",
            medians.first().copied().unwrap_or(f64::NAN),
            medians.get(1).copied().unwrap_or(f64::NAN)
        ),
    );
    Ok(())
}

fn trace_inequality(s: &mut Suite) -> Result<(), HarnessError> {
    let mut config = s.config(Mode::TraceCheck);
    config.besov.curve = Curve::smoothed_triangle(0.5, 0.2, 2);
    let out = s.run("c7_trace", &config)?;
    let table = out.table("trace_check").ok_or_else(|| HarnessError::Numerical("no trace table".into()))?;
    let (l, r) = (table.column("lambda").unwrap_or_default(), table.column("ratio").unwrap_or_default());
    let at = |lambda: f64| l.iter().position(|&v| v == lambda).map(|i| r[i]).unwrap_or(f64::NAN);
    let (r8, r128) = (at(8.0), at(128.0));
    s.record(
        7,
        "trace inequality",
        r128 <= 2.0 * r8,
        format!("battery max ratio {r8:.4} at 8, {r128:.4} at 128 (ratio {:.3})", r128 / r8),
    );
    Ok(())
}

fn hardy(s: &mut Suite) -> Result<(), HarnessError> {
    let out = s.run("c8_hardy", &s.config(Mode::HardyCheck))?;
    let max = summary_estimates(&out).first().copied().unwrap_or(f64::NAN);
    s.record(8, "Hardy inequality", max <= 4.5, format!("max ratio {max:.4} over 20 bumps at N=64"));
    Ok(())
}

fn csv_files(root: &Path, skip: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let Ok(entries) = fs::read_dir(&dir) else { continue };
        for e in entries.flatten() {
            let p = e.path();
            if p == skip {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push(p.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn run_suite(out: &Path, seed: u64) -> Vec<Check> {
    let mut s = Suite {
        out: out.to_path_buf(),
        seed,
        checks: Vec::new(),
    };
    s.guarded(1, "calibration constants", calibration);
    s.guarded(2, "boundary value recovery", value_recovery);
    s.guarded(3, "normal derivative recovery", normal_recovery);
    s.guarded(4, "oracle discipline", oracle_discipline);
    s.guarded(5, "DtN forward anchors", dtn_anchors);
    s.guarded(6, "boundary rates", besov_rates);
    s.guarded(7, "trace inequality", trace_inequality);
    s.guarded(8, "Hardy inequality", hardy);
    s.checks
}

/// Runs checks 1 to 8, and with `reproducibility` check 9: a second pass
/// whose CSVs must match the first byte for byte.
pub fn verify(opts: &VerifyOptions) -> Result<VerifyReport, HarnessError> {
    let start = Instant::now();
    fs::create_dir_all(&opts.out).map_err(|e| HarnessError::io(&opts.out, e))?;
    let mut checks = run_suite(&opts.out, opts.seed);
    let suite_secs = start.elapsed().as_secs_f64();
    if opts.reproducibility {
        let rerun = opts.out.join("rerun");
        if rerun.exists() {
            fs::remove_dir_all(&rerun).map_err(|e| HarnessError::io(&rerun, e))?;
        }
        run_suite(&rerun, opts.seed);
        let first = csv_files(&opts.out, &rerun);
        let second = csv_files(&rerun, &rerun.join("rerun"));
        let mut mismatched: Vec<String> = Vec::new();
        if first != second {
            mismatched.push("file sets differ".into());
        }
        for f in &first {
            let a = fs::read(opts.out.join(f)).ok();
            let b = fs::read(rerun.join(f)).ok();
            if a.is_none() || a != b {
                mismatched.push(f.display().to_string());
            }
        }
        checks.push(Check {
            id: 9,
            name: "reproducibility".into(),
            passed: mismatched.is_empty() && !first.is_empty() && suite_secs <= 1200.0,
            detail: format!(
                "{} CSVs compared, {} mismatched, suite {suite_secs:.1}s",
                first.len(),
                mismatched.len()
            ),
        });
    }
    let report = VerifyReport { checks };
    let mut text = report.lines().join("\n");
    text.push('\n');
    write_file(&opts.out.join("verify.txt"), &text)?;
    Ok(report)
}
