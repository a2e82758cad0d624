//! Flat `key = value` experiment configuration with dotted keys. `#` starts
//! a comment; lists are whitespace separated, polygon vertices are
//! `x y; x y; …`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::besov::Curve;
use crate::fem::Preset;
use crate::geometry::{DomainSpec, RadiusSeries};
use crate::recon::{Calibration, FitModel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Calibrate,
    Value,
    Normal,
    Pipeline,
    BesovRate,
    TraceCheck,
    HardyCheck,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::Calibrate,
        Mode::Value,
        Mode::Normal,
        Mode::Pipeline,
        Mode::BesovRate,
        Mode::TraceCheck,
        Mode::HardyCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Calibrate => "calibrate",
            Mode::Value => "value",
            Mode::Normal => "normal",
            Mode::Pipeline => "pipeline",
            Mode::BesovRate => "besov-rate",
            Mode::TraceCheck => "trace-check",
            Mode::HardyCheck => "hardy-check",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

/// Boundary points as arclength parameters, or k evenly spaced from s = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Points {
    List(Vec<f64>),
    Uniform(usize),
}

impl Points {
    pub fn resolve(&self, length: f64) -> Vec<f64> {
        match self {
            Points::List(v) => v.clone(),
            Points::Uniform(k) => (0..*k).map(|i| length * i as f64 / *k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub h0: f64,
    pub steps: usize,
    pub local_factor: f64,
    pub radius_factor: f64,
    pub global_size: f64,
    pub value_model: FitModel,
    pub normal_model: FitModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BesovConfig {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub n: usize,
    pub points: usize,
    pub curve: Curve,
    pub lambdas: Vec<usize>,
    pub battery: usize,
    /// smoothness values cycled over the trace battery
    pub battery_smoothness: Vec<f64>,
    pub trace_p: f64,
    pub trace_q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardyConfig {
    pub n: usize,
    pub battery: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub domain: DomainSpec,
    pub gamma: Preset,
    pub points: Points,
    pub schedule: ScheduleConfig,
    pub value_calibration: Calibration,
    pub normal_calibration: Calibration,
    pub pipeline_samples: usize,
    pub jitter: Option<f64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub besov: BesovConfig,
    pub hardy: HardyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Calibrate,
            domain: DomainSpec::UnitDisk,
            gamma: Preset::Constant { c: 1.0 },
            points: Points::List(vec![0.0]),
            schedule: ScheduleConfig {
                h0: 0.1,
                steps: 6,
                local_factor: 0.125,
                radius_factor: 5.0,
                global_size: 0.1,
                value_model: FitModel::affine(),
                normal_model: FitModel::scanned(),
            },
            value_calibration: Calibration::Continuum,
            normal_calibration: Calibration::Mesh,
            pipeline_samples: 8,
            jitter: None,
            seed: 0,
            output: None,
            besov: BesovConfig {
                s: 1.0,
                p: 4.0,
                q: 2.0,
                n: 512,
                points: 50,
                curve: Curve::line(0.5),
                lambdas: vec![4, 8, 16, 32, 64, 128],
                battery: 50,
                battery_smoothness: vec![0.5, 1.0],
                trace_p: 2.0,
                trace_q: 2.0,
            },
            hardy: HardyConfig { n: 64, battery: 20 },
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
}

impl Reader {
    fn err(&self, key: &str, line: Option<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line,
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn parsed<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| self.err(key, Some(e.line), format!("expected {what}, got `{}`", e.value))),
        }
    }

    fn real(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.parsed::<f64>(key, "a number")?.unwrap_or(default))
    }

    fn count(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.parsed::<usize>(key, "a non-negative integer")?.unwrap_or(default))
    }

    fn reals(&mut self, key: &str) -> Result<Option<(Vec<f64>, usize)>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(|v| Some((v, e.line)))
                .map_err(|_| self.err(key, Some(e.line), format!("expected numbers, got `{}`", e.value))),
        }
    }

    fn pair(&mut self, key: &str, default: [f64; 2]) -> Result<[f64; 2], ConfigError> {
        match self.reals(key)? {
            None => Ok(default),
            Some((v, _)) if v.len() == 2 => Ok([v[0], v[1]]),
            Some((v, line)) => Err(self.err(key, Some(line), format!("expected 2 numbers, got {}", v.len()))),
        }
    }
}

fn parse_model(s: &str) -> Option<FitModel> {
    let (base, inverse) = match s.strip_suffix("+inverse") {
        Some(b) => (b, true),
        None => (s, false),
    };
    let model = match base {
        "last" => FitModel::LastValue,
        "affine" => FitModel::affine(),
        "scanned" => FitModel::scanned(),
        "loglinear" => FitModel::LogLinear { inverse: false },
        _ => {
            let beta: f64 = base.strip_prefix("power:")?.parse().ok()?;
            if !(beta > 0.0 && beta <= 1.0) {
                return None;
            }
            FitModel::Power {
                beta: Some(beta),
                inverse: false,
            }
        }
    };
    Some(if inverse { model.with_inverse() } else { model })
}

fn parse_calibration(s: &str) -> Option<Calibration> {
    match s {
        "continuum" => Some(Calibration::Continuum),
        "mesh" => Some(Calibration::Mesh),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    key: content.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError {
                    line: Some(line),
                    key,
                    message: "empty key".into(),
                });
            }
            if let Some(prev) = entries.get(&key) {
                let Entry { line: first, .. } = prev;
                return Err(ConfigError {
                    line: Some(line),
                    key,
                    message: format!("duplicate key (first set on line {first})"),
                });
            }
            entries.insert(
                key,
                Entry {
                    line,
                    value: v.trim().to_string(),
                },
            );
        }
        let mut r = Reader { entries };
        let d = ExperimentConfig::default();

        let mode = r.parsed::<Mode>("mode", "a mode name")?.unwrap_or(d.mode);

        let domain = match r.take("domain.kind") {
            None => DomainSpec::UnitDisk,
            Some(e) => match e.value.as_str() {
                "disk" => DomainSpec::UnitDisk,
                "star" => {
                    let mean = r.real("domain.mean", 1.0)?;
                    let cos = r.reals("domain.cos")?.map(|v| v.0).unwrap_or_default();
                    let sin = r.reals("domain.sin")?.map(|v| v.0).unwrap_or_default();
                    DomainSpec::Star(RadiusSeries { mean, cos, sin })
                }
                "polygon" => {
                    let v = r
                        .take("domain.vertices")
                        .ok_or_else(|| r.err("domain.vertices", Some(e.line), "required for a polygon"))?;
                    let mut vertices = Vec::new();
                    for chunk in v.value.split(';') {
                        let xy: Vec<f64> = chunk
                            .split_whitespace()
                            .map(|t| t.parse::<f64>())
                            .collect::<Result<_, _>>()
                            .map_err(|_| r.err("domain.vertices", Some(v.line), format!("bad vertex `{}`", chunk.trim())))?;
                        if xy.len() != 2 {
                            return Err(r.err("domain.vertices", Some(v.line), format!("bad vertex `{}`", chunk.trim())));
                        }
                        vertices.push([xy[0], xy[1]]);
                    }
                    DomainSpec::Polygon(vertices)
                }
                other => {
                    return Err(r.err("domain.kind", Some(e.line), format!("unknown domain `{other}`; use disk, star or polygon")))
                }
            },
        };

        let gamma = match r.take("gamma.kind") {
            None => d.gamma.clone(),
            Some(e) => match e.value.as_str() {
                "constant" => Preset::Constant {
                    c: r.real("gamma.c", 1.0)?,
                },
                "exp" => Preset::Exponential {
                    a: r.pair("gamma.a", [0.5, 0.0])?,
                },
                "radial" => Preset::Radial {
                    b: r.real("gamma.b", 0.5)?,
                },
                "bump" => Preset::Bump {
                    amplitude: r.real("gamma.amplitude", 0.5)?,
                    center: r.pair("gamma.center", [0.0, 0.0])?,
                    width: r.real("gamma.width", 0.5)?,
                },
                other => {
                    return Err(r.err(
                        "gamma.kind",
                        Some(e.line),
                        format!("unknown preset `{other}`; use constant, exp, radial or bump"),
                    ))
                }
            },
        };

        let points = match r.take("points") {
            None => d.points.clone(),
            Some(e) => {
                if let Some(k) = e.value.strip_prefix("uniform:") {
                    match k.trim().parse::<usize>() {
                        Ok(k) if k > 0 => Points::Uniform(k),
                        _ => return Err(r.err("points", Some(e.line), format!("bad point count `{k}`"))),
                    }
                } else {
                    let v: Vec<f64> = e
                        .value
                        .split_whitespace()
                        .map(|t| t.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| r.err("points", Some(e.line), "expected parameters or `uniform:k`"))?;
                    if v.is_empty() {
                        return Err(r.err("points", Some(e.line), "no points given"));
                    }
                    Points::List(v)
                }
            }
        };

        let mut model = |key: &str, default: FitModel| -> Result<FitModel, ConfigError> {
            match r.take(key) {
                None => Ok(default),
                Some(e) => parse_model(&e.value).ok_or_else(|| {
                    r.err(
                        key,
                        Some(e.line),
                        format!("unknown model `{}`; use last, affine, scanned, loglinear or power:β, optionally +inverse", e.value),
                    )
                }),
            }
        };
        let value_model = model("schedule.value_model", d.schedule.value_model)?;
        let normal_model = model("schedule.normal_model", d.schedule.normal_model)?;
        let schedule = ScheduleConfig {
            h0: r.real("schedule.h0", d.schedule.h0)?,
            steps: r.count("schedule.steps", d.schedule.steps)?,
            local_factor: r.real("schedule.local_factor", d.schedule.local_factor)?,
            radius_factor: r.real("schedule.radius_factor", d.schedule.radius_factor)?,
            global_size: r.real("schedule.global_size", d.schedule.global_size)?,
            value_model,
            normal_model,
        };

        let mut calibration = |key: &str, default: Calibration| -> Result<Calibration, ConfigError> {
            match r.take(key) {
                None => Ok(default),
                Some(e) => parse_calibration(&e.value)
                    .ok_or_else(|| r.err(key, Some(e.line), format!("unknown calibration `{}`; use continuum or mesh", e.value))),
            }
        };
        let value_calibration = calibration("calibration.value", d.value_calibration)?;
        let normal_calibration = calibration("calibration.normal", d.normal_calibration)?;

        let pipeline_samples = r.count("pipeline.samples", d.pipeline_samples)?;
        let jitter = r.parsed::<f64>("jitter.epsilon", "a number")?;
        let seed = r.parsed::<u64>("seed", "a non-negative integer")?.unwrap_or(d.seed);
        let output = r.take("output").map(|e| PathBuf::from(e.value));

        let curve = match r.take("besov.curve") {
            None => d.besov.curve,
            Some(e) => {
                let height = r.real("besov.height", 0.5)?;
                match e.value.as_str() {
                    "line" => Curve::line(height),
                    "wave" => Curve::smoothed_triangle(height, r.real("besov.lipschitz", 0.2)?, r.count("besov.periods", 2)?),
                    other => return Err(r.err("besov.curve", Some(e.line), format!("unknown curve `{other}`; use line or wave"))),
                }
            }
        };
        let lambdas = match r.reals("besov.lambdas")? {
            None => d.besov.lambdas.clone(),
            Some((v, line)) => v
                .iter()
                .map(|x| {
                    if *x >= 1.0 && x.fract() == 0.0 && (*x as usize).is_power_of_two() {
                        Ok(*x as usize)
                    } else {
                        Err(r.err("besov.lambdas", Some(line), format!("{x} is not a dyadic band")))
                    }
                })
                .collect::<Result<_, _>>()?,
        };
        let battery_smoothness = r.reals("besov.battery_smoothness")?.map(|v| v.0).unwrap_or(d.besov.battery_smoothness.clone());
        let besov = BesovConfig {
            s: r.real("besov.s", d.besov.s)?,
            p: r.real("besov.p", d.besov.p)?,
            q: r.real("besov.q", d.besov.q)?,
            n: r.count("besov.n", d.besov.n)?,
            points: r.count("besov.points", d.besov.points)?,
            curve,
            lambdas,
            battery: r.count("besov.battery", d.besov.battery)?,
            battery_smoothness,
            trace_p: r.real("trace.p", d.besov.trace_p)?,
            trace_q: r.real("trace.q", d.besov.trace_q)?,
        };
        let hardy = HardyConfig {
            n: r.count("hardy.n", d.hardy.n)?,
            battery: r.count("hardy.battery", d.hardy.battery)?,
        };

        if let Some((key, e)) = r.entries.iter().min_by_key(|(_, e)| e.line) {
            return Err(r.err(key, Some(e.line), "unknown key"));
        }

        let config = Self {
            mode,
            domain,
            gamma,
            points,
            schedule,
            value_calibration,
            normal_calibration,
            pipeline_samples,
            jitter,
            seed,
            output,
            besov,
            hardy,
        };
        config.validate()?;
        Ok(config)
    }

    /// Range checks that do not need the geometry.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, message: String| {
            Err(ConfigError {
                line: None,
                key: key.into(),
                message,
            })
        };
        let s = &self.schedule;
        if !(s.h0 > 0.0) {
            return bad("schedule.h0", format!("must be positive, got {}", s.h0));
        }
        if s.steps < 3 {
            return bad("schedule.steps", format!("need at least 3 steps, got {}", s.steps));
        }
        if !(s.local_factor > 0.0 && s.local_factor <= 0.125) {
            return bad("schedule.local_factor", format!("must lie in (0, 1/8], got {}", s.local_factor));
        }
        if !(s.radius_factor > 0.0) {
            return bad("schedule.radius_factor", format!("must be positive, got {}", s.radius_factor));
        }
        if !(s.global_size > 0.0) {
            return bad("schedule.global_size", format!("must be positive, got {}", s.global_size));
        }
        if let Some(e) = self.jitter {
            if !(0.0..1.0).contains(&e) {
                return bad("jitter.epsilon", format!("must lie in [0, 1), got {e}"));
            }
        }
        if self.mode == Mode::Pipeline && self.pipeline_samples < 2 {
            return bad("pipeline.samples", "need at least 2 samples".into());
        }
        let b = &self.besov;
        if !(b.p >= 1.0) || !(b.q >= 1.0) {
            return bad("besov.p", format!("exponents must be ≥ 1, got p={} q={}", b.p, b.q));
        }
        if b.n < 16 || !b.n.is_power_of_two() {
            return bad("besov.n", format!("must be a power of two ≥ 16, got {}", b.n));
        }
        if !(b.trace_q >= 1.0 && b.trace_q <= b.trace_p) {
            return bad("trace.q", format!("need 1 ≤ q ≤ p, got q={} p={}", b.trace_q, b.trace_p));
        }
        if self.hardy.n < 16 || !self.hardy.n.is_power_of_two() {
            return bad("hardy.n", format!("must be a power of two ≥ 16, got {}", self.hardy.n));
        }
        Ok(())
    }

    /// The fields that influence this mode's results, in a fixed textual
    /// form. Output location is not part of it.
    pub fn canonical(&self) -> String {
        let mut out = format!("mode={}\n", self.mode.name());
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        match self.mode {
            Mode::Calibrate | Mode::Value | Mode::Normal | Mode::Pipeline => {
                push("domain", format!("{:?}", self.domain));
                push("points", format!("{:?}", self.points));
                let s = &self.schedule;
                push("schedule.h", format!("{:?} {:?}", s.h0, s.steps));
                if self.mode != Mode::Calibrate {
                    push("gamma", format!("{:?}", self.gamma));
                    push("schedule.mesh", format!("{:?} {:?} {:?}", s.local_factor, s.radius_factor, s.global_size));
                    push("jitter", format!("{:?}", self.jitter));
                    if self.jitter.is_some() {
                        push("seed", self.seed.to_string());
                    }
                }
                if matches!(self.mode, Mode::Value | Mode::Pipeline) {
                    push("value", format!("{:?} {:?}", s.value_model, self.value_calibration));
                }
                if matches!(self.mode, Mode::Normal | Mode::Pipeline) {
                    push("normal", format!("{:?} {:?}", s.normal_model, self.normal_calibration));
                }
                if self.mode == Mode::Pipeline {
                    push("pipeline.samples", self.pipeline_samples.to_string());
                }
            }
            Mode::BesovRate => {
                let b = &self.besov;
                push("besov", format!("{:?} {:?} {:?} {} {} {:?}", b.s, b.p, b.q, b.n, b.points, b.curve));
                push("seed", self.seed.to_string());
            }
            Mode::TraceCheck => {
                let b = &self.besov;
                push(
                    "trace",
                    format!(
                        "{:?} {:?} {} {} {:?} {:?} {:?}",
                        b.trace_p, b.trace_q, b.n, b.battery, b.curve, b.lambdas, b.battery_smoothness
                    ),
                );
                push("seed", self.seed.to_string());
            }
            Mode::HardyCheck => {
                push("hardy", format!("{} {}", self.hardy.n, self.hardy.battery));
                push("seed", self.seed.to_string());
            }
        }
        out
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = ExperimentConfig::parse(
            "# demo\nmode = value\ndomain.kind = disk\ngamma.kind = exp\ngamma.a = 0.5 0.0\nschedule.h0 = 0.05 # small\nschedule.steps = 5\npoints = uniform:8\n",
        )
        .unwrap();
        assert_eq!(c.mode, Mode::Value);
        assert_eq!(c.gamma, Preset::Exponential { a: [0.5, 0.0] });
        assert_eq!(c.schedule.h0, 0.05);
        assert_eq!(c.points, Points::Uniform(8));
    }

    #[test]
    fn errors_name_key_and_line() {
        let e = ExperimentConfig::parse("mode = value\nschedule.h0 = abc\n").unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (Some(2), "schedule.h0"));
        let e = ExperimentConfig::parse("mode = value\n\ngamma.colour = red\n").unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (Some(3), "gamma.colour"));
        let e = ExperimentConfig::parse("mode = value\nmode = normal\n").unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (Some(2), "mode"));
        let e = ExperimentConfig::parse("just words\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = ExperimentConfig::parse("mode = sideways\n").unwrap_err();
        assert_eq!(e.key, "mode");
    }

    #[test]
    fn models_parse() {
        assert_eq!(parse_model("affine"), Some(FitModel::affine()));
        assert_eq!(parse_model("loglinear+inverse"), Some(FitModel::LogLinear { inverse: true }));
        assert_eq!(
            parse_model("power:0.5"),
            Some(FitModel::Power {
                beta: Some(0.5),
                inverse: false
            })
        );
        assert_eq!(parse_model("power:2"), None);
    }

    #[test]
    fn hash_ignores_layout_and_irrelevant_fields() {
        let a = ExperimentConfig::parse("mode = value\ngamma.kind = radial\ngamma.b = 0.5\n").unwrap();
        let b = ExperimentConfig::parse("gamma.b=0.50\n# x\ngamma.kind = radial\nmode=value\noutput = /tmp/x\nbesov.s = 0.7\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse("mode = value\ngamma.kind = radial\ngamma.b = 0.6\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
