//! Local averages at boundary points and the trace estimate, for domains
//! Ω = {x_n > g(x₁)} on the torus.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

use super::{fft_nd, frequency, lp_norm, BesovError, GridFunction, Interpolant, LittlewoodPaley};
use crate::recon::RateReport;

/// How far a smoothed triangle wave is from the sharp one; 1 would be the
/// triangle itself.
const WAVE_ROUNDING: f64 = 0.95;

/// Boundary curve x_n = g(x₁).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curve {
    Line { height: f64 },
    /// g(t) = height + (2A/π)·asin(ρ sin(2πmt)), with A set so the slope
    /// bound equals `lipschitz`
    Wave {
        height: f64,
        lipschitz: f64,
        periods: usize,
    },
}

impl Curve {
    pub fn line(height: f64) -> Self {
        Curve::Line { height }
    }

    pub fn smoothed_triangle(height: f64, lipschitz: f64, periods: usize) -> Self {
        Curve::Wave {
            height,
            lipschitz,
            periods: periods.max(1),
        }
    }

    fn wave_amplitude(lipschitz: f64, periods: usize) -> f64 {
        lipschitz / (4.0 * WAVE_ROUNDING * periods as f64)
    }

    pub fn height(&self, t: f64) -> f64 {
        match *self {
            Curve::Line { height } => height,
            Curve::Wave {
                height,
                lipschitz,
                periods,
            } => {
                let a = Self::wave_amplitude(lipschitz, periods);
                let phase = TAU * periods as f64 * t;
                height + 2.0 * a / PI * (WAVE_ROUNDING * phase.sin()).asin()
            }
        }
    }

    pub fn slope(&self, t: f64) -> f64 {
        match *self {
            Curve::Line { .. } => 0.0,
            Curve::Wave {
                lipschitz,
                periods,
                ..
            } => {
                let a = Self::wave_amplitude(lipschitz, periods);
                let m = periods as f64;
                let phase = TAU * m * t;
                let rs = WAVE_ROUNDING * phase.sin();
                2.0 * a / PI * WAVE_ROUNDING * TAU * m * phase.cos() / (1.0 - rs * rs).sqrt()
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Curve::Line { .. } => 0.0,
            Curve::Wave { lipschitz, .. } => lipschitz,
        }
    }

    /// Point of Γ over x₁ = t with the middle coordinates at `mid`.
    pub fn point(&self, dim: usize, t: f64, mid: f64) -> Vec<f64> {
        let mut y = vec![mid; dim];
        y[0] = t;
        y[dim - 1] = self.height(t);
        y
    }
}

/// Dyadic radii 2^{-2}, …, 2^{-J} with 2^{-J} = 2/N.
fn radii(n: usize) -> Vec<f64> {
    let j_max = n.trailing_zeros() as i32 - 1;
    (2..=j_max).map(|j| 2f64.powi(-j)).collect()
}

fn check_point(f: &GridFunction, curve: &Curve, y: &[f64]) -> Result<(), BesovError> {
    let dim = f.dim();
    if dim < 2 {
        return Err(BesovError::Dimension(dim));
    }
    if y.len() != dim {
        return Err(BesovError::Parameter(format!("point has {} coordinates, grid has {dim}", y.len())));
    }
    let off = y[dim - 1] - curve.height(y[0]);
    if off.abs() > 1e-9 {
        return Err(BesovError::Parameter(format!("point is {off} off the boundary curve")));
    }
    Ok(())
}

/// Value at y: the grid sample when y is a grid point, the trigonometric
/// interpolant otherwise.
fn value_at(f: &GridFunction, interp: &Interpolant, y: &[f64]) -> f64 {
    let n = f.size() as f64;
    let on_grid = y.iter().all(|c| (c * n - (c * n).round()).abs() < 1e-9);
    if on_grid {
        let idx = y.iter().fold(0usize, |acc, c| {
            acc * f.size() + ((c * n).round() as i64).rem_euclid(f.size() as i64) as usize
        });
        f.values()[idx]
    } else {
        interp.eval(y)
    }
}

/// (r^{−n} ∫_{B_r(y)∩Ω} |v − v_y|^q)^{1/q} at every radius, by cell sums;
/// cells on Γ count half.
fn averages(values: &GridFunction, vy: f64, curve: &Curve, y: &[f64], q: f64, rs: &[f64]) -> Vec<f64> {
    let dim = values.dim();
    let n = values.size();
    let nf = n as f64;
    let big = rs[0];
    let lo: Vec<i64> = y.iter().map(|c| ((c - big) * nf).floor() as i64).collect();
    let hi: Vec<i64> = y.iter().map(|c| ((c + big) * nf).ceil() as i64).collect();
    let cell = nf.powi(-(dim as i32));
    let mut sums = vec![0.0; rs.len()];
    let mut idx = lo.clone();
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| i as f64 / nf).collect();
        let d = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if d < big {
            let side = x[dim - 1] - curve.height(x[0]);
            let w = if side.abs() <= 1e-12 {
                0.5
            } else if side > 0.0 {
                1.0
            } else {
                0.0
            };
            if w > 0.0 {
                let flat = idx
                    .iter()
                    .fold(0usize, |acc, &i| acc * n + i.rem_euclid(n as i64) as usize);
                let v = w * cell * (values.values()[flat] - vy).abs().powf(q);
                for (s, &r) in sums.iter_mut().zip(rs) {
                    if d < r {
                        *s += v;
                    } else {
                        break;
                    }
                }
            }
        }
        // odometer over the bounding box
        let mut a = dim;
        loop {
            if a == 0 {
                return sums
                    .iter()
                    .zip(rs)
                    .map(|(s, r)| (s / r.powi(dim as i32)).powf(1.0 / q))
                    .collect();
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] <= hi[a] {
                break;
            }
            idx[a] = lo[a];
        }
    }
}

/// Log-log slope over the window without the two largest and two smallest
/// radii. Averages that are all zero give an exponent of +∞.
fn slope_report(rs: &[f64], avgs: Vec<f64>, scale: f64) -> Result<RateReport, BesovError> {
    let zero = 1e-13 * scale.max(f64::MIN_POSITIVE);
    if avgs.iter().all(|a| *a <= zero) {
        return Ok(RateReport {
            abscissae: rs.to_vec(),
            values: vec![0.0; avgs.len()],
            exponent: f64::INFINITY,
            intercept: 0.0,
            residual: 0.0,
            flags: vec!["all averages vanish".into()],
        });
    }
    let window = if rs.len() > 4 { 2..rs.len() - 2 } else { 0..0 };
    let pts: Vec<(f64, f64)> = window
        .filter(|&j| avgs[j] > zero && avgs[j].is_finite())
        .map(|j| (rs[j].ln(), avgs[j].ln()))
        .collect();
    if pts.len() < 3 {
        return Err(BesovError::TooFewRadii { usable: pts.len() });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(RateReport {
        abscissae: rs.to_vec(),
        values: avgs,
        exponent: slope,
        intercept,
        residual,
        flags: Vec::new(),
    })
}

/// Lebesgue-point rate of f at y ∈ Γ in L^q.
pub fn boundary_rate(f: &GridFunction, curve: &Curve, y: &[f64], q: f64) -> Result<RateReport, BesovError> {
    boundary_rates(f, curve, &[y.to_vec()], q)?
        .pop()
        .ok_or_else(|| BesovError::Parameter("no points".into()))
}

/// [`boundary_rate`] at many points, sharing one interpolant.
pub fn boundary_rates(
    f: &GridFunction,
    curve: &Curve,
    points: &[Vec<f64>],
    q: f64,
) -> Result<Vec<RateReport>, BesovError> {
    if !(q >= 1.0) {
        return Err(BesovError::Parameter(format!("exponent {q} below 1")));
    }
    let interp = Interpolant::new(f);
    let rs = radii(f.size());
    let scale = f.max_abs();
    points
        .par_iter()
        .map(|y| {
            check_point(f, curve, y)?;
            let vy = value_at(f, &interp, y);
            slope_report(&rs, averages(f, vy, curve, y, q, &rs), scale)
        })
        .collect()
}

/// Rate of f² at y in L¹.
pub fn squared_rate(f: &GridFunction, curve: &Curve, y: &[f64]) -> Result<RateReport, BesovError> {
    squared_rates(f, curve, &[y.to_vec()])?
        .pop()
        .ok_or_else(|| BesovError::Parameter("no points".into()))
}

pub fn squared_rates(f: &GridFunction, curve: &Curve, points: &[Vec<f64>]) -> Result<Vec<RateReport>, BesovError> {
    let interp = Interpolant::new(f);
    let sq = f.map(|v| v * v)?;
    let rs = radii(f.size());
    let scale = sq.max_abs();
    points
        .par_iter()
        .map(|y| {
            check_point(f, curve, y)?;
            let vy = value_at(f, &interp, y).powi(2);
            slope_report(&rs, averages(&sq, vy, curve, y, 1.0, &rs), scale)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub lambdas: Vec<usize>,
    /// ‖P_λf‖_{L^q(Γ)} / (λ^{1/p}‖f‖_p)
    pub ratios: Vec<f64>,
    pub max: f64,
}

/// ‖g‖_{L^q(Γ)}: per grid column over x₁ (and the middle axes), the 1-D
/// trigonometric series along x_n evaluated at g(x₁), weighted by the
/// surface element √(1+g′²).
fn trace_norm(g: &GridFunction, curve: &Curve, q: f64) -> f64 {
    let dim = g.dim();
    let n = g.size();
    let nf = n as f64;
    let mut buf: Vec<Complex64> = g.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let columns = buf.len() / n;
    let mut sum = 0.0;
    for c in 0..columns {
        let col = &mut buf[c * n..(c + 1) * n];
        fft_nd(col, 1, n, FftDirection::Forward);
        // x₁ index is the leading digit of the column number
        let x1 = (c / n.pow(dim as u32 - 2)) as f64 / nf;
        let t = curve.height(x1);
        let v: f64 = col
            .iter()
            .enumerate()
            .map(|(k, a)| (a * Complex64::from_polar(1.0, TAU * frequency(k, n) * t)).re)
            .sum::<f64>()
            / nf;
        sum += v.abs().powf(q) * (1.0 + curve.slope(x1).powi(2)).sqrt();
    }
    (sum / nf.powi(dim as i32 - 1)).powf(1.0 / q)
}

/// Band-by-band trace ratios of f on Γ.
pub fn trace_check(
    f: &GridFunction,
    curve: &Curve,
    lambdas: &[usize],
    p: f64,
    q: f64,
) -> Result<TraceReport, BesovError> {
    if f.dim() < 2 {
        return Err(BesovError::Dimension(f.dim()));
    }
    if !(q >= 1.0 && q <= p) {
        return Err(BesovError::Parameter(format!("need 1 ≤ q ≤ p, got q={q}, p={p}")));
    }
    let lp = LittlewoodPaley::new(f);
    let norm = lp_norm(f.values(), p);
    let ratios = lambdas
        .iter()
        .map(|&l| {
            let band = lp.band(l)?;
            Ok(if norm > 0.0 {
                trace_norm(&band, curve, q) / ((l as f64).powf(1.0 / p) * norm)
            } else {
                0.0
            })
        })
        .collect::<Result<Vec<f64>, BesovError>>()?;
    let max = ratios.iter().copied().fold(0.0, f64::max);
    Ok(TraceReport {
        lambdas: lambdas.to_vec(),
        ratios,
        max,
    })
}

/// Battery maximum of the trace ratio at each λ.
pub fn trace_battery(
    battery: &[GridFunction],
    curve: &Curve,
    lambdas: &[usize],
    p: f64,
    q: f64,
) -> Result<TraceReport, BesovError> {
    let reports = battery
        .par_iter()
        .map(|f| trace_check(f, curve, lambdas, p, q))
        .collect::<Result<Vec<_>, _>>()?;
    let ratios: Vec<f64> = (0..lambdas.len())
        .map(|i| reports.iter().map(|r| r.ratios[i]).fold(0.0, f64::max))
        .collect();
    let max = ratios.iter().copied().fold(0.0, f64::max);
    Ok(TraceReport {
        lambdas: lambdas.to_vec(),
        ratios,
        max,
    })
}
