//! Littlewood-Paley analysis on the periodic unit torus [0,1)ⁿ, n ≤ 3.
//!
//! Frequencies are the integer lattice; a sample at index i sits at i/N.
//! The last axis is the graph direction for the boundary curves in
//! [`rates`].

mod hardy;
mod rates;
mod synth;

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use thiserror::Error;

use crate::cutoff::chi;

pub use hardy::{bump, cell_weight_constant, hardy_check, shell, HardyReport};
pub use rates::{
    boundary_rate, boundary_rates, squared_rate, squared_rates, trace_battery, trace_check, Curve,
    TraceReport,
};
pub use synth::synth_besov;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BesovError {
    #[error("dimension {0} is not supported here")]
    Dimension(usize),
    #[error("grid size {0} must be a power of two ≥ 16")]
    GridSize(usize),
    #[error("expected {expected} samples, got {got}")]
    DataLength { expected: usize, got: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("band {lambda} must be a power of two ≤ {max}")]
    Band { lambda: usize, max: usize },
    #[error("{0}")]
    Parameter(String),
    #[error("only {usable} usable radii in the fit window; need 3")]
    TooFewRadii { usable: usize },
}

/// Real samples on the uniform periodic grid, row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dim: usize,
    n: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(dim: usize, n: usize, values: Vec<f64>) -> Result<Self, BesovError> {
        check_shape(dim, n)?;
        let expected = n.pow(dim as u32);
        if values.len() != expected {
            return Err(BesovError::DataLength {
                expected,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(BesovError::NonFinite(i));
        }
        Ok(Self { dim, n, values })
    }

    pub fn from_fn(dim: usize, n: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self, BesovError> {
        check_shape(dim, n)?;
        let values = (0..n.pow(dim as u32))
            .map(|i| {
                let x = coordinates(i, dim, n);
                f(&x[..dim])
            })
            .collect();
        Self::new(dim, n, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Samples per axis.
    pub fn size(&self) -> usize {
        self.n
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

    /// Grid point of a flat index (unused trailing entries are 0).
    pub fn point(&self, index: usize) -> [f64; 3] {
        coordinates(index, self.dim, self.n)
    }

    /// (mean |f|^p)^{1/p}, the grid quadrature of the L^p norm on the unit box.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.values, p)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, BesovError> {
        Self::new(self.dim, self.n, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Unnormalized forward DFT.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut buf, self.dim, self.n, FftDirection::Forward);
        buf
    }

    /// Real part of the normalized inverse DFT of `spectrum`.
    pub fn from_spectrum(dim: usize, n: usize, mut spectrum: Vec<Complex64>) -> Result<Self, BesovError> {
        check_shape(dim, n)?;
        fft_nd(&mut spectrum, dim, n, FftDirection::Inverse);
        let scale = 1.0 / spectrum.len() as f64;
        Self::new(dim, n, spectrum.iter().map(|c| c.re * scale).collect())
    }
}

fn check_shape(dim: usize, n: usize) -> Result<(), BesovError> {
    if !(1..=3).contains(&dim) {
        return Err(BesovError::Dimension(dim));
    }
    if n < 16 || !n.is_power_of_two() {
        return Err(BesovError::GridSize(n));
    }
    Ok(())
}

pub(crate) fn lp_norm(values: &[f64], p: f64) -> f64 {
    let mean = values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / values.len() as f64;
    mean.powf(1.0 / p)
}

pub(crate) fn multi_index(mut index: usize, dim: usize, n: usize) -> [usize; 3] {
    let mut out = [0; 3];
    for a in (0..dim).rev() {
        out[a] = index % n;
        index /= n;
    }
    out
}

fn coordinates(index: usize, dim: usize, n: usize) -> [f64; 3] {
    let m = multi_index(index, dim, n);
    let mut x = [0.0; 3];
    for a in 0..dim {
        x[a] = m[a] as f64 / n as f64;
    }
    x
}

/// Signed frequency of DFT index i, in [−N/2, N/2).
pub(crate) fn frequency(i: usize, n: usize) -> f64 {
    if i < n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// |ξ| for every lattice frequency, in DFT order.
pub(crate) fn frequency_radii(dim: usize, n: usize) -> Vec<f64> {
    (0..n.pow(dim as u32))
        .map(|i| {
            let m = multi_index(i, dim, n);
            (0..dim).map(|a| frequency(m[a], n).powi(2)).sum::<f64>().sqrt()
        })
        .collect()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
}

/// In-place unnormalized DFT along every axis.
pub(crate) fn fft_nd(buf: &mut [Complex64], dim: usize, n: usize, direction: FftDirection) {
    let fft = plan(n, direction);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let blocks = n.pow(axis as u32);
        for b in 0..blocks {
            for off in 0..stride {
                let start = b * n * stride + off;
                if stride == 1 {
                    fft.process_with_scratch(&mut buf[start..start + n], &mut scratch);
                    continue;
                }
                for (j, v) in line.iter_mut().enumerate() {
                    *v = buf[start + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    buf[start + j * stride] = *v;
                }
            }
        }
    }
}

/// Radial dyadic multipliers m₁(ξ) = χ(|ξ|), m_λ(ξ) = χ(|ξ|/λ) − χ(2|ξ|/λ)
/// for λ = 2, 4, …, and a cap 1 − χ(2|ξ|/λ) on the top band λ = N/2, so the
/// bands sum to one on the whole lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicMultiplier {
    n: usize,
}

impl DyadicMultiplier {
    pub fn new(n: usize) -> Result<Self, BesovError> {
        if n < 16 || !n.is_power_of_two() {
            return Err(BesovError::GridSize(n));
        }
        Ok(Self { n })
    }

    pub fn top(&self) -> usize {
        self.n / 2
    }

    /// 1, 2, 4, …, N/2
    pub fn bands(&self) -> Vec<usize> {
        std::iter::successors(Some(1usize), |l| Some(l * 2))
            .take_while(|&l| l <= self.top())
            .collect()
    }

    pub fn check_band(&self, lambda: usize) -> Result<(), BesovError> {
        if !lambda.is_power_of_two() || lambda > self.top() {
            return Err(BesovError::Band {
                lambda,
                max: self.top(),
            });
        }
        Ok(())
    }

    /// m_λ at frequency magnitude `xi`; λ must be a valid band.
    pub fn weight(&self, lambda: usize, xi: f64) -> f64 {
        let l = lambda as f64;
        if lambda == 1 {
            chi(xi)
        } else if lambda == self.top() {
            1.0 - chi(2.0 * xi / l)
        } else {
            chi(xi / l) - chi(2.0 * xi / l)
        }
    }
}

/// Band decomposition of one function; the spectrum is computed once.
#[derive(Debug, Clone)]
pub struct LittlewoodPaley {
    dim: usize,
    n: usize,
    spectrum: Vec<Complex64>,
    radii: Vec<f64>,
    multiplier: DyadicMultiplier,
}

impl LittlewoodPaley {
    pub fn new(f: &GridFunction) -> Self {
        Self {
            dim: f.dim,
            n: f.n,
            spectrum: f.spectrum(),
            radii: frequency_radii(f.dim, f.n),
            multiplier: DyadicMultiplier { n: f.n },
        }
    }

    pub fn bands(&self) -> Vec<usize> {
        self.multiplier.bands()
    }

    /// P_λ f
    pub fn band(&self, lambda: usize) -> Result<GridFunction, BesovError> {
        self.multiplier.check_band(lambda)?;
        let spec = self
            .spectrum
            .iter()
            .zip(&self.radii)
            .map(|(c, &r)| c * self.multiplier.weight(lambda, r))
            .collect();
        GridFunction::from_spectrum(self.dim, self.n, spec)
    }

    /// ‖P_λ f‖_p for every band.
    pub fn band_norms(&self, p: f64) -> Result<Vec<(usize, f64)>, BesovError> {
        self.bands()
            .into_iter()
            .map(|l| Ok((l, self.band(l)?.lp_norm(p))))
            .collect()
    }
}

/// P_λ f for dyadic λ ≤ N/2.
pub fn lp_project(f: &GridFunction, lambda: usize) -> Result<GridFunction, BesovError> {
    DyadicMultiplier::new(f.n)?.check_band(lambda)?;
    LittlewoodPaley::new(f).band(lambda)
}

/// (‖P₁f‖_p^p + Σ_{λ≥2} λ^{sp}‖P_λf‖_p^p)^{1/p} over the bands the grid
/// carries.
pub fn besov_norm(f: &GridFunction, s: f64, p: f64) -> Result<f64, BesovError> {
    if !(s > 0.0 && s < 2.0) {
        return Err(BesovError::Parameter(format!("smoothness {s} outside (0, 2)")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(BesovError::Parameter(format!("exponent {p} outside [1, ∞)")));
    }
    let sum: f64 = LittlewoodPaley::new(f)
        .band_norms(p)?
        .into_iter()
        .map(|(l, norm)| (l as f64).powf(s * p) * norm.powf(p))
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// Trigonometric interpolant of a grid function; exact at grid points and
/// for band-limited data.
#[derive(Debug, Clone)]
pub struct Interpolant {
    dim: usize,
    n: usize,
    coeffs: Vec<Complex64>,
}

impl Interpolant {
    pub fn new(f: &GridFunction) -> Self {
        let scale = 1.0 / f.len() as f64;
        Self {
            dim: f.dim,
            n: f.n,
            coeffs: f.spectrum().into_iter().map(|c| c * scale).collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let phases: Vec<Vec<Complex64>> = (0..self.dim)
            .map(|a| {
                (0..n)
                    .map(|i| Complex64::from_polar(1.0, std::f64::consts::TAU * frequency(i, n) * x[a]))
                    .collect()
            })
            .collect();
        // contract the last axis first, then fold outward
        let mut acc = self.coeffs.clone();
        for a in (0..self.dim).rev() {
            acc = acc
                .chunks(n)
                .map(|row| row.iter().zip(&phases[a]).map(|(c, p)| c * p).sum())
                .collect();
        }
        acc[0].re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_round_trip_in_three_dimensions() {
        let f = GridFunction::from_fn(3, 16, |x| (x[0] * 7.0).sin() + x[1] * x[2]).unwrap();
        let g = GridFunction::from_spectrum(3, 16, f.spectrum()).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolant_reproduces_samples_and_modes() {
        let f = GridFunction::from_fn(2, 16, |x| {
            (std::f64::consts::TAU * (3.0 * x[0] - 2.0 * x[1])).cos()
        })
        .unwrap();
        let it = Interpolant::new(&f);
        let p = f.point(37);
        assert!((it.eval(&p[..2]) - f.values()[37]).abs() < 1e-13);
        let y = [0.123, 0.771];
        let exact = (std::f64::consts::TAU * (3.0 * y[0] - 2.0 * y[1])).cos();
        assert!((it.eval(&y) - exact).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        assert!(GridFunction::new(2, 12, vec![0.0; 144]).is_err());
        assert!(GridFunction::new(4, 16, vec![0.0; 65536]).is_err());
        assert!(GridFunction::new(1, 16, vec![0.0; 15]).is_err());
        assert!(GridFunction::new(1, 16, vec![f64::NAN; 16]).is_err());
    }

    #[test]
    fn bands_and_cap() {
        let m = DyadicMultiplier::new(64).unwrap();
        assert_eq!(m.bands(), vec![1, 2, 4, 8, 16, 32]);
        assert!(m.check_band(64).is_err());
        assert!(m.check_band(3).is_err());
        assert_eq!(m.weight(32, 100.0), 1.0);
    }
}
