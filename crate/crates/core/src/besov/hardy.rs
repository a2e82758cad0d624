use std::f64::consts::TAU;

use super::{frequency, multi_index, BesovError, GridFunction};
use crate::quadrature::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyReport {
    /// ∫ f²/|x − x₀|²
    pub weighted: f64,
    pub gradient_squared: f64,
    /// ‖f‖²_{H¹} = ∫ f² + |∇f|²
    pub h1_squared: f64,
    pub ratio: f64,
}

/// ∫_{[−1,1]³} |u|^{−2} du = 6∫_{−1}^{1} 2 atan(1/c)/c da, c = √(1+a²).
pub fn cell_weight_constant() -> f64 {
    let (x, w) = gauss_legendre(32);
    let k: f64 = x
        .iter()
        .zip(&w)
        .map(|(a, w)| {
            let c = (1.0 + a * a).sqrt();
            w * 2.0 * (1.0 / c).atan() / c
        })
        .sum();
    6.0 * k
}

/// Cells within this many steps of the centre use cell-averaged weights.
const NEAR: i64 = 4;

/// Mean of |u|^{−2} over the unit cube centred at integer offset m
/// (m ≠ 0), by tensor Gauss-Legendre.
fn near_cell_average(m: [i64; 3]) -> f64 {
    let (x, w) = gauss_legendre(8);
    let mut sum = 0.0;
    for (a, wa) in x.iter().zip(&w) {
        for (b, wb) in x.iter().zip(&w) {
            for (c, wc) in x.iter().zip(&w) {
                let u = [
                    m[0] as f64 + 0.5 * a,
                    m[1] as f64 + 0.5 * b,
                    m[2] as f64 + 0.5 * c,
                ];
                sum += wa * wb * wc / (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
            }
        }
    }
    sum / 8.0
}

/// Hardy ratio about the box centre for n = 3. f² is frozen per cell and
/// multiplied by the cell integral of |x − x₀|^{−2}: by quadrature near the
/// centre, by its two-term expansion elsewhere. Derivatives are spectral.
pub fn hardy_check(f: &GridFunction) -> Result<HardyReport, BesovError> {
    if f.dim() != 3 {
        return Err(BesovError::Dimension(f.dim()));
    }
    let n = f.size();
    let nf = n as f64;
    let cell = nf.powi(-3);
    let centre = (n / 2) as i64;
    let side = (2 * NEAR + 1) as usize;
    // averages in cell units; |x|^{-2} = N²|u|^{-2}
    let near: Vec<f64> = (0..side.pow(3))
        .map(|i| {
            let m = multi_index(i, 3, side).map(|c| c as i64 - NEAR);
            if m == [0, 0, 0] {
                0.5 * cell_weight_constant()
            } else {
                near_cell_average(m)
            }
        })
        .collect();
    let mut weighted = 0.0;
    for (i, v) in f.values().iter().enumerate() {
        let m = multi_index(i, 3, n).map(|c| c as i64 - centre);
        if m.iter().all(|c| c.abs() <= NEAR) {
            let k = m.iter().fold(0usize, |acc, c| acc * side + (c + NEAR) as usize);
            weighted += v * v * cell * nf * nf * near[k];
            continue;
        }
        // cube mean of |u|^{-2} ≈ 1/|m|² + Δ(|u|^{-2})/24
        let r2: f64 = m.iter().map(|&c| (c as f64).powi(2)).sum();
        weighted += v * v * cell * nf * nf * (1.0 / r2 + 1.0 / (12.0 * r2 * r2));
    }
    let scale = nf.powi(-3);
    let (mut l2, mut grad) = (0.0, 0.0);
    for (i, c) in f.spectrum().iter().enumerate() {
        let m = multi_index(i, 3, n);
        let k2: f64 = m.iter().map(|&a| frequency(a, n).powi(2)).sum();
        let e = (c * scale).norm_sqr();
        l2 += e;
        grad += TAU * TAU * k2 * e;
    }
    let h1 = l2 + grad;
    Ok(HardyReport {
        weighted,
        gradient_squared: grad,
        h1_squared: h1,
        ratio: if h1 > 0.0 { weighted / h1 } else { 0.0 },
    })
}

/// (1 − t²)^m for t = |x − c|/w < 1, zero outside.
pub fn bump(n: usize, centre: [f64; 3], width: f64, power: i32) -> Result<GridFunction, BesovError> {
    GridFunction::from_fn(3, n, |x| {
        let t2 = (0..3).map(|a| (x[a] - centre[a]).powi(2)).sum::<f64>() / (width * width);
        if t2 < 1.0 {
            (1.0 - t2).powi(power)
        } else {
            0.0
        }
    })
}

/// Radial shell (1 − ((r − radius)/width)²)^4 about the box centre.
pub fn shell(n: usize, radius: f64, width: f64) -> Result<GridFunction, BesovError> {
    GridFunction::from_fn(3, n, |x| {
        let r = (0..3).map(|a| (x[a] - 0.5).powi(2)).sum::<f64>().sqrt();
        let t = (r - radius) / width;
        if t.abs() < 1.0 {
            (1.0 - t * t).powi(4)
        } else {
            0.0
        }
    })
}
