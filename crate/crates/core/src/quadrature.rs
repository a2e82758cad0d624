//! One-dimensional quadrature: adaptive Gauss-Kronrod (7/15) and fixed
//! Gauss-Legendre rules.

use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("adaptive quadrature did not converge: estimate {estimate:e}, error bound {error:e} after {intervals} intervals")]
pub struct QuadratureError {
    pub estimate: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Single 15-point Kronrod panel with the embedded 7-point Gauss estimate.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Integral {
    let c = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Integral {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    est: Integral,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-10,
            max_intervals: 4000,
        }
    }
}

/// Globally adaptive Gauss-Kronrod integration over `[a, b]`, starting from the
/// panels delimited by `breaks` (which must lie in `[a, b]`; order is irrelevant).
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Integral, QuadratureError> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| *x > lo && *x < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    for w in pts.windows(2) {
        let est = gk15(&mut f, w[0], w[1]);
        total += est.value;
        err += est.error;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            est,
        });
    }
    while err > tol.abs.max(tol.rel * total.abs()) {
        if heap.len() >= tol.max_intervals {
            return Err(QuadratureError {
                estimate: sign * total,
                error: err,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision; accept what we have
            heap.push(worst);
            break;
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        total += left.value + right.value - worst.est.value;
        err += left.error + right.error - worst.est.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            est: left,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            est: right,
        });
    }
    // re-sum in a fixed order so the result does not depend on heap layout
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value: f64 = panels.iter().map(|p| p.est.value).sum();
    let error: f64 = panels.iter().map(|p| p.est.error).sum();
    Ok(Integral {
        value: sign * value,
        error,
    })
}

pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Integral, QuadratureError> {
    integrate_with_breaks(f, a, b, &[], tol)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_integrates_polynomials_exactly() {
        let r = gk15(&mut |x: f64| x.powi(10) - 3.0 * x * x, 0.0, 2.0);
        let exact = 2f64.powi(11) / 11.0 - 8.0;
        assert!((r.value - exact).abs() < 1e-11);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        // ∫ dx/(x²+h²)² over ℝ = π/(2h³)
        let h = 1e-3;
        let r = integrate_with_breaks(
            |x| 1.0 / (x * x + h * h).powi(2),
            -1e3,
            1e3,
            &[0.0],
            Tolerance {
                rel: 1e-10,
                ..Default::default()
            },
        )
        .unwrap();
        let exact = std::f64::consts::FRAC_PI_2 / h.powi(3);
        // tail beyond ±1e3 is ~ 2/(3·1e9)
        assert!(((r.value - exact) / exact).abs() < 1e-9);
    }

    #[test]
    fn reports_non_convergence() {
        let err = integrate(
            |x: f64| if x > 0.0 { 1.0 / x } else { 0.0 },
            -1.0,
            1.0,
            Tolerance {
                abs: 1e-14,
                rel: 1e-14,
                max_intervals: 20,
            },
        )
        .unwrap_err();
        assert_eq!(err.intervals, 20);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a = integrate(|x: f64| x.exp(), 0.0, 1.0, Tolerance::default()).unwrap();
        let b = integrate(|x: f64| x.exp(), 1.0, 0.0, Tolerance::default()).unwrap();
        assert_eq!(a.value, -b.value);
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [1, 2, 5, 16, 40] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
            if n >= 2 {
                assert!((m - 2.0 / 3.0).abs() < 1e-13);
            }
        }
    }
}
