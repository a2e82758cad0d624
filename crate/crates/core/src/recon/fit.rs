//! Least-squares extrapolation of h → 0 limits.

use super::ReconError;

/// Exponents tried when β is scanned.
pub const BETA_GRID: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Extrapolation models. `inverse` adds an e/h column, which absorbs a
/// constant relative bias in data that was divided by h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitModel {
    LastValue,
    /// value ≈ L + a·h^β
    Power {
        /// `None` scans [`BETA_GRID`]
        beta: Option<f64>,
        inverse: bool,
    },
    /// value ≈ L + a·h + b·h·log h
    LogLinear { inverse: bool },
}

impl FitModel {
    pub fn affine() -> Self {
        FitModel::Power {
            beta: Some(1.0),
            inverse: false,
        }
    }

    pub fn scanned() -> Self {
        FitModel::Power {
            beta: None,
            inverse: false,
        }
    }

    /// The same model with the e/h column added.
    pub fn with_inverse(self) -> Self {
        match self {
            FitModel::LastValue => FitModel::LastValue,
            FitModel::Power { beta, .. } => FitModel::Power { beta, inverse: true },
            FitModel::LogLinear { .. } => FitModel::LogLinear { inverse: true },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub limit: f64,
    /// NaN for last-value fits
    pub exponent: f64,
    pub residual: f64,
    /// set when the normal equations were singular and the last value was used
    pub fallback: bool,
}

/// Fits `points = [(h, value)]` with the given model.
pub fn fit_limit(points: &[(f64, f64)], model: FitModel) -> Result<Fit, ReconError> {
    if points.is_empty() {
        return Err(ReconError::TooFewPoints { got: 0, needed: 1 });
    }
    let last = points
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|p| p.1)
        .expect("non-empty");
    let (betas, log, inverse) = match model {
        FitModel::LastValue => {
            return Ok(Fit {
                limit: last,
                exponent: f64::NAN,
                residual: 0.0,
                fallback: false,
            })
        }
        FitModel::Power { beta, inverse } => (
            match beta {
                Some(b) => vec![b],
                None => BETA_GRID.to_vec(),
            },
            false,
            inverse,
        ),
        FitModel::LogLinear { inverse } => (vec![1.0], true, inverse),
    };
    let needed = 2 + usize::from(log) + usize::from(inverse) + 1;
    if points.len() < needed {
        return Err(ReconError::TooFewPoints {
            got: points.len(),
            needed,
        });
    }
    if points.iter().any(|p| !(p.0 > 0.0)) {
        return Err(ReconError::Schedule("fit abscissae must be positive".into()));
    }
    let mut best: Option<Fit> = None;
    for b in betas {
        let columns = |h: f64| {
            let mut c = vec![1.0, h.powf(b)];
            if log {
                c.push(h * h.ln());
            }
            if inverse {
                c.push(1.0 / h);
            }
            c
        };
        let a: Vec<Vec<f64>> = points.iter().map(|p| columns(p.0)).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        if let Some((coef, res)) = least_squares(&a, &y) {
            let cand = Fit {
                limit: coef[0],
                exponent: b,
                residual: res,
                fallback: false,
            };
            if best.as_ref().is_none_or(|f| cand.residual < f.residual) {
                best = Some(cand);
            }
        }
    }
    Ok(best.unwrap_or(Fit {
        limit: last,
        exponent: f64::NAN,
        residual: f64::NAN,
        fallback: true,
    }))
}

/// Householder QR least squares with column scaling. Returns `None` when the
/// design matrix is numerically rank deficient.
pub(crate) fn least_squares(a: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let m = a.len();
    let n = a.first()?.len();
    if m < n {
        return None;
    }
    let scale: Vec<f64> = (0..n)
        .map(|j| a.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt())
        .collect();
    if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return None;
    }
    let mut r: Vec<Vec<f64>> = a
        .iter()
        .map(|row| row.iter().zip(&scale).map(|(v, s)| v / s).collect())
        .collect();
    let mut b = y.to_vec();
    for k in 0..n {
        let norm = (k..m).map(|i| r[i][k] * r[i][k]).sum::<f64>().sqrt();
        if norm < 1e-10 {
            return None;
        }
        let alpha = if r[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[i][k]).collect();
        v[0] -= alpha;
        let vn2: f64 = v.iter().map(|x| x * x).sum();
        if vn2 == 0.0 {
            continue;
        }
        for j in k..n {
            let d: f64 = (k..m).map(|i| v[i - k] * r[i][j]).sum();
            for i in k..m {
                r[i][j] -= 2.0 * d / vn2 * v[i - k];
            }
        }
        let d: f64 = (k..m).map(|i| v[i - k] * b[i]).sum();
        for i in k..m {
            b[i] -= 2.0 * d / vn2 * v[i - k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| r[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / r[k][k];
    }
    let residual = b[n..].iter().map(|v| v * v).sum::<f64>().sqrt();
    Some((x.iter().zip(&scale).map(|(x, s)| x / s).collect(), residual))
}
