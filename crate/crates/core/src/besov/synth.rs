use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use super::{frequency_radii, BesovError, GridFunction};

/// Shell 0.9λ ≤ |ξ| ≤ 1.1λ sits where m_λ ≈ 1, so each term lands almost
/// entirely in its own band.
const SHELL: (f64, f64) = (0.9, 1.1);

/// Random lacunary series Σ_λ λ^{−s} g_λ over λ = 2, 4, …, N/4, where g_λ
/// has Gaussian Fourier coefficients on a thin shell around |ξ| = λ and
/// ‖g_λ‖_p = 1. Band norms then behave like λ^{−s}.
pub fn synth_besov(s: f64, p: f64, seed: u64, n: usize, dim: usize) -> Result<GridFunction, BesovError> {
    if !(s > 0.0 && s < 1.5) {
        return Err(BesovError::Parameter(format!("smoothness {s} outside (0, 1.5)")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(BesovError::Parameter(format!("exponent {p} outside [1, ∞)")));
    }
    let mut total = GridFunction::new(dim, n, vec![0.0; n.pow(dim as u32)])?.values;
    let radii = frequency_radii(dim, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lambda = 2;
    while lambda <= n / 4 {
        let l = lambda as f64;
        let spectrum: Vec<Complex64> = radii
            .iter()
            .map(|&r| {
                if r >= SHELL.0 * l && r <= SHELL.1 * l {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let g = GridFunction::from_spectrum(dim, n, spectrum)?;
        let norm = g.lp_norm(p);
        if norm > 0.0 {
            let w = l.powf(-s) / norm;
            for (t, v) in total.iter_mut().zip(g.values()) {
                *t += w * v;
            }
        }
        lambda *= 2;
    }
    GridFunction::new(dim, n, total)
}
