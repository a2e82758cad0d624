use std::f64::consts::{PI, TAU};

use calderon_core::besov::{
    besov_norm, boundary_rate, boundary_rates, bump, cell_weight_constant, hardy_check, lp_project,
    shell, squared_rate, squared_rates, synth_besov, trace_battery, trace_check, Curve, DyadicMultiplier,
    GridFunction, LittlewoodPaley,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent copy of the cutoff: 1 − smoothstep₇(t − 1) clamped.
fn chi_oracle(t: f64) -> f64 {
    let x = (t - 1.0).clamp(0.0, 1.0);
    1.0 - (35.0 * x.powi(4) - 84.0 * x.powi(5) + 70.0 * x.powi(6) - 20.0 * x.powi(7))
}

fn noise(dim: usize, n: usize, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..n.pow(dim as u32)).map(|_| rng.random_range(-1.0..1.0)).collect();
    GridFunction::new(dim, n, v).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn reconstruct(f: &GridFunction) -> Vec<f64> {
    let lp = LittlewoodPaley::new(f);
    let mut sum = vec![0.0; f.len()];
    for l in lp.bands() {
        for (s, v) in sum.iter_mut().zip(lp.band(l).unwrap().values()) {
            *s += v;
        }
    }
    sum
}

fn cosine(n: usize, k: f64) -> GridFunction {
    GridFunction::from_fn(2, n, |x| (TAU * k * x[0]).cos()).unwrap()
}

#[test]
fn partition_of_unity_on_the_lattice() {
    for (dim, n) in [(1, 64), (2, 64), (3, 16)] {
        let m = DyadicMultiplier::new(n).unwrap();
        let half = n as i64 / 2;
        let count = n.pow(dim as u32);
        for i in 0..count {
            let mut r2 = 0.0;
            let mut rest = i;
            for _ in 0..dim {
                let k = (rest % n) as i64;
                rest /= n;
                let k = if k < half { k } else { k - n as i64 };
                r2 += (k * k) as f64;
            }
            let total: f64 = m.bands().iter().map(|&l| m.weight(l, r2.sqrt())).sum();
            assert!((total - 1.0).abs() <= 1e-12, "dim {dim} index {i}: {total}");
        }
    }
}

#[test]
fn single_frequency_lives_in_two_bands() {
    let f = cosine(256, 20.0);
    for l in DyadicMultiplier::new(256).unwrap().bands() {
        let band = lp_project(&f, l).unwrap();
        if l != 16 && l != 32 {
            assert!(band.max_abs() <= 1e-10, "band {l}: {}", band.max_abs());
        }
    }
    assert!(max_diff(&reconstruct(&f), f.values()) <= 1e-10);
    assert!(lp_project(&f, 256).is_err());
}

#[test]
fn constants_sit_in_the_lowest_band() {
    let f = GridFunction::from_fn(2, 32, |_| 2.5).unwrap();
    assert!(max_diff(lp_project(&f, 1).unwrap().values(), f.values()) <= 1e-12);
    for l in [2, 4, 8, 16] {
        assert!(lp_project(&f, l).unwrap().max_abs() <= 1e-12);
    }
    for s in [0.3, 1.0, 1.7] {
        assert!((besov_norm(&f, s, 2.0).unwrap() - 2.5).abs() <= 1e-12);
    }
}

#[test]
fn random_functions_are_reconstructed() {
    for (dim, n, seed) in [(1, 128, 1), (2, 64, 2), (3, 16, 3)] {
        let f = noise(dim, n, seed);
        assert!(max_diff(&reconstruct(&f), f.values()) <= 1e-10);
    }
}

#[test]
fn separated_bands_are_orthogonal_projections() {
    let f = noise(2, 64, 4);
    for (l, m) in [(1, 4), (2, 8), (4, 16), (8, 32), (2, 32)] {
        let pl = lp_project(&f, l).unwrap();
        let plm = lp_project(&pl, m).unwrap();
        assert!(plm.max_abs() <= 1e-10, "P{m}P{l}: {}", plm.max_abs());
    }
}

#[test]
fn besov_norm_of_a_wave_matches_band_sum() {
    // ‖P_λ cos(2π·20x₁)‖₂ = m_λ(20)/√2 exactly
    let f = cosine(256, 20.0);
    let m = |l: f64| chi_oracle(20.0 / l) - chi_oracle(40.0 / l);
    for s in [0.5, 1.0] {
        let expected: f64 = [16.0f64, 32.0]
            .iter()
            .map(|&l| l.powf(2.0 * s) * m(l).powi(2) / 2.0)
            .sum::<f64>()
            .sqrt();
        let got = besov_norm(&f, s, 2.0).unwrap();
        assert!((got / expected - 1.0).abs() <= 1e-10, "s={s}: {got} vs {expected}");
    }
    // the dominant band's contribution grows by λ^{0.5} from s = 0.5 to 1
    let dominant = |s: f64| {
        let lp = LittlewoodPaley::new(&f);
        let (l, norm) = lp
            .band_norms(2.0)
            .unwrap()
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        (l, (l as f64).powf(s) * norm)
    };
    let (l, a) = dominant(0.5);
    let (_, b) = dominant(1.0);
    assert!((b / a - (l as f64).sqrt()).abs() <= 1e-10);
    assert!((16..=32).contains(&l));
}

#[test]
fn besov_norm_rejects_bad_parameters() {
    let f = cosine(32, 3.0);
    assert!(besov_norm(&f, 0.0, 2.0).is_err());
    assert!(besov_norm(&f, 2.0, 2.0).is_err());
    assert!(besov_norm(&f, 1.0, 0.5).is_err());
}

fn band_slope(f: &GridFunction, p: f64) -> (f64, Vec<(usize, f64)>) {
    let n = f.size();
    let norms: Vec<(usize, f64)> = LittlewoodPaley::new(f)
        .band_norms(p)
        .unwrap()
        .into_iter()
        .filter(|(l, _)| *l >= 4 && *l <= n / 4)
        .collect();
    let pts: Vec<(f64, f64)> = norms.iter().map(|(l, v)| ((*l as f64).ln(), v.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxy / sxx, norms)
}

#[test]
fn synthetic_band_norms_follow_the_smoothness() {
    for (s, p) in [(1.0, 2.0), (0.6, 2.0), (1.0, 4.0)] {
        let f = synth_besov(s, p, 7, 256, 2).unwrap();
        let (slope, norms) = band_slope(&f, p);
        assert!((slope + s).abs() <= 0.15, "s={s}: slope {slope}");
        for (l, v) in norms {
            let scaled = (l as f64).powf(s) * v;
            assert!((0.5..=2.0).contains(&scaled), "λ={l}: {scaled}");
        }
    }
}

#[test]
fn synthesis_is_deterministic_per_seed() {
    let a = synth_besov(0.8, 3.0, 42, 64, 2).unwrap();
    let b = synth_besov(0.8, 3.0, 42, 64, 2).unwrap();
    let c = synth_besov(0.8, 3.0, 43, 64, 2).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(synth_besov(1.5, 2.0, 1, 64, 2).is_err());
}

fn power_cusp(n: usize, beta: f64, y: [f64; 2]) -> GridFunction {
    GridFunction::from_fn(2, n, |x| ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).powf(beta / 2.0)).unwrap()
}

#[test]
fn cusp_rates_match_their_exponent() {
    let line = Curve::line(0.5);
    let y = [0.5, 0.5];
    for beta in [0.25, 0.5, 0.75, 1.0] {
        let f = power_cusp(512, beta, y);
        let r = boundary_rate(&f, &line, &y, 2.0).unwrap();
        assert!((r.exponent - beta).abs() <= 0.1, "β={beta}: {}", r.exponent);
        assert_eq!(r.abscissae.len(), r.values.len());
    }
    let f = power_cusp(512, 0.5, y);
    let r = squared_rate(&f, &line, &y).unwrap();
    assert!((r.exponent - 1.0).abs() <= 0.15, "{}", r.exponent);
}

#[test]
fn constants_report_an_infinite_rate() {
    let f = GridFunction::from_fn(2, 128, |_| 3.0).unwrap();
    let line = Curve::line(0.5);
    let r = boundary_rate(&f, &line, &[0.5, 0.5], 2.0).unwrap();
    assert_eq!(r.exponent, f64::INFINITY);
    assert!(r.values.iter().all(|v| *v == 0.0));
    assert_eq!(squared_rate(&f, &line, &[0.5, 0.5]).unwrap().exponent, f64::INFINITY);
}

#[test]
fn rate_needs_enough_radii_and_a_boundary_point() {
    let f = power_cusp(64, 0.5, [0.5, 0.5]);
    let line = Curve::line(0.5);
    assert!(boundary_rate(&f, &line, &[0.5, 0.5], 2.0).is_err());
    let g = power_cusp(512, 0.5, [0.5, 0.5]);
    assert!(boundary_rate(&g, &line, &[0.5, 0.6], 2.0).is_err());
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

fn random_points(curve: &Curve, n: usize, count: usize, seed: u64, snap: bool) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut t: f64 = rng.random_range(0.3..0.7);
            if snap {
                t = (t * n as f64).round() / n as f64;
            }
            curve.point(2, t, 0.5)
        })
        .collect()
}

#[test]
fn rough_functions_meet_the_rate_floor() {
    let f = synth_besov(1.0, 4.0, 2024, 512, 2).unwrap();
    let floor = 1.0 - 0.25 - 0.15;
    for (curve, snap) in [(Curve::line(0.5), true), (Curve::smoothed_triangle(0.5, 0.2, 3), false)] {
        let pts = random_points(&curve, 512, 50, 5, snap);
        let slopes: Vec<f64> = boundary_rates(&f, &curve, &pts, 2.0)
            .unwrap()
            .iter()
            .map(|r| r.exponent)
            .collect();
        assert!(median(slopes.clone()) >= floor, "{curve:?}: {slopes:?}");
        let sq: Vec<f64> = squared_rates(&f, &curve, &pts)
            .unwrap()
            .iter()
            .map(|r| r.exponent)
            .collect();
        assert!(median(sq.clone()) >= floor, "{curve:?}: {sq:?}");
    }
}

#[test]
fn smoothed_triangle_has_the_requested_slope_bound() {
    let c = Curve::smoothed_triangle(0.5, 0.2, 3);
    let max = (0..100_000)
        .map(|i| c.slope(i as f64 / 100_000.0).abs())
        .fold(0.0, f64::max);
    assert!((max - 0.2).abs() <= 1e-6, "{max}");
    let h = 1e-6;
    for t in [0.1, 0.37, 0.8] {
        let fd = (c.height(t + h) - c.height(t - h)) / (2.0 * h);
        assert!((fd - c.slope(t)).abs() <= 1e-7);
    }
    assert!((c.height(0.0) - c.height(1.0)).abs() <= 1e-12);
}

#[test]
fn trace_ratio_of_a_constant_is_finite() {
    let f = GridFunction::from_fn(2, 64, |_| 2.0).unwrap();
    let r = trace_check(&f, &Curve::smoothed_triangle(0.5, 0.2, 2), &[1], 2.0, 2.0).unwrap();
    // ‖2‖_{L²(Γ)} = 2·√(arclength) with arclength in [1, √1.04]
    assert!(r.max >= 1.0 - 1e-9 && r.max <= 1.04f64.sqrt().sqrt() + 1e-9, "{}", r.max);
    assert!(trace_check(&f, &Curve::line(0.5), &[1], 2.0, 3.0).is_err());
}

#[test]
fn single_wave_ratio_decays_like_inverse_root() {
    // P_λ cos(2πλx₁) = cos(2πλx₁) and its trace on a horizontal line has
    // the same L² norm, so the ratio is λ^{−1/2}
    let line = Curve::line(0.5);
    for l in [8usize, 32, 128] {
        let f = cosine(512, l as f64);
        let r = trace_check(&f, &line, &[l], 2.0, 2.0).unwrap();
        assert!((r.ratios[0] * (l as f64).sqrt() - 1.0).abs() <= 1e-10, "{l}: {}", r.ratios[0]);
    }
}

#[test]
fn trace_constant_is_uniform_in_lambda() {
    let lambdas = [4, 8, 16, 32, 64, 128];
    let curve = Curve::smoothed_triangle(0.5, 0.2, 2);
    let battery: Vec<GridFunction> = (0..50)
        .map(|i| synth_besov(if i % 2 == 0 { 0.5 } else { 1.0 }, 2.0, 100 + i, 512, 2).unwrap())
        .collect();
    let r = trace_battery(&battery, &curve, &lambdas, 2.0, 2.0).unwrap();
    assert!(r.ratios[5] <= 2.0 * r.ratios[1], "{:?}", r.ratios);
}

#[test]
fn concentrated_layers_saturate_the_trace_bound() {
    // cos(2πλx₁) times a layer of thickness 1/λ around the line: the ratio
    // stays of order one at every scale
    let line = Curve::line(0.5);
    let ratio = |l: usize| {
        let lf = l as f64;
        let f = GridFunction::from_fn(2, 512, |x| {
            (TAU * lf * x[0]).cos() * (-PI * (lf * (x[1] - 0.5)).powi(2)).exp()
        })
        .unwrap();
        trace_check(&f, &line, &[l / 2, l, 2 * l], 2.0, 2.0).unwrap().max
    };
    let (a, b) = (ratio(8), ratio(64));
    assert!(b >= 0.5 * a && b <= 2.0 * a, "{a} {b}");
}

#[test]
fn cell_weight_matches_spherical_integration() {
    // ∫_{[−1,1]³}|u|^{−2} = ∫_{S²} ρ(ω) dω with ρ = 1/max|ω_i|
    let m = 2000;
    let mut total = 0.0;
    for i in 0..m {
        let th = PI * (i as f64 + 0.5) / m as f64;
        for j in 0..2 * m {
            let ph = PI * (j as f64 + 0.5) / m as f64;
            let w = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
            let rho = 1.0 / w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            total += rho * th.sin() * (PI / m as f64).powi(2);
        }
    }
    assert!((cell_weight_constant() / total - 1.0).abs() <= 1e-5, "{} {total}", cell_weight_constant());
}

/// Radial integrals for (1 − (r/w)²)^m: ∫f²/r², ∫|∇f|², ∫f², all /4π.
fn bump_oracle(w: f64, m: i32) -> (f64, f64, f64) {
    let k = 200_000;
    let (mut a, mut g, mut l) = (0.0, 0.0, 0.0);
    for i in 0..k {
        let r = w * (i as f64 + 0.5) / k as f64;
        let t = 1.0 - (r / w).powi(2);
        let f = t.powi(m);
        let df = m as f64 * t.powi(m - 1) * (-2.0 * r / (w * w));
        let dr = w / k as f64;
        a += f * f * dr;
        g += df * df * r * r * dr;
        l += f * f * r * r * dr;
    }
    (a, g, l)
}

#[test]
fn hardy_ratio_of_centred_bumps() {
    // grid quadrature is second order in (cell / width)
    let rel_err = |n: usize, w: f64| {
        let rep = hardy_check(&bump(n, [0.5; 3], w, 4).unwrap()).unwrap();
        let (a, g, l) = bump_oracle(w, 4);
        (rep.ratio, (rep.ratio / (a / (g + l)) - 1.0).abs())
    };
    for w in [0.25, 0.125] {
        let (ratio, err) = rel_err(64, w);
        let h = 1.0 / 64.0;
        assert!(err <= 2.0 * (h / w).powi(2), "w={w}: error {err}");
        assert!(ratio <= 4.0);
    }
    let (_, coarse) = rel_err(64, 0.125);
    let (_, fine) = rel_err(128, 0.125);
    assert!(coarse / fine >= 3.0, "{coarse} {fine}");
}

#[test]
fn hardy_ratio_away_from_the_centre() {
    let (radius, width) = (0.25, 0.08);
    let f = shell(64, radius, width).unwrap();
    let rep = hardy_check(&f).unwrap();
    let d = radius - width;
    let l2 = f.values().iter().map(|v| v * v).sum::<f64>() / f.len() as f64;
    assert!(rep.ratio <= d.powi(-2) * l2 / rep.h1_squared, "{}", rep.ratio);
    assert!(rep.ratio <= d.powi(-2));
}

#[test]
fn hardy_battery_stays_below_the_sharp_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let c = [
            0.5 + rng.random_range(-0.1..0.1),
            0.5 + rng.random_range(-0.1..0.1),
            0.5 + rng.random_range(-0.1..0.1),
        ];
        let w = rng.random_range(0.1..0.3);
        let m = rng.random_range(2..7);
        worst = worst.max(hardy_check(&bump(64, c, w, m).unwrap()).unwrap().ratio);
    }
    assert!(worst <= 4.5, "{worst}");
    assert!(hardy_check(&cosine(32, 1.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norm_is_homogeneous_and_monotone(seed in 0u64..1000, c in 0.1f64..10.0, s1 in 0.05f64..1.9, ds in 0.0f64..0.09, p in 1.0f64..5.0) {
        let f = noise(2, 32, seed);
        let g = f.map(|v| c * v).unwrap();
        let a = besov_norm(&f, s1, p).unwrap();
        prop_assert!((besov_norm(&g, s1, p).unwrap() / (c * a) - 1.0).abs() <= 1e-10);
        prop_assert!(a <= besov_norm(&f, s1 + ds, p).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn projections_reassemble(seed in 0u64..1000) {
        let f = noise(2, 32, seed);
        prop_assert!(max_diff(&reconstruct(&f), f.values()) <= 1e-10);
    }
}
