use std::f64::consts::PI;
use std::sync::Arc;

use calderon_core::fem::{BoundaryData, ConductivityField, Conductor, Preset};
use calderon_core::geometry::{build_domain, make_mesh, DomainSpec, Mesh, MeshOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BOX: [[f64; 2]; 2] = [[-1.0, -1.0], [1.0, 1.0]];

fn disk_mesh(size: f64) -> Arc<Mesh> {
    let d = build_domain(&DomainSpec::UnitDisk).unwrap();
    Arc::new(make_mesh(&d, &MeshOptions::uniform(size)).unwrap())
}

fn mode(mesh: &Mesh, k: f64, sine: bool) -> BoundaryData {
    BoundaryData::from_fn(mesh, |p, _| {
        let t = p[1].atan2(p[0]);
        if sine {
            (k * t).sin()
        } else {
            (k * t).cos()
        }
    })
    .unwrap()
}

/// Smooth random boundary data: a few low Fourier modes.
fn random_data(mesh: &Mesh, rng: &mut ChaCha8Rng) -> BoundaryData {
    let coeffs: Vec<(f64, f64)> = (0..6)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    BoundaryData::from_fn(mesh, |p, _| {
        let t = p[1].atan2(p[0]);
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| a * (k as f64 * t).cos() + b * (k as f64 * t).sin())
            .sum()
    })
    .unwrap()
}

#[test]
fn cosine_modes_give_k_pi() {
    let mesh = disk_mesh(0.02);
    let oracle = Conductor::new(ConductivityField::constant(1.0))
        .oracle(Arc::clone(&mesh))
        .unwrap();
    for k in [1.0, 3.0] {
        let q = oracle.quad(&mode(&mesh, k, false)).unwrap();
        assert!((q / (k * PI) - 1.0).abs() <= 0.02, "k={k}: {q}");
    }
    let two = Conductor::new(ConductivityField::constant(2.0))
        .oracle(Arc::clone(&mesh))
        .unwrap();
    let q = two.quad(&mode(&mesh, 1.0, false)).unwrap();
    assert!((q / (2.0 * PI) - 1.0).abs() <= 0.02);
    let b = oracle
        .bilin(&mode(&mesh, 1.0, false), &mode(&mesh, 1.0, true))
        .unwrap();
    assert!(b.abs() <= 1e-3 * PI, "{b}");
}

#[test]
fn constants_are_annihilated() {
    let mesh = disk_mesh(0.05);
    let oracle = Conductor::new(ConductivityField::new(Preset::Radial { b: 0.5 }, BOX).unwrap())
        .oracle(Arc::clone(&mesh))
        .unwrap();
    let c = BoundaryData::from_fn(&mesh, |_, _| 3.0).unwrap();
    let norm2: f64 = c.values().iter().map(|v| v * v).sum();
    assert!(oracle.quad(&c).unwrap().abs() <= 1e-10 * norm2);
    let f = mode(&mesh, 2.0, false);
    assert!(oracle.bilin(&f, &c).unwrap().abs() <= 1e-8);
}

#[test]
fn symmetry_positivity_polarization() {
    let mesh = disk_mesh(0.05);
    let gamma = ConductivityField::new(Preset::Exponential { a: [0.5, 0.0] }, BOX).unwrap();
    let oracle = Conductor::new(gamma).oracle(Arc::clone(&mesh)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let f = random_data(&mesh, &mut rng);
        let g = random_data(&mesh, &mut rng);
        let fg = oracle.bilin(&f, &g).unwrap();
        let gf = oracle.bilin(&g, &f).unwrap();
        let qf = oracle.quad(&f).unwrap();
        assert!((fg - gf).abs() <= 1e-10 * fg.abs().max(qf));
        assert!(qf >= -1e-12);
        assert!((oracle.bilin(&f, &f).unwrap() - qf).abs() <= 1e-12 * qf);
        let plus = oracle.quad(&f.combine(1.0, &g, 1.0)).unwrap();
        let minus = oracle.quad(&f.combine(1.0, &g, -1.0)).unwrap();
        let polar = 0.25 * (plus - minus);
        assert!((polar - fg).abs() <= 1e-8 * (plus + minus), "{polar} vs {fg}");
    }
}

#[test]
fn linear_in_gamma() {
    let mesh = disk_mesh(0.05);
    let gamma = ConductivityField::new(Preset::Radial { b: 0.5 }, BOX).unwrap();
    let a = Conductor::new(gamma.clone()).oracle(Arc::clone(&mesh)).unwrap();
    let b = Conductor::new(gamma.scaled(3.5).unwrap())
        .oracle(Arc::clone(&mesh))
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let f = random_data(&mesh, &mut rng);
        let (qa, qb) = (a.quad(&f).unwrap(), b.quad(&f).unwrap());
        assert!((qb / (3.5 * qa) - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn monotone_in_gamma() {
    let mesh = disk_mesh(0.05);
    // 1 ≤ 1 + 0.5|x|² pointwise
    let lo = Conductor::new(ConductivityField::constant(1.0))
        .oracle(Arc::clone(&mesh))
        .unwrap();
    let hi = Conductor::new(ConductivityField::new(Preset::Radial { b: 0.5 }, BOX).unwrap())
        .oracle(Arc::clone(&mesh))
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let f = random_data(&mesh, &mut rng);
        assert!(lo.quad(&f).unwrap() <= hi.quad(&f).unwrap() + 1e-9);
    }
}

#[test]
fn energy_converges_at_second_order() {
    // γ = exp(0.5 x₁), f = cos 2θ; reference from a finer mesh
    let gamma = ConductivityField::new(Preset::Exponential { a: [0.5, 0.0] }, BOX).unwrap();
    let conductor = Conductor::new(gamma);
    let q = |size: f64| {
        let mesh = disk_mesh(size);
        let oracle = conductor.oracle(Arc::clone(&mesh)).unwrap();
        oracle.quad(&mode(&mesh, 2.0, false)).unwrap()
    };
    let reference = q(0.005);
    let errs: Vec<f64> = [0.08, 0.04, 0.02].iter().map(|&s| (q(s) - reference).abs()).collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 3.0, "errors {errs:?}");
    }
}

#[test]
fn query_counter_counts_every_measurement() {
    let mesh = disk_mesh(0.1);
    let conductor = Conductor::new(ConductivityField::constant(1.0));
    let a = conductor.oracle(Arc::clone(&mesh)).unwrap();
    let b = conductor.oracle(Arc::clone(&mesh)).unwrap();
    let f = mode(&mesh, 1.0, false);
    a.quad(&f).unwrap();
    b.quad(&f).unwrap();
    b.bilin(&f, &f).unwrap();
    assert_eq!(conductor.queries(), 3);
}
