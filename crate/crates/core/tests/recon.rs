use std::f64::consts::E;

use calderon_core::fem::{ConductivityField, Conductor, Preset};
use calderon_core::geometry::{boundary_frame, build_domain, Domain, DomainSpec, RadiusSeries};
use calderon_core::recon::{
    recover_normal, recover_value, FitModel, RecoveryOptions, RecoverySchedule,
};

fn disk() -> Domain {
    build_domain(&DomainSpec::UnitDisk).unwrap()
}

fn field(domain: &Domain, preset: Preset) -> ConductivityField {
    ConductivityField::new(preset, domain.bounding_box()).unwrap()
}

fn value_schedule() -> RecoverySchedule {
    RecoverySchedule::dyadic(0.1, 6, FitModel::affine()).unwrap()
}

fn normal_schedule() -> RecoverySchedule {
    RecoverySchedule::dyadic(0.1, 6, FitModel::scanned()).unwrap()
}

fn value_at(gamma: ConductivityField, domain: &Domain, s: f64) -> calderon_core::recon::ValueRecovery {
    let c = Conductor::new(gamma);
    recover_value(&c, domain, s, &value_schedule(), &RecoveryOptions::default()).unwrap()
}

fn normal_at(gamma: ConductivityField, domain: &Domain, s: f64) -> f64 {
    let c = Conductor::new(gamma);
    let trace = c.boundary_trace(domain);
    recover_normal(&c, domain, s, &trace, &normal_schedule(), &RecoveryOptions::default())
        .unwrap()
        .estimate
}

#[test]
fn value_of_constant_conductivity() {
    let d = disk();
    let r = value_at(ConductivityField::constant(2.0), &d, 0.0);
    assert!((r.estimate / 2.0 - 1.0).abs() <= 0.02, "{}", r.estimate);
    assert_eq!(r.rows.len(), 6);
    assert_eq!(r.report.values.len(), r.report.abscissae.len());
    assert!(r.report.residual.is_finite());
}

#[test]
fn value_of_exponential_conductivity() {
    let d = disk();
    let r = value_at(field(&d, Preset::Exponential { a: [0.5, 0.0] }), &d, 0.0);
    assert!((r.estimate / E.sqrt() - 1.0).abs() <= 0.05, "{}", r.estimate);
}

#[test]
fn unit_conductivity_ratio_at_smallest_h() {
    let d = disk();
    let r = value_at(ConductivityField::constant(1.0), &d, 0.0);
    let last = r.rows.last().unwrap();
    assert!((last.rho - 1.0).abs() <= 0.02, "{}", last.rho);
}

#[test]
fn ratios_improve_monotonically() {
    let d = disk();
    let gamma = field(&d, Preset::Radial { b: 0.5 });
    let r = value_at(gamma, &d, 1.0);
    let errs: Vec<f64> = r.rows.iter().map(|row| (row.rho - 1.5).abs()).collect();
    let tail = &errs[errs.len() - 3..];
    let inversions: Vec<f64> = tail
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[1] - w[0]) / 1.5)
        .collect();
    assert!(inversions.len() <= 1 && inversions.iter().all(|x| *x <= 0.1), "{errs:?}");
    assert!(r.report.flags.is_empty(), "{:?}", r.report.flags);
}

#[test]
fn normal_derivative_of_constant_is_zero() {
    let d = disk();
    let est = normal_at(ConductivityField::constant(3.0), &d, 2.0);
    assert!(est.abs() <= 0.05, "{est}");
}

#[test]
fn normal_derivative_of_exponential() {
    let d = disk();
    let est = normal_at(field(&d, Preset::Exponential { a: [0.5, 0.0] }), &d, 0.0);
    assert!((est / 0.5 - 1.0).abs() <= 0.15, "{est}");
}

#[test]
fn normal_derivative_of_radial() {
    let d = disk();
    let est = normal_at(field(&d, Preset::Radial { b: 0.5 }), &d, 0.0);
    assert!((est / (2.0 / 3.0) - 1.0).abs() <= 0.15, "{est}");
}

#[test]
fn one_query_per_offset_per_stage() {
    let d = disk();
    let c = Conductor::new(field(&d, Preset::Exponential { a: [0.5, 0.0] }));
    let opts = RecoveryOptions::default();
    recover_value(&c, &d, 0.5, &value_schedule(), &opts).unwrap();
    assert_eq!(c.queries(), value_schedule().len());
    let trace = c.boundary_trace(&d);
    recover_normal(&c, &d, 0.5, &trace, &normal_schedule(), &opts).unwrap();
    assert_eq!(c.queries(), value_schedule().len() + normal_schedule().len());
}

#[test]
fn recon_has_no_interior_conductivity_access() {
    let sources = [
        include_str!("../src/recon/mod.rs"),
        include_str!("../src/recon/fit.rs"),
    ];
    for src in sources {
        for token in ["ConductivityField", "Preset", ".gradient(", "log_gradient"] {
            assert!(!src.contains(token), "recon mentions {token}");
        }
    }
}

#[test]
fn scaling_equivariance() {
    let d = disk();
    let gamma = field(&d, Preset::Radial { b: 0.5 });
    let scaled = gamma.scaled(3.0).unwrap();
    let a = value_at(gamma.clone(), &d, 0.3).estimate;
    let b = value_at(scaled.clone(), &d, 0.3).estimate;
    assert!((b / (3.0 * a) - 1.0).abs() <= 1e-8, "{a} {b}");
    let na = normal_at(gamma, &d, 0.3);
    let nb = normal_at(scaled, &d, 0.3);
    assert!((na - nb).abs() <= 1e-6, "{na} {nb}");
}

#[test]
fn mirrored_domain_gives_the_same_answers() {
    let series = RadiusSeries {
        mean: 1.0,
        cos: vec![0.0, 0.08],
        sin: vec![0.0, 0.0, 0.05],
    };
    let mut flipped = series.clone();
    flipped.sin.iter_mut().for_each(|v| *v = -*v);
    let d = build_domain(&DomainSpec::Star(series)).unwrap();
    let m = build_domain(&DomainSpec::Star(flipped)).unwrap();
    let s = d.length() * 0.1;
    let p = d.point(s);
    let t = m.parameter_of([p[0], -p[1]]);
    let q = m.point(t);
    assert!((q[0] - p[0]).abs() < 1e-9 && (q[1] + p[1]).abs() < 1e-9);

    let delta = boundary_frame(&d, s).unwrap().validity_radius();
    let h0 = (delta / 5.0).min(0.1);
    let vs = RecoverySchedule::dyadic(h0, 5, FitModel::affine()).unwrap();
    let ns = RecoverySchedule::dyadic(h0, 5, FitModel::scanned()).unwrap();
    let opts = RecoveryOptions::default();
    let run = |dom: &Domain, a: [f64; 2], at: f64| {
        let c = Conductor::new(field(dom, Preset::Exponential { a }));
        let v = recover_value(&c, dom, at, &vs, &opts).unwrap().estimate;
        let trace = c.boundary_trace(dom);
        let n = recover_normal(&c, dom, at, &trace, &ns, &opts).unwrap().estimate;
        (v, n)
    };
    let (v1, n1) = run(&d, [0.4, 0.3], s);
    let (v2, n2) = run(&m, [0.4, -0.3], t);
    assert!((v1 / v2 - 1.0).abs() <= 0.01, "{v1} {v2}");
    assert!((n1 - n2).abs() <= 0.05, "{n1} {n2}");
}

#[test]
fn corner_points_are_rejected() {
    let square = build_domain(&DomainSpec::Polygon(vec![
        [0.0, 0.0],
        [1.0, 0.0],
        [1.0, 1.0],
        [0.0, 1.0],
    ]))
    .unwrap();
    let c = Conductor::new(ConductivityField::constant(1.0));
    let err = recover_value(&c, &square, 0.2, &value_schedule(), &RecoveryOptions::default());
    assert!(err.is_err());
    assert_eq!(c.queries(), 0);
}
