#![allow(clippy::needless_range_loop)]

//! Acceptance suite: every criterion runs at its pinned tolerance and
//! prints one pass/fail line. Run with `cargo test --test acceptance`.

use num_complex::Complex64;
use std::sync::Arc;

use algebroid_core::algebroid::AlgebroidSpec;
use algebroid_core::catalog;
use algebroid_core::expr::{Expression, Var, VariableContext};
use algebroid_core::induction::{self, CaseRegistry, LagrangeStructure, TransportDirection};
use algebroid_core::linalg;
use algebroid_core::prolongation;
use algebroid_core::report::Tolerances;
use algebroid_core::sampling::{self, SamplingSpec};
use algebroid_core::scenario::{self, Scenario};
use algebroid_core::spray::{self, SprayField, SpraySource, SPRAY_LAMBDAS};
use algebroid_core::wirtinger::{self, WPoint};

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn spec(count: usize, seed: u64) -> SamplingSpec {
    SamplingSpec {
        count,
        seed,
        ..Default::default()
    }
}

fn verdict(criterion: &str, max_residual: f64, tolerance: f64) {
    let pass = max_residual <= tolerance;
    println!(
        "{criterion}: {} (max residual {max_residual:.3e}, tolerance {tolerance:.1e})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(
        pass,
        "{criterion} exceeded tolerance: {max_residual:.3e} > {tolerance:.1e}"
    );
}

#[test]
fn criterion_01_structure_validation() {
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    for a in catalog::all() {
        let points = sampling::sample_points(&a, &spec(100, 42));
        let report = a.validate_structure(&points, &tol).unwrap();
        for name in [
            "prop1_identity_1",
            "prop1_identity_2",
            "prop1_identity_3",
            "prop1_identity_4",
            "prop1_identity_5",
            "prop1_identity_6",
            "jacobi",
        ] {
            worst = worst.max(report.max_residual(name).unwrap());
        }
        assert!(report.pass(), "{}: {report:?}", a.name);
    }
    verdict("criterion 01 structure validation", worst, 1e-9);
}

#[test]
fn criterion_02_ad_against_finite_differences() {
    let mut worst = 0.0f64;
    for (entry, expr) in catalog::EXPRESSIONS
        .iter()
        .zip(catalog::parsed_expressions())
    {
        let points = sampling::sample_raw(entry.n, entry.m, &spec(50, 7));
        let mut vars = Vec::new();
        for k in 0..entry.n {
            vars.push(Var::z(k));
            vars.push(Var::zb(k));
        }
        for al in 0..entry.m {
            vars.push(Var::u(al));
            vars.push(Var::ub(al));
        }
        for p in &points {
            for &v in &vars {
                let exact = wirtinger::d1(&expr, p, v).unwrap();
                let fd = wirtinger::fd_oracle(&expr, p, v, 1e-5).unwrap();
                worst = worst.max((exact - fd).norm() / (1.0 + exact.norm()));
            }
        }
    }
    verdict("criterion 02 AD vs finite differences", worst, 1e-6);
}

#[test]
fn criterion_03_canonical_spray_values_and_homogeneity() {
    let a = catalog::trivial();
    let ctx = VariableContext::full(1, 1);
    let l = Expression::parse("z1*zb1*u1*ub1", &ctx).unwrap();

    let p = WPoint::new(vec![c64(1.0, 0.0)], vec![c64(2.0, 0.0)]);
    let g = spray::canonical_spray(&a, &l, None, &p).unwrap().g[0];
    let mut worst = (g - c64(2.0, 0.0)).norm();

    let p = WPoint::new(vec![c64(0.0, 2.0)], vec![c64(1.0, 0.0)]);
    let g = spray::canonical_spray(&a, &l, None, &p).unwrap().g[0];
    worst = worst.max((g - c64(0.0, -0.25)).norm());
    verdict(
        "criterion 03a canonical spray closed-form values",
        worst,
        1e-10,
    );

    let mut homogeneity = 0.0f64;
    for p in sampling::sample_points(&a, &spec(20, 11)) {
        let base = spray::canonical_spray(&a, &l, None, &p).unwrap().g;
        for lambda in SPRAY_LAMBDAS {
            let scaled = WPoint::new(p.z.clone(), p.u.iter().map(|u| u * lambda).collect());
            let at_scaled = spray::canonical_spray(&a, &l, None, &scaled).unwrap().g;
            for (gs, gb) in at_scaled.iter().zip(&base) {
                homogeneity = homogeneity.max((gs - lambda * lambda * gb).norm());
            }
        }
    }
    verdict(
        "criterion 03b canonical spray homogeneity",
        homogeneity,
        1e-9,
    );
}

#[test]
fn criterion_04_spray_covariance_on_twochart() {
    let a = catalog::twochart();
    let chart = a.charts[0].clone();
    let ctx = VariableContext::full(1, 1);
    let l = Expression::parse("z1*zb1*u1*ub1", &ctx).unwrap();
    let points = sampling::sample_points(&a, &spec(50, 42));
    let report = spray::semispray_change_residual(
        &a,
        &SpraySource::Canonical(l),
        &chart,
        &points,
        &Tolerances::default(),
    )
    .unwrap();
    let worst = report
        .max_residual("spray_change_law")
        .unwrap()
        .max(report.max_residual("spray_base_covariance").unwrap());
    verdict("criterion 04 spray transformation law", worst, 1e-8);
}

#[test]
fn criterion_05_spray_derived_connection() {
    // On the twochart entry the canonical spray of L = z zb u ub has the
    // closed form G = u^2/2 (rho = z); confirm, then check Eq.-level
    // covariance of the derived connection.
    let a = catalog::twochart();
    let chart = a.charts[0].clone();
    let ctx = VariableContext::full(1, 1);
    let l = Expression::parse("z1*zb1*u1*ub1", &ctx).unwrap();
    let arc = Arc::new(a.clone());
    let s = SprayField::parse(arc.clone(), &["u1^2/2"]).unwrap();
    let points = sampling::sample_points(&a, &spec(50, 42));
    let mut closed_form = 0.0f64;
    for p in &points {
        let canonical = spray::canonical_spray(&a, &l, None, p).unwrap().g[0];
        let given = s.g_at(p).unwrap()[0];
        closed_form = closed_form.max((canonical - given).norm());
    }
    assert!(
        closed_form < 1e-10,
        "closed form mismatch {closed_form:.3e}"
    );

    let report = prolongation::theorem_connection_change_residual(
        &a,
        &s,
        &chart,
        &points,
        &Tolerances::default(),
    )
    .unwrap();
    let worst = report.max_residual("prolong_nlc_change_law").unwrap();
    verdict(
        "criterion 05a derived connection transformation law",
        worst,
        1e-8,
    );

    // With identity transitions the derived coefficients are exactly the
    // fiber derivative of the spray coefficients.
    let mut exact = 0.0f64;
    for p in &points {
        let derived = prolongation::nlc_from_spray(&a, &s, None, p).unwrap();
        for beta in 0..a.m {
            for alpha in 0..a.m {
                let direct = wirtinger::d1(&s.coefficients()[beta], p, Var::u(alpha)).unwrap();
                assert_eq!(derived[beta][alpha], direct);
                exact = exact.max((derived[beta][alpha] - direct).norm());
            }
        }
    }
    verdict("criterion 05b identity-transition reduction", exact, 0.0);
}

#[test]
fn criterion_06_integral_curves() {
    // Straight-line exactness on the trivial algebroid.
    let trivial = Arc::new(catalog::trivial());
    let zero = SprayField::parse(trivial.clone(), &["0"]).unwrap();
    let x0 = WPoint::new(vec![c64(0.0, 0.0)], vec![c64(1.0, 0.0)]);
    let traj = spray::integrate(&zero, &x0, 1.0, 1e-3).unwrap();
    let (_, z_end, u_end) = traj.samples.last().unwrap();
    let line_err = (z_end[0] - c64(1.0, 0.0))
        .norm()
        .max((u_end[0] - c64(1.0, 0.0)).norm());
    verdict("criterion 06a straight-line exactness", line_err, 1e-10);

    // Admissibility of RK4 runs across the catalog.
    let runs: Vec<(AlgebroidSpec, Vec<&str>, WPoint)> = vec![
        (
            catalog::trivial(),
            vec!["u1^2"],
            WPoint::new(vec![c64(0.2, 0.0)], vec![c64(0.7, 0.0)]),
        ),
        (
            catalog::tangent(),
            vec!["u1^2", "u1*u2"],
            WPoint::new(
                vec![c64(0.0, 0.0), c64(0.0, 0.0)],
                vec![c64(0.5, 0.1), c64(0.4, -0.2)],
            ),
        ),
        (
            catalog::scaled(),
            vec!["u1^2"],
            WPoint::new(vec![c64(1.0, 0.0)], vec![c64(0.3, 0.0)]),
        ),
        (
            catalog::immersion(),
            vec!["u1^2"],
            WPoint::new(vec![c64(1.0, 0.0), c64(1.0, 0.0)], vec![c64(0.4, 0.1)]),
        ),
        (
            catalog::submersion(),
            vec!["u1^2", "u2^2"],
            WPoint::new(vec![c64(1.0, 0.0)], vec![c64(0.4, 0.0), c64(0.3, 0.1)]),
        ),
        (
            catalog::twochart(),
            vec!["u1^2/2"],
            WPoint::new(vec![c64(1.0, 0.0)], vec![c64(0.5, 0.0)]),
        ),
        (
            catalog::heisenberg_like(),
            vec!["u1^2", "0", "u1*u2"],
            WPoint::new(
                vec![c64(0.5, 0.0)],
                vec![c64(0.3, 0.0), c64(0.2, 0.0), c64(0.1, 0.0)],
            ),
        ),
    ];
    let mut worst = 0.0f64;
    for (a, g, x0) in runs {
        let arc = Arc::new(a.clone());
        let s = SprayField::parse(arc, &g).unwrap();
        let traj = spray::integrate(&s, &x0, 1.0, 1e-3).unwrap();
        worst = worst.max(spray::admissibility_residual(&a, &traj).unwrap());
    }
    verdict("criterion 06b RK4 admissibility", worst, 1e-6);
}

#[test]
fn criterion_07_prolongation_lemmas() {
    let tol = Tolerances::default();
    let mut exact = 0.0f64;
    let mut liouville = 0.0f64;
    let mut brackets = 0.0f64;
    for a in catalog::all() {
        let points = sampling::sample_points(&a, &spec(100, 42));
        let lemmas = prolongation::lemma_checks(&a, &points).unwrap();
        exact = exact
            .max(lemmas.max_residual("tangent_structure_nilpotent").unwrap())
            .max(lemmas.max_residual("tangent_structure_semispray").unwrap());
        liouville = liouville.max(lemmas.max_residual("liouville_tangent_bracket").unwrap());
        let basis = prolongation::basis_bracket_residuals(&a, &points, &tol).unwrap();
        for check in &basis.checks {
            brackets = brackets.max(check.max_residual);
        }
    }
    verdict(
        "criterion 07a tangent structure identities (exact)",
        exact,
        0.0,
    );
    verdict("criterion 07b Liouville-tangent bracket", liouville, 1e-12);
    verdict("criterion 07c basis bracket identities", brackets, 1e-9);
}

#[test]
fn criterion_08_case1_round_trip() {
    let a = catalog::scaled();
    let points = sampling::sample_points(&a, &spec(50, 42));
    let mut worst = 0.0f64;
    for (idx, p) in points.iter().enumerate() {
        let mut coeffs = linalg::zeros(1, 1);
        coeffs[0][0] = c64((idx as f64 * 0.61).sin() + 0.2, (idx as f64 * 1.37).cos());
        let tm = induction::case1_connection_transport(&a, &coeffs, TransportDirection::EToTm, p)
            .unwrap();
        let back =
            induction::case1_connection_transport(&a, &tm, TransportDirection::TmToE, p).unwrap();
        worst = worst.max((back[0][0] - coeffs[0][0]).norm());
    }
    verdict("criterion 08 case-I round trip", worst, 1e-10);
}

#[test]
fn criterion_09_case2_coincidence() {
    let a = catalog::immersion();
    let l = LagrangeStructure::on_tm(2, "u1*ub1 + u2*ub2 + z1*zb1*u1*ub1").unwrap();
    let points = sampling::sample_points(&a, &spec(50, 42));
    let mut worst = 0.0f64;
    for p in &points {
        worst = worst.max(induction::case2_chern_lagrange_residual(&a, &l, p, None).unwrap());
    }
    verdict(
        "criterion 09 case-II Chern-Lagrange coincidence",
        worst,
        1e-8,
    );
}

#[test]
fn criterion_10_case3_coincidence_and_reduction() {
    let a = catalog::submersion();
    let l = LagrangeStructure::on_e(1, 2, "u1*ub1 + u2*ub2 + z1*zb1*u1*ub1").unwrap();
    let points = sampling::sample_points(&a, &spec(50, 42));
    let mut worst = 0.0f64;
    for p in &points {
        worst = worst.max(induction::case3_chern_lagrange_residual(&a, &l, p, None).unwrap());
    }
    verdict(
        "criterion 10a case-III Chern-Lagrange coincidence",
        worst,
        1e-8,
    );

    // Square anchor: the case-III transport reduces to case I.
    let a = catalog::scaled();
    let l = LagrangeStructure::on_e(1, 1, "u1*ub1 + z1*zb1*u1*ub1").unwrap();
    let points = sampling::sample_points(&a, &spec(50, 42));
    let mut reduction = 0.0f64;
    for p in &points {
        let n_e = induction::chern_lagrange_on_e(&l, p, 1, 1).unwrap();
        let via3 = induction::case3_induced_connection(&a, &l, &n_e, p).unwrap();
        let via1 =
            induction::case1_connection_transport(&a, &n_e, TransportDirection::EToTm, p).unwrap();
        reduction = reduction.max((via3.n_tm[0][0] - via1[0][0]).norm());
    }
    verdict(
        "criterion 10b square-anchor reduction to case I",
        reduction,
        1e-10,
    );
}

#[test]
fn criterion_11_completion_invariance() {
    let registry = CaseRegistry::default();
    let tol = Tolerances::default();

    let a = catalog::immersion();
    let l = LagrangeStructure::on_tm(2, "u1*ub1 + u2*ub2 + z1*zb1*u1*ub1").unwrap();
    let points = sampling::sample_points(&a, &spec(20, 42));
    let report = registry
        .by_id(2)
        .unwrap()
        .run(&a, &l, &points, &tol)
        .unwrap();
    let case2 = report.max_residual("case2_unitary_invariance").unwrap();

    let a = catalog::submersion();
    let l = LagrangeStructure::on_e(1, 2, "u1*ub1 + u2*ub2 + z1*zb1*u1*ub1").unwrap();
    let points = sampling::sample_points(&a, &spec(20, 42));
    let report = registry
        .by_id(3)
        .unwrap()
        .run(&a, &l, &points, &tol)
        .unwrap();
    let case3 = report.max_residual("case3_unitary_invariance").unwrap();

    verdict(
        "criterion 11 completion unitary invariance",
        case2.max(case3),
        1e-10,
    );
}

#[test]
fn criterion_12_report_determinism() {
    let scenario = Scenario {
        command: "report".to_string(),
        algebroid: "trivial".to_string(),
        lagrangian: Some("z1*zb1*u1*ub1".to_string()),
        domain: "e".to_string(),
        case: None,
        direction: None,
        spray: None,
        t_end: None,
        step: None,
        sampling: spec(50, 42),
        tolerances: Tolerances::default(),
        probe: None,
    };
    let (r1, _) = scenario::run(&scenario).unwrap();
    let (r2, _) = scenario::run(&scenario).unwrap();
    let j1 = serde_json::to_string_pretty(&r1).unwrap();
    let j2 = serde_json::to_string_pretty(&r2).unwrap();
    assert!(r1.pass, "full report must pass: {r1:?}");
    let identical = j1 == j2;
    println!(
        "criterion 12 report determinism: {} (byte-identical: {identical})",
        if identical { "PASS" } else { "FAIL" }
    );
    assert!(identical);
}
