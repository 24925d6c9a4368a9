#![allow(clippy::needless_range_loop)]

//! Cross-module identities: the anchor as a bracket homomorphism, chart
//! covariance of the structure residuals, and the pulled-back coframe.

use num_complex::Complex64;

use algebroid_core::algebroid::{AlgebroidSpec, ChartData, SectionExpr};
use algebroid_core::catalog;
use algebroid_core::chart::{self, StructureEval};
use algebroid_core::expr::{Expression, Var, VariableContext};
use algebroid_core::sampling::{self, SamplingSpec};
use algebroid_core::tangent;
use algebroid_core::wirtinger::{self, WPoint};

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Base-manifold polynomial test functions for derivation comparisons.
fn base_test_functions(n: usize) -> Vec<Expression> {
    let ctx = VariableContext::holomorphic_base(n);
    let z = |k: usize| Expression::variable(Var::z(k), &ctx);
    let mut out = vec![z(0), z(0).mul(&z(0)), z(0).mul(&z(0)).mul(&z(0))];
    if n > 1 {
        out.push(z(1));
        out.push(z(0).mul(&z(1)));
    } else {
        out.push(z(0).mul(&z(0)).mul(&z(0)).mul(&z(0)));
        out.push(z(0).add(&z(0).mul(&z(0))));
    }
    out
}

/// X(Y(f)) - Y(X(f)) with both fields given as anchored sections, expanded
/// through the product rule so only first/second jets are needed.
fn commutator_apply(
    a: &AlgebroidSpec,
    s1: &SectionExpr,
    s2: &SectionExpr,
    f: &Expression,
    p: &WPoint,
) -> Complex64 {
    let x = a.anchor_apply(s1, p).unwrap();
    let y = a.anchor_apply(s2, p).unwrap();
    // z-derivatives of the pushforward coefficients X^k = s^a rho^k_a
    let danchor = a.anchor_dz_at(p).unwrap();
    let anchor = a.anchor_at(p).unwrap();
    let v1 = s1.values_at(p).unwrap();
    let v2 = s2.values_at(p).unwrap();
    let d1s = s1.dz_at(p, a.n).unwrap();
    let d2s = s2.dz_at(p, a.n).unwrap();
    let dx = |k: usize, j: usize, values: &[Complex64], ds: &[Vec<Complex64>]| {
        let mut acc = c64(0.0, 0.0);
        for al in 0..a.m {
            acc += ds[al][j] * anchor[k][al] + values[al] * danchor[k][al][j];
        }
        acc
    };
    let mut acc = c64(0.0, 0.0);
    for k in 0..a.n {
        let mut xy_k = c64(0.0, 0.0);
        let mut yx_k = c64(0.0, 0.0);
        for j in 0..a.n {
            xy_k += x[j] * dx(k, j, &v2, &d2s);
            yx_k += y[j] * dx(k, j, &v1, &d1s);
        }
        acc += (xy_k - yx_k) * wirtinger::d1(f, p, Var::z(k)).unwrap();
        // second-derivative terms of f cancel in the commutator, but keep
        // the check honest by adding and subtracting them explicitly
        for j in 0..a.n {
            let hess = wirtinger::d2(f, p, Var::z(k), Var::z(j)).unwrap();
            acc += (x[j] * y[k] - y[j] * x[k]) * hess;
        }
    }
    acc
}

#[test]
fn anchor_is_a_bracket_homomorphism() {
    // rho([s1, s2]) applied to test functions equals the commutator of the
    // pushed-forward fields, across anchors of all three rank regimes.
    let cases: Vec<(AlgebroidSpec, SectionExpr, SectionExpr)> = vec![
        (
            catalog::scaled(),
            SectionExpr::parse(&["1 + z1^2"], 1).unwrap(),
            SectionExpr::parse(&["z1"], 1).unwrap(),
        ),
        (
            catalog::submersion(),
            SectionExpr::parse(&["z1", "1"], 1).unwrap(),
            SectionExpr::parse(&["1", "z1^2"], 1).unwrap(),
        ),
        (
            catalog::heisenberg_like(),
            SectionExpr::parse(&["1", "z1", "0"], 1).unwrap(),
            SectionExpr::parse(&["z1^2", "1", "2"], 1).unwrap(),
        ),
        (
            catalog::immersion(),
            SectionExpr::parse(&["z2"], 2).unwrap(),
            SectionExpr::parse(&["z1*z2"], 2).unwrap(),
        ),
    ];
    for (a, s1, s2) in cases {
        let tests = base_test_functions(a.n);
        let points = sampling::sample_points(
            &a,
            &SamplingSpec {
                count: 20,
                ..Default::default()
            },
        );
        let mut worst = 0.0f64;
        for p in &points {
            let bracket = a.bracket_sections(&s1, &s2, p).unwrap();
            let anchor = a.anchor_at(p).unwrap();
            for f in &tests {
                // lhs: rho([s1,s2]) f with the bracket known by value
                let mut lhs = c64(0.0, 0.0);
                for k in 0..a.n {
                    let mut coeff = c64(0.0, 0.0);
                    for al in 0..a.m {
                        coeff += anchor[k][al] * bracket[al];
                    }
                    lhs += coeff * wirtinger::d1(f, p, Var::z(k)).unwrap();
                }
                let rhs = commutator_apply(&a, &s1, &s2, f, p);
                worst = worst.max((lhs - rhs).norm());
            }
        }
        assert!(
            worst <= 1e-9,
            "{}: anchor morphism residual {worst:.3e}",
            a.name
        );
    }
}

#[test]
fn validate_residuals_are_chart_covariant() {
    // The structure residuals agree between the two charts of the twochart
    // entry, and on a synthetic multi-rank entry with a nontrivial fiber
    // transition (which exercises the transformed structure functions).
    let a = catalog::twochart();
    let ch = a.charts[0].clone();
    let points = sampling::sample_points(
        &a,
        &SamplingSpec {
            count: 20,
            ..Default::default()
        },
    );
    let mut worst = 0.0f64;
    for p in &points {
        let direct = chart::direct_structure(&a, p).unwrap();
        let tilde = chart::transformed_structure(&a, &ch, p).unwrap();
        worst = worst.max(residual_gap(&direct, &tilde));
    }
    assert!(worst <= 1e-9, "twochart covariance gap {worst:.3e}");

    // Nonabelian entry with a z-dependent fiber transition.
    let zctx = VariableContext::holomorphic_base(1);
    let e = |t: &str| Expression::parse(t, &zctx).unwrap();
    let chart = ChartData {
        zmap: vec![e("2*z1")],
        m_grid: vec![
            vec![e("1"), e("z1"), e("0")],
            vec![e("0"), e("1"), e("0")],
            vec![e("0"), e("z1^2"), e("1")],
        ],
        w_grid: None,
    };
    let a = AlgebroidSpec::new(
        "heisenberg-chart",
        1,
        3,
        vec![vec![e("1")], vec![e("0")], vec![e("0")]],
        vec![(2, 0, 1, e("1"))],
        vec![chart.clone()],
        vec![],
    )
    .unwrap();
    let points = sampling::sample_points(
        &a,
        &SamplingSpec {
            count: 20,
            ..Default::default()
        },
    );
    let mut worst = 0.0f64;
    for p in &points {
        let direct = chart::direct_structure(&a, p).unwrap();
        let tilde = chart::transformed_structure(&a, &chart, p).unwrap();
        let gap = residual_gap(&direct, &tilde);
        // both charts must also individually satisfy the identities
        assert!(identity_residual(&direct) <= 1e-12);
        assert!(
            identity_residual(&tilde) <= 1e-10,
            "tilde identity {:.3e}",
            identity_residual(&tilde)
        );
        worst = worst.max(gap);
    }
    assert!(worst <= 1e-9, "nonabelian covariance gap {worst:.3e}");
}

fn identity_residual(se: &StructureEval) -> f64 {
    algebroid_core::algebroid::structure_identity_residual(&se.anchor, &se.danchor, &se.c)
        .max(chart::jacobi_structure_residual(se))
}

fn residual_gap(a: &StructureEval, b: &StructureEval) -> f64 {
    (identity_residual(a) - identity_residual(b)).abs()
}

#[test]
fn dual_pullback_pairs_with_pushforward() {
    // The pulled-back coframe evaluated on a pushed-forward vector must
    // reproduce the directional components of the image.
    let a = catalog::immersion();
    let points = sampling::sample_points(
        &a,
        &SamplingSpec {
            count: 10,
            ..Default::default()
        },
    );
    for p in &points {
        let (dz_block, du_block) = tangent::dual_pullback(&a, p).unwrap();
        let v = tangent::TangentVector {
            z: vec![c64(0.4, -0.2), c64(1.1, 0.3)],
            v: vec![c64(-0.8, 0.6)],
        };
        let image = tangent::tangent_pushforward(&a, &v, p).unwrap();
        for k in 0..a.n {
            // d*eta^k (v) = u^a drho^k_a/dz^h dz^h(v) + rho^k_a du^a(v)
            let mut acc = c64(0.0, 0.0);
            for h in 0..a.n {
                acc += dz_block[k][h] * v.z[h];
            }
            for al in 0..a.m {
                acc += du_block[k][al] * v.v[al];
            }
            assert!((acc - image.v[k]).norm() < 1e-13);
        }
    }
}
