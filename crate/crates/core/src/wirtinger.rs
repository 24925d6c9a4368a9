//! Exact first- and second-order Wirtinger differentiation of expressions.
//!
//! Conjugated variables are independent symbols in the DSL, so a Wirtinger
//! partial is an ordinary forward-mode derivative: one nilpotent generator
//! per requested direction, nested once for second order. A central
//! finite-difference oracle (with the conjugates slaved to the actual
//! conjugate values) is provided for testing.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{Assignment, Expression, Var, VarClass};
use crate::scalar::{Dual, Dual1, Dual2};

/// A base/fiber evaluation point; `zb`/`ub` are bound to conjugates here.
#[derive(Debug, Clone, PartialEq)]
pub struct WPoint {
    pub z: Vec<Complex64>,
    pub u: Vec<Complex64>,
}

impl WPoint {
    pub fn new(z: Vec<Complex64>, u: Vec<Complex64>) -> WPoint {
        let finite = z
            .iter()
            .chain(u.iter())
            .all(|c| c.re.is_finite() && c.im.is_finite());
        assert!(finite, "WPoint components must be finite");
        WPoint { z, u }
    }

    pub fn base_value(&self, var: Var) -> Option<Complex64> {
        match var.class {
            VarClass::Z => self.z.get(var.index).copied(),
            VarClass::Zb => self.z.get(var.index).map(|c| c.conj()),
            VarClass::U => self.u.get(var.index).copied(),
            VarClass::Ub => self.u.get(var.index).map(|c| c.conj()),
        }
    }

    pub fn assignment(&self) -> Assignment<Complex64> {
        Assignment {
            z: self.z.clone(),
            zb: self.z.iter().map(|c| c.conj()).collect(),
            u: self.u.clone(),
            ub: self.u.iter().map(|c| c.conj()).collect(),
        }
    }

    fn check_dims(&self, e: &Expression) -> Result<()> {
        let ctx = e.context();
        if self.z.len() != ctx.n || self.u.len() < expected_fiber(e) {
            return Err(Error::DimensionMismatch(format!(
                "point has (n={}, m={}) but expression context declares (n={}, m={})",
                self.z.len(),
                self.u.len(),
                ctx.n,
                ctx.m
            )));
        }
        Ok(())
    }
}

// Expressions over base-only contexts carry m = 1 as a placeholder; only
// demand fiber values when a fiber variable is actually referenced.
fn expected_fiber(e: &Expression) -> usize {
    e.free_vars()
        .iter()
        .filter(|v| !v.class.is_base())
        .map(|v| v.index + 1)
        .max()
        .unwrap_or(0)
}

/// Value plus requested first/second Wirtinger partials at a point.
#[derive(Debug, Clone)]
pub struct WirtingerJet {
    pub value: Complex64,
    d1: BTreeMap<Var, Complex64>,
    d2: BTreeMap<(Var, Var), Complex64>,
}

impl WirtingerJet {
    pub fn d1(&self, var: Var) -> Option<Complex64> {
        self.d1.get(&var).copied()
    }

    /// Symmetric in its two indices by construction.
    pub fn d2(&self, a: Var, b: Var) -> Option<Complex64> {
        self.d2.get(&canonical_pair(a, b)).copied()
    }

    pub fn first_entries(&self) -> impl Iterator<Item = (&Var, &Complex64)> {
        self.d1.iter()
    }
}

fn canonical_pair(a: Var, b: Var) -> (Var, Var) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Which derivatives to populate.
#[derive(Debug, Clone, Default)]
pub struct JetSpec {
    pub first: Vec<Var>,
    pub second: Vec<(Var, Var)>,
}

impl JetSpec {
    pub fn firsts(vars: impl IntoIterator<Item = Var>) -> JetSpec {
        JetSpec {
            first: vars.into_iter().collect(),
            second: Vec::new(),
        }
    }

    pub fn seconds(pairs: impl IntoIterator<Item = (Var, Var)>) -> JetSpec {
        JetSpec {
            first: Vec::new(),
            second: pairs.into_iter().collect(),
        }
    }
}

fn dual1_assignment(p: &WPoint, dir: Var) -> Assignment<Dual1> {
    let seed = |var: Var, value: Complex64| {
        let eps = if var == dir {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        Dual::new(value, eps)
    };
    Assignment {
        z: p.z
            .iter()
            .enumerate()
            .map(|(k, v)| seed(Var::z(k), *v))
            .collect(),
        zb: p
            .z
            .iter()
            .enumerate()
            .map(|(k, v)| seed(Var::zb(k), v.conj()))
            .collect(),
        u: p.u
            .iter()
            .enumerate()
            .map(|(a, v)| seed(Var::u(a), *v))
            .collect(),
        ub: p
            .u
            .iter()
            .enumerate()
            .map(|(a, v)| seed(Var::ub(a), v.conj()))
            .collect(),
    }
}

fn dual2_assignment(p: &WPoint, dir1: Var, dir2: Var) -> Assignment<Dual2> {
    let seed = |var: Var, value: Complex64| {
        let e1 = if var == dir1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let e2 = if var == dir2 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        Dual::new(
            Dual::new(value, e1),
            Dual::new(e2, Complex64::new(0.0, 0.0)),
        )
    };
    Assignment {
        z: p.z
            .iter()
            .enumerate()
            .map(|(k, v)| seed(Var::z(k), *v))
            .collect(),
        zb: p
            .z
            .iter()
            .enumerate()
            .map(|(k, v)| seed(Var::zb(k), v.conj()))
            .collect(),
        u: p.u
            .iter()
            .enumerate()
            .map(|(a, v)| seed(Var::u(a), *v))
            .collect(),
        ub: p
            .u
            .iter()
            .enumerate()
            .map(|(a, v)| seed(Var::ub(a), v.conj()))
            .collect(),
    }
}

/// Evaluate `e` at `p` with conjugates slaved.
pub fn value_at(e: &Expression, p: &WPoint) -> Result<Complex64> {
    p.check_dims(e)?;
    Ok(e.eval(&p.assignment())?)
}

/// Exact forward-mode jet with only the requested entries populated.
pub fn jet(e: &Expression, p: &WPoint, spec: &JetSpec) -> Result<WirtingerJet> {
    p.check_dims(e)?;
    let value = e.eval(&p.assignment())?;
    let mut d1 = BTreeMap::new();
    for &var in &spec.first {
        let out = e.eval(&dual1_assignment(p, var))?;
        d1.insert(var, out.deriv);
    }
    let mut d2 = BTreeMap::new();
    for &(a, b) in &spec.second {
        let key = canonical_pair(a, b);
        if d2.contains_key(&key) {
            continue;
        }
        let out = e.eval(&dual2_assignment(p, key.0, key.1))?;
        d2.insert(key, out.deriv.deriv);
    }
    Ok(WirtingerJet { value, d1, d2 })
}

/// Single first-order Wirtinger partial.
pub fn d1(e: &Expression, p: &WPoint, var: Var) -> Result<Complex64> {
    p.check_dims(e)?;
    Ok(e.eval(&dual1_assignment(p, var))?.deriv)
}

/// Single second-order Wirtinger partial (symmetric in the pair).
pub fn d2(e: &Expression, p: &WPoint, a: Var, b: Var) -> Result<Complex64> {
    p.check_dims(e)?;
    let (a, b) = canonical_pair(a, b);
    Ok(e.eval(&dual2_assignment(p, a, b))?.deriv.deriv)
}

/// Central-difference Wirtinger derivative with conjugates slaved to the
/// perturbed point. For a holomorphic direction this is
/// `(f_x - i f_y)/2`; for a conjugated direction `(f_x + i f_y)/2`.
pub fn fd_oracle(e: &Expression, p: &WPoint, var: Var, h: f64) -> Result<Complex64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    p.check_dims(e)?;
    let eval_shift = |shift: Complex64| -> Result<Complex64> {
        let mut q = p.clone();
        match var.class {
            VarClass::Z | VarClass::Zb => q.z[var.index] += shift,
            VarClass::U | VarClass::Ub => q.u[var.index] += shift,
        }
        Ok(e.eval(&q.assignment())?)
    };
    let hr = Complex64::new(h, 0.0);
    let hi = Complex64::new(0.0, h);
    let fx = (eval_shift(hr)? - eval_shift(-hr)?) / (2.0 * h);
    let fy = (eval_shift(hi)? - eval_shift(-hi)?) / (2.0 * h);
    let i = Complex64::new(0.0, 1.0);
    Ok(if var.class.is_conjugated() {
        (fx + i * fy) / 2.0
    } else {
        (fx - i * fy) / 2.0
    })
}

/// Verifies at the given points that an expression intended to be
/// real-valued (a Lagrangian) stays real once conjugates are slaved.
pub fn reality_check(e: &Expression, points: &[WPoint], tol: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in points {
        let v = value_at(e, p)?;
        worst = worst.max(v.im.abs());
    }
    if worst > tol {
        return Err(Error::RealityCheck { imag: worst, tol });
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::VariableContext;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pt(z: &[Complex64], u: &[Complex64]) -> WPoint {
        WPoint::new(z.to_vec(), u.to_vec())
    }

    #[test]
    fn modulus_squared_partials() {
        // d(z zbar)/dz = zbar, d/dzbar = z at z = 2 + i.
        let ctx = VariableContext::full(1, 1);
        let e = Expression::parse("z1*zb1", &ctx).unwrap();
        let p = pt(&[c(2.0, 1.0)], &[c(0.0, 0.0)]);
        assert_eq!(d1(&e, &p, Var::z(0)).unwrap(), c(2.0, -1.0));
        assert_eq!(d1(&e, &p, Var::zb(0)).unwrap(), c(2.0, 1.0));
    }

    #[test]
    fn bilinear_second_partial_is_one() {
        let ctx = VariableContext::full(1, 1);
        let e = Expression::parse("u1*ub1", &ctx).unwrap();
        let p = pt(&[c(0.3, 0.4)], &[c(-1.0, 2.0)]);
        assert_eq!(d2(&e, &p, Var::u(0), Var::ub(0)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn holomorphic_function_partials() {
        let ctx = VariableContext::holomorphic_base(1);
        let e = Expression::parse("exp(z1)", &ctx).unwrap();
        let p = pt(&[c(0.0, 0.0)], &[]);
        assert_eq!(d1(&e, &p, Var::z(0)).unwrap(), c(1.0, 0.0));
        // The conjugate direction never appears in the tree: exactly zero.
        assert_eq!(d1(&e, &p, Var::zb(0)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn fd_oracle_matches_analytic_derivative() {
        let ctx = VariableContext::holomorphic_base(1);
        let e = Expression::parse("z1^2", &ctx).unwrap();
        let p = pt(&[c(1.0, 0.0)], &[]);
        let fd = fd_oracle(&e, &p, Var::z(0), 1e-5).unwrap();
        assert!((fd - c(2.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn fd_oracle_antiholomorphic_direction() {
        let ctx = VariableContext::full(1, 1);
        let e = Expression::parse("z1*zb1", &ctx).unwrap();
        let p = pt(&[c(1.0, 1.0)], &[c(0.0, 0.0)]);
        let fd = fd_oracle(&e, &p, Var::zb(0), 1e-5).unwrap();
        assert!((fd - c(1.0, 1.0)).norm() < 1e-7);
    }

    #[test]
    fn fd_oracle_constant_is_noise_level() {
        let ctx = VariableContext::holomorphic_base(1);
        let e = Expression::parse("(3-2i)", &ctx).unwrap();
        let p = pt(&[c(0.7, -0.2)], &[]);
        let fd = fd_oracle(&e, &p, Var::z(0), 1e-5).unwrap();
        assert!(fd.norm() < 1e-10);
    }

    #[test]
    fn jet_populates_only_requested_entries() {
        let ctx = VariableContext::full(1, 1);
        let e = Expression::parse("z1*u1 + zb1", &ctx).unwrap();
        let p = pt(&[c(1.0, 2.0)], &[c(3.0, 0.0)]);
        let spec = JetSpec {
            first: vec![Var::z(0)],
            second: vec![(Var::z(0), Var::u(0))],
        };
        let j = jet(&e, &p, &spec).unwrap();
        assert_eq!(j.d1(Var::z(0)).unwrap(), c(3.0, 0.0));
        assert!(j.d1(Var::zb(0)).is_none());
        assert_eq!(j.d2(Var::u(0), Var::z(0)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn holomorphic_context_kills_conjugate_directions() {
        // Formal conjugate partials of holomorphic expressions are exactly
        // zero, not merely small.
        let ctx = VariableContext::holomorphic(2, 2);
        let p = pt(&[c(0.7, -0.3), c(1.2, 0.4)], &[c(0.5, 0.5), c(-0.9, 0.1)]);
        for text in ["z1^3*u2 + exp(z2*u1)", "u1/(z1 + z2^2)", "sqrt(z1)*u2^2"] {
            let e = Expression::parse(text, &ctx).unwrap();
            for k in 0..2 {
                assert_eq!(d1(&e, &p, Var::zb(k)).unwrap(), c(0.0, 0.0));
                assert_eq!(d1(&e, &p, Var::ub(k)).unwrap(), c(0.0, 0.0));
                assert_eq!(d2(&e, &p, Var::zb(k), Var::u(k)).unwrap(), c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn plain_evaluation_equals_dual_with_zero_seed() {
        let ctx = VariableContext::full(2, 1);
        let e = Expression::parse("exp(z1)*zb2 + sqrt(u1)/(1+z2^2)", &ctx).unwrap();
        let p = pt(&[c(0.4, 0.1), c(-0.3, 0.8)], &[c(2.0, 0.5)]);
        let plain = value_at(&e, &p).unwrap();
        let j = jet(&e, &p, &JetSpec::firsts([Var::z(0)])).unwrap();
        assert_eq!(plain, j.value);
    }

    #[test]
    fn reality_check_accepts_lagrangian_and_rejects_generic() {
        let ctx = VariableContext::full(1, 1);
        let real = Expression::parse("z1*zb1*u1*ub1", &ctx).unwrap();
        let points = vec![pt(&[c(1.2, -0.3)], &[c(0.5, 0.5)])];
        assert!(reality_check(&real, &points, 1e-12).is_ok());
        let generic = Expression::parse("z1*u1", &ctx).unwrap();
        assert!(reality_check(&generic, &points, 1e-12).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn product_rule_first_partials(
            re1 in -1.5f64..1.5, im1 in -1.5f64..1.5,
            re2 in -1.5f64..1.5, im2 in -1.5f64..1.5,
        ) {
            let ctx = VariableContext::full(1, 1);
            let e1 = Expression::parse("z1^2 + zb1*u1", &ctx).unwrap();
            let e2 = Expression::parse("u1*ub1 + 2*z1", &ctx).unwrap();
            let prod = e1.mul(&e2);
            let p = pt(&[c(re1, im1)], &[c(re2, im2)]);
            for var in [Var::z(0), Var::zb(0), Var::u(0), Var::ub(0)] {
                let lhs = d1(&prod, &p, var).unwrap();
                let v1 = value_at(&e1, &p).unwrap();
                let v2 = value_at(&e2, &p).unwrap();
                let rhs = v1 * d1(&e2, &p, var).unwrap() + v2 * d1(&e1, &p, var).unwrap();
                prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
            }
        }

        #[test]
        fn schwarz_symmetry_is_exact(
            re in -1.5f64..1.5, im in -1.5f64..1.5,
            ur in -1.5f64..1.5, ui in -1.5f64..1.5,
        ) {
            let ctx = VariableContext::full(1, 1);
            let e = Expression::parse("exp(z1*u1) + zb1^2*ub1", &ctx).unwrap();
            let p = pt(&[c(re, im)], &[c(ur, ui)]);
            for a in [Var::z(0), Var::zb(0), Var::u(0), Var::ub(0)] {
                for b in [Var::z(0), Var::zb(0), Var::u(0), Var::ub(0)] {
                    let ab = d2(&e, &p, a, b).unwrap();
                    let ba = d2(&e, &p, b, a).unwrap();
                    prop_assert_eq!(ab, ba);
                }
            }
        }
    }
}
