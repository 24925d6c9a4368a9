//! Scalar algebras the expression evaluator is generic over.
//!
//! Plain `Complex64` gives values; [`Dual`] carries one nilpotent generator
//! for forward-mode differentiation, and `Dual<Dual<Complex64>>` (one level
//! of nesting) gives exact second-order partials. Conjugated variables are
//! independent symbols, so these derivatives are Wirtinger partials.

use num_complex::Complex64;

/// Field operations plus `exp`/`log`/`sqrt`, with the singular cases
/// (`div` by zero, `log`/`sqrt` of zero, negative powers of zero)
/// reported through `Option`.
pub trait ScalarAlgebra: Clone {
    fn from_complex(c: Complex64) -> Self;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn div(&self, rhs: &Self) -> Option<Self>;
    fn powi(&self, n: i32) -> Option<Self>;
    fn exp(&self) -> Self;
    fn ln(&self) -> Option<Self>;
    fn sqrt(&self) -> Option<Self>;

    fn zero() -> Self {
        Self::from_complex(Complex64::new(0.0, 0.0))
    }
    fn one() -> Self {
        Self::from_complex(Complex64::new(1.0, 0.0))
    }
}

fn complex_powi(base: Complex64, n: i32) -> Complex64 {
    // Exponentiation by squaring keeps integer powers exact-ish and avoids
    // the branch cuts of powc.
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut e = n.unsigned_abs();
    let mut b = base;
    let mut acc = Complex64::new(1.0, 0.0);
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    if n < 0 {
        acc.finv()
    } else {
        acc
    }
}

impl ScalarAlgebra for Complex64 {
    fn from_complex(c: Complex64) -> Self {
        c
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn div(&self, rhs: &Self) -> Option<Self> {
        if rhs.norm_sqr() == 0.0 {
            None
        } else {
            Some(self / rhs)
        }
    }
    fn powi(&self, n: i32) -> Option<Self> {
        if n < 0 && self.norm_sqr() == 0.0 {
            None
        } else {
            Some(complex_powi(*self, n))
        }
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn ln(&self) -> Option<Self> {
        if self.norm_sqr() == 0.0 {
            None
        } else {
            Some(Complex64::ln(*self))
        }
    }
    fn sqrt(&self) -> Option<Self> {
        if self.norm_sqr() == 0.0 {
            None
        } else {
            Some(Complex64::sqrt(*self))
        }
    }
}

/// `value + eps * deriv` with `eps^2 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual<S> {
    pub value: S,
    pub deriv: S,
}

impl<S: ScalarAlgebra> Dual<S> {
    pub fn new(value: S, deriv: S) -> Self {
        Dual { value, deriv }
    }

    pub fn constant(value: S) -> Self {
        Dual {
            value,
            deriv: S::zero(),
        }
    }
}

impl<S: ScalarAlgebra> ScalarAlgebra for Dual<S> {
    fn from_complex(c: Complex64) -> Self {
        Dual::constant(S::from_complex(c))
    }

    fn add(&self, rhs: &Self) -> Self {
        Dual::new(self.value.add(&rhs.value), self.deriv.add(&rhs.deriv))
    }

    fn sub(&self, rhs: &Self) -> Self {
        Dual::new(self.value.sub(&rhs.value), self.deriv.sub(&rhs.deriv))
    }

    fn mul(&self, rhs: &Self) -> Self {
        Dual::new(
            self.value.mul(&rhs.value),
            self.value.mul(&rhs.deriv).add(&self.deriv.mul(&rhs.value)),
        )
    }

    fn neg(&self) -> Self {
        Dual::new(self.value.neg(), self.deriv.neg())
    }

    fn div(&self, rhs: &Self) -> Option<Self> {
        let value = self.value.div(&rhs.value)?;
        // (b c - a d) / c^2
        let num = self.deriv.mul(&rhs.value).sub(&self.value.mul(&rhs.deriv));
        let deriv = num.div(&rhs.value.mul(&rhs.value))?;
        Some(Dual::new(value, deriv))
    }

    fn powi(&self, n: i32) -> Option<Self> {
        let value = self.value.powi(n)?;
        if n == 0 {
            return Some(Dual::new(value, S::zero()));
        }
        let factor = S::from_complex(Complex64::new(f64::from(n), 0.0));
        let deriv = factor.mul(&self.value.powi(n - 1)?).mul(&self.deriv);
        Some(Dual::new(value, deriv))
    }

    fn exp(&self) -> Self {
        let value = self.value.exp();
        Dual::new(value.clone(), self.deriv.mul(&value))
    }

    fn ln(&self) -> Option<Self> {
        let value = self.value.ln()?;
        let deriv = self.deriv.div(&self.value)?;
        Some(Dual::new(value, deriv))
    }

    fn sqrt(&self) -> Option<Self> {
        let root = self.value.sqrt()?;
        let two = S::from_complex(Complex64::new(2.0, 0.0));
        let deriv = self.deriv.div(&two.mul(&root))?;
        Some(Dual::new(root, deriv))
    }
}

/// First-order dual over plain complex numbers.
pub type Dual1 = Dual<Complex64>;
/// Nested dual: exact mixed second partials via the eps1*eps2 coefficient.
pub type Dual2 = Dual<Dual<Complex64>>;

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dual_product_rule() {
        // d/dx (x * x) = 2x at x = 3 + i
        let x = Dual1::new(c(3.0, 1.0), c(1.0, 0.0));
        let y = x.mul(&x);
        assert_eq!(y.deriv, c(6.0, 2.0));
    }

    #[test]
    fn dual_quotient_and_log() {
        // d/dx (1/x) = -1/x^2 at x = 2
        let x = Dual1::new(c(2.0, 0.0), c(1.0, 0.0));
        let inv = Dual1::one().div(&x).unwrap();
        assert!((inv.deriv - c(-0.25, 0.0)).norm() < 1e-15);
        // d/dx ln x = 1/x
        let l = x.ln().unwrap();
        assert!((l.deriv - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn nested_dual_second_derivative() {
        // f(x) = x^3, f''(x) = 6x at x = 2: seed eps1 and eps2 both on x.
        let x = Dual2::new(
            Dual1::new(c(2.0, 0.0), c(1.0, 0.0)),
            Dual1::new(c(1.0, 0.0), c(0.0, 0.0)),
        );
        let y = x.powi(3).unwrap();
        assert!((y.deriv.deriv - c(12.0, 0.0)).norm() < 1e-12);
        assert!((y.value.value - c(8.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn division_by_zero_is_reported() {
        let zero = Complex64::zero();
        assert!(Complex64::one().div(&zero).is_none());
        let dzero = Dual1::constant(zero);
        assert!(Dual1::one().div(&dzero).is_none());
        assert!(dzero.ln().is_none());
        assert!(dzero.sqrt().is_none());
        assert!(dzero.powi(-2).is_none());
    }

    #[test]
    fn integer_power_matches_repeated_product() {
        let z = c(1.2, -0.7);
        let p = ScalarAlgebra::powi(&z, 5).unwrap();
        assert!((p - z * z * z * z * z).norm() < 1e-12);
        let q = ScalarAlgebra::powi(&z, -3).unwrap();
        assert!((q - (z * z * z).finv()).norm() < 1e-12);
    }
}
