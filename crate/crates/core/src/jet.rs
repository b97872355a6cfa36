//! Second-order forward-mode jets `(f(0), f'(0), f''(0))` in the parameter `z`.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::linalg::{CMat, CVec, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub value: Complex64,
    pub first: Complex64,
    pub second: Complex64,
}

impl Jet2 {
    pub fn new(value: Complex64, first: Complex64, second: Complex64) -> Self {
        Jet2 { value, first, second }
    }

    pub fn constant(value: Complex64) -> Self {
        Jet2 { value, first: ZERO, second: ZERO }
    }

    /// The identity function `z` at 0.
    pub fn variable() -> Self {
        Jet2 { value: ZERO, first: Complex64::new(1.0, 0.0), second: ZERO }
    }

    pub fn recip(self) -> Self {
        let v = self.value;
        Jet2 {
            value: 1.0 / v,
            first: -self.first / (v * v),
            second: (2.0 * self.first * self.first - v * self.second) / (v * v * v),
        }
    }

    pub fn ln(self) -> Self {
        let q = self.first / self.value;
        Jet2 { value: self.value.ln(), first: q, second: self.second / self.value - q * q }
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        Jet2 { value: e, first: e * self.first, second: e * (self.second + self.first * self.first) }
    }

    pub fn scale(self, c: Complex64) -> Self {
        Jet2 { value: self.value * c, first: self.first * c, second: self.second * c }
    }

    pub fn is_finite(&self) -> bool {
        [self.value, self.first, self.second].iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 { value: self.value + o.value, first: self.first + o.first, second: self.second + o.second }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 { value: -self.value, first: -self.first, second: -self.second }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            value: self.value * o.value,
            first: self.value * o.first + self.first * o.value,
            second: self.second * o.value + 2.0 * self.first * o.first + self.value * o.second,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JetVec {
    pub v: [CVec; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct JetMat {
    pub m: [CMat; 3],
}

impl JetVec {
    pub fn constant(v: CVec) -> Self {
        let n = v.len();
        JetVec { v: [v, CVec::from_element(n, ZERO), CVec::from_element(n, ZERO)] }
    }

    /// `Σ_i w_i v_i` for a constant weight vector.
    pub fn weigh(&self, w: &CVec) -> Jet2 {
        Jet2::new(w.dot(&self.v[0]), w.dot(&self.v[1]), w.dot(&self.v[2]))
    }

    pub fn sum(&self) -> Jet2 {
        Jet2::new(self.v[0].sum(), self.v[1].sum(), self.v[2].sum())
    }

    /// Divides by a real positive constant; used for rescaling.
    pub fn rescale(&mut self, s: f64) {
        let c = Complex64::new(1.0 / s, 0.0);
        for x in &mut self.v {
            *x *= c;
        }
    }

    pub fn value_sup(&self) -> f64 {
        self.v[0].iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl JetMat {
    pub fn apply(&self, x: &JetVec) -> JetVec {
        let [m0, m1, m2] = &self.m;
        let [v0, v1, v2] = &x.v;
        JetVec {
            v: [
                m0 * v0,
                m1 * v0 + m0 * v1,
                m2 * v0 + (m1 * v1) * Complex64::new(2.0, 0.0) + m0 * v2,
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn j(a: f64, b: f64, c: f64) -> Jet2 {
        Jet2::new(Complex64::new(a, 0.0), Complex64::new(b, 0.0), Complex64::new(c, 0.0))
    }

    fn close(a: Jet2, b: Jet2) -> bool {
        let d = (a.value - b.value).norm() + (a.first - b.first).norm() + (a.second - b.second).norm();
        d < 1e-9 * (1.0 + a.value.norm() + a.first.norm() + a.second.norm())
    }

    proptest! {
        #[test]
        fn ring_laws(a in (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0),
                     b in (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0),
                     c in (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0)) {
            let (x, y, w) = (j(a.0, a.1, a.2), j(b.0, b.1, b.2), j(c.0, c.1, c.2));
            prop_assert!(close(x * y, y * x));
            prop_assert!(close((x * y) * w, x * (y * w)));
            prop_assert!(close(x * (y + w), x * y + x * w));
            prop_assert_eq!((x * y).first, x.value * y.first + x.first * y.value);
        }
    }

    #[test]
    fn ln_and_exp_match_calculus() {
        // f(z) = 2 + 3z + z^2 at 0.
        let f = j(2.0, 3.0, 2.0);
        let l = f.ln();
        assert!((l.first.re - 1.5).abs() < 1e-15);
        assert!((l.second.re - (2.0 / 2.0 - 2.25)).abs() < 1e-15);
        assert!(close(l.exp(), f));
        assert!(close(f * f.recip(), j(1.0, 0.0, 0.0)));
        let e = Jet2::variable().scale(Complex64::new(0.0, 1.0)).exp();
        assert!((e.second + Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn matrix_product_rule() {
        // M(z) = [[1+z, z^2]] style 1x1 check: (1+z)(2+z^2) = 2 + 2z + 3 z^2 + ...
        let m = JetMat {
            m: [
                CMat::from_element(1, 1, Complex64::new(1.0, 0.0)),
                CMat::from_element(1, 1, Complex64::new(1.0, 0.0)),
                CMat::from_element(1, 1, ZERO),
            ],
        };
        let v = JetVec {
            v: [
                CVec::from_element(1, Complex64::new(2.0, 0.0)),
                CVec::from_element(1, ZERO),
                CVec::from_element(1, Complex64::new(2.0, 0.0)),
            ],
        };
        let r = m.apply(&v).sum();
        assert!(close(r, j(2.0, 2.0, 2.0)));
    }
}
