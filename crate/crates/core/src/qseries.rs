//! Truncated q-series with exact rational coefficients and exponents in
//! (1/den)Z.

use crate::error::{precondition, Result};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::f64::consts::PI;

/// sum_{k < len} coeffs[k] q^((val + k)/den) + O(q^((val + len)/den)).
#[derive(Clone, Debug, PartialEq)]
pub struct QSeries {
    pub den: i64,
    pub val: i64,
    pub coeffs: Vec<BigRational>,
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl QSeries {
    pub fn zero(den: i64, val: i64, len: usize) -> Self {
        QSeries { den, val, coeffs: vec![BigRational::zero(); len] }
    }

    pub fn from_ints(den: i64, val: i64, c: &[i64]) -> Self {
        QSeries { den, val, coeffs: c.iter().map(|&x| rat(x)).collect() }
    }

    pub fn from_i128(den: i64, val: i64, c: &[i128]) -> Self {
        QSeries { den, val, coeffs: c.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect() }
    }

    /// Exclusive numerator bound of the known exponents.
    pub fn prec(&self) -> i64 {
        self.val + self.coeffs.len() as i64
    }

    /// Coefficient of q^(e/den), zero below the valuation; panics past the
    /// precision.
    pub fn coeff(&self, e: i64) -> BigRational {
        if e < self.val {
            return BigRational::zero();
        }
        let k = (e - self.val) as usize;
        assert!(k < self.coeffs.len(), "coefficient beyond truncation order");
        self.coeffs[k].clone()
    }

    pub fn truncate(&self, prec: i64) -> QSeries {
        let len = (prec - self.val).clamp(0, self.coeffs.len() as i64) as usize;
        QSeries { den: self.den, val: self.val, coeffs: self.coeffs[..len].to_vec() }
    }

    /// Re-expresses exponents over a multiple of the denominator.
    pub fn with_den(&self, den: i64) -> Result<QSeries> {
        if den % self.den != 0 {
            return precondition(format!("{den} is not a multiple of {}", self.den));
        }
        let k = den / self.den;
        let len = self.coeffs.len() * k as usize;
        let mut out = QSeries::zero(den, self.val * k, len);
        for (i, c) in self.coeffs.iter().enumerate() {
            out.coeffs[i * k as usize] = c.clone();
        }
        Ok(out)
    }

    fn common(a: &QSeries, b: &QSeries) -> (QSeries, QSeries) {
        let den = num_integer::lcm(a.den, b.den);
        (a.with_den(den).unwrap(), b.with_den(den).unwrap())
    }

    pub fn add(&self, other: &QSeries) -> QSeries {
        let (a, b) = Self::common(self, other);
        let val = a.val.min(b.val);
        let prec = a.prec().min(b.prec());
        let len = (prec - val).max(0) as usize;
        let mut out = QSeries::zero(a.den, val, len);
        for e in val..prec {
            let k = (e - val) as usize;
            if e >= a.val {
                out.coeffs[k] += &a.coeffs[(e - a.val) as usize];
            }
            if e >= b.val {
                out.coeffs[k] += &b.coeffs[(e - b.val) as usize];
            }
        }
        out
    }

    pub fn neg(&self) -> QSeries {
        QSeries { den: self.den, val: self.val, coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn sub(&self, other: &QSeries) -> QSeries {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &BigRational) -> QSeries {
        QSeries { den: self.den, val: self.val, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn mul(&self, other: &QSeries) -> QSeries {
        let (a, b) = Self::common(self, other);
        let val = a.val + b.val;
        let prec = (a.prec() + b.val).min(b.prec() + a.val);
        let len = (prec - val).max(0) as usize;
        let mut out = QSeries::zero(a.den, val, len);
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() || i >= len {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate().take(len - i) {
                if !y.is_zero() {
                    out.coeffs[i + j] += x * y;
                }
            }
        }
        out
    }

    /// Multiplies by q^(e/den).
    pub fn shift(&self, e: i64) -> QSeries {
        QSeries { den: self.den, val: self.val + e, coeffs: self.coeffs.clone() }
    }

    /// Drops leading zero coefficients.
    pub fn normalized(&self) -> QSeries {
        let k = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        QSeries { den: self.den, val: self.val + k as i64, coeffs: self.coeffs[k..].to_vec() }
    }

    pub fn inverse(&self) -> Result<QSeries> {
        let a = self.normalized();
        if a.coeffs.is_empty() {
            return precondition("inverse of a series with no known nonzero coefficient");
        }
        let len = a.coeffs.len();
        let lead_inv = a.coeffs[0].recip();
        let mut out = vec![BigRational::zero(); len];
        out[0] = lead_inv.clone();
        for n in 1..len {
            let mut s = BigRational::zero();
            for k in 1..=n {
                if !a.coeffs[k].is_zero() {
                    s += &a.coeffs[k] * &out[n - k];
                }
            }
            out[n] = -s * &lead_inv;
        }
        Ok(QSeries { den: a.den, val: -a.val, coeffs: out })
    }

    pub fn div(&self, other: &QSeries) -> Result<QSeries> {
        Ok(self.mul(&other.inverse()?))
    }

    pub fn pow(&self, k: u32) -> QSeries {
        let mut acc = QSeries::from_ints(self.den, 0, &[1]);
        acc.coeffs.resize(self.coeffs.len(), BigRational::zero());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Substitutes q -> sign * q^(num/den') for a series with integral
    /// exponents (den = 1).
    pub fn substitute(&self, sign: i64, num: i64, den: i64) -> Result<QSeries> {
        if self.den != 1 {
            return precondition("substitution needs integral exponents");
        }
        let g = num_integer::gcd(num, den);
        let (num, den) = (num / g, den / g);
        let mut out = QSeries::zero(den, self.val * num, (self.coeffs.len() as i64 * num) as usize);
        for (k, c) in self.coeffs.iter().enumerate() {
            let e = self.val + k as i64;
            let s = if sign < 0 && e.rem_euclid(2) == 1 { -c.clone() } else { c.clone() };
            out.coeffs[(k as i64 * num) as usize] = s;
        }
        Ok(out)
    }

    /// q d/dq.
    pub fn theta_derivative(&self) -> QSeries {
        QSeries {
            den: self.den,
            val: self.val,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * BigRational::new(BigInt::from(self.val + k as i64), BigInt::from(self.den)))
                .collect(),
        }
    }

    /// Smallest exponent with a nonzero known coefficient.
    pub fn min_exponent(&self) -> Option<Rational64> {
        self.coeffs.iter().position(|c| !c.is_zero()).map(|k| Rational64::new(self.val + k as i64, self.den))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()
    }

    /// sum_k c_k e(tau (val+k)/den) over the known coefficients.
    pub fn eval(&self, tau: Complex64) -> Complex64 {
        let mut s = Complex64::zero();
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let e = (self.val + k as i64) as f64 / self.den as f64;
            s += c.to_f64().unwrap() * (Complex64::new(0.0, 2.0 * PI * e) * tau).exp();
        }
        s
    }

    pub fn to_json(&self) -> QSeriesJson {
        QSeriesJson {
            denominator: self.den,
            precision: self.prec(),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(k, c)| QCoeffJson { num: self.val + k as i64, value: fmt_big(c) })
                .collect(),
        }
    }
}

pub fn fmt_big(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct QCoeffJson {
    pub num: i64,
    pub value: String,
}

/// Exponents are num/denominator; `precision` is the exclusive bound on num.
#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct QSeriesJson {
    pub denominator: i64,
    pub precision: i64,
    pub coeffs: Vec<QCoeffJson>,
}

/// Integer power series helpers in a formal variable x, used where
/// coefficients stay well inside i128.
pub mod int {
    fn checked(a: i128, b: i128) -> i128 {
        a.checked_mul(b).expect("integer q-series overflow")
    }

    pub fn mul(a: &[i128], b: &[i128], len: usize) -> Vec<i128> {
        let mut out = vec![0i128; len];
        for (i, &x) in a.iter().enumerate().take(len) {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate().take(len - i) {
                out[i + j] = out[i + j].checked_add(checked(x, y)).expect("integer q-series overflow");
            }
        }
        out
    }

    /// Inverse of a series with constant term +-1.
    pub fn inv(a: &[i128], len: usize) -> Vec<i128> {
        assert!(a[0] == 1 || a[0] == -1, "constant term must be a unit");
        let mut out = vec![0i128; len];
        out[0] = a[0];
        for n in 1..len {
            let mut s = 0i128;
            for k in 1..=n.min(a.len() - 1) {
                s += checked(a[k], out[n - k]);
            }
            out[n] = -s * a[0];
        }
        out
    }
}

impl QSeries {
    /// Maximum absolute coefficient, for diagnostics.
    pub fn max_abs(&self) -> BigRational {
        self.coeffs.iter().map(|c| c.abs()).fold(BigRational::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn one(len: usize) -> QSeries {
        let mut s = QSeries::zero(1, 0, len);
        s.coeffs[0] = BigRational::one();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_one_minus_q() {
        let s = QSeries::from_ints(1, 0, &[1, -1, 0, 0, 0, 0]);
        let inv = s.inverse().unwrap();
        assert!(inv.coeffs.iter().all(|c| *c == rat(1)));
        let prod = s.mul(&inv);
        assert_eq!(prod.coeffs[0], rat(1));
        assert!(prod.coeffs[1..].iter().all(|c| c.is_zero()));
    }

    #[test]
    fn laurent_inverse() {
        let s = QSeries::from_ints(1, 1, &[1, 2, 3, 4]);
        let inv = s.inverse().unwrap();
        assert_eq!(inv.val, -1);
        let p = s.mul(&inv);
        assert_eq!(p.val, 0);
        assert_eq!(p.coeffs[0], rat(1));
    }

    #[test]
    fn substitution_and_denominators() {
        let s = QSeries::from_ints(1, 0, &[1, 1, 1]);
        let t = s.substitute(-1, 1, 2).unwrap();
        assert_eq!(t.den, 2);
        assert_eq!(t.coeff(1), rat(-1));
        let u = t.add(&QSeries::from_ints(3, 1, &[5, 0, 0]));
        assert_eq!(u.den, 6);
        assert_eq!(u.coeff(2), rat(5));
        assert_eq!(u.coeff(3), rat(-1));
        assert_eq!(u.min_exponent(), Some(Rational64::from_integer(0)));
    }

    #[test]
    fn integer_helpers_agree_with_exact() {
        let a = vec![1i128, -2, 3, 0, 1];
        let inv = int::inv(&a, 8);
        let exact = QSeries::from_i128(1, 0, &a).inverse().unwrap();
        for k in 0..5 {
            assert_eq!(exact.coeff(k), BigRational::from_integer(inv[k as usize].into()));
        }
    }
}
