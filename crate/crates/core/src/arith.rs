//! Small integer helpers: gcd, integer square roots, Kronecker symbols and
//! 2x2 integer matrices.

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Mul;

pub fn gcd(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

/// Returns (g, x, y) with a*x + b*y = g = gcd(a, b) >= 0.
pub fn egcd(a: i64, b: i64) -> (i64, i64, i64) {
    let e = a.extended_gcd(&b);
    if e.gcd < 0 {
        (-e.gcd, -e.x, -e.y)
    } else {
        (e.gcd, e.x, e.y)
    }
}

pub fn modp(a: i64, m: i64) -> i64 {
    a.mod_floor(&m)
}

pub fn isqrt(n: i64) -> i64 {
    assert!(n >= 0, "isqrt of negative number");
    (n as u64).isqrt() as i64
}

pub fn is_square(n: i64) -> bool {
    n >= 0 && {
        let s = isqrt(n);
        s * s == n
    }
}

pub fn square_root(n: i64) -> Option<i64> {
    if n < 0 {
        return None;
    }
    let s = isqrt(n);
    (s * s == n).then_some(s)
}

/// Jacobi symbol (a/n) for odd n > 0.
pub fn jacobi(a: i64, n: i64) -> i32 {
    assert!(n > 0 && n % 2 == 1);
    let mut a = a.mod_floor(&n);
    let mut n = n;
    let mut t = 1;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            let r = n % 8;
            if r == 3 || r == 5 {
                t = -t;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            t = -t;
        }
        a %= n;
    }
    if n == 1 {
        t
    } else {
        0
    }
}

/// Kronecker symbol (d/n). For n < 0 the factor (d/-1) is the sign of d.
pub fn kronecker(d: i64, n: i64) -> i32 {
    if n == 0 {
        return if d.abs() == 1 { 1 } else { 0 };
    }
    let mut res = 1;
    let mut n = n;
    if n < 0 {
        n = -n;
        if d < 0 {
            res = -1;
        }
    }
    let tz = n.trailing_zeros();
    if tz > 0 {
        if d % 2 == 0 {
            return 0;
        }
        let r = d.mod_floor(&8);
        if (r == 3 || r == 5) && tz % 2 == 1 {
            res = -res;
        }
        n >>= tz;
    }
    res * jacobi(d, n)
}

pub fn is_squarefree(n: i64) -> bool {
    let n = n.abs();
    let mut p = 2;
    while p * p <= n {
        if n % (p * p) == 0 {
            return false;
        }
        p += 1;
    }
    true
}

/// Fundamental discriminant test (also accepts positive discriminants).
pub fn is_fundamental(d: i64) -> bool {
    if d == 0 || d == 1 {
        return false;
    }
    match d.mod_floor(&4) {
        1 => is_squarefree(d),
        0 => {
            let m = d / 4;
            let r = m.mod_floor(&4);
            (r == 2 || r == 3) && is_squarefree(m)
        }
        _ => false,
    }
}

pub fn divisors(n: i64) -> Vec<i64> {
    let n = n.abs();
    let mut out: Vec<i64> = (1..=n).filter(|k| n % k == 0).collect();
    out.sort_unstable();
    out
}

/// Integer 2x2 matrix [[a, b], [c, d]].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Mat2 {
    pub const I: Mat2 = Mat2 { a: 1, b: 0, c: 0, d: 1 };
    pub const S: Mat2 = Mat2 { a: 0, b: -1, c: 1, d: 0 };
    pub const T: Mat2 = Mat2 { a: 1, b: 1, c: 0, d: 1 };

    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Mat2 {
        Mat2 { a, b, c, d }
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> i64 {
        self.a + self.d
    }

    /// Inverse of a determinant-one matrix.
    pub fn inv(&self) -> Mat2 {
        debug_assert_eq!(self.det(), 1);
        Mat2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn neg(&self) -> Mat2 {
        Mat2::new(-self.a, -self.b, -self.c, -self.d)
    }

    pub fn t_pow(k: i64) -> Mat2 {
        Mat2::new(1, k, 0, 1)
    }

    pub fn pow(&self, k: i64) -> Mat2 {
        let (base, mut e) = if k < 0 { (self.inv(), -k) } else { (*self, k) };
        let mut acc = Mat2::I;
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * b;
            }
            b = b * b;
            e >>= 1;
        }
        acc
    }

    pub fn in_gamma0(&self, n: i64) -> bool {
        self.det() == 1 && self.c % n == 0
    }

    pub fn act(&self, z: num_complex::Complex64) -> num_complex::Complex64 {
        let (a, b, c, d) = (self.a as f64, self.b as f64, self.c as f64, self.d as f64);
        (z * a + b) / (z * c + d)
    }

    /// The automorphy factor c z + d.
    pub fn j(&self, z: num_complex::Complex64) -> num_complex::Complex64 {
        z * self.c as f64 + self.d as f64
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Completes a coprime column (a, c) to a matrix in SL2(Z).
pub fn complete_column(a: i64, c: i64) -> Mat2 {
    let (g, x, y) = egcd(a, c);
    assert_eq!(g, 1, "column ({a}, {c}) is not primitive");
    // a*x + c*y = 1, so [[a, -y], [c, x]] has determinant 1.
    Mat2::new(a, -y, c, x)
}

/// Sawtooth B1(x) = x - (ceil x + floor x)/2, which vanishes at integers.
pub fn b1_rational(x: num_rational::Rational64) -> num_rational::Rational64 {
    x - (x.ceil() + x.floor()) / num_rational::Rational64::from_integer(2)
}
