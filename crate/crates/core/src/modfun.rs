//! j, j' and the third-kind differential eta = dlog(j - 1728) on SL2(Z).

use crate::arith::Mat2;
use crate::error::{domain, Error, Result};
use crate::hyperbolic::reduce_to_f;
use crate::qseries::{rat, QSeries};
use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Number of cached coefficients for floating-point evaluation.
const CACHE: usize = 64;

fn sigma(n: i64, k: u32) -> i64 {
    (1..=n).filter(|d| n % d == 0).map(|d| d.pow(k)).sum()
}

/// E4 = 1 + 240 sum sigma_3(n) q^n, `len` coefficients from q^0.
pub fn e4_series(len: usize) -> QSeries {
    let c: Vec<i64> = (0..len as i64).map(|n| if n == 0 { 1 } else { 240 * sigma(n, 3) }).collect();
    QSeries::from_ints(1, 0, &c)
}

/// E6 = 1 - 504 sum sigma_5(n) q^n.
pub fn e6_series(len: usize) -> QSeries {
    let c: Vec<i64> = (0..len as i64).map(|n| if n == 0 { 1 } else { -504 * sigma(n, 5) }).collect();
    QSeries::from_ints(1, 0, &c)
}

/// Delta = q prod (1 - q^n)^24, coefficients of q^1 .. q^len.
pub fn delta_series(len: usize) -> QSeries {
    let mut p = QSeries::one(len);
    for n in 1..len {
        let mut f = QSeries::one(len);
        f.coeffs[n] = rat(-1);
        for _ in 0..24 {
            p = p.mul(&f);
        }
    }
    p.shift(1)
}

/// j = E4^3 / Delta, coefficients of q^-1 .. q^(len-2).
pub fn j_series(len: usize) -> QSeries {
    let e4 = e4_series(len);
    e4.pow(3).div(&delta_series(len)).unwrap()
}

/// j = E6^2 / Delta + 1728, computed without E4.
pub fn j_series_from_e6(len: usize) -> QSeries {
    let e6 = e6_series(len);
    let q = e6.pow(2).div(&delta_series(len)).unwrap();
    q.add(&QSeries::from_ints(1, 0, &[1728]).add(&QSeries::zero(1, 0, len)))
}

struct Cache {
    j: Vec<f64>,
    e4: Vec<f64>,
    e6: Vec<f64>,
}

fn cache() -> &'static Cache {
    static C: OnceLock<Cache> = OnceLock::new();
    C.get_or_init(|| {
        let j = j_series(CACHE + 1);
        Cache {
            j: j.coeffs.iter().map(|c| c.to_f64().unwrap()).collect(),
            e4: e4_series(CACHE).coeffs_f64(),
            e6: e6_series(CACHE).coeffs_f64(),
        }
    })
}

fn truncation_order(y: f64, tol: f64) -> usize {
    (((1.0 / tol).ln() + 5.0) / (2.0 * PI * y)).ceil() as usize + 10
}

/// Bound on sum_{n > m} e^{4 pi sqrt n} |q|^n, which dominates the j tail.
fn j_tail_bound(m: usize, aq: f64) -> f64 {
    let mut s = 0.0;
    let lq = aq.ln();
    for n in m + 1..m + 2000 {
        let t = (4.0 * PI * (n as f64).sqrt() + n as f64 * lq).exp();
        s += t;
        if t < 1e-30 * s {
            break;
        }
    }
    s
}

fn precision_err(requested: f64, achieved: f64, context: &str) -> Error {
    Error::Precision { requested, achieved, context: context.into() }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return domain("tolerance must be positive");
    }
    Ok(())
}

/// Klein's j at z.
pub fn eval_j(z: Complex64, tol: f64) -> Result<Complex64> {
    check_tol(tol)?;
    let (w, _) = reduce_to_f(z)?;
    let c = cache();
    let m = truncation_order(w.im, tol);
    if m + 1 >= c.j.len() {
        return Err(precision_err(tol, f64::NAN, "truncation order exceeds cached j coefficients"));
    }
    let q = (Complex64::new(0.0, 2.0 * PI) * w).exp();
    let aq = q.norm();
    let tail = j_tail_bound(m, aq);
    let mut s = Complex64::zero();
    let mut scale = 0.0;
    let mut qn = 1.0 / q;
    for &cn in &c.j[..m + 2] {
        s += cn * qn;
        scale += (cn * qn).norm();
        qn *= q;
    }
    let err = tail + 8.0 * f64::EPSILON * scale;
    if err > tol {
        return Err(precision_err(tol, err, "j evaluation"));
    }
    Ok(s)
}

fn eval_series(c: &[f64], m: usize, q: Complex64) -> (Complex64, f64) {
    let mut s = Complex64::zero();
    let mut scale = 0.0;
    let mut qn = Complex64::new(1.0, 0.0);
    for &cn in &c[..m.min(c.len())] {
        s += cn * qn;
        scale += cn.abs() * qn.norm();
        qn *= q;
    }
    (s, scale)
}

/// j'(z) from the termwise derivative at the reduced point, pulled back
/// through the reducing matrix with the weight-2 factor.
pub fn eval_jprime(z: Complex64, tol: f64) -> Result<Complex64> {
    check_tol(tol)?;
    let (w, g) = reduce_to_f(z)?;
    let c = cache();
    let m = truncation_order(w.im, tol);
    if m + 1 >= c.j.len() {
        return Err(precision_err(tol, f64::NAN, "truncation order exceeds cached j coefficients"));
    }
    let q = (Complex64::new(0.0, 2.0 * PI) * w).exp();
    let mut s = Complex64::zero();
    let mut qn = 1.0 / q;
    for (k, &cn) in c.j[..m + 2].iter().enumerate() {
        s += (k as f64 - 1.0) * cn * qn;
        qn *= q;
    }
    let jp_w = Complex64::new(0.0, 2.0 * PI) * s;
    let jac = g.j(z);
    Ok(jp_w / (jac * jac))
}

/// g(z) with eta = g(z) dz and g = j'/(j - 1728) = -2 pi i E4^2/E6.
///
/// Evaluated at the reduced point w = gamma z; since dw = dz/(cz+d)^2,
/// g(z) = g(w)/(cz+d)^2.
pub fn eval_eta_jlog(z: Complex64, tol: f64) -> Result<Complex64> {
    check_tol(tol)?;
    let (w, g) = reduce_to_f(z)?;
    if (w - Complex64::i()).norm() < 1e-6 {
        return Err(Error::Domain(format!("z = {z} is within 1e-6 of a pole of eta")));
    }
    let (gw, err) = eta_reduced(w, tol);
    if err > tol {
        return Err(precision_err(tol, err, "eta evaluation"));
    }
    let jac = g.j(z);
    Ok(gw / (jac * jac))
}

/// Same as [`eval_eta_jlog`] without the pole-proximity and precision
/// checks, for integrators that subtract the pole themselves.
pub fn eta_unchecked(z: Complex64) -> Result<Complex64> {
    let (w, g) = reduce_to_f(z)?;
    let (gw, _) = eta_reduced(w, 1e-16);
    let jac = g.j(z);
    Ok(gw / (jac * jac))
}

fn eta_reduced(w: Complex64, tol: f64) -> (Complex64, f64) {
    let c = cache();
    let m = truncation_order(w.im, tol).min(c.e4.len());
    let q = (Complex64::new(0.0, 2.0 * PI) * w).exp();
    let (e4, s4) = eval_series(&c.e4, m, q);
    let (e6, s6) = eval_series(&c.e6, m, q);
    let gw = Complex64::new(0.0, -2.0 * PI) * e4 * e4 / e6;
    let rel = 8.0 * f64::EPSILON * (2.0 * s4 / e4.norm() + s6 / e6.norm());
    (gw, gw.norm() * rel)
}

/// Which differential of the third kind; this crate ships only dlog(j - 1728).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ThirdKindTag {
    Jlog,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SpecialPoint {
    I,
    Infinity,
}

/// eta = sign * dlog(j - 1728).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ThirdKindForm {
    pub tag: ThirdKindTag,
    pub sign: i32,
}

impl ThirdKindForm {
    pub fn jlog() -> Self {
        ThirdKindForm { tag: ThirdKindTag::Jlog, sign: 1 }
    }

    pub fn with_sign(sign: i32) -> Self {
        ThirdKindForm { tag: ThirdKindTag::Jlog, sign: sign.signum() }
    }

    pub fn eval(&self, z: Complex64, tol: f64) -> Result<Complex64> {
        Ok(self.sign as f64 * eval_eta_jlog(z, tol)?)
    }

    pub fn eval_unchecked(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.sign as f64 * eta_unchecked(z)?)
    }

    /// Residue of g(z) dz in the coordinate z at any lift of i; the
    /// stabilizer of i has order 2, so this is twice the orbifold residue.
    pub fn pole_residue_z(&self) -> f64 {
        2.0 * self.sign as f64
    }

    /// Residue at the class of z, in the orbifold-local coordinate at i.
    pub fn residue_at(&self, z: Complex64) -> Result<Rational64> {
        let (w, _) = reduce_to_f(z)?;
        let hit = (w - Complex64::i()).norm() < 1e-9;
        Ok(Rational64::from_integer(if hit { self.sign as i64 } else { 0 }))
    }
}

pub fn residue_divisor(form: &ThirdKindForm) -> Vec<(SpecialPoint, Rational64)> {
    let s = form.sign as i64;
    vec![(SpecialPoint::I, Rational64::from_integer(s)), (SpecialPoint::Infinity, Rational64::from_integer(-s))]
}

/// Integral of g over z(t) = c + r e^{it}, t in [0, 2 pi], by the
/// trapezoidal rule (spectrally accurate for periodic integrands).
pub fn contour_residue(c: Complex64, r: f64, samples: usize, tol: f64) -> Result<Complex64> {
    let mut s = Complex64::zero();
    for k in 0..samples {
        let t = 2.0 * PI * k as f64 / samples as f64;
        let e = Complex64::from_polar(1.0, t);
        let z = c + r * e;
        s += eval_eta_jlog(z, tol)? * Complex64::i() * r * e;
    }
    Ok(s * (2.0 * PI / samples as f64) / Complex64::new(0.0, 2.0 * PI))
}

/// Reducing matrix of a point, exposed for callers that need the cocycle.
pub fn reducing_matrix(z: Complex64) -> Result<Mat2> {
    Ok(reduce_to_f(z)?.1)
}
