//! Mock modular objects: Eichler integrals, the xi and lowering operators,
//! indefinite theta functions for lattices of signature (2,1), Ramanujan's
//! third order mock theta functions f and omega, and the theta products
//! attached to the lattice of discriminant 6.

use crate::arith::{isqrt, modp};
use crate::error::{domain, precondition, Error, Result};
use crate::qforms::{ClassTable, QuadForm};
use crate::qseries::{int, rat, QSeries};
use crate::theta::{erfc, CoeffTerm, VVSeries};
use crate::weil::{e, DiscriminantForm, VVVector};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::{BigRational, Rational64};
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

const SQRT_PI: f64 = 1.772_453_850_905_516;

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Eichler integrals and differential operators

/// Upper incomplete gamma Gamma(s, x) for s = 1/2 and s = -1/2, given as
/// `two_s` = 2s.
pub fn gamma_upper_half(two_s: i32, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return domain("incomplete gamma needs x > 0");
    }
    let g_half = SQRT_PI * erfc(x.sqrt());
    match two_s {
        1 => Ok(g_half),
        // Gamma(s + 1, x) = s Gamma(s, x) + x^s e^-x with s = -1/2
        -1 => Ok(2.0 * (x.powf(-0.5) * (-x).exp() - g_half)),
        _ => precondition(format!("incomplete gamma only for s = +-1/2, got {two_s}/2")),
    }
}

/// The nonholomorphic Eichler integral g* of a holomorphic cusp form g of
/// weight 2 - k, normalized so that xi_k g* = g:
/// g* = -sum_m conj(b(m)) (4 pi m)^(k-1) Gamma(1-k, 4 pi m v) q^(-m).
/// Only k = 1/2 and k = 3/2 are supported.
pub fn eichler_integral(g: &VVSeries, tau: Complex64, tol: f64) -> Result<VVVector> {
    if tau.im <= 0.0 {
        return domain("Eichler integral needs Im tau > 0");
    }
    let two_k = 4 - g.two_k;
    if two_k != 1 && two_k != 3 {
        return precondition(format!("unsupported weight k = {two_k}/2 for the Eichler integral"));
    }
    let k = two_k as f64 / 2.0;
    let v = tau.im;
    let mut out = vec![Complex64::zero(); g.dform.order()];
    for (&(m, h), c) in &g.coeffs {
        if c.terms.iter().any(|t| !matches!(t, CoeffTerm::Const { .. })) {
            return precondition("the shadow must have constant coefficients");
        }
        let b = c.constant_part();
        if b.norm() == 0.0 {
            continue;
        }
        if m <= Rational64::zero() {
            return precondition("the shadow must be cuspidal");
        }
        let mf = m.to_f64().unwrap();
        let x = 4.0 * PI * mf * v;
        // |term| <= |b| Gamma(1-k, x) (4 pi m)^(k-1) e^(2 pi m v)
        let gam = gamma_upper_half(2 - two_k, x)?;
        let term = -b.conj() * (4.0 * PI * mf).powf(k - 1.0) * gam * e(-mf * tau.re) * (2.0 * PI * mf * v).exp();
        if term.norm() < tol * 1e-3 {
            continue;
        }
        out[h] += term;
    }
    Ok(out)
}

/// d/d(tau bar) = (d/du + i d/dv)/2 by central differences at steps h and
/// h/2 combined by Richardson extrapolation.
pub fn dbar<F>(f: &F, tau: Complex64, step: f64) -> Result<VVVector>
where
    F: Fn(Complex64) -> VVVector,
{
    if step < 1e-10 {
        return Err(Error::Precision {
            requested: 1e-10,
            achieved: step,
            context: "finite-difference step below 1e-10".into(),
        });
    }
    if tau.im <= 2.0 * step {
        return domain("finite-difference stencil leaves the upper half-plane");
    }
    let central = |h: f64| -> VVVector {
        let du: Vec<Complex64> = f(tau + h).iter().zip(f(tau - h)).map(|(a, b)| a - b).collect();
        let ih = Complex64::new(0.0, h);
        let dv: Vec<Complex64> = f(tau + ih).iter().zip(f(tau - ih)).map(|(a, b)| a - b).collect();
        du.iter().zip(dv).map(|(a, b)| (a + Complex64::i() * b) / (4.0 * h)).collect()
    };
    let d1 = central(step);
    let d2 = central(step / 2.0);
    Ok(d1.iter().zip(d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect())
}

/// xi_k F = 2 i v^k conj(dF/d(tau bar)), with `two_k` = 2k.
pub fn xi_op<F>(f: &F, two_k: i32, tau: Complex64, step: f64) -> Result<VVVector>
where
    F: Fn(Complex64) -> VVVector,
{
    let d = dbar(f, tau, step)?;
    let vk = tau.im.powf(two_k as f64 / 2.0);
    Ok(d.into_iter().map(|c| 2.0 * Complex64::i() * vk * c.conj()).collect())
}

/// L F = -2 i v^2 dF/d(tau bar).
pub fn lowering_op<F>(f: &F, tau: Complex64, step: f64) -> Result<VVVector>
where
    F: Fn(Complex64) -> VVVector,
{
    let d = dbar(f, tau, step)?;
    let v2 = tau.im * tau.im;
    Ok(d.into_iter().map(|c| -2.0 * Complex64::i() * v2 * c).collect())
}

/// A mock modular form of weight k, given by its holomorphic part, together
/// with its shadow, a cusp form of weight 2 - k.
#[derive(Clone, Debug)]
pub struct MockPair {
    pub holo: Vec<QSeries>,
    pub shadow: VVSeries,
    /// twice the weight of the holomorphic part
    pub two_k: i32,
}

impl MockPair {
    pub fn new(holo: Vec<QSeries>, shadow: VVSeries, two_k: i32) -> Result<Self> {
        if holo.len() != shadow.dform.order() {
            return precondition("holomorphic part and shadow have different ranks");
        }
        if shadow.two_k != 4 - two_k {
            return precondition("the shadow must have weight 2 - k");
        }
        Ok(MockPair { holo, shadow, two_k })
    }

    /// The completion holo + shadow*.
    pub fn completion(&self, tau: Complex64, tol: f64) -> Result<VVVector> {
        let star = eichler_integral(&self.shadow, tau, tol)?;
        Ok(self.holo.iter().zip(star).map(|(f, s)| f.eval(tau) + s).collect())
    }
}

// ---------------------------------------------------------------------------
// Lattices of signature (2,1)

/// An even lattice of signature (2,1) given by its Gram matrix (x, y).
#[derive(Clone, Debug)]
pub struct Sig21Lattice {
    pub gram: [[i64; 3]; 3],
    pub dform: DiscriminantForm,
}

impl Sig21Lattice {
    pub fn new(gram: [[i64; 3]; 3]) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                if gram[i][j] != gram[j][i] {
                    return precondition("Gram matrix is not symmetric");
                }
            }
            if gram[i][i] % 2 != 0 {
                return precondition("lattice is not even");
            }
        }
        let ev = symmetric_eigenvalues(&gram);
        let pos = ev.iter().filter(|&&x| x > 1e-9).count();
        let neg = ev.iter().filter(|&&x| x < -1e-9).count();
        if (pos, neg) != (2, 1) {
            return precondition(format!("signature is ({pos},{neg}), not (2,1)"));
        }
        let mut lat = Sig21Lattice { gram, dform: smith_discriminant_form(&gram)? };
        // index the Gamma_0(N) lattices by B mod 2N
        if let Some(n) = lat.level() {
            lat.dform = DiscriminantForm::gamma0(n);
        }
        Ok(lat)
    }

    /// The lattice of forms [N A, 2 N B, C] in the basis (A, B, C), with
    /// Q = N B^2 - A C.
    pub fn gamma0(n: i64) -> Result<Self> {
        if n < 1 {
            return precondition("level must be positive");
        }
        Self::new([[0, 0, -1], [0, 2 * n, 0], [-1, 0, 0]])
    }

    /// Z a0 + Z a1 + Z a2 with Q(a0) = -1, Q(a1) = Q(a2) = 3.
    pub fn discriminant_six() -> Self {
        Self::new([[-2, 0, 0], [0, 6, 0], [0, 0, 6]]).unwrap()
    }

    /// N when the Gram matrix has the shape of [`Sig21Lattice::gamma0`].
    pub fn level(&self) -> Option<i64> {
        let g = &self.gram;
        let n = g[1][1] / 2;
        (n >= 1 && *g == [[0, 0, -1], [0, 2 * n, 0], [-1, 0, 0]]).then_some(n)
    }

    pub fn q(&self, x: &[i64; 3]) -> i64 {
        let mut s = 0;
        for i in 0..3 {
            for j in 0..3 {
                s += x[i] * self.gram[i][j] * x[j];
            }
        }
        s / 2
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        symmetric_eigenvalues(&self.gram)
    }
}

/// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations,
/// sorted ascending.
fn symmetric_eigenvalues(g: &[[i64; 3]; 3]) -> [f64; 3] {
    let mut a = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = g[i][j] as f64;
        }
    }
    for _ in 0..100 {
        let off: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..3 {
            for q in p + 1..3 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev = [a[0][0], a[1][1], a[2][2]];
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smith normal form: the diagonal d and a unimodular V with U G V = diag(d)
/// for some unimodular U.
fn smith(g: &[[i64; 3]; 3]) -> Result<([i64; 3], [[i64; 3]; 3])> {
    let mut m = *g;
    let mut v = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
    let col_op = |m: &mut [[i64; 3]; 3], v: &mut [[i64; 3]; 3], dst: usize, src: usize, k: i64| {
        for r in 0..3 {
            m[r][dst] -= k * m[r][src];
            v[r][dst] -= k * v[r][src];
        }
    };
    let col_swap = |m: &mut [[i64; 3]; 3], v: &mut [[i64; 3]; 3], a: usize, b: usize| {
        for r in 0..3 {
            m[r].swap(a, b);
            v[r].swap(a, b);
        }
    };
    for t in 0..3 {
        loop {
            // pivot: smallest nonzero entry of the remaining block
            let mut best = None;
            for i in t..3 {
                for j in t..3 {
                    if m[i][j] != 0 && best.is_none_or(|(bi, bj): (usize, usize)| m[i][j].abs() < m[bi][bj].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else {
                return precondition("Gram matrix is degenerate");
            };
            m.swap(t, pi);
            col_swap(&mut m, &mut v, t, pj);
            let p = m[t][t];
            let mut clean = true;
            for i in t + 1..3 {
                let q = m[i][t] / p;
                for c in 0..3 {
                    m[i][c] -= q * m[t][c];
                }
                clean &= m[i][t] == 0;
            }
            for j in t + 1..3 {
                let q = m[t][j] / p;
                col_op(&mut m, &mut v, j, t, q);
                clean &= m[t][j] == 0;
            }
            if !clean {
                continue;
            }
            // the pivot must divide the rest of the block
            let bad = (t + 1..3).flat_map(|i| (t + 1..3).map(move |j| (i, j))).find(|&(i, j)| m[i][j] % p != 0);
            match bad {
                Some((i, _)) => {
                    for c in 0..3 {
                        m[t][c] += m[i][c];
                    }
                }
                None => break,
            }
        }
        if m[t][t] < 0 {
            for r in 0..3 {
                m[r][t] = -m[r][t];
                v[r][t] = -v[r][t];
            }
        }
    }
    Ok(([m[0][0], m[1][1], m[2][2]], v))
}

/// L'/L with Q(y) = (y, y)/2, generated by V e_i / d_i for the Smith data
/// U G V = diag(d).
pub fn smith_discriminant_form(g: &[[i64; 3]; 3]) -> Result<DiscriminantForm> {
    let (d, v) = smith(g)?;
    let gens: Vec<(i64, [Rational64; 3])> =
        (0..3).filter(|&i| d[i] > 1).map(|i| (d[i], [0, 1, 2].map(|r| Rational64::new(v[r][i], d[i])))).collect();
    let bil = |x: &[Rational64; 3], y: &[Rational64; 3]| -> Rational64 {
        let mut s = Rational64::zero();
        for i in 0..3 {
            for j in 0..3 {
                s += x[i] * Rational64::from_integer(g[i][j]) * y[j];
            }
        }
        s
    };
    let k = gens.len();
    let mut q = vec![vec![Rational64::zero(); k]; k];
    for i in 0..k {
        q[i][i] = bil(&gens[i].1, &gens[i].1) / 2;
        for j in i + 1..k {
            q[i][j] = bil(&gens[i].1, &gens[j].1);
        }
    }
    if k == 0 {
        return precondition("unimodular lattices of signature (2,1) are not even");
    }
    DiscriminantForm::new(gens.iter().map(|x| x.0).collect(), q, (2, 1))
}

// ---------------------------------------------------------------------------
// Indefinite theta functions

/// An end of the path defining an indefinite theta function: a point of
/// the upper half-plane (a negative vector) or the cusp at infinity (an
/// isotropic vector).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ZEnd {
    Point(Complex64),
    Infinity,
}

impl ZEnd {
    /// sgn((X, c)), with None for X orthogonal to an isotropic c.
    fn sign(&self, f: &QuadForm) -> Option<f64> {
        match *self {
            ZEnd::Point(z) => Some(sgn(f.dpar(z))),
            ZEnd::Infinity => (f.a != 0).then(|| sgn(f.a as f64)),
        }
    }
}

fn hyperbolic_distance(z: Complex64, w: Complex64) -> f64 {
    (1.0 + (z - w).norm_sqr() / (2.0 * z.im * w.im)).acosh()
}

/// Integer forms of discriminant `disc` with |d(f, z)| <= s_max. In the
/// coordinates A' = A y, B' = 2 A x + B, C' = (A x^2 + B x + C)/y one has
/// A' + C' = d and (A' - C')^2 + B'^2 = D + d^2.
fn forms_near(disc: i64, z: Complex64, s_max: f64) -> Vec<QuadForm> {
    let (x, y) = (z.re, z.im);
    let rhs = disc as f64 + s_max * s_max;
    if rhs < 0.0 {
        return Vec::new();
    }
    let big = rhs.sqrt();
    let a_max = ((big + s_max) / 2.0 / y).floor() as i64 + 1;
    let mut out = Vec::new();
    for a in -a_max..=a_max {
        let bc = -2.0 * a as f64 * x;
        let b_lo = (bc - big).floor() as i64 - 1;
        let b_hi = (bc + big).ceil() as i64 + 1;
        for b in b_lo..=b_hi {
            if a != 0 {
                let num = b * b - disc;
                if num % (4 * a) != 0 {
                    continue;
                }
                let f = QuadForm::new(a, b, num / (4 * a));
                if f.dpar(z).abs() <= s_max {
                    out.push(f);
                }
            } else if b * b == disc {
                // d = (B x + C)/y
                let c_lo = (-(b as f64) * x - s_max * y).floor() as i64;
                let c_hi = (-(b as f64) * x + s_max * y).ceil() as i64;
                for c in c_lo..=c_hi {
                    let f = QuadForm::new(0, b, c);
                    if f.dpar(z).abs() <= s_max {
                        out.push(f);
                    }
                }
            }
        }
    }
    out
}

/// erfc(t) <= tol for t >= the returned value.
fn erfc_cut(tol: f64) -> f64 {
    (1.0 / tol).ln().sqrt() + 0.5
}

struct ZSetup {
    n: i64,
    base: Complex64,
    other: ZEnd,
    /// +-1 when the ends were swapped to put a point first
    orient: f64,
}

impl ZSetup {
    fn new(lat: &Sig21Lattice, c1: ZEnd, c2: ZEnd) -> Result<ZSetup> {
        let Some(n) = lat.level() else {
            return precondition("indefinite theta is implemented for the Gamma_0(N) lattices");
        };
        for c in [c1, c2] {
            if let ZEnd::Point(z) = c {
                if z.im <= 0.0 {
                    return domain("points must lie in the upper half-plane");
                }
            }
        }
        // a canonical base point keeps the swap exactly antisymmetric
        let (base, other, orient) = match (c1, c2) {
            (ZEnd::Point(a), ZEnd::Point(b)) => {
                if (a.re, a.im) <= (b.re, b.im) {
                    (a, c2, 1.0)
                } else {
                    (b, c1, -1.0)
                }
            }
            (ZEnd::Point(a), ZEnd::Infinity) => (a, c2, 1.0),
            (ZEnd::Infinity, ZEnd::Point(b)) => (b, c1, -1.0),
            (ZEnd::Infinity, ZEnd::Infinity) => return precondition("at least one end must be a point"),
        };
        Ok(ZSetup { n, base, other, orient })
    }

    /// Radius in d(X, base) outside of which a form of discriminant D
    /// contributes less than erfc(t_cut), and has no holomorphic weight.
    fn radius(&self, disc: i64, s_e: f64) -> f64 {
        let df = disc as f64;
        match self.other {
            ZEnd::Point(w) => {
                let delta = hyperbolic_distance(self.base, w);
                if disc > 0 {
                    df.sqrt() * ((s_e / df.sqrt()).asinh() + delta).sinh() + 1.0
                } else if disc == 0 {
                    s_e * delta.exp() + 1.0
                } else {
                    let r = df.abs().sqrt();
                    r * ((s_e / r).max(1.0).acosh() + delta).cosh() + 1.0
                }
            }
            ZEnd::Infinity => {
                if disc > 0 {
                    // a geodesic separating base from infinity passes above it
                    let top = (df.sqrt() / (2.0 * self.base.im)).ln().max(0.0);
                    s_e.max(df.sqrt() * top.sinh()) + 1.0
                } else {
                    s_e + 1.0
                }
            }
        }
    }

    /// Regularized sum over C of sgn(d(X, base))/2 for X = [0, B, C], the
    /// forms orthogonal to the cusp: sum_C sgn(C + B x)/2 = -B1(B x).
    fn orthogonal_sum(&self, b: i64) -> f64 {
        -crate::theta::b1_f64(b as f64 * self.base.re)
    }

    /// (holomorphic weight, full weight) of a form at Im tau = v.
    fn weights(&self, f: &QuadForm, v: f64) -> (f64, f64) {
        let sn = (self.n as f64).sqrt();
        let d1 = f.dpar(self.base) / sn;
        let s1 = sgn(d1);
        let t1 = s1 / 2.0 * (1.0 - erfc((PI * v).sqrt() * d1.abs()));
        let (s2, t2) = match self.other {
            ZEnd::Point(w) => {
                let d2 = f.dpar(w) / sn;
                (sgn(d2), sgn(d2) / 2.0 * (1.0 - erfc((PI * v).sqrt() * d2.abs())))
            }
            // orthogonal to the isotropic end: borrow the sign of the point
            ZEnd::Infinity => {
                let s = ZEnd::Infinity.sign(f).unwrap_or(s1);
                (s, s / 2.0)
            }
        };
        (self.orient * (s1 - s2) / 2.0, self.orient * (t1 - t2))
    }
}

/// All components of the indefinite theta function theta^{c1,c2} of the
/// Gamma_0(N) lattice at tau:
/// sum_X [sgn(X,c1) E(c1) - sgn(X,c2) E(c2)]/2 q^Q(X), where the factor E
/// is erf(sqrt(pi v)|(X, X(z))|) at a point and 1 at the cusp.
///
/// For the forms X = [0, B, C] orthogonal to the cusp the sum over C of
/// sgn(X, c1)/2 is taken zeta-regularized, -B1(B x1) for c1 = x1 + i y1, and
/// their nonholomorphic remainder -sgn(X, c1)/2 erfc(..) converges. The
/// constant -B1(h_l/beta_l) at the cusp vanishes for these lattices.
pub fn zwegers_theta_vector(lat: &Sig21Lattice, c1: ZEnd, c2: ZEnd, tau: Complex64, tol: f64) -> Result<VVVector> {
    if tau.im <= 0.0 {
        return domain("indefinite theta needs Im tau > 0");
    }
    let order = lat.dform.order();
    if c1 == c2 {
        lat.level()
            .ok_or_else(|| Error::Precondition("indefinite theta is implemented for the Gamma_0(N) lattices".into()))?;
        return Ok(vec![Complex64::zero(); order]);
    }
    let st = ZSetup::new(lat, c1, c2)?;
    let n = st.n;
    let v = tau.im;
    let inner_tol = tol * 1e-4;
    let m_max = (1.0 / inner_tol).ln() / (2.0 * PI * v) + 1.0;
    let d_max = (4.0 * n as f64 * m_max).ceil() as i64;
    let s_e = erfc_cut(inner_tol) * (n as f64).sqrt() / (PI * v).sqrt();
    let discs: Vec<i64> = (-d_max..=d_max).filter(|&d| (0..2 * n).any(|b| modp(b * b - d, 4 * n) == 0)).collect();
    let parts: Vec<VVVector> = discs
        .par_iter()
        .map(|&disc| {
            let mut acc = vec![Complex64::zero(); order];
            let m = disc as f64 / (4 * n) as f64;
            let qm = e(m * tau.re) * (-2.0 * PI * m * v).exp();
            for f in forms_near(disc, st.base, st.radius(disc, s_e)) {
                if f.a % n != 0 {
                    continue;
                }
                let (_, w) = st.weights(&f, v);
                if w != 0.0 {
                    acc[modp(f.b, 2 * n) as usize] += w * qm;
                }
            }
            acc
        })
        .collect();
    let mut out = vec![Complex64::zero(); order];
    for p in parts {
        for (o, x) in out.iter_mut().zip(p) {
            *o += x;
        }
    }
    if st.other == ZEnd::Infinity {
        let b_max = (4.0 * n as f64 * m_max).sqrt() as i64 + 1;
        for b in -b_max..=b_max {
            let m = (b * b) as f64 / (4 * n) as f64;
            let w = st.orient * st.orthogonal_sum(b);
            out[modp(b, 2 * n) as usize] += w * e(m * tau.re) * (-2.0 * PI * m * v).exp();
        }
    }
    Ok(out)
}

/// One component of [`zwegers_theta_vector`].
pub fn zwegers_theta(lat: &Sig21Lattice, c1: ZEnd, c2: ZEnd, h: usize, tau: Complex64, tol: f64) -> Result<Complex64> {
    if h >= lat.dform.order() {
        return precondition(format!("component {h} out of range"));
    }
    Ok(zwegers_theta_vector(lat, c1, c2, tau, tol)?[h])
}

/// Holomorphic coefficients of theta^{c1,c2} at q^(D/4N): per component,
/// the signed intersection numbers sum_X (sgn(X,c1) - sgn(X,c2))/2 over
/// X of discriminant D, with the regularized sums over forms orthogonal to
/// an isotropic end.
pub fn zwegers_holomorphic(lat: &Sig21Lattice, c1: ZEnd, c2: ZEnd, disc: i64) -> Result<Vec<f64>> {
    let order = lat.dform.order();
    if c1 == c2 {
        return Ok(vec![0.0; order]);
    }
    let st = ZSetup::new(lat, c1, c2)?;
    let mut out = vec![0.0; order];
    if disc <= 0 {
        return Ok(out);
    }
    for f in forms_near(disc, st.base, st.radius(disc, 0.0)) {
        if f.a % st.n != 0 {
            continue;
        }
        out[modp(f.b, 2 * st.n) as usize] += st.weights(&f, 1.0).0;
    }
    if st.other == ZEnd::Infinity {
        if let Some(k) = crate::arith::square_root(disc) {
            for b in [k, -k] {
                out[modp(b, 2 * st.n) as usize] += st.orient * st.orthogonal_sum(b);
            }
        }
    }
    Ok(out)
}

/// Signed intersection of the path from i to the cusp at infinity with the
/// cycles of one Gamma_0(N)-class: sum over the class of
/// (sgn d(Y, i) - sgn A_Y)/2, forms with A_Y = 0 contributing nothing.
pub fn class_intersection(f: &QuadForm, n: i64) -> Result<f64> {
    let disc = f.disc();
    if disc <= 0 || f.a % n != 0 {
        return precondition(format!("{f} is not an indefinite form of level {n}"));
    }
    let table = ClassTable::new(n, disc)?;
    let class = table.class_of(f)?;
    let i = Complex64::i();
    let lat = Sig21Lattice::gamma0(n)?;
    let st = ZSetup::new(&lat, ZEnd::Point(i), ZEnd::Infinity)?;
    let mut total = 0.0;
    for g in forms_near(disc, i, st.radius(disc, 0.0)) {
        if g.a % n != 0 || g.a == 0 {
            continue;
        }
        let w = st.weights(&g, 1.0).0;
        if w != 0.0 && table.class_of(&g)? == class {
            total += w;
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Mock theta functions

fn geometric_inverse(k: usize, sign: i128, len: usize) -> Vec<i128> {
    // 1/(1 - sign q^k)
    let mut out = vec![0i128; len];
    let mut p = 1i128;
    let mut e = 0;
    while e < len {
        out[e] = p;
        p *= sign;
        e += k;
    }
    out
}

/// f(q) = sum_n q^(n^2) / (-q; q)_n^2, to `n_terms` coefficients.
pub fn mock_theta_f(n_terms: usize) -> Result<QSeries> {
    if n_terms == 0 {
        return precondition("n_terms must be positive");
    }
    let len = n_terms;
    let mut total = vec![0i128; len];
    let mut denom = vec![0i128; len];
    denom[0] = 1;
    let mut n = 0usize;
    while n * n < len {
        if n > 0 {
            let mut factor = vec![0i128; len];
            factor[0] = 1;
            if n < len {
                factor[n] = 1;
            }
            denom = int::mul(&denom, &factor, len);
        }
        let inv = int::inv(&denom, len);
        let sq = int::mul(&inv, &inv, len);
        for (k, c) in sq.iter().enumerate().take(len - n * n) {
            total[k + n * n] += c;
        }
        n += 1;
    }
    Ok(QSeries::from_i128(1, 0, &total))
}

/// omega(q) = sum_n q^(2n(n+1)) / (q; q^2)_(n+1)^2.
pub fn mock_theta_omega(n_terms: usize) -> Result<QSeries> {
    if n_terms == 0 {
        return precondition("n_terms must be positive");
    }
    let len = n_terms;
    let mut total = vec![0i128; len];
    let mut denom = vec![0i128; len];
    denom[0] = 1;
    let mut n = 0usize;
    while 2 * n * (n + 1) < len {
        let k = 2 * n + 1;
        let mut factor = vec![0i128; len];
        factor[0] = 1;
        if k < len {
            factor[k] = -1;
        }
        denom = int::mul(&denom, &factor, len);
        let inv = int::inv(&denom, len);
        let sq = int::mul(&inv, &inv, len);
        let shift = 2 * n * (n + 1);
        for (j, c) in sq.iter().enumerate().take(len - shift) {
            total[j + shift] += c;
        }
        n += 1;
    }
    Ok(QSeries::from_i128(1, 0, &total))
}

/// 1/prod_{k>=1}(1 - q^(step k)) to `len` coefficients.
fn inverse_euler(step: usize, len: usize) -> Vec<i128> {
    let mut acc = vec![0i128; len];
    acc[0] = 1;
    let mut k = step;
    while k < len {
        acc = int::mul(&acc, &geometric_inverse(k, 1, len), len);
        k += step;
    }
    acc
}

/// f(q) through the Appell-Lerch form
/// (1/(q)_inf) [1 + 2 sum_{n != 0} (-1)^n q^(n(3n+1)/2) / (1 + q^n)].
pub fn mock_theta_f_appell(n_terms: usize) -> Result<QSeries> {
    if n_terms == 0 {
        return precondition("n_terms must be positive");
    }
    let len = n_terms;
    let mut sum = vec![0i128; len];
    sum[0] = 1;
    // n and -n give the same term once 1/(1 + q^-n) = q^n/(1 + q^n)
    for k in 1..len {
        let e0 = k * (3 * k + 1) / 2;
        if e0 >= len {
            break;
        }
        let sign = if k % 2 == 0 { 4 } else { -4 };
        for (j, c) in geometric_inverse(k, -1, len - e0).iter().enumerate() {
            sum[e0 + j] += sign * c;
        }
    }
    Ok(QSeries::from_i128(1, 0, &int::mul(&inverse_euler(1, len), &sum, len)))
}

/// omega(q) through the Appell-Lerch form
/// (1/(q^2;q^2)_inf) sum_{n in Z} (-1)^n q^(3n^2+3n) / (1 - q^(2n+1)).
pub fn mock_theta_omega_appell(n_terms: usize) -> Result<QSeries> {
    if n_terms == 0 {
        return precondition("n_terms must be positive");
    }
    let len = n_terms;
    let mut sum = vec![0i128; len];
    for n in 0..len {
        let sign: i128 = if n % 2 == 0 { 1 } else { -1 };
        let e0 = 3 * n * n + 3 * n;
        if e0 >= len {
            break;
        }
        let g = geometric_inverse(2 * n + 1, 1, len - e0);
        for (j, c) in g.iter().enumerate() {
            sum[e0 + j] += sign * c;
        }
    }
    // n = -k: 1/(1 - q^-(2k-1)) = -q^(2k-1)/(1 - q^(2k-1))
    for k in 1..len {
        let sign: i128 = if k % 2 == 0 { -1 } else { 1 };
        let e0 = 3 * k * k - k - 1;
        if e0 >= len {
            break;
        }
        let g = geometric_inverse(2 * k - 1, 1, len - e0);
        for (j, c) in g.iter().enumerate() {
            sum[e0 + j] += sign * c;
        }
    }
    Ok(QSeries::from_i128(1, 0, &int::mul(&inverse_euler(2, len), &sum, len)))
}

// ---------------------------------------------------------------------------
// The lattice of discriminant 6

/// Exponents live on (1/24)Z.
pub const SHIMURA_DEN: i64 = 24;

/// One component of sum_{phi(mu) = h} theta~_{N,sigma,mu0} theta_{P,mu1}
/// theta_{L2,mu2}, with h = (h0/2, h1/6, h2/6).
#[derive(Clone, Debug)]
pub struct ShimuraComponent {
    pub h: [i64; 3],
    pub fiber: Vec<[i64; 3]>,
    pub series: QSeries,
    pub min_exponent: Option<Rational64>,
}

#[derive(Clone, Debug)]
pub struct ShimuraBlock {
    pub f0: QSeries,
    pub f1: QSeries,
    pub f2: QSeries,
    /// theta~+_{N,sigma} at mu0 = j/12
    pub theta_tilde: Vec<QSeries>,
    /// sqrt 6 theta_N at mu0 = j/12, with e(-Q(lambda) tau) since N is
    /// negative definite
    pub theta_n: Vec<QSeries>,
    /// sqrt 6 (theta_N - sigma theta_N), sigma(mu0) = 5 mu0
    pub theta_n_sigma: Vec<QSeries>,
    /// theta_P at mu1 = j/4
    pub theta_p: Vec<QSeries>,
    /// theta_{L2} at mu2 = j/6
    pub theta_l2: Vec<QSeries>,
    pub components: Vec<ShimuraComponent>,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct ExponentReport {
    pub h: [i64; 3],
    pub fiber_size: usize,
    /// None when the truncated series vanishes
    pub min_exponent: Option<String>,
}

impl ShimuraBlock {
    pub fn report(&self) -> Vec<ExponentReport> {
        self.components
            .iter()
            .map(|c| ExponentReport {
                h: c.h,
                fiber_size: c.fiber.len(),
                min_exponent: c.min_exponent.map(|r| r.to_string()),
            })
            .collect()
    }

    pub fn all_decay(&self) -> bool {
        self.components.iter().all(|c| c.min_exponent.is_none_or(|m| m > Rational64::zero()))
    }
}

/// sum over lambda = j/k, j = j0 mod k, of weight(j) q^(coef j^2 / 24) up
/// to the exclusive exponent bound `prec` on the 1/24 grid.
fn unary_series(k: i64, j0: i64, coef: i64, prec: i64, weight: impl Fn(i64) -> i64) -> QSeries {
    let mut s = QSeries::zero(SHIMURA_DEN, 0, prec.max(0) as usize);
    let jmax = isqrt(prec / coef.max(1)) + 2;
    for j in -jmax..=jmax {
        if modp(j - j0, k) != 0 {
            continue;
        }
        let ex = coef * j * j;
        if ex < prec {
            s.coeffs[ex as usize] += rat(weight(j));
        }
    }
    s
}

/// Checks that every exponent of s lies in q_num/24 + Z.
fn check_grid(s: &QSeries, q_num: i64, what: &str) -> Result<()> {
    for (k, c) in s.coeffs.iter().enumerate() {
        if !c.is_zero() && modp(s.val + k as i64 - q_num, SHIMURA_DEN) != 0 {
            return Err(Error::Consistency(format!(
                "{what}: exponent {}/24 off the grid {q_num}/24 + Z",
                s.val + k as i64
            )));
        }
    }
    Ok(())
}

/// Assembles f0, f1, f2, theta~+_{N,sigma}, the unary thetas and the
/// combinations over the fibers of phi: L'/L~ -> L'/L, all up to q^n_terms.
pub fn shimura_block(n_terms: usize) -> Result<ShimuraBlock> {
    if n_terms < 24 {
        return precondition("n_terms must be at least 24");
    }
    let prec = SHIMURA_DEN * n_terms as i64 - 1;
    let to24 = |s: &QSeries| -> Result<QSeries> { Ok(s.with_den(SHIMURA_DEN)?.truncate(prec)) };
    let f = mock_theta_f(n_terms + 1)?;
    let om = mock_theta_omega(2 * n_terms + 2)?;
    let f0 = to24(&f)?.shift(-1).truncate(prec);
    let two = rat(2);
    let f1 = to24(&om.substitute(1, 1, 2)?.scale(&two))?.shift(8).truncate(prec);
    let f2 = to24(&om.substitute(-1, 1, 2)?.scale(&two))?.shift(8).truncate(prec);

    let quarter = BigRational::new(BigInt::from(-1), BigInt::from(4));
    let zero = QSeries::zero(SHIMURA_DEN, 0, prec as usize);
    let entries = [
        zero.clone(),
        f0.clone(),
        f2.sub(&f1),
        zero.clone(),
        f1.add(&f2).neg(),
        f0.neg(),
        zero.clone(),
        f0.clone(),
        f1.add(&f2),
        zero.clone(),
        f1.sub(&f2),
        f0.neg(),
    ];
    let theta_tilde: Vec<QSeries> = entries.iter().map(|s| s.scale(&quarter)).collect();
    for (j, s) in theta_tilde.iter().enumerate() {
        let j = j as i64;
        // Q(j/12 lambda0) = -6 j^2/144
        check_grid(s, -j * j, "theta~+")?;
    }

    // theta_N: lambda = (k/12) lambda0, (lambda, lambda0)/sqrt 6 = -k/sqrt 6,
    // -Q(lambda) = k^2/24
    let theta_n: Vec<QSeries> = (0..12).map(|j| unary_series(12, j, 1, prec, |k| -k)).collect();
    let theta_n_sigma: Vec<QSeries> = (0..12).map(|j| theta_n[j].sub(&theta_n[(5 * j) % 12])).collect();
    // theta_P: lambda = (k/4) lambda1, Q = 2 k^2/16 = 3 k^2/24
    let theta_p: Vec<QSeries> = (0..4).map(|j| unary_series(4, j, 3, prec, |_| 1)).collect();
    // theta_L2: lambda = (k/6) a2, Q = 3 k^2/36 = 2 k^2/24
    let theta_l2: Vec<QSeries> = (0..6).map(|j| unary_series(6, j, 2, prec, |_| 1)).collect();

    let mut components = Vec::new();
    for h0 in 0..2 {
        for h1 in 0..6 {
            for h2 in 0..6 {
                let h = [h0, h1, h2];
                let mut fiber = Vec::new();
                let mut series = QSeries::zero(SHIMURA_DEN, 0, prec as usize);
                for j0 in 0..12i64 {
                    for j1 in 0..4i64 {
                        if (j0 + j1) % 2 != 0 || phi([j0, j1, h2]) != h {
                            continue;
                        }
                        fiber.push([j0, j1, h2]);
                        let t = theta_tilde[j0 as usize].mul(&theta_p[j1 as usize]).mul(&theta_l2[h2 as usize]);
                        series = series.add(&t);
                    }
                }
                let q_num = q24(fiber[0]);
                check_grid(&series, q_num, "theta product")?;
                let min_exponent = series.min_exponent();
                components.push(ShimuraComponent { h, fiber, series, min_exponent });
            }
        }
    }
    Ok(ShimuraBlock { f0, f1, f2, theta_tilde, theta_n, theta_n_sigma, theta_p, theta_l2, components })
}

/// phi(mu) = (3 mu0 + mu1, mu0 + mu1, mu2) for mu = (j0/12, j1/4, j2/6) with
/// j0 + j1 even, as numerators over (2, 6, 6).
pub fn phi(mu: [i64; 3]) -> [i64; 3] {
    let [j0, j1, j2] = mu;
    [modp((j0 + j1) / 2, 2), modp((j0 + 3 * j1) / 2, 6), modp(j2, 6)]
}

/// 24 Q(mu) for mu = (j0/12, j1/4, j2/6).
fn q24(mu: [i64; 3]) -> i64 {
    let [j0, j1, j2] = mu;
    -j0 * j0 + 3 * j1 * j1 + 2 * j2 * j2
}

/// The elements of L'/L~: (j0/12, j1/4, j2/6) with j0 + j1 even.
pub fn shimura_cosets() -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for j0 in 0..12 {
        for j1 in 0..4 {
            if (j0 + j1) % 2 == 0 {
                for j2 in 0..6 {
                    out.push([j0, j1, j2]);
                }
            }
        }
    }
    out
}
