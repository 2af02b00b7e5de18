//! Theta objects: the unary theta series at a cusp, the Siegel theta
//! function theta_Delta, the completion Theta*_Delta and its image
//! Theta_Delta under lowering, the singular function psi~ and the periodic
//! functions g and G.

use crate::arith::{b1_rational, gcd, isqrt, modp, Mat2};
use crate::error::{domain, precondition, Error, Result};
use crate::hyperbolic::{cusp_classes, cusp_transport, split_real_part, CuspData};
use crate::modfun::ThirdKindForm;
use crate::qforms::{genus_character, is_split_hyperbolic, ClassTable, GenusCharContext, QuadForm, P1};
use crate::weil::{e, DiscriminantForm, VVVector};
use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Complementary error function (2/sqrt(pi)) int_t^inf e^{-r^2} dr.
pub fn erfc(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t < 0.0 {
        return 2.0 - erfc(-t);
    }
    if t < 0.5 {
        // erf(t) = (2/sqrt(pi)) e^{-t^2} sum 2^n t^{2n+1} / (2n+1)!!
        let t2 = t * t;
        let mut term = t;
        let mut sum = t;
        let mut n = 0.0;
        while term > 1e-18 * sum {
            n += 1.0;
            term *= 2.0 * t2 / (2.0 * n + 1.0);
            sum += term;
        }
        return 1.0 - 2.0 / SQRT_PI * (-t2).exp() * sum;
    }
    if t > 27.3 {
        return 0.0;
    }
    // e^{-t^2}/sqrt(pi) * 1/(t + (1/2)/(t + 1/(t + (3/2)/(t + ...)))) by
    // the modified Lentz method
    let tiny = 1e-300;
    let mut f = t;
    let mut c = t;
    let mut d = 0.0;
    for k in 1..20_000 {
        let a = k as f64 / 2.0;
        d = t + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = t + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 2e-16 {
            break;
        }
    }
    (-t * t).exp() / (SQRT_PI * f)
}

/// First periodic Bernoulli polynomial x - (ceil x + floor x)/2.
pub fn b1(x: Rational64) -> Rational64 {
    b1_rational(x)
}

pub fn b1_f64(x: f64) -> f64 {
    x - (x.ceil() + x.floor()) / 2.0
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GParam {
    Zero,
    Half,
}

/// g(w; kappa, s) for s in {0, 1/2}.
pub fn g_fun(w: f64, kappa: f64, s: GParam) -> Result<f64> {
    if w == 0.0 {
        return domain("g(w; kappa, s) is undefined at w = 0");
    }
    if kappa <= 0.0 {
        return domain("kappa must be positive");
    }
    Ok(match s {
        GParam::Zero => sgn(w) / 2.0 * erfc((PI * kappa).sqrt() * w.abs()),
        GParam::Half => (-PI * w * w * kappa).exp() / (2.0 * PI * w),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Direct,
    Fourier,
}

/// G(x; kappa, 0), either as sum_n g(x + n; kappa, 0) or from its Fourier
/// expansion -B1(x) + i sum_{m != 0} g(m; 1/kappa, 1/2) e(mx).
pub fn periodic_g(x: f64, kappa: f64, side: Side) -> Result<f64> {
    if kappa <= 0.0 {
        return domain("kappa must be positive");
    }
    let x0 = x - x.floor();
    if x0 == 0.0 {
        return domain("G(x; kappa, 0) is evaluated off the integers");
    }
    match side {
        Side::Direct => {
            let a = (PI * kappa).sqrt();
            // terms with x0 + n > 0 and those with x0 - n < 0, n >= 1
            let mut s = 0.0;
            let mut n = 0.0;
            loop {
                let p = erfc(a * (x0 + n));
                let q = if n >= 1.0 { erfc(a * (n - x0)) } else { 0.0 };
                s += (p - q) / 2.0;
                // remaining terms are bounded by a geometric-type tail of erfc
                let tail = erfc(a * (n + x0).min(n + 1.0 - x0)) / (1.0 - (-2.0 * a * a).exp()).max(1e-300);
                if n >= 1.0 && tail < 1e-17 {
                    break;
                }
                n += 1.0;
                if n > 1e7 {
                    return Err(Error::Precision {
                        requested: 1e-17,
                        achieved: tail,
                        context: "direct side of G".into(),
                    });
                }
            }
            Ok(s)
        }
        Side::Fourier => {
            // i g(m; 1/kappa, 1/2) e(mx) + (m -> -m) = -e^{-pi m^2/kappa} sin(2 pi m x)/(pi m)
            let mut s = -b1_f64(x0);
            let mut m = 1.0;
            loop {
                let w = (-PI * m * m / kappa).exp() / (PI * m);
                if w < 1e-18 {
                    break;
                }
                s -= w * (2.0 * PI * m * x0).sin();
                m += 1.0;
            }
            Ok(s)
        }
    }
}

/// One term of a coefficient function of v.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CoeffTerm {
    Const {
        re: f64,
        im: f64,
    },
    /// sign * erfc(scale sqrt v) / 2; `sign` is a real multiplicity.
    Erfc {
        sign: f64,
        scale: f64,
    },
    /// amp * v^{3/2} e^{-scale v}
    Gauss {
        amp: f64,
        scale: f64,
    },
}

/// A finite sum of [`CoeffTerm`]s.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoeffFn {
    pub terms: Vec<CoeffTerm>,
}

impl CoeffFn {
    pub fn constant(c: Complex64) -> Self {
        CoeffFn { terms: vec![CoeffTerm::Const { re: c.re, im: c.im }] }
    }

    pub fn eval(&self, v: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| match *t {
                CoeffTerm::Const { re, im } => Complex64::new(re, im),
                CoeffTerm::Erfc { sign, scale } => Complex64::new(sign * erfc(scale * v.sqrt()) / 2.0, 0.0),
                CoeffTerm::Gauss { amp, scale } => Complex64::new(amp * v.powf(1.5) * (-scale * v).exp(), 0.0),
            })
            .sum()
    }

    /// Constant part, the limit as v -> infinity.
    pub fn constant_part(&self) -> Complex64 {
        self.eval_filtered(|t| matches!(t, CoeffTerm::Const { .. }))
    }

    fn eval_filtered<F: Fn(&CoeffTerm) -> bool>(&self, keep: F) -> Complex64 {
        CoeffFn { terms: self.terms.iter().copied().filter(|t| keep(t)).collect() }.eval(1.0)
    }

    /// Image of c(v) e(d tau) under L = -2i v^2 d/d(tau bar), divided by
    /// e(d tau): v^2 c'(v). Erfc terms go to Gauss terms, constants to 0.
    /// Gauss terms are not closed under lowering and are rejected.
    pub fn lower(&self) -> Result<CoeffFn> {
        let mut out = Vec::new();
        for t in &self.terms {
            match *t {
                CoeffTerm::Const { .. } => {}
                CoeffTerm::Erfc { sign, scale } => {
                    out.push(CoeffTerm::Gauss { amp: -sign * scale / (2.0 * SQRT_PI), scale: scale * scale })
                }
                CoeffTerm::Gauss { .. } => return precondition("lowering of a Gauss term is not representable"),
            }
        }
        Ok(CoeffFn { terms: out })
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// A vector-valued series sum_{(m, h)} c_{m,h}(v) e(m tau) e_h.
#[derive(Clone, Debug)]
pub struct VVSeries {
    pub dform: DiscriminantForm,
    /// twice the weight
    pub two_k: i32,
    pub coeffs: BTreeMap<(Rational64, usize), CoeffFn>,
    pub m_max: Rational64,
}

impl VVSeries {
    pub fn eval(&self, tau: Complex64) -> VVVector {
        let mut out = vec![Complex64::zero(); self.dform.order()];
        for (&(m, h), c) in &self.coeffs {
            let mf = m.to_f64().unwrap();
            out[h] += c.eval(tau.im) * e(mf * tau.re) * (-2.0 * PI * mf * tau.im).exp();
        }
        out
    }

    pub fn component_is_zero(&self, h: usize) -> bool {
        self.coeffs.iter().filter(|((_, hh), _)| *hh == h).all(|(_, c)| c.eval(1.0).norm() == 0.0)
    }
}

/// Coefficients of the unary theta function at a cusp by orbit counting:
/// b(m, h) = -(sqrt N / 2 eps) sum over Gamma_l-orbits of X in L_{m,h}
/// orthogonal to l of delta_l(X).
///
/// In the frame of sigma_l such X are the forms [0, B', C'], with m = B'^2/4N,
/// delta_l = +1 for B' < 0 and -1 for B' > 0, and Gamma_l acting by
/// C' -> C' + alpha B'.
pub fn unary_theta_coefficients(cusp: &CuspData, n: i64, k_max: i64) -> BTreeMap<(Rational64, usize), f64> {
    let sigma = cusp.sigma;
    let (a, b, c, d) = (sigma.a, sigma.b, sigma.c, sigma.d);
    let alpha = cusp.width;
    let eps = cusp.eps.to_f64().unwrap();
    let pref = -(n as f64).sqrt() / (2.0 * eps);
    let mut count: BTreeMap<(Rational64, usize), i64> = BTreeMap::new();
    for k in 1..=k_max {
        let m = Rational64::new(k * k, 4 * n);
        for bp in [-k, k] {
            let delta = if bp < 0 { 1 } else { -1 };
            for cp in 0..alpha * k {
                // [0, B', C'] | sigma^{-1}
                let fa = -bp * d * c + cp * c * c;
                let fb = bp * (1 + 2 * b * c) - 2 * cp * a * c;
                if fa % n != 0 {
                    continue;
                }
                let h = modp(fb, 2 * n) as usize;
                *count.entry((m, h)).or_insert(0) += delta;
            }
        }
    }
    count.into_iter().filter(|(_, c)| *c != 0).map(|(key, c)| (key, pref * c as f64)).collect()
}

/// The same coefficients at the cusp infinity straight from the definition
/// sum_{X in K + h} (X, Re W(i)) e(Q(X) tau), where (X, Re W(i)) = B/(2 sqrt N).
pub fn unary_theta_infinity_direct(n: i64, k_max: i64) -> BTreeMap<(Rational64, usize), f64> {
    let mut sum: BTreeMap<(Rational64, usize), i64> = BTreeMap::new();
    for k in 1..=k_max {
        let m = Rational64::new(k * k, 4 * n);
        for bp in [-k, k] {
            *sum.entry((m, modp(bp, 2 * n) as usize)).or_insert(0) += bp;
        }
    }
    let w = 2.0 * (n as f64).sqrt();
    sum.into_iter().filter(|(_, b)| *b != 0).map(|(key, b)| (key, b as f64 / w)).collect()
}

/// Smallest k such that the coefficients with B' > k contribute less than
/// `tol` at Im tau >= v_min. Each coefficient at m = k^2/4N is at most
/// alpha k sqrt N / eps in absolute value, summed over both signs.
pub fn unary_theta_cutoff(cusp: &CuspData, n: i64, v_min: f64, tol: f64) -> (i64, f64) {
    let w = 2.0 * cusp.width as f64 * (n as f64).sqrt() / cusp.eps.to_f64().unwrap();
    let term = |k: f64| w * k * (-2.0 * PI * v_min * k * k / (4.0 * n as f64)).exp();
    let mut k = 1i64;
    loop {
        // tail sum_{j > k} term(j) <= term(k+1) / (1 - ratio) once terms decay
        let t1 = term((k + 1) as f64);
        let t2 = term((k + 2) as f64);
        let ratio = t2 / t1;
        if ratio < 0.9 {
            let tail = t1 / (1.0 - ratio);
            if tail < tol {
                return (k, tail);
            }
        }
        k += 1;
    }
}

/// Theta_l as a holomorphic weight 3/2 series for rho_L, L of level N,
/// truncated so the tail is below `tol` for Im tau >= v_min.
pub fn unary_theta_ell(cusp: &CuspData, n: i64, v_min: f64, tol: f64) -> Result<(VVSeries, f64)> {
    if n < 1 || v_min <= 0.0 {
        return precondition("need N >= 1 and v_min > 0");
    }
    let (k_max, tail) = unary_theta_cutoff(cusp, n, v_min, tol);
    let coeffs = unary_theta_coefficients(cusp, n, k_max)
        .into_iter()
        .map(|(key, b)| (key, CoeffFn::constant(Complex64::new(b, 0.0))))
        .collect();
    Ok((
        VVSeries { dform: DiscriminantForm::gamma0(n), two_k: 3, coeffs, m_max: Rational64::new(k_max * k_max, 4 * n) },
        tail,
    ))
}

/// Box size K for the Siegel theta sum: the summands are bounded by
/// |A + C| exp(-(2 pi v/|Delta|)(B^2 + 2A^2 + 2C^2)).
pub fn siegel_cutoff(delta: i64, v: f64, tol: f64) -> i64 {
    let ad = delta.abs() as f64;
    let mut k = 1i64;
    while siegel_tail(delta, v, k) > tol {
        k += 1;
    }
    k.max((ad / (2.0 * PI * v)).sqrt().ceil() as i64)
}

/// Bound for the terms of the Siegel sum outside the box max(|A|,|B|,|C|) <= k,
/// using |A + C| <= (1 + |A|)(1 + |C|) and summing over which coordinate
/// leaves the box.
pub fn siegel_tail(delta: i64, v: f64, k: i64) -> f64 {
    let c = 2.0 * PI * v / delta.abs() as f64;
    let sum = |w: f64, pow: i32, from: i64| -> f64 {
        let mut s = 0.0;
        let mut x = from;
        loop {
            let t = (1.0 + x as f64).powi(pow) * (-w * c * (x * x) as f64).exp();
            s += if x == 0 { t } else { 2.0 * t };
            if t < 1e-30 && x > from + 2 {
                break;
            }
            x += 1;
        }
        s
    };
    let full_a = sum(2.0, 1, 0);
    let full_b = sum(1.0, 0, 0);
    let out_a = sum(2.0, 1, k + 1);
    let out_b = sum(1.0, 0, k + 1);
    2.0 * out_a * full_b * full_a + out_b * full_a * full_a
}

/// theta_Delta(tau) = |Delta|^{-1/2} sum chi_Delta([A,B,C]) (A + C)
/// q^{-D/|Delta|} e^{-4 pi v (B^2 + (A-C)^2)/|Delta|} over the box
/// max(|A|,|B|,|C|) <= k, restricted to forms of positive discriminant.
pub fn siegel_theta_delta(delta: i64, r: i64, tau: Complex64, k: i64) -> Result<Complex64> {
    if tau.im <= 0.0 {
        return domain("Im tau must be positive");
    }
    let ctx = GenusCharContext::new(delta, r, 1)?;
    let ad = delta.abs() as f64;
    let v = tau.im;
    let rows: Vec<Complex64> = (-k..=k)
        .into_par_iter()
        .map(|a| {
            let mut s = Complex64::zero();
            for b in -k..=k {
                for c in -k..=k {
                    let disc = b * b - 4 * a * c;
                    if disc <= 0 || a + c == 0 || disc % delta != 0 {
                        continue;
                    }
                    let chi = genus_character(&ctx, &QuadForm::new(a, b, c));
                    if chi == 0 {
                        continue;
                    }
                    let dd = disc as f64 / ad;
                    let gauss = (-4.0 * PI * v * ((b * b + (a - c) * (a - c)) as f64) / ad).exp();
                    s += e(-dd * tau.re) * (2.0 * PI * dd * v).exp() * gauss * (chi as f64 * (a + c) as f64);
                }
            }
            s
        })
        .collect();
    Ok(rows.into_iter().sum::<Complex64>() / ad.sqrt())
}

/// A pole of eta on the modular curve with its residue r_zeta(eta) and a
/// matrix g in SL2(Z) with zeta = g i.
#[derive(Clone, Debug, Serialize)]
pub struct ResiduePoint {
    pub g: Mat2,
    pub residue: i64,
}

/// Points of X_0(N) above i, with residues of sign * dlog(j - 1728) in the
/// orbifold coordinate: 1 at elliptic points, 2 at the others.
pub fn residue_points(eta: &ThirdKindForm, n: i64) -> Vec<ResiduePoint> {
    let p1 = P1::new(n);
    let mut seen = vec![false; p1.len()];
    let mut out = Vec::new();
    for i in 0..p1.len() {
        if seen[i] {
            continue;
        }
        // right cosets Gamma0(N) g are indexed by the first column of g^-1
        let g = p1.lift(i).inv();
        let j = p1.coset_of(&(g * Mat2::S).inv());
        seen[i] = true;
        seen[j] = true;
        let elliptic = (g * Mat2::S * g.inv()).in_gamma0(n);
        let res = if elliptic { 1 } else { 2 };
        out.push(ResiduePoint { g, residue: res * eta.sign as i64 });
    }
    out
}

/// Residue of eta at the cusp with width alpha, in the coordinate q_l.
pub fn cusp_residue(eta: &ThirdKindForm, cusp: &CuspData) -> i64 {
    -(eta.sign as i64) * cusp.width
}

/// Integer forms Y of discriminant D with |A + C| <= s_max, i.e. with
/// |d(Y, i)| <= s_max. Uses B^2 + (A - C)^2 = D + (A + C)^2.
fn forms_near_i(disc: i64, s_max: i64) -> Vec<QuadForm> {
    let mut out = Vec::new();
    for s in -s_max..=s_max {
        let rhs = disc + s * s;
        if rhs < 0 {
            continue;
        }
        let bmax = isqrt(rhs);
        for b in -bmax..=bmax {
            let t2 = rhs - b * b;
            let t = isqrt(t2);
            if t * t != t2 {
                continue;
            }
            for t in if t == 0 { vec![0] } else { vec![t, -t] } {
                if (s + t) % 2 != 0 {
                    continue;
                }
                out.push(QuadForm::new((s + t) / 2, b, (s - t) / 2));
            }
        }
    }
    out
}

/// For each |d(X, zeta)| the sum r_zeta chi(X) sgn(d(X, zeta)) over the
/// forms X in Q_{N, -Delta d} near one of the poles, and the matching sum
/// of r_zeta chi(X) d(X, zeta).
fn shell_sums(ctx: &GenusCharContext, points: &[ResiduePoint], d: i64, s_max: i64) -> BTreeMap<i64, (i64, i64)> {
    let disc = -ctx.delta * d;
    let n = ctx.n;
    let mut out: BTreeMap<i64, (i64, i64)> = BTreeMap::new();
    for p in points {
        let ginv = p.g.inv();
        for y in forms_near_i(disc, s_max) {
            // X | g = Y, so d(X, g i) = d(Y, i) = A_Y + C_Y
            let x = y.act(&ginv);
            if x.a % n != 0 {
                continue;
            }
            let s = y.a + y.c;
            if s == 0 {
                continue;
            }
            let chi = genus_character(ctx, &x) as i64;
            if chi == 0 {
                continue;
            }
            let ent = out.entry(s.abs()).or_insert((0, 0));
            ent.0 += p.residue * chi * s.signum();
            ent.1 += p.residue * chi * s;
        }
    }
    out.retain(|_, v| v.0 != 0 || v.1 != 0);
    out
}

/// Coefficient functions per d of Theta*_Delta or Theta_Delta.
#[derive(Clone, Debug, Serialize)]
pub struct ThetaTable {
    #[serde(rename = "Delta")]
    pub delta: i64,
    #[serde(rename = "N")]
    pub n: i64,
    pub r: i64,
    /// exact constant term (cusp contribution), zero for Theta_Delta
    pub constant_term: Rational64,
    /// the sums are complete for Im tau >= v_min up to `tol`
    pub v_min: f64,
    pub tol: f64,
    pub entries: Vec<(i64, CoeffFn)>,
}

impl ThetaTable {
    pub fn eval(&self, tau: Complex64) -> Complex64 {
        let mut s = Complex64::new(self.constant_term.to_f64().unwrap(), 0.0);
        for (d, c) in &self.entries {
            s += c.eval(tau.im) * e(*d as f64 * tau.re) * (-2.0 * PI * *d as f64 * tau.im).exp();
        }
        s
    }

    pub fn coeff(&self, d: i64) -> Option<&CoeffFn> {
        self.entries.iter().find(|(dd, _)| *dd == d).map(|(_, c)| c)
    }
}

fn shell_radius(delta: i64, v_min: f64, tol: f64) -> i64 {
    ((delta.abs() as f64 * (1.0 / tol).ln() / (4.0 * PI * v_min)).sqrt() + 2.0).ceil() as i64
}

fn check_theta_args(delta: i64, r: i64, n: i64, d_max: i64, v_min: f64, tol: f64) -> Result<GenusCharContext> {
    if d_max < 0 || v_min <= 0.0 || !(tol > 0.0 && tol < 1.0) {
        return precondition("need d_max >= 0, v_min > 0 and 0 < tol < 1");
    }
    GenusCharContext::new(delta, r, n)
}

fn admissible(d: i64) -> bool {
    d > 0 && (d % 4 == 0 || d % 4 == 3)
}

/// Theta*_Delta: for each d <= d_max,
/// sum_zeta r_zeta sum_X chi(X) sgn(d(X, zeta))/2 erfc(sqrt(4 pi v/|Delta|) |d(X, zeta)|),
/// organized by shells of |d(X, zeta)|, plus the cusp constant term.
pub fn theta_star(
    delta: i64,
    r: i64,
    n: i64,
    eta: &ThirdKindForm,
    d_max: i64,
    v_min: f64,
    tol: f64,
) -> Result<ThetaTable> {
    let ctx = check_theta_args(delta, r, n, d_max, v_min, tol)?;
    let points = residue_points(eta, n);
    let s_max = shell_radius(delta, v_min, tol);
    let scale = (4.0 * PI / delta.abs() as f64).sqrt();
    let entries: Vec<(i64, CoeffFn)> = (1..=d_max)
        .into_par_iter()
        .filter(|&d| admissible(d))
        .map(|d| {
            let terms = shell_sums(&ctx, &points, d, s_max)
                .into_iter()
                .filter(|(_, (sg, _))| *sg != 0)
                .map(|(s, (sg, _))| CoeffTerm::Erfc { sign: sg as f64, scale: scale * s as f64 })
                .collect();
            (d, CoeffFn { terms })
        })
        .filter(|(_, c)| !c.is_empty())
        .collect();
    Ok(ThetaTable { delta, n, r, constant_term: cusp_constant_term(eta, &ctx)?, v_min, tol, entries })
}

/// Theta_Delta: for each d <= d_max,
/// -sqrt(v^3/|Delta|) sum_zeta r_zeta sum_X chi(X) d(X, zeta) e^{-4 pi v d(X, zeta)^2/|Delta|}.
pub fn theta_lower(
    delta: i64,
    r: i64,
    n: i64,
    eta: &ThirdKindForm,
    d_max: i64,
    v_min: f64,
    tol: f64,
) -> Result<ThetaTable> {
    let ctx = check_theta_args(delta, r, n, d_max, v_min, tol)?;
    let points = residue_points(eta, n);
    let s_max = shell_radius(delta, v_min, tol);
    let ad = delta.abs() as f64;
    let entries: Vec<(i64, CoeffFn)> = (1..=d_max)
        .into_par_iter()
        .filter(|&d| admissible(d))
        .map(|d| {
            let terms = shell_sums(&ctx, &points, d, s_max)
                .into_iter()
                .filter(|(_, (_, sd))| *sd != 0)
                .map(|(s, (_, sd))| CoeffTerm::Gauss {
                    amp: -(sd as f64) / ad.sqrt(),
                    scale: 4.0 * PI * (s * s) as f64 / ad,
                })
                .collect();
            (d, CoeffFn { terms })
        })
        .filter(|(_, c)| !c.is_empty())
        .collect();
    Ok(ThetaTable { delta, n, r, constant_term: Rational64::zero(), v_min, tol, entries })
}

/// Constant term of Theta*_Delta: sum over cusps of
/// r_l sum_t chi_Delta(t u_l) B1(t / (|Delta| beta_l)), where t runs over
/// (1/gcd(N, c^2)) Z modulo |Delta| beta_l and t u_l is the form
/// C' (c x - a y)^2 with C' = -N t.
pub fn cusp_constant_term(eta: &ThirdKindForm, ctx: &GenusCharContext) -> Result<Rational64> {
    let n = ctx.n;
    let ad = ctx.delta.abs();
    let mut total = Rational64::zero();
    for cusp in cusp_classes(n) {
        let (a, c) = (cusp.sigma.a, cusp.sigma.c);
        let step = gcd(n, c * c);
        let beta = Rational64::new(1, gcd(n, c));
        let period = beta * Rational64::from_integer(ad);
        // t = j / step for 0 <= t < period
        let count = (period * Rational64::from_integer(step)).to_integer();
        if !(period * Rational64::from_integer(step)).is_integer() {
            return Err(Error::Consistency("cusp period is not on the parameter grid".into()));
        }
        let mut s = Rational64::zero();
        for j in 0..count {
            let t = Rational64::new(j, step);
            let cp = -Rational64::from_integer(n) * t;
            if !cp.is_integer() {
                return Err(Error::Consistency("C' is not integral".into()));
            }
            let cp = cp.to_integer();
            let f = QuadForm::new(cp * c * c, -2 * cp * a * c, cp * a * a);
            let chi = genus_character(ctx, &f);
            if chi != 0 {
                s += Rational64::from_integer(chi as i64) * b1(t / period);
            }
        }
        total += Rational64::from_integer(cusp_residue(eta, &cusp)) * s;
    }
    Ok(total)
}

/// Level one constant term by the character sum
/// r_infinity sum_{C mod |Delta|} (Delta/C) B1(-C/|Delta|).
pub fn cusp_constant_term_level_one(eta: &ThirdKindForm, delta: i64) -> Result<Rational64> {
    let l0 = crate::cycles::l0(delta)?;
    Ok(Rational64::from_integer(-(eta.sign as i64)) * l0)
}

/// psi~^0(sqrt v X, z) = -sgn((X, X(z)))/2 erfc(sqrt(pi v) |(X, X(z))|) for
/// the lattice vector X of level N attached to f, where
/// (X, X(z)) = d(f, z)/sqrt(N). Vanishes on the geodesic of f.
pub fn psi_tilde(f: &QuadForm, z: Complex64, v: f64, n: i64) -> Result<f64> {
    if z.im <= 0.0 || v <= 0.0 || n < 1 {
        return domain("psi~ needs Im z > 0, v > 0 and N >= 1");
    }
    let x = f.dpar(z) / (n as f64).sqrt();
    Ok(-sgn(x) / 2.0 * erfc((PI * v).sqrt() * x.abs()))
}

/// The sum of psi~^0(sqrt v Y, z) over the Gamma_0(N)-class of a split form
/// X, by enumerating all forms of the class with |d(Y, z)| below a cutoff
/// past which erfc is negligible. Returns (value, tail bound).
pub fn split_orbit_sum(f: &QuadForm, n: i64, z: Complex64, v: f64, tol: f64) -> Result<(f64, f64)> {
    if !is_split_hyperbolic(f) || f.a % n != 0 {
        return precondition(format!("{f} is not a split form of level {n}"));
    }
    let disc = f.disc();
    let table = ClassTable::new(n, disc)?;
    let class = table.class_of(f)?;
    // |d| <= r_cut keeps every term above tol
    let r_cut = ((n as f64) * (1.0 / tol).ln() / (PI * v)).sqrt() + 1.0;
    let (x, y) = (z.re, z.im);
    // in the coordinates A' = A y, B' = 2 A x + B, C' = (A x^2 + B x + C)/y
    // we have |A' + C'| <= r_cut and B'^2 + (A' - C')^2 = D + (A' + C')^2
    let big = (disc as f64 + r_cut * r_cut).sqrt();
    let a_max = ((big + r_cut) / 2.0 / y).floor() as i64;
    let mut total = 0.0;
    let mut count = 0usize;
    for a in -a_max..=a_max {
        if a % n != 0 {
            continue;
        }
        let bc = -2.0 * a as f64 * x;
        let b_lo = (bc - big).floor() as i64;
        let b_hi = (bc + big).ceil() as i64;
        for b in b_lo..=b_hi {
            let cands: Vec<i64> = if a != 0 {
                let num = b * b - disc;
                if num % (4 * a) != 0 {
                    continue;
                }
                vec![num / (4 * a)]
            } else {
                if b * b != disc {
                    continue;
                }
                // |C'| <= (big + r_cut)/2 gives a range of C
                let w = (big + r_cut) / 2.0 * y;
                let c0 = -(b as f64) * x;
                ((c0 - w).floor() as i64..=(c0 + w).ceil() as i64).collect()
            };
            for c in cands {
                let g = QuadForm::new(a, b, c);
                if g.dpar(z).abs() > r_cut * (n as f64).sqrt() {
                    continue;
                }
                if table.class_of(&g)? != class {
                    continue;
                }
                total += psi_tilde(&g, z, v, n)?;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Consistency("no form of the class near z".into()));
    }
    Ok((total, tol))
}

/// The sum of psi~^0(sqrt v gamma^{-1} X, z) over gamma in Gamma_l, the
/// stabilizer of l_X, for z = sigma_l (x + i y). Each term is
/// psi~^0 of sqrt(vm/N) [[1, 2(-r + alpha n)], [0, -1]] at x + i y.
pub fn cusp_orbit_sum(f: &QuadForm, n: i64, x: f64, y: f64, v: f64) -> Result<f64> {
    let sd = split_real_part(f, n)?;
    let g = f.act(&sd.sigma);
    let z = Complex64::new(x, y);
    let alpha = sd.width;
    let mut s = psi_tilde(&g, z, v, n)?;
    let mut k = 1i64;
    loop {
        let p = psi_tilde(&g.act(&Mat2::t_pow(k * alpha)), z, v, n)?;
        let m = psi_tilde(&g.act(&Mat2::t_pow(-k * alpha)), z, v, n)?;
        s += p + m;
        if p.abs() + m.abs() < 1e-18 && k > 2 {
            break;
        }
        k += 1;
        if k > 10_000_000 {
            return Err(Error::Precision {
                requested: 1e-18,
                achieved: p.abs() + m.abs(),
                context: "cusp orbit sum".into(),
            });
        }
    }
    Ok(s)
}

/// The vertical geodesics through the cusp l_X among the class of a split
/// form X, as (sign, w, r, alpha): sign = -1 for the Gamma_l-orbit of X itself,
/// +1 for the orbit of a translate of -X when l_{-X} is Gamma_0(N)-equivalent
/// to l_X; w = sigma^{-1} z in the matching frame.
fn boundary_orbits(f: &QuadForm, n: i64, z: Complex64) -> Result<Vec<(f64, Complex64, f64, f64)>> {
    let sd = split_real_part(f, n)?;
    let alpha = sd.width as f64;
    let mut out = vec![(-1.0, sd.sigma.inv().act(z), sd.r.to_f64().unwrap(), alpha)];
    let negf = f.neg();
    let sd2 = split_real_part(&negf, n)?;
    if let Some(g) = cusp_transport(&sd2.cusp, &sd.cusp, n) {
        // g maps l_{-X} to l_X; the form (-X)|g^{-1} has l = l_X
        let sd3 = split_real_part(&negf.act(&g.inv()), n)?;
        out.push((1.0, sd3.sigma.inv().act(z), sd3.r.to_f64().unwrap(), alpha));
    }
    Ok(out)
}

/// Leading term of the orbit sum of psi~^0 near the cusp l_X of a split form
/// X at z: -B1((x_l - r_X)/alpha), plus B1((x_l - r_{-X})/alpha) when l_{-X}
/// is Gamma_0(N)-equivalent to l_X, with x_l = Re sigma^{-1} z.
pub fn boundary_asymptotic(f: &QuadForm, n: i64, z: Complex64) -> Result<f64> {
    Ok(boundary_orbits(f, n, z)?.into_iter().map(|(sign, w, r, alpha)| sign * b1_f64((w.re - r) / alpha)).sum())
}

/// The same orbit sums before the limit: each Gamma_l-orbit contributes
/// -sign G((x_l - r)/alpha; 4 m v alpha^2 / y_l^2, 0) with m = D/4N.
pub fn boundary_periodic(f: &QuadForm, n: i64, z: Complex64, v: f64) -> Result<f64> {
    let m = f.disc() as f64 / (4.0 * n as f64);
    let mut s = 0.0;
    for (sign, w, r, alpha) in boundary_orbits(f, n, z)? {
        let kappa = 4.0 * m * v * alpha * alpha / (w.im * w.im);
        s += -sign * periodic_g((w.re - r) / alpha, kappa, Side::Fourier)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_basics() {
        assert_eq!(erfc(0.0), 1.0);
        for t in [0.3, 1.0, 2.5, 6.0] {
            assert!((erfc(-t) - (2.0 - erfc(t))).abs() < 1e-15);
        }
    }

    #[test]
    fn b1_values() {
        assert_eq!(b1(Rational64::new(1, 4)), Rational64::new(-1, 4));
        assert_eq!(b1(Rational64::zero()), Rational64::zero());
        assert_eq!(b1(Rational64::new(1, 2)), Rational64::zero());
        assert_eq!(b1_f64(0.25), -0.25);
    }

    #[test]
    fn g_special_values() {
        let a = g_fun(1.0, 1.0, GParam::Zero).unwrap();
        assert!((a - erfc(PI.sqrt()) / 2.0).abs() < 1e-16);
        assert_eq!(g_fun(-0.7, 2.0, GParam::Zero).unwrap(), -g_fun(0.7, 2.0, GParam::Zero).unwrap());
        let b = g_fun(1.0, 1.0, GParam::Half).unwrap();
        assert!((b - (-PI).exp() / (2.0 * PI)).abs() < 1e-16);
        assert!(g_fun(0.0, 1.0, GParam::Zero).is_err());
    }

    #[test]
    fn coeff_json_shape() {
        let c = CoeffFn {
            terms: vec![
                CoeffTerm::Const { re: 1.0, im: 0.0 },
                CoeffTerm::Erfc { sign: 1.0, scale: 2.0 },
                CoeffTerm::Gauss { amp: 0.5, scale: 3.0 },
            ],
        };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(
            s,
            r#"[{"type":"const","re":1.0,"im":0.0},{"type":"erfc","sign":1.0,"scale":2.0},{"type":"gauss","amp":0.5,"scale":3.0}]"#
        );
        let back: CoeffFn = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn forms_near_i_are_complete() {
        let disc = 12;
        let got = forms_near_i(disc, 4);
        let mut brute = Vec::new();
        for a in -20i64..=20 {
            for b in -20i64..=20 {
                for c in -20i64..=20 {
                    if b * b - 4 * a * c == disc && (a + c).abs() <= 4 {
                        brute.push(QuadForm::new(a, b, c));
                    }
                }
            }
        }
        let mut g = got.clone();
        g.sort();
        brute.sort();
        assert_eq!(g, brute);
    }

    #[test]
    fn dpar_transforms_with_the_right_action() {
        let f = QuadForm::new(2, 5, -3);
        let g = Mat2::new(2, 1, 3, 2);
        let z = Complex64::new(0.3, 0.8);
        assert!((f.dpar(g.act(z)) - f.act(&g).dpar(z)).abs() < 1e-12);
    }

    #[test]
    fn residue_points_level_one_and_two() {
        let eta = ThirdKindForm::jlog();
        let p = residue_points(&eta, 1);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].residue, 1);
        // X_0(2) has one elliptic point of order 2 above i; total degree 3
        let p = residue_points(&eta, 2);
        let total: i64 = p.iter().map(|x| x.residue).sum();
        assert_eq!(total, 3);
    }
}
