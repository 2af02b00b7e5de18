//! Finite quadratic modules L'/L, the Weil representation on C[L'/L], the
//! metaplectic slash action and the twist map between the level-N module and
//! its rescaled version.

use crate::arith::{modp, Mat2};
use crate::error::{precondition, Result};
use crate::qforms::{genus_character, GenusCharContext, QuadForm};
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Rational64;
use num_traits::Zero;
use serde::Serialize;
use std::f64::consts::PI;

/// Coefficients of a vector in C[L'/L], indexed by [`DiscriminantForm::index`].
pub type VVVector = Vec<Complex64>;

/// A finite quadratic module presented as a product of cyclic groups
/// Z/n_1 x ... x Z/n_k with a quadratic form Q(x) = qnum(x)/den mod 1.
#[derive(Clone, Debug)]
pub struct DiscriminantForm {
    orders: Vec<i64>,
    /// upper-triangular integer coefficients of the numerator of Q
    qn: Vec<Vec<i64>>,
    den: i64,
    signature: (u32, u32),
    roots: Vec<Complex64>,
}

pub fn e(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * x)
}

impl DiscriminantForm {
    /// `q[i][j]` (i <= j) are the coefficients of x_i x_j in Q.
    pub fn new(orders: Vec<i64>, q: Vec<Vec<Rational64>>, signature: (u32, u32)) -> Result<Self> {
        let k = orders.len();
        if q.len() != k || q.iter().any(|r| r.len() != k) || orders.iter().any(|&n| n < 1) {
            return precondition("coefficient matrix does not match the number of generators");
        }
        let den = q.iter().flatten().fold(1i64, |acc, r| acc.lcm(r.denom()));
        let qn: Vec<Vec<i64>> = (0..k)
            .map(|i| {
                (0..k).map(|j| if j < i { 0 } else { (q[i][j] * Rational64::from_integer(den)).to_integer() }).collect()
            })
            .collect();
        let roots = (0..den).map(|t| e(t as f64 / den as f64)).collect();
        let df = DiscriminantForm { orders, qn, den, signature, roots };
        df.check_well_defined()?;
        Ok(df)
    }

    fn check_well_defined(&self) -> Result<()> {
        let k = self.orders.len();
        for i in 0..k {
            let mut g = vec![0i64; k];
            g[i] = self.orders[i];
            if modp(self.qnum(&g), self.den) != 0 {
                return precondition(format!("Q(n_{i} e_{i}) is not integral"));
            }
            for j in 0..k {
                let mut u = vec![0i64; k];
                u[j] = 1;
                if modp(self.bnum(&g, &u), self.den) != 0 {
                    return precondition(format!("(n_{i} e_{i}, e_{j}) is not integral"));
                }
            }
        }
        Ok(())
    }

    /// L'/L = Z/2N for the lattice of trace-zero matrices attached to
    /// Gamma_0(N); the class of [[-B/2N, -C/N], [A, B/2N]] is B mod 2N and
    /// Q(b) = b^2/4N.
    pub fn gamma0(n: i64) -> Self {
        assert!(n >= 1);
        Self::new(vec![2 * n], vec![vec![Rational64::new(1, 4 * n)]], (2, 1)).unwrap()
    }

    /// The module L'/(Delta L) in coordinates (A mod |D|, B mod 2N|D|,
    /// C mod |D|) with form (B^2/4N - AC)/Delta. For negative Delta this has
    /// signature (1, 2).
    pub fn twisted(n: i64, delta: i64) -> Self {
        let ad = delta.abs();
        let r = |p: i64, q: i64| Rational64::new(p, q);
        let zero = Rational64::zero();
        let q = vec![vec![zero, zero, r(-1, delta)], vec![zero, r(1, 4 * n * delta), zero], vec![zero, zero, zero]];
        let sig = if delta < 0 { (1, 2) } else { (2, 1) };
        Self::new(vec![ad, 2 * n * ad, ad], q, sig).unwrap()
    }

    pub fn order(&self) -> usize {
        self.orders.iter().product::<i64>() as usize
    }

    pub fn orders(&self) -> &[i64] {
        &self.orders
    }

    pub fn signature(&self) -> (u32, u32) {
        self.signature
    }

    /// Mixed-radix coordinates of element `i`.
    pub fn element(&self, mut i: usize) -> Vec<i64> {
        let mut x = vec![0; self.orders.len()];
        for (k, &n) in self.orders.iter().enumerate().rev() {
            x[k] = (i % n as usize) as i64;
            i /= n as usize;
        }
        x
    }

    pub fn index(&self, x: &[i64]) -> usize {
        let mut i = 0usize;
        for (k, &n) in self.orders.iter().enumerate() {
            i = i * n as usize + modp(x[k], n) as usize;
        }
        i
    }

    pub fn elements(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.order()).map(|i| self.element(i))
    }

    pub fn neg_index(&self, i: usize) -> usize {
        let x: Vec<i64> = self.element(i).iter().map(|v| -v).collect();
        self.index(&x)
    }

    pub fn add_index(&self, i: usize, j: usize) -> usize {
        let (x, y) = (self.element(i), self.element(j));
        let s: Vec<i64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        self.index(&s)
    }

    fn qnum(&self, x: &[i64]) -> i64 {
        let k = x.len();
        let mut s = 0i64;
        for i in 0..k {
            for j in i..k {
                s += self.qn[i][j] * x[i] * x[j];
            }
        }
        s
    }

    fn bnum(&self, x: &[i64], y: &[i64]) -> i64 {
        let k = x.len();
        let mut s = 0i64;
        for i in 0..k {
            s += 2 * self.qn[i][i] * x[i] * y[i];
            for j in i + 1..k {
                s += self.qn[i][j] * (x[i] * y[j] + x[j] * y[i]);
            }
        }
        s
    }

    /// Q(x) mod 1 as a reduced fraction in [0, 1).
    pub fn q(&self, x: &[i64]) -> Rational64 {
        Rational64::new(modp(self.qnum(x), self.den), self.den)
    }

    pub fn q_index(&self, i: usize) -> Rational64 {
        self.q(&self.element(i))
    }

    /// (x, y) = Q(x+y) - Q(x) - Q(y) mod 1.
    pub fn bilinear(&self, x: &[i64], y: &[i64]) -> Rational64 {
        Rational64::new(modp(self.bnum(x, y), self.den), self.den)
    }

    /// The representative of Q(x) in [0,1) as a float, for the exponents of
    /// theta series.
    pub fn q_float(&self, x: &[i64]) -> f64 {
        modp(self.qnum(x), self.den) as f64 / self.den as f64
    }

    fn e_bil(&self, x: &[i64], y: &[i64], sign: i64) -> Complex64 {
        self.roots[modp(sign * self.bnum(x, y), self.den) as usize]
    }

    fn sig_phase(&self) -> Complex64 {
        let (p, m) = self.signature;
        e(-(p as f64 - m as f64) / 8.0)
    }

    pub fn rho_t(&self) -> Vec<Complex64> {
        self.elements().map(|x| self.roots[modp(self.qnum(&x), self.den) as usize]).collect()
    }

    /// Dense rho(S); only sensible for small modules.
    pub fn rho_s(&self) -> Vec<Vec<Complex64>> {
        let els: Vec<Vec<i64>> = self.elements().collect();
        let c = self.sig_phase() / (els.len() as f64).sqrt();
        els.iter().map(|x| els.iter().map(|y| c * self.e_bil(x, y, -1)).collect()).collect()
    }

    pub fn apply_t(&self, v: &[Complex64], power: i64) -> VVVector {
        self.elements()
            .zip(v)
            .map(|(x, c)| {
                let t = modp(power * self.qnum(&x), self.den) as usize;
                c * self.roots[t]
            })
            .collect()
    }

    /// rho(S)^power applied to v, power in {1, -1}; skips zero entries.
    pub fn apply_s(&self, v: &[Complex64], power: i64) -> VVVector {
        let els: Vec<Vec<i64>> = self.elements().collect();
        let nz: Vec<usize> = (0..v.len()).filter(|&j| v[j] != Complex64::zero()).collect();
        let mut c = self.sig_phase() / (els.len() as f64).sqrt();
        if power < 0 {
            c = c.conj();
        }
        els.iter()
            .map(|x| {
                let mut s = Complex64::zero();
                for &j in &nz {
                    s += self.e_bil(x, &els[j], -power.signum()) * v[j];
                }
                c * s
            })
            .collect()
    }

    /// rho_L(g) applied to v for a word in S and T.
    pub fn apply(&self, g: &Metaplectic, v: &[Complex64]) -> VVVector {
        let mut out = v.to_vec();
        for gen in g.word.iter().rev() {
            out = match gen {
                Gen::S => self.apply_s(&out, 1),
                Gen::SInv => self.apply_s(&out, -1),
                Gen::T => self.apply_t(&out, 1),
                Gen::TInv => self.apply_t(&out, -1),
            };
        }
        out
    }

    pub fn to_json(&self) -> DiscriminantFormJson {
        DiscriminantFormJson {
            order: self.order(),
            generators: self.orders.clone(),
            q_values: self.elements().map(|x| fmt_frac(self.q(&x))).collect(),
            signature: self.signature,
        }
    }
}

fn fmt_frac(r: Rational64) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct DiscriminantFormJson {
    pub order: usize,
    pub generators: Vec<i64>,
    pub q_values: Vec<String>,
    pub signature: (u32, u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gen {
    S,
    SInv,
    T,
    TInv,
}

/// An element of Mp2(Z) stored as a word in the generators (S, sqrt(tau))
/// and (T, 1). The branch of sqrt(c tau + d) is never chosen directly; it is
/// the product of the generator branches along the word.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Metaplectic {
    pub word: Vec<Gen>,
}

impl Metaplectic {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_word(word: &[Gen]) -> Self {
        Metaplectic { word: word.to_vec() }
    }

    pub fn s() -> Self {
        Self::from_word(&[Gen::S])
    }

    pub fn t() -> Self {
        Self::from_word(&[Gen::T])
    }

    pub fn compose(&self, other: &Metaplectic) -> Metaplectic {
        let mut w = self.word.clone();
        w.extend_from_slice(&other.word);
        Metaplectic { word: w }
    }

    pub fn matrix(&self) -> Mat2 {
        self.word.iter().fold(Mat2::I, |m, g| {
            m * match g {
                Gen::S => Mat2::S,
                Gen::SInv => Mat2::S.inv(),
                Gen::T => Mat2::T,
                Gen::TInv => Mat2::T.inv(),
            }
        })
    }

    /// phi(tau), a square root of c tau + d.
    pub fn phi(&self, tau: Complex64) -> Complex64 {
        let mut z = tau;
        let mut acc = Complex64::new(1.0, 0.0);
        for g in self.word.iter().rev() {
            match g {
                Gen::S => {
                    acc *= z.sqrt();
                    z = -1.0 / z;
                }
                Gen::SInv => {
                    // (S, sqrt tau)^-1 = (S^-1, 1/sqrt(-1/tau))
                    acc /= (-1.0 / z).sqrt();
                    z = -1.0 / z;
                }
                Gen::T => z += 1.0,
                Gen::TInv => z -= 1.0,
            }
        }
        acc
    }
}

/// (f |_k g)(tau) = phi(tau)^(-2k) f(M tau), with `two_k` = 2k.
pub fn slash_action<F>(f: F, two_k: i32, g: &Metaplectic, tau: Complex64) -> Result<VVVector>
where
    F: Fn(Complex64) -> VVVector,
{
    if tau.im <= 0.0 {
        return crate::error::domain("slash action needs Im tau > 0");
    }
    let m = g.matrix();
    let factor = g.phi(tau).powi(-two_k);
    Ok(f(m.act(tau)).into_iter().map(|c| c * factor).collect())
}

/// Sparse linear map e_h -> sum_delta chi(delta) e_delta.
#[derive(Clone, Debug)]
pub struct TwistMap {
    pub columns: Vec<Vec<(usize, i32)>>,
    pub target_order: usize,
}

impl TwistMap {
    pub fn apply(&self, v: &[Complex64]) -> VVVector {
        let mut out = vec![Complex64::zero(); self.target_order];
        for (h, col) in self.columns.iter().enumerate() {
            if v[h] == Complex64::zero() {
                continue;
            }
            for &(d, chi) in col {
                out[d] += v[h] * chi as f64;
            }
        }
        out
    }
}

/// The unnormalized twist map from C[L'/L] (level N) to the rescaled module
/// built by [`DiscriminantForm::twisted`]. The element (A, B, C) of the
/// target is read as the form [NA, B, C].
pub fn twist_map(dform_l: &DiscriminantForm, dform_ld: &DiscriminantForm, delta: i64, r: i64) -> Result<TwistMap> {
    let two_n = dform_l.orders()[0];
    let n = two_n / 2;
    if modp(delta - r * r, 4 * n) != 0 {
        return precondition(format!("Delta = {delta} is not r^2 = {} mod {}", r * r, 4 * n));
    }
    if dform_ld.orders() != [delta.abs(), two_n * delta.abs(), delta.abs()] {
        return precondition("target module does not match (N, Delta)");
    }
    let ctx = GenusCharContext::new(delta, r, n)?;
    let mut columns = vec![Vec::new(); dform_l.order()];
    for (di, x) in dform_ld.elements().enumerate() {
        let (a, b, c) = (x[0], x[1], x[2]);
        let h = modp(b, two_n);
        // pi(delta) = r h, so h = r^{-1} B; r is a unit mod 2N only when
        // gcd(r, 2N) = 1, so search all h instead.
        let qd = Rational64::new(b * b - 4 * n * a * c, 4 * n);
        for hh in 0..two_n {
            if modp(r * hh - h, two_n) != 0 {
                continue;
            }
            let qh = Rational64::new(hh * hh, 4 * n);
            let diff = qd / Rational64::from_integer(delta) - qh;
            if !diff.is_integer() {
                continue;
            }
            let chi = genus_character(&ctx, &QuadForm::new(n * a, b, c));
            if chi != 0 {
                columns[hh as usize].push((di, chi));
            }
        }
    }
    Ok(TwistMap { columns, target_order: dform_ld.order() })
}

/// Largest absolute entry difference between two vectors.
pub fn residual(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Unit vector e_h.
pub fn basis(n: usize, h: usize) -> VVVector {
    let mut v = vec![Complex64::zero(); n];
    v[h] = Complex64::new(1.0, 0.0);
    v
}

/// Representative of r mod 1 in [0, 1).
pub fn frac_part(r: Rational64) -> Rational64 {
    r - r.floor()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_one_module() {
        let d = DiscriminantForm::gamma0(1);
        assert_eq!(d.order(), 2);
        assert_eq!(d.q(&[0]), Rational64::zero());
        assert_eq!(d.q(&[1]), Rational64::new(1, 4));
        assert_eq!(d.signature(), (2, 1));
        let t = d.rho_t();
        assert!((t[1] - Complex64::i()).norm() < 1e-15);
    }

    #[test]
    fn bilinear_is_polarization() {
        let d = DiscriminantForm::twisted(2, -4);
        for i in (0..d.order()).step_by(7) {
            for j in (0..d.order()).step_by(11) {
                let (x, y) = (d.element(i), d.element(j));
                let s = d.element(d.add_index(i, j));
                let lhs = d.bilinear(&x, &y);
                let rhs = frac_part(d.q(&s) - d.q(&x) - d.q(&y));
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn trivial_module_s_is_signature_phase() {
        let d = DiscriminantForm::new(vec![1], vec![vec![Rational64::zero()]], (2, 1)).unwrap();
        let s = d.rho_s();
        assert!((s[0][0] - e(-1.0 / 8.0)).norm() < 1e-15);
    }

    #[test]
    fn ill_defined_form_rejected() {
        let bad = DiscriminantForm::new(vec![3], vec![vec![Rational64::new(1, 4)]], (1, 0));
        assert!(bad.is_err());
    }

    #[test]
    fn phi_of_s_squared_is_i() {
        let tau = Complex64::new(0.3, 1.7);
        let g = Metaplectic::from_word(&[Gen::S, Gen::S]);
        assert!((g.phi(tau) - Complex64::i()).norm() < 1e-14);
        let h = Metaplectic::from_word(&[Gen::S, Gen::SInv]);
        assert!((h.phi(tau) - 1.0).norm() < 1e-14);
        assert_eq!(h.matrix(), Mat2::I);
    }
}
