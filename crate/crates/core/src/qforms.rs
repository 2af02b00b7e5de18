//! Integral binary quadratic forms [A, B, C], their Gamma_0(N)-classes,
//! automorphs and genus characters.

use crate::arith::{complete_column, gcd, is_fundamental, isqrt, kronecker, modp, square_root, Mat2};
use crate::error::{precondition, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuadForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl fmt::Display for QuadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}]", self.a, self.b, self.c)
    }
}

impl QuadForm {
    pub const fn new(a: i64, b: i64, c: i64) -> Self {
        QuadForm { a, b, c }
    }

    pub fn disc(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    pub fn eval(&self, x: i64, y: i64) -> i64 {
        self.a * x * x + self.b * x * y + self.c * y * y
    }

    /// f|g (x, y) = f(a x + b y, c x + d y). This is a right action and the
    /// geodesic of f|g is g^{-1} applied to the geodesic of f.
    pub fn act(&self, g: &Mat2) -> QuadForm {
        let w = |x: i64| x as i128;
        let (a, b, c, d) = (w(g.a), w(g.b), w(g.c), w(g.d));
        let (fa, fb, fc) = (w(self.a), w(self.b), w(self.c));
        let n = |x: i128| i64::try_from(x).expect("form coefficient overflow");
        QuadForm {
            a: n(fa * a * a + fb * a * c + fc * c * c),
            b: n(2 * fa * a * b + fb * (a * d + b * c) + 2 * fc * c * d),
            c: n(fa * b * b + fb * b * d + fc * d * d),
        }
    }

    pub fn neg(&self) -> QuadForm {
        QuadForm::new(-self.a, -self.b, -self.c)
    }

    pub fn content(&self) -> i64 {
        gcd(gcd(self.a, self.b), self.c)
    }

    pub fn scale_down(&self, g: i64) -> QuadForm {
        QuadForm::new(self.a / g, self.b / g, self.c / g)
    }

    /// Evaluates d(f, z) = (A|z|^2 + B Re z + C) / Im z.
    pub fn dpar(&self, z: num_complex::Complex64) -> f64 {
        (self.a as f64 * z.norm_sqr() + self.b as f64 * z.re + self.c as f64) / z.im
    }

    /// Sort key for the canonical representative.
    fn key(&self) -> (i64, i64, i64, i64, i64) {
        (self.a.abs(), self.a, self.b.abs(), self.b, self.c)
    }

    /// Translates by a power of T so that B lies in (-|A|, |A|], or, when
    /// A = 0, so that C lies in [0, |B|).
    pub fn t_normalize(&self) -> QuadForm {
        if self.a != 0 {
            let two_a = 2 * self.a.abs();
            // B + 2Am for m chosen to land in (-|A|, |A|]
            let target = modp(self.b + self.a.abs() - 1, two_a) - self.a.abs() + 1;
            let m = (target - self.b) / (2 * self.a);
            self.act(&Mat2::t_pow(m))
        } else if self.b != 0 {
            let c = modp(self.c, self.b.abs());
            QuadForm::new(0, self.b, c)
        } else {
            *self
        }
    }
}

pub fn discriminant(f: &QuadForm) -> i64 {
    f.disc()
}

pub fn is_split_hyperbolic(f: &QuadForm) -> bool {
    let d = f.disc();
    d > 0 && square_root(d).is_some()
}

pub fn gamma0n_action(g: &Mat2, f: &QuadForm, n: i64) -> Result<QuadForm> {
    if !g.in_gamma0(n) {
        return precondition(format!("{g} is not in Gamma_0({n})"));
    }
    Ok(f.act(g))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GenusCharContext {
    pub delta: i64,
    pub r: i64,
    pub n: i64,
}

impl GenusCharContext {
    pub fn new(delta: i64, r: i64, n: i64) -> Result<Self> {
        if delta >= 0 || !is_fundamental(delta) {
            return Err(Error::NotFundamental(delta));
        }
        if n < 1 || modp(delta - r * r, 4 * n) != 0 {
            return precondition(format!("Delta = {delta} is not congruent to r^2 = {} mod {}", r * r, 4 * n));
        }
        Ok(GenusCharContext { delta, r, n })
    }
}

fn is_square_mod(x: i64, m: i64) -> bool {
    (0..m).any(|t| modp(t * t - x, m) == 0)
}

/// The genus character on forms [A, B, C] with N | A: the Kronecker symbol
/// (Delta/n) for any n prime to Delta represented by some [N1 A/N, B, N2 C]
/// with N1 N2 = N, or 0 if Delta does not divide the discriminant D, D/Delta
/// is not a square mod 4N, or gcd(A/N, B, C, Delta) > 1.
pub fn genus_character(ctx: &GenusCharContext, f: &QuadForm) -> i32 {
    let (delta, n) = (ctx.delta, ctx.n);
    if f.a % n != 0 {
        return 0;
    }
    let d = f.disc();
    if d % delta != 0 || !is_square_mod(d / delta, 4 * n) {
        return 0;
    }
    let a0 = f.a / n;
    if gcd(gcd(a0, f.b), gcd(f.c, delta)) != 1 {
        return 0;
    }
    let bound = 2 * delta.abs() + 2;
    for n1 in (1..=n).filter(|k| n % k == 0) {
        let g = QuadForm::new(n1 * a0, f.b, (n / n1) * f.c);
        for s in 1..=bound {
            for x in -s..=s {
                for y in [-s, s] {
                    for (p, q) in [(x, y), (y, x)] {
                        if gcd(p, q) != 1 {
                            continue;
                        }
                        let v = g.eval(p, q);
                        if v != 0 && gcd(v, delta) == 1 {
                            return kronecker(delta, v);
                        }
                    }
                }
            }
        }
    }
    // unreachable when gcd(A/N, B, C, Delta) = 1
    0
}

/// Zagier-reduced: A > 0, C > 0, B > A + C.
pub fn is_zagier_reduced(f: &QuadForm) -> bool {
    f.a > 0 && f.c > 0 && f.b > f.a + f.c
}

/// One step of the Zagier reduction map f -> f|[[0,-1],[1,n]] with
/// n = ceil((B + sqrt D)/(2C)). Requires non-square D and C != 0.
fn zagier_step(f: &QuadForm, s: i64) -> (QuadForm, Mat2) {
    let num = f.b + s;
    let n = if f.c > 0 { num.div_euclid(2 * f.c) + 1 } else { -num.div_euclid(-2 * f.c) };
    let g = Mat2::new(0, -1, 1, n);
    (f.act(&g), g)
}

/// Reduces a form of positive non-square discriminant to a Zagier-reduced
/// form; returns (reduced, g) with f|g = reduced.
pub fn zagier_reduce(f: &QuadForm) -> Result<(QuadForm, Mat2)> {
    let d = f.disc();
    if d <= 0 || square_root(d).is_some() {
        return precondition(format!("{f} does not have positive non-square discriminant"));
    }
    let s = isqrt(d);
    let mut cur = *f;
    let mut g = Mat2::I;
    for _ in 0..100_000 {
        if is_zagier_reduced(&cur) {
            return Ok((cur, g));
        }
        let (next, step) = zagier_step(&cur, s);
        cur = next;
        g = g * step;
    }
    Err(Error::Consistency(format!("reduction of {f} did not terminate")))
}

/// All Zagier-reduced forms of discriminant d (positive, non-square),
/// grouped into cycles of the reduction map. Each cycle is one SL2(Z) class;
/// cycles are listed by their smallest member and start with it.
pub fn reduced_cycles(d: i64) -> Vec<Vec<QuadForm>> {
    let s = isqrt(d);
    let mut reduced = Vec::new();
    // B + A + C <= D bounds the search
    let mut b = s + 1;
    while b <= d.max(s + 2) {
        if (b * b - d) % 4 == 0 {
            let ac = (b * b - d) / 4;
            for a in 1..=ac {
                if ac % a == 0 && a + ac / a < b {
                    reduced.push(QuadForm::new(a, b, ac / a));
                }
            }
        }
        b += 1;
    }
    reduced.sort();
    let mut seen = std::collections::HashSet::new();
    let mut cycles = Vec::new();
    for f in &reduced {
        if seen.contains(f) {
            continue;
        }
        let mut cyc = vec![*f];
        seen.insert(*f);
        let mut cur = zagier_step(f, s).0;
        while cur != *f {
            seen.insert(cur);
            cyc.push(cur);
            cur = zagier_step(&cur, s).0;
        }
        cycles.push(cyc);
    }
    cycles
}

/// Generator of the SL2(Z)-stabilizer of a form with positive non-square
/// discriminant: the product of the reduction steps around the cycle of a
/// reduced form, conjugated back to f. It has the shape
/// [[(t - B0 u)/2, -C0 u], [A0 u, (t + B0 u)/2]] for the fundamental solution
/// of t^2 - D0 u^2 = 4, D0 the discriminant of the primitive part.
pub fn sl2_automorph(f: &QuadForm) -> Result<Mat2> {
    let d = f.disc();
    if d <= 0 || square_root(d).is_some() {
        return precondition(format!("{f} has no infinite stabilizer"));
    }
    let (r, g) = zagier_reduce(f)?;
    let s = isqrt(d);
    let mut cur = r;
    let mut p = Mat2::I;
    loop {
        let (next, step) = zagier_step(&cur, s);
        p = p * step;
        cur = next;
        if cur == r {
            break;
        }
    }
    let out = g * p * g.inv();
    debug_assert_eq!(f.act(&out), *f);
    Ok(out)
}

/// The automorph of f in Gamma_0(N), or None for split forms. When N | A
/// the SL2(Z) generator already lies in Gamma_0(N).
pub fn automorph(f: &QuadForm, n: i64) -> Result<Option<Mat2>> {
    if f.disc() <= 0 {
        return precondition(format!("{f} is not indefinite"));
    }
    if is_split_hyperbolic(f) {
        return Ok(None);
    }
    let g = sl2_automorph(f)?;
    let mut p = g;
    let mut k = 1;
    while !p.in_gamma0(n) {
        p = p * g;
        k += 1;
        if k > 4 * n * n {
            return Err(Error::Consistency(format!("no power of {g} lies in Gamma_0({n})")));
        }
    }
    Ok(Some(p))
}

/// Points of P^1(Z/N): first columns of coset representatives of
/// SL2(Z)/Gamma_0(N).
#[derive(Clone, Debug)]
pub struct P1 {
    pub n: i64,
    points: Vec<(i64, i64)>,
    index: HashMap<(i64, i64), usize>,
    units: Vec<i64>,
}

impl P1 {
    pub fn new(n: i64) -> Self {
        let units: Vec<i64> = (1..=n.max(1)).filter(|&u| gcd(u, n) == 1).map(|u| u % n.max(1)).collect();
        let mut p = P1 { n, points: Vec::new(), index: HashMap::new(), units };
        let mut pts = Vec::new();
        for a in 0..n {
            for c in 0..n {
                if gcd(gcd(a, c), n) == 1 {
                    let k = p.normalize(a, c);
                    if k == (modp(a, n), modp(c, n)) {
                        pts.push(k);
                    }
                }
            }
        }
        if n == 1 {
            pts = vec![(0, 0)];
        }
        for (i, k) in pts.iter().enumerate() {
            p.index.insert(*k, i);
        }
        p.points = pts;
        p
    }

    fn normalize(&self, a: i64, c: i64) -> (i64, i64) {
        if self.n == 1 {
            return (0, 0);
        }
        self.units.iter().map(|&u| (modp(u * a, self.n), modp(u * c, self.n))).min().unwrap()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> (i64, i64) {
        self.points[i]
    }

    pub fn coset_of(&self, g: &Mat2) -> usize {
        let k = self.normalize(g.a, g.c);
        self.index[&k]
    }

    /// An SL2(Z) matrix whose first column reduces to point i.
    pub fn lift(&self, i: usize) -> Mat2 {
        if self.n == 1 {
            return Mat2::I;
        }
        let (a, c) = self.points[i];
        let n = self.n;
        for k in 0..=n * n {
            for j in 0..=k {
                for (s1, s2) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                    let aa = a + s1 * j * n;
                    let cc = c + s2 * (k - j) * n;
                    if gcd(aa, cc) == 1 {
                        return complete_column(aa, cc);
                    }
                }
            }
        }
        unreachable!("P^1 point without a primitive lift")
    }
}

/// Gamma_0(N)-classes inside one SL2(Z)-class, described by a base form f0
/// (with f0|g_x ranging over the admissible cosets) and the orbit structure.
#[derive(Clone, Debug)]
struct Sl2Block {
    base: QuadForm,
    /// cycle of reduced forms, for non-square discriminants
    cycle: Vec<QuadForm>,
    /// prefix[k] = product of the first k reduction steps from the base
    prefix: Vec<Mat2>,
    eps: Option<Mat2>,
    /// coset index -> class id within this block
    orbit_of: BTreeMap<usize, usize>,
    reps: Vec<QuadForm>,
}

/// Class data for Gamma_0(N) \ Q_{N,D}.
#[derive(Clone, Debug)]
pub struct ClassTable {
    pub n: i64,
    pub d: i64,
    p1: P1,
    blocks: Vec<Sl2Block>,
}

impl ClassTable {
    pub fn new(n: i64, d: i64) -> Result<Self> {
        if d <= 0 {
            return precondition(format!("discriminant {d} is not positive"));
        }
        if n < 1 {
            return precondition("level must be positive");
        }
        let p1 = P1::new(n);
        if modp(d, 4) > 1 {
            return Ok(ClassTable { n, d, p1, blocks: Vec::new() });
        }
        let bases: Vec<(QuadForm, Vec<QuadForm>)> = match square_root(d) {
            Some(k) => (0..k).map(|c| (QuadForm::new(0, k, c), Vec::new())).collect(),
            None => reduced_cycles(d).into_iter().map(|cyc| (cyc[0], cyc)).collect(),
        };
        let mut blocks = Vec::new();
        for (base, cycle) in bases {
            let eps = if cycle.is_empty() { None } else { Some(sl2_automorph(&base)?) };
            let admissible: Vec<usize> = (0..p1.len())
                .filter(|&i| {
                    let (a, c) = p1.point(i);
                    modp(base.eval(a, c), n) == 0
                })
                .collect();
            let mut orbit_of = BTreeMap::new();
            let mut reps = Vec::new();
            for &x in &admissible {
                if orbit_of.contains_key(&x) {
                    continue;
                }
                let id = reps.len();
                let mut members = vec![x];
                orbit_of.insert(x, id);
                if let Some(e) = eps {
                    let mut y = p1.coset_of(&(e * p1.lift(x)));
                    while y != x {
                        orbit_of.insert(y, id);
                        members.push(y);
                        y = p1.coset_of(&(e * p1.lift(y)));
                    }
                }
                let rep = members.iter().map(|&m| base.act(&p1.lift(m)).t_normalize()).min_by_key(|f| f.key()).unwrap();
                reps.push(rep);
            }
            let mut prefix = vec![Mat2::I];
            if !cycle.is_empty() {
                let s = isqrt(d);
                let mut cur = base;
                for _ in 0..cycle.len() {
                    let (next, step) = zagier_step(&cur, s);
                    prefix.push(*prefix.last().unwrap() * step);
                    cur = next;
                }
            }
            blocks.push(Sl2Block { base, cycle, prefix, eps, orbit_of, reps });
        }
        Ok(ClassTable { n, d, p1, blocks })
    }

    /// Class representatives, sorted by the canonical key.
    pub fn representatives(&self) -> Vec<QuadForm> {
        let mut v: Vec<QuadForm> = self.blocks.iter().flat_map(|b| b.reps.iter().copied()).collect();
        v.sort_by_key(|f| f.key());
        v
    }

    /// (block, class-in-block) of a form in Q_{N,D}.
    fn locate(&self, f: &QuadForm) -> Result<(usize, usize)> {
        if f.disc() != self.d || f.a % self.n != 0 {
            return precondition(format!("{f} is not in Q_({}, {})", self.n, self.d));
        }
        let (bi, h) = self.sl2_to_base(f)?;
        // f|h = base, so f = base|h^{-1} and f lies in the class of the coset of h^{-1}
        let x = self.p1.coset_of(&h.inv());
        let cls = self.blocks[bi]
            .orbit_of
            .get(&x)
            .copied()
            .ok_or_else(|| Error::Consistency(format!("coset of {f} is not admissible")))?;
        Ok((bi, cls))
    }

    /// Finds the block and h in SL2(Z) with f|h equal to the block base.
    fn sl2_to_base(&self, f: &QuadForm) -> Result<(usize, Mat2)> {
        match square_root(self.d) {
            Some(k) => {
                let (g, f1) = split_normal_form(f, k);
                let bi = self
                    .blocks
                    .iter()
                    .position(|b| b.base == f1)
                    .ok_or_else(|| Error::Consistency(format!("no split block for {f}")))?;
                Ok((bi, g))
            }
            None => {
                let (r, g) = zagier_reduce(f)?;
                for (bi, b) in self.blocks.iter().enumerate() {
                    if let Some(pos) = b.cycle.iter().position(|x| *x == r) {
                        // r = base|prefix[pos], and prefix[len] is an automorph
                        // of base; use whichever route back is smaller.
                        let back = b.prefix[pos].inv();
                        let fwd = back * b.prefix[b.cycle.len()];
                        let size = |m: &Mat2| m.a.abs().max(m.b.abs()).max(m.c.abs()).max(m.d.abs());
                        let h = g * if size(&back) <= size(&fwd) { back } else { fwd };
                        return Ok((bi, h));
                    }
                }
                Err(Error::Consistency(format!("reduced form {r} not in any cycle")))
            }
        }
    }

    /// The representative of the class of f.
    pub fn class_of(&self, f: &QuadForm) -> Result<QuadForm> {
        let (bi, c) = self.locate(f)?;
        Ok(self.blocks[bi].reps[c])
    }

    pub fn equivalent(&self, f: &QuadForm, g: &QuadForm) -> Result<bool> {
        Ok(self.locate(f)? == self.locate(g)?)
    }

    /// Some gamma in Gamma_0(N) with f|gamma = g, if the forms are equivalent.
    pub fn transport(&self, f: &QuadForm, g: &QuadForm) -> Result<Option<Mat2>> {
        let (bf, hf) = self.sl2_to_base(f)?;
        let (bg, hg) = self.sl2_to_base(g)?;
        if bf != bg {
            return Ok(None);
        }
        // f|hf = g|hg = base, so f|(hf eps^k hg^{-1}) = g for any k.
        let eps = self.blocks[bf].eps;
        let period = match eps {
            Some(_) => 4 * self.p1.len().max(1) as i64 + 4,
            None => 1,
        };
        for k in 0..period {
            for sign in [1, -1] {
                let e = eps.map(|e| e.pow(k)).unwrap_or(Mat2::I);
                let mut m = hf * e * hg.inv();
                if sign < 0 {
                    m = m.neg();
                }
                if m.in_gamma0(self.n) && f.act(&m) == *g {
                    return Ok(Some(m));
                }
            }
        }
        Ok(None)
    }
}

/// For square discriminant k^2, returns (g, [0, k, c]) with f|g = [0, k, c]
/// and 0 <= c < k.
pub fn split_normal_form(f: &QuadForm, k: i64) -> (Mat2, QuadForm) {
    let mut roots: Vec<(i64, i64)> = Vec::new();
    if f.a == 0 {
        roots.push((1, 0));
        if f.b != 0 {
            // B x + C y = 0
            roots.push((-f.c, f.b));
        }
    } else {
        for s in [k, -k] {
            roots.push((-f.b + s, 2 * f.a));
        }
    }
    for (p, q) in roots {
        let g0 = gcd(p, q);
        let (p, q) = (p / g0, q / g0);
        let sigma = complete_column(p, q);
        let h = f.act(&sigma);
        debug_assert_eq!(h.a, 0);
        if h.b == k {
            let m = (modp(h.c, k) - h.c) / k;
            let t = Mat2::t_pow(m);
            let out = h.act(&t);
            return (sigma * t, out);
        }
    }
    unreachable!("split form {f} without a root of the right orientation")
}

/// Representatives of Gamma_0(N) \ Q_{N,D}; empty when D = 2, 3 mod 4.
pub fn enumerate_classes(n: i64, d: i64) -> Result<Vec<QuadForm>> {
    Ok(ClassTable::new(n, d)?.representatives())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discriminants() {
        assert_eq!(discriminant(&QuadForm::new(1, 0, -1)), 4);
        assert_eq!(discriminant(&QuadForm::new(1, 1, -1)), 5);
        assert_eq!(discriminant(&QuadForm::new(0, 1, 0)), 1);
    }

    #[test]
    fn t_action_example() {
        assert_eq!(QuadForm::new(1, 1, -1).act(&Mat2::T), QuadForm::new(1, 3, 1));
    }

    #[test]
    fn right_action() {
        let f = QuadForm::new(3, 7, -2);
        let g = Mat2::new(2, 1, 1, 1);
        let h = Mat2::new(1, 0, 3, 1);
        assert_eq!(f.act(&g).act(&h), f.act(&(g * h)));
        assert_eq!(f.act(&g).act(&g.inv()), f);
    }

    #[test]
    fn gamma0_action_rejects_outside() {
        assert!(gamma0n_action(&Mat2::S, &QuadForm::new(2, 1, -1), 2).is_err());
    }

    #[test]
    fn split_test() {
        assert!(is_split_hyperbolic(&QuadForm::new(1, 0, -1)));
        assert!(!is_split_hyperbolic(&QuadForm::new(1, 1, -1)));
        assert!(is_split_hyperbolic(&QuadForm::new(0, 6, 5)));
    }

    #[test]
    fn automorph_d5() {
        let f = QuadForm::new(1, 1, -1);
        let g = automorph(&f, 1).unwrap().unwrap();
        assert_eq!(f.act(&g), f);
        assert_eq!(g.trace(), 3);
        assert_eq!(automorph(&QuadForm::new(1, 0, -1), 1).unwrap(), None);
    }

    #[test]
    fn d5_has_one_class() {
        assert_eq!(enumerate_classes(1, 5).unwrap().len(), 1);
        assert!(enumerate_classes(1, 6).unwrap().is_empty());
    }

    #[test]
    fn genus_character_examples() {
        let ctx = GenusCharContext::new(-3, 1, 1).unwrap();
        assert_eq!(genus_character(&ctx, &QuadForm::new(0, 0, 2)), -1);
        assert_eq!(genus_character(&ctx, &QuadForm::new(3, 3, 3)), 0);
        assert!(GenusCharContext::new(-12, 0, 1).is_err());
        assert!(GenusCharContext::new(-3, 0, 1).is_err());
    }

    #[test]
    fn t_normalize_ranges() {
        let f = QuadForm::new(2, 9, 1).t_normalize();
        assert!(f.b > -2 && f.b <= 2);
        assert_eq!(f.disc(), 73);
        let g = QuadForm::new(0, -3, 7).t_normalize();
        assert_eq!(g, QuadForm::new(0, -3, 1));
    }
}
