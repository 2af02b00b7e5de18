//! Geometry of the upper half-plane: oriented geodesics of quadratic forms,
//! reduction to the standard fundamental domain and cusp data for Gamma_0(N).

use crate::arith::{complete_column, gcd, modp, square_root, Mat2};
use crate::error::{domain, precondition, Error, Result};
use crate::qforms::{automorph, is_split_hyperbolic, QuadForm};
use num_complex::Complex64;
use num_rational::Rational64;
use serde::Serialize;
use std::f64::consts::PI;

/// A point of P^1(Q) as a primitive pair (p, q); q = 0 is the cusp infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CuspPoint {
    pub p: i64,
    pub q: i64,
}

impl CuspPoint {
    pub fn new(p: i64, q: i64) -> Self {
        let g = gcd(p, q);
        let (mut p, mut q) = (p / g, q / g);
        if q < 0 || (q == 0 && p < 0) {
            p = -p;
            q = -q;
        }
        CuspPoint { p, q }
    }

    pub const INFINITY: CuspPoint = CuspPoint { p: 1, q: 0 };

    pub fn is_infinity(&self) -> bool {
        self.q == 0
    }

    /// Some sigma in SL2(Z) with sigma(infinity) = p/q.
    pub fn sigma(&self) -> Mat2 {
        complete_column(self.p, self.q)
    }

    pub fn to_f64(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ArcKind {
    Semicircle { center: Rational64, radius: f64 },
    Vertical { re: Rational64 },
}

/// The oriented geodesic c_X of a form. Semicircles run counter-clockwise
/// when A > 0; vertical lines run upward when B > 0, which is the orientation
/// compatible with the action of SL2(Z).
#[derive(Clone, Debug, Serialize)]
pub struct GeodesicArc {
    pub form: QuadForm,
    pub kind: ArcKind,
    pub orientation: i32,
    pub split: bool,
    pub base_point: Complex64,
    /// automorph moving points forward along the orientation
    pub automorph: Option<Mat2>,
    /// endpoints as cusps, for split forms
    pub start_cusp: Option<CuspPoint>,
    pub end_cusp: Option<CuspPoint>,
}

impl GeodesicArc {
    /// Point at signed hyperbolic arclength s from the base point, moving in
    /// the direction of the orientation.
    pub fn point(&self, s: f64) -> Complex64 {
        match &self.kind {
            ArcKind::Semicircle { center, radius } => {
                let theta = PI / 2.0 + self.orientation as f64 * gd(s);
                Complex64::new(rat_f64(*center), 0.0) + Complex64::from_polar(*radius, theta)
            }
            ArcKind::Vertical { re } => {
                Complex64::new(rat_f64(*re), self.base_point.im * (self.orientation as f64 * s).exp())
            }
        }
    }

    /// Translation length 2 arccosh(|tr|/2) of the automorph.
    pub fn period(&self) -> Option<f64> {
        self.automorph.map(|g| 2.0 * ((g.trace().abs() as f64) / 2.0).acosh())
    }
}

pub fn rat_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Gudermannian function.
pub fn gd(s: f64) -> f64 {
    2.0 * (s / 2.0).tanh().atan()
}

pub fn geodesic(f: &QuadForm, n: i64) -> Result<GeodesicArc> {
    let d = f.disc();
    if d <= 0 {
        return precondition(format!("{f} is not indefinite"));
    }
    let split = is_split_hyperbolic(f);
    let (kind, orientation, base_point) = if f.a != 0 {
        let center = Rational64::new(-f.b, 2 * f.a);
        let radius = (d as f64).sqrt() / (2.0 * f.a.abs() as f64);
        let o = if f.a > 0 { 1 } else { -1 };
        (ArcKind::Semicircle { center, radius }, o, Complex64::new(rat_f64(center), radius))
    } else {
        let re = Rational64::new(-f.c, f.b);
        let o = if f.b > 0 { 1 } else { -1 };
        (ArcKind::Vertical { re }, o, Complex64::new(rat_f64(re), 1.0))
    };
    let mut arc = GeodesicArc {
        form: *f,
        kind,
        orientation,
        split,
        base_point,
        automorph: None,
        start_cusp: None,
        end_cusp: None,
    };
    if split {
        let k = square_root(d).unwrap();
        if f.a != 0 {
            let right = CuspPoint::new(-f.b + k, 2 * f.a);
            let left = CuspPoint::new(-f.b - k, 2 * f.a);
            let (r, l) = if right.to_f64() > left.to_f64() { (right, left) } else { (left, right) };
            if f.a > 0 {
                arc.start_cusp = Some(r);
                arc.end_cusp = Some(l);
            } else {
                arc.start_cusp = Some(l);
                arc.end_cusp = Some(r);
            }
        } else {
            let foot = CuspPoint::new(-f.c, f.b);
            if f.b > 0 {
                arc.start_cusp = Some(foot);
                arc.end_cusp = Some(CuspPoint::INFINITY);
            } else {
                arc.start_cusp = Some(CuspPoint::INFINITY);
                arc.end_cusp = Some(foot);
            }
        }
    } else {
        let g = automorph(f, n)?.ok_or_else(|| Error::Consistency("missing automorph".into()))?;
        // keep the power that moves the base point forward
        let z1 = g.act(arc.base_point);
        let forward = match &arc.kind {
            ArcKind::Semicircle { center, .. } => {
                let th = (z1 - Complex64::new(rat_f64(*center), 0.0)).arg();
                (th - PI / 2.0) * orientation as f64 > 0.0
            }
            ArcKind::Vertical { .. } => (z1.im - arc.base_point.im) * orientation as f64 > 0.0,
        };
        arc.automorph = Some(if forward { g } else { g.inv() });
    }
    Ok(arc)
}

pub fn dpar(f: &QuadForm, z: Complex64) -> Result<f64> {
    if z.im <= 0.0 {
        return domain("dpar needs Im z > 0");
    }
    Ok(f.dpar(z))
}

/// Returns (z', gamma) with z' = gamma z in the standard fundamental domain
/// |Re z'| <= 1/2, |z'| >= 1.
pub fn reduce_to_f(z: Complex64) -> Result<(Complex64, Mat2)> {
    if z.im <= 0.0 {
        return domain("reduction needs Im z > 0");
    }
    if z.im < 1e-12 {
        return Err(Error::Precision {
            requested: 1e-12,
            achieved: z.im,
            context: "point too close to the real axis for reduction".into(),
        });
    }
    let mut w = z;
    let mut g = Mat2::I;
    for _ in 0..10_000 {
        let k = (w.re + 0.5).floor() as i64;
        if k != 0 {
            w -= k as f64;
            g = Mat2::t_pow(-k) * g;
        }
        if w.norm_sqr() < 1.0 - 1e-15 {
            w = -1.0 / w;
            g = Mat2::S * g;
        } else {
            return Ok((w, g));
        }
    }
    Err(Error::Consistency("reduction did not terminate".into()))
}

/// Cusp data for one Gamma_0(N)-class of cusps.
#[derive(Clone, Debug, Serialize)]
pub struct CuspData {
    pub cusp: CuspPoint,
    pub sigma: Mat2,
    pub width: i64,
    pub beta: Rational64,
    pub eps: Rational64,
    /// h -> h_l in [0, beta) with l n (L + h) = (Z beta + h_l) u_l, or None
    pub h_offsets: Vec<Option<Rational64>>,
}

/// Parameters t with t u_l in L' for the isotropic line l = sigma(infinity),
/// where u_l = sigma [[0,1],[0,0]] sigma^{-1} corresponds to the form
/// [-N c^2, 2N a c, -N a^2].
fn cusp_lattice_data(sigma: &Mat2, n: i64) -> (Rational64, i64, Vec<Option<Rational64>>) {
    let (a, c) = (sigma.a, sigma.c);
    let g = gcd(gcd(c * c, a * c), n * a * a);
    let gp = gcd(gcd(c * c, 2 * n * a * c), n * a * a);
    let beta = Rational64::new(1, g);
    let mut offsets = vec![None; (2 * n) as usize];
    for k in 0..(gp / g) {
        let t = Rational64::new(k, gp);
        // B' = 2 N a c t
        let b = t * Rational64::from_integer(2 * n * a * c);
        debug_assert!(b.is_integer());
        let h = modp(b.to_integer(), 2 * n) as usize;
        if offsets[h].is_none() {
            offsets[h] = Some(t);
        }
    }
    (beta, g, offsets)
}

pub fn cusp_width(sigma: &Mat2, n: i64) -> i64 {
    n / gcd(n, sigma.c * sigma.c)
}

/// gamma in Gamma_0(N) with gamma(x) = y, as gamma = +-sigma_y T^k sigma_x^{-1}.
pub fn cusp_transport(x: &CuspPoint, y: &CuspPoint, n: i64) -> Option<Mat2> {
    let sx = x.sigma();
    let sy = y.sigma();
    for k in 0..n.max(1) {
        let g = sy * Mat2::t_pow(k) * sx.inv();
        if g.c % n == 0 {
            return Some(g);
        }
    }
    None
}

pub fn cusp_classes(n: i64) -> Vec<CuspData> {
    let mut reps: Vec<CuspPoint> = vec![CuspPoint::INFINITY];
    for q in 1..=n {
        for p in 0..q {
            if gcd(p, q) != 1 {
                continue;
            }
            let c = CuspPoint::new(p, q);
            if reps.iter().all(|r| cusp_transport(r, &c, n).is_none()) {
                reps.push(c);
            }
        }
    }
    reps.into_iter()
        .map(|cusp| {
            let sigma = cusp.sigma();
            let width = cusp_width(&sigma, n);
            let (beta, _, h_offsets) = cusp_lattice_data(&sigma, n);
            CuspData { cusp, sigma, width, beta, eps: Rational64::from_integer(width) / beta, h_offsets }
        })
        .collect()
}

/// Data of a split form X relative to the cusp l_X singled out by
/// sigma^{-1} X = sqrt(m/N) [[1, -2r], [0, -1]], i.e. f|sigma = [0, B', C']
/// with B' < 0. With the orientation of [`geodesic`] this is the initial
/// cusp of c_X.
#[derive(Clone, Debug, Serialize)]
pub struct SplitData {
    pub r: Rational64,
    pub sigma: Mat2,
    pub cusp: CuspPoint,
    pub width: i64,
}

pub fn split_real_part(f: &QuadForm, n: i64) -> Result<SplitData> {
    if !is_split_hyperbolic(f) {
        return precondition(format!("{f} is not split-hyperbolic"));
    }
    let arc = geodesic(f, n)?;
    let classes = cusp_classes(n);
    for cusp in [arc.start_cusp.unwrap(), arc.end_cusp.unwrap()] {
        let s0 = cusp.sigma();
        if f.act(&s0).b >= 0 {
            continue;
        }
        // write sigma = gamma sigma_c with sigma_c the class representative
        let (cd, gamma) = classes
            .iter()
            .find_map(|cd| cusp_transport(&cd.cusp, &cusp, n).map(|g| (cd, g)))
            .ok_or_else(|| Error::Consistency(format!("cusp {cusp:?} in no class")))?;
        let sigma = gamma * cd.sigma;
        let g = f.act(&sigma);
        debug_assert_eq!(g.a, 0);
        let r = Rational64::new(-g.c, g.b);
        // shift by T^(k alpha) into [-alpha/2, alpha/2)
        let alpha = Rational64::from_integer(cd.width);
        let half = alpha / Rational64::from_integer(2);
        let k = ((r + half) / alpha).floor();
        let r_norm = r - k * alpha;
        let shift = Mat2::t_pow((k * alpha).to_integer());
        return Ok(SplitData { r: r_norm, sigma: sigma * shift, cusp, width: cd.width });
    }
    Err(Error::Consistency(format!("no endpoint of {f} has the normal form")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geodesic_examples() {
        let g = geodesic(&QuadForm::new(1, 0, -1), 1).unwrap();
        assert_eq!(g.orientation, 1);
        assert!(matches!(g.kind, ArcKind::Semicircle { radius, .. } if (radius - 1.0).abs() < 1e-15));
        let v = geodesic(&QuadForm::new(0, 1, 0), 1).unwrap();
        assert!(matches!(v.kind, ArcKind::Vertical { re } if re == Rational64::from_integer(0)));
        let h = geodesic(&QuadForm::new(-1, 0, 1), 1).unwrap();
        assert_eq!(h.orientation, -1);
    }

    #[test]
    fn dpar_examples() {
        let i = Complex64::i();
        assert_eq!(dpar(&QuadForm::new(1, 0, -1), i).unwrap(), 0.0);
        assert_eq!(dpar(&QuadForm::new(0, 0, 1), i).unwrap(), 1.0);
        assert_eq!(dpar(&QuadForm::new(1, 0, 1), i).unwrap(), 2.0);
        assert!(dpar(&QuadForm::new(1, 0, 1), Complex64::new(0.0, -1.0)).is_err());
    }

    #[test]
    fn reduce_examples() {
        let (z, g) = reduce_to_f(Complex64::i()).unwrap();
        assert!((z - Complex64::i()).norm() < 1e-15);
        assert_eq!(g, Mat2::I);
        let (z, g) = reduce_to_f(Complex64::new(1.0, 1.0)).unwrap();
        assert!((z - Complex64::i()).norm() < 1e-15);
        assert_eq!(g, Mat2::T.inv());
    }

    #[test]
    fn cusp_counts() {
        let c1 = cusp_classes(1);
        assert_eq!(c1.len(), 1);
        assert_eq!(c1[0].width, 1);
        assert_eq!(c1[0].beta, Rational64::from_integer(1));
        assert_eq!(c1[0].eps, Rational64::from_integer(1));
        let c4 = cusp_classes(4);
        assert_eq!(c4.len(), 3);
        let widths: Vec<i64> = c4.iter().map(|c| c.width).collect();
        assert_eq!(widths.iter().sum::<i64>(), 6);
    }

    #[test]
    fn split_real_part_examples() {
        let s = split_real_part(&QuadForm::new(0, -1, 0), 1).unwrap();
        assert_eq!(s.r, Rational64::from_integer(0));
        assert_eq!(s.sigma, Mat2::I);
        let s = split_real_part(&QuadForm::new(0, 2, -1), 1).unwrap();
        // l_X is the cusp 1/2, and r sits at the left end of [-1/2, 1/2)
        assert_eq!(s.cusp, CuspPoint::new(1, 2));
        assert_eq!(s.r, Rational64::new(-1, 2));
    }
}
