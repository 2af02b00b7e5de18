//! Regularized integrals of eta along the cycles c_X, the winding numbers of
//! j - 1728 along them, twisted traces and their generating series.
//!
//! Integration walks along the geodesic by hyperbolic arclength. Whenever the
//! current point leaves the region Im z >= 1/2 it is moved back into the
//! standard fundamental domain by an exact SL2(Z) matrix, and the walk
//! continues on the geodesic of the transported form. Since eta is a
//! differential on SL2(Z)\H, nothing else changes, and every evaluation happens
//! at moderate height.

use crate::arith::{b1_rational, is_fundamental, kronecker, Mat2};
use crate::error::{precondition, Error, Result};
use crate::hyperbolic::{geodesic, reduce_to_f, GeodesicArc};
use crate::modfun::{eval_j, ThirdKindForm};
use crate::qforms::{enumerate_classes, genus_character, GenusCharContext, QuadForm};
use crate::quad::integrate;
use num_complex::Complex64;
use num_rational::Rational64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Exit height that triggers a transport back into the fundamental domain.
const EXIT_HEIGHT: f64 = 0.5;
const STEP: f64 = 0.05;
/// Minimal arclength between a pole and the end of the piece containing it.
const POLE_MARGIN: f64 = 0.1;

/// The geodesic of a form, parametrized by signed hyperbolic arclength s in
/// the direction of its orientation (s = 0 at the top of a semicircle, at
/// height 1 on a vertical line).
#[derive(Clone, Copy, Debug)]
pub struct Line {
    pub form: QuadForm,
    vertical: bool,
    c: f64,
    r: f64,
    o: f64,
}

impl Line {
    pub fn new(f: &QuadForm) -> Line {
        if f.a != 0 {
            Line {
                form: *f,
                vertical: false,
                c: -(f.b as f64) / (2.0 * f.a as f64),
                r: (f.disc() as f64).sqrt() / (2.0 * f.a.abs() as f64),
                o: f.a.signum() as f64,
            }
        } else {
            Line { form: *f, vertical: true, c: -(f.c as f64) / f.b as f64, r: 0.0, o: f.b.signum() as f64 }
        }
    }

    /// z(s) and dz/ds.
    pub fn point(&self, s: f64) -> (Complex64, Complex64) {
        if self.vertical {
            let y = (self.o * s).exp();
            (Complex64::new(self.c, y), Complex64::new(0.0, self.o * y))
        } else {
            let (t, h) = (s.tanh(), 1.0 / s.cosh());
            (
                Complex64::new(self.c - self.o * self.r * t, self.r * h),
                Complex64::new(-self.o * self.r * h * h, -self.r * h * t),
            )
        }
    }

    /// Arclength coordinate of a point on (or very near) the line.
    pub fn position(&self, z: Complex64) -> f64 {
        if self.vertical {
            self.o * z.im.ln()
        } else {
            (-self.o * (z.re - self.c) / z.im).asinh()
        }
    }
}

/// A stretch [a, b] of the geodesic of `line.form`, with the arclength
/// coordinates of the poles of eta it contains.
#[derive(Clone, Debug)]
pub struct Piece {
    pub line: Line,
    pub a: f64,
    pub b: f64,
    pub poles: Vec<f64>,
    /// arclength along the whole walk at which this piece starts
    pub offset: f64,
}

/// Poles of eta (the SL2(Z)-orbit of i) on the line with coordinate in
/// [a, b]. A point of the line is such a pole exactly when the transported
/// form [A', B', C'] satisfies A' + C' = 0.
fn find_poles(line: &Line, a: f64, b: f64) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    let n = ((b - a) / 0.02).ceil().max(1.0) as usize;
    for k in 0..=n {
        let s = a + (b - a) * k as f64 / n as f64;
        let (z, _) = line.point(s);
        if z.im < 1e-9 {
            continue;
        }
        let (w, g) = reduce_to_f(z)?;
        if (w - Complex64::i()).norm() > 0.15 {
            continue;
        }
        let h = line.form.act(&g.inv());
        if h.a + h.c != 0 {
            continue;
        }
        let zp = g.inv().act(Complex64::i());
        let sp = line.position(zp);
        if sp >= a - 1e-12 && sp <= b + 1e-12 && out.iter().all(|q| (q - sp).abs() > 1e-6) {
            out.push(sp);
        }
    }
    out.sort_by(|x, y| x.total_cmp(y));
    Ok(out)
}

/// Walks `length` along the geodesic of f0 starting at coordinate s0.
pub fn walk(f0: &QuadForm, s0: f64, length: f64) -> Result<Vec<Piece>> {
    let mut f = *f0;
    let mut t = s0;
    let mut done = 0.0;
    let mut pieces = Vec::new();
    while length - done > 1e-13 {
        let mut line = Line::new(&f);
        let (z, _) = line.point(t);
        let (w, g) = reduce_to_f(z)?;
        if g != Mat2::I {
            f = f.act(&g.inv());
            line = Line::new(&f);
            t = line.position(w);
        }
        let stop = t + (length - done);
        let mut e = t;
        while e < stop {
            let next = (e + STEP).min(stop);
            if line.point(next).0.im < EXIT_HEIGHT && e > t {
                break;
            }
            e = next;
        }
        let poles = find_poles(&line, t, (e + 2.0 * POLE_MARGIN).min(stop))?;
        for &p in &poles {
            if (p - e).abs() < POLE_MARGIN && e < stop {
                e = (p + POLE_MARGIN).min(stop);
            }
        }
        let inside: Vec<f64> = poles.into_iter().filter(|&p| p >= t && p <= e).collect();
        for &p in &inside {
            let near_start = done == 0.0 && p - t < POLE_MARGIN;
            let near_end = e == stop && e - p < POLE_MARGIN;
            if near_start || near_end {
                return precondition("a pole of eta lies at the base point; shift the base point");
            }
        }
        pieces.push(Piece { line, a: t, b: e, poles: inside, offset: done });
        done += e - t;
        t = e;
    }
    Ok(pieces)
}

/// Half-width of the window around a pole integrated by symmetric pairing.
const PV_WINDOW: f64 = 0.02;

/// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL5: [(f64, f64); 5] = [
    (-0.906179845938664, 0.236926885056189),
    (-0.538469310105683, 0.478628670499366),
    (0.0, 0.568888888888889),
    (0.538469310105683, 0.478628670499366),
    (0.906179845938664, 0.236926885056189),
];

/// Principal value of the integral of eta over one piece. Near a pole p the
/// integrand is paired as h(p+u) + h(p-u), in which the simple poles cancel;
/// evaluations closer than about 1e-3 to a pole are never needed, which
/// keeps the cancellation in E6 near i harmless.
fn piece_integral(eta: &ThirdKindForm, piece: &Piece, tol: f64) -> Result<Complex64> {
    let h = |s: f64| -> Result<Complex64> {
        let (z, dz) = piece.line.point(s);
        Ok(eta.eval_unchecked(z)? * dz)
    };
    let mut cuts = vec![piece.a];
    let mut total = Complex64::new(0.0, 0.0);
    for &p in &piece.poles {
        cuts.push(p - PV_WINDOW);
        cuts.push(p + PV_WINDOW);
        for (x, wt) in GL5 {
            let u = 0.5 * PV_WINDOW * (x + 1.0);
            total += 0.5 * PV_WINDOW * wt * (h(p + u)? + h(p - u)?);
        }
    }
    cuts.push(piece.b);
    for w in cuts.chunks(2) {
        total += integrate(h, w[0], w[1], tol / (cuts.len() as f64))?.value;
    }
    Ok(total)
}

/// Value of the integral of eta along a piece deformed around one of its
/// poles by the circle arc of Euclidean radius `eps` on the given side
/// (+1 counter-clockwise, -1 clockwise). Used to check the principal value
/// against the geometric definition.
pub fn deformed_piece_integral(
    eta: &ThirdKindForm,
    piece: &Piece,
    pole: usize,
    eps: f64,
    side: i32,
    tol: f64,
) -> Result<Complex64> {
    let p = piece.poles[pole];
    let zp = piece.line.point(p).0;
    let dist = |s: f64| (piece.line.point(s).0 - zp).norm() - eps;
    let cross = |mut lo: f64, mut hi: f64| {
        // dist(lo) and dist(hi) have opposite signs
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (dist(mid) > 0.0) == (dist(lo) > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let sm = cross(piece.a, p);
    let sp = cross(p, piece.b);
    let others: Vec<f64> = piece.poles.iter().copied().filter(|&q| q != p).collect();
    let sub = |a: f64, b: f64| -> Result<Complex64> {
        let part = Piece {
            line: piece.line,
            a,
            b,
            poles: others.iter().copied().filter(|&q| q > a && q < b).collect(),
            offset: 0.0,
        };
        piece_integral(eta, &part, tol)
    };
    let straight = sub(piece.a, sm)? + sub(sp, piece.b)?;
    let phi0 = (piece.line.point(sm).0 - zp).arg();
    let phi1 = (piece.line.point(sp).0 - zp).arg();
    let mut dphi = (phi1 - phi0).rem_euclid(2.0 * PI);
    if side < 0 {
        dphi -= 2.0 * PI;
    }
    let arc = integrate(
        |t: f64| {
            let e = Complex64::from_polar(1.0, phi0 + t * dphi);
            Ok(eta.eval_unchecked(zp + eps * e)? * Complex64::i() * eps * e * dphi)
        },
        0.0,
        1.0,
        tol,
    )?;
    Ok(straight + arc.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ArgumentTracking,
    Quadrature,
}

/// The two deformed values at one pole on the cycle; their average is the
/// principal value.
#[derive(Clone, Debug, Serialize)]
pub struct PvCorrection {
    /// arclength from the start of the cycle
    pub arclength: f64,
    pub deformed: [Complex64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct CycleIntegralResult {
    pub value: Complex64,
    pub method: Method,
    pub pv_corrections: Vec<PvCorrection>,
    /// coefficient of log(eps)/(2 pi i) removed at the cusps, in units of
    /// the residue of eta at a cusp
    pub split_log_coefficient: Rational64,
}

fn sum_pieces(eta: &ThirdKindForm, pieces: &[Piece], tol: f64) -> Result<(Complex64, Vec<f64>)> {
    let mut total = Complex64::new(0.0, 0.0);
    let mut poles = Vec::new();
    let per = tol / pieces.len().max(1) as f64;
    for p in pieces {
        total += piece_integral(eta, p, per)?;
        poles.extend(p.poles.iter().map(|q| p.offset + q - p.a));
    }
    Ok((total, poles))
}

fn pv_list(eta: &ThirdKindForm, value: Complex64, poles: &[f64]) -> Vec<PvCorrection> {
    let half = Complex64::new(0.0, PI * eta.pole_residue_z());
    poles.iter().map(|&s| PvCorrection { arclength: s, deformed: [value + half, value - half] }).collect()
}

/// Integral of eta over c_X for the Gamma_0(N)-class of f, as a principal
/// value at poles and regularized at cusps.
pub fn cycle_integral(eta: &ThirdKindForm, f: &QuadForm, n: i64, tol: f64) -> Result<CycleIntegralResult> {
    let arc = geodesic(f, n)?;
    if arc.split {
        return split_integral(eta, &arc, tol);
    }
    let mut last = None;
    for base in [0.0, 0.37, 0.71, 1.13] {
        match closed_integral_at(eta, &arc, base, tol) {
            Err(Error::Precondition(m)) => last = Some(Error::Precondition(m)),
            r => return r,
        }
    }
    Err(last.unwrap())
}

/// Closed-cycle integral starting at arclength `base` from the top of the
/// geodesic of f.
pub fn cycle_integral_at(
    eta: &ThirdKindForm,
    f: &QuadForm,
    n: i64,
    base: f64,
    tol: f64,
) -> Result<CycleIntegralResult> {
    let arc = geodesic(f, n)?;
    if arc.split {
        return precondition(format!("{f} is split; its cycle has no base point"));
    }
    closed_integral_at(eta, &arc, base, tol)
}

fn closed_integral_at(eta: &ThirdKindForm, arc: &GeodesicArc, base: f64, tol: f64) -> Result<CycleIntegralResult> {
    let length = arc.period().ok_or_else(|| Error::Consistency("closed geodesic without period".into()))?;
    let pieces = walk(&arc.form, base, length)?;
    let (value, poles) = sum_pieces(eta, &pieces, tol)?;
    Ok(CycleIntegralResult {
        value,
        method: Method::Quadrature,
        pv_corrections: pv_list(eta, value, &poles),
        split_log_coefficient: Rational64::from_integer(0),
    })
}

/// Frames and lengths for the split geodesic truncated at height T in the
/// local coordinates of both end cusps.
struct SplitFrame {
    start_form: QuadForm,
    sigma_start: Mat2,
    sigma_end: Mat2,
    y_start: f64,
    y_end: f64,
}

fn split_frame(arc: &GeodesicArc) -> SplitFrame {
    let sigma_start = arc.start_cusp.unwrap().sigma();
    let sigma_end = arc.end_cusp.unwrap().sigma();
    let z = arc.base_point;
    SplitFrame {
        start_form: arc.form.act(&sigma_start),
        sigma_start,
        sigma_end,
        y_start: sigma_start.inv().act(z).im,
        y_end: sigma_end.inv().act(z).im,
    }
}

impl SplitFrame {
    fn pieces(&self, t: f64) -> Result<Vec<Piece>> {
        let line = Line::new(&self.start_form);
        let s0 = line.position(Complex64::new(0.0, t));
        walk(&self.start_form, s0, 2.0 * t.ln() - self.y_start.ln() - self.y_end.ln())
    }

    fn min_height(&self) -> f64 {
        self.y_start.max(self.y_end).max(1.0) + 2.0
    }
}

/// lim g(sigma w) / j(sigma, w)^2 as Im w -> infinity: eta = c dw near the cusp.
fn cusp_constant(eta: &ThirdKindForm, sigma: &Mat2) -> Result<Complex64> {
    let w = Complex64::new(0.1, 40.0);
    let jac = sigma.j(w);
    Ok(eta.eval(sigma.act(w), 1e-10)? / (jac * jac))
}

fn richardson(values: &[Complex64], ratio: f64) -> (Complex64, f64) {
    let mut table = values.to_vec();
    let mut prev = table[0];
    let mut rj = 1.0;
    while table.len() > 1 {
        rj *= ratio;
        prev = table[0];
        table = table.windows(2).map(|w| (rj * w[1] - w[0]) / (rj - 1.0)).collect();
    }
    let spread = (table[0] - prev).norm();
    (table[0], spread)
}

/// Regularized integral along a split geodesic, extrapolated over the
/// ladder eps_k = eps_0 ratio^-k with T = -log(eps)/2 pi.
pub fn split_integral_ladder(eta: &ThirdKindForm, f: &QuadForm, n: i64, ratio: f64, tol: f64) -> Result<Complex64> {
    let arc = geodesic(f, n)?;
    if !arc.split {
        return precondition(format!("{f} is not split-hyperbolic"));
    }
    Ok(split_core(eta, &arc, ratio, tol)?.0)
}

fn split_core(
    eta: &ThirdKindForm,
    arc: &GeodesicArc,
    ratio: f64,
    tol: f64,
) -> Result<(Complex64, Vec<f64>, Complex64)> {
    let frame = split_frame(arc);
    let c_start = cusp_constant(eta, &frame.sigma_start)?;
    let c_end = cusp_constant(eta, &frame.sigma_end)?;
    let t0 = frame.min_height();
    let mut values = Vec::new();
    let mut poles = Vec::new();
    for k in 0..4 {
        let t = t0 + k as f64 * ratio.ln() / (2.0 * PI);
        let pieces = frame.pieces(t)?;
        let (v, p) = sum_pieces(eta, &pieces, tol * 1e-2)?;
        values.push(v - Complex64::i() * t * (c_end - c_start));
        poles = p;
    }
    let (value, spread) = richardson(&values, ratio);
    if spread > tol {
        return Err(Error::Precision {
            requested: tol,
            achieved: spread,
            context: "epsilon extrapolation did not converge".into(),
        });
    }
    Ok((value, poles, c_end - c_start))
}

fn split_integral(eta: &ThirdKindForm, arc: &GeodesicArc, tol: f64) -> Result<CycleIntegralResult> {
    let (value, poles, dc) = split_core(eta, arc, 2.0, tol)?;
    // eta = -2 pi i r_l dw near a cusp of residue r_l in q = e(w)
    let dr = dc / Complex64::new(0.0, -2.0 * PI * eta.sign as f64);
    let coeff = Rational64::from_integer(dr.re.round() as i64);
    Ok(CycleIntegralResult {
        value,
        method: Method::Quadrature,
        pv_corrections: pv_list(eta, value, &poles),
        split_log_coefficient: coeff,
    })
}

/// Total change of arg(j(z) - 1728) along the pieces, divided by 2 pi. Poles
/// are passed on both sides along circles of radius `eps` and the two
/// results averaged.
fn winding_of_pieces(pieces: &[Piece], tol: f64) -> Result<f64> {
    let eps = 0.02;
    let val = |z: Complex64| -> Result<Complex64> {
        let (w, _) = reduce_to_f(z)?;
        let scale = 2000.0 + (2.0 * PI * w.im).exp();
        Ok(eval_j(z, 1e-10 * scale)? - 1728.0)
    };
    let mut total = 0.0;
    for piece in pieces {
        let on_line = |s: f64| val(piece.line.point(s).0);
        let mut cuts = vec![(piece.a, 0.0)];
        for &p in &piece.poles {
            let zp = piece.line.point(p).0;
            let dist = |s: f64| (piece.line.point(s).0 - zp).norm() - eps;
            let bis = |mut lo: f64, mut hi: f64| {
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if (dist(mid) > 0.0) == (dist(lo) > 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            let sm = bis(piece.a.max(p - 1.0), p);
            let sp = bis(p, piece.b.min(p + 1.0));
            cuts.push((sm, 0.0));
            let phi0 = (piece.line.point(sm).0 - zp).arg();
            let phi1 = (piece.line.point(sp).0 - zp).arg();
            let ccw = (phi1 - phi0).rem_euclid(2.0 * PI);
            let mut sides = [0.0; 2];
            for (i, d) in [ccw, ccw - 2.0 * PI].into_iter().enumerate() {
                sides[i] = track_arg(|t| val(zp + eps * Complex64::from_polar(1.0, phi0 + t * d)), 0.0, 1.0, 16, tol)?;
            }
            total += 0.5 * (sides[0] + sides[1]);
            cuts.push((sp, 0.0));
        }
        cuts.push((piece.b, 0.0));
        for w in cuts.chunks(2) {
            let (a, b) = (w[0].0, w[1].0);
            let n = ((b - a) / 0.02).ceil().max(4.0) as usize;
            total += track_arg(on_line, a, b, n, tol)?;
        }
    }
    Ok(total / (2.0 * PI))
}

/// Continuous change of arg F(t) over [a, b], refining wherever consecutive
/// samples differ in argument by more than pi/4.
fn track_arg<F: Fn(f64) -> Result<Complex64>>(f: F, a: f64, b: f64, n: usize, _tol: f64) -> Result<f64> {
    fn seg<F: Fn(f64) -> Result<Complex64>>(
        f: &F,
        t0: f64,
        v0: Complex64,
        t1: f64,
        v1: Complex64,
        depth: u32,
    ) -> Result<f64> {
        let d = (v1 / v0).arg();
        if d.abs() <= PI / 4.0 {
            return Ok(d);
        }
        if depth > 40 {
            return Err(Error::Precision {
                requested: PI / 4.0,
                achieved: d.abs(),
                context: "argument tracking refinement depth exceeded".into(),
            });
        }
        let tm = 0.5 * (t0 + t1);
        let vm = f(tm)?;
        Ok(seg(f, t0, v0, tm, vm, depth + 1)? + seg(f, tm, vm, t1, v1, depth + 1)?)
    }
    let mut total = 0.0;
    let mut t0 = a;
    let mut v0 = f(a)?;
    for k in 1..=n {
        let t1 = a + (b - a) * k as f64 / n as f64;
        let v1 = f(t1)?;
        total += seg(&f, t0, v0, t1, v1, 0)?;
        t0 = t1;
        v0 = v1;
    }
    Ok(total)
}

/// Winding number of j(c_X) around 1728 for N = 1, by tracking the argument
/// of j - 1728 along the cycle. Closed cycles give a half-integer; split
/// cycles give the limit of the argument change between the two cusps.
pub fn winding_index(f: &QuadForm, tol: f64) -> Result<f64> {
    let arc = geodesic(f, 1)?;
    if arc.split {
        let frame = split_frame(&arc);
        let pieces = frame.pieces(frame.min_height() + 3.0)?;
        return winding_of_pieces(&pieces, tol);
    }
    let length = arc.period().unwrap();
    let mut last = None;
    for base in [0.0, 0.37, 0.71, 1.13] {
        match walk(&arc.form, base, length) {
            Ok(pieces) => {
                let w = winding_of_pieces(&pieces, tol)?;
                let h = (2.0 * w).round() / 2.0;
                if (w - h).abs() > 1e-3 {
                    return Err(Error::Precision {
                        requested: 1e-3,
                        achieved: (w - h).abs(),
                        context: format!("winding of {f} is not a half-integer"),
                    });
                }
                return Ok(h);
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap())
}

/// Contribution of one class to a twisted trace.
#[derive(Clone, Debug, Serialize)]
pub struct ClassContribution {
    pub form: [i64; 3],
    pub chi: i32,
    /// (1/2 pi i) times the regularized cycle integral
    pub ind: f64,
    /// argument-tracking winding number (N = 1 only)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winding: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceEntry {
    pub d: i64,
    pub trace: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_winding: Option<f64>,
    pub classes: Vec<ClassContribution>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceTable {
    #[serde(rename = "Delta")]
    pub delta: i64,
    #[serde(rename = "N")]
    pub n: i64,
    pub r: i64,
    /// L(0, Delta) for N = 1
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant_term: Option<String>,
    pub entries: Vec<TraceEntry>,
}

fn check_trace_args(delta: i64, r: i64, n: i64, d: i64) -> Result<GenusCharContext> {
    if d <= 0 || !(d % 4 == 0 || d % 4 == 3) {
        return precondition(format!("d = {d} must be positive and 0 or 3 mod 4"));
    }
    GenusCharContext::new(delta, r, n)
}

/// Tr_{N,Delta,d} with each class's cycle integral and, when `winding` is
/// set and N = 1, the argument-tracking winding number.
pub fn trace_entry(
    delta: i64,
    r: i64,
    n: i64,
    d: i64,
    eta: &ThirdKindForm,
    tol: f64,
    winding: bool,
) -> Result<TraceEntry> {
    let ctx = check_trace_args(delta, r, n, d)?;
    let classes = enumerate_classes(n, -d * delta)?;
    let with_w = winding && n == 1;
    let contributions: Vec<Result<ClassContribution>> = classes
        .par_iter()
        .map(|f| {
            let chi = genus_character(&ctx, f);
            if chi == 0 {
                return Ok(ClassContribution { form: [f.a, f.b, f.c], chi, ind: 0.0, winding: None });
            }
            let v = cycle_integral(eta, f, n, tol)?.value / Complex64::new(0.0, 2.0 * PI);
            let w = if with_w { Some(winding_index(f, tol)?) } else { None };
            Ok(ClassContribution { form: [f.a, f.b, f.c], chi, ind: v.re, winding: w })
        })
        .collect();
    let classes: Vec<ClassContribution> = contributions.into_iter().collect::<Result<_>>()?;
    let trace = classes.iter().map(|c| c.chi as f64 * c.ind).sum();
    let trace_winding =
        with_w.then(|| classes.iter().map(|c| c.chi as f64 * c.winding.unwrap_or(0.0)).sum::<f64>() * eta.sign as f64);
    Ok(TraceEntry { d, trace, trace_winding, classes })
}

pub fn trace(delta: i64, r: i64, n: i64, d: i64, eta: &ThirdKindForm, tol: f64) -> Result<f64> {
    Ok(trace_entry(delta, r, n, d, eta, tol, false)?.trace)
}

pub fn generating_series(delta: i64, r: i64, n: i64, eta: &ThirdKindForm, d_max: i64, tol: f64) -> Result<TraceTable> {
    if d_max < 3 {
        return precondition("d_max must be at least 3");
    }
    check_trace_args(delta, r, n, 3)?;
    let mut entries = Vec::new();
    for d in (3..=d_max).filter(|d| d % 4 == 0 || d % 4 == 3) {
        let e = trace_entry(delta, r, n, d, eta, tol, true)?;
        if !e.classes.is_empty() {
            entries.push(e);
        }
    }
    let constant_term = if n == 1 { Some(l0(delta)?.to_string()) } else { None };
    Ok(TraceTable { delta, n, r, constant_term, entries })
}

/// L(0, chi_Delta) = sum over C mod |Delta| of (Delta/C) B1(-C/|Delta|).
pub fn l0(delta: i64) -> Result<Rational64> {
    if delta >= 0 || !is_fundamental(delta) {
        return Err(Error::NotFundamental(delta));
    }
    let m = delta.abs();
    Ok((0..m).map(|c| Rational64::from_integer(kronecker(delta, c) as i64) * b1_rational(Rational64::new(-c, m))).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_parametrization_roundtrip() {
        for f in [QuadForm::new(1, 1, -1), QuadForm::new(-2, 3, 1), QuadForm::new(0, -3, 2)] {
            let line = Line::new(&f);
            for s in [-2.0, -0.3, 0.0, 1.7] {
                let (z, dz) = line.point(s);
                assert!((line.position(z) - s).abs() < 1e-12);
                let h = 1e-6;
                let fd = (line.point(s + h).0 - line.point(s - h).0) / (2.0 * h);
                assert!((fd - dz).norm() < 1e-7);
                // the line is the geodesic of f
                assert!(f.dpar(z).abs() < 1e-9, "{f} s={s}: {}", f.dpar(z));
            }
        }
    }

    #[test]
    fn l0_small_values() {
        assert_eq!(l0(-3).unwrap(), Rational64::new(1, 3));
        assert_eq!(l0(-4).unwrap(), Rational64::new(1, 2));
        assert_eq!(l0(-7).unwrap(), Rational64::from_integer(1));
        assert!(l0(-12).is_err());
    }
}
