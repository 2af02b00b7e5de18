use num_complex::Complex64;
use num_rational::Rational64;
use proptest::prelude::*;
use std::f64::consts::PI;
use windtrace::hyperbolic::{cusp_classes, rat_f64, split_real_part};
use windtrace::modfun::ThirdKindForm;
use windtrace::qforms::{GenusCharContext, QuadForm};
use windtrace::theta::*;
use windtrace::weil::{max_abs, residual, slash_action, Metaplectic};

#[test]
fn erfc_matches_libm() {
    let mut t = -5.0;
    while t < 12.0 {
        let a = erfc(t);
        let b = libm::erfc(t);
        assert!((a - b).abs() <= 2e-14 * b.abs() + 1e-300, "t={t}: {a} vs {b}");
        t += 0.0137;
    }
}

/// erfc(1) from the Taylor series of the integrand about 0, summed far past
/// double precision.
#[test]
fn erfc_at_one_from_taylor() {
    // erf(1) = (2/sqrt pi) sum (-1)^n / (n! (2n+1))
    let mut s = 0.0;
    let mut fact = 1.0;
    for n in 0..40 {
        if n > 0 {
            fact *= n as f64;
        }
        s += if n % 2 == 0 { 1.0 } else { -1.0 } / (fact * (2 * n + 1) as f64);
    }
    let oracle = 1.0 - 2.0 / PI.sqrt() * s;
    assert!((erfc(1.0) - oracle).abs() < 1e-15);
    assert!((erfc(1.0) - 0.15729920705028513).abs() < 1e-15);
}

#[test]
fn periodic_g_two_sides() {
    for &kappa in &[0.1, 1.0, 10.0, 2.0] {
        for k in 0..20 {
            let x = 0.025 + k as f64 * 0.0475;
            let a = periodic_g(x, kappa, Side::Direct).unwrap();
            let b = periodic_g(x, kappa, Side::Fourier).unwrap();
            assert!((a - b).abs() < 1e-10, "x={x} kappa={kappa}: {a} vs {b}");
            assert!((periodic_g(x + 1.0, kappa, Side::Direct).unwrap() - a).abs() < 1e-13);
        }
    }
    // small kappa: the Fourier tail is e^{-pi m^2/kappa}
    for x in [0.1, 0.35, 0.8] {
        let a = periodic_g(x, 1e-4, Side::Direct).unwrap();
        assert!((a + b1_f64(x)).abs() < 1e-8, "{a}");
    }
}

#[test]
fn unary_theta_orbit_count_matches_definition_at_infinity() {
    for n in 1..=6 {
        let cd = &cusp_classes(n)[0];
        assert!(cd.cusp.is_infinity());
        let a = unary_theta_coefficients(cd, n, 30);
        let b = unary_theta_infinity_direct(n, 30);
        assert_eq!(a.len(), b.len(), "N={n}");
        for (k, v) in &a {
            assert!((v - b[k]).abs() < 1e-13, "N={n} {k:?}");
        }
    }
}

#[test]
fn unary_theta_level_one_support() {
    // X orthogonal to l forces m = k^2/4; the h = -h symmetry kills every
    // coefficient at level one, and the raw lattice count confirms the support
    let cd = &cusp_classes(1)[0];
    assert!(unary_theta_coefficients(cd, 1, 40).is_empty());
    let mut support = std::collections::BTreeSet::new();
    for b in -10i64..=10 {
        for c in -30i64..=30 {
            let f = QuadForm::new(0, b, c);
            let m = Rational64::new(f.disc(), 4);
            if m > Rational64::from_integer(0) && m <= Rational64::from_integer(25) {
                support.insert(m);
            }
        }
    }
    for m in support {
        let k2 = (m * Rational64::from_integer(4)).to_integer();
        let k = (k2 as f64).sqrt().round() as i64;
        assert_eq!(k * k, k2);
    }
}

#[test]
fn unary_theta_vanishes_off_the_orthogonal_classes() {
    // at infinity X orthogonal to l has B' = B, so only h with h^2 = 4Nm
    // appear; components h with no such X stay zero
    for n in 2..=5 {
        for cd in cusp_classes(n) {
            let (th, _) = unary_theta_ell(&cd, n, 0.5, 1e-12).unwrap();
            for h in 0..(2 * n) as usize {
                let hit = (1..200i64)
                    .any(|k| th.coeffs.keys().any(|(m, hh)| *hh == h && *m == Rational64::new(k * k, 4 * n)));
                if !hit {
                    assert!(th.component_is_zero(h));
                }
            }
        }
    }
}

#[test]
fn unary_theta_is_modular() {
    let taus = [Complex64::new(0.0, 1.0), Complex64::new(1.0, 1.0), Complex64::new(0.5, 1.5)];
    for n in 2..=4 {
        for cd in cusp_classes(n) {
            // S maps (1+3i)/2 to Im = 0.6
            let (th, tail) = unary_theta_ell(&cd, n, 0.3, 1e-13).unwrap();
            assert!(tail < 1e-12);
            for tau in taus {
                let lhs = slash_action(|t| th.eval(t), 3, &Metaplectic::s(), tau).unwrap();
                let rhs = th.dform.apply_s(&th.eval(tau), 1);
                assert!(residual(&lhs, &rhs) < 1e-10, "N={n} {:?}", cd.cusp);
                let lhs = slash_action(|t| th.eval(t), 3, &Metaplectic::t(), tau).unwrap();
                let rhs = th.dform.apply_t(&th.eval(tau), 1);
                assert!(residual(&lhs, &rhs) < 1e-12);
            }
        }
    }
}

#[test]
fn siegel_theta_truncation_stability() {
    let tau = Complex64::new(0.0, 1.0);
    let k = siegel_cutoff(-3, 1.0, 1e-12);
    let a = siegel_theta_delta(-3, 1, tau, k).unwrap();
    let b = siegel_theta_delta(-3, 1, tau, k + 5).unwrap();
    assert!((a - b).norm() < 1e-10);
    assert!(siegel_tail(-3, 1.0, k) < 1e-12);
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn theta_lower_is_conjugate_siegel_theta() {
    let eta = ThirdKindForm::with_sign(-1);
    for tau in [Complex64::new(0.0, 1.0), Complex64::new(0.4, 1.2), Complex64::new(0.1, 0.7)] {
        let v = tau.im;
        let k = siegel_cutoff(-3, v, 1e-30);
        let s = siegel_theta_delta(-3, 1, tau, k).unwrap();
        let target = v.powf(1.5) * s.conj();
        let lower = theta_lower(-3, 1, 1, &eta, 16, v, 1e-30).unwrap().eval(tau);
        assert!(rel(lower, target) < 1e-8, "{tau}: {lower} vs {target}");
    }
}

#[test]
fn lowering_theta_star_gives_theta_lower() {
    for (delta, r) in [(-3i64, 1i64), (-4, 0), (-7, 1)] {
        let eta = ThirdKindForm::with_sign(-1);
        let star = theta_star(delta, r, 1, &eta, 20, 0.5, 1e-14).unwrap();
        let lower = theta_lower(delta, r, 1, &eta, 20, 0.5, 1e-14).unwrap();
        assert_eq!(star.entries.len(), lower.entries.len());
        for ((d1, c1), (d2, c2)) in star.entries.iter().zip(&lower.entries) {
            assert_eq!(d1, d2);
            let l = c1.lower().unwrap();
            assert_eq!(l.terms.len(), c2.terms.len());
            for (a, b) in l.terms.iter().zip(&c2.terms) {
                match (a, b) {
                    (CoeffTerm::Gauss { amp: a1, scale: s1 }, CoeffTerm::Gauss { amp: a2, scale: s2 }) => {
                        assert!((a1 - a2).abs() <= 1e-14 * a2.abs() && (s1 - s2).abs() <= 1e-14 * s2);
                    }
                    _ => panic!("unexpected term"),
                }
            }
            // v^2 c'(v) by central differences
            for v in [0.5, 1.0, 2.0] {
                let fd = finite_difference(|x| c1.eval(x).re, v);
                assert!((v * v * fd - c2.eval(v).re).abs() < 1e-7);
            }
        }
    }
}

fn finite_difference<F: Fn(f64) -> f64>(f: F, v: f64) -> f64 {
    let d = |h: f64| (f(v + h) - f(v - h)) / (2.0 * h);
    let (h1, h2) = (1e-3, 5e-4);
    (4.0 * d(h2) - d(h1)) / 3.0
}

#[test]
fn theta_star_constant_term_two_ways() {
    let eta = ThirdKindForm::with_sign(-1);
    for delta in [-3i64, -4, -7, -8, -11, -15, -20, -23, -24, -31] {
        let r = (0..2).find(|r| (delta - r * r) % 4 == 0).unwrap();
        let ctx = GenusCharContext::new(delta, r, 1).unwrap();
        assert_eq!(cusp_constant_term(&eta, &ctx).unwrap(), cusp_constant_term_level_one(&eta, delta).unwrap());
    }
    let t = theta_star(-3, 1, 1, &eta, 12, 1.0, 1e-12).unwrap();
    assert_eq!(t.constant_term, Rational64::new(1, 3));
}

#[test]
fn theta_star_decays_to_constant() {
    let eta = ThirdKindForm::with_sign(-1);
    let t = theta_star(-4, 0, 1, &eta, 12, 0.5, 1e-12).unwrap();
    for (_, c) in &t.entries {
        assert!(c.eval(200.0).norm() < 1e-12);
        assert_eq!(c.constant_part(), Complex64::new(0.0, 0.0));
    }
}

#[test]
fn boundary_asymptotics_for_split_classes() {
    // at y = 10 the limit -B1 is reached up to e^{-pi/kappa}, kappa = D alpha^2 v / (100 N)
    for (f, n, limit) in [
        (QuadForm::new(0, 3, 1), 1, true),
        (QuadForm::new(2, 5, 2), 1, true),
        (QuadForm::new(0, 5, 2), 2, false),
        (QuadForm::new(2, 7, 3), 2, false),
    ] {
        let sd = split_real_part(&f, n).unwrap();
        for x in [0.13, 0.3, -0.41] {
            let z = sd.sigma.act(Complex64::new(x, 10.0));
            let (orbit, _) = split_orbit_sum(&f, n, z, 1.0, 1e-16).unwrap();
            let g = boundary_periodic(&f, n, z, 1.0).unwrap();
            assert!((orbit - g).abs() < 1e-10, "{f} N={n} x={x}: {orbit} vs {g}");
            let asym = boundary_asymptotic(&f, n, z).unwrap();
            if limit {
                assert!((orbit - asym).abs() < 1e-6, "{f} N={n} x={x}: {orbit} vs {asym}");
            }
            let near = cusp_orbit_sum(&f, n, x, 10.0, 1.0).unwrap();
            let kappa = f.disc() as f64 * (sd.width * sd.width) as f64 / (100.0 * n as f64);
            let expect = periodic_g((x - rat_f64(sd.r)) / sd.width as f64, kappa, Side::Direct).unwrap();
            assert!((near - expect).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn psi_tilde_is_odd_across_the_geodesic(t in -1.5f64..1.5, h in 0.05f64..0.8, v in 0.2f64..3.0) {
        // [1, 0, -2]: the semicircle |z| = sqrt 2; z -> 2 / conj(z) is the reflection in it
        let f = QuadForm::new(1, 0, -2);
        let z = Complex64::from_polar(2f64.sqrt() * (1.0 + h), PI / 2.0 + t);
        let w = 2.0 / z.conj();
        let a = psi_tilde(&f, z, v, 1).unwrap();
        let b = psi_tilde(&f, w, v, 1).unwrap();
        prop_assert!((a + b).abs() < 1e-12);
        // z = 2i lies on the geodesic of [1, 0, -4] exactly
        prop_assert_eq!(psi_tilde(&QuadForm::new(1, 0, -4), Complex64::new(0.0, 2.0), v, 1).unwrap(), 0.0);
    }

    #[test]
    fn erfc_reflection(t in -8.0f64..8.0) {
        prop_assert!((erfc(-t) - (2.0 - erfc(t))).abs() < 1e-15);
    }
}

#[test]
fn psi_tilde_decays_in_v() {
    let f = QuadForm::new(1, 1, -1);
    let z = Complex64::new(0.1, 2.0);
    assert!(psi_tilde(&f, z, 100.0, 1).unwrap().abs() < 1e-12);
    assert!(max_abs(&[Complex64::new(psi_tilde(&f, z, 0.01, 1).unwrap(), 0.0)]) > 1e-3);
}
