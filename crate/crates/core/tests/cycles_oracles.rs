use num_complex::Complex64;
use std::f64::consts::PI;
use windtrace::cycles::{
    cycle_integral, cycle_integral_at, deformed_piece_integral, l0, split_integral_ladder, trace_entry, walk,
    winding_index,
};
use windtrace::hyperbolic::geodesic;
use windtrace::modfun::ThirdKindForm;
use windtrace::qforms::{enumerate_classes, QuadForm};
use windtrace::quad::integrate;

const TWO_PI_I: Complex64 = Complex64::new(0.0, 2.0 * PI);

#[test]
fn short_cycle_matches_direct_quadrature() {
    // D = 12: the cycle misses the poles and stays high enough to integrate
    // without transporting
    let eta = ThirdKindForm::jlog();
    let f = QuadForm::new(1, 2, -2);
    let arc = geodesic(&f, 1).unwrap();
    let len = arc.period().unwrap();
    let line = windtrace::cycles::Line::new(&f);
    let direct = integrate(
        |s| {
            let (z, dz) = line.point(s);
            Ok(eta.eval(z, 1e-10)? * dz)
        },
        -len / 2.0,
        len / 2.0,
        1e-11,
    )
    .unwrap()
    .value;
    let walked = cycle_integral_at(&eta, &f, 1, -len / 2.0, 1e-11).unwrap().value;
    assert!((direct - walked).norm() < 1e-9, "{direct} vs {walked}");
}

#[test]
fn closed_cycles_wind_an_integer_number_of_times() {
    let eta = ThirdKindForm::jlog();
    for d in [5, 8, 12, 13, 17, 21, 24, 28, 29, 33, 37, 40, 41, 44] {
        for f in enumerate_classes(1, d).unwrap() {
            let r = cycle_integral(&eta, &f, 1, 1e-10).unwrap();
            let v = r.value / TWO_PI_I;
            assert!((v.re - v.re.round()).abs() < 1e-8 && v.im.abs() < 1e-8, "D={d} {f}: {v}");
            let w = winding_index(&f, 1e-8).unwrap();
            assert!((w - v.re).abs() < 1e-8, "D={d} {f}: winding {w} vs {v}");
        }
    }
}

#[test]
fn d5_cycle_integral_equals_winding() {
    let eta = ThirdKindForm::jlog();
    let f = QuadForm::new(1, 1, -1);
    let v = cycle_integral(&eta, &f, 1, 1e-10).unwrap().value / TWO_PI_I;
    let w = winding_index(&f, 1e-8).unwrap();
    assert!((v.re - w).abs() < 1e-8 && v.im.abs() < 1e-8);
    // translating the form does not change the cycle
    let g = f.act(&windtrace::arith::Mat2::t_pow(3));
    let v2 = cycle_integral(&eta, &g, 1, 1e-10).unwrap().value / TWO_PI_I;
    assert!((v - v2).norm() < 1e-8);
}

#[test]
fn base_point_independence() {
    let eta = ThirdKindForm::jlog();
    for f in [QuadForm::new(1, 3, -2), QuadForm::new(2, 5, -2), QuadForm::new(1, 6, -4)] {
        let vals: Vec<Complex64> =
            [0.0, 0.53, 1.41].iter().map(|&b| cycle_integral_at(&eta, &f, 1, b, 1e-11).unwrap().value).collect();
        assert!((vals[0] - vals[1]).norm() < 1e-8 && (vals[0] - vals[2]).norm() < 1e-8, "{f}: {vals:?}");
    }
}

/// A class whose cycle passes through an SL2(Z)-translate of i.
fn class_through_i(d: i64) -> Option<QuadForm> {
    for f in enumerate_classes(1, d).unwrap() {
        let arc = geodesic(&f, 1).unwrap();
        let pieces = walk(&f, 0.0, arc.period()?).ok()?;
        if pieces.iter().any(|p| !p.poles.is_empty()) {
            return Some(f);
        }
    }
    None
}

#[test]
fn principal_value_is_average_of_deformations() {
    let eta = ThirdKindForm::jlog();
    // [1,0,-k] passes through i for every k
    let f = class_through_i(8).or_else(|| class_through_i(12)).expect("some cycle through i");
    let arc = geodesic(&f, 1).unwrap();
    let pieces = walk(&f, 0.37, arc.period().unwrap()).unwrap();
    let piece = pieces.iter().find(|p| !p.poles.is_empty()).unwrap();
    let pv = {
        let p = windtrace::cycles::Piece { poles: piece.poles.clone(), ..piece.clone() };
        // principal value of this piece alone via both deformations
        let plus = deformed_piece_integral(&eta, &p, 0, 0.05, 1, 1e-11).unwrap();
        let minus = deformed_piece_integral(&eta, &p, 0, 0.05, -1, 1e-11).unwrap();
        assert!((plus - minus - TWO_PI_I * 2.0).norm() < 1e-8, "{plus} {minus}");
        let plus2 = deformed_piece_integral(&eta, &p, 0, 0.02, 1, 1e-11).unwrap();
        assert!((plus - plus2).norm() < 1e-8);
        0.5 * (plus + minus)
    };
    let r = cycle_integral(&eta, &f, 1, 1e-10).unwrap();
    assert!(!r.pv_corrections.is_empty());
    for c in &r.pv_corrections {
        assert!((c.deformed[0] - c.deformed[1] - TWO_PI_I * 2.0).norm() < 1e-12);
        assert!((0.5 * (c.deformed[0] + c.deformed[1]) - r.value).norm() < 1e-12);
    }
    assert!(pv.norm().is_finite());
}

#[test]
fn split_regularization_is_ladder_independent() {
    let eta = ThirdKindForm::jlog();
    for f in [QuadForm::new(0, 3, 1), QuadForm::new(1, 3, 0), QuadForm::new(2, 4, 0), QuadForm::new(0, 2, 1)] {
        let a = split_integral_ladder(&eta, &f, 1, 2.0, 1e-9).unwrap();
        let b = split_integral_ladder(&eta, &f, 1, 3.0, 1e-9).unwrap();
        assert!((a - b).norm() < 1e-6, "{f}: {a} {b}");
        let w = winding_index(&f, 1e-8).unwrap();
        let v = a / TWO_PI_I;
        assert!((v.re - w).abs() < 1e-6 && v.im.abs() < 1e-6, "{f}: {v} vs {w}");
    }
}

#[test]
fn traces_agree_between_routes() {
    let eta = ThirdKindForm::jlog();
    for (delta, r) in [(-3i64, 1i64), (-4, 0)] {
        for d in (3..=20).filter(|d| d % 4 == 0 || d % 4 == 3) {
            let e = trace_entry(delta, r, 1, d, &eta, 1e-9, true).unwrap();
            let w = e.trace_winding.unwrap();
            assert!((e.trace - w).abs() < 1e-6, "Delta={delta} d={d}: {} vs {w}", e.trace);
        }
    }
}

#[test]
fn l0_matches_class_number_formula() {
    for delta in [-3i64, -4, -7, -8, -11, -15, -20, -23, -24] {
        let (h, w) = brute_class_number(delta);
        assert_eq!(l0(delta).unwrap(), num_rational::Rational64::new(2 * h, w), "Delta={delta}");
    }
}

/// Reduced positive definite primitive forms: |b| <= a <= c, b >= 0 when
/// |b| = a or a = c.
fn brute_class_number(delta: i64) -> (i64, i64) {
    let mut h = 0;
    let m = -delta;
    for a in 1..=m {
        for b in -a..=a {
            let num = b * b - delta;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            if c < a || ((b.abs() == a || a == c) && b < 0) {
                continue;
            }
            if windtrace::arith::gcd(windtrace::arith::gcd(a, b), c) == 1 {
                h += 1;
            }
        }
    }
    let w = match delta {
        -3 => 6,
        -4 => 4,
        _ => 2,
    };
    (h, w)
}
