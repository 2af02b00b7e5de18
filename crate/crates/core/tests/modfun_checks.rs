use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use windtrace::arith::Mat2;
use windtrace::modfun::{contour_residue, eval_eta_jlog, eval_j, residue_divisor, SpecialPoint, ThirdKindForm};

fn sl2_word() -> impl Strategy<Value = Mat2> {
    prop::collection::vec((0..2usize, -3i64..=3), 1..5)
        .prop_map(|w| w.into_iter().fold(Mat2::I, |acc, (g, k)| acc * if g == 0 { Mat2::t_pow(k) } else { Mat2::S }))
}

proptest! {
    #[test]
    fn j_is_invariant(x in -0.5f64..0.5, y in 0.9f64..2.0, g in sl2_word()) {
        let z = Complex64::new(x, y);
        let a = eval_j(z, 1e-6).unwrap();
        let b = eval_j(g.act(z), 1e-6).unwrap();
        prop_assert!((a - b).norm() < 1e-6 * (1.0 + a.norm()));
        let c = eval_j(z + 1.0, 1e-6).unwrap();
        prop_assert!((a - c).norm() < 1e-6 * (1.0 + a.norm()));
    }

    #[test]
    fn eta_has_weight_two(x in -0.5f64..0.5, y in 0.9f64..2.0, g in sl2_word()) {
        let z = Complex64::new(x, y);
        prop_assume!((z - Complex64::i()).norm() > 0.05);
        let a = eval_eta_jlog(z, 1e-10).unwrap();
        let b = eval_eta_jlog(g.act(z), 1e-10).unwrap();
        let jac = g.j(z);
        prop_assert!((b - a * jac * jac).norm() < 1e-8 * (1.0 + b.norm()));
        prop_assert!((eval_eta_jlog(z + 1.0, 1e-10).unwrap() - a).norm() < 1e-9 * (1.0 + a.norm()));
    }
}

#[test]
fn residue_at_cusp_in_q_coordinate() {
    // (1/2 pi i) integral of g dz over one horizontal period at height 10,
    // oriented so that q winds positively around 0
    let n = 64;
    let mut s = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let z = Complex64::new(k as f64 / n as f64, 10.0);
        s += eval_eta_jlog(z, 1e-12).unwrap();
    }
    let res = s / n as f64 / Complex64::new(0.0, 2.0 * PI);
    assert!((res - Complex64::new(-1.0, 0.0)).norm() < 1e-8, "{res}");
}

#[test]
fn residue_at_i_with_orbifold_factor() {
    // i has stabilizer of order 2 in PSL2(Z); the local coordinate is (z-i)^2
    let raw = contour_residue(Complex64::i(), 0.05, 256, 1e-12).unwrap();
    assert!((raw / 2.0 - 1.0).norm() < 1e-6, "{raw}");
    let div = residue_divisor(&ThirdKindForm::jlog());
    assert_eq!(div[0].0, SpecialPoint::I);
    assert_eq!(div[0].1, num_rational::Rational64::from_integer(1));
    let total: num_rational::Rational64 = div.iter().map(|p| p.1).sum();
    assert_eq!(total, num_rational::Rational64::from_integer(0));
    let f = ThirdKindForm::jlog();
    assert_eq!(f.residue_at(Complex64::new(0.3, 1.4)).unwrap(), num_rational::Rational64::from_integer(0));
    assert_eq!(f.residue_at(Complex64::new(1.0, 1.0)).unwrap(), num_rational::Rational64::from_integer(1));
}

#[test]
fn precision_error_when_tolerance_is_unreachable() {
    assert!(eval_j(Complex64::new(0.0, 10.0), 1e-12).is_err());
}
