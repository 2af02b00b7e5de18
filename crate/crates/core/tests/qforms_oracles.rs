use proptest::prelude::*;
use std::collections::HashMap;
use windtrace::arith::{kronecker, Mat2};
use windtrace::qforms::{automorph, genus_character, ClassTable, GenusCharContext, QuadForm};

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// All forms of discriminant d with N | A inside a box, merged under the
/// given generators whenever both ends stay in the box.
fn box_components(n: i64, d: i64, k: i64, gens: &[Mat2]) -> (Vec<QuadForm>, Vec<usize>) {
    let mut forms = Vec::new();
    for a in (-k..=k).filter(|a| a % n == 0) {
        for b in -k..=k {
            if a == 0 {
                if b * b == d {
                    for c in -k..=k {
                        forms.push(QuadForm::new(0, b, c));
                    }
                }
                continue;
            }
            let num = b * b - d;
            if num % (4 * a) == 0 && (num / (4 * a)).abs() <= k {
                forms.push(QuadForm::new(a, b, num / (4 * a)));
            }
        }
    }
    let idx: HashMap<QuadForm, usize> = forms.iter().enumerate().map(|(i, f)| (*f, i)).collect();
    let mut dsu = Dsu::new(forms.len());
    for (i, f) in forms.iter().enumerate() {
        for g in gens {
            if let Some(&j) = idx.get(&f.act(g)) {
                dsu.union(i, j);
            }
        }
    }
    let roots = (0..forms.len()).map(|i| dsu.find(i)).collect();
    (forms, roots)
}

fn gamma0_generators(n: i64) -> Vec<Mat2> {
    let mut gens = Vec::new();
    let m = 2 * n + 1;
    for a in -m..=m {
        for b in -m..=m {
            for c in (-m..=m).filter(|c| c % n == 0) {
                for d in -m..=m {
                    let g = Mat2::new(a, b, c, d);
                    if g.det() == 1 {
                        gens.push(g);
                    }
                }
            }
        }
    }
    gens
}

/// Forms of the box grouped by component must match the class lookup, and
/// every class must be hit.
fn check_against_oracle(n: i64, d: i64, k: i64, gens: &[Mat2]) {
    let table = ClassTable::new(n, d).unwrap();
    let reps = table.representatives();
    let (forms, roots) = box_components(n, d, k, gens);
    let mut comp_to_class: HashMap<usize, QuadForm> = HashMap::new();
    let mut class_to_comp: HashMap<QuadForm, usize> = HashMap::new();
    for (f, r) in forms.iter().zip(&roots) {
        let c = table.class_of(f).unwrap();
        if let Some(prev) = comp_to_class.insert(*r, c) {
            assert_eq!(prev, c, "N={n} D={d}: one component meets two classes");
        }
        if let Some(prev) = class_to_comp.insert(c, *r) {
            // components of the truncated box may split a class, but a class
            // must never be split once the box is large enough
            assert_eq!(prev, *r, "N={n} D={d}: class {c} split across components");
        }
    }
    assert_eq!(class_to_comp.len(), reps.len(), "N={n} D={d}: class count");
    for r in &reps {
        assert_eq!(table.class_of(r).unwrap(), *r);
        assert_eq!(r.a % n, 0);
        assert_eq!(r.disc(), d);
    }
}

#[test]
fn level_one_classes_match_orbit_union() {
    let gens = [Mat2::S, Mat2::T, Mat2::T.inv()];
    for d in (5..=100).filter(|d| d % 4 <= 1) {
        let k = 2 * d + 10;
        check_against_oracle(1, d, k, &gens);
    }
}

#[test]
fn level_n_classes_match_orbit_union() {
    for n in 2..=4 {
        let gens = gamma0_generators(n);
        for d in (1..=40).filter(|d| d % 4 <= 1) {
            check_against_oracle(n, d, 2 * d + 12, &gens);
        }
    }
}

#[test]
fn square_discriminant_has_split_classes() {
    let reps = ClassTable::new(1, 4).unwrap().representatives();
    assert_eq!(reps.len(), 2);
    assert!(reps.iter().all(|f| windtrace::qforms::is_split_hyperbolic(f)));
}

#[test]
fn automorph_is_fundamental() {
    for d in (5..=120).filter(|d| d % 4 <= 1 && windtrace::arith::square_root(*d).is_none()) {
        for f in ClassTable::new(1, d).unwrap().representatives() {
            let g = automorph(&f, 1).unwrap().unwrap();
            assert_eq!(f.act(&g), f);
            assert!(g.trace().abs() > 2);
            // no automorph with a smaller u exists
            let c = f.content();
            let p = f.scale_down(c);
            let u = g.c / p.a;
            for uu in 1..u.abs() {
                let t2 = p.disc() * uu * uu + 4;
                let t = (t2 as f64).sqrt().round() as i64;
                assert_ne!(t * t, t2, "smaller solution u={uu} for {f}");
            }
        }
    }
}

#[test]
fn genus_character_on_diagonal_forms_is_kronecker() {
    for delta in [-3i64, -4, -7, -8, -11] {
        let ctx = GenusCharContext::new(delta, delta.rem_euclid(2), 1).unwrap();
        for c in 1..60 {
            if windtrace::arith::gcd(c, delta) == 1 {
                assert_eq!(genus_character(&ctx, &QuadForm::new(0, 0, c)), kronecker(delta, c));
            }
        }
    }
}

#[test]
fn genus_character_odd_under_negation() {
    let ctx = GenusCharContext::new(-3, 1, 1).unwrap();
    for f in ClassTable::new(1, 3 * 8).unwrap().representatives() {
        assert_eq!(genus_character(&ctx, &f.neg()), -genus_character(&ctx, &f));
    }
}

fn gamma0_word(n: i64) -> impl Strategy<Value = Mat2> {
    prop::collection::vec((0..3usize, -3i64..=3), 1..6).prop_map(move |w| {
        w.into_iter().fold(Mat2::I, |acc, (g, k)| {
            acc * match g {
                0 => Mat2::t_pow(k),
                1 => Mat2::new(1, 0, n * k, 1),
                _ => Mat2::I.neg(),
            }
        })
    })
}

proptest! {
    #[test]
    fn genus_character_is_class_function(
        (delta, r, n) in prop::sample::select(vec![(-3i64, 1i64, 1i64), (-4, 2, 2), (-3, 3, 3), (-7, 3, 4), (-4, 0, 1)]),
        d in 1i64..8,
        idx in 0usize..50,
        g in (1i64..=4).prop_flat_map(gamma0_word),
    ) {
        let ctx = GenusCharContext::new(delta, r, n).unwrap();
        let big_d = -delta * d * if d % 4 == 0 || d % 4 == 3 { 1 } else { 4 };
        let reps = ClassTable::new(n, big_d).unwrap().representatives();
        prop_assume!(!reps.is_empty());
        let f = reps[idx % reps.len()];
        let g = if g.c % n == 0 { g } else { Mat2::I };
        let chi = genus_character(&ctx, &f);
        prop_assert!((-1..=1).contains(&chi));
        prop_assert_eq!(genus_character(&ctx, &f.act(&g)), chi);
    }

    #[test]
    fn action_preserves_discriminant(a in -20i64..20, b in -20i64..20, c in -20i64..20, g in gamma0_word(3)) {
        let f = QuadForm::new(3 * a, b, c);
        let h = f.act(&g);
        prop_assert_eq!(h.disc(), f.disc());
        prop_assert_eq!(h.a % 3, 0);
        prop_assert_eq!(h.act(&g.inv()), f);
    }
}
