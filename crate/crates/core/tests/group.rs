use bsgrowth::automaton::Automaton;
use bsgrowth::builtins::{self, BUILTIN_NAMES};
use bsgrowth::group::{CycleKind, GroupPresentation, GroupSpec, Orientation};
use bsgrowth::{Error, MoebiusTransform};
use proptest::prelude::*;
use std::collections::HashSet;

fn presentation(name: &str) -> GroupPresentation {
    GroupPresentation::build(&builtins::builtin(name).unwrap()).unwrap()
}

const SCALE: f64 = 1e6;

// Sign-normalized matrix entries on a grid; `-g` and `g` act identically.
fn key(g: &MoebiusTransform) -> [i64; 4] {
    let s = if g.a.re < 0.0 || (g.a.re == 0.0 && g.a.im < 0.0) { -1.0 } else { 1.0 };
    [g.a.re, g.a.im, g.b.re, g.b.im].map(|x| (s * x * SCALE).round() as i64)
}

struct ElementSet(HashSet<[i64; 4]>);

impl ElementSet {
    fn contains(&self, g: &MoebiusTransform) -> bool {
        let k = key(g);
        (0..81).any(|code| {
            let mut c = code;
            let mut probe = k;
            for p in probe.iter_mut() {
                *p += c % 3 - 1;
                c /= 3;
            }
            self.0.contains(&probe)
        })
    }

    fn insert(&mut self, g: &MoebiusTransform) {
        self.0.insert(key(g));
    }
}

// Sphere sizes of the Cayley graph from a breadth-first search over group elements.
fn cayley_spheres(g: &GroupPresentation, n: usize) -> Vec<usize> {
    let id = MoebiusTransform::identity();
    let mut seen = ElementSet(HashSet::new());
    seen.insert(&id);
    let mut sphere = vec![id];
    let mut sizes = vec![1];
    for _ in 0..n {
        let mut next = Vec::new();
        for x in &sphere {
            for e in &g.generators {
                let y = x.compose(e);
                if !seen.contains(&y) {
                    seen.insert(&y);
                    next.push(y);
                }
            }
        }
        sizes.push(next.len());
        sphere = next;
    }
    sizes
}

#[test]
fn admissible_counts_match_cayley_graph() {
    for (name, n) in [("octagon-genus2", 4), ("schottky-rank2", 6), ("punctured-torus-ideal-square", 6)] {
        let g = presentation(name);
        let oracle = cayley_spheres(&g, n);
        let counts: Vec<usize> = g.automaton().count_words(n).iter().map(|&x| x as usize).collect();
        assert_eq!(counts, oracle, "{name}");
        let flipped = g.with_orientation(g.orientation.flipped());
        let counts: Vec<usize> = flipped.automaton().count_words(n).iter().map(|&x| x as usize).collect();
        assert_eq!(counts, oracle, "{name} flipped");
    }
}

#[test]
fn free_groups_grow_by_three() {
    for name in ["schottky-rank2", "punctured-torus-ideal-square"] {
        let c = presentation(name).automaton().count_words(10);
        for (n, &x) in c.iter().enumerate().skip(1) {
            assert_eq!(x, 4.0 * 3f64.powi(n as i32 - 1));
        }
    }
}

#[test]
fn octagon_counts() {
    let c = presentation("octagon-genus2").automaton().count_words(3);
    assert_eq!(c, vec![1.0, 8.0, 56.0, 392.0]);
}

fn genus3() -> GroupPresentation {
    let psi = builtins::regular_half_angle(12, std::f64::consts::PI / 6.0);
    GroupPresentation::build(&builtins::regular_spec("dodecagon-genus3", 12, psi)).unwrap()
}

// Cannon's growth series of the genus-g surface group in its regular 4g-gon presentation:
// (1 + 2x + ⋯ + 2x^{2g−1} + x^{2g}) / (1 − (4g−2)(x + ⋯ + x^{2g−1}) + x^{2g}).
fn surface_growth_coefficients(genus: usize) -> (Vec<i64>, Vec<i64>) {
    let d = 2 * genus;
    let mut num = vec![2i64; d + 1];
    num[0] = 1;
    num[d] = 1;
    let mut den = vec![-(4 * genus as i64 - 2); d + 1];
    den[0] = 1;
    den[d] = 1;
    (num, den)
}

fn series_mod(genus: usize, n: usize, p: i64) -> Vec<i64> {
    let (num, den) = surface_growth_coefficients(genus);
    let mut s = vec![0i64; n + 1];
    for k in 0..=n {
        let mut v = num.get(k).copied().unwrap_or(0);
        for j in 1..den.len().min(k + 1) {
            v -= den[j] * s[k - j];
        }
        s[k] = v.rem_euclid(p);
    }
    s
}

fn automaton_counts_mod(g: &GroupPresentation, n: usize, p: i64) -> Vec<i64> {
    let a = g.automaton();
    let mut v = vec![0i64; a.states()];
    v[0] = 1;
    let mut out = vec![1];
    for _ in 0..n {
        let mut w = vec![0i64; a.states()];
        for (s, &x) in v.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for c in 0..a.alphabet() {
                let t = a.step(s as u32, c);
                if t != Automaton::DEAD {
                    w[t as usize] = (w[t as usize] + x) % p;
                }
            }
        }
        out.push(w.iter().fold(0, |acc, &x| (acc + x) % p));
        v = w;
    }
    out
}

#[test]
fn surface_group_counts_match_growth_series() {
    let exact = [1.0, 8.0, 56.0, 392.0, 2736.0, 19096.0, 133288.0, 930328.0, 6493536.0, 45323816.0, 316352792.0];
    assert_eq!(presentation("octagon-genus2").automaton().count_words(10), exact);
    // Both sequences satisfy linear recurrences whose orders add up to less than the
    // number of compared terms, so agreement here is agreement at every length.
    for (genus, g) in [(2, presentation("octagon-genus2")), (3, genus3())] {
        for g in [g.with_orientation(Orientation::Ccw), g.with_orientation(Orientation::Cw)] {
            let n = g.automaton().states() + 2 * genus + 2;
            for p in [1_000_000_007i64, 998_244_353] {
                assert_eq!(automaton_counts_mod(&g, n, p), series_mod(genus, n, p), "genus {genus}");
            }
        }
    }
}

#[test]
fn genus3_counts_match_cayley_graph() {
    let g = genus3();
    assert!(g.even_corner_check().passed);
    let oracle = cayley_spheres(&g, 3);
    let counts: Vec<usize> = g.automaton().count_words(3).iter().map(|&x| x as usize).collect();
    assert_eq!(counts, oracle);
}

#[test]
fn chains_of_half_cycles_are_not_admissible() {
    let g = presentation("octagon-genus2");
    // Exchanging the two clockwise half cycles from the right ends in a cancellation.
    let chain = [1, 6, 3, 0, 6, 3, 0, 5];
    let short = [0, 3, 6, 0, 3, 6];
    assert!(g.is_reduced(&chain));
    assert!(!g.is_admissible(&chain));
    assert!(g.is_admissible(&short));
    let x = g.evaluate(&short);
    assert!(g.evaluate(&chain).approx_eq(&x, 1e-9 * (1.0 + x.a.norm_sqr())));
    assert!(matches!(g.reduce_to_admissible(&chain), Err(Error::Word(_))));
    let longer = [1, 6, 3, 0, 6, 3, 0, 6, 3, 0, 5];
    assert!(!g.is_admissible(&longer));
    assert!(g.is_admissible(&longer[1..]));
}

#[test]
fn kinds() {
    let oct = presentation("octagon-genus2");
    let sch = presentation("schottky-rank2");
    let tor = presentation("punctured-torus-ideal-square");
    assert!(oct.is_first_kind() && !oct.has_cusp());
    assert!(!sch.is_first_kind() && !sch.has_cusp());
    assert!(tor.is_first_kind() && tor.has_cusp());
    assert_eq!(oct.m(), 8);
    assert_eq!(oct.cycles.len(), 1);
    assert_eq!(oct.cycles[0].half_length(), Some(4));
    assert_eq!(tor.cusps().len(), 4);
}

#[test]
fn generators_pair_sides() {
    for name in BUILTIN_NAMES {
        let g = presentation(name);
        for k in 0..g.m() {
            let j = g.inverse_letter(k);
            assert_eq!(g.inverse_letter(j), k);
            assert!(g.generators[k].compose(&g.generators[j]).approx_eq(&MoebiusTransform::identity(), 1e-9));
            let src = g.sides[j];
            // e_k carries the inside of side j to the outside of side k, reversing the endpoints.
            let (p, q) = (g.generators[k].apply_angle(src.p), g.generators[k].apply_angle(src.q));
            let near = |x: f64, y: f64| bsgrowth::geometry::ccw_dist(x, y).min(bsgrowth::geometry::ccw_dist(y, x)) < 1e-9;
            assert!(near(p, g.sides[k].q) && near(q, g.sides[k].p), "{name} side {k}");
        }
    }
}

#[test]
fn cycle_words_are_relations() {
    for name in ["octagon-genus2", "punctured-torus-ideal-square"] {
        let g = presentation(name);
        for c in &g.cycles {
            for w in [&c.cw_word, &c.ccw_word] {
                let x = g.evaluate(w);
                match c.kind {
                    CycleKind::Interior { n, angle_sum } => {
                        assert_eq!(w.len(), 2 * n);
                        assert!((angle_sum - std::f64::consts::TAU).abs() < 1e-9);
                        assert!(x.approx_eq(&MoebiusTransform::identity(), 1e-8), "{name} {w:?}");
                    }
                    CycleKind::Cusp { .. } => {
                        assert_eq!(x.classify().kind, bsgrowth::geometry::Kind::Parabolic, "{name} {w:?}");
                    }
                    CycleKind::Improper => {}
                }
            }
        }
    }
}

#[test]
fn half_cycles_rewrite_to_admissible_spellings() {
    let g = presentation("octagon-genus2");
    let c = &g.cycles[0];
    let n = c.half_length().unwrap();
    for w in [&c.cw_word, &c.ccw_word] {
        for r in 0..w.len() {
            let rotated: Vec<usize> = w.iter().cycle().skip(r).take(2 * n).copied().collect();
            for len in [n - 1, n] {
                let sub = &rotated[..len];
                let out = g.reduce_to_admissible(sub).unwrap();
                assert_eq!(out.len(), len);
                assert!(g.is_admissible(&out), "{sub:?} -> {out:?}");
                assert!(g.evaluate(&out).approx_eq(&g.evaluate(sub), 1e-8));
            }
        }
    }
}

#[test]
fn admissible_words_are_fixed_by_rewriting() {
    let g = presentation("octagon-genus2");
    assert_eq!(g.enumerate_admissible(1, 1e6).unwrap().len(), g.m());
    let words = g.enumerate_admissible(3, 1e6).unwrap();
    assert_eq!(words.len(), 392);
    for w in &words {
        assert!(g.is_reduced(w));
        assert_eq!(&g.reduce_to_admissible(w).unwrap(), w);
    }
}

#[test]
fn enumeration_respects_budget() {
    let g = presentation("octagon-genus2");
    assert!(matches!(g.enumerate_admissible(8, 1000.0), Err(Error::Budget(_))));
    let mut seen = 0;
    g.for_each_admissible(2, 1e3, |w: &[usize], x: &MoebiusTransform| {
        assert!(x.approx_eq(&g.evaluate(w), 1e-9));
        seen += 1;
    })
    .unwrap();
    assert_eq!(seen, 64);
}

#[test]
fn rewriting_rejects_bad_input() {
    let g = presentation("octagon-genus2");
    assert!(matches!(g.reduce_to_admissible(&[9]), Err(Error::Word(_))));
    assert!(matches!(g.reduce_to_admissible(&vec![0; 65]), Err(Error::Word(_))));
}

#[test]
fn orientation_flip_is_an_involution() {
    assert_eq!(Orientation::Cw.flipped(), Orientation::Ccw);
    assert_eq!(Orientation::Ccw.flipped(), Orientation::Cw);
}

#[test]
fn specs_roundtrip_through_json() {
    for name in BUILTIN_NAMES {
        let s = builtins::builtin(name).unwrap();
        assert_eq!(GroupSpec::from_json(&s.to_json()).unwrap(), s);
    }
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(matches!(GroupSpec::from_json("{"), Err(Error::Spec(_))));
    let mut s = builtins::octagon_genus2();
    s.pairing[0] = [1, 1];
    assert!(matches!(GroupPresentation::build(&s), Err(Error::Spec(_))));
    let mut s = builtins::octagon_genus2();
    s.pairing[0] = [1, 9];
    assert!(matches!(GroupPresentation::build(&s), Err(Error::Spec(_))));
    let mut s = builtins::octagon_genus2();
    s.pairing.pop();
    assert!(matches!(GroupPresentation::build(&s), Err(Error::Spec(_))));
    let text = builtins::octagon_genus2().to_json().replacen("\"p\": \"", "\"p\": \"x", 1);
    assert!(matches!(GroupPresentation::build(&GroupSpec::from_json(&text).unwrap()), Err(Error::Spec(_))));
}

fn admissible_word() -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0usize..8, 1..12).prop_map(|raw| {
        let g = presentation("octagon-genus2");
        let a = g.automaton();
        let mut w = Vec::new();
        let mut s = 0;
        for c in raw {
            // First accepted letter at or after `c`, cyclically.
            if let Some(l) = (0..8).map(|t| (c + t) % 8).find(|&l| a.step(s, l) != Automaton::DEAD) {
                s = a.step(s, l);
                w.push(l);
            }
        }
        w
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn admissible_words_are_geodesic(w in admissible_word()) {
        let g = presentation("octagon-genus2");
        prop_assert!(g.is_admissible(&w));
        prop_assert_eq!(&g.reduce_to_admissible(&w).unwrap(), &w);
        // The inverse of a shortest word is shortest, so it rewrites to an admissible word of equal length.
        let inv: Vec<usize> = w.iter().rev().map(|&l| g.inverse_letter(l)).collect();
        let r = g.reduce_to_admissible(&inv).unwrap();
        prop_assert_eq!(r.len(), w.len());
        let x = g.evaluate(&w);
        prop_assert!(g.evaluate(&r).approx_eq(&x.inverse(), 1e-9 * (1.0 + x.a.norm_sqr())));
    }
}
