mod common;

use bsgrowth::bsmap::{BSMap, OrientationChoice};
use bsgrowth::builtins;
use bsgrowth::geometry::{ccw_dist, TAU};
use bsgrowth::{Error, GroupPresentation, Orientation};
use common::{bs_map, domain_points, OCTAGON, SCHOTTKY, TORUS};
use proptest::prelude::*;

#[test]
fn domain_covers_circle_for_first_kind() {
    for name in [OCTAGON, TORUS] {
        let bs = bs_map(name);
        assert!(bs.first_kind);
        assert!((bs.domain_length() - TAU).abs() < 1e-12, "{name}");
    }
    let bs = bs_map(SCHOTTKY);
    assert!(!bs.first_kind);
    assert!((bs.domain_length() - 8.0 * builtins::SCHOTTKY_HALF_ANGLE).abs() < 1e-12);
}

#[test]
fn branches_are_ordered_and_disjoint() {
    for name in [OCTAGON, SCHOTTKY, TORUS] {
        let bs = bs_map(name);
        let m = bs.branches.len();
        for (i, b) in bs.branches.iter().enumerate() {
            assert_eq!(b.letter, i);
            assert!(b.map.approx_eq(&bs.group.generators[bs.group.inverse_letter(i)], 1e-12));
            let next = &bs.branches[(i + 1) % m];
            let gap = ccw_dist(b.arc.start(), next.arc.start());
            assert!(gap >= b.arc.len() - 1e-12, "{name} branch {i}");
        }
    }
}

#[test]
fn auto_orientation_is_anticlockwise_for_builtins() {
    for name in [OCTAGON, SCHOTTKY, TORUS] {
        let bs = bs_map(name);
        assert_eq!(bs.orientation(), Orientation::Ccw);
        assert!(bs.orientation_counterexample(500, 12).is_none());
    }
}

#[test]
fn wrong_orientation_is_caught_on_the_octagon() {
    let g = GroupPresentation::build(&builtins::octagon_genus2()).unwrap();
    let bs = BSMap::new(&g, OrientationChoice::Cw, false);
    let caught = match bs {
        Err(_) => true,
        Ok(bs) => !bs.warnings.is_empty() || bs.orientation_counterexample(2000, 12).is_some(),
    };
    assert!(caught);
}

#[test]
fn expansions_are_admissible() {
    for name in [OCTAGON, SCHOTTKY, TORUS] {
        let bs = bs_map(name);
        for x in domain_points(&bs, 400) {
            let e = bs.f_expand(x, 14);
            assert!(bs.group.is_admissible(&e.word), "{name} {x} {:?}", e.word);
            if bs.first_kind {
                assert_eq!(e.escaped_at, None);
            }
        }
    }
}

#[test]
fn points_lie_in_their_nested_cylinders() {
    for name in [OCTAGON, SCHOTTKY, TORUS] {
        let bs = bs_map(name);
        for x in domain_points(&bs, 100) {
            let e = bs.f_expand(x, 8);
            let mut outer: Option<bsgrowth::Arc> = None;
            for k in 1..=e.word.len() {
                let c = bs.cylinder(&e.word[..k]).unwrap();
                assert!(c.arc.contains_closed(x, 1e-9), "{name} {x} {:?}", &e.word[..k]);
                if let Some(o) = outer {
                    assert!(o.contains_arc(&c.arc, 1e-9));
                }
                outer = Some(c.arc);
            }
        }
    }
}

#[test]
fn cylinder_lies_in_pulled_back_branch() {
    let bs = bs_map(OCTAGON);
    for x in domain_points(&bs, 30) {
        let w = bs.f_expand(x, 5).word;
        let c = bs.cylinder(&w).unwrap();
        let prefix = bs.group.evaluate(&w[..w.len() - 1]);
        let img = bs.branches[*w.last().unwrap()].arc.image(&prefix);
        assert!(img.contains_arc(&c.arc, 1e-9));
        assert!(c.arc.contains_closed(x, 1e-9));
        assert!(c.transform.approx_eq(&bs.group.evaluate(&w), 1e-9));
    }
}

#[test]
fn non_admissible_words_have_no_cylinder() {
    for name in [OCTAGON, SCHOTTKY] {
        let bs = bs_map(name);
        let back = bs.group.inverse_letter(0);
        assert!(matches!(bs.cylinder(&[0, back]), Err(Error::Word(_))), "{name}");
        assert!(matches!(bs.cylinder(&[]), Err(Error::Word(_))));
        assert!(matches!(bs.cylinder(&[99]), Err(Error::Word(_))));
    }
}

#[test]
fn schottky_fixed_points_have_constant_expansions() {
    let bs = bs_map(SCHOTTKY);
    for k in 0..4 {
        let x = bs.group.generators[k].classify().fixed_points[0].angle();
        assert_eq!(bs.f_expand(x, 6).word, vec![k; 6]);
    }
}

#[test]
fn schottky_map_is_uniformly_expanding() {
    let bs = bs_map(SCHOTTKY);
    for x in domain_points(&bs, 1000) {
        assert!(bs.log_derivative(x).unwrap() > 0.0);
    }
    assert!(bs.locate(0.0).is_none() || bs.branches.iter().any(|b| b.arc.contains(0.0)));
}

#[test]
fn escape_is_reported() {
    let bs = bs_map(SCHOTTKY);
    let gap = bs.branches.iter().map(|b| b.arc.start() + b.arc.len() + 1e-3).find(|&x| bs.locate(x).is_none()).unwrap();
    let e = bs.f_expand(gap, 5);
    assert_eq!(e.escaped_at, Some(0));
    assert!(e.word.is_empty());
}

#[test]
fn duality_offsets_stay_bounded() {
    let bs = bs_map(SCHOTTKY);
    let r = bs.duality_report(8, 4, 0.05, 1e6).unwrap();
    assert_eq!(r.words, (1..=8).map(|n| 4 * 3usize.pow(n - 1)).sum::<usize>());
    assert_eq!(r.violations, 0);
    assert!(r.c.is_finite() && r.c > 0.0);
    assert!(matches!(bs.duality_report(20, 4, 0.05, 1e3), Err(Error::Budget(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn map_inverts_branch_letter(t in 0.0..1.0f64) {
        let bs = bs_map(OCTAGON);
        let x = t * TAU;
        let (y, i) = bs.apply(x).unwrap();
        let back = bs.group.generators[i].apply_angle(y);
        prop_assert!(ccw_dist(back, x).min(ccw_dist(x, back)) < 1e-10);
        prop_assert!(bs.branches[i].arc.contains(x));
    }

    #[test]
    fn step_agrees_with_parts(t in 0.0..1.0f64) {
        let bs = bs_map(TORUS);
        let x = t * TAU;
        let (y, i, d) = bs.step(x).unwrap();
        prop_assert_eq!(bs.apply(x).unwrap(), (y, i));
        prop_assert_eq!(bs.log_derivative(x).unwrap(), d);
    }
}
