mod common;

use bsgrowth::markov::{InducedSystem, MarkovPartition};
use bsgrowth::geometry::TAU;
use common::{domain_points, fixture, bs_map, OCTAGON, SCHOTTKY, TORUS};
use std::collections::VecDeque;

fn reachable(p: &MarkovPartition, from: usize) -> Vec<bool> {
    let mut seen = vec![false; p.len()];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(a) = queue.pop_front() {
        for &b in &p.succ[a] {
            if !seen[b] {
                seen[b] = true;
                queue.push_back(b);
            }
        }
    }
    seen
}

#[test]
fn cell_counts() {
    for (name, cells, level, cusp_cells) in [(OCTAGON, 48, None, 0), (SCHOTTKY, 4, None, 0), (TORUS, 20, Some(3), 8)] {
        let (_, p) = fixture(name);
        assert_eq!(p.len(), cells, "{name}");
        assert_eq!(p.cusp_cells().len(), cusp_cells, "{name}");
        if let Some(l) = level {
            assert_eq!(p.level(), l);
        }
    }
}

#[test]
fn residuals_vanish() {
    for name in [OCTAGON, SCHOTTKY, TORUS] {
        let (_, p) = fixture(name);
        assert!(p.m2_residual < 1e-9, "{name} {}", p.m2_residual);
        assert!(p.w_prime.invariance_residual < 1e-9, "{name}");
    }
}

#[test]
fn cells_tile_the_domain() {
    for name in [OCTAGON, SCHOTTKY, TORUS] {
        let (bs, p) = fixture(name);
        let total: f64 = p.cells.iter().map(|c| c.arc.len()).sum();
        assert!((total - bs.domain_length()).abs() < 1e-9, "{name}");
        for (i, c) in p.cells.iter().enumerate() {
            assert!(bs.branches[c.branch].arc.contains_arc(&c.arc, 1e-12));
            assert_eq!(p.cell_of(c.arc.midpoint()), Some(i));
        }
        if bs.first_kind {
            assert!((total - TAU).abs() < 1e-9);
        }
    }
}

#[test]
fn images_are_unions_of_successor_cells() {
    for name in [OCTAGON, SCHOTTKY, TORUS] {
        let (bs, p) = fixture(name);
        for (a, cell) in p.cells.iter().enumerate() {
            let img = cell.arc.image(&bs.branches[cell.branch].map);
            assert!((img.len() - cell.image.len()).abs() < 1e-9);
            let in_domain: f64 = bs
                .branches
                .iter()
                .flat_map(|br| img.intersect(&br.arc))
                .map(|x| x.len())
                .sum();
            let covered: f64 = p.succ[a].iter().map(|&b| p.cells[b].arc.len()).sum();
            assert!((covered - in_domain).abs() < 1e-9, "{name} cell {a}");
            for &b in &p.succ[a] {
                assert!(img.contains_arc(&p.cells[b].arc, 1e-9), "{name} {a} -> {b}");
            }
            // No other cell meets the image in a set of positive length.
            for b in 0..p.len() {
                if !p.has_transition(a, b) {
                    let overlap: f64 = img.intersect(&p.cells[b].arc).iter().map(|x| x.len()).sum();
                    assert!(overlap < 1e-9, "{name} {a} -> {b}");
                }
            }
        }
    }
}

#[test]
fn transition_graph_is_irreducible() {
    for name in [OCTAGON, SCHOTTKY, TORUS] {
        let (_, p) = fixture(name);
        let live: Vec<usize> = (0..p.len()).filter(|c| !p.transient.contains(c)).collect();
        for &a in &live {
            let r = reachable(&p, a);
            assert!(live.iter().all(|&b| r[b]), "{name} from {a}");
        }
        let m = p.matrix();
        assert_eq!(m.iter().flatten().filter(|&&x| x == 1).count(), p.succ.iter().map(Vec::len).sum::<usize>());
    }
}

#[test]
fn cusp_cells_march_towards_the_cusp() {
    let (_, p) = fixture(TORUS);
    for c in p.cusp_cells() {
        let inside: Vec<usize> = p.succ[c].iter().copied().filter(|&b| !p.is_core(b)).collect();
        assert!(inside.len() <= 1, "cusp cell {c} branches inside the neighbourhood");
    }
}

#[test]
fn cell_words_are_paths_with_containing_cylinders() {
    for name in [OCTAGON, SCHOTTKY, TORUS] {
        let (bs, p) = fixture(name);
        for x in domain_points(&bs, 200) {
            let Some(w) = p.cell_word(&bs, x, 6) else {
                assert!(!bs.first_kind);
                continue;
            };
            assert!(p.is_path(&w), "{name} {w:?}");
            assert!(p.cylinder(&bs, &w).unwrap().contains_closed(x, 1e-9));
            let letters: Vec<usize> = w.iter().map(|&c| p.cells[c].branch).collect();
            assert_eq!(letters, bs.f_expand(x, 6).word);
        }
    }
}

#[test]
fn non_paths_are_rejected() {
    let (bs, p) = fixture(OCTAGON);
    let b = (0..p.len()).find(|&b| !p.has_transition(0, b)).unwrap();
    assert!(p.cylinder(&bs, &[0, b]).is_err());
    assert!(p.cylinder(&bs, &[]).is_err());
}

#[test]
fn explicit_cusp_level_matches_automatic() {
    let bs = bs_map(TORUS);
    let p = MarkovPartition::with_level(&bs, 3).unwrap();
    assert_eq!(p.len(), 20);
}

#[test]
fn induced_system_has_parabolic_tails() {
    let (bs, p) = fixture(TORUS);
    let ind = InducedSystem::new(&bs, &p, 200).unwrap();
    assert_eq!(ind.core, p.core_cells());
    assert_eq!(ind.cardinality.len(), 200);
    assert!(ind.cardinality.iter().skip(1).all(|&c| c <= ind.cardinality_bound));
    assert!(ind.cardinality.iter().skip(1).all(|&c| c > 0));
    let s = ind.length_slope(5, 200);
    assert!((s + 2.0).abs() < 0.2, "slope {s}");
}

#[test]
fn induced_system_of_compact_group_is_trivial() {
    let (bs, p) = fixture(OCTAGON);
    let ind = InducedSystem::new(&bs, &p, 10).unwrap();
    assert!(ind.excursions.is_empty());
    assert_eq!(ind.core.len(), p.len());
}
