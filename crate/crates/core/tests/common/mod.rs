#![allow(dead_code)]

use bsgrowth::bsmap::{BSMap, OrientationChoice};
use bsgrowth::builtins;
use bsgrowth::markov::MarkovPartition;
use bsgrowth::GroupPresentation;

pub const OCTAGON: &str = "octagon-genus2";
pub const SCHOTTKY: &str = "schottky-rank2";
pub const TORUS: &str = "punctured-torus-ideal-square";

pub fn bs_map(name: &str) -> BSMap {
    let g = GroupPresentation::build(&builtins::builtin(name).unwrap()).unwrap();
    BSMap::new(&g, OrientationChoice::Auto, false).unwrap()
}

pub fn fixture(name: &str) -> (BSMap, MarkovPartition) {
    let bs = bs_map(name);
    let p = MarkovPartition::new(&bs).unwrap();
    (bs, p)
}

/// Deterministic points spread over the domain of the map.
pub fn domain_points(bs: &BSMap, count: usize) -> Vec<f64> {
    let total = bs.domain_length();
    (0..count)
        .map(|k| {
            let mut s = total * (k as f64 + 0.5) / count as f64 * 0.999_731;
            for b in &bs.branches {
                if s < b.arc.len() {
                    return b.arc.start() + s;
                }
                s -= b.arc.len();
            }
            unreachable!()
        })
        .collect()
}
