//! Shared fixtures for the criterion benchmarks.

use bsgrowth::bsmap::{BSMap, OrientationChoice};
use bsgrowth::builtins;
use bsgrowth::markov::MarkovPartition;
use bsgrowth::GroupPresentation;

/// Builds a built-in group by name.
pub fn group(name: &str) -> GroupPresentation {
    let spec = builtins::builtin(name).expect("known builtin");
    GroupPresentation::build(&spec).expect("builtin is valid")
}

/// Boundary map of a built-in group.
pub fn bs_map(name: &str) -> BSMap {
    BSMap::new(&group(name), OrientationChoice::Auto, false).expect("builtin admits a map")
}

/// Boundary map and its Markov partition.
pub fn fixture(name: &str) -> (BSMap, MarkovPartition) {
    let bs = bs_map(name);
    let p = MarkovPartition::new(&bs).expect("builtin admits a partition");
    (bs, p)
}
