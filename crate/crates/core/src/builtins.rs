//! Built-in fundamental polygons.

use crate::group::{GroupSpec, SideSpec};
use std::f64::consts::PI;

pub const BUILTIN_NAMES: [&str; 3] = ["octagon-genus2", "schottky-rank2", "punctured-torus-ideal-square"];

/// Endpoint half-angle of the four Schottky sides.
pub const SCHOTTKY_HALF_ANGLE: f64 = 0.72;

fn angle_string(x: f64) -> String {
    format!("{x:.17}")
}

/// Polygon with `m` congruent sides centred at angles `2πk/m`, each cutting off
/// a boundary arc of half-width `psi`, opposite sides paired.
pub fn regular_spec(name: &str, m: usize, psi: f64) -> GroupSpec {
    assert!(m.is_multiple_of(2) && m >= 4);
    let step = 2.0 * PI / m as f64;
    let free = psi < 0.5 * step - 1e-15;
    let mut sides = Vec::new();
    let mut position = Vec::new();
    for k in 0..m {
        let c = step * k as f64;
        position.push(sides.len() + 1);
        sides.push(SideSpec::Geodesic {
            p: angle_string(c - psi),
            q: angle_string(c + psi),
        });
        if free {
            sides.push(SideSpec::Free {
                free: [angle_string(c + psi), angle_string(c + step - psi)],
            });
        }
    }
    let pairing = (0..m / 2).map(|k| [position[k], position[k + m / 2]]).collect();
    GroupSpec {
        name: name.to_string(),
        kind_hint: None,
        sides,
        pairing,
    }
}

/// Half-width of the arc cut off by a side of the regular `m`-gon with interior angle `alpha`.
pub fn regular_half_angle(m: usize, alpha: f64) -> f64 {
    let apothem = ((0.5 * alpha).cos() / (PI / m as f64).sin()).acosh();
    apothem.tanh().acos()
}

pub fn octagon_genus2() -> GroupSpec {
    let mut s = regular_spec("octagon-genus2", 8, regular_half_angle(8, PI / 4.0));
    s.kind_hint = Some("first kind, compact".into());
    s
}

pub fn schottky_rank2() -> GroupSpec {
    let mut s = regular_spec("schottky-rank2", 4, SCHOTTKY_HALF_ANGLE);
    s.kind_hint = Some("second kind, free".into());
    s
}

pub fn punctured_torus() -> GroupSpec {
    let mut s = regular_spec("punctured-torus-ideal-square", 4, PI / 4.0);
    s.kind_hint = Some("first kind, cusped".into());
    s
}

pub fn builtin(name: &str) -> Option<GroupSpec> {
    match name {
        "octagon-genus2" => Some(octagon_genus2()),
        "schottky-rank2" => Some(schottky_rank2()),
        "punctured-torus-ideal-square" => Some(punctured_torus()),
        _ => None,
    }
}
