//! Geodesic cutting sequences and their comparison with f-expansions.
//!
//! A geodesic is carried as its backward endpoint together with a symbolic forward
//! endpoint: a word `a_0 a_1 ⋯ a_{N−1}` of the boundary map and the orbit points
//! `y_k = f^k(γ⁺)`, rebuilt from the last one by inverse branches. The tracer works in
//! the frame of the current copy of the polygon, where both endpoints are well
//! conditioned, so depth is not limited by the precision of `γ⁺` as an angle.

use crate::bsmap::BSMap;
use crate::error::{Error, Result};
use crate::geometry::{Geodesic, MoebiusTransform};
use crate::markov::{tiles_at_vertex, MarkovPartition};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use std::collections::HashMap;

/// Extra expansion letters kept beyond the traced depth.
const LOOKAHEAD: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Frame {
    /// The two copies coincide.
    Same,
    /// The copies share a side.
    Side,
    /// The copies share only a vertex.
    Vertex,
    /// The copies are neither adjacent nor vertex-sharing.
    Apart,
}

#[derive(Clone, Debug)]
pub struct SymbolicGeodesic {
    pub neg: f64,
    /// f-expansion letters of the forward endpoint.
    pub letters: Vec<usize>,
    /// `y_k = f^k(γ⁺)` for `k < letters.len()`.
    pub orbit: Vec<f64>,
}

impl SymbolicGeodesic {
    pub fn pos(&self) -> f64 {
        self.orbit[0]
    }

    pub fn geodesic(&self) -> Geodesic {
        Geodesic::new(
            crate::BoundaryPoint::new(self.neg),
            crate::BoundaryPoint::new(self.pos()),
        )
    }

    /// Rebuilds the forward orbit from the last point by inverse branches.
    fn from_word(bs: &BSMap, neg: f64, letters: Vec<usize>, last: f64) -> Self {
        let n = letters.len();
        let mut orbit = vec![0.0; n];
        orbit[n - 1] = last;
        for k in (0..n - 1).rev() {
            orbit[k] = bs.group.generators[letters[k]].apply_angle(orbit[k + 1]);
        }
        SymbolicGeodesic { neg, letters, orbit }
    }

    /// The geodesic `(θ₁, θ₂)`, with `θ₂` re-derived from its first `depth + 40` letters.
    pub fn from_endpoints(bs: &BSMap, neg: f64, pos: f64, depth: usize) -> Result<Self> {
        let n = depth + LOOKAHEAD;
        let e = bs.f_expand(pos, n);
        if let Some(k) = e.escaped_at {
            return Err(Error::Numerical(format!(
                "forward endpoint leaves the domain after {k} steps"
            )));
        }
        let mut y = pos;
        for &l in &e.word[..n - 1] {
            y = bs.branches[l].map.apply_angle(y);
        }
        Ok(Self::from_word(bs, neg, e.word, y))
    }

    /// Forward endpoint from a uniformly random walk of `depth + 40` cells, backward
    /// endpoint through a random point near the centre of the polygon.
    pub fn random<R: Rng>(
        bs: &BSMap,
        partition: &MarkovPartition,
        depth: usize,
        rng: &mut R,
    ) -> Self {
        let n = depth + LOOKAHEAD;
        let live: Vec<usize> = (0..partition.len())
            .filter(|c| !partition.transient.contains(c))
            .collect();
        let mut c = live[rng.random_range(0..live.len())];
        let mut cells = vec![c];
        while cells.len() < n {
            let s = &partition.succ[c];
            c = s[rng.random_range(0..s.len())];
            cells.push(c);
        }
        let letters = cells.iter().map(|&c| partition.cells[c].branch).collect();
        let last = partition.cells[c].arc.midpoint();
        let mut geo = Self::from_word(bs, 0.0, letters, last);
        let r = 0.2 * rng.random::<f64>().sqrt();
        let z = Complex64::from_polar(r, rng.random::<f64>() * crate::geometry::TAU);
        let through = Geodesic::through(z, crate::BoundaryPoint::new(geo.pos()));
        geo.neg = through.neg().angle();
        geo
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CuttingRecord {
    /// Cutting letters `e_{i_0} e_{i_1} ⋯`.
    pub letters: Vec<usize>,
    /// f-expansion letters of the forward endpoint.
    pub expansion: Vec<usize>,
    /// `e_{i_0} ⋯ e_{i_k}(0)`.
    pub orbit_points: Vec<Complex64>,
    /// `t_{k+1} = d(0, e_{i_0} ⋯ e_{i_k}(0))`.
    pub t: Vec<f64>,
    /// `log |(f^{k+1})′(γ⁺)|`.
    pub lyapunov: Vec<f64>,
    /// Relation between `e_{i_0} ⋯ e_{i_k} R` and `a_0 ⋯ a_k R`.
    pub frames: Vec<Frame>,
    pub pos: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParallelReport {
    pub passed: bool,
    pub frames: Vec<Frame>,
    pub vertex_frames: usize,
    pub first_failure: Option<usize>,
}

/// Cutting-sequence tracer for one boundary map.
pub struct Tracer<'a> {
    bs: &'a BSMap,
    neighbours: Vec<(MoebiusTransform, Frame)>,
    index: HashMap<[i64; 4], usize>,
    /// Per side: a point of the side line, its direction, and the sign of the outside.
    sides: Vec<(Complex64, Complex64, f64)>,
}

fn key(g: &MoebiusTransform) -> [i64; 4] {
    let s = if g.a.re < 0.0 || (g.a.re == 0.0 && g.a.im < 0.0) {
        -1.0
    } else {
        1.0
    };
    let q = |x: f64| (s * x * 1e3).round() as i64;
    [q(g.a.re), q(g.a.im), q(g.b.re), q(g.b.im)]
}

fn cross(u: Complex64, v: Complex64) -> f64 {
    u.re * v.im - u.im * v.re
}

impl<'a> Tracer<'a> {
    /// `max_depth` bounds the cusp excursions that can be matched.
    pub fn new(bs: &'a BSMap, max_depth: usize) -> Self {
        let g = &bs.group;
        let mut neighbours = vec![(MoebiusTransform::identity(), Frame::Same)];
        for e in &g.generators {
            neighbours.push((*e, Frame::Side));
        }
        for j in 0..g.m() {
            for h in tiles_at_vertex(g, j, 2 * max_depth + 8) {
                neighbours.push((h, Frame::Vertex));
            }
        }
        let mut index = HashMap::new();
        let mut kept: Vec<(MoebiusTransform, Frame)> = Vec::new();
        for (h, f) in neighbours {
            let h = h.renormalized();
            if kept.iter().any(|(x, _)| x.approx_eq(&h, 1e-7)) {
                continue;
            }
            index.insert(key(&h), kept.len());
            kept.push((h, f));
        }
        let sides = g
            .sides
            .iter()
            .map(|s| {
                let p = Complex64::from_polar(1.0, s.p);
                let q = Complex64::from_polar(1.0, s.q);
                let out = Complex64::from_polar(1.0, s.outside_arc().midpoint());
                let sign = cross(q - p, out - p).signum();
                (p, q - p, sign)
            })
            .collect();
        Tracer {
            bs,
            neighbours: kept,
            index,
            sides,
        }
    }

    fn lookup(&self, h: &MoebiusTransform) -> Option<(MoebiusTransform, Frame)> {
        if let Some(&i) = self.index.get(&key(h)) {
            if self.neighbours[i].0.approx_eq(h, 1e-6) {
                return Some(self.neighbours[i]);
            }
        }
        self.neighbours
            .iter()
            .find(|(x, _)| x.approx_eq(h, 1e-6))
            .copied()
    }

    /// Side of the polygon through which the geodesic from `u` to `w` leaves it, with
    /// ties at a vertex resolved by passing the vertex on the right.
    pub fn exit_side(&self, u: f64, w: f64) -> Result<usize> {
        let a = Complex64::from_polar(1.0, u);
        let b = Complex64::from_polar(1.0, w);
        let m = self.sides.len();
        let mut s_in = 0.0f64;
        let mut best: Vec<(f64, usize)> = Vec::new();
        for (i, &(p, d, sign)) in self.sides.iter().enumerate() {
            let fa = sign * cross(d, a - p);
            let fb = sign * cross(d, b - p);
            match (fa > 0.0, fb > 0.0) {
                (true, true) => {
                    return Err(Error::Numerical(format!(
                        "geodesic misses the polygon (both ends beyond side {})",
                        i + 1
                    )))
                }
                (false, true) => best.push((fa / (fa - fb), i)),
                (true, false) => s_in = s_in.max(fa / (fa - fb)),
                (false, false) => {}
            }
        }
        best.sort_by(|x, y| x.0.total_cmp(&y.0));
        let Some(&(s_out, first)) = best.first() else {
            return Err(Error::Numerical("geodesic does not leave the polygon".into()));
        };
        if s_out <= s_in + 1e-14 {
            return Err(Error::Numerical(
                "geodesic does not meet the interior of the polygon".into(),
            ));
        }
        if let Some(&(s2, second)) = best.get(1) {
            if s2 - s_out < 1e-10 {
                // Leaving through a vertex: the side clockwise of it is on the right.
                if (second + 1) % m == first {
                    return Ok(second);
                }
                return Ok(first);
            }
        }
        Ok(first)
    }

    /// Cutting sequence to depth `n` together with the frame comparison.
    pub fn trace(&self, geo: &SymbolicGeodesic, n: usize) -> Result<CuttingRecord> {
        if n > geo.letters.len() {
            return Err(Error::Numerical(format!(
                "depth {n} exceeds the {} known expansion letters",
                geo.letters.len()
            )));
        }
        let gens = &self.bs.group.generators;
        let mut u = geo.neg;
        let mut d = MoebiusTransform::identity();
        let mut g = MoebiusTransform::identity();
        let mut lyap = 0.0;
        let mut rec = CuttingRecord {
            letters: Vec::with_capacity(n),
            expansion: geo.letters[..n].to_vec(),
            orbit_points: Vec::with_capacity(n),
            t: Vec::with_capacity(n),
            lyapunov: Vec::with_capacity(n),
            frames: Vec::with_capacity(n),
            pos: geo.pos(),
        };
        for k in 0..n {
            let w = d.apply_angle(geo.orbit[k]);
            let i = self.exit_side(u, w)?;
            let e = gens[i];
            let ei = e.inverse();
            g = g.compose(&e);
            u = ei.apply_angle(u);
            let a = geo.letters[k];
            let raw = ei.compose(&d).compose(&gens[a]);
            let frame = match self.lookup(&raw) {
                Some((exact, f)) => {
                    d = exact;
                    f
                }
                None => {
                    d = raw;
                    Frame::Apart
                }
            };
            lyap += self.bs.branches[a].map.log_derivative_at(geo.orbit[k]);
            rec.letters.push(i);
            rec.orbit_points.push(g.apply(Complex64::new(0.0, 0.0)));
            rec.t.push(g.dist_origin());
            rec.lyapunov.push(lyap);
            rec.frames.push(frame);
        }
        Ok(rec)
    }

    pub fn parallel_check(&self, geo: &SymbolicGeodesic, n: usize) -> Result<ParallelReport> {
        let rec = self.trace(geo, n)?;
        Ok(parallel_report(&rec))
    }
}

pub fn parallel_report(rec: &CuttingRecord) -> ParallelReport {
    let first_failure = rec.frames.iter().position(|&f| f == Frame::Apart);
    ParallelReport {
        passed: first_failure.is_none(),
        vertex_frames: rec.frames.iter().filter(|&&f| f == Frame::Vertex).count(),
        frames: rec.frames.clone(),
        first_failure,
    }
}

/// `(t_k / k, log|(f^k)′(γ⁺)| / k)` for `k = 1..=n`.
pub fn growth_vs_lyapunov(rec: &CuttingRecord) -> (Vec<f64>, Vec<f64>) {
    let t = rec
        .t
        .iter()
        .enumerate()
        .map(|(k, &t)| t / (k + 1) as f64)
        .collect();
    let l = rec
        .lyapunov
        .iter()
        .enumerate()
        .map(|(k, &l)| l / (k + 1) as f64)
        .collect();
    (t, l)
}
