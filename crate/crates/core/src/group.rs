//! Fundamental polygons, side pairings, vertex cycles and the admissible-word engine.

use crate::automaton::{Automaton, Nfa};
use crate::error::{Error, Result};
use crate::geometry::{ccw_dist, wrap_angle, Arc, BoundaryPoint, Geodesic, MoebiusTransform, TAU};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Endpoint matching tolerance for sides, vertices and pairings.
pub const MATCH_TOL: f64 = 1e-9;

/// One entry of the `sides` list of a group spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SideSpec {
    Geodesic { p: String, q: String },
    Free { free: [String; 2] },
}

/// JSON group description; angles are decimal strings in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    #[serde(default)]
    pub kind_hint: Option<String>,
    pub sides: Vec<SideSpec>,
    /// 1-based positions in `sides`.
    pub pairing: Vec<[usize; 2]>,
}

impl GroupSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(format!("malformed group spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("group spec serializes")
    }
}

fn parse_angle(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Spec(format!("angle '{s}' is not a decimal number")))
}

/// A side of the polygon lying on a complete geodesic.
#[derive(Clone, Copy, Debug)]
pub struct Side {
    /// `P_k`, the clockwise end of the outside arc.
    pub p: f64,
    /// `Q_{k+1}`, the anticlockwise end of the outside arc.
    pub q: f64,
    pub geodesic: Geodesic,
}

impl Side {
    /// The arc cut off by the side, away from the origin.
    pub fn outside_arc(&self) -> Arc {
        Arc::between(self.p, self.q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VertexKind {
    /// Two sides meet inside the disk.
    Interior { point: Complex64, angle: f64 },
    /// Two sides share an endpoint on the circle.
    Cusp { point: f64 },
    /// A free side separates the two geodesic sides; holds its clockwise and anticlockwise ends.
    Improper { from: f64, to: f64 },
}

/// Vertex `v_k`, between side `k − 1` and side `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub index: usize,
    pub kind: VertexKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// Anticlockwise half cycles are forbidden.
    Ccw,
    /// Clockwise half cycles are forbidden.
    Cw,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Ccw => Orientation::Cw,
            Orientation::Cw => Orientation::Ccw,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CycleKind {
    /// Relator of length `2 n`.
    Interior { n: usize, angle_sum: f64 },
    Cusp { parabolic: MoebiusTransform },
    Improper,
}

/// A vertex cycle: the vertices identified by the pairing and the words read around them.
#[derive(Clone, Debug)]
pub struct VertexCycle {
    /// Vertex indices in the order met by the clockwise walk.
    pub vertices: Vec<usize>,
    /// Letters crossed by a small clockwise loop around the first vertex.
    pub cw_word: Vec<usize>,
    /// Letters crossed by a small anticlockwise loop around the first vertex.
    pub ccw_word: Vec<usize>,
    pub kind: CycleKind,
}

impl VertexCycle {
    pub fn half_length(&self) -> Option<usize> {
        match self.kind {
            CycleKind::Interior { n, .. } => Some(n),
            _ => None,
        }
    }
}

/// Result of the even-corner test.
#[derive(Clone, Debug)]
pub struct EvenCornerReport {
    pub passed: bool,
    pub violations: Vec<String>,
}

/// Side-pairing presentation of a Fuchsian group built from a fundamental polygon.
#[derive(Clone, Debug)]
pub struct GroupPresentation {
    pub name: String,
    pub sides: Vec<Side>,
    /// `pairing[k]` is the side matched with side `k`; letter `k` has inverse letter `pairing[k]`.
    pub pairing: Vec<usize>,
    /// `generators[k]` is `e_k`, which carries side `pairing[k]` onto side `k`.
    pub generators: Vec<MoebiusTransform>,
    pub vertices: Vec<Vertex>,
    pub cycles: Vec<VertexCycle>,
    /// Index into `cycles` for each vertex.
    pub vertex_cycle: Vec<usize>,
    pub orientation: Orientation,
    automaton: Automaton,
}

impl GroupPresentation {
    pub fn m(&self) -> usize {
        self.sides.len()
    }

    pub fn inverse_letter(&self, k: usize) -> usize {
        self.pairing[k]
    }

    pub fn is_first_kind(&self) -> bool {
        !self
            .vertices
            .iter()
            .any(|v| matches!(v.kind, VertexKind::Improper { .. }))
    }

    pub fn cusps(&self) -> Vec<usize> {
        self.vertices
            .iter()
            .filter(|v| matches!(v.kind, VertexKind::Cusp { .. }))
            .map(|v| v.index)
            .collect()
    }

    pub fn has_cusp(&self) -> bool {
        !self.cusps().is_empty()
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        self.vertices
            .iter()
            .filter(|v| matches!(v.kind, VertexKind::Interior { .. }))
            .map(|v| v.index)
            .collect()
    }

    pub fn automaton(&self) -> &Automaton {
        &self.automaton
    }

    /// Same group with the opposite half-cycle convention.
    pub fn with_orientation(&self, orientation: Orientation) -> GroupPresentation {
        let mut g = self.clone();
        g.orientation = orientation;
        g.automaton = build_automaton(&g.pairing, &g.cycles, orientation);
        g
    }

    /// Product `e_{w_0} e_{w_1} ⋯`.
    pub fn evaluate(&self, word: &[usize]) -> MoebiusTransform {
        word.iter().fold(MoebiusTransform::identity(), |acc, &k| {
            acc.compose(&self.generators[k])
        })
    }

    /// Next vertex of the clockwise walk, `σ(j) = π(j) + 1`.
    pub fn cw_next(&self, j: usize) -> usize {
        (self.pairing[j] + 1) % self.m()
    }

    /// Next vertex of the anticlockwise walk, `τ(j) = π(j − 1)`.
    pub fn ccw_next(&self, j: usize) -> usize {
        self.pairing[(j + self.m() - 1) % self.m()]
    }

    pub fn is_reduced(&self, word: &[usize]) -> bool {
        word.windows(2).all(|w| w[1] != self.pairing[w[0]])
    }

    pub fn is_admissible(&self, word: &[usize]) -> bool {
        self.automaton.accepts(word)
    }

    /// Visits every admissible word of length `1..=n` with its product, depth first.
    /// Fails before visiting anything if more than `budget` words would be produced.
    pub fn for_each_admissible(
        &self,
        n: usize,
        budget: f64,
        mut visit: impl FnMut(&[usize], &MoebiusTransform),
    ) -> Result<()> {
        let total: f64 = self.automaton.count_words(n).iter().skip(1).sum();
        if total > budget {
            return Err(Error::Budget(format!(
                "{total:.3e} admissible words up to length {n} exceed the budget of {budget:.3e}"
            )));
        }
        let mut word = Vec::with_capacity(n);
        let mut stack = vec![(Automaton::START, MoebiusTransform::identity())];
        self.dfs(n, &mut word, &mut stack, &mut visit);
        Ok(())
    }

    fn dfs(
        &self,
        n: usize,
        word: &mut Vec<usize>,
        stack: &mut Vec<(u32, MoebiusTransform)>,
        visit: &mut impl FnMut(&[usize], &MoebiusTransform),
    ) {
        if word.len() == n {
            return;
        }
        let (state, g) = *stack.last().unwrap();
        for c in 0..self.m() {
            let t = self.automaton.step(state, c);
            if t == Automaton::DEAD {
                continue;
            }
            let h = g.compose(&self.generators[c]);
            word.push(c);
            visit(word, &h);
            stack.push((t, h));
            self.dfs(n, word, stack, visit);
            stack.pop();
            word.pop();
        }
    }

    /// All admissible words of length exactly `n`.
    pub fn enumerate_admissible(&self, n: usize, budget: f64) -> Result<Vec<Vec<usize>>> {
        let mut out = Vec::new();
        self.for_each_admissible(n, budget, |w, _| {
            if w.len() == n {
                out.push(w.to_vec());
            }
        })?;
        Ok(out)
    }

    pub fn even_corner_check(&self) -> EvenCornerReport {
        let mut violations = Vec::new();
        for (ci, cycle) in self.cycles.iter().enumerate() {
            let CycleKind::Interior { n, .. } = cycle.kind else {
                continue;
            };
            let angles: Vec<f64> = cycle
                .vertices
                .iter()
                .map(|&j| match self.vertices[j].kind {
                    VertexKind::Interior { angle, .. } => angle,
                    _ => unreachable!("interior cycle holds interior vertices"),
                })
                .collect();
            let len = angles.len();
            for start in 0..len {
                let s: f64 = (0..n).map(|t| angles[(start + t) % len]).sum();
                if (s - PI).abs() > 1e-8 {
                    violations.push(format!(
                        "cycle {ci}: {n} consecutive corners from vertex {} sum to {s:.12}, not pi",
                        cycle.vertices[start]
                    ));
                }
            }
        }
        EvenCornerReport {
            passed: violations.is_empty(),
            violations,
        }
    }

    /// Largest rotational symmetry: returns `t` such that conjugating by the rotation
    /// carrying side `0` to side `t` maps every `e_k` to `e_{k+t}`.
    pub fn rotation_step(&self) -> usize {
        let m = self.m();
        for t in 1..m {
            if !m.is_multiple_of(t) {
                continue;
            }
            let theta = ccw_dist(self.sides[0].p, self.sides[t].p);
            let rot = MoebiusTransform::rotation(theta);
            let ok = (0..m).all(|k| {
                let conj = rot.compose(&self.generators[k]).compose(&rot.inverse());
                let moved = (k + t) % m;
                conj.approx_eq(&self.generators[moved], 1e-9)
                    && self.pairing[moved] == (self.pairing[k] + t) % m
            });
            if ok {
                return t;
            }
        }
        m
    }

    /// Rewrites a shortest word into its admissible spelling by exchanging forbidden half cycles.
    pub fn reduce_to_admissible(&self, word: &[usize]) -> Result<Vec<usize>> {
        const BUDGET: usize = 64;
        if word.len() > BUDGET {
            return Err(Error::Word(format!(
                "words longer than {BUDGET} letters are outside the rewriting budget"
            )));
        }
        if let Some(k) = word.iter().position(|&l| l >= self.m()) {
            return Err(Error::Word(format!("letter {} out of range", word[k])));
        }
        let mut w = word.to_vec();
        self.check_shortest(&w)?;
        for _ in 0..(4 * BUDGET) {
            match self.find_forbidden_half(&w) {
                None if self.is_admissible(&w) => return Ok(w),
                None => {
                    return Err(Error::Word(format!(
                        "not shortest: {w:?} contains a chain of half cycles"
                    )))
                }
                Some((pos, replacement)) => {
                    w.splice(pos..pos + replacement.len(), replacement);
                    self.check_shortest(&w)?;
                }
            }
        }
        Err(Error::Word("rewriting did not terminate".into()))
    }

    fn check_shortest(&self, w: &[usize]) -> Result<()> {
        for i in 1..w.len() {
            if w[i] == self.pairing[w[i - 1]] {
                return Err(Error::Word(format!(
                    "not shortest: cancelling pair {:?} at position {}",
                    &w[i - 1..=i],
                    i - 1
                )));
            }
        }
        for cycle in &self.cycles {
            let Some(n) = cycle.half_length() else {
                continue;
            };
            for rel in [&cycle.cw_word, &cycle.ccw_word] {
                if let Some(pos) = find_cyclic_subword(w, rel, n + 1) {
                    return Err(Error::Word(format!(
                        "not shortest: long cycle {:?} at position {pos}",
                        &w[pos..pos + n + 1]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Finds the leftmost forbidden half cycle and the half cycle that replaces it.
    fn find_forbidden_half(&self, w: &[usize]) -> Option<(usize, Vec<usize>)> {
        let mut best: Option<(usize, Vec<usize>)> = None;
        for cycle in &self.cycles {
            let Some(n) = cycle.half_length() else {
                continue;
            };
            let (bad, good) = match self.orientation {
                Orientation::Ccw => (&cycle.ccw_word, &cycle.cw_word),
                Orientation::Cw => (&cycle.cw_word, &cycle.ccw_word),
            };
            let len = bad.len();
            for pos in 0..w.len().saturating_sub(n - 1) {
                if best.as_ref().is_some_and(|(b, _)| *b <= pos) {
                    break;
                }
                for r in 0..len {
                    if (0..n).all(|t| w[pos + t] == bad[(r + t) % len]) {
                        // bad[r..r+n] · bad[r+n..r+2n] = 1, so the first half equals
                        // the inverse of the second half, which is a half of the other loop.
                        let inv: Vec<usize> = (0..n)
                            .rev()
                            .map(|t| self.pairing[bad[(r + n + t) % len]])
                            .collect();
                        debug_assert!(find_cyclic_subword(&inv, good, n).is_some());
                        best = Some((pos, inv));
                        break;
                    }
                }
            }
        }
        best
    }
}

/// Position of the first length-`k` window of `w` that is a cyclic subword of `rel`.
fn find_cyclic_subword(w: &[usize], rel: &[usize], k: usize) -> Option<usize> {
    if w.len() < k {
        return None;
    }
    let len = rel.len();
    (0..=w.len() - k).find(|&pos| (0..len).any(|r| (0..k).all(|t| w[pos + t] == rel[(r + t) % len])))
}

/// Forbidden factors: cancelling pairs, forbidden half cycles, long cycles.
pub fn forbidden_patterns(
    pairing: &[usize],
    cycles: &[VertexCycle],
    orientation: Orientation,
) -> Vec<Vec<usize>> {
    let mut pats: Vec<Vec<usize>> = (0..pairing.len()).map(|k| vec![k, pairing[k]]).collect();
    for c in cycles {
        let Some(n) = c.half_length() else { continue };
        let bad = match orientation {
            Orientation::Ccw => &c.ccw_word,
            Orientation::Cw => &c.cw_word,
        };
        let len = bad.len();
        for r in 0..len {
            pats.push((0..n).map(|t| bad[(r + t) % len]).collect());
        }
        for rel in [&c.cw_word, &c.ccw_word] {
            for r in 0..len {
                pats.push((0..=n).map(|t| rel[(r + t) % len]).collect());
            }
        }
    }
    pats.sort();
    pats.dedup();
    pats
}

/// A permitted half cycle `good[i..i+n]` of an interior cycle.
struct ChainLink {
    half: Vec<usize>,
    /// Letters whose presence just before the equal forbidden half cycle shortens the word:
    /// the inverse of its first letter and the letter completing a long cycle.
    terminals: Vec<usize>,
    /// First letter of the equal forbidden half cycle.
    lead: usize,
}

fn chain_links(pairing: &[usize], cycles: &[VertexCycle], orientation: Orientation) -> Vec<ChainLink> {
    let mut links = Vec::new();
    for c in cycles {
        let Some(n) = c.half_length() else { continue };
        let (bad, good) = match orientation {
            Orientation::Ccw => (&c.ccw_word, &c.cw_word),
            Orientation::Cw => (&c.cw_word, &c.ccw_word),
        };
        let len = good.len();
        for i in 0..len {
            let half: Vec<usize> = (0..n).map(|t| good[(i + t) % len]).collect();
            // good[i..i+2n] = 1, so the half equals the inverse of the other half.
            let comp: Vec<usize> = (0..n).map(|t| pairing[good[(i + 2 * len - 1 - t) % len]]).collect();
            let mut terminals = vec![pairing[comp[0]]];
            for r in 0..len {
                if (0..n).all(|t| bad[(r + t) % len] == comp[t]) {
                    terminals.push(bad[(r + len - 1) % len]);
                }
            }
            terminals.sort_unstable();
            terminals.dedup();
            links.push(ChainLink {
                half,
                terminals,
                lead: comp[0],
            });
        }
    }
    links
}

/// Recogniser of the admissible words: the forbidden factors together with chains
/// `t · h_k⁻ ⋯ h_1⁻ · h_0`, where each `h_j` is a permitted half cycle, `h_j⁻` drops its
/// last letter, that last letter is the first letter of the forbidden spelling of
/// `h_{j−1}`, and `t` shortens the word once every half cycle has been exchanged
/// from the right.
fn build_automaton(pairing: &[usize], cycles: &[VertexCycle], o: Orientation) -> Automaton {
    let mut nfa = Nfa::new(pairing.len());
    for p in forbidden_patterns(pairing, cycles, o) {
        nfa.add_path(Nfa::START, &p, Nfa::ACCEPT);
    }
    let links = chain_links(pairing, cycles, o);
    let block: Vec<u32> = links.iter().map(|_| nfa.add_node()).collect();
    let last: Vec<u32> = links.iter().map(|_| nfa.add_node()).collect();
    for (k, l) in links.iter().enumerate() {
        if l.half.len() < 2 {
            continue;
        }
        for &t in &l.terminals {
            nfa.add_edge(Nfa::START, t, block[k]);
            nfa.add_edge(Nfa::START, t, last[k]);
        }
        nfa.add_path(last[k], &l.half, Nfa::ACCEPT);
        let head = &l.half[..l.half.len() - 1];
        let end = nfa.add_prefix(block[k], head);
        let c = head[head.len() - 1];
        for (u, next) in links.iter().enumerate() {
            if next.half.len() >= 2 && *l.half.last().unwrap() == next.lead {
                nfa.add_edge(end, c, block[u]);
                nfa.add_edge(end, c, last[u]);
            }
        }
    }
    nfa.determinize()
}

/// Maps the side geodesic to the real diameter: reference point to 0, `P` end to −1, `Q` end to +1.
fn normalizer(side: &Side, reference: Complex64) -> MoebiusTransform {
    let t = MoebiusTransform::to_origin(reference);
    let q_img = t.apply(Complex64::from_polar(1.0, side.q));
    let theta = q_img.im.atan2(q_img.re);
    MoebiusTransform::rotation(-theta).compose(&t)
}

impl GroupPresentation {
    /// Validates a spec and builds the presentation.
    pub fn build(spec: &GroupSpec) -> Result<GroupPresentation> {
        let mut sides = Vec::new();
        let mut position_to_side = vec![None; spec.sides.len()];
        // Free side (as its two ends) following each geodesic side.
        let mut free_after: Vec<Option<(f64, f64)>> = Vec::new();
        let mut leading_free = None;
        for (pos, s) in spec.sides.iter().enumerate() {
            match s {
                SideSpec::Geodesic { p, q } => {
                    let (p, q) = (wrap_angle(parse_angle(p)?), wrap_angle(parse_angle(q)?));
                    let outside = ccw_dist(p, q);
                    if outside <= 0.0 || outside >= PI - 1e-12 {
                        return Err(Error::Spec(format!(
                            "side at position {}: origin is not on the inner side (outside arc {outside:.6})",
                            pos + 1
                        )));
                    }
                    position_to_side[pos] = Some(sides.len());
                    sides.push(Side {
                        p,
                        q,
                        geodesic: Geodesic::new(BoundaryPoint::new(p), BoundaryPoint::new(q)),
                    });
                    free_after.push(None);
                }
                SideSpec::Free { free } => {
                    let ends = (
                        wrap_angle(parse_angle(&free[0])?),
                        wrap_angle(parse_angle(&free[1])?),
                    );
                    let slot = match free_after.last_mut() {
                        Some(slot) => slot,
                        None => &mut leading_free,
                    };
                    if slot.replace(ends).is_some() {
                        return Err(Error::Spec(format!(
                            "two consecutive free sides at position {}",
                            pos + 1
                        )));
                    }
                }
            }
        }
        if let Some(ends) = leading_free {
            match free_after.last_mut() {
                Some(slot @ None) => *slot = Some(ends),
                _ => return Err(Error::Spec("two consecutive free sides".into())),
            }
        }
        let m = sides.len();
        if m < 4 {
            return Err(Error::Spec(format!(
                "polygon needs at least four geodesic sides, found {m}"
            )));
        }
        let turn: f64 = (0..m).map(|k| ccw_dist(sides[k].p, sides[(k + 1) % m].p)).sum();
        if (turn - TAU).abs() > 1e-6 {
            return Err(Error::Spec(
                "side endpoints are not listed in anticlockwise order".into(),
            ));
        }

        let mut pairing = vec![usize::MAX; m];
        for pr in &spec.pairing {
            let get = |x: usize| -> Result<usize> {
                x.checked_sub(1)
                    .and_then(|i| position_to_side.get(i).copied().flatten())
                    .ok_or_else(|| Error::Spec(format!("pairing refers to position {x}, which is not a geodesic side")))
            };
            let (i, j) = (get(pr[0])?, get(pr[1])?);
            if i == j {
                return Err(Error::Spec(format!(
                    "side at position {} is paired with itself; self-paired sides are not supported",
                    pr[0]
                )));
            }
            if pairing[i] != usize::MAX || pairing[j] != usize::MAX {
                return Err(Error::Spec("a side occurs in two pairs".into()));
            }
            pairing[i] = j;
            pairing[j] = i;
        }
        if let Some(k) = pairing.iter().position(|&x| x == usize::MAX) {
            return Err(Error::Spec(format!("geodesic side {} is unpaired", k + 1)));
        }

        let mut vertices = Vec::with_capacity(m);
        for k in 0..m {
            let prev = &sides[(k + m - 1) % m];
            let cur = &sides[k];
            let reach = ccw_dist(prev.p, prev.q);
            let start = ccw_dist(prev.p, cur.p);
            let kind = if (start - reach).abs() < MATCH_TOL {
                VertexKind::Cusp { point: cur.p }
            } else if start < reach {
                if ccw_dist(prev.p, cur.q) <= reach {
                    return Err(Error::Spec(format!(
                        "side {} is nested inside side {}",
                        k + 1,
                        (k + m - 1) % m + 1
                    )));
                }
                let point = prev.geodesic.intersection(&cur.geodesic).ok_or_else(|| {
                    Error::Spec(format!("sides {} and {} do not meet", (k + m - 1) % m + 1, k + 1))
                })?;
                let t = MoebiusTransform::to_origin(point);
                let d1 = t.apply(Complex64::from_polar(1.0, prev.p));
                let d2 = t.apply(Complex64::from_polar(1.0, cur.q));
                let cosang = (d1.re * d2.re + d1.im * d2.im) / (d1.norm() * d2.norm());
                VertexKind::Interior {
                    point,
                    angle: cosang.clamp(-1.0, 1.0).acos(),
                }
            } else {
                let slot = free_after[(k + m - 1) % m];
                let Some((a, b)) = slot else {
                    return Err(Error::Spec(format!(
                        "gap between sides {} and {} needs a free side",
                        (k + m - 1) % m + 1,
                        k + 1
                    )));
                };
                if BoundaryPoint::new(a).separation(BoundaryPoint::new(prev.q)) > MATCH_TOL
                    || BoundaryPoint::new(b).separation(BoundaryPoint::new(cur.p)) > MATCH_TOL
                {
                    return Err(Error::Spec(format!(
                        "free side after side {} does not join the neighbouring endpoints",
                        (k + m - 1) % m + 1
                    )));
                }
                VertexKind::Improper {
                    from: prev.q,
                    to: cur.p,
                }
            };
            if !matches!(kind, VertexKind::Improper { .. }) && free_after[(k + m - 1) % m].is_some() {
                return Err(Error::Spec(format!(
                    "free side given after side {} but the neighbouring sides meet",
                    (k + m - 1) % m + 1
                )));
            }
            vertices.push(Vertex { index: k, kind });
        }

        // Reference points used to align paired sides.
        let reference = |k: usize| -> Complex64 {
            let a = vertices[k].kind;
            let b = vertices[(k + 1) % m].kind;
            match (a, b) {
                (VertexKind::Interior { point: x, .. }, VertexKind::Interior { point: y, .. }) => {
                    let t = MoebiusTransform::to_origin(x);
                    let yy = t.apply(y);
                    let r = yy.norm();
                    let mid_r = (0.5 * r.atanh()).tanh();
                    t.inverse().apply(yy * (mid_r / r))
                }
                (VertexKind::Interior { point, .. }, _) | (_, VertexKind::Interior { point, .. }) => point,
                _ => sides[k].geodesic.foot_from_origin(),
            }
        };
        let normalizers: Vec<MoebiusTransform> =
            (0..m).map(|k| normalizer(&sides[k], reference(k))).collect();
        let half_turn = MoebiusTransform::rotation(PI);
        let mut generators = Vec::with_capacity(m);
        for k in 0..m {
            let j = pairing[k];
            let e = normalizers[k]
                .inverse()
                .compose(&half_turn)
                .compose(&normalizers[j]);
            generators.push(e);
        }
        for k in 0..m {
            let j = pairing[k];
            let e = &generators[k];
            let pj = e.apply_angle(sides[j].p);
            let qj = e.apply_angle(sides[j].q);
            if BoundaryPoint::new(pj).separation(BoundaryPoint::new(sides[k].q)) > MATCH_TOL
                || BoundaryPoint::new(qj).separation(BoundaryPoint::new(sides[k].p)) > MATCH_TOL
            {
                return Err(Error::Spec(format!(
                    "pairing of sides {} and {} does not match endpoints",
                    j + 1,
                    k + 1
                )));
            }
            let c = e.classify();
            if matches!(c.kind, crate::geometry::Kind::Elliptic) {
                return Err(Error::Spec(format!(
                    "pairing transform of side {} is elliptic",
                    k + 1
                )));
            }
            if e.apply(Complex64::new(0.0, 0.0)).norm() < 1e-9 {
                return Err(Error::Spec(format!(
                    "pairing transform of side {} fixes the origin",
                    k + 1
                )));
            }
            // Finite side lengths must agree for the vertices to match.
            for (va, vb) in [(j, (k + 1) % m), ((j + 1) % m, k)] {
                if let (VertexKind::Interior { point: x, .. }, VertexKind::Interior { point: y, .. }) =
                    (vertices[va].kind, vertices[vb].kind)
                {
                    if (e.apply(x) - y).norm() > MATCH_TOL {
                        return Err(Error::Spec(format!(
                            "pairing of sides {} and {} does not carry vertices onto vertices",
                            j + 1,
                            k + 1
                        )));
                    }
                }
            }
        }

        let mut g = GroupPresentation {
            name: spec.name.clone(),
            sides,
            pairing,
            generators,
            vertices,
            cycles: Vec::new(),
            vertex_cycle: vec![usize::MAX; m],
            orientation: Orientation::Ccw,
            automaton: Automaton::from_forbidden(m, &[]),
        };
        g.build_cycles()?;
        g.automaton = build_automaton(&g.pairing, &g.cycles, g.orientation);
        Ok(g)
    }

    fn build_cycles(&mut self) -> Result<()> {
        let m = self.m();
        for start in 0..m {
            if self.vertex_cycle[start] != usize::MAX {
                continue;
            }
            let mut verts = vec![start];
            let mut j = self.cw_next(start);
            while j != start {
                verts.push(j);
                j = self.cw_next(j);
                if verts.len() > m {
                    return Err(Error::Spec("vertex walk does not close".into()));
                }
            }
            let idx = self.cycles.len();
            for &v in &verts {
                self.vertex_cycle[v] = idx;
            }
            let kind_of = |v: usize| self.vertices[v].kind;
            let cw_word: Vec<usize> = verts.clone();
            let mut ccw_word = Vec::with_capacity(verts.len());
            let mut jj = start;
            for _ in 0..verts.len() {
                ccw_word.push((jj + m - 1) % m);
                jj = self.ccw_next(jj);
            }
            let product = self.evaluate(&cw_word);
            let kind = match kind_of(start) {
                VertexKind::Interior { .. } => {
                    let sum: f64 = verts
                        .iter()
                        .map(|&v| match kind_of(v) {
                            VertexKind::Interior { angle, .. } => angle,
                            _ => f64::NAN,
                        })
                        .sum();
                    if !sum.is_finite() {
                        return Err(Error::Spec("vertex cycle mixes vertex types".into()));
                    }
                    if (sum - TAU).abs() > 1e-8 {
                        return Err(Error::Spec(format!(
                            "vertex cycle at vertex {} has angle sum {sum:.10}; only torsion-free groups (angle sum 2 pi) are supported",
                            start + 1
                        )));
                    }
                    if !product.approx_eq(&MoebiusTransform::identity(), 1e-9) {
                        return Err(Error::Spec(format!(
                            "relator at vertex {} does not evaluate to the identity",
                            start + 1
                        )));
                    }
                    if verts.len() % 2 != 0 {
                        return Err(Error::Spec(format!(
                            "relator at vertex {} has odd length",
                            start + 1
                        )));
                    }
                    CycleKind::Interior {
                        n: verts.len() / 2,
                        angle_sum: sum,
                    }
                }
                VertexKind::Cusp { point } => {
                    let c = product.classify();
                    if c.kind != crate::geometry::Kind::Parabolic
                        || c.fixed_points[0].separation(BoundaryPoint::new(point)) > 1e-7
                    {
                        return Err(Error::Spec(format!(
                            "cusp cycle at vertex {} is not parabolic about the vertex",
                            start + 1
                        )));
                    }
                    CycleKind::Cusp { parabolic: product }
                }
                VertexKind::Improper { .. } => CycleKind::Improper,
            };
            self.cycles.push(VertexCycle {
                vertices: verts,
                cw_word,
                ccw_word,
                kind,
            });
        }
        Ok(())
    }
}
