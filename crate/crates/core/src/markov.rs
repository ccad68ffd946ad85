//! Finite Markov partition built from the vertex endpoint set `W′`, and the induced
//! system over the cusp-free core.

use crate::bsmap::BSMap;
use crate::error::{Error, Result};
use crate::geometry::{ccw_dist, wrap_angle, Arc, MoebiusTransform, TAU};
use crate::group::{GroupPresentation, VertexKind};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

/// Two boundary points closer than this are the same partition point.
pub const POINT_TOL: f64 = 1e-9;

/// Boundary combinatorics at a cusp: the geodesics of the tessellation ending at it.
#[derive(Clone, Debug, Serialize)]
pub struct CuspCombinatorics {
    pub vertex: usize,
    pub point: f64,
    /// `x_0, x_{−1}, x_{−2}, …`: far endpoints anticlockwise of the cusp, moving towards it.
    pub left: Vec<f64>,
    /// `x_1, x_2, …`: far endpoints clockwise of the cusp, moving towards it.
    pub right: Vec<f64>,
    /// Cusp neighbourhood on the anticlockwise side, `[v, x_{−(K−1)}]`.
    pub l_arc: Arc,
    /// Cusp neighbourhood on the clockwise side, `[x_K, v]`.
    pub r_arc: Arc,
}

#[derive(Clone, Debug, Serialize)]
pub struct WPrime {
    pub level: usize,
    /// Sorted, merged points of `W′`.
    pub points: Vec<f64>,
    /// `W′(v)` per vertex index.
    pub per_vertex: Vec<Vec<f64>>,
    pub cusps: Vec<CuspCombinatorics>,
    /// Largest distance from `f(w)` to `W′` over `w ∈ W′ ∩ Δ`.
    pub invariance_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Cell {
    pub arc: Arc,
    /// Branch (and letter) of the boundary map on this cell.
    pub branch: usize,
    /// `f(Δ(a))`.
    pub image: Arc,
    /// Cusp vertex whose neighbourhood contains the cell.
    pub cusp: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MarkovPartition {
    pub w_prime: WPrime,
    /// All cell boundaries: `W′` together with the branch breakpoints.
    pub points: Vec<f64>,
    /// Cells sorted by start angle.
    pub cells: Vec<Cell>,
    /// Successor lists of the transition matrix.
    pub succ: Vec<Vec<usize>>,
    /// Largest distance of an image endpoint from a cell boundary.
    pub m2_residual: f64,
    /// Cells removed as transient before the irreducibility test.
    pub transient: Vec<usize>,
}

fn merge_points(mut pts: Vec<f64>) -> Vec<f64> {
    for p in pts.iter_mut() {
        *p = wrap_angle(*p);
    }
    pts.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().is_none_or(|&q| p - q > POINT_TOL) {
            out.push(p);
        }
    }
    if out.len() > 1 && out[0] + TAU - out[out.len() - 1] <= POINT_TOL {
        out.pop();
    }
    out
}

/// Circular distance from `x` to the nearest point of a sorted set.
pub fn distance_to_set(sorted: &[f64], x: f64) -> f64 {
    if sorted.is_empty() {
        return f64::INFINITY;
    }
    let x = wrap_angle(x);
    let i = sorted.partition_point(|&p| p < x);
    let n = sorted.len();
    let a = sorted[i % n];
    let b = sorted[(i + n - 1) % n];
    let d = |p: f64| {
        let d = (p - x).abs();
        d.min(TAU - d)
    };
    d(a).min(d(b))
}

/// Tiles around vertex `j` for `steps` clockwise steps: `(g_t, vertex index j_t)`.
fn walk_cw(g: &GroupPresentation, j: usize, steps: usize) -> Vec<(MoebiusTransform, usize)> {
    let mut out = Vec::with_capacity(steps);
    let mut h = MoebiusTransform::identity();
    let mut jj = j;
    for _ in 0..steps {
        out.push((h, jj));
        h = h.compose(&g.generators[jj]);
        jj = g.cw_next(jj);
    }
    out
}

fn walk_ccw(g: &GroupPresentation, j: usize, steps: usize) -> Vec<(MoebiusTransform, usize)> {
    let m = g.m();
    let mut out = Vec::with_capacity(steps);
    let mut h = MoebiusTransform::identity();
    let mut jj = j;
    for _ in 0..steps {
        out.push((h, jj));
        h = h.compose(&g.generators[(jj + m - 1) % m]);
        jj = g.ccw_next(jj);
    }
    out
}

/// Every tile of the tessellation sharing vertex `j` of the fundamental polygon, as the
/// element carrying the polygon onto it. Cusp vertices have infinitely many, so the
/// walk is cut after `cusp_steps` tiles in each direction.
pub fn tiles_at_vertex(
    g: &GroupPresentation,
    j: usize,
    cusp_steps: usize,
) -> Vec<MoebiusTransform> {
    match g.vertices[j].kind {
        VertexKind::Interior { .. } => {
            let len = g.cycles[g.vertex_cycle[j]].vertices.len();
            walk_cw(g, j, len).into_iter().map(|(h, _)| h).collect()
        }
        VertexKind::Cusp { .. } => {
            let mut v: Vec<MoebiusTransform> =
                walk_cw(g, j, cusp_steps).into_iter().map(|(h, _)| h).collect();
            v.extend(walk_ccw(g, j, cusp_steps).into_iter().skip(1).map(|(h, _)| h));
            v
        }
        VertexKind::Improper { .. } => vec![MoebiusTransform::identity()],
    }
}

/// Far endpoints of the tessellation geodesics through cusp vertex `j`.
fn cusp_far_endpoints(g: &GroupPresentation, j: usize, steps: usize) -> Vec<f64> {
    let m = g.m();
    let mut out = Vec::new();
    let mut push = |h: &MoebiusTransform, jj: usize| {
        let before = (jj + m - 1) % m;
        out.push(h.apply_angle(g.sides[before].p));
        out.push(h.apply_angle(g.sides[jj].q));
    };
    for (h, jj) in walk_cw(g, j, steps) {
        push(&h, jj);
    }
    for (h, jj) in walk_ccw(g, j, steps) {
        push(&h, jj);
    }
    out
}

fn cusp_combinatorics(g: &GroupPresentation, j: usize, level: usize) -> Result<CuspCombinatorics> {
    let m = g.m();
    let VertexKind::Cusp { point: v } = g.vertices[j].kind else {
        unreachable!("called on a cusp");
    };
    let x0 = g.sides[j].q;
    let x1 = g.sides[(j + m - 1) % m].p;
    let len = g.cycles[g.vertex_cycle[j]].vertices.len();
    let steps = len * (level + 3) + 4;
    let cands = cusp_far_endpoints(g, j, steps);
    let d0 = ccw_dist(v, x0);
    let mut left: Vec<f64> = cands
        .iter()
        .copied()
        .filter(|&c| {
            let d = ccw_dist(v, c);
            d > POINT_TOL && d < d0 - POINT_TOL
        })
        .collect();
    left.sort_by(|&a, &b| ccw_dist(v, b).total_cmp(&ccw_dist(v, a)));
    left.dedup_by(|a, b| ccw_dist(*a, *b).min(ccw_dist(*b, *a)) < POINT_TOL);
    left.insert(0, x0);
    let d1 = ccw_dist(x1, v);
    let mut right: Vec<f64> = cands
        .iter()
        .copied()
        .filter(|&c| {
            let d = ccw_dist(c, v);
            d > POINT_TOL && d < d1 - POINT_TOL
        })
        .collect();
    right.sort_by(|&a, &b| ccw_dist(b, v).total_cmp(&ccw_dist(a, v)));
    right.dedup_by(|a, b| ccw_dist(*a, *b).min(ccw_dist(*b, *a)) < POINT_TOL);
    right.insert(0, x1);
    if left.len() < level || right.len() < level {
        return Err(Error::Markov(format!(
            "cusp at vertex {}: only {} / {} tessellation endpoints found near the cusp",
            j + 1,
            left.len(),
            right.len()
        )));
    }
    let l_arc = Arc::between(v, left[level - 1]);
    let r_arc = Arc::between(right[level - 1], v);
    Ok(CuspCombinatorics {
        vertex: j,
        point: v,
        left,
        right,
        l_arc,
        r_arc,
    })
}

/// Builds `W′` at cusp level `level ≥ 2` and measures its invariance under `f`.
pub fn build_w_prime(bs: &BSMap, level: usize) -> Result<WPrime> {
    if level < 2 {
        return Err(Error::Markov("cusp level must be at least 2".into()));
    }
    let g = &bs.group;
    let m = g.m();
    let mut per_vertex = vec![Vec::new(); m];
    let mut cusps = Vec::new();
    for j in 0..m {
        match g.vertices[j].kind {
            VertexKind::Interior { .. } => {
                let len = g.cycles[g.vertex_cycle[j]].vertices.len();
                let mut pts = Vec::new();
                for (h, jj) in walk_cw(g, j, len) {
                    for s in [(jj + m - 1) % m, jj] {
                        pts.push(h.apply_angle(g.sides[s].p));
                        pts.push(h.apply_angle(g.sides[s].q));
                    }
                }
                per_vertex[j] = merge_points(pts);
            }
            VertexKind::Cusp { point } => {
                let c = cusp_combinatorics(g, j, level)?;
                let mut pts = vec![point];
                pts.extend(c.left[..level].iter().copied());
                pts.extend(c.right[..level].iter().copied());
                per_vertex[j] = merge_points(pts);
                cusps.push(c);
            }
            VertexKind::Improper { from, to } => {
                per_vertex[j] = merge_points(vec![from, to]);
            }
        }
    }
    let points = merge_points(per_vertex.iter().flatten().copied().collect());
    let mut residual: f64 = 0.0;
    for &w in &points {
        if bs.locate(w).is_some() {
            let y = bs.apply(w).map(|(y, _)| y).unwrap_or(w);
            residual = residual.max(distance_to_set(&points, y));
        }
    }
    Ok(WPrime {
        level,
        points,
        per_vertex,
        cusps,
        invariance_residual: residual,
    })
}

impl MarkovPartition {
    /// Builds the partition at the smallest cusp level for which every cusp cell has a
    /// single successor inside the cusp neighbourhoods.
    pub fn new(bs: &BSMap) -> Result<MarkovPartition> {
        let mut last_err = None;
        for level in 2..=8 {
            match Self::with_level(bs, level) {
                Ok(p) if p.cusp_successors_forced() => return Ok(p),
                Ok(_) => {
                    last_err = Some(Error::Markov(format!(
                        "cusp cells at level {level} branch inside the cusp neighbourhoods"
                    )))
                }
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap_or_else(|| Error::Markov("no admissible cusp level".into())))
    }

    pub fn with_level(bs: &BSMap, level: usize) -> Result<MarkovPartition> {
        let w = build_w_prime(bs, level)?;
        if w.invariance_residual > POINT_TOL {
            let orphan = w
                .points
                .iter()
                .copied()
                .filter(|&p| bs.locate(p).is_some())
                .map(|p| (p, distance_to_set(&w.points, bs.apply(p).unwrap().0)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            return Err(Error::Markov(format!(
                "f(W') is not contained in W': the image of {:.12} is {:.3e} away from W' \
                 (check the half-cycle orientation)",
                orphan.0, orphan.1
            )));
        }
        let mut pts = w.points.clone();
        for b in &bs.branches {
            pts.push(b.arc.start());
            pts.push(b.arc.end());
        }
        let points = merge_points(pts);
        let n = points.len();
        let mut cells = Vec::new();
        for k in 0..n {
            let a = points[k];
            let b = points[(k + 1) % n];
            let arc = if n == 1 { Arc::full() } else { Arc::between(a, b) };
            let mid = arc.midpoint();
            let Some(branch) = bs.locate(mid) else {
                continue;
            };
            let gmap = &bs.branches[branch].map;
            let image = arc.image(gmap);
            let cusp = w
                .cusps
                .iter()
                .find(|c| c.l_arc.contains(mid) || c.r_arc.contains(mid))
                .map(|c| c.vertex);
            cells.push(Cell {
                arc,
                branch,
                image,
                cusp,
            });
        }
        let mut m2: f64 = 0.0;
        for (i, c) in cells.iter().enumerate() {
            for e in [c.image.start(), c.image.end()] {
                let d = distance_to_set(&points, e);
                if d > POINT_TOL {
                    return Err(Error::Markov(format!(
                        "Markov property fails: image of cell {i} has endpoint {e:.12} \
                         at distance {d:.3e} from every cell boundary"
                    )));
                }
                m2 = m2.max(d);
            }
        }
        let succ: Vec<Vec<usize>> = cells
            .iter()
            .map(|c| {
                (0..cells.len())
                    .filter(|&j| c.image.contains(cells[j].arc.midpoint()))
                    .collect()
            })
            .collect();
        let mut p = MarkovPartition {
            w_prime: w,
            points,
            cells,
            succ,
            m2_residual: m2,
            transient: Vec::new(),
        };
        p.transient = p.check_irreducible()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn level(&self) -> usize {
        self.w_prime.level
    }

    pub fn is_core(&self, c: usize) -> bool {
        self.cells[c].cusp.is_none()
    }

    pub fn core_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.is_core(c)).collect()
    }

    pub fn cusp_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&c| !self.is_core(c)).collect()
    }

    pub fn has_transition(&self, a: usize, b: usize) -> bool {
        self.succ[a].binary_search(&b).is_ok()
    }

    /// Dense 0/1 transition matrix.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        (0..self.len())
            .map(|a| (0..self.len()).map(|b| self.has_transition(a, b) as u8).collect())
            .collect()
    }

    /// Cell containing `x`, if any.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let x = wrap_angle(x);
        let i = self.cells.partition_point(|c| c.arc.start() <= x + 1e-12);
        let n = self.len();
        if n == 0 {
            return None;
        }
        let cand = (i + n - 1) % n;
        if self.cells[cand].arc.contains(x) {
            return Some(cand);
        }
        self.cells.iter().position(|c| c.arc.contains(x))
    }

    /// Cell word of length `n` of `x` under the boundary map; `None` if the orbit escapes.
    pub fn cell_word(&self, bs: &BSMap, x: f64, n: usize) -> Option<Vec<usize>> {
        let mut w = Vec::with_capacity(n);
        let mut y = x;
        for _ in 0..n {
            let c = self.cell_of(y)?;
            w.push(c);
            y = bs.branches[self.cells[c].branch].map.apply_angle(y);
        }
        Some(w)
    }

    pub fn is_path(&self, word: &[usize]) -> bool {
        word.windows(2).all(|w| self.has_transition(w[0], w[1]))
    }

    /// Inverse branch composition `e_{ℓ(w_0)} ⋯ e_{ℓ(w_{n−2})}` carrying the last cell
    /// onto the cylinder.
    pub fn cylinder_map(&self, bs: &BSMap, word: &[usize]) -> MoebiusTransform {
        word[..word.len().saturating_sub(1)]
            .iter()
            .fold(MoebiusTransform::identity(), |acc, &c| {
                acc.compose(&bs.group.generators[self.cells[c].branch])
            })
    }

    /// Arc of points whose cell word starts with `word`.
    pub fn cylinder(&self, bs: &BSMap, word: &[usize]) -> Result<Arc> {
        if word.is_empty() || !self.is_path(word) {
            return Err(Error::Word(format!("{word:?} is not a path of the partition")));
        }
        let last = self.cells[*word.last().unwrap()].arc;
        Ok(last.image(&self.cylinder_map(bs, word)))
    }

    fn cusp_successors_forced(&self) -> bool {
        self.cusp_cells().iter().all(|&c| {
            self.succ[c].iter().filter(|&&d| !self.is_core(d)).count() == 1
        })
    }

    /// Strong connectivity after removing cells with no predecessor or no successor.
    fn check_irreducible(&self) -> Result<Vec<usize>> {
        let n = self.len();
        let mut alive = vec![true; n];
        loop {
            let mut changed = false;
            for a in 0..n {
                if !alive[a] {
                    continue;
                }
                let out = self.succ[a].iter().any(|&b| alive[b]);
                let inc = (0..n).any(|b| alive[b] && self.has_transition(b, a));
                if !out || !inc {
                    alive[a] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut graph = DiGraph::<usize, ()>::new();
        let nodes: Vec<_> = (0..n).map(|a| graph.add_node(a)).collect();
        for a in 0..n {
            for &b in &self.succ[a] {
                if alive[a] && alive[b] {
                    graph.add_edge(nodes[a], nodes[b], ());
                }
            }
        }
        let comps: Vec<_> = tarjan_scc(&graph)
            .into_iter()
            .filter(|c| c.iter().any(|&x| alive[graph[x]]))
            .collect();
        if comps.len() != 1 {
            return Err(Error::Markov(format!(
                "transition matrix is not irreducible: {} strongly connected components",
                comps.len()
            )));
        }
        Ok((0..n).filter(|&a| !alive[a]).collect())
    }
}

/// One step of a forced cusp excursion: the composite inverse branch and the core exits.
#[derive(Clone, Debug, Serialize)]
pub struct ExcursionStep {
    /// Inducing time of the cells exiting at this step.
    pub time: usize,
    /// Cusp cell occupied at time `time − 1`.
    pub cell: usize,
    /// `h = e_{ℓ(ω_0)} e_{ℓ(c_1)} ⋯ e_{ℓ(c_{t−1})}`; the induced map on the cell is `h⁻¹`.
    pub map: MoebiusTransform,
    /// Core cells reached at time `time`, with `|h(Δ(b))|`.
    pub exits: Vec<(usize, f64)>,
}

/// The forced excursion entered from core cell `entry` through cusp cell `first`.
#[derive(Clone, Debug, Serialize)]
pub struct Excursion {
    pub entry: usize,
    pub first: usize,
    pub steps: Vec<ExcursionStep>,
}

/// First-return system to the core, enumerated up to `n_max`.
#[derive(Clone, Debug, Serialize)]
pub struct InducedSystem {
    pub n_max: usize,
    pub core: Vec<usize>,
    /// Inducing time one: core-to-core transitions.
    pub direct: Vec<(usize, usize)>,
    pub excursions: Vec<Excursion>,
    /// `#S̃(n)` for `n = 1..=n_max` (index `n − 1`).
    pub cardinality: Vec<usize>,
    /// `#S · #V_c`.
    pub cardinality_bound: usize,
}

impl InducedSystem {
    pub fn new(bs: &BSMap, p: &MarkovPartition, n_max: usize) -> Result<InducedSystem> {
        if n_max < 2 {
            return Err(Error::Markov("induced truncation depth must be at least 2".into()));
        }
        let core = p.core_cells();
        let mut direct = Vec::new();
        let mut excursions = Vec::new();
        let gens = &bs.group.generators;
        for &a in &core {
            for &b in &p.succ[a] {
                if p.is_core(b) {
                    direct.push((a, b));
                    continue;
                }
                let mut steps = Vec::new();
                let mut h = gens[p.cells[a].branch];
                let mut c = b;
                for t in 2..=n_max {
                    h = h.compose(&gens[p.cells[c].branch]);
                    let exits: Vec<(usize, f64)> = p.succ[c]
                        .iter()
                        .copied()
                        .filter(|&d| p.is_core(d))
                        .map(|d| (d, p.cells[d].arc.image(&h).len()))
                        .collect();
                    steps.push(ExcursionStep {
                        time: t,
                        cell: c,
                        map: h,
                        exits,
                    });
                    let next: Vec<usize> =
                        p.succ[c].iter().copied().filter(|&d| !p.is_core(d)).collect();
                    match next.as_slice() {
                        [d] => c = *d,
                        [] => break,
                        _ => {
                            return Err(Error::Markov(format!(
                                "cusp cell {c} has several cusp successors"
                            )))
                        }
                    }
                }
                excursions.push(Excursion {
                    entry: a,
                    first: b,
                    steps,
                });
            }
        }
        let mut cardinality = vec![0usize; n_max];
        cardinality[0] = core
            .iter()
            .filter(|&&a| direct.iter().any(|&(x, _)| x == a))
            .count();
        for e in &excursions {
            for s in &e.steps {
                if !s.exits.is_empty() {
                    cardinality[s.time - 1] += 1;
                }
            }
        }
        let n_cusps = bs.group.cusps().len();
        Ok(InducedSystem {
            n_max,
            core,
            direct,
            excursions,
            cardinality,
            cardinality_bound: p.len() * n_cusps,
        })
    }

    /// Total length of the induced cells with inducing time `n ≥ 2`.
    pub fn length_at_time(&self, n: usize) -> f64 {
        self.excursions
            .iter()
            .filter_map(|e| e.steps.get(n.checked_sub(2)?))
            .map(|s| s.exits.iter().map(|x| x.1).sum::<f64>())
            .sum()
    }

    /// Least-squares slope of `log |cells of time n|` against `log n` over `[lo, hi]`.
    pub fn length_slope(&self, lo: usize, hi: usize) -> f64 {
        let pts: Vec<(f64, f64)> = (lo.max(2)..=hi.min(self.n_max))
            .filter_map(|n| {
                let l = self.length_at_time(n);
                (l > 0.0).then(|| ((n as f64).ln(), l.ln()))
            })
            .collect();
        crate::stats::ols_slope(&pts)
    }
}
