//! Pressure, dimension, multifractal spectrum and rate function.
//!
//! Pressure of `β φ`, `φ = −log |f′|`, is bracketed by the spectral radii of block
//! transfer matrices whose edge weights are the infimum and supremum of `|f′|^{−β}` over
//! the corresponding cylinder. Bounds on the spectral radius come from the
//! Collatz-Wielandt quotients of a power iteration, so the bracket only widens when the
//! iteration is stopped early.

use crate::bsmap::BSMap;
use crate::error::{Error, Result};
use crate::geometry::{Arc, MoebiusTransform};
use crate::group::GroupPresentation;
use crate::markov::{InducedSystem, MarkovPartition};
use crate::stats::{Pchip, bisect, illinois};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

/// Default number of block states allowed in a direct transfer matrix.
pub const STATE_BUDGET: usize = 150_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Poincare,
    Induced,
    /// `β` at or beyond the phase transition: pressure zero.
    Boundary,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Poincare => "poincare",
            Method::Induced => "induced",
            Method::Boundary => "boundary",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PressureBracket {
    pub beta: f64,
    pub lower: f64,
    pub upper: f64,
    /// Log-ratio estimate `log Z_{n+1} − log Z_n`.
    pub estimate: f64,
    /// Mean growth of `log Z_k` per step up to depth `n`.
    pub naive: f64,
    pub block_len: usize,
    pub method: Method,
}

impl PressureBracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Perron root bounds of a nonnegative sparse matrix given in CSR form.
fn perron_bounds(
    offsets: &[u32],
    targets: &[u32],
    w: &[f64],
    v: &mut Vec<f64>,
    rel_tol: f64,
    max_iter: usize,
    aperiodic: bool,
) -> (f64, f64) {
    let n = offsets.len() - 1;
    if v.len() != n || v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        *v = vec![1.0; n];
    }
    let mut y = vec![0.0; n];
    let mut shift = 0.0;
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for it in 0..max_iter {
        for i in 0..n {
            let mut s = 0.0;
            for e in offsets[i] as usize..offsets[i + 1] as usize {
                s += w[e] * v[targets[e] as usize];
            }
            y[i] = s;
        }
        let (mut qmin, mut qmax) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let q = y[i] / v[i];
            qmin = qmin.min(q);
            qmax = qmax.max(q);
        }
        lo = f64::max(lo, qmin);
        hi = f64::min(hi, qmax);
        if hi - lo <= rel_tol * hi {
            break;
        }
        if it == 0 && !aperiodic {
            shift = 0.5 * (qmin + qmax);
        }
        // The shift removes periodicity; it does not change the Perron vector.
        let mut norm = 0.0f64;
        for i in 0..n {
            y[i] += shift * v[i];
            norm = norm.max(y[i]);
        }
        for i in 0..n {
            v[i] = y[i] / norm;
            if v[i] < 1e-300 {
                v[i] = 1e-300;
            }
        }
    }
    (lo, hi)
}

/// Transfer graph on paths of `r` cells.
#[derive(Clone, Debug)]
pub struct BlockGraph {
    pub r: usize,
    /// Cell words, `r` entries per state.
    words: Vec<u32>,
    offsets: Vec<u32>,
    targets: Vec<u32>,
    /// Range of `φ = −log |f′|` over the cylinder of each edge.
    dlo: Vec<f64>,
    dhi: Vec<f64>,
    aperiodic: bool,
}

/// Whether the strongly connected graph given in CSR form has period one.
fn is_aperiodic(offsets: &[u32], targets: &[u32]) -> bool {
    let n = offsets.len() - 1;
    if n == 0 {
        return true;
    }
    let mut level = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    level[0] = 0;
    let mut g = 0usize;
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    while let Some(u) = queue.pop_front() {
        for e in offsets[u] as usize..offsets[u + 1] as usize {
            let v = targets[e] as usize;
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
                if g == 1 {
                    return true;
                }
            }
        }
    }
    g == 1
}

fn live_cells(p: &MarkovPartition) -> Vec<bool> {
    let mut live = vec![true; p.len()];
    for &t in &p.transient {
        live[t] = false;
    }
    live
}

impl BlockGraph {
    /// Number of cell paths of length `r`.
    pub fn count_states(p: &MarkovPartition, r: usize) -> usize {
        let live = live_cells(p);
        let mut c: Vec<f64> = live.iter().map(|&l| l as u8 as f64).collect();
        for _ in 1..r {
            c = (0..p.len())
                .map(|a| {
                    if !live[a] {
                        return 0.0;
                    }
                    p.succ[a].iter().filter(|&&b| live[b]).map(|&b| c[b]).sum()
                })
                .collect();
        }
        c.iter().sum::<f64>() as usize
    }

    /// Largest block length `≤ max_r` whose state count fits the budget.
    pub fn block_len_for(p: &MarkovPartition, max_r: usize, budget: usize) -> usize {
        let mut r = 1;
        while r < max_r && Self::count_states(p, r + 1) <= budget {
            r += 1;
        }
        r
    }

    pub fn new(bs: &BSMap, p: &MarkovPartition, r: usize) -> BlockGraph {
        assert!(r >= 1);
        let live = live_cells(p);
        let mut words: Vec<u32> = Vec::new();
        let mut cur = Vec::with_capacity(r);
        fn extend(
            p: &MarkovPartition,
            live: &[bool],
            r: usize,
            cur: &mut Vec<u32>,
            out: &mut Vec<u32>,
        ) {
            if cur.len() == r {
                out.extend_from_slice(cur);
                return;
            }
            let last = *cur.last().unwrap() as usize;
            for &b in &p.succ[last] {
                if live[b] {
                    cur.push(b as u32);
                    extend(p, live, r, cur, out);
                    cur.pop();
                }
            }
        }
        for a in 0..p.len() {
            if live[a] {
                cur.push(a as u32);
                extend(p, &live, r, &mut cur, &mut words);
                cur.pop();
            }
        }
        let n = words.len() / r;
        let index: HashMap<&[u32], u32> = (0..n)
            .map(|i| (&words[i * r..(i + 1) * r], i as u32))
            .collect();
        let gens = &bs.group.generators;
        let arcs: Vec<Arc> = (0..n)
            .into_par_iter()
            .map(|i| {
                let w: Vec<usize> = words[i * r..(i + 1) * r].iter().map(|&c| c as usize).collect();
                p.cells[w[r - 1]].arc.image(&p.cylinder_map(bs, &w))
            })
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut dlo = Vec::new();
        let mut dhi = Vec::new();
        offsets.push(0u32);
        let mut key = vec![0u32; r];
        for i in 0..n {
            let w = &words[i * r..(i + 1) * r];
            let g = &gens[p.cells[w[0] as usize].branch];
            key[..r - 1].copy_from_slice(&w[1..]);
            let last = w[r - 1] as usize;
            for &b in &p.succ[last] {
                if !live[b] {
                    continue;
                }
                key[r - 1] = b as u32;
                let j = index[key.as_slice()];
                let (lo, hi) = g.log_derivative_range(&arcs[j as usize]);
                targets.push(j);
                dlo.push(lo);
                dhi.push(hi);
            }
            offsets.push(targets.len() as u32);
        }
        let aperiodic = is_aperiodic(&offsets, &targets);
        BlockGraph {
            r,
            words,
            offsets,
            targets,
            dlo,
            dhi,
            aperiodic,
        }
    }

    pub fn states(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edges(&self) -> usize {
        self.targets.len()
    }

    pub fn word(&self, i: usize) -> &[u32] {
        &self.words[i * self.r..(i + 1) * self.r]
    }

    /// Edge weights `exp(β φ)` at the lower or upper end of each edge's range.
    fn weights(&self, beta: f64, upper: bool) -> Vec<f64> {
        self.dlo
            .iter()
            .zip(&self.dhi)
            .map(|(&lo, &hi)| {
                let (a, b) = (beta * lo, beta * hi);
                (if upper { a.max(b) } else { a.min(b) }).exp()
            })
            .collect()
    }

    fn mid_weights(&self, beta: f64) -> Vec<f64> {
        self.dlo
            .iter()
            .zip(&self.dhi)
            .map(|(&lo, &hi)| (beta * 0.5 * (lo + hi)).exp())
            .collect()
    }

    /// `log ρ(M_sup)` or `log ρ(M_inf)`.
    pub fn bound(&self, beta: f64, upper: bool) -> f64 {
        let mut v = Vec::new();
        let w = self.weights(beta, upper);
        let (lo, hi) = perron_bounds(&self.offsets, &self.targets, &w, &mut v, 1e-11, 4000, self.aperiodic);
        if upper { hi.ln() } else { lo.ln() }
    }

    /// `[log ρ(M_inf), log ρ(M_sup)]`.
    pub fn bracket(&self, beta: f64) -> (f64, f64) {
        let mut v = Vec::new();
        let wl = self.weights(beta, false);
        let (lo, _) = perron_bounds(&self.offsets, &self.targets, &wl, &mut v, 1e-11, 4000, self.aperiodic);
        let wh = self.weights(beta, true);
        let (_, hi) = perron_bounds(&self.offsets, &self.targets, &wh, &mut v, 1e-11, 4000, self.aperiodic);
        (lo.ln(), hi.ln())
    }

    /// `log Z_k` for `k = r, …, n` with `Z_k` the mid-weight sum over cell paths of length `k`.
    pub fn log_partition_sums(&self, beta: f64, n: usize) -> Vec<f64> {
        let w = self.mid_weights(beta);
        let ns = self.states();
        let mut v = vec![1.0 / ns as f64; ns];
        let mut log_scale = (ns as f64).ln();
        let mut out = vec![log_scale];
        for _ in self.r..n {
            let mut y = vec![0.0; ns];
            for (i, yi) in y.iter_mut().enumerate() {
                for e in self.offsets[i] as usize..self.offsets[i + 1] as usize {
                    *yi += w[e] * v[self.targets[e] as usize];
                }
            }
            let s: f64 = y.iter().sum();
            log_scale += s.ln();
            out.push(log_scale);
            v = y.into_iter().map(|x| x / s).collect();
        }
        out
    }

    /// Mean of `log |f′|` along the cheapest (or dearest) cycle, with edge weights at the
    /// lower or upper end of their range, by Karp's algorithm.
    pub fn cycle_mean(&self, maximise: bool, upper: bool) -> f64 {
        let n = self.states();
        let w: Vec<f64> = (0..self.edges())
            .map(|e| {
                let x = if upper { -self.dlo[e] } else { -self.dhi[e] };
                if maximise {
                    -x
                } else {
                    x
                }
            })
            .collect();
        // d[k][v]: least weight of a walk with k edges ending at v.
        let mut d = vec![vec![f64::INFINITY; n]; n + 1];
        d[0].iter_mut().for_each(|x| *x = 0.0);
        for k in 1..=n {
            let (prev, cur) = d.split_at_mut(k);
            let prev = &prev[k - 1];
            let cur = &mut cur[0];
            for u in 0..n {
                if prev[u].is_infinite() {
                    continue;
                }
                for e in self.offsets[u] as usize..self.offsets[u + 1] as usize {
                    let v = self.targets[e] as usize;
                    let c = prev[u] + w[e];
                    if c < cur[v] {
                        cur[v] = c;
                    }
                }
            }
        }
        let mut best = f64::INFINITY;
        for v in 0..n {
            if d[n][v].is_infinite() {
                continue;
            }
            let mut worst = f64::NEG_INFINITY;
            for k in 0..n {
                if d[k][v].is_finite() {
                    worst = worst.max((d[n][v] - d[k][v]) / (n - k) as f64);
                }
            }
            best = best.min(worst);
        }
        if maximise {
            -best
        } else {
            best
        }
    }
}

/// Tail `Σ_{t > n} t^{−2β} e^{−p t}`, bounded above.
pub fn tail_sum(n: usize, beta: f64, p: f64) -> f64 {
    const TERMS: usize = 4000;
    if beta < 0.0 {
        return f64::INFINITY;
    }
    let mut s = 0.0;
    for t in n + 1..=n + TERMS {
        let t = t as f64;
        s += (-2.0 * beta * t.ln() - p * t).exp();
    }
    let t_end = (n + TERMS) as f64;
    let by_integral = if 2.0 * beta > 1.0 {
        t_end.powf(1.0 - 2.0 * beta) / (2.0 * beta - 1.0) * (-p * t_end).exp()
    } else {
        f64::INFINITY
    };
    let by_decay = if p > 0.0 {
        t_end.powf(-2.0 * beta) * (-p * t_end).exp() / p
    } else {
        f64::INFINITY
    };
    s + by_integral.min(by_decay)
}

#[derive(Clone, Debug)]
struct EdgeGroup {
    from: u32,
    to: u32,
    times: Vec<u32>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// The excursion reached the truncation depth, so a tail is added.
    truncated: bool,
}

/// The induced (first-return) transfer operator with potential `β log|h′| − p t`, on
/// states given by core-starting cell paths of length `r`.
#[derive(Clone, Debug)]
pub struct InducedOperator {
    pub r: usize,
    pub n_max: usize,
    states: usize,
    groups: Vec<EdgeGroup>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InducedRoot {
    pub beta: f64,
    pub p_lower: f64,
    pub p_upper: f64,
    /// `P = 0` because `𝒫(β, 0) ≤ 0`.
    pub boundary: bool,
}

impl InducedOperator {
    pub fn new(bs: &BSMap, p: &MarkovPartition, ind: &InducedSystem, r: usize) -> Self {
        let live = live_cells(p);
        let r = r.max(1);
        let mut words: Vec<Vec<usize>> = Vec::new();
        fn extend(
            p: &MarkovPartition,
            live: &[bool],
            r: usize,
            cur: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if cur.len() == r {
                out.push(cur.clone());
                return;
            }
            let last = *cur.last().unwrap();
            for &b in &p.succ[last] {
                if live[b] {
                    cur.push(b);
                    extend(p, live, r, cur, out);
                    cur.pop();
                }
            }
        }
        for &a in &ind.core {
            if live[a] {
                extend(p, &live, r, &mut vec![a], &mut words);
            }
        }
        let arcs: Vec<Arc> = words
            .iter()
            .map(|w| p.cells[w[r - 1]].arc.image(&p.cylinder_map(bs, w)))
            .collect();
        let mut by_prefix: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (i, w) in words.iter().enumerate() {
            for k in 1..=r {
                by_prefix.entry(w[..k].to_vec()).or_default().push(i);
            }
        }
        let gens = &bs.group.generators;
        let mut groups: HashMap<(u32, u32), EdgeGroup> = HashMap::new();
        let mut add = |from: usize, to: usize, t: usize, h: &MoebiusTransform, trunc: bool| {
            let (lo, hi) = h.log_derivative_range(&arcs[to]);
            let g = groups.entry((from as u32, to as u32)).or_insert(EdgeGroup {
                from: from as u32,
                to: to as u32,
                times: Vec::new(),
                lo: Vec::new(),
                hi: Vec::new(),
                truncated: false,
            });
            g.times.push(t as u32);
            g.lo.push(lo);
            g.hi.push(hi);
            g.truncated |= trunc;
        };
        let empty = Vec::new();
        for (i, w) in words.iter().enumerate() {
            if let Some(k) = (1..r).find(|&k| p.is_core(w[k])) {
                let h = w[..k].iter().fold(MoebiusTransform::identity(), |acc, &c| {
                    acc.compose(&gens[p.cells[c].branch])
                });
                for &j in by_prefix.get(&w[k..]).unwrap_or(&empty) {
                    add(i, j, k, &h, false);
                }
                continue;
            }
            if r == 1 {
                let h = gens[p.cells[w[0]].branch];
                for &b in &p.succ[w[0]] {
                    if p.is_core(b) && live[b] {
                        for &j in by_prefix.get(&vec![b]).unwrap_or(&empty) {
                            add(i, j, 1, &h, false);
                        }
                    }
                }
            }
            for e in &ind.excursions {
                if e.entry != w[0] || (r > 1 && e.first != w[1]) {
                    continue;
                }
                for s in &e.steps {
                    if s.time < r {
                        continue;
                    }
                    let trunc = s.time == ind.n_max;
                    for &(b, _) in &s.exits {
                        for &j in by_prefix.get(&vec![b]).unwrap_or(&empty) {
                            add(i, j, s.time, &s.map, trunc);
                        }
                    }
                }
            }
        }
        let mut groups: Vec<EdgeGroup> = groups.into_values().collect();
        groups.sort_by_key(|g| (g.from, g.to));
        InducedOperator {
            r,
            n_max: ind.n_max,
            states: words.len(),
            groups,
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// Bounds on `𝒫(β, p)`.
    pub fn pressure(&self, beta: f64, p: f64) -> Result<(f64, f64)> {
        let tail = tail_sum(self.n_max, beta, p);
        if !tail.is_finite() && self.groups.iter().any(|g| g.truncated) {
            return Err(Error::Summability(format!(
                "outside summability region: beta = {beta}, p = {p}"
            )));
        }
        let n = self.states;
        let mut offsets = vec![0u32; n + 1];
        for g in &self.groups {
            offsets[g.from as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut targets = vec![0u32; self.groups.len()];
        let mut wl = vec![0.0; self.groups.len()];
        let mut wh = vec![0.0; self.groups.len()];
        let half = self.n_max / 2;
        for (e, g) in self.groups.iter().enumerate() {
            targets[e] = g.to;
            let (mut sl, mut sh, mut c) = (0.0, 0.0, 0.0f64);
            for k in 0..g.times.len() {
                let t = g.times[k] as f64;
                let (a, b) = (beta * g.lo[k], beta * g.hi[k]);
                sl += (a.min(b) - p * t).exp();
                let top = a.max(b);
                sh += (top - p * t).exp();
                if g.truncated && g.times[k] as usize >= half {
                    c = c.max((top + 2.0 * beta * t.ln()).exp());
                }
            }
            if g.truncated {
                sh += 1.05 * c * tail;
            }
            wl[e] = sl;
            wh[e] = sh;
        }
        let mut v = Vec::new();
        let (lo, _) = perron_bounds(&offsets, &targets, &wl, &mut v, 1e-12, 20000, false);
        let (_, hi) = perron_bounds(&offsets, &targets, &wh, &mut v, 1e-12, 20000, false);
        Ok((lo.ln(), hi.ln()))
    }

    /// Root in `p` of `𝒫(β, p) = 0`, or the boundary regime.
    pub fn root(&self, beta: f64) -> Result<InducedRoot> {
        let at0 = self.pressure(beta, 0.0).unwrap_or((f64::INFINITY, f64::INFINITY));
        if at0.1 <= 0.0 {
            return Ok(InducedRoot {
                beta,
                p_lower: 0.0,
                p_upper: 0.0,
                boundary: true,
            });
        }
        let mut p_max = 1.0;
        while self.pressure(beta, p_max)?.0 > 0.0 {
            p_max *= 2.0;
            if p_max > 1e3 {
                return Err(Error::Numerical("induced pressure does not change sign".into()));
            }
        }
        let lower = |p: f64| {
            if p <= 0.0 {
                at0.0
            } else {
                self.pressure(beta, p).map(|x| x.0).unwrap_or(f64::INFINITY)
            }
        };
        let upper = |p: f64| {
            if p <= 0.0 {
                at0.1
            } else {
                self.pressure(beta, p).map(|x| x.1).unwrap_or(f64::INFINITY)
            }
        };
        let p_lower = if at0.0 <= 0.0 {
            0.0
        } else {
            bisect(0.0, p_max, 1e-9, lower).unwrap_or(0.0)
        };
        let mut p_hi_max = p_max;
        while upper(p_hi_max) > 0.0 {
            p_hi_max *= 2.0;
            if p_hi_max > 1e3 {
                return Err(Error::Numerical("induced pressure does not change sign".into()));
            }
        }
        let p_upper = bisect(1e-12, p_hi_max, 1e-9, upper).unwrap_or(p_hi_max);
        Ok(InducedRoot {
            beta,
            p_lower,
            p_upper: p_upper.max(p_lower),
            boundary: false,
        })
    }

    /// Bracket on the root in `β` of `𝒫(β, 0) = 0`.
    pub fn delta(&self) -> Result<(f64, f64)> {
        let f_lo = |b: f64| self.pressure(b, 0.0).map(|x| x.0).unwrap_or(f64::INFINITY);
        let f_hi = |b: f64| self.pressure(b, 0.0).map(|x| x.1).unwrap_or(f64::INFINITY);
        let lo = illinois(0.05, 3.0, 1e-7, f_lo)
            .ok_or_else(|| Error::Numerical("induced lower pressure has no root in beta".into()))?;
        let hi = bisect(0.5 + 1e-9, 3.0, 1e-7, f_hi)
            .ok_or_else(|| Error::Numerical("induced upper pressure has no root in beta".into()))?;
        Ok((lo.min(hi), hi.max(lo)))
    }
}

/// Poincare sums `Z_k(β) = Σ_{|g| = k} exp(−β d(0, g 0))` for `k = 0..=n`, over
/// admissible words, exploiting the rotational symmetry of the presentation.
pub fn poincare_sums(group: &GroupPresentation, betas: &[f64], n: usize, budget: f64) -> Result<Vec<Vec<f64>>> {
    let counts = group.automaton().count_words(n);
    let total: f64 = counts.iter().sum();
    let step = group.rotation_step();
    let m = group.m();
    let mult = (m / step) as f64;
    if total / mult > budget {
        return Err(Error::Budget(format!(
            "{total:.3e} words up to length {n} exceed the enumeration budget"
        )));
    }
    let kinds: Vec<u8> = betas
        .iter()
        .map(|&b| if b == 0.0 { 0 } else if b == 0.5 { 1 } else if b == 1.0 { 2 } else { 3 })
        .collect();
    let general = kinds.contains(&3);
    let nb = betas.len();
    let per_first: Vec<Vec<f64>> = (0..step)
        .into_par_iter()
        .map(|first| {
            let mut z = vec![0.0; (n + 1) * nb];
            let aut = group.automaton();
            let s0 = aut.step(crate::automaton::Automaton::START, first);
            if s0 == crate::automaton::Automaton::DEAD || n == 0 {
                return z;
            }
            struct Ctx<'a> {
                aut: &'a crate::automaton::Automaton,
                gens: &'a [MoebiusTransform],
                betas: &'a [f64],
                kinds: &'a [u8],
                general: bool,
                n: usize,
                z: &'a mut [f64],
            }
            fn visit(c: &mut Ctx, depth: usize, state: u32, g: MoebiusTransform) {
                let na = g.a.norm();
                let s = na + (na * na - 1.0).max(0.0).sqrt();
                let ls = if c.general { s.ln() } else { 0.0 };
                let nb = c.betas.len();
                let row = &mut c.z[depth * nb..(depth + 1) * nb];
                for k in 0..nb {
                    row[k] += match c.kinds[k] {
                        0 => 1.0,
                        1 => 1.0 / s,
                        2 => 1.0 / (s * s),
                        _ => (-2.0 * c.betas[k] * ls).exp(),
                    };
                }
                if depth == c.n {
                    return;
                }
                for l in 0..c.gens.len() {
                    let t = c.aut.step(state, l);
                    if t != crate::automaton::Automaton::DEAD {
                        visit(c, depth + 1, t, g.compose_raw(&c.gens[l]));
                    }
                }
            }
            let mut ctx = Ctx {
                aut,
                gens: &group.generators,
                betas,
                kinds: &kinds,
                general,
                n,
                z: &mut z,
            };
            visit(&mut ctx, 1, s0, group.generators[first]);
            z
        })
        .collect();
    let mut out = vec![vec![0.0; n + 1]; nb];
    for (k, row) in out.iter_mut().enumerate() {
        row[0] = 1.0;
        for d in 1..=n {
            row[d] = mult * per_first.iter().map(|z| z[d * nb + k]).sum::<f64>();
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct PoincareEstimate {
    pub beta: f64,
    /// `log Z_n − log Z_{n−1}`.
    pub estimate: f64,
    /// `(1/n) log Z_n`.
    pub naive: f64,
    pub log_sums: Vec<f64>,
}

pub fn pressure_poincare(group: &GroupPresentation, betas: &[f64], n: usize) -> Result<Vec<PoincareEstimate>> {
    if n < 2 {
        return Err(Error::Budget("Poincare estimate needs depth at least 2".into()));
    }
    let sums = poincare_sums(group, betas, n, 4e9)?;
    Ok(betas
        .iter()
        .zip(sums)
        .map(|(&beta, z)| {
            let log_sums: Vec<f64> = z.iter().map(|x| x.ln()).collect();
            PoincareEstimate {
                beta,
                estimate: log_sums[n] - log_sums[n - 1],
                naive: log_sums[n] / n as f64,
                log_sums,
            }
        })
        .collect())
}

/// Settings shared by the pressure computations.
#[derive(Clone, Debug, Serialize)]
pub struct ThermoConfig {
    /// Largest cell-path length used in the direct transfer matrix.
    pub depth: usize,
    pub state_budget: usize,
    /// Truncation of cusp excursions.
    pub n_max: usize,
    /// Block length of the induced operator.
    pub induced_block: usize,
    /// State cap for the graph used for cycle means.
    pub cycle_states: usize,
}

impl Default for ThermoConfig {
    fn default() -> Self {
        ThermoConfig {
            depth: 12,
            state_budget: STATE_BUDGET,
            n_max: 400,
            induced_block: 4,
            cycle_states: 3000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PressureCurve {
    pub points: Vec<PressureBracket>,
    pub delta: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumPoint {
    pub alpha: f64,
    pub b: f64,
    pub b_lower: f64,
    pub b_upper: f64,
    /// Minimising `β`.
    pub beta: f64,
    /// The minimiser is inside the `β` range rather than at its edge.
    pub interior: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumCurve {
    pub points: Vec<SpectrumPoint>,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    /// `α^±` from the end slopes of the pressure curve.
    pub slope_alpha_minus: f64,
    pub slope_alpha_plus: f64,
    /// Cycle-mean brackets for `α^−` and `α^+`.
    pub cycle_alpha_minus: (f64, f64),
    pub cycle_alpha_plus: (f64, f64),
    pub alpha_g: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatePoint {
    pub alpha: f64,
    pub i: f64,
    pub i_lower: f64,
    pub i_upper: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
    pub left_slope: f64,
    pub right_slope: f64,
    /// Largest violation of discrete convexity.
    pub convexity_defect: f64,
}

impl RateCurve {
    /// `inf_{α ∈ J} I(α)` by linear interpolation on the grid.
    pub fn inf_on(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts = &self.points;
        if pts.is_empty() {
            return None;
        }
        let interp = |a: f64| -> Option<f64> {
            let k = pts.windows(2).position(|w| w[0].alpha <= a && a <= w[1].alpha)?;
            let (p, q) = (&pts[k], &pts[k + 1]);
            let s = (a - p.alpha) / (q.alpha - p.alpha);
            Some(p.i + s * (q.i - p.i))
        };
        let mut cands: Vec<f64> = pts
            .iter()
            .filter(|p| p.alpha >= lo && p.alpha <= hi)
            .map(|p| p.i)
            .collect();
        cands.extend(interp(lo));
        cands.extend(interp(hi));
        cands.into_iter().reduce(f64::min)
    }
}

/// Pressure computations for one group.
pub struct Thermo<'a> {
    pub bs: &'a BSMap,
    pub partition: &'a MarkovPartition,
    pub config: ThermoConfig,
    pub graph: BlockGraph,
    induced: Option<InducedOperator>,
    delta_cache: std::sync::OnceLock<(f64, f64)>,
}

impl<'a> Thermo<'a> {
    pub fn new(bs: &'a BSMap, partition: &'a MarkovPartition, config: ThermoConfig) -> Result<Self> {
        let r = BlockGraph::block_len_for(partition, config.depth.max(1), config.state_budget);
        let graph = BlockGraph::new(bs, partition, r);
        let induced = if bs.group.has_cusp() {
            let ind = InducedSystem::new(bs, partition, config.n_max)?;
            Some(InducedOperator::new(bs, partition, &ind, config.induced_block))
        } else {
            None
        };
        Ok(Thermo {
            bs,
            partition,
            config,
            graph,
            induced,
            delta_cache: std::sync::OnceLock::new(),
        })
    }

    pub fn induced(&self) -> Option<&InducedOperator> {
        self.induced.as_ref()
    }

    pub fn pressure_direct(&self, beta: f64) -> PressureBracket {
        let (lower, upper) = self.graph.bracket(beta);
        let n = self.config.depth.max(self.graph.r + 1);
        let z = self.graph.log_partition_sums(beta, n + 1);
        let k = z.len();
        PressureBracket {
            beta,
            lower,
            upper,
            estimate: z[k - 1] - z[k - 2],
            naive: (z[k - 2] - z[0]) / (k - 2).max(1) as f64,
            block_len: self.graph.r,
            method: Method::Direct,
        }
    }

    pub fn induced_pressure(&self, beta: f64, p: f64) -> Result<(f64, f64)> {
        match &self.induced {
            Some(op) => op.pressure(beta, p),
            None => {
                let d = self.pressure_direct(beta);
                Ok((d.lower - p, d.upper - p))
            }
        }
    }

    /// Pressure through the root of the induced pressure; delegates to the direct bracket
    /// when the group has no cusp.
    pub fn pressure_via_induced(&self, beta: f64) -> Result<PressureBracket> {
        let Some(op) = &self.induced else {
            return Ok(self.pressure_direct(beta));
        };
        let root = op.root(beta)?;
        Ok(PressureBracket {
            beta,
            lower: root.p_lower,
            upper: root.p_upper,
            estimate: 0.5 * (root.p_lower + root.p_upper),
            naive: 0.5 * (root.p_lower + root.p_upper),
            block_len: op.r,
            method: if root.boundary { Method::Boundary } else { Method::Induced },
        })
    }

    /// Bracket on `δ(G) = min{β ≥ 0 : P(β) = 0}`.
    pub fn delta(&self) -> Result<(f64, f64)> {
        if let Some(d) = self.delta_cache.get() {
            return Ok(*d);
        }
        let d = match &self.induced {
            Some(op) => op.delta()?,
            None => {
                let p0 = self.graph.bracket(0.0);
                if p0.1 <= 0.0 {
                    return Err(Error::Numerical(
                        "pressure at beta = 0 is not positive; the group is degenerate".into(),
                    ));
                }
                let lo = illinois(0.0, 4.0, 1e-7, |b| self.graph.bound(b, false))
                    .ok_or_else(|| Error::Numerical("lower pressure has no root".into()))?;
                let hi = illinois(0.0, 4.0, 1e-7, |b| self.graph.bound(b, true))
                    .ok_or_else(|| Error::Numerical("upper pressure has no root".into()))?;
                (lo.min(hi), hi.max(lo))
            }
        };
        let _ = self.delta_cache.set(d);
        Ok(d)
    }

    /// Preferred pressure: induced root near and beyond the phase transition of a cusped
    /// group, the direct bracket elsewhere.
    pub fn pressure(&self, beta: f64) -> Result<PressureBracket> {
        if self.induced.is_some() {
            let (_, dhi) = self.delta()?;
            if beta > 0.6 * dhi {
                return self.pressure_via_induced(beta);
            }
        }
        Ok(self.pressure_direct(beta))
    }

    /// 101 evenly spaced points on `[−3, max(2, δ_hi + 0.5)]` together with the ends of
    /// the `δ` bracket, so the Legendre infimum near the phase transition sits on a grid point.
    pub fn default_beta_grid(&self) -> Result<Vec<f64>> {
        let (dlo, dhi) = self.delta()?;
        let top = f64::max(2.0, dhi + 0.5);
        let mut grid: Vec<f64> = (0..101).map(|k| -3.0 + (top + 3.0) * k as f64 / 100.0).collect();
        grid.extend([dlo, dhi]);
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        Ok(grid)
    }

    pub fn pressure_curve(&self, grid: &[f64]) -> Result<PressureCurve> {
        let delta = self.delta()?;
        let points: Result<Vec<PressureBracket>> =
            grid.par_iter().map(|&b| self.pressure(b)).collect();
        Ok(PressureCurve {
            points: points?,
            delta,
        })
    }

    /// Cycle-mean brackets `(α^−, α^+)` of `log |f′|`.
    pub fn cycle_mean_brackets(&self) -> ((f64, f64), (f64, f64)) {
        let r = BlockGraph::block_len_for(self.partition, self.graph.r, self.config.cycle_states);
        let g = if r == self.graph.r {
            self.graph.clone()
        } else {
            BlockGraph::new(self.bs, self.partition, r)
        };
        let min = (g.cycle_mean(false, false), g.cycle_mean(false, true));
        let max = (g.cycle_mean(true, false), g.cycle_mean(true, true));
        (min, max)
    }

    /// `b(α) = (1/α) inf_β (P(β) + β α)` on `alphas`, or on a default grid when empty.
    pub fn spectrum(&self, curve: &PressureCurve, alphas: &[f64]) -> Result<SpectrumCurve> {
        let pts = &curve.points;
        if pts.len() < 3 {
            return Err(Error::Numerical("pressure curve needs at least three points".into()));
        }
        let mut warnings = Vec::new();
        let k = pts.len();
        let slope_plus = -(pts[1].mid() - pts[0].mid()) / (pts[1].beta - pts[0].beta);
        let slope_minus =
            (-(pts[k - 1].mid() - pts[k - 2].mid()) / (pts[k - 1].beta - pts[k - 2].beta)).max(0.0);
        let (cmin, cmax) = self.cycle_mean_brackets();
        let cyc_minus = 0.5 * (cmin.0 + cmin.1).max(0.0);
        let cyc_minus = if cmin.0 <= 0.0 && cmin.1 >= 0.0 { 0.0 } else { cyc_minus };
        let cyc_plus = 0.5 * (cmax.0 + cmax.1);
        for (name, s, c) in [("alpha-", slope_minus, cyc_minus), ("alpha+", slope_plus, cyc_plus)] {
            let scale = c.abs().max(1e-3);
            if (s - c).abs() > 0.1 * scale {
                warnings.push(format!(
                    "{name}: slope estimate {s:.4} and cycle-mean estimate {c:.4} differ by more than 10%"
                ));
            }
        }
        let alpha_minus = cyc_minus;
        let alpha_plus = cyc_plus;
        let alphas: Vec<f64> = if alphas.is_empty() {
            let n = 41;
            (0..n)
                .map(|i| alpha_minus + (alpha_plus - alpha_minus) * (i as f64 + 0.5) / n as f64)
                .collect()
        } else {
            alphas.to_vec()
        };
        let b_lo_hi = |alpha: f64, f: &dyn Fn(&PressureBracket) -> f64| -> f64 {
            pts.iter().map(|p| f(p) + p.beta * alpha).fold(f64::INFINITY, f64::min) / alpha
        };
        let interp = Pchip::new(
            pts.iter().map(|p| p.beta).collect(),
            pts.iter().map(|p| p.mid()).collect(),
        );
        let points: Vec<Result<SpectrumPoint>> = alphas
            .par_iter()
            .map(|&alpha| -> Result<SpectrumPoint> {
                if alpha <= 0.0 {
                    return Err(Error::Numerical(format!("alpha = {alpha} is not positive")));
                }
                let vals: Vec<f64> = pts.iter().map(|p| p.mid() + p.beta * alpha).collect();
                let i = (0..k).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
                let interior = i > 0 && i < k - 1;
                let (mut beta, mut best) = (pts[i].beta, vals[i]);
                if interior {
                    // Golden-section search on each grid interval next to the discrete minimum.
                    for (x0, x1) in [(pts[i - 1].beta, pts[i].beta), (pts[i].beta, pts[i + 1].beta)] {
                        let (b0, b1) = golden_min(x0, x1, 1e-10, &|x| interp.eval(x) + x * alpha);
                        if b1 < best {
                            beta = b0;
                            best = b1;
                        }
                    }
                }
                Ok(SpectrumPoint {
                    alpha,
                    b: best / alpha,
                    b_lower: b_lo_hi(alpha, &|p| p.lower).min(best / alpha),
                    b_upper: b_lo_hi(alpha, &|p| p.upper).max(best / alpha),
                    beta,
                    interior,
                })
            })
            .collect();
        let mut out = Vec::new();
        for p in points {
            match p {
                Ok(p) => out.push(p),
                Err(e) => warnings.push(format!("omitted: {e}")),
            }
        }
        let alpha_g = out
            .iter()
            .max_by(|a, b| a.b.total_cmp(&b.b))
            .map(|p| p.alpha)
            .unwrap_or(f64::NAN);
        if out.iter().any(|p| !p.interior) {
            warnings.push(format!(
                "{} spectrum points have their minimiser at the edge of the beta range",
                out.iter().filter(|p| !p.interior).count()
            ));
        }
        Ok(SpectrumCurve {
            points: out,
            alpha_minus,
            alpha_plus,
            slope_alpha_minus: slope_minus,
            slope_alpha_plus: slope_plus,
            cycle_alpha_minus: cmin,
            cycle_alpha_plus: cmax,
            alpha_g,
            warnings,
        })
    }
}

/// Golden-section search for the minimum of a unimodal function: `(argmin, min)`.
pub fn golden_min(mut a: f64, mut b: f64, tol: f64, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `I(α) = α (1 − b(α))` with diagnostics.
pub fn rate(spectrum: &SpectrumCurve) -> RateCurve {
    let points: Vec<RatePoint> = spectrum
        .points
        .iter()
        .map(|p| RatePoint {
            alpha: p.alpha,
            i: p.alpha * (1.0 - p.b),
            i_lower: p.alpha * (1.0 - p.b_upper),
            i_upper: p.alpha * (1.0 - p.b_lower),
        })
        .collect();
    let slope = |a: &RatePoint, b: &RatePoint| (b.i - a.i) / (b.alpha - a.alpha);
    let n = points.len();
    let (left_slope, right_slope) = if n >= 2 {
        (slope(&points[0], &points[1]), slope(&points[n - 2], &points[n - 1]))
    } else {
        (f64::NAN, f64::NAN)
    };
    let mut defect: f64 = 0.0;
    for w in points.windows(3) {
        let s1 = slope(&w[0], &w[1]);
        let s2 = slope(&w[1], &w[2]);
        defect = defect.max(s1 - s2);
    }
    RateCurve {
        points,
        left_slope,
        right_slope,
        convexity_defect: defect,
    }
}
