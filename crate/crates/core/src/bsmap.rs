//! The Bowen-Series boundary map: branches, f-expansions and cylinders.

use crate::automaton::Automaton;
use crate::error::{Error, Result};
use crate::geometry::{Arc, MoebiusTransform, TAU};
use crate::group::{GroupPresentation, Orientation, VertexKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How to pick the half-cycle convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrientationChoice {
    /// Try anticlockwise first and keep the convention under which f-expansions are admissible.
    Auto,
    Ccw,
    Cw,
}

#[derive(Clone, Copy, Debug)]
pub struct Branch {
    pub arc: Arc,
    /// Letter `e_i` of the branch; the map on the arc is its inverse.
    pub letter: usize,
    pub map: MoebiusTransform,
}

#[derive(Clone, Debug)]
pub struct BSMap {
    pub group: GroupPresentation,
    /// One branch per side, in anticlockwise order; `branches[i].letter == i`.
    pub branches: Vec<Branch>,
    pub first_kind: bool,
    /// Orientation checks that were skipped or failed, for reporting.
    pub warnings: Vec<String>,
}

/// Result of an f-expansion; `escaped_at` is the step at which the orbit left the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub word: Vec<usize>,
    pub escaped_at: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct BSCylinder {
    pub word: Vec<usize>,
    pub arc: Arc,
    pub transform: MoebiusTransform,
}

impl BSMap {
    /// Builds the map; fails if the polygon lacks even corners unless `skip_even_corner_gate`.
    pub fn new(
        group: &GroupPresentation,
        orientation: OrientationChoice,
        skip_even_corner_gate: bool,
    ) -> Result<BSMap> {
        let mut warnings = Vec::new();
        let report = group.even_corner_check();
        if !report.passed {
            if skip_even_corner_gate {
                warnings.push(format!(
                    "even-corner check failed and was overridden: {}",
                    report.violations.join("; ")
                ));
            } else {
                return Err(Error::Spec(format!(
                    "polygon does not have even corners ({}); an (8g-4)-sided domain may be needed",
                    report.violations.join("; ")
                )));
            }
        }
        let m = group.m();
        let mut branches = Vec::with_capacity(m);
        for i in 0..m {
            let next = (i + 1) % m;
            let end = match group.vertices[next].kind {
                VertexKind::Improper { .. } => group.sides[i].q,
                _ => group.sides[next].p,
            };
            let arc = Arc::between(group.sides[i].p, end);
            if arc.len() < 1e-12 || arc.len() > TAU - 1e-12 {
                return Err(Error::Spec(format!(
                    "branch arc {} is degenerate; breakpoint order is ambiguous",
                    i + 1
                )));
            }
            branches.push(Branch {
                arc,
                letter: i,
                map: group.generators[i].inverse(),
            });
        }
        let mut bs = BSMap {
            group: group.clone(),
            branches,
            first_kind: group.is_first_kind(),
            warnings,
        };
        let pick = match orientation {
            OrientationChoice::Ccw => Some(Orientation::Ccw),
            OrientationChoice::Cw => Some(Orientation::Cw),
            OrientationChoice::Auto => None,
        };
        match pick {
            Some(o) => {
                bs.group = group.with_orientation(o);
                if let Some(bad) = bs.orientation_counterexample(2000, 12) {
                    bs.warnings.push(format!(
                        "f-expansion {bad:?} is rejected by the chosen half-cycle convention"
                    ));
                }
            }
            None => {
                let mut chosen = None;
                for o in [Orientation::Ccw, Orientation::Cw] {
                    bs.group = group.with_orientation(o);
                    if bs.orientation_counterexample(2000, 12).is_none() {
                        chosen = Some(o);
                        break;
                    }
                }
                if chosen.is_none() {
                    return Err(Error::Spec(
                        "no half-cycle convention makes the f-expansions admissible".into(),
                    ));
                }
            }
        }
        Ok(bs)
    }

    pub fn orientation(&self) -> Orientation {
        self.group.orientation
    }

    /// First sampled f-expansion that the admissibility automaton rejects.
    pub fn orientation_counterexample(&self, samples: usize, depth: usize) -> Option<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0b5e);
        for _ in 0..samples {
            let x = rng.random::<f64>() * TAU;
            let e = self.f_expand(x, depth);
            if !self.group.is_admissible(&e.word) {
                return Some(e.word);
            }
        }
        None
    }

    /// Total length of the domain.
    pub fn domain_length(&self) -> f64 {
        self.branches.iter().map(|b| b.arc.len()).sum()
    }

    /// Branch containing `x`, if `x` lies in the domain.
    #[inline]
    pub fn locate(&self, x: f64) -> Option<usize> {
        self.branches.iter().position(|b| b.arc.contains(x))
    }

    /// One application of the map: `(f(x), branch)`.
    #[inline]
    pub fn apply(&self, x: f64) -> Option<(f64, usize)> {
        let i = self.locate(x)?;
        Some((self.branches[i].map.apply_angle(x), i))
    }

    /// `ln |f′(x)|`.
    pub fn log_derivative(&self, x: f64) -> Option<f64> {
        let i = self.locate(x)?;
        Some(self.branches[i].map.log_derivative_at(x))
    }

    /// One step returning `(f(x), branch, ln |f′(x)|)`.
    #[inline]
    pub fn step(&self, x: f64) -> Option<(f64, usize, f64)> {
        let i = self.locate(x)?;
        let g = &self.branches[i].map;
        Some((g.apply_angle(x), i, g.log_derivative_at(x)))
    }

    pub fn f_expand(&self, x: f64, n: usize) -> Expansion {
        let mut word = Vec::with_capacity(n);
        let mut y = x;
        for k in 0..n {
            match self.apply(y) {
                Some((z, i)) => {
                    word.push(i);
                    y = z;
                }
                None => {
                    return Expansion {
                        word,
                        escaped_at: Some(k),
                    }
                }
            }
        }
        Expansion {
            word,
            escaped_at: None,
        }
    }

    /// The arc of points whose f-expansion begins with `word`.
    pub fn cylinder(&self, word: &[usize]) -> Result<BSCylinder> {
        let m = self.group.m();
        if word.is_empty() {
            return Err(Error::Word("empty word has no cylinder".into()));
        }
        if let Some(&l) = word.iter().find(|&&l| l >= m) {
            return Err(Error::Word(format!("letter {l} out of range")));
        }
        let mut arc = self.branches[*word.last().unwrap()].arc;
        for &l in word[..word.len() - 1].iter().rev() {
            let img = arc.image(&self.group.generators[l]);
            let pieces = self.branches[l].arc.intersect(&img);
            let piece = match pieces.as_slice() {
                [p] if p.len() > 0.0 => *p,
                _ => {
                    return Err(Error::Word(format!(
                        "non-admissible path: {word:?} has no cylinder"
                    )))
                }
            };
            arc = piece;
        }
        Ok(BSCylinder {
            word: word.to_vec(),
            arc,
            transform: self.group.evaluate(word),
        })
    }

    /// Offsets `log |Θ(w)| + d(0, w(0))` over all admissible words up to `max_len`, with the
    /// constant `C` fitted on words no longer than `fit_len` and the violations of
    /// `|offset| ≤ C + eps·|w|` counted over the rest.
    pub fn duality_report(&self, max_len: usize, fit_len: usize, eps: f64, budget: f64) -> Result<DualityReport> {
        let total: f64 = self.group.automaton().count_words(max_len).iter().skip(1).sum();
        if total > budget {
            return Err(Error::Budget(format!(
                "{total:.3e} admissible words up to length {max_len} exceed the budget of {budget:.3e}"
            )));
        }
        let fit_len = fit_len.clamp(1, max_len);
        let mut c: f64 = 0.0;
        self.duality_dfs(fit_len, 0, Automaton::START, MoebiusTransform::identity(), Arc::full(), &mut |_, off| {
            c = c.max(off.abs());
        });
        let mut max_by_len = vec![0.0f64; max_len + 1];
        let (mut words, mut violations) = (0usize, 0usize);
        self.duality_dfs(max_len, 0, Automaton::START, MoebiusTransform::identity(), Arc::full(), &mut |n, off| {
            words += 1;
            max_by_len[n] = max_by_len[n].max(off.abs());
            if off.abs() > c + eps * n as f64 {
                violations += 1;
            }
        });
        Ok(DualityReport {
            words,
            max_by_len,
            c,
            eps,
            violations,
        })
    }

    // On Θ(w) the map f^|w| is the inverse of the product T_w, so
    // Θ(wa) = Θ(w) ∩ T_w(branch a).
    fn duality_dfs(
        &self,
        max_len: usize,
        len: usize,
        state: u32,
        t: MoebiusTransform,
        theta: Arc,
        visit: &mut dyn FnMut(usize, f64),
    ) {
        if len == max_len {
            return;
        }
        let aut = self.group.automaton();
        for a in 0..self.group.m() {
            let s = aut.step(state, a);
            if s == Automaton::DEAD {
                continue;
            }
            let img = self.branches[a].arc.image(&t);
            let sub = if len == 0 {
                self.branches[a].arc
            } else {
                match theta.intersect(&img).as_slice() {
                    [p] => *p,
                    pieces => pieces.iter().copied().fold(Arc::new(0.0, 0.0), |x, y| {
                        if y.len() > x.len() {
                            y
                        } else {
                            x
                        }
                    }),
                }
            };
            let h = t.compose(&self.group.generators[a]);
            let off = sub.len().ln() + h.dist_origin();
            visit(len + 1, off);
            self.duality_dfs(max_len, len + 1, s, h, sub, visit);
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    pub words: usize,
    /// Largest `|offset|` among words of each length.
    pub max_by_len: Vec<f64>,
    pub c: f64,
    pub eps: f64,
    pub violations: usize,
}
