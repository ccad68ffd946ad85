//! Deterministic automata recognising words that avoid a forbidden language.

use std::collections::HashMap;

/// Nondeterministic recogniser of `Σ* F`: a word is rejected once some suffix lies in `F`.
/// Node [`Nfa::START`] loops on every letter; reaching [`Nfa::ACCEPT`] means a forbidden
/// factor has been read.
#[derive(Clone, Debug)]
pub struct Nfa {
    alphabet: usize,
    edges: Vec<Vec<(usize, u32)>>,
}

impl Nfa {
    pub const START: u32 = 0;
    pub const ACCEPT: u32 = 1;

    pub fn new(alphabet: usize) -> Self {
        Nfa {
            alphabet,
            edges: vec![Vec::new(), Vec::new()],
        }
    }

    pub fn add_node(&mut self) -> u32 {
        self.edges.push(Vec::new());
        (self.edges.len() - 1) as u32
    }

    pub fn add_edge(&mut self, from: u32, letter: usize, to: u32) {
        self.edges[from as usize].push((letter, to));
    }

    /// Reads `word` from `from` through fresh nodes and returns the node reached before the
    /// last letter; the last letter is not added.
    pub fn add_prefix(&mut self, from: u32, word: &[usize]) -> u32 {
        let mut s = from;
        for &c in &word[..word.len().saturating_sub(1)] {
            let t = self.add_node();
            self.add_edge(s, c, t);
            s = t;
        }
        s
    }

    /// Reads `word` (non-empty) from `from` and ends at `to`.
    pub fn add_path(&mut self, from: u32, word: &[usize], to: u32) {
        let s = self.add_prefix(from, word);
        self.add_edge(s, *word.last().expect("non-empty path"), to);
    }

    /// Subset construction; sets containing [`Nfa::ACCEPT`] become [`Automaton::DEAD`].
    pub fn determinize(&self) -> Automaton {
        let start = vec![Self::START];
        let mut index: HashMap<Vec<u32>, u32> = HashMap::from([(start.clone(), 0)]);
        let mut sets = vec![start];
        let mut delta = Vec::new();
        let mut k = 0;
        while k < sets.len() {
            for c in 0..self.alphabet {
                let mut next = vec![Self::START];
                for &s in &sets[k] {
                    for &(l, t) in &self.edges[s as usize] {
                        if l == c {
                            next.push(t);
                        }
                    }
                }
                next.sort_unstable();
                next.dedup();
                if next.binary_search(&Self::ACCEPT).is_ok() {
                    delta.push(Automaton::DEAD);
                    continue;
                }
                let id = *index.entry(next.clone()).or_insert_with(|| {
                    sets.push(next);
                    (sets.len() - 1) as u32
                });
                delta.push(id);
            }
            k += 1;
        }
        Automaton {
            alphabet: self.alphabet,
            delta,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Automaton {
    alphabet: usize,
    /// `delta[state * alphabet + letter]`; [`Automaton::DEAD`] once a forbidden factor completes.
    delta: Vec<u32>,
}

impl Automaton {
    pub const DEAD: u32 = u32::MAX;
    pub const START: u32 = 0;

    /// Recogniser of the words avoiding a finite set of factors.
    pub fn from_forbidden(alphabet: usize, patterns: &[Vec<usize>]) -> Self {
        let mut nfa = Nfa::new(alphabet);
        for p in patterns {
            nfa.add_path(Nfa::START, p, Nfa::ACCEPT);
        }
        nfa.determinize()
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn states(&self) -> usize {
        self.delta.len() / self.alphabet.max(1)
    }

    #[inline]
    pub fn step(&self, state: u32, letter: usize) -> u32 {
        if state == Self::DEAD {
            return Self::DEAD;
        }
        self.delta[state as usize * self.alphabet + letter]
    }

    pub fn run(&self, word: &[usize]) -> u32 {
        word.iter().fold(Self::START, |s, &c| self.step(s, c))
    }

    pub fn accepts(&self, word: &[usize]) -> bool {
        self.run(word) != Self::DEAD
    }

    /// Number of accepted words of each length `0..=n`.
    pub fn count_words(&self, n: usize) -> Vec<f64> {
        let states = self.states();
        let mut v = vec![0.0; states];
        v[0] = 1.0;
        let mut out = vec![1.0];
        for _ in 0..n {
            let mut w = vec![0.0; states];
            for (s, &x) in v.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for c in 0..self.alphabet {
                    let t = self.delta[s * self.alphabet + c];
                    if t != Self::DEAD {
                        w[t as usize] += x;
                    }
                }
            }
            out.push(w.iter().sum());
            v = w;
        }
        out
    }
}
