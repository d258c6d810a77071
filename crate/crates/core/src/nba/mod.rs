//! Nondeterministic Buchi automata over product powers of the five-glyph
//! alphabet, specialized to relations over binary-encoded real vectors.
//!
//! The public operations mirror the classic toolbox: well-formedness and
//! linear-constraint recognizers, boolean combinations, track insertion and
//! erasure, relational composition, graph automata for networks and plants,
//! emptiness with lasso witnesses, and membership of ultimately periodic
//! words. Two design rules hold throughout:
//!
//! - every relation automaton accepts **all** encodings of the vectors in
//!   its relation (redundant leading zeros and dual binary expansions
//!   included), which composition correctness silently depends on;
//! - complementation is never used; negations happen at the constraint
//!   level, so every construction stays polynomial.
//!
//! States are dense `u32` ids assigned in BFS discovery order, which makes
//! every construction and every extracted witness deterministic.

mod analysis;
mod atoms;
mod build;
mod ops;

pub use analysis::{accepting_lasso, is_empty, member};
pub use build::{
    build_linear_relation, build_wff, dnn_to_nba, identity_relation, plant_to_nba, poly_to_nba,
    relu_relation, RelOp,
};
pub use ops::{compose, cylindrify, duplicate_tracks, intersection, project, reduce, trim, union};

use crate::words::Symbol;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::hash::Hash;
use thiserror::Error;

/// State identifier.
pub type StateId = u32;

/// A Buchi automaton over `Sigma^arity` with one initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nba {
    arity: usize,
    num_states: u32,
    initial: StateId,
    accepting: Vec<bool>,
    /// Sorted by `(from, symbol, to)` and deduplicated.
    transitions: Vec<(StateId, Symbol, StateId)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NbaError {
    #[error("arity mismatch: {left} vs {right}")]
    ArityMismatch { left: usize, right: usize },
    #[error("invalid track specification: {0}")]
    BadTracks(String),
}

impl Nba {
    pub fn new(
        arity: usize,
        num_states: u32,
        initial: StateId,
        accepting: Vec<bool>,
        mut transitions: Vec<(StateId, Symbol, StateId)>,
    ) -> Nba {
        assert!(initial < num_states);
        assert_eq!(accepting.len(), num_states as usize);
        assert!(transitions
            .iter()
            .all(|&(f, _, t)| f < num_states && t < num_states));
        transitions.sort_unstable_by_key(|&(f, s, t)| (f, s.raw(), t));
        transitions.dedup();
        Nba {
            arity,
            num_states,
            initial,
            accepting,
            transitions,
        }
    }

    /// The automaton with one state and no transitions: the empty language.
    pub fn empty_language(arity: usize) -> Nba {
        Nba::new(arity, 1, 0, vec![false], Vec::new())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn num_states(&self) -> u32 {
        self.num_states
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn is_accepting(&self, s: StateId) -> bool {
        self.accepting[s as usize]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.num_states).filter(|&s| self.accepting[s as usize])
    }

    pub fn transitions(&self) -> &[(StateId, Symbol, StateId)] {
        &self.transitions
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    /// Outgoing edges grouped per state, in symbol order.
    pub fn adjacency(&self) -> Vec<Vec<(Symbol, StateId)>> {
        let mut adj = vec![Vec::new(); self.num_states as usize];
        for &(f, s, t) in &self.transitions {
            adj[f as usize].push((s, t));
        }
        adj
    }

    /// Graphviz rendering for debugging.
    pub fn to_dot(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("digraph nba {\n  rankdir=LR;\n");
        let _ = writeln!(out, "  init [shape=point];");
        for s in 0..self.num_states {
            let shape = if self.accepting[s as usize] {
                "doublecircle"
            } else {
                "circle"
            };
            let _ = writeln!(out, "  q{s} [shape={shape}];");
        }
        let _ = writeln!(out, "  init -> q{};", self.initial);
        for &(f, s, t) in &self.transitions {
            let _ = writeln!(out, "  q{f} -> q{t} [label=\"{}\"];", s.render(self.arity));
        }
        out.push_str("}\n");
        out
    }
}

// Dump format: states as a count, transitions with rendered symbol tuples.
#[derive(Serialize, Deserialize)]
struct NbaRepr {
    arity: usize,
    states: u32,
    initial: StateId,
    accepting: Vec<StateId>,
    transitions: Vec<(StateId, String, StateId)>,
}

impl Serialize for Nba {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        NbaRepr {
            arity: self.arity,
            states: self.num_states,
            initial: self.initial,
            accepting: self.accepting_states().collect(),
            transitions: self
                .transitions
                .iter()
                .map(|&(f, sym, t)| (f, sym.render(self.arity), t))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Nba {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = NbaRepr::deserialize(d)?;
        let mut accepting = vec![false; repr.states as usize];
        for s in repr.accepting {
            *accepting
                .get_mut(s as usize)
                .ok_or_else(|| D::Error::custom("accepting state out of range"))? = true;
        }
        let mut transitions = Vec::with_capacity(repr.transitions.len());
        for (f, sym, t) in repr.transitions {
            if f >= repr.states || t >= repr.states {
                return Err(D::Error::custom("transition state out of range"));
            }
            let glyphs: Option<Vec<crate::words::Glyph>> =
                sym.chars().map(crate::words::Glyph::from_char).collect();
            let glyphs = glyphs.ok_or_else(|| D::Error::custom("bad symbol glyph"))?;
            if glyphs.len() != repr.arity {
                return Err(D::Error::custom("symbol arity mismatch"));
            }
            transitions.push((f, Symbol::from_glyphs(&glyphs), t));
        }
        if repr.initial >= repr.states {
            return Err(D::Error::custom("initial state out of range"));
        }
        Ok(Nba::new(
            repr.arity,
            repr.states,
            repr.initial,
            accepting,
            transitions,
        ))
    }
}

/// Incremental construction with interned state keys; ids are handed out in
/// first-seen order, so BFS driving yields deterministic automata.
pub(crate) struct NbaBuilder<K> {
    arity: usize,
    ids: HashMap<K, StateId>,
    keys: Vec<K>,
    accepting: Vec<bool>,
    transitions: Vec<(StateId, Symbol, StateId)>,
}

impl<K: Eq + Hash + Clone> NbaBuilder<K> {
    pub fn new(arity: usize) -> NbaBuilder<K> {
        NbaBuilder {
            arity,
            ids: HashMap::new(),
            keys: Vec::new(),
            accepting: Vec::new(),
            transitions: Vec::new(),
        }
    }

    /// Intern a key; returns its id and whether it is new.
    pub fn intern(&mut self, key: K) -> (StateId, bool) {
        if let Some(&id) = self.ids.get(&key) {
            return (id, false);
        }
        let id = self.keys.len() as StateId;
        self.ids.insert(key.clone(), id);
        self.keys.push(key);
        self.accepting.push(false);
        (id, true)
    }

    pub fn key(&self, id: StateId) -> &K {
        &self.keys[id as usize]
    }

    pub fn set_accepting(&mut self, id: StateId, accepting: bool) {
        self.accepting[id as usize] = accepting;
    }

    pub fn add_edge(&mut self, from: StateId, symbol: Symbol, to: StateId) {
        self.transitions.push((from, symbol, to));
    }

    pub fn finish(self, initial: StateId) -> Nba {
        Nba::new(
            self.arity,
            self.keys.len() as u32,
            initial,
            self.accepting,
            self.transitions,
        )
    }
}
