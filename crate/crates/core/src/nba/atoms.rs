//! Implicit constraint machines: the bounded-residual recognizers behind
//! every relation automaton in this crate.
//!
//! One [`Atom`] recognizes the well-formed words whose decoded vector
//! satisfies a single integer linear constraint. Reading most significant
//! digits first, the machine tracks the running value of the scalar product
//! against the bound; values that can no longer influence the outcome
//! saturate into a "surely below" state or die, which caps the live residual
//! range and makes the state space finite:
//!
//! - integer phase, value `v <- 2v + <c, d>`: live while
//!   `min(b,0) - M <= v <= max(b,0) - m` where `m`/`M` are the most
//!   negative/positive possible tail contributions (`F_i` ranges over
//!   `[0, 1]` inclusive, dual expansions included);
//! - fractional phase, scaled budget `r <- 2r - <c, d>`: live while
//!   `m <= r <= M`. Staying live forever forces exact equality in the
//!   limit, so equality constraints accept exactly the everywhere-live runs
//!   and inequalities additionally accept the saturated "surely below" runs.
//!
//! A [`Relation`] is a finite union of atom conjunctions (a disjunctive
//! normal form); its acceptance is a forward-closed state predicate, so a
//! conjunction is a plain product without the usual intersection flag. The
//! disjunct is chosen when the sign symbol is read, which is the only
//! nondeterminism.

use super::{Nba, NbaBuilder};
use crate::rational::Q;
use crate::words::{bit_symbols, point_symbol, sign_symbols, Glyph, Symbol};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use std::collections::VecDeque;

/// Constraint sense for relation atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelOp {
    Le,
    Lt,
    Eq,
}

/// One integer linear constraint `<coeffs, x> op b` as an implicit machine.
///
/// All saturation windows depend on the signs read at the start of the
/// word: flipping a track negates its effective coefficient, which moves
/// the reachable tail range. Bounds are therefore derived from the
/// sign-adjusted coefficients per state, never from the raw ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    coeffs: Vec<i128>,
    b: i128,
    op: RelOp,
}

/// Runtime state of one atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomState {
    Start,
    /// Sign vector read (negative tracks as a bitmask), no digit yet.
    AfterSign { neg: u32 },
    /// At least one integer digit read; running value `v`.
    Int { neg: u32, v: i128 },
    /// Surely strictly below the bound, still before the point.
    IntBelow,
    /// After the point with live scaled budget `r`.
    Frac { neg: u32, r: i128 },
    /// Surely strictly below the bound, after the point.
    FracBelow,
}

impl Atom {
    /// Build from rational data by clearing denominators (sense preserved).
    pub fn new(coeffs: &[Q], op: RelOp, b: &Q) -> Atom {
        let mut lcm = b.denom().clone();
        for c in coeffs {
            lcm = num_integer::lcm(lcm, c.denom().clone());
        }
        let scale_int = |q: &Q| -> i128 {
            let scaled: BigInt = q.numer() * (&lcm / q.denom());
            scaled
                .to_i128()
                .expect("constraint coefficients too large for the automaton construction")
        };
        let coeffs: Vec<i128> = coeffs.iter().map(scale_int).collect();
        let b = scale_int(b);
        Atom { coeffs, b, op }
    }

    pub fn arity(&self) -> usize {
        self.coeffs.len()
    }

    fn effective(&self, neg: u32, track: usize) -> i128 {
        if neg & (1 << track) != 0 {
            -self.coeffs[track]
        } else {
            self.coeffs[track]
        }
    }

    fn digit_dot(&self, neg: u32, symbol: Symbol) -> i128 {
        let mut dot = 0i128;
        for (track, &c) in self.coeffs.iter().enumerate() {
            if c != 0 && symbol.track(track) == Glyph::One {
                dot += self.effective(neg, track);
            }
        }
        dot
    }

    /// Extremes of the sign-adjusted tail contribution (each remaining
    /// fractional part ranges over [0, 1] inclusive, dual expansions
    /// included).
    fn tail_bounds(&self, neg: u32) -> (i128, i128) {
        let mut min = 0i128;
        let mut max = 0i128;
        for (track, &c) in self.coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let eff = self.effective(neg, track);
            if eff < 0 {
                min += eff;
            } else {
                max += eff;
            }
        }
        (min, max)
    }

    fn classify_int(&self, neg: u32, v: i128) -> Option<AtomState> {
        let (tail_min, tail_max) = self.tail_bounds(neg);
        if v > self.b.max(0) - tail_min {
            return None;
        }
        if v < self.b.min(0) - tail_max {
            return match self.op {
                RelOp::Eq => None,
                RelOp::Le | RelOp::Lt => Some(AtomState::IntBelow),
            };
        }
        Some(AtomState::Int { neg, v })
    }

    fn classify_frac(&self, neg: u32, r: i128) -> Option<AtomState> {
        let (tail_min, tail_max) = self.tail_bounds(neg);
        if r > tail_max {
            return match self.op {
                RelOp::Eq => None,
                RelOp::Le | RelOp::Lt => Some(AtomState::FracBelow),
            };
        }
        if r < tail_min {
            return None;
        }
        Some(AtomState::Frac { neg, r })
    }

    /// Deterministic step; `None` kills the run. The caller guarantees the
    /// symbol is phase-consistent (all signs, all bits, or all points).
    pub fn step(&self, state: AtomState, symbol: Symbol) -> Option<AtomState> {
        let first = symbol.track(0);
        match state {
            AtomState::Start => {
                if !first.is_sign() {
                    return None;
                }
                let mut neg = 0u32;
                for (track, &c) in self.coeffs.iter().enumerate() {
                    if c != 0 && symbol.track(track) == Glyph::Minus {
                        neg |= 1 << track;
                    }
                }
                Some(AtomState::AfterSign { neg })
            }
            AtomState::AfterSign { neg } => {
                if !first.is_bit() {
                    return None;
                }
                self.classify_int(neg, self.digit_dot(neg, symbol))
            }
            AtomState::Int { neg, v } => match first {
                Glyph::Zero | Glyph::One => {
                    self.classify_int(neg, 2 * v + self.digit_dot(neg, symbol))
                }
                Glyph::Point => self.classify_frac(neg, self.b - v),
                _ => None,
            },
            AtomState::IntBelow => match first {
                Glyph::Zero | Glyph::One => Some(AtomState::IntBelow),
                Glyph::Point => Some(AtomState::FracBelow),
                _ => None,
            },
            AtomState::Frac { neg, r } => {
                if !first.is_bit() {
                    return None;
                }
                self.classify_frac(neg, 2 * r - self.digit_dot(neg, symbol))
            }
            AtomState::FracBelow => {
                if first.is_bit() {
                    Some(AtomState::FracBelow)
                } else {
                    None
                }
            }
        }
    }

    /// Accepting states form a forward-closed set (once accepting, every
    /// live successor is accepting), which products rely on.
    pub fn accepting(&self, state: AtomState) -> bool {
        match self.op {
            RelOp::Le => matches!(state, AtomState::Frac { .. } | AtomState::FracBelow),
            RelOp::Lt => matches!(state, AtomState::FracBelow),
            RelOp::Eq => matches!(state, AtomState::Frac { .. }),
        }
    }
}

/// Word phase, tracked explicitly so empty conjunctions still enforce
/// well-formedness and so symbol enumeration knows what to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Sign,
    FirstDigit,
    Digits,
    Frac,
}

impl Phase {
    pub fn step(self, glyph: Glyph) -> Option<Phase> {
        match (self, glyph) {
            (Phase::Sign, Glyph::Plus | Glyph::Minus) => Some(Phase::FirstDigit),
            (Phase::FirstDigit, Glyph::Zero | Glyph::One) => Some(Phase::Digits),
            (Phase::Digits, Glyph::Zero | Glyph::One) => Some(Phase::Digits),
            (Phase::Digits, Glyph::Point) => Some(Phase::Frac),
            (Phase::Frac, Glyph::Zero | Glyph::One) => Some(Phase::Frac),
            _ => None,
        }
    }

    /// Phase-consistent symbols at a given arity.
    pub fn symbols(self, arity: usize) -> Vec<Symbol> {
        match self {
            Phase::Sign => sign_symbols(arity),
            Phase::FirstDigit | Phase::Frac => bit_symbols(arity),
            Phase::Digits => {
                let mut out = bit_symbols(arity);
                out.push(point_symbol(arity));
                out
            }
        }
    }
}

/// A conjunction of atoms over a common arity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conj {
    pub atoms: Vec<Atom>,
}

/// A finite union of conjunctions: the implicit form of every relation this
/// crate builds (polyhedra, equalities, activation graphs, guards).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub arity: usize,
    pub disjuncts: Vec<Conj>,
}

/// Runtime state of a relation machine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelState {
    Start,
    In {
        disjunct: u16,
        phase: Phase,
        atoms: Vec<AtomState>,
    },
}

impl Relation {
    pub fn conjunction(arity: usize, atoms: Vec<Atom>) -> Relation {
        Relation {
            arity,
            disjuncts: vec![Conj { atoms }],
        }
    }

    pub fn union_of(arity: usize, disjuncts: Vec<Conj>) -> Relation {
        Relation { arity, disjuncts }
    }

    pub fn check_arity(&self) {
        for conj in &self.disjuncts {
            for atom in &conj.atoms {
                assert_eq!(atom.arity(), self.arity, "atom arity mismatch");
            }
        }
    }

    /// Nondeterministic step; the only branching picks the disjunct on the
    /// first symbol.
    pub fn step(&self, state: &RelState, symbol: Symbol) -> Vec<RelState> {
        match state {
            RelState::Start => {
                let Some(phase) = Phase::Sign.step(symbol.track(0)) else {
                    return Vec::new();
                };
                // All tracks must be signs.
                if (0..self.arity).any(|t| !symbol.track(t).is_sign()) {
                    return Vec::new();
                }
                let mut out = Vec::new();
                'next: for (d, conj) in self.disjuncts.iter().enumerate() {
                    let mut atoms = Vec::with_capacity(conj.atoms.len());
                    for atom in &conj.atoms {
                        match atom.step(AtomState::Start, symbol) {
                            Some(next) => atoms.push(next),
                            None => continue 'next,
                        }
                    }
                    out.push(RelState::In {
                        disjunct: d as u16,
                        phase,
                        atoms,
                    });
                }
                out
            }
            RelState::In {
                disjunct,
                phase,
                atoms,
            } => {
                let Some(next_phase) = phase.step(symbol.track(0)) else {
                    return Vec::new();
                };
                // Alignment: all tracks share the glyph class.
                let class = |g: Glyph| match g {
                    Glyph::Plus | Glyph::Minus => 0u8,
                    Glyph::Zero | Glyph::One => 1,
                    Glyph::Point => 2,
                };
                let c0 = class(symbol.track(0));
                if (1..self.arity).any(|t| class(symbol.track(t)) != c0) {
                    return Vec::new();
                }
                let conj = &self.disjuncts[*disjunct as usize];
                let mut next_atoms = Vec::with_capacity(atoms.len());
                for (atom, state) in conj.atoms.iter().zip(atoms) {
                    match atom.step(*state, symbol) {
                        Some(next) => next_atoms.push(next),
                        None => return Vec::new(),
                    }
                }
                vec![RelState::In {
                    disjunct: *disjunct,
                    phase: next_phase,
                    atoms: next_atoms,
                }]
            }
        }
    }

    /// Acceptance: past the point with every atom accepting. Forward-closed
    /// because each atom's acceptance is.
    pub fn accepting(&self, state: &RelState) -> bool {
        match state {
            RelState::Start => false,
            RelState::In {
                disjunct,
                phase,
                atoms,
            } => {
                *phase == Phase::Frac
                    && self.disjuncts[*disjunct as usize]
                        .atoms
                        .iter()
                        .zip(atoms)
                        .all(|(atom, s)| atom.accepting(*s))
            }
        }
    }

    pub fn start_phase(state: &RelState) -> Phase {
        match state {
            RelState::Start => Phase::Sign,
            RelState::In { phase, .. } => *phase,
        }
    }

    /// Materialize into an explicit automaton by breadth-first exploration.
    /// Dead states are never created; the result is trim up to states that
    /// cannot continue to acceptance (pruned separately).
    pub fn materialize(&self) -> Nba {
        self.check_arity();
        let mut builder: NbaBuilder<RelState> = NbaBuilder::new(self.arity);
        let (init, _) = builder.intern(RelState::Start);
        let mut queue = VecDeque::from([init]);
        while let Some(id) = queue.pop_front() {
            let state = builder.key(id).clone();
            builder.set_accepting(id, self.accepting(&state));
            for symbol in Relation::start_phase(&state).symbols(self.arity) {
                for next in self.step(&state, symbol) {
                    let (next_id, is_new) = builder.intern(next);
                    builder.add_edge(id, symbol, next_id);
                    if is_new {
                        queue.push_back(next_id);
                    }
                }
            }
        }
        super::ops::reduce(&builder.finish(init))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q_int, q_ratio};
    use crate::words::{encode, LassoWord};

    /// Reference acceptance of a lasso by an implicit relation: simulate the
    /// set of reachable states through prefix plus enough cycle pumps for
    /// the state set to close, then look for a live loop that stays
    /// accepting. Small and only used to sanity-check the machines here;
    /// the real membership test lives in `analysis`.
    fn relation_accepts(rel: &Relation, word: &LassoWord) -> bool {
        let nba = rel.materialize();
        super::super::analysis::member(&nba, word).unwrap()
    }

    fn atom(coeffs: &[i64], op: RelOp, b: i64) -> Atom {
        let qs: Vec<Q> = coeffs.iter().map(|&c| q_int(c)).collect();
        Atom::new(&qs, op, &q_int(b))
    }

    #[test]
    fn tail_bounds_follow_the_sign_mask() {
        let a = atom(&[1, -2], RelOp::Le, 3);
        assert_eq!(a.tail_bounds(0), (-2, 1));
        // Flipping track 0 negates its contribution; flipping track 1 makes
        // the -2 coefficient effectively +2.
        assert_eq!(a.tail_bounds(0b01), (-3, 0));
        assert_eq!(a.tail_bounds(0b10), (0, 3));
        assert_eq!(a.tail_bounds(0b11), (-1, 2));
    }

    #[test]
    fn denominators_are_cleared() {
        let a = Atom::new(&[q_ratio(1, 2), q_ratio(-1, 3)], RelOp::Lt, &q_ratio(5, 6));
        assert_eq!(a.coeffs, vec![3, -2]);
        assert_eq!(a.b, 5);
    }

    fn accepts_value(coeffs: &[i64], op: RelOp, b: i64, values: &[Q]) -> bool {
        let qs: Vec<Q> = coeffs.iter().map(|&c| q_int(c)).collect();
        let rel = Relation::conjunction(
            values.len(),
            vec![Atom::new(&qs, op, &q_int(b))],
        );
        relation_accepts(&rel, &crate::words::encode_vec(values))
    }

    #[test]
    fn single_constraint_on_integers() {
        assert!(accepts_value(&[1], RelOp::Le, 0, &[q_int(-3)]));
        assert!(!accepts_value(&[1], RelOp::Le, 0, &[q_ratio(1, 2)]));
        assert!(accepts_value(&[1], RelOp::Le, 0, &[q_int(0)]));
        assert!(!accepts_value(&[1], RelOp::Lt, 0, &[q_int(0)]));
        assert!(accepts_value(&[1], RelOp::Eq, 5, &[q_int(5)]));
        assert!(!accepts_value(&[1], RelOp::Eq, 5, &[q_int(4)]));
    }

    #[test]
    fn equality_across_tracks() {
        for (x, y, want) in [
            (q_int(3), q_int(3), true),
            (q_int(3), q_int(-3), false),
            (q_ratio(-7, 6), q_ratio(-7, 6), true),
            (q_ratio(1, 3), q_ratio(1, 2), false),
        ] {
            assert_eq!(
                accepts_value(&[1, -1], RelOp::Eq, 0, &[x.clone(), y.clone()]),
                want,
                "{x} = {y}"
            );
        }
    }

    #[test]
    fn dual_expansions_are_both_accepted() {
        // x = 1 via +1.(0)^w and via +0.(1)^w.
        let rel = Relation::conjunction(1, vec![atom(&[1], RelOp::Eq, 1)]);
        let canonical = encode(&q_int(1));
        let dual = crate::words::dual_encoding(&q_int(1)).unwrap();
        assert!(relation_accepts(&rel, &canonical));
        assert!(relation_accepts(&rel, &dual));
        // And x <= 0 rejects both encodings of 1.
        let le = Relation::conjunction(1, vec![atom(&[1], RelOp::Le, 0)]);
        assert!(!relation_accepts(&le, &canonical));
        assert!(!relation_accepts(&le, &dual));
    }

    #[test]
    fn zero_coefficient_tracks_are_unconstrained() {
        assert!(accepts_value(
            &[1, 0],
            RelOp::Le,
            0,
            &[q_int(-1), q_int(17)]
        ));
        assert!(!accepts_value(
            &[1, 0],
            RelOp::Le,
            0,
            &[q_int(1), q_int(-17)]
        ));
    }

    #[test]
    fn constant_truth_atoms() {
        // 0 <= 1 is everything; 0 <= -1 is nothing; 0 = 0 is everything.
        assert!(accepts_value(&[0], RelOp::Le, 1, &[q_int(9)]));
        assert!(!accepts_value(&[0], RelOp::Le, -1, &[q_int(9)]));
        assert!(accepts_value(&[0], RelOp::Eq, 0, &[q_ratio(-4, 7)]));
        assert!(!accepts_value(&[0], RelOp::Lt, 0, &[q_int(0)]));
    }

    #[test]
    fn acceptance_is_forward_closed() {
        // Structural check of the closure property products rely on: step
        // every reachable accepting state of a nontrivial relation and
        // demand the successors stay accepting.
        let rel = Relation::union_of(
            2,
            vec![
                Conj {
                    atoms: vec![atom(&[1, -1], RelOp::Eq, 0), atom(&[-1, 0], RelOp::Le, 0)],
                },
                Conj {
                    atoms: vec![atom(&[1, 0], RelOp::Lt, 2)],
                },
            ],
        );
        let mut frontier = vec![RelState::Start];
        let mut seen = std::collections::BTreeSet::new();
        while let Some(state) = frontier.pop() {
            if !seen.insert(state.clone()) {
                continue;
            }
            for symbol in Relation::start_phase(&state).symbols(2) {
                for next in rel.step(&state, symbol) {
                    if rel.accepting(&state) {
                        assert!(rel.accepting(&next), "acceptance lost on a live step");
                    }
                    frontier.push(next);
                }
            }
            if seen.len() > 20_000 {
                panic!("state space unexpectedly large");
            }
        }
    }

    #[test]
    fn live_forever_means_equality() {
        // 1/3 has no terminating expansion; the equality atom must accept
        // its unique encoding and reject close neighbours.
        assert!(accepts_value(&[3], RelOp::Eq, 1, &[q_ratio(1, 3)]));
        assert!(!accepts_value(&[3], RelOp::Eq, 1, &[q_ratio(1, 3) + q_ratio(1, 64)]));
        assert!(accepts_value(&[3], RelOp::Le, 1, &[q_ratio(1, 3)]));
        assert!(!accepts_value(&[3], RelOp::Lt, 1, &[q_ratio(1, 3)]));
        assert!(accepts_value(&[3], RelOp::Lt, 1, &[q_ratio(1, 3) - q_ratio(1, 64)]));
    }
}
