//! Exact-rational neural-network control loops, end to end:
//!
//! - two-counter machines with an exact interpreter ([`counter_machine`]),
//! - ReLU/identity networks over arbitrary-precision rationals ([`dnn`]),
//! - a compiler turning a counter machine into a network that performs one
//!   configuration update per control-loop iteration ([`compiler`]),
//! - rational polyhedra with Fourier-Motzkin emptiness ([`geometry`]),
//! - plants, including guarded multi-mode linear maps ([`plant`]),
//! - Buchi automata over binary encodings of real vectors ([`nba`]) together
//!   with the word/lasso machinery ([`words`]),
//! - a reachability semi-decision loop with mandatory witness replay
//!   ([`semidecider`]),
//! - the JSON bundle format shared with the command-line front end
//!   ([`bundle`]).
//!
//! Everything is exact: there is no floating point anywhere in this crate.

pub mod bundle;
pub mod compiler;
pub mod counter_machine;
pub mod dnn;
pub mod geometry;
pub mod nba;
pub mod plant;
pub mod rational;
pub mod semidecider;
pub mod words;

pub use rational::Q;
