//! Relation-automaton constructors.
//!
//! Everything bottoms out in [`Relation`] machines (unions of conjunctions
//! of integer linear atoms), which enforce well-formedness themselves, so no
//! separate wff product is needed. Network graphs are folded layer by layer
//! through the composition join; the per-layer relation (one disjunct per
//! choice of active/inactive ReLU branches) is never materialized on its
//! own, which keeps wide layers affordable.

use super::atoms::{Atom, Conj, Relation};
use super::{Nba, NbaBuilder, NbaError};
use crate::dnn::{Activation, Dnn};
use crate::geometry::{LinearConstraint, Polyhedron, PolyUnion, Rel};
use crate::plant::{MultiModeLinearMap, Plant};
use crate::rational::Q;
use crate::words::{bit_symbols, point_symbol, sign_symbols};
use num_bigint::BigInt;
use num_traits::{One, Zero};

pub use super::atoms::RelOp;

impl From<Rel> for RelOp {
    fn from(rel: Rel) -> RelOp {
        match rel {
            Rel::Le => RelOp::Le,
            Rel::Lt => RelOp::Lt,
        }
    }
}

/// The well-formed-words automaton: aligned signs, at least one aligned
/// binary digit, one aligned point, aligned binary digits forever.
pub fn build_wff(arity: usize) -> Nba {
    #[derive(Clone, Copy, PartialEq, Eq, Hash)]
    enum S {
        Start,
        FirstDigit,
        Digits,
        Frac,
    }
    let mut builder: NbaBuilder<S> = NbaBuilder::new(arity);
    let (start, _) = builder.intern(S::Start);
    let (first, _) = builder.intern(S::FirstDigit);
    let (digits, _) = builder.intern(S::Digits);
    let (frac, _) = builder.intern(S::Frac);
    for sym in sign_symbols(arity) {
        builder.add_edge(start, sym, first);
    }
    for sym in bit_symbols(arity) {
        builder.add_edge(first, sym, digits);
        builder.add_edge(digits, sym, digits);
        builder.add_edge(frac, sym, frac);
    }
    builder.add_edge(digits, point_symbol(arity), frac);
    builder.set_accepting(frac, true);
    builder.finish(start)
}

/// The automaton accepting exactly the well-formed words whose decoded
/// vector satisfies `<coeffs, x> op b`, over every encoding.
pub fn build_linear_relation(
    coeffs: &[Q],
    op: RelOp,
    b: &Q,
    arity: usize,
) -> Result<Nba, NbaError> {
    if coeffs.len() != arity {
        return Err(NbaError::ArityMismatch {
            left: coeffs.len(),
            right: arity,
        });
    }
    Ok(Relation::conjunction(arity, vec![Atom::new(coeffs, op, b)]).materialize())
}

/// A linear constraint placed on selected tracks of a wider relation.
fn placed_atom(placement: &[(usize, Q)], op: RelOp, b: &Q, arity: usize) -> Atom {
    let mut coeffs = vec![Q::zero(); arity];
    for (track, w) in placement {
        coeffs[*track] = w.clone();
    }
    Atom::new(&coeffs, op, b)
}

fn constraint_atom(c: &LinearConstraint, tracks: &[usize], arity: usize) -> Atom {
    let placement: Vec<(usize, Q)> = tracks
        .iter()
        .zip(&c.a)
        .map(|(&t, w)| (t, w.clone()))
        .collect();
    placed_atom(&placement, c.rel.into(), &c.b, arity)
}

/// The relation form of a finite union of polyhedra, with constraint
/// coordinate `i` living on `tracks[i]`.
fn poly_union_relation(set: &PolyUnion, tracks: &[usize], arity: usize) -> Relation {
    let disjuncts = set
        .polys
        .iter()
        .map(|poly| Conj {
            atoms: poly
                .constraints
                .iter()
                .map(|c| constraint_atom(c, tracks, arity))
                .collect(),
        })
        .collect();
    Relation::union_of(arity, disjuncts)
}

/// Membership automaton of a finite union of polyhedra.
pub fn poly_to_nba(set: &PolyUnion, arity: usize) -> Result<Nba, NbaError> {
    if set.dim != arity {
        return Err(NbaError::ArityMismatch {
            left: set.dim,
            right: arity,
        });
    }
    let tracks: Vec<usize> = (0..arity).collect();
    Ok(poly_union_relation(set, &tracks, arity).materialize())
}

/// The graph of `y = max(x, 0)` over two tracks.
pub fn relu_relation() -> Nba {
    relu_branch_relation(2, &[(0, Q::one())], &Q::zero(), 1).materialize()
}


/// Branches of `y = max(pre, 0)` where `pre = <placement, x> + bias` and
/// `y` lives on track `y_track`: active (`pre >= 0`, `y = pre`) or
/// inactive (`pre <= 0`, `y = 0`).
fn relu_branch_relation(
    arity: usize,
    placement: &[(usize, Q)],
    bias: &Q,
    y_track: usize,
) -> Relation {
    let neg_placement: Vec<(usize, Q)> = placement.iter().map(|(t, w)| (*t, -w)).collect();
    // pre >= 0 <=> -<w, x> <= bias
    let active_guard = placed_atom(&neg_placement, RelOp::Le, bias, arity);
    // y = pre <=> <w, x> - y = -bias
    let mut eq_placement = placement.to_vec();
    eq_placement.push((y_track, -Q::one()));
    let active_value = placed_atom(&eq_placement, RelOp::Eq, &-bias.clone(), arity);
    // pre <= 0 <=> <w, x> <= -bias
    let inactive_guard = placed_atom(placement, RelOp::Le, &-bias.clone(), arity);
    let inactive_value = placed_atom(&[(y_track, Q::one())], RelOp::Eq, &Q::zero(), arity);
    Relation::union_of(
        arity,
        vec![
            Conj {
                atoms: vec![active_guard, active_value],
            },
            Conj {
                atoms: vec![inactive_guard, inactive_value],
            },
        ],
    )
}

/// One affine piece of a network: on `region` (in input space) the network
/// computes `x -> weights * x + biases`.
struct AffinePiece {
    region: Vec<LinearConstraint>,
    weights: Vec<Vec<Q>>,
    biases: Vec<Q>,
}

/// Directional constraint store: constraints normalized to integer
/// direction vectors with unit content, keeping only the tightest bound per
/// direction. Keeps Fourier-Motzkin inputs small during enumeration.
#[derive(Clone, Default)]
struct RegionStore {
    by_direction: std::collections::BTreeMap<Vec<BigInt>, Q>,
    infeasible_constant: bool,
}

impl RegionStore {
    /// Add `<a, x> <= b`; returns false if the constraint is a constant
    /// contradiction.
    fn add(&mut self, a: &[Q], b: &Q) {
        let mut lcm = BigInt::from(1);
        for c in a {
            lcm = num_integer::lcm(lcm, c.denom().clone());
        }
        let ints: Vec<BigInt> = a.iter().map(|c| c.numer() * (&lcm / c.denom())).collect();
        let gcd = ints
            .iter()
            .fold(BigInt::from(0), |acc, v| num_integer::gcd(acc, v.clone()));
        if gcd.is_zero() {
            // 0 <= b: either trivial or impossible.
            if b < &Q::zero() {
                self.infeasible_constant = true;
            }
            return;
        }
        let key: Vec<BigInt> = ints.iter().map(|v| v / &gcd).collect();
        let scaled_b = b * Q::new(lcm, gcd);
        match self.by_direction.get_mut(&key) {
            Some(existing) => {
                if scaled_b < *existing {
                    *existing = scaled_b;
                }
            }
            None => {
                self.by_direction.insert(key, scaled_b);
            }
        }
    }

    fn constraints(&self, dim: usize) -> Vec<LinearConstraint> {
        self.by_direction
            .iter()
            .map(|(key, b)| {
                let a: Vec<Q> = key.iter().map(|v| Q::from_integer(v.clone())).collect();
                debug_assert_eq!(a.len(), dim);
                LinearConstraint::le(a, b.clone())
            })
            .collect()
    }
}

/// Enumerate the feasible activation patterns of a network as affine
/// pieces, depth first with exact emptiness pruning. Piece regions overlap
/// only on activation boundaries, where adjacent pieces agree, so their
/// union is exactly the network's graph.
fn enumerate_pieces(net: &Dnn) -> Vec<AffinePiece> {
    let dim = net.input_dim();

    struct Frame {
        layer: usize,
        neuron: usize,
        region: RegionStore,
        witness: Vec<Q>,
        /// Input-space affine form of the previous layer's outputs.
        rows: Vec<(Vec<Q>, Q)>,
        /// Finished rows of the current layer.
        done: Vec<(Vec<Q>, Q)>,
    }

    // The network input is the identity map.
    let identity_rows: Vec<(Vec<Q>, Q)> = (0..dim)
        .map(|i| {
            let mut row = vec![Q::zero(); dim];
            row[i] = Q::one();
            (row, Q::zero())
        })
        .collect();
    let mut stack = vec![Frame {
        layer: 0,
        neuron: 0,
        region: RegionStore::default(),
        witness: vec![Q::zero(); dim],
        rows: identity_rows,
        done: Vec::new(),
    }];
    let mut pieces = Vec::new();

    while let Some(mut frame) = stack.pop() {
        if frame.layer == net.layers().len() {
            pieces.push(AffinePiece {
                region: frame.region.constraints(dim),
                weights: frame.rows.iter().map(|(row, _)| row.clone()).collect(),
                biases: frame.rows.iter().map(|(_, b)| b.clone()).collect(),
            });
            continue;
        }
        let layer = &net.layers()[frame.layer];
        if frame.neuron == layer.output_dim() {
            frame.rows = std::mem::take(&mut frame.done);
            frame.layer += 1;
            frame.neuron = 0;
            stack.push(frame);
            continue;
        }
        // Pre-activation of the current neuron as an affine form of x.
        let j = frame.neuron;
        let mut pre_row = vec![Q::zero(); dim];
        let mut pre_bias = layer.biases[j].clone();
        for (w, (row, b)) in layer.weights[j].iter().zip(&frame.rows) {
            if w.is_zero() {
                continue;
            }
            for (slot, v) in pre_row.iter_mut().zip(row) {
                *slot += w * v;
            }
            pre_bias += w * b;
        }
        match layer.activations[j] {
            Activation::Identity => {
                frame.done.push((pre_row, pre_bias));
                frame.neuron += 1;
                stack.push(frame);
            }
            Activation::ReLU => {
                // Split only where the pre-activation genuinely changes
                // sign on the region; a neuron that is nonnegative (or
                // nonpositive) throughout contributes a single branch with
                // no new constraint. This also collapses the chains of
                // identically-zero neurons that gadget networks are full
                // of, which would otherwise double the pattern count
                // without splitting anything.
                let pre_at = |point: &[Q]| -> Q {
                    let mut value = pre_bias.clone();
                    for (w, v) in pre_row.iter().zip(point) {
                        if !w.is_zero() {
                            value += w * v;
                        }
                    }
                    value
                };
                let strict_side = |flip: bool| -> Option<Vec<Q>> {
                    // Nonempty interior of {pre > 0} (flip: {pre < 0}).
                    let (a, b) = if flip {
                        (pre_row.clone(), -pre_bias.clone())
                    } else {
                        (pre_row.iter().map(|v| -v).collect(), pre_bias.clone())
                    };
                    let mut constraints = frame.region.constraints(dim);
                    constraints.push(LinearConstraint::lt(a, b));
                    Polyhedron::new(dim, constraints).witness()
                };
                let witness_sign = pre_at(&frame.witness);
                let positive = if witness_sign > Q::zero() {
                    Some(frame.witness.clone())
                } else {
                    strict_side(false)
                };
                let negative = if witness_sign < Q::zero() {
                    Some(frame.witness.clone())
                } else {
                    strict_side(true)
                };
                match (positive, negative) {
                    (Some(pos_witness), Some(neg_witness)) => {
                        // Inactive side: pre <= 0, output row 0.
                        let mut inactive_region = frame.region.clone();
                        inactive_region.add(&pre_row, &-pre_bias.clone());
                        let mut done = frame.done.clone();
                        done.push((vec![Q::zero(); dim], Q::zero()));
                        stack.push(Frame {
                            layer: frame.layer,
                            neuron: frame.neuron + 1,
                            region: inactive_region,
                            witness: neg_witness,
                            rows: frame.rows.clone(),
                            done,
                        });
                        // Active side: pre >= 0, output is the
                        // pre-activation.
                        let neg_row: Vec<Q> = pre_row.iter().map(|v| -v).collect();
                        let mut active_region = frame.region;
                        active_region.add(&neg_row, &pre_bias);
                        frame.done.push((pre_row, pre_bias));
                        stack.push(Frame {
                            layer: frame.layer,
                            neuron: frame.neuron + 1,
                            region: active_region,
                            witness: pos_witness,
                            rows: frame.rows,
                            done: frame.done,
                        });
                    }
                    (Some(_), None) => {
                        // Nonnegative throughout: the ReLU is transparent.
                        frame.done.push((pre_row, pre_bias));
                        frame.neuron += 1;
                        stack.push(frame);
                    }
                    (None, _) => {
                        // Nonpositive (or identically zero): output 0.
                        frame.done.push((vec![Q::zero(); dim], Q::zero()));
                        frame.neuron += 1;
                        stack.push(frame);
                    }
                }
            }
        }
    }
    pieces
}

/// The graph automaton of a network: accepts the well-formed words whose
/// first `input_dim` tracks decode to `x` and remaining tracks to `N(x)`.
///
/// Built from the network's piecewise-affine decomposition: one disjunct
/// per feasible activation pattern, combining the pattern's input region
/// with the affine output equalities. (The image of a polyhedron under a
/// ReLU network is a finite union of polyhedra; this is that fact turned
/// into an automaton.)
pub fn dnn_to_nba(net: &Dnn) -> Nba {
    let d = net.input_dim();
    let c = net.output_dim();
    let arity = d + c;
    let pieces = enumerate_pieces(net);
    log::debug!("network graph: {} affine pieces", pieces.len());
    let disjuncts = pieces
        .iter()
        .map(|piece| {
            let mut atoms: Vec<Atom> = piece
                .region
                .iter()
                .map(|constraint| {
                    let mut coeffs = constraint.a.clone();
                    coeffs.resize(arity, Q::zero());
                    Atom::new(&coeffs, constraint.rel.into(), &constraint.b)
                })
                .collect();
            for (j, (row, bias)) in piece.weights.iter().zip(&piece.biases).enumerate() {
                let mut placement: Vec<(usize, Q)> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| !w.is_zero())
                    .map(|(i, w)| (i, w.clone()))
                    .collect();
                placement.push((d + j, -Q::one()));
                atoms.push(placed_atom(&placement, RelOp::Eq, &-bias.clone(), arity));
            }
            Conj { atoms }
        })
        .collect();
    let graph = Relation::union_of(arity, disjuncts).materialize();
    log::debug!(
        "network graph: {} states, {} transitions",
        graph.num_states(),
        graph.num_transitions()
    );
    graph
}

/// The graph of the `d`-ary identity function over `Sigma^(2d)`.
pub fn identity_relation(d: usize) -> Nba {
    let arity = 2 * d;
    let atoms = (0..d)
        .map(|i| {
            placed_atom(
                &[(i, Q::one()), (d + i, -Q::one())],
                RelOp::Eq,
                &Q::zero(),
                arity,
            )
        })
        .collect();
    Relation::conjunction(arity, atoms).materialize()
}

/// The graph automaton of a plant over `Sigma^(d+c+d)`.
pub fn plant_to_nba(plant: &Plant) -> Nba {
    match plant {
        Plant::Trivial { d, c } => {
            assert_eq!(d, c, "a trivial plant feeds its control back as state");
            let arity = d + c + d;
            let atoms = (0..*d)
                .map(|i| {
                    placed_atom(
                        &[(d + i, Q::one()), (d + c + i, -Q::one())],
                        RelOp::Eq,
                        &Q::zero(),
                        arity,
                    )
                })
                .collect();
            Relation::conjunction(arity, atoms).materialize()
        }
        Plant::MultiMode { map } => multimode_relation(map).materialize(),
    }
}

/// Multi-mode plants: a disjunct per (edge, guard polyhedron) combining the
/// source-mode test, the affine flow equalities, guard membership of
/// `(x', u)`, and the successor-mode value.
fn multimode_relation(map: &MultiModeLinearMap) -> Relation {
    let s = map.state_dim(); // mode + coordinates
    let arity = s + map.c + s;
    let mode_track = 0;
    let x_track = |j: usize| 1 + j;
    let u_track = |i: usize| s + i;
    let out_mode_track = s + map.c;
    let x_out_track = |j: usize| s + map.c + 1 + j;

    let mode_value = |m: u64| Q::from_integer(BigInt::from(m));
    let mut disjuncts = Vec::new();
    for edge in &map.edges {
        let flow = map
            .flow_of(edge.from)
            .expect("validated map has a flow per mode");
        let mut base_atoms = Vec::new();
        base_atoms.push(placed_atom(
            &[(mode_track, Q::one())],
            RelOp::Eq,
            &mode_value(edge.from),
            arity,
        ));
        base_atoms.push(placed_atom(
            &[(out_mode_track, Q::one())],
            RelOp::Eq,
            &mode_value(edge.to),
            arity,
        ));
        // x'_j = sum A[j][l] x_l + sum B[j][i] u_i + c_j
        for j in 0..map.d {
            let mut placement: Vec<(usize, Q)> = Vec::new();
            for (l, w) in flow.a[j].iter().enumerate() {
                if !w.is_zero() {
                    placement.push((x_track(l), w.clone()));
                }
            }
            for (i, w) in flow.b[j].iter().enumerate() {
                if !w.is_zero() {
                    placement.push((u_track(i), w.clone()));
                }
            }
            placement.push((x_out_track(j), -Q::one()));
            base_atoms.push(placed_atom(
                &placement,
                RelOp::Eq,
                &-flow.c[j].clone(),
                arity,
            ));
        }
        // Guard membership of (x'_1..x'_d, u_1..u_c), one disjunct per
        // guard polyhedron.
        let guard_tracks: Vec<usize> = (0..map.d)
            .map(x_out_track)
            .chain((0..map.c).map(u_track))
            .collect();
        for poly in &edge.guard.polys {
            let mut atoms = base_atoms.clone();
            atoms.extend(
                poly.constraints
                    .iter()
                    .map(|c| constraint_atom(c, &guard_tracks, arity)),
            );
            disjuncts.push(Conj { atoms });
        }
    }
    Relation::union_of(arity, disjuncts)
}
