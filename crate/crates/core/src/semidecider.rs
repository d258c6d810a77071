//! The reachability semi-decision loop.
//!
//! Given a controller network, a plant whose graph is automaton-definable,
//! and initial/target sets, the loop builds the one-step relation automaton
//! `step = compose(duplicate(A_N, d), d+c, A_P)`, then for k = 0, 1, ...
//! checks emptiness of `(widened-init  intersect  I_k)  intersect
//! widened-target`, where `I_0` is the identity relation and each round
//! composes one more `step` on the right. The init constraint is folded
//! into the iterated relation from round zero, which keeps the automata
//! small without changing any emptiness answer.
//!
//! Every witness is **replayed**: the decoded start vector is checked
//! against the initial set, the trajectory is re-simulated with exact
//! rationals, and the endpoint is checked against the target. A witness
//! that fails replay is a bug in the automata layer and surfaces as a loud
//! error, never as a wrong answer.

use crate::dnn::Dnn;
use crate::geometry::{GeometryError, PolyUnion};
use crate::nba::{
    self, accepting_lasso, compose, cylindrify, duplicate_tracks, dnn_to_nba, intersection,
    plant_to_nba, poly_to_nba, reduce, Nba, NbaError,
};
use crate::plant::{nncs_trajectory, Nncs, Plant, PlantError};
use crate::rational::{format_q_vec, Q};
use crate::words::{decode_tracks, LassoWord};
use serde::Serialize;
use thiserror::Error;

/// Initial or target set: a finite union of polyhedra or a raw automaton
/// over `Sigma^d` (anything automaton-definable is allowed).
#[derive(Debug, Clone)]
pub enum ReachSet {
    Fup(PolyUnion),
    Auto(Nba),
}

impl ReachSet {
    pub fn dim(&self) -> usize {
        match self {
            ReachSet::Fup(u) => u.dim,
            ReachSet::Auto(a) => a.arity(),
        }
    }

    /// Membership of an exact point. Polyhedral sets use the geometry
    /// oracle; raw automata fall back to word membership.
    pub fn contains(&self, x: &[Q]) -> Result<bool, ReachError> {
        match self {
            ReachSet::Fup(u) => Ok(u.contains(x)?),
            ReachSet::Auto(a) => Ok(nba::member(a, &crate::words::encode_vec(x))?),
        }
    }

    fn to_nba(&self) -> Result<Nba, ReachError> {
        match self {
            ReachSet::Fup(u) => Ok(poly_to_nba(u, u.dim)?),
            ReachSet::Auto(a) => Ok(a.clone()),
        }
    }
}

/// A reachability instance: the closed loop plus initial and target sets.
#[derive(Debug, Clone)]
pub struct ReachInstance {
    pub controller: Dnn,
    pub plant: Plant,
    pub init: ReachSet,
    pub target: ReachSet,
}

impl ReachInstance {
    pub fn new(
        controller: Dnn,
        plant: Plant,
        init: ReachSet,
        target: ReachSet,
    ) -> Result<ReachInstance, ReachError> {
        let d = plant.state_dim();
        if controller.input_dim() != d || init.dim() != d || target.dim() != d {
            return Err(ReachError::Dimensions {
                state: d,
                controller_in: controller.input_dim(),
                init: init.dim(),
                target: target.dim(),
            });
        }
        if controller.output_dim() != plant.control_dim() {
            return Err(ReachError::ControlDims {
                controller_out: controller.output_dim(),
                plant_in: plant.control_dim(),
            });
        }
        Ok(ReachInstance {
            controller,
            plant,
            init,
            target,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.plant.state_dim()
    }

    pub fn nncs(&self) -> Nncs {
        Nncs::new(self.plant.clone(), self.controller.clone()).expect("dims checked at build")
    }
}

/// Outcome of the bounded semi-decision run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ReachResult {
    Reached {
        k: usize,
        #[serde(with = "crate::rational::qvec")]
        x0: Vec<Q>,
        #[serde(with = "crate::rational::qvec")]
        xk: Vec<Q>,
        witness: LassoWord,
    },
    Unknown {
        bound: usize,
    },
}

#[derive(Debug, Error)]
pub enum ReachError {
    #[error(
        "inconsistent dimensions: state {state}, controller input {controller_in}, \
         init {init}, target {target}"
    )]
    Dimensions {
        state: usize,
        controller_in: usize,
        init: usize,
        target: usize,
    },
    #[error("controller outputs {controller_out} values, plant consumes {plant_in}")]
    ControlDims {
        controller_out: usize,
        plant_in: usize,
    },
    #[error(
        "instance too wide for the automaton encoding: needs {needed} tracks, \
         the symbol representation supports {max}"
    )]
    TooWide { needed: usize, max: usize },
    #[error("witness replay failed at k = {k}: {reason} (witness {witness})")]
    WitnessReplay {
        k: usize,
        reason: String,
        witness: String,
    },
    #[error(transparent)]
    Nba(#[from] NbaError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// The graph of the d-ary identity function over `Sigma^(2d)`.
pub fn build_identity_relation(d: usize) -> Nba {
    nba::identity_relation(d)
}

/// The one-step relation `(x, x')` with `x' = P(x, N(x))`, built as the
/// composition of the input-copying network graph with the plant graph.
/// For the trivial plant the composition is a track renaming (`x' = u`),
/// so the network graph is returned directly; the language is the same and
/// the automaton is considerably smaller.
pub fn build_step_relation(inst: &ReachInstance) -> Result<Nba, ReachError> {
    let d = inst.state_dim();
    let c = inst.plant.control_dim();
    if matches!(inst.plant, Plant::Trivial { .. }) {
        debug_assert_eq!(d, c);
        return Ok(dnn_to_nba(&inst.controller)); // (x, u) with x' = u
    }
    let net_graph = dnn_to_nba(&inst.controller); // (x, u) over d + c
    let copying = duplicate_tracks(&net_graph, d)?; // (x, x, u)
    let plant_graph = plant_to_nba(&inst.plant); // (x, u, x')
    Ok(compose(&copying, d + c, &plant_graph)?) // (x, x')
}

/// `I_k`: the graph of the k-fold loop iteration, built by composing the
/// step relation k times onto the identity.
pub fn iterate_relation(step: &Nba, d: usize, k: usize) -> Result<Nba, ReachError> {
    let mut relation = build_identity_relation(d);
    for _ in 0..k {
        relation = reduce(&compose(&relation, d, step)?);
    }
    Ok(relation)
}

/// Widen a set automaton over `Sigma^d` to `Sigma^(2d)` constraining the
/// FIRST d tracks; the last d range over arbitrary well-formed values.
pub fn widen_init(set: &Nba, d: usize) -> Result<Nba, ReachError> {
    let positions: Vec<usize> = (d..2 * d).collect();
    let wide = cylindrify(set, &positions)?;
    Ok(intersection(&wide, &nba::build_wff(2 * d))?)
}

/// Widen a set automaton over `Sigma^d` to `Sigma^(2d)` constraining the
/// LAST d tracks.
pub fn widen_target(set: &Nba, d: usize) -> Result<Nba, ReachError> {
    let positions: Vec<usize> = (0..d).collect();
    let wide = cylindrify(set, &positions)?;
    Ok(intersection(&wide, &nba::build_wff(2 * d))?)
}

/// Per-round statistics, logged and returned for regression tracking.
#[derive(Debug, Clone, Serialize)]
pub struct RoundStats {
    pub k: usize,
    pub relation_states: u32,
    pub checked_states: u32,
}

/// Run the semi-decision loop up to `max_k` composition rounds.
pub fn semi_decide(inst: &ReachInstance, max_k: usize) -> Result<ReachResult, ReachError> {
    Ok(semi_decide_with_stats(inst, max_k)?.0)
}

/// As [`semi_decide`], also returning per-round automaton sizes.
pub fn semi_decide_with_stats(
    inst: &ReachInstance,
    max_k: usize,
) -> Result<(ReachResult, Vec<RoundStats>), ReachError> {
    let d = inst.state_dim();
    let c = inst.plant.control_dim();
    let needed = (2 * d).max(2 * d + c);
    if needed > crate::words::MAX_ARITY {
        return Err(ReachError::TooWide {
            needed,
            max: crate::words::MAX_ARITY,
        });
    }
    let step = build_step_relation(inst)?;
    log::info!(
        "step relation: {} states, {} transitions",
        step.num_states(),
        step.num_transitions()
    );
    run_loop(inst, &step, max_k)
}

/// Run the loop with an externally supplied step relation. Exists so tests
/// can inject corrupted automata and watch the replay gate catch them.
#[doc(hidden)]
pub fn semi_decide_with_step(
    inst: &ReachInstance,
    step: &Nba,
    max_k: usize,
) -> Result<ReachResult, ReachError> {
    Ok(run_loop(inst, step, max_k)?.0)
}

fn run_loop(
    inst: &ReachInstance,
    step: &Nba,
    max_k: usize,
) -> Result<(ReachResult, Vec<RoundStats>), ReachError> {
    let d = inst.state_dim();
    let init_nba = inst.init.to_nba()?;
    let target_nba = inst.target.to_nba()?;
    let widened_init = widen_init(&init_nba, d)?;
    let widened_target = widen_target(&target_nba, d)?;

    // (widened-init intersect I_k), grown incrementally: composing the step
    // relation on the right commutes with constraining the first d tracks.
    let mut reach_k = reduce(&intersection(&widened_init, &build_identity_relation(d))?);
    let mut stats = Vec::with_capacity(max_k + 1);
    for k in 0..=max_k {
        let checked = intersection(&reach_k, &widened_target)?;
        stats.push(RoundStats {
            k,
            relation_states: reach_k.num_states(),
            checked_states: checked.num_states(),
        });
        log::info!(
            "k = {k}: relation has {} states, intersection {} states",
            reach_k.num_states(),
            checked.num_states()
        );
        if let Some(witness) = accepting_lasso(&checked) {
            let result = replay_witness(inst, k, witness)?;
            return Ok((result, stats));
        }
        if k < max_k {
            reach_k = reduce(&compose(&reach_k, d, step)?);
        }
    }
    Ok((ReachResult::Unknown { bound: max_k }, stats))
}

/// Decode and independently re-verify a witness lasso. Failures are
/// automata-layer bugs and surface as [`ReachError::WitnessReplay`].
fn replay_witness(
    inst: &ReachInstance,
    k: usize,
    witness: LassoWord,
) -> Result<ReachResult, ReachError> {
    let d = inst.state_dim();
    let fail = |reason: String| ReachError::WitnessReplay {
        k,
        reason,
        witness: witness.render(),
    };
    let decoded = match decode_tracks(&witness) {
        Ok(values) => values,
        Err(e) => return Err(fail(format!("witness does not decode: {e}"))),
    };
    let (x0, xk) = decoded.split_at(d);
    if !inst.init.contains(x0)? {
        return Err(fail(format!(
            "decoded start {} is not in the initial set",
            format_q_vec(x0)
        )));
    }
    let trajectory = nncs_trajectory(&inst.nncs(), x0, k)?;
    let end = trajectory.last().expect("trajectory includes the start");
    if end != &xk.to_vec() {
        return Err(fail(format!(
            "exact simulation reaches {} after {k} steps, witness claims {}",
            format_q_vec(end),
            format_q_vec(xk)
        )));
    }
    if !inst.target.contains(end)? {
        return Err(fail(format!(
            "replayed endpoint {} is not in the target set",
            format_q_vec(end)
        )));
    }
    Ok(ReachResult::Reached {
        k,
        x0: x0.to_vec(),
        xk: xk.to_vec(),
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnn::{Activation, Layer};
    use crate::geometry::{singleton, LinearConstraint, Polyhedron};
    use crate::nba::member;
    use crate::rational::{q_int, Q};
    use crate::words::encode_vec;

    fn qv(vals: &[i64]) -> Vec<Q> {
        vals.iter().map(|&v| q_int(v)).collect()
    }

    /// Controller u = x + 1 over one dimension with the trivial plant.
    fn increment_instance(init: i64, target: i64) -> ReachInstance {
        let controller = Dnn::new(vec![Layer::new(
            vec![vec![q_int(1)]],
            vec![q_int(1)],
            vec![Activation::Identity],
        )])
        .unwrap();
        ReachInstance::new(
            controller,
            Plant::Trivial { d: 1, c: 1 },
            ReachSet::Fup(PolyUnion::from_poly(singleton(&[q_int(init)]))),
            ReachSet::Fup(PolyUnion::from_poly(singleton(&[q_int(target)]))),
        )
        .unwrap()
    }

    #[test]
    fn identity_relation_accepts_pairs() {
        let id = build_identity_relation(1);
        assert!(member(&id, &encode_vec(&qv(&[1, 1]))).unwrap());
        assert!(!member(&id, &encode_vec(&qv(&[1, 2]))).unwrap());
    }

    #[test]
    fn step_relation_of_compiled_machine() {
        // The one-step relation of a compiled machine accepts exactly the
        // interpreter-step pairs; oracle = the interpreter.
        let m = crate::counter_machine::parse_machine("INC 0\nSTOP").unwrap();
        let compiled = crate::compiler::compile_deep(&m).unwrap();
        let bundle = crate::bundle::Bundle::from_compiled(&compiled);
        let inst = bundle.instance().unwrap();
        let step = build_step_relation(&inst).unwrap();
        assert_eq!(step.arity(), 6);
        assert!(member(&step, &encode_vec(&qv(&[0, 0, 0, 1, 0, 1]))).unwrap());
        assert!(!member(&step, &encode_vec(&qv(&[0, 0, 0, 1, 0, 0]))).unwrap());
        assert!(member(&step, &encode_vec(&qv(&[1, 0, 1, 1, 0, 1]))).unwrap());
    }

    #[test]
    fn too_wide_instances_are_rejected() {
        let m = crate::counter_machine::parse_machine("INC 0\nSTOP").unwrap();
        let compiled = crate::compiler::compile_shallow(&m).unwrap();
        let bundle = crate::bundle::Bundle::from_compiled(&compiled);
        let inst = bundle.instance().unwrap();
        assert!(matches!(
            semi_decide(&inst, 1),
            Err(ReachError::TooWide { .. })
        ));
    }

    #[test]
    fn step_relation_of_increment_loop() {
        let inst = increment_instance(0, 3);
        let step = build_step_relation(&inst).unwrap();
        assert_eq!(step.arity(), 2);
        assert!(member(&step, &encode_vec(&qv(&[0, 1]))).unwrap());
        assert!(!member(&step, &encode_vec(&qv(&[0, 2]))).unwrap());
        assert!(member(&step, &encode_vec(&qv(&[-3, -2]))).unwrap());
    }

    #[test]
    fn iterate_relation_is_k_fold_composition() {
        let inst = increment_instance(0, 3);
        let step = build_step_relation(&inst).unwrap();
        let i0 = iterate_relation(&step, 1, 0).unwrap();
        assert!(member(&i0, &encode_vec(&qv(&[5, 5]))).unwrap());
        assert!(!member(&i0, &encode_vec(&qv(&[5, 6]))).unwrap());
        let i3 = iterate_relation(&step, 1, 3).unwrap();
        assert!(member(&i3, &encode_vec(&qv(&[0, 3]))).unwrap());
        assert!(!member(&i3, &encode_vec(&qv(&[0, 2]))).unwrap());
        // Oracle: simulation agrees for random starts.
        let sys = inst.nncs();
        for start in [-2i64, 0, 7] {
            let traj = nncs_trajectory(&sys, &qv(&[start]), 3).unwrap();
            let mut pair = qv(&[start]);
            pair.extend(traj.last().unwrap().iter().cloned());
            assert!(member(&i3, &encode_vec(&pair)).unwrap());
        }
    }

    #[test]
    fn widen_constrains_one_side() {
        let zero = poly_to_nba(&PolyUnion::from_poly(singleton(&[q_int(0)])), 1).unwrap();
        let init = widen_init(&zero, 1).unwrap();
        assert!(member(&init, &encode_vec(&qv(&[0, 42]))).unwrap());
        assert!(!member(&init, &encode_vec(&qv(&[1, 42]))).unwrap());
        let three = poly_to_nba(&PolyUnion::from_poly(singleton(&[q_int(3)])), 1).unwrap();
        let target = widen_target(&three, 1).unwrap();
        assert!(member(&target, &encode_vec(&qv(&[42, 3]))).unwrap());
        assert!(!member(&target, &encode_vec(&qv(&[42, 4]))).unwrap());
        // Widenings remain wff-restricted: misaligned words are rejected.
        let a = crate::words::encode(&q_int(2));
        let b = crate::words::encode(&q_int(0));
        assert!(!member(&init, &a.zip(&b)).unwrap());
    }

    #[test]
    fn semi_decide_increment_to_three() {
        let inst = increment_instance(0, 3);
        match semi_decide(&inst, 5).unwrap() {
            ReachResult::Reached { k, x0, xk, witness } => {
                assert_eq!(k, 3);
                assert_eq!(x0, qv(&[0]));
                assert_eq!(xk, qv(&[3]));
                // The witness decodes to the replayed vectors by contract.
                assert_eq!(crate::words::decode_tracks(&witness).unwrap(), qv(&[0, 3]));
            }
            other => panic!("expected Reached, got {other:?}"),
        }
    }

    #[test]
    fn semi_decide_immediate_hit_at_k_zero() {
        let inst = increment_instance(3, 3);
        match semi_decide(&inst, 0).unwrap() {
            ReachResult::Reached { k, .. } => assert_eq!(k, 0),
            other => panic!("expected Reached at 0, got {other:?}"),
        }
    }

    #[test]
    fn semi_decide_unknown_when_unreachable_within_bound() {
        let inst = increment_instance(0, 100);
        assert_eq!(
            semi_decide(&inst, 4).unwrap(),
            ReachResult::Unknown { bound: 4 }
        );
    }

    #[test]
    fn semi_decide_minimal_k_matches_brute_force() {
        // Singleton init: the reported k must be the first simulation hit.
        for target in 0..6i64 {
            let inst = increment_instance(0, target);
            let sys = inst.nncs();
            let traj = nncs_trajectory(&sys, &qv(&[0]), 10).unwrap();
            let brute = traj
                .iter()
                .position(|x| inst.target.contains(x).unwrap())
                .unwrap();
            match semi_decide(&inst, 10).unwrap() {
                ReachResult::Reached { k, .. } => assert_eq!(k, brute, "target {target}"),
                other => panic!("expected Reached, got {other:?}"),
            }
        }
    }

    #[test]
    fn semi_decide_interval_init_picks_any_valid_start() {
        // init = [0, 2] as a polyhedron, target = {5}: reachable from 0, 1
        // or 2 in 5, 4 or 3 steps; minimality in k means x0 = 2, k = 3.
        let controller = Dnn::new(vec![Layer::new(
            vec![vec![q_int(1)]],
            vec![q_int(1)],
            vec![Activation::Identity],
        )])
        .unwrap();
        let init = Polyhedron::new(
            1,
            vec![
                LinearConstraint::le(vec![q_int(1)], q_int(2)),
                LinearConstraint::le(vec![q_int(-1)], q_int(0)),
            ],
        );
        let inst = ReachInstance::new(
            controller,
            Plant::Trivial { d: 1, c: 1 },
            ReachSet::Fup(PolyUnion::from_poly(init)),
            ReachSet::Fup(PolyUnion::from_poly(singleton(&[q_int(5)]))),
        )
        .unwrap();
        match semi_decide(&inst, 8).unwrap() {
            ReachResult::Reached { k, x0, xk, .. } => {
                assert_eq!(k, 3);
                assert_eq!(x0, qv(&[2]));
                assert_eq!(xk, qv(&[5]));
            }
            other => panic!("expected Reached, got {other:?}"),
        }
    }

    #[test]
    fn relation_sizes_stay_bounded_across_rounds() {
        // Regression guard against composition blow-up: the per-round sizes
        // are recorded and must stay far below the historical failure mode
        // (unreduced products grew two orders of magnitude per round).
        let inst = increment_instance(0, 100);
        let (result, stats) = semi_decide_with_stats(&inst, 8).unwrap();
        assert_eq!(result, ReachResult::Unknown { bound: 8 });
        assert_eq!(stats.len(), 9);
        for window in stats.windows(2) {
            assert!(window[1].k == window[0].k + 1);
        }
        for round in &stats {
            assert!(
                round.relation_states < 2_000,
                "round {} grew to {} states",
                round.k,
                round.relation_states
            );
        }
    }

    #[test]
    fn corrupted_step_relation_is_caught_by_replay() {
        // The step automaton claims u = x + 2 while the exact controller
        // computes u = x + 1: the automata layer reports target {2} reached
        // at k = 1, the replay recomputes F(0) = 1 and fails loudly.
        let inst = increment_instance(0, 2);
        let bogus_controller = Dnn::new(vec![Layer::new(
            vec![vec![q_int(1)]],
            vec![q_int(2)],
            vec![Activation::Identity],
        )])
        .unwrap();
        let bogus = ReachInstance {
            controller: bogus_controller,
            ..inst.clone()
        };
        let bogus_step = build_step_relation(&bogus).unwrap();
        match semi_decide_with_step(&inst, &bogus_step, 4) {
            Err(ReachError::WitnessReplay { k, .. }) => assert_eq!(k, 1),
            other => panic!("expected a replay failure, got {other:?}"),
        }
    }

    #[test]
    fn single_transition_corruptions_never_yield_wrong_reached() {
        // Retarget single transitions of the true step relation and check
        // the contract: every outcome is Unknown, a correctly replayed
        // Reached, or the designated replay error; never a wrong Reached.
        let inst = increment_instance(0, 3);
        let step = build_step_relation(&inst).unwrap();
        let sys = inst.nncs();
        let truth = nncs_trajectory(&sys, &qv(&[0]), 8).unwrap();
        let mut replay_errors = 0;
        for victim in 0..step.num_transitions().min(60) {
            let mut edges = step.transitions().to_vec();
            // Redirect the edge to an accepting state to enlarge behavior.
            let target = step
                .accepting_states()
                .next()
                .expect("step relation has accepting states");
            edges[victim].2 = target;
            let corrupted = Nba::new(
                step.arity(),
                step.num_states(),
                step.initial(),
                (0..step.num_states()).map(|s| step.is_accepting(s)).collect(),
                edges,
            );
            match semi_decide_with_step(&inst, &corrupted, 6) {
                Ok(ReachResult::Reached { k, x0, xk, .. }) => {
                    assert_eq!(x0, qv(&[0]));
                    assert_eq!(truth[k], xk, "replay must guarantee exactness");
                    assert!(inst.target.contains(&xk).unwrap());
                }
                Ok(ReachResult::Unknown { .. }) => {}
                Err(ReachError::WitnessReplay { .. }) => replay_errors += 1,
                Err(other) => panic!("unexpected error {other}"),
            }
        }
        assert!(
            replay_errors > 0,
            "at least one corruption should be caught in the act"
        );
    }
}
