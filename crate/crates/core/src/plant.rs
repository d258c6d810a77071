//! Plants and closed control loops.
//!
//! A plant maps `(state, control)` to the next state. Two kinds are
//! supported: the trivial plant that returns its control input, and guarded
//! multi-mode linear maps, where the mode rides along as state component 0
//! and per-edge finite unions of polyhedra over the post-flow state and the
//! control pick the successor mode. Guards must be pairwise disjoint per
//! source mode and jointly cover the whole space; [`validate_multimode`]
//! checks both statically, and every application re-checks uniqueness on the
//! executed path.

use crate::dnn::{evaluate, Dnn, DnnError};
use crate::geometry::{GeometryError, PolyUnion};
use crate::rational::{format_q_vec, is_integral, qmat, qvec, Q};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// A guarded discrete-time linear plant with finitely many modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiModeLinearMap {
    /// Mode identifiers (naturals).
    pub modes: Vec<u64>,
    /// Edges between modes; guards are attached per edge.
    pub edges: Vec<ModeEdge>,
    /// Non-mode state dimension.
    pub d: usize,
    /// Control dimension.
    pub c: usize,
    /// Per-mode flow `(A, B, c)` in mode order.
    pub flows: Vec<Flow>,
}

/// Affine flow `x' = A x + B u + c` for one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    #[serde(with = "qmat")]
    pub a: Vec<Vec<Q>>,
    #[serde(with = "qmat")]
    pub b: Vec<Vec<Q>>,
    #[serde(with = "qvec")]
    pub c: Vec<Q>,
}

/// One edge `(from, to)` with its guard over `(x', u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEdge {
    pub from: u64,
    pub to: u64,
    pub guard: PolyUnion,
}

impl MultiModeLinearMap {
    /// State dimension as seen by the control loop: mode plus coordinates.
    pub fn state_dim(&self) -> usize {
        self.d + 1
    }

    pub fn flow_of(&self, mode: u64) -> Option<&Flow> {
        self.modes
            .iter()
            .position(|&m| m == mode)
            .map(|i| &self.flows[i])
    }

    fn check_shape(&self) -> Result<(), PlantError> {
        if self.modes.is_empty() || self.d == 0 || self.c == 0 {
            return Err(PlantError::Malformed("empty modes or zero dimension".into()));
        }
        if self.flows.len() != self.modes.len() {
            return Err(PlantError::Malformed("one flow per mode required".into()));
        }
        let unique: BTreeSet<u64> = self.modes.iter().copied().collect();
        if unique.len() != self.modes.len() {
            return Err(PlantError::Malformed("duplicate mode identifiers".into()));
        }
        for flow in &self.flows {
            if flow.a.len() != self.d
                || flow.a.iter().any(|r| r.len() != self.d)
                || flow.b.len() != self.d
                || flow.b.iter().any(|r| r.len() != self.c)
                || flow.c.len() != self.d
            {
                return Err(PlantError::Malformed("flow matrix shape".into()));
            }
        }
        for edge in &self.edges {
            if !unique.contains(&edge.from) || !unique.contains(&edge.to) {
                return Err(PlantError::Malformed("edge references unknown mode".into()));
            }
            if edge.guard.dim != self.d + self.c {
                return Err(PlantError::Malformed(format!(
                    "guard dimension {} != d + c = {}",
                    edge.guard.dim,
                    self.d + self.c
                )));
            }
        }
        Ok(())
    }
}

/// A plant: either trivial (`P(x, u) = u`) or a multi-mode linear map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Plant {
    Trivial { d: usize, c: usize },
    MultiMode { map: MultiModeLinearMap },
}

impl Plant {
    pub fn state_dim(&self) -> usize {
        match self {
            Plant::Trivial { d, .. } => *d,
            Plant::MultiMode { map } => map.state_dim(),
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            Plant::Trivial { c, .. } => *c,
            Plant::MultiMode { map } => map.c,
        }
    }
}

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("malformed plant: {0}")]
    Malformed(String),
    #[error("state has {got} entries, plant expects {expected}")]
    StateDim { expected: usize, got: usize },
    #[error("control has {got} entries, plant expects {expected}")]
    ControlDim { expected: usize, got: usize },
    #[error("mode component {0} is not a mode of the map")]
    UnknownMode(String),
    #[error("guard resolution failed in mode {mode}: {matches} guards match at {point}")]
    GuardResolution {
        mode: u64,
        matches: usize,
        point: String,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Dnn(#[from] DnnError),
}

/// Apply a plant to a state/control pair.
pub fn plant_apply(plant: &Plant, x: &[Q], u: &[Q]) -> Result<Vec<Q>, PlantError> {
    match plant {
        Plant::Trivial { d, c } => {
            if x.len() != *d {
                return Err(PlantError::StateDim {
                    expected: *d,
                    got: x.len(),
                });
            }
            if u.len() != *c {
                return Err(PlantError::ControlDim {
                    expected: *c,
                    got: u.len(),
                });
            }
            Ok(u.to_vec())
        }
        Plant::MultiMode { map } => {
            map.check_shape()?;
            if x.len() != map.state_dim() {
                return Err(PlantError::StateDim {
                    expected: map.state_dim(),
                    got: x.len(),
                });
            }
            if u.len() != map.c {
                return Err(PlantError::ControlDim {
                    expected: map.c,
                    got: u.len(),
                });
            }
            let mode = mode_of(&x[0])?;
            let flow = map
                .flow_of(mode)
                .ok_or_else(|| PlantError::UnknownMode(mode.to_string()))?;
            let coords = &x[1..];
            let mut next = flow.c.clone();
            for (row, slot) in flow.a.iter().zip(next.iter_mut()) {
                for (w, v) in row.iter().zip(coords) {
                    if !w.is_zero() {
                        *slot += w * v;
                    }
                }
            }
            for (row, slot) in flow.b.iter().zip(next.iter_mut()) {
                for (w, v) in row.iter().zip(u) {
                    if !w.is_zero() {
                        *slot += w * v;
                    }
                }
            }
            // Guard lookup point is (x', u).
            let mut probe = next.clone();
            probe.extend(u.iter().cloned());
            let mut target = None;
            let mut matches = 0;
            for edge in map.edges.iter().filter(|e| e.from == mode) {
                if edge.guard.contains(&probe)? {
                    matches += 1;
                    target = Some(edge.to);
                }
            }
            if matches != 1 {
                return Err(PlantError::GuardResolution {
                    mode,
                    matches,
                    point: format_q_vec(&probe),
                });
            }
            let mut result = Vec::with_capacity(map.state_dim());
            result.push(Q::from_integer(BigInt::from(
                target.expect("matches == 1"),
            )));
            result.extend(next);
            Ok(result)
        }
    }
}

fn mode_of(q: &Q) -> Result<u64, PlantError> {
    if !is_integral(q) || q < &Q::zero() {
        return Err(PlantError::UnknownMode(crate::rational::format_q(q)));
    }
    q.numer()
        .to_u64()
        .ok_or_else(|| PlantError::UnknownMode(crate::rational::format_q(q)))
}

/// One finding from static multi-mode validation.
#[derive(Debug, Clone, Serialize)]
pub enum ModeMapViolation {
    /// Two distinct successors' guards overlap; the witness satisfies both.
    Overlap {
        from: u64,
        to_a: u64,
        to_b: u64,
        #[serde(with = "qvec")]
        witness: Vec<Q>,
    },
    /// Some `(x', u)` matches no outgoing guard.
    CoverageGap {
        from: u64,
        #[serde(with = "qvec")]
        witness: Vec<Q>,
    },
}

/// Validation report; empty `violations` means the map satisfies both
/// guard conditions.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<ModeMapViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check guard disjointness per source mode and coverage of the whole
/// `(x', u)` space, reporting witness points for every violation.
pub fn validate_multimode(map: &MultiModeLinearMap) -> Result<ValidationReport, PlantError> {
    map.check_shape()?;
    let mut violations = Vec::new();
    for &mode in &map.modes {
        let outgoing: Vec<&ModeEdge> = map.edges.iter().filter(|e| e.from == mode).collect();
        for i in 0..outgoing.len() {
            for j in i + 1..outgoing.len() {
                if outgoing[i].to == outgoing[j].to {
                    continue;
                }
                let overlap = outgoing[i].guard.intersect(&outgoing[j].guard)?;
                if let Some(witness) = overlap.witness() {
                    violations.push(ModeMapViolation::Overlap {
                        from: mode,
                        to_a: outgoing[i].to,
                        to_b: outgoing[j].to,
                        witness,
                    });
                }
            }
        }
        let mut union = PolyUnion::empty(map.d + map.c);
        for edge in &outgoing {
            union = union.union(&edge.guard)?;
        }
        if let Some(witness) = union.complement().witness() {
            violations.push(ModeMapViolation::CoverageGap {
                from: mode,
                witness,
            });
        }
    }
    Ok(ValidationReport { violations })
}

/// A closed loop of a plant and a network controller.
#[derive(Debug, Clone, PartialEq)]
pub struct Nncs {
    pub plant: Plant,
    pub controller: Dnn,
}

impl Nncs {
    pub fn new(plant: Plant, controller: Dnn) -> Result<Self, PlantError> {
        if controller.input_dim() != plant.state_dim() {
            return Err(PlantError::StateDim {
                expected: plant.state_dim(),
                got: controller.input_dim(),
            });
        }
        if controller.output_dim() != plant.control_dim() {
            return Err(PlantError::ControlDim {
                expected: plant.control_dim(),
                got: controller.output_dim(),
            });
        }
        Ok(Nncs { plant, controller })
    }

    pub fn state_dim(&self) -> usize {
        self.plant.state_dim()
    }
}

/// One control-loop iteration: `P(x, N(x))`.
pub fn nncs_iterate(sys: &Nncs, x: &[Q]) -> Result<Vec<Q>, PlantError> {
    let u = evaluate(&sys.controller, x)?;
    plant_apply(&sys.plant, x, &u)
}

/// The trajectory `x0, F(x0), ..., F^k(x0)`.
pub fn nncs_trajectory(sys: &Nncs, x0: &[Q], k: usize) -> Result<Vec<Vec<Q>>, PlantError> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(x0.to_vec());
    for _ in 0..k {
        let next = nncs_iterate(sys, out.last().expect("nonempty"))?;
        out.push(next);
    }
    Ok(out)
}
