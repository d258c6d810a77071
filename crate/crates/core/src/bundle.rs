//! The on-disk instance bundle: one JSON document holding a controller
//! network, a plant, initial and target sets, and (for compiled machines)
//! the concrete start vector, variant tag, and track layout.
//!
//! All rationals are strings (`"p"` or `"p/q"`); loading an emitted bundle
//! reproduces the in-memory instance bit-exactly.

use crate::compiler::{CompiledInstance, TrackLayout, Variant};
use crate::dnn::Dnn;
use crate::geometry::PolyUnion;
use crate::nba::Nba;
use crate::plant::Plant;
use crate::rational::Q;
use crate::semidecider::{ReachInstance, ReachSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Initial/target set in serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    Fup { set: PolyUnion },
    Automaton { automaton: Nba },
}

impl From<SetSpec> for ReachSet {
    fn from(spec: SetSpec) -> ReachSet {
        match spec {
            SetSpec::Fup { set } => ReachSet::Fup(set),
            SetSpec::Automaton { automaton } => ReachSet::Auto(automaton),
        }
    }
}

impl From<ReachSet> for SetSpec {
    fn from(set: ReachSet) -> SetSpec {
        match set {
            ReachSet::Fup(set) => SetSpec::Fup { set },
            ReachSet::Auto(automaton) => SetSpec::Automaton { automaton },
        }
    }
}

/// A complete instance bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bundle {
    pub controller: Dnn,
    pub plant: Plant,
    pub init: SetSpec,
    pub target: SetSpec,
    /// Concrete start vector, present for compiled machines and any bundle
    /// meant to be run as a single trajectory.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x0: Option<XZero>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub variant: Option<Variant>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub layout: Option<TrackLayout>,
}

/// Start vector wrapper so the rationals serialize as strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XZero(#[serde(with = "crate::rational::qvec")] pub Vec<Q>);

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bundle is inconsistent: {0}")]
    Inconsistent(String),
}

impl Bundle {
    /// Package a compiled machine as a self-contained bundle: trivial
    /// plant, singleton initial set at the start vector.
    pub fn from_compiled(inst: &CompiledInstance) -> Bundle {
        let d = inst.net.input_dim();
        Bundle {
            controller: inst.net.clone(),
            plant: Plant::Trivial { d, c: d },
            init: SetSpec::Fup {
                set: PolyUnion::from_poly(crate::geometry::singleton(&inst.x0)),
            },
            target: SetSpec::Fup {
                set: inst.target.clone(),
            },
            x0: Some(XZero(inst.x0.clone())),
            variant: Some(inst.variant),
            layout: inst.layout.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundles serialize")
    }

    pub fn from_json(text: &str) -> Result<Bundle, BundleError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Validate dimensions and produce the reachability instance.
    pub fn instance(&self) -> Result<ReachInstance, BundleError> {
        ReachInstance::new(
            self.controller.clone(),
            self.plant.clone(),
            self.init.clone().into(),
            self.target.clone().into(),
        )
        .map_err(|e| BundleError::Inconsistent(e.to_string()))
    }

    /// The start vector, validated against the plant dimension.
    pub fn start_vector(&self) -> Result<Vec<Q>, BundleError> {
        let x0 = self
            .x0
            .as_ref()
            .ok_or_else(|| BundleError::Inconsistent("bundle has no start vector".into()))?;
        if x0.0.len() != self.plant.state_dim() {
            return Err(BundleError::Inconsistent(format!(
                "start vector has {} entries, plant state dimension is {}",
                x0.0.len(),
                self.plant.state_dim()
            )));
        }
        Ok(x0.0.clone())
    }

    /// Hidden-layer count of the controller, as reported by `compile`.
    pub fn hidden_layers(&self) -> usize {
        self.controller.hidden_layers()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{compile_deep, compile_shallow};
    use crate::counter_machine::parse_machine;

    #[test]
    fn compiled_bundle_roundtrip_is_bit_exact() {
        let m = parse_machine("INC 0\nJZ 1 0\nSTOP").unwrap();
        for inst in [compile_deep(&m).unwrap(), compile_shallow(&m).unwrap()] {
            let bundle = Bundle::from_compiled(&inst);
            let json = bundle.to_json();
            let back = Bundle::from_json(&json).unwrap();
            assert_eq!(back.controller, bundle.controller);
            assert_eq!(back.to_json(), json);
            assert_eq!(back.variant, bundle.variant);
            assert_eq!(back.layout, bundle.layout);
            assert_eq!(back.start_vector().unwrap(), inst.x0);
            back.instance().unwrap();
        }
    }

    #[test]
    fn deep_bundle_reports_six_hidden_layers() {
        let m = parse_machine("DEC 1\nSTOP").unwrap();
        let bundle = Bundle::from_compiled(&compile_deep(&m).unwrap());
        assert_eq!(bundle.hidden_layers(), 6);
        let shallow = Bundle::from_compiled(&compile_shallow(&m).unwrap());
        assert_eq!(shallow.hidden_layers(), 1);
        assert_eq!(shallow.layout.as_ref().unwrap().modulo_inputs.len(), 7);
    }

    #[test]
    fn missing_start_vector_is_reported() {
        let m = parse_machine("INC 0\nSTOP").unwrap();
        let mut bundle = Bundle::from_compiled(&compile_deep(&m).unwrap());
        bundle.x0 = None;
        assert!(matches!(
            bundle.start_vector(),
            Err(BundleError::Inconsistent(_))
        ));
    }
}
