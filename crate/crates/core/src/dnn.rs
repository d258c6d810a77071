//! Feedforward networks over exact rationals.
//!
//! A network is a nonempty stack of layers; each neuron has rational weights,
//! a rational bias, and either a ReLU or an identity activation (tracked per
//! neuron, since compiled networks mix both inside a layer). Evaluation is
//! exact composition of affine maps and activations; nothing here rounds.

use crate::rational::{format_q, parse_q, Q};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-neuron activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    ReLU,
    Identity,
}

impl Activation {
    pub fn apply(&self, value: Q) -> Q {
        match self {
            Activation::Identity => value,
            Activation::ReLU => {
                if value < Q::zero() {
                    Q::zero()
                } else {
                    value
                }
            }
        }
    }
}

/// One layer: `n` neurons over `m` inputs, stored densely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    /// `n x m` weight matrix, one row per neuron.
    pub weights: Vec<Vec<Q>>,
    /// `n` biases.
    pub biases: Vec<Q>,
    /// `n` activations.
    pub activations: Vec<Activation>,
}

impl Layer {
    pub fn new(weights: Vec<Vec<Q>>, biases: Vec<Q>, activations: Vec<Activation>) -> Self {
        let layer = Layer {
            weights,
            biases,
            activations,
        };
        layer.check();
        layer
    }

    fn check(&self) {
        let n = self.weights.len();
        assert!(n >= 1, "layer needs at least one neuron");
        assert_eq!(self.biases.len(), n, "bias count");
        assert_eq!(self.activations.len(), n, "activation count");
        let m = self.weights[0].len();
        assert!(m >= 1, "layer needs at least one input");
        assert!(
            self.weights.iter().all(|row| row.len() == m),
            "ragged weight matrix"
        );
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.len()
    }

    fn apply(&self, input: &[Q]) -> Vec<Q> {
        self.weights
            .iter()
            .zip(&self.biases)
            .zip(&self.activations)
            .map(|((row, bias), act)| {
                let mut acc = bias.clone();
                for (w, x) in row.iter().zip(input) {
                    // Compiled networks are mostly zeros; skip them.
                    if !w.is_zero() {
                        acc += w * x;
                    }
                }
                act.apply(acc)
            })
            .collect()
    }
}

/// A network: nonempty sequence of layers with matching interfaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dnn {
    layers: Vec<Layer>,
}

/// Errors from network construction or evaluation.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DnnError {
    #[error("network needs at least one layer")]
    NoLayers,
    #[error("layer {index}: input dim {got} does not match previous output dim {expected}")]
    LayerMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("input has {got} entries, network expects {expected}")]
    InputDim { got: usize, expected: usize },
    #[error("parallel stacking needs equal depths, found {0:?}")]
    UnequalDepths(Vec<usize>),
    #[error("cannot pad to depth {requested}, network already has {current} layers")]
    PadTooShallow { requested: usize, current: usize },
}

impl Dnn {
    pub fn new(layers: Vec<Layer>) -> Result<Self, DnnError> {
        if layers.is_empty() {
            return Err(DnnError::NoLayers);
        }
        for i in 1..layers.len() {
            let expected = layers[i - 1].output_dim();
            let got = layers[i].input_dim();
            if got != expected {
                return Err(DnnError::LayerMismatch {
                    index: i,
                    got,
                    expected,
                });
            }
        }
        Ok(Dnn { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").output_dim()
    }

    /// Total layer count; the last layer is the output layer.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    /// An identity network of dimension `dim` with the given depth
    /// (`depth - 1` ReLU pass-through layers plus an identity output layer).
    /// Exact on nonnegative forwarded values like any ReLU pass-through.
    pub fn identity(dim: usize, depth: usize) -> Self {
        assert!(depth >= 1);
        let mut layers = Vec::with_capacity(depth);
        for i in 0..depth {
            let act = if i + 1 == depth {
                Activation::Identity
            } else {
                Activation::ReLU
            };
            layers.push(identity_layer(dim, act));
        }
        Dnn::new(layers).expect("identity net is well formed")
    }
}

/// A network of `depth` ReLU pass-through layers (no identity output
/// layer); exact on nonnegative values.
pub fn relu_passthrough(dim: usize, depth: usize) -> Dnn {
    assert!(depth >= 1);
    Dnn::new((0..depth).map(|_| identity_layer(dim, Activation::ReLU)).collect())
        .expect("pass-through net is well formed")
}

fn identity_layer(dim: usize, act: Activation) -> Layer {
    let weights = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| if i == j { Q::one() } else { Q::zero() })
                .collect()
        })
        .collect();
    Layer::new(weights, vec![Q::zero(); dim], vec![act; dim])
}

/// Evaluate the network on an exact input vector.
pub fn evaluate(net: &Dnn, input: &[Q]) -> Result<Vec<Q>, DnnError> {
    if input.len() != net.input_dim() {
        return Err(DnnError::InputDim {
            got: input.len(),
            expected: net.input_dim(),
        });
    }
    let mut current = input.to_vec();
    for layer in &net.layers {
        current = layer.apply(&current);
    }
    Ok(current)
}

/// Stack networks side by side (block-diagonal): the result consumes the
/// concatenation of the inputs and produces the concatenation of the
/// outputs. All networks must have the same depth; pad shorter ones first.
pub fn stack_parallel(nets: &[Dnn]) -> Result<Dnn, DnnError> {
    assert!(!nets.is_empty(), "need at least one network to stack");
    let depth = nets[0].depth();
    if nets.iter().any(|n| n.depth() != depth) {
        return Err(DnnError::UnequalDepths(
            nets.iter().map(|n| n.depth()).collect(),
        ));
    }
    let mut layers = Vec::with_capacity(depth);
    for level in 0..depth {
        let blocks: Vec<&Layer> = nets.iter().map(|n| &n.layers[level]).collect();
        let in_dim: usize = blocks.iter().map(|l| l.input_dim()).sum();
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut activations = Vec::new();
        let mut col_offset = 0;
        for block in &blocks {
            for (row, (bias, act)) in block
                .weights
                .iter()
                .zip(block.biases.iter().zip(&block.activations))
            {
                let mut wide = vec![Q::zero(); in_dim];
                wide[col_offset..col_offset + row.len()].clone_from_slice(row);
                weights.push(wide);
                biases.push(bias.clone());
                activations.push(*act);
            }
            col_offset += block.input_dim();
        }
        layers.push(Layer::new(weights, biases, activations));
    }
    Dnn::new(layers)
}

/// Extend a network to the requested depth by appending single-ReLU
/// pass-through layers before the (unchanged) output layer is re-appended.
/// Exact as long as the forwarded values are nonnegative; the compiler only
/// forwards counters, program counters, and indicator values, all of which
/// are.
pub fn pad_with_passthrough(net: &Dnn, depth: usize) -> Result<Dnn, DnnError> {
    if depth < net.depth() {
        return Err(DnnError::PadTooShallow {
            requested: depth,
            current: net.depth(),
        });
    }
    if depth == net.depth() {
        return Ok(net.clone());
    }
    let mut layers = net.layers.clone();
    let out = layers.pop().expect("nonempty");
    let dim = out.input_dim();
    for _ in 0..depth - net.depth() {
        layers.push(identity_layer(dim, Activation::ReLU));
    }
    layers.push(out);
    Dnn::new(layers)
}

/// Append pass-through ReLU layers after the final layer instead of before
/// it; used for gadget cores whose last layer is not an output layer.
pub fn pad_tail_with_passthrough(net: &Dnn, depth: usize) -> Result<Dnn, DnnError> {
    if depth < net.depth() {
        return Err(DnnError::PadTooShallow {
            requested: depth,
            current: net.depth(),
        });
    }
    let mut layers = net.layers.clone();
    let dim = net.output_dim();
    for _ in 0..depth - net.depth() {
        layers.push(identity_layer(dim, Activation::ReLU));
    }
    Dnn::new(layers)
}

// ---------------------------------------------------------------------------
// Interchange format: layers as arrays of rows, rationals as "p/q" strings,
// activations as "relu" / "id". Round-trips bit-exactly.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LayerRepr {
    weights: Vec<Vec<String>>,
    biases: Vec<String>,
    activations: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct DnnRepr {
    layers: Vec<LayerRepr>,
}

impl Serialize for Dnn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = DnnRepr {
            layers: self
                .layers
                .iter()
                .map(|layer| LayerRepr {
                    weights: layer
                        .weights
                        .iter()
                        .map(|row| row.iter().map(format_q).collect())
                        .collect(),
                    biases: layer.biases.iter().map(format_q).collect(),
                    activations: layer
                        .activations
                        .iter()
                        .map(|a| {
                            match a {
                                Activation::ReLU => "relu",
                                Activation::Identity => "id",
                            }
                            .to_string()
                        })
                        .collect(),
                })
                .collect(),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dnn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = DnnRepr::deserialize(d)?;
        let mut layers = Vec::with_capacity(repr.layers.len());
        for l in &repr.layers {
            let weights = l
                .weights
                .iter()
                .map(|row| row.iter().map(|s| parse_q(s)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(D::Error::custom)?;
            let biases = l
                .biases
                .iter()
                .map(|s| parse_q(s))
                .collect::<Result<Vec<_>, _>>()
                .map_err(D::Error::custom)?;
            let activations = l
                .activations
                .iter()
                .map(|s| match s.as_str() {
                    "relu" => Ok(Activation::ReLU),
                    "id" => Ok(Activation::Identity),
                    other => Err(D::Error::custom(format!("unknown activation {other:?}"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if weights.is_empty() || weights[0].is_empty() {
                return Err(D::Error::custom("empty layer"));
            }
            if biases.len() != weights.len()
                || activations.len() != weights.len()
                || weights.iter().any(|r| r.len() != weights[0].len())
            {
                return Err(D::Error::custom("inconsistent layer shape"));
            }
            layers.push(Layer::new(weights, biases, activations));
        }
        Dnn::new(layers).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q_int, q_ratio};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn single_neuron(weights: Vec<Q>, bias: Q, act: Activation) -> Dnn {
        Dnn::new(vec![Layer::new(vec![weights], vec![bias], vec![act])]).unwrap()
    }

    #[test]
    fn evaluate_identity_and_relu() {
        let id = single_neuron(vec![q_int(1)], q_int(0), Activation::Identity);
        assert_eq!(evaluate(&id, &[q_int(5)]).unwrap(), vec![q_int(5)]);

        let relu = single_neuron(vec![q_int(1)], q_int(0), Activation::ReLU);
        assert_eq!(evaluate(&relu, &[q_int(-3)]).unwrap(), vec![q_int(0)]);
    }

    #[test]
    fn evaluate_affine_then_clamp() {
        // ReLU(2*1 - 1*4 + 1) = ReLU(-1) = 0
        let net = single_neuron(vec![q_int(2), q_int(-1)], q_int(1), Activation::ReLU);
        assert_eq!(
            evaluate(&net, &[q_int(1), q_int(4)]).unwrap(),
            vec![q_int(0)]
        );
    }

    #[test]
    fn evaluate_rejects_bad_dim() {
        let net = single_neuron(vec![q_int(1)], q_int(0), Activation::Identity);
        assert!(matches!(
            evaluate(&net, &[q_int(1), q_int(2)]),
            Err(DnnError::InputDim { .. })
        ));
    }

    #[test]
    fn stack_of_one_is_that_net() {
        let net = single_neuron(vec![q_int(3)], q_int(1), Activation::ReLU);
        let stacked = stack_parallel(std::slice::from_ref(&net)).unwrap();
        assert_eq!(stacked, net);
    }

    #[test]
    fn stack_identities() {
        let a = Dnn::identity(1, 2);
        let b = Dnn::identity(2, 2);
        let stacked = stack_parallel(&[a, b]).unwrap();
        assert_eq!(stacked.input_dim(), 3);
        let x = [q_int(4), q_ratio(1, 2), q_int(7)];
        assert_eq!(evaluate(&stacked, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn stack_rejects_unequal_depths() {
        let a = Dnn::identity(1, 2);
        let b = Dnn::identity(1, 3);
        assert!(matches!(
            stack_parallel(&[a, b]),
            Err(DnnError::UnequalDepths(_))
        ));
    }

    #[test]
    fn stack_evaluates_componentwise_on_random_inputs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let gadget = single_neuron(vec![q_int(2), q_int(-1)], q_int(1), Activation::ReLU);
        let pass = Dnn::identity(2, 1);
        let stacked = stack_parallel(&[gadget.clone(), pass.clone()]).unwrap();
        for _ in 0..50 {
            let xs: Vec<Q> = (0..4)
                .map(|_| q_ratio(rng.gen_range(-20..20), rng.gen_range(1..8)))
                .collect();
            let left = evaluate(&gadget, &xs[..2]).unwrap();
            let right = evaluate(&pass, &xs[2..]).unwrap();
            let whole = evaluate(&stacked, &xs).unwrap();
            assert_eq!(whole, [left, right].concat());
        }
    }

    #[test]
    fn pad_preserves_values_on_nonnegatives() {
        let net = Dnn::identity(1, 1);
        let padded = pad_with_passthrough(&net, 3).unwrap();
        assert_eq!(padded.depth(), 3);
        assert_eq!(evaluate(&padded, &[q_int(7)]).unwrap(), vec![q_int(7)]);
        // Negative forwarded values are clamped by the padding; documented
        // and excluded by the compiler's nonnegativity discipline.
        assert_eq!(evaluate(&padded, &[q_int(-1)]).unwrap(), vec![q_int(0)]);
    }

    #[test]
    fn pad_rejects_shrinking() {
        let net = Dnn::identity(1, 3);
        assert!(matches!(
            pad_with_passthrough(&net, 2),
            Err(DnnError::PadTooShallow { .. })
        ));
    }

    #[test]
    fn integral_io_stays_integral() {
        let net = Dnn::new(vec![
            Layer::new(
                vec![
                    vec![q_int(2), q_int(-3)],
                    vec![q_int(1), q_int(1)],
                ],
                vec![q_int(-1), q_int(4)],
                vec![Activation::ReLU; 2],
            ),
            Layer::new(
                vec![vec![q_int(1), q_int(-2)]],
                vec![q_int(5)],
                vec![Activation::Identity],
            ),
        ])
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let x = [q_int(rng.gen_range(-9..9)), q_int(rng.gen_range(-9..9))];
            for y in evaluate(&net, &x).unwrap() {
                assert!(crate::rational::is_integral(&y));
            }
        }
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let net = Dnn::new(vec![
            Layer::new(
                vec![vec![q_ratio(-7, 6), q_int(0)]],
                vec![q_ratio(1, 2)],
                vec![Activation::ReLU],
            ),
            Layer::new(
                vec![vec![q_int(3)]],
                vec![q_int(0)],
                vec![Activation::Identity],
            ),
        ])
        .unwrap();
        let json = serde_json::to_string(&net).unwrap();
        let back: Dnn = serde_json::from_str(&json).unwrap();
        assert_eq!(back, net);
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    proptest! {
        // Bias-free all-ReLU networks are positively homogeneous:
        // N(lambda * x) = lambda * N(x) for lambda >= 0.
        #[test]
        fn positive_homogeneity(
            w in proptest::collection::vec(-4i64..=4, 4),
            x in proptest::collection::vec(-9i64..=9, 2),
            lam_num in 0i64..=6,
            lam_den in 1i64..=4,
        ) {
            let l1 = Layer::new(
                vec![
                    vec![q_int(w[0]), q_int(w[1])],
                    vec![q_int(w[2]), q_int(w[3])],
                ],
                vec![q_int(0); 2],
                vec![Activation::ReLU; 2],
            );
            let l2 = Layer::new(
                vec![vec![q_int(1), q_int(-1)]],
                vec![q_int(0)],
                vec![Activation::ReLU],
            );
            let net = Dnn::new(vec![l1, l2]).unwrap();
            let lam = q_ratio(lam_num, lam_den);
            let x: Vec<Q> = x.iter().map(|&v| q_int(v)).collect();
            let scaled: Vec<Q> = x.iter().map(|v| v * &lam).collect();
            let lhs = evaluate(&net, &scaled).unwrap();
            let rhs: Vec<Q> = evaluate(&net, &x)
                .unwrap()
                .into_iter()
                .map(|v| v * &lam)
                .collect();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
