//! Compile a two-counter machine into a ReLU network that performs one
//! configuration update per control-loop iteration.
//!
//! State vectors are ordered `(c0, c1, pc)`. Two variants exist:
//!
//! - **deep**: 3 inputs, 3 outputs, exactly six hidden ReLU layers and an
//!   identity output layer, all weights and biases integral. Layers 1-3
//!   compute one indicator `a_l = ReLU(ReLU(pc - l + 1) - 2*ReLU(pc - l))`
//!   per instruction line plus pass-throughs; layers 4-6 run one gadget per
//!   instruction in parallel (shorter gadgets padded with ReLU
//!   pass-throughs); the output layer sums the gadget outputs and subtracts
//!   the forwarded inputs `k - 2` times. On the encoding of a non-stopping
//!   configuration the network computes the successor configuration; on the
//!   stop line it computes the identity.
//! - **shallow**: the six hidden layers plus the output layer become seven
//!   "tracks" stacked side by side in a single wide hidden layer, each track
//!   writing the next track's input slots (cyclically), so seven iterations
//!   of the shallow network equal one iteration of the deep one on the main
//!   track. A seven-wire one-hot ring distinguishes the meaningful
//!   iterations; the target set additionally requires its first wire to be 1.
//!
//! The `pc` forward rides on the line-0 indicator chain (whose first neuron
//! holds `pc + 1` on valid states), which keeps the first hidden layer at
//! width `k + 1`; the `-1` shifts are folded into downstream biases.

use crate::counter_machine::{Configuration, CounterMachine, Instruction};
use crate::dnn::{
    evaluate, pad_tail_with_passthrough, relu_passthrough, stack_parallel, Activation, Dnn, Layer,
};
use crate::geometry::{LinearConstraint, Polyhedron, PolyUnion};
use crate::plant::{nncs_trajectory, Nncs, Plant, PlantError};
use crate::rational::{q_int, Q};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which construction produced an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Deep,
    Shallow,
}

/// What a gadget network implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GadgetKind {
    /// Line indicator for `line`; 1 input (`pc`), 1 output (`a_line`).
    Aux { line: usize },
    /// Increment gadget; 4 inputs `(c0, c1, pc, a)`, 3 outputs.
    Inc { line: usize, counter: usize },
    /// Decrement gadget (clamped at zero).
    Dec { line: usize, counter: usize },
    /// Jump-if-zero gadget with its target line.
    Jz {
        line: usize,
        counter: usize,
        target: usize,
    },
}

/// A gadget network together with what it implements.
#[derive(Debug, Clone)]
pub struct GadgetNet {
    pub net: Dnn,
    pub kind: GadgetKind,
}

/// Index layout of the shallow variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackLayout {
    /// Per-track `(start, len)` ranges in the state vector.
    pub track_inputs: Vec<(usize, usize)>,
    /// Per-track `(start, len)` ranges in the wide hidden layer.
    pub track_hidden: Vec<(usize, usize)>,
    /// Positions of the seven ring wires in the state vector.
    pub modulo_inputs: Vec<usize>,
    /// Positions of the seven ring neurons in the hidden layer.
    pub modulo_hidden: Vec<usize>,
}

/// A compiled machine: network, start vector, and target set, plus the
/// track layout for the shallow variant.
#[derive(Debug, Clone)]
pub struct CompiledInstance {
    pub net: Dnn,
    pub x0: Vec<Q>,
    pub target: PolyUnion,
    pub variant: Variant,
    pub layout: Option<TrackLayout>,
}

impl CompiledInstance {
    /// Wrap the network in a trivial plant to obtain the closed loop.
    pub fn nncs(&self) -> Nncs {
        let d = self.net.input_dim();
        Nncs::new(Plant::Trivial { d, c: d }, self.net.clone())
            .expect("compiled nets are square")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("machine must have at least one instruction before STOP (k >= 2), got k = {0}")]
    TooShort(usize),
}

/// The machine configuration as a `(c0, c1, pc)` vector.
pub fn config_vec(config: &Configuration) -> Vec<Q> {
    let big = |b: &num_bigint::BigUint| Q::from_integer(BigInt::from(b.clone()));
    vec![big(&config.c0), big(&config.c1), q_int(config.pc as i64)]
}

fn relu_row(weights: Vec<i64>, bias: i64) -> (Vec<Q>, Q, Activation) {
    (
        weights.into_iter().map(q_int).collect(),
        q_int(bias),
        Activation::ReLU,
    )
}

fn layer_from_rows(rows: Vec<(Vec<Q>, Q, Activation)>) -> Layer {
    let mut weights = Vec::with_capacity(rows.len());
    let mut biases = Vec::with_capacity(rows.len());
    let mut acts = Vec::with_capacity(rows.len());
    for (w, b, a) in rows {
        weights.push(w);
        biases.push(b);
        acts.push(a);
    }
    Layer::new(weights, biases, acts)
}

fn identity_output_layer(dim: usize) -> Layer {
    let rows = (0..dim)
        .map(|i| {
            let mut w = vec![Q::zero(); dim];
            w[i] = Q::one();
            (w, Q::zero(), Activation::Identity)
        })
        .collect();
    layer_from_rows(rows)
}

// ---------------------------------------------------------------------------
// Gadget cores. A core is the hidden-layer part of a gadget: inputs
// (c0, c1, pc, a), outputs (c0', c1', pc') after one or three ReLU layers.
// ---------------------------------------------------------------------------

fn inc_dec_core(counter: usize, a_weight: i64) -> Dnn {
    let a0 = if counter == 0 { a_weight } else { 0 };
    let a1 = if counter == 1 { a_weight } else { 0 };
    let layer = layer_from_rows(vec![
        relu_row(vec![1, 0, 0, a0], 0),
        relu_row(vec![0, 1, 0, a1], 0),
        relu_row(vec![0, 0, 1, 1], 0),
    ]);
    Dnn::new(vec![layer]).expect("core is well formed")
}

fn jz_core(line: usize, counter: usize, target: usize) -> Dnn {
    let neg_c = |i: usize| if counter == i { -1 } else { 0 };
    // Layer 1: counters forwarded; pc + a; the indicator pair a and 1 - c_i.
    let l1 = layer_from_rows(vec![
        relu_row(vec![1, 0, 0, 0], 0),
        relu_row(vec![0, 1, 0, 0], 0),
        relu_row(vec![0, 0, 1, 1], 0),
        relu_row(vec![0, 0, 0, 1], 0),
        relu_row(vec![neg_c(0), neg_c(1), 0, 0], 1),
    ]);
    // Layer 2: the zero-test n6 = ReLU(a + ReLU(1 - c_i) - 1), which is 1
    // exactly when the gadget is active and the counter is zero.
    let l2 = layer_from_rows(vec![
        relu_row(vec![1, 0, 0, 0, 0], 0),
        relu_row(vec![0, 1, 0, 0, 0], 0),
        relu_row(vec![0, 0, 1, 0, 0], 0),
        relu_row(vec![0, 0, 0, 1, 1], -1),
    ]);
    // Layer 3: jump correction. Active with zero counter the pc chain holds
    // pc + 1 = line + 1, so the correction weight target - line - 1 lands
    // the output exactly on the jump target.
    let correction = target as i64 - line as i64 - 1;
    let l3 = layer_from_rows(vec![
        relu_row(vec![1, 0, 0, 0], 0),
        relu_row(vec![0, 1, 0, 0], 0),
        relu_row(vec![0, 0, 1, correction], 0),
    ]);
    Dnn::new(vec![l1, l2, l3]).expect("core is well formed")
}

fn instruction_core(line: usize, instr: &Instruction) -> Dnn {
    match instr {
        Instruction::Inc(i) => inc_dec_core(*i, 1),
        Instruction::Dec(i) => inc_dec_core(*i, -1),
        Instruction::Jz(i, target) => jz_core(line, *i, *target),
        Instruction::Stop => unreachable!("no gadget for STOP"),
    }
}

// ---------------------------------------------------------------------------
// Standalone gadget networks (cores plus an identity output layer), built
// and tested in isolation with the indicator input exposed.
// ---------------------------------------------------------------------------

/// The line indicator: 1 input `pc`, 1 output that is 1 on integral
/// `pc = line` and 0 on every other nonnegative integer.
pub fn build_aux_gadget(line: usize) -> GadgetNet {
    let l1 = layer_from_rows(vec![relu_row(vec![1], 1 - line as i64)]);
    let l2 = layer_from_rows(vec![relu_row(vec![1], 0), relu_row(vec![1], -1)]);
    let l3 = layer_from_rows(vec![relu_row(vec![1, -2], 0)]);
    let out = identity_output_layer(1);
    GadgetNet {
        net: Dnn::new(vec![l1, l2, l3, out]).expect("aux gadget is well formed"),
        kind: GadgetKind::Aux { line },
    }
}

/// Increment gadget for `counter` at `line`.
pub fn build_inc_gadget(line: usize, counter: usize) -> GadgetNet {
    assert!(counter <= 1);
    let mut layers = inc_dec_core(counter, 1).layers().to_vec();
    layers.push(identity_output_layer(3));
    GadgetNet {
        net: Dnn::new(layers).expect("inc gadget is well formed"),
        kind: GadgetKind::Inc { line, counter },
    }
}

/// Decrement gadget (clamping at zero) for `counter` at `line`.
pub fn build_dec_gadget(line: usize, counter: usize) -> GadgetNet {
    assert!(counter <= 1);
    let mut layers = inc_dec_core(counter, -1).layers().to_vec();
    layers.push(identity_output_layer(3));
    GadgetNet {
        net: Dnn::new(layers).expect("dec gadget is well formed"),
        kind: GadgetKind::Dec { line, counter },
    }
}

/// Jump-if-zero gadget for `counter` at `line` with jump `target`.
pub fn build_jz_gadget(line: usize, counter: usize, target: usize) -> GadgetNet {
    assert!(counter <= 1);
    let mut layers = jz_core(line, counter, target).layers().to_vec();
    layers.push(identity_output_layer(3));
    GadgetNet {
        net: Dnn::new(layers).expect("jz gadget is well formed"),
        kind: GadgetKind::Jz {
            line,
            counter,
            target,
        },
    }
}

// ---------------------------------------------------------------------------
// Deep compilation.
// ---------------------------------------------------------------------------

/// The deep target set `{(c0, c1, pc) : pc = k - 1, c0 >= 0, c1 >= 0}`.
fn deep_target(k: usize) -> PolyUnion {
    let stop = q_int(k as i64 - 1);
    PolyUnion::from_poly(Polyhedron::new(
        3,
        vec![
            LinearConstraint::le(vec![Q::zero(), Q::zero(), Q::one()], stop.clone()),
            LinearConstraint::le(vec![Q::zero(), Q::zero(), -Q::one()], -stop),
            LinearConstraint::le(vec![-Q::one(), Q::zero(), Q::zero()], Q::zero()),
            LinearConstraint::le(vec![Q::zero(), -Q::one(), Q::zero()], Q::zero()),
        ],
    ))
}

/// Compile the six-hidden-layer variant.
pub fn compile_deep(machine: &CounterMachine) -> Result<CompiledInstance, CompileError> {
    let k = machine.len();
    if k < 2 {
        return Err(CompileError::TooShort(k));
    }
    let n = k - 1; // instruction gadgets, lines 0..n

    // Phase A, layer 1 (width k + 1): indicator chains plus counter
    // forwards. Input order (c0, c1, pc).
    let mut l1_rows = Vec::with_capacity(n + 2);
    for line in 0..n {
        l1_rows.push(relu_row(vec![0, 0, 1], 1 - line as i64));
    }
    l1_rows.push(relu_row(vec![1, 0, 0], 0));
    l1_rows.push(relu_row(vec![0, 1, 0], 0));
    let l1 = layer_from_rows(l1_rows);

    // Layer 2 (width 2n + 2): both indicator branches per line, counters.
    // Input slots: [aux1_0..aux1_{n-1}, C0, C1].
    let w2 = n + 2;
    let mut l2_rows = Vec::with_capacity(2 * n + 2);
    for line in 0..n {
        let mut w = vec![0i64; w2];
        w[line] = 1;
        l2_rows.push(relu_row(w, 0));
    }
    for line in 0..n {
        let mut w = vec![0i64; w2];
        w[line] = 1;
        l2_rows.push(relu_row(w, -1));
    }
    for c in 0..2 {
        let mut w = vec![0i64; w2];
        w[n + c] = 1;
        l2_rows.push(relu_row(w, 0));
    }
    let l2 = layer_from_rows(l2_rows);

    // Layer 3 (width n + 3): indicators a_l, counters, and the pc forward
    // P = pc + 1 recovered from the line-0 chain.
    // Input slots: [aux2_0.., aux3_0.., C0, C1].
    let w3 = 2 * n + 2;
    let mut l3_rows = Vec::with_capacity(n + 3);
    for line in 0..n {
        let mut w = vec![0i64; w3];
        w[line] = 1;
        w[n + line] = -2;
        l3_rows.push(relu_row(w, 0));
    }
    for c in 0..2 {
        let mut w = vec![0i64; w3];
        w[2 * n + c] = 1;
        l3_rows.push(relu_row(w, 0));
    }
    let mut w = vec![0i64; w3];
    w[0] = 1; // aux2_0 carries pc + 1
    l3_rows.push(relu_row(w, 0));
    let l3 = layer_from_rows(l3_rows);

    // Phase B: one padded core per instruction plus a pass-through block,
    // stacked side by side into layers 4-6.
    let mut cores: Vec<Dnn> = (0..n)
        .map(|line| {
            let core = instruction_core(line, machine.instruction(line));
            pad_tail_with_passthrough(&core, 3).expect("cores have depth <= 3")
        })
        .collect();
    cores.push(relu_passthrough(3, 3));
    let stacked = stack_parallel(&cores).expect("cores share depth 3");

    // Fold the fan-out wiring into the stacked first layer. Stacked inputs
    // are [c0, c1, pc, a_0 | c0, c1, pc, a_1 | ... | c0, c1, pc]; layer-3
    // outputs are [a_0.., C0, C1, P] with P = pc + 1.
    let a3_width = n + 3;
    let slot_source = |slot: usize| -> (usize, i64) {
        if slot < 4 * n {
            let block = slot / 4;
            match slot % 4 {
                0 => (n, 0),     // c0 <- C0
                1 => (n + 1, 0), // c1 <- C1
                2 => (n + 2, -1), // pc <- P - 1
                _ => (block, 0), // a <- a_block
            }
        } else {
            match slot - 4 * n {
                0 => (n, 0),
                1 => (n + 1, 0),
                _ => (n + 2, 0), // the pass block carries P itself
            }
        }
    };
    let first = &stacked.layers()[0];
    let mut l4_rows = Vec::with_capacity(first.output_dim());
    for (row, bias) in first.weights.iter().zip(&first.biases) {
        let mut w = vec![Q::zero(); a3_width];
        let mut b = bias.clone();
        for (slot, coeff) in row.iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            let (source, shift) = slot_source(slot);
            w[source] += coeff;
            if shift != 0 {
                b += coeff * q_int(shift);
            }
        }
        l4_rows.push((w, b, Activation::ReLU));
    }
    let l4 = layer_from_rows(l4_rows);
    let l5 = stacked.layers()[1].clone();
    let l6 = stacked.layers()[2].clone();

    // Output layer: sum the gadget outputs, subtract the forwarded inputs
    // k - 2 times. The pc forward carries pc + 1, so its weight picks up an
    // extra +(k - 2) bias.
    let w6 = 3 * n + 3;
    let subtract = q_int(k as i64 - 2);
    let mut out_rows = Vec::with_capacity(3);
    for axis in 0..3 {
        let mut w = vec![Q::zero(); w6];
        for block in 0..n {
            w[3 * block + axis] = Q::one();
        }
        w[3 * n + axis] = -subtract.clone();
        let bias = if axis == 2 { subtract.clone() } else { Q::zero() };
        out_rows.push((w, bias, Activation::Identity));
    }
    let out = layer_from_rows(out_rows);

    let net = Dnn::new(vec![l1, l2, l3, l4, l5, l6, out]).expect("deep net is well formed");
    debug_assert_eq!(net.hidden_layers(), 6);
    Ok(CompiledInstance {
        net,
        x0: vec![Q::zero(); 3],
        target: deep_target(k),
        variant: Variant::Deep,
        layout: None,
    })
}

// ---------------------------------------------------------------------------
// Shallow compilation.
// ---------------------------------------------------------------------------

/// Compile the single-hidden-layer variant by stacking the deep layers as
/// seven tracks plus the one-hot ring.
pub fn compile_shallow(machine: &CounterMachine) -> Result<CompiledInstance, CompileError> {
    let deep = compile_deep(machine)?;
    let deep_layers = deep.net.layers();
    let tracks = deep_layers.len(); // 7

    let in_dims: Vec<usize> = deep_layers.iter().map(|l| l.input_dim()).collect();
    let out_dims: Vec<usize> = deep_layers.iter().map(|l| l.output_dim()).collect();
    let main_in: usize = in_dims.iter().sum();
    let main_hidden: usize = out_dims.iter().sum();
    let state_dim = main_in + 7;
    let hidden_dim = main_hidden + 7;

    let mut track_inputs = Vec::with_capacity(tracks);
    let mut offset = 0;
    for &d in &in_dims {
        track_inputs.push((offset, d));
        offset += d;
    }
    let modulo_inputs: Vec<usize> = (main_in..main_in + 7).collect();

    let mut track_hidden = Vec::with_capacity(tracks);
    let mut hoffset = 0;
    for &d in &out_dims {
        track_hidden.push((hoffset, d));
        hoffset += d;
    }
    let modulo_hidden: Vec<usize> = (main_hidden..main_hidden + 7).collect();

    // Hidden layer: each track is its deep layer (forced to ReLU; the
    // pre-activation values on meaningful states are nonnegative), reading
    // its own input slots; the ring wires pass through one ReLU each.
    let mut hidden_rows = Vec::with_capacity(hidden_dim);
    for (t, layer) in deep_layers.iter().enumerate() {
        let (istart, ilen) = track_inputs[t];
        for (row, bias) in layer.weights.iter().zip(&layer.biases) {
            let mut w = vec![Q::zero(); state_dim];
            w[istart..istart + ilen].clone_from_slice(row);
            hidden_rows.push((w, bias.clone(), Activation::ReLU));
        }
    }
    for &pos in &modulo_inputs {
        let mut w = vec![Q::zero(); state_dim];
        w[pos] = Q::one();
        hidden_rows.push((w, Q::zero(), Activation::ReLU));
    }
    let hidden = layer_from_rows(hidden_rows);

    // Output layer: track t writes track t + 1's input slots; the last
    // track wraps to track 1. Ring wires shift by one, also wrapping.
    let mut out_rows = Vec::with_capacity(state_dim);
    let mut writer_of_slot = vec![0usize; state_dim];
    for (t, &(istart, ilen)) in track_inputs.iter().enumerate() {
        let source = if t == 0 { tracks - 1 } else { t - 1 };
        let (hstart, hlen) = track_hidden[source];
        assert_eq!(ilen, hlen, "track interfaces must chain");
        for j in 0..ilen {
            writer_of_slot[istart + j] = hstart + j;
        }
    }
    for (j, &pos) in modulo_inputs.iter().enumerate() {
        let source = if j == 0 { 6 } else { j - 1 };
        writer_of_slot[pos] = modulo_hidden[source];
    }
    for &src in &writer_of_slot {
        let mut w = vec![Q::zero(); hidden_dim];
        w[src] = Q::one();
        out_rows.push((w, Q::zero(), Activation::Identity));
    }
    let out = layer_from_rows(out_rows);

    let net = Dnn::new(vec![hidden, out]).expect("shallow net is well formed");
    debug_assert_eq!(net.hidden_layers(), 1);

    // Start vector: machine configuration on track 1, zeros elsewhere,
    // ring at (1, 0, 0, 0, 0, 0, 0).
    let mut x0 = vec![Q::zero(); state_dim];
    x0[modulo_inputs[0]] = Q::one();

    // Target: the deep target on track 1 plus first ring wire = 1.
    let k = machine.len();
    let stop = q_int(k as i64 - 1);
    let unit = |i: usize, sign: i64| {
        let mut a = vec![Q::zero(); state_dim];
        a[i] = q_int(sign);
        a
    };
    let m1 = modulo_inputs[0];
    let target = PolyUnion::from_poly(Polyhedron::new(
        state_dim,
        vec![
            LinearConstraint::le(unit(2, 1), stop.clone()),
            LinearConstraint::le(unit(2, -1), -stop),
            LinearConstraint::le(unit(0, -1), Q::zero()),
            LinearConstraint::le(unit(1, -1), Q::zero()),
            LinearConstraint::le(unit(m1, 1), Q::one()),
            LinearConstraint::le(unit(m1, -1), -Q::one()),
        ],
    ));

    Ok(CompiledInstance {
        net,
        x0,
        target,
        variant: Variant::Shallow,
        layout: Some(TrackLayout {
            track_inputs,
            track_hidden,
            modulo_inputs,
            modulo_hidden,
        }),
    })
}

// ---------------------------------------------------------------------------
// Differential checking against the interpreter.
// ---------------------------------------------------------------------------

/// Outcome of running the interpreter and a compiled network side by side.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleReport {
    Equivalent {
        steps: usize,
    },
    Diverged {
        step: usize,
        expected: Vec<Q>,
        got: Vec<Q>,
    },
}

/// Interpreter states expected at iterations `0..=steps`: the trace, with
/// the halting configuration repeated once the machine stops (the compiled
/// network computes the identity there).
fn expected_states(machine: &CounterMachine, steps: usize) -> Vec<Vec<Q>> {
    let (trace, _) = crate::counter_machine::run(machine, steps);
    let mut out: Vec<Vec<Q>> = trace.iter().map(config_vec).collect();
    while out.len() < steps + 1 {
        out.push(out.last().expect("trace nonempty").clone());
    }
    out
}

/// Run the compiled loop for `steps` iterations and compare with the
/// interpreter. For the shallow variant only every seventh iteration's main
/// track is compared; the in-between iterations are internal.
pub fn verify_against_interpreter(
    machine: &CounterMachine,
    variant: Variant,
    steps: usize,
) -> Result<OracleReport, CompileOrRunError> {
    let inst = match variant {
        Variant::Deep => compile_deep(machine)?,
        Variant::Shallow => compile_shallow(machine)?,
    };
    verify_instance_against_interpreter(machine, &inst, steps)
}

/// As [`verify_against_interpreter`], but over an already-built (possibly
/// tampered-with) instance; this is what makes the checker itself testable.
pub fn verify_instance_against_interpreter(
    machine: &CounterMachine,
    inst: &CompiledInstance,
    steps: usize,
) -> Result<OracleReport, CompileOrRunError> {
    let sys = inst.nncs();
    let traj = nncs_trajectory(&sys, &inst.x0, steps)?;
    match inst.variant {
        Variant::Deep => {
            let expected = expected_states(machine, steps);
            for (step, (got, want)) in traj.iter().zip(&expected).enumerate() {
                if got != want {
                    return Ok(OracleReport::Diverged {
                        step,
                        expected: want.clone(),
                        got: got.clone(),
                    });
                }
            }
        }
        Variant::Shallow => {
            let expected = expected_states(machine, steps / 7);
            for (idx, want) in expected.iter().enumerate().take(steps / 7 + 1) {
                let got = &traj[7 * idx][..3];
                if got != &want[..] {
                    return Ok(OracleReport::Diverged {
                        step: 7 * idx,
                        expected: want.clone(),
                        got: got.to_vec(),
                    });
                }
            }
        }
    }
    Ok(OracleReport::Equivalent { steps })
}

/// Errors from compiling or running a compiled loop.
#[derive(Debug, Error)]
pub enum CompileOrRunError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Run(#[from] PlantError),
}

/// Evaluate the network of a compiled instance on one state.
pub fn compiled_step(inst: &CompiledInstance, state: &[Q]) -> Vec<Q> {
    evaluate(&inst.net, state).expect("state dimension matches compiled net")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter_machine::{corpus, parse_machine, run, step};
    use crate::rational::q_int;
    use rand::{Rng, SeedableRng};

    fn qv(vals: &[i64]) -> Vec<Q> {
        vals.iter().map(|&v| q_int(v)).collect()
    }

    fn eval(net: &Dnn, x: &[Q]) -> Vec<Q> {
        evaluate(net, x).unwrap()
    }

    #[test]
    fn aux_gadget_is_the_line_indicator() {
        let gadget = build_aux_gadget(3);
        for pc in 0..10i64 {
            let want = if pc == 3 { 1 } else { 0 };
            assert_eq!(eval(&gadget.net, &qv(&[pc])), qv(&[want]), "pc = {pc}");
        }
        // Hand-evaluated interior values: pc = 7 gives ReLU(5 - 2*4) = 0.
        assert_eq!(eval(&build_aux_gadget(3).net, &qv(&[7])), qv(&[0]));
    }

    #[test]
    fn inc_gadget_table() {
        let l = 4i64;
        let g = build_inc_gadget(4, 0);
        assert_eq!(eval(&g.net, &qv(&[2, 5, l, 1])), qv(&[3, 5, l + 1]));
        assert_eq!(eval(&g.net, &qv(&[2, 5, l + 1, 0])), qv(&[2, 5, l + 1]));
        assert_eq!(eval(&g.net, &qv(&[0, 0, l, 1])), qv(&[1, 0, l + 1]));
        let g1 = build_inc_gadget(4, 1);
        assert_eq!(eval(&g1.net, &qv(&[2, 5, l, 1])), qv(&[2, 6, l + 1]));
    }

    #[test]
    fn dec_gadget_table_clamps() {
        let l = 2i64;
        let g = build_dec_gadget(2, 0);
        assert_eq!(eval(&g.net, &qv(&[0, 9, l, 1])), qv(&[0, 9, l + 1]));
        assert_eq!(eval(&g.net, &qv(&[4, 9, l, 1])), qv(&[3, 9, l + 1]));
        assert_eq!(eval(&g.net, &qv(&[4, 9, l + 2, 0])), qv(&[4, 9, l + 2]));
    }

    #[test]
    fn jz_gadget_table() {
        // line 1, target 4: jump when active and counter zero.
        let g = build_jz_gadget(1, 0, 4);
        assert_eq!(eval(&g.net, &qv(&[0, 2, 1, 1])), qv(&[0, 2, 4]));
        assert_eq!(eval(&g.net, &qv(&[5, 2, 1, 1])), qv(&[5, 2, 2]));
        assert_eq!(eval(&g.net, &qv(&[5, 2, 4, 0])), qv(&[5, 2, 4]));
        // Backward jump, including to line 0.
        let g = build_jz_gadget(3, 1, 0);
        assert_eq!(eval(&g.net, &qv(&[7, 0, 3, 1])), qv(&[7, 0, 0]));
        assert_eq!(eval(&g.net, &qv(&[7, 2, 3, 1])), qv(&[7, 2, 4]));
    }

    #[test]
    fn padded_gadget_evaluates_identically_on_machine_states() {
        // Depth padding must not disturb gadget outputs on the nonnegative
        // values the compiler forwards.
        let gadget = build_inc_gadget(5, 0);
        let padded = crate::dnn::pad_with_passthrough(&gadget.net, 4).unwrap();
        for input in [qv(&[2, 0, 5, 0]), qv(&[2, 0, 5, 1]), qv(&[0, 7, 3, 0])] {
            assert_eq!(
                eval(&padded, &input),
                eval(&gadget.net, &input),
                "padding changed {input:?}"
            );
        }
    }

    #[test]
    fn gadget_dims_match_their_contract() {
        let aux = build_aux_gadget(0);
        assert_eq!((aux.net.input_dim(), aux.net.output_dim()), (1, 1));
        for g in [
            build_inc_gadget(0, 1),
            build_dec_gadget(2, 0),
            build_jz_gadget(1, 1, 3),
        ] {
            assert_eq!((g.net.input_dim(), g.net.output_dim()), (4, 3));
        }
    }

    #[test]
    fn deep_compile_single_inc() {
        let m = parse_machine("INC 0\nSTOP").unwrap();
        let inst = compile_deep(&m).unwrap();
        assert_eq!(inst.net.hidden_layers(), 6);
        assert_eq!(eval(&inst.net, &qv(&[0, 0, 0])), qv(&[1, 0, 1]));
        // On the stop line the network computes the identity.
        assert_eq!(eval(&inst.net, &qv(&[1, 0, 1])), qv(&[1, 0, 1]));
        assert_eq!(eval(&inst.net, &qv(&[5, 9, 1])), qv(&[5, 9, 1]));
        // Start and target.
        assert_eq!(inst.x0, qv(&[0, 0, 0]));
        assert!(inst.target.contains(&qv(&[1, 0, 1])).unwrap());
        assert!(!inst.target.contains(&qv(&[1, 0, 0])).unwrap());
    }

    #[test]
    fn deep_first_hidden_layer_has_width_k_plus_one() {
        for (_, m) in corpus::machines() {
            let inst = compile_deep(&m).unwrap();
            assert_eq!(inst.net.layers()[0].output_dim(), m.len() + 1);
        }
    }

    #[test]
    fn deep_architecture_conformance() {
        for (name, m) in corpus::machines() {
            let inst = compile_deep(&m).unwrap();
            assert_eq!(inst.net.hidden_layers(), 6, "{name}");
            assert_eq!(inst.net.input_dim(), 3, "{name}");
            assert_eq!(inst.net.output_dim(), 3, "{name}");
            let layers = inst.net.layers();
            for (i, layer) in layers.iter().enumerate() {
                let want = if i + 1 == layers.len() {
                    Activation::Identity
                } else {
                    Activation::ReLU
                };
                assert!(layer.activations.iter().all(|a| *a == want), "{name}");
                for row in &layer.weights {
                    assert!(
                        row.iter().all(crate::rational::is_integral),
                        "{name}: fractional weight"
                    );
                }
                assert!(
                    layer.biases.iter().all(crate::rational::is_integral),
                    "{name}: fractional bias"
                );
            }
        }
    }

    #[test]
    fn deep_step_equals_interpreter_on_corpus() {
        for (name, m) in corpus::machines() {
            let inst = compile_deep(&m).unwrap();
            let (trace, _) = run(&m, 200);
            for config in &trace {
                let got = eval(&inst.net, &config_vec(config));
                let want = match step(&m, config) {
                    Some(next) => config_vec(&next),
                    None => config_vec(config),
                };
                assert_eq!(got, want, "{name}: divergence at {config}");
            }
        }
    }

    #[test]
    fn deep_step_equals_interpreter_from_random_midrun_states() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for (name, m) in corpus::machines() {
            let inst = compile_deep(&m).unwrap();
            for _ in 0..25 {
                let config = Configuration::new(
                    rng.gen_range(0..m.len()),
                    rng.gen_range(0..60),
                    rng.gen_range(0..60),
                );
                let got = eval(&inst.net, &config_vec(&config));
                let want = match step(&m, &config) {
                    Some(next) => config_vec(&next),
                    None => config_vec(&config),
                };
                assert_eq!(got, want, "{name}: divergence at {config}");
            }
        }
    }

    #[test]
    fn halting_matches_target_membership() {
        for (name, m) in corpus::machines() {
            let inst = compile_deep(&m).unwrap();
            let sys = inst.nncs();
            let traj = nncs_trajectory(&sys, &inst.x0, 200).unwrap();
            let (trace, halted) = run(&m, 200);
            let hit = traj
                .iter()
                .position(|x| inst.target.contains(x).unwrap());
            if halted {
                assert_eq!(hit, Some(trace.len() - 1), "{name}: wrong hit step");
            } else {
                assert_eq!(hit, None, "{name}: spurious target hit");
            }
        }
    }

    #[test]
    fn shallow_is_one_hidden_layer_with_ring() {
        let m = parse_machine("INC 0\nSTOP").unwrap();
        let inst = compile_shallow(&m).unwrap();
        assert_eq!(inst.net.hidden_layers(), 1);
        let layout = inst.layout.as_ref().unwrap();
        assert_eq!(layout.modulo_inputs.len(), 7);
        assert_eq!(layout.track_inputs.len(), 7);
        // Ranges are disjoint and cover the hidden layer.
        let hidden_dim = inst.net.layers()[0].output_dim();
        let mut seen = vec![false; hidden_dim];
        for &(start, len) in &layout.track_hidden {
            for flag in &mut seen[start..start + len] {
                assert!(!*flag, "hidden overlap");
                *flag = true;
            }
        }
        for &slot in &layout.modulo_hidden {
            assert!(!seen[slot], "hidden overlap");
            seen[slot] = true;
        }
        assert!(seen.into_iter().all(|covered| covered));
        // First track of the hidden layer has width k + 1.
        assert_eq!(layout.track_hidden[0].1, m.len() + 1);
    }

    #[test]
    fn shallow_ring_cycles_with_period_seven() {
        let m = parse_machine("INC 0\nSTOP").unwrap();
        let inst = compile_shallow(&m).unwrap();
        let layout = inst.layout.clone().unwrap();
        let sys = inst.nncs();
        let traj = nncs_trajectory(&sys, &inst.x0, 21).unwrap();
        for (t, state) in traj.iter().enumerate() {
            let ring: Vec<Q> = layout
                .modulo_inputs
                .iter()
                .map(|&i| state[i].clone())
                .collect();
            let mut want = vec![Q::zero(); 7];
            want[t % 7] = Q::one();
            assert_eq!(ring, want, "ring at iteration {t}");
        }
    }

    #[test]
    fn shallow_seven_iterations_match_deep_one() {
        for (name, m) in corpus::machines().into_iter().take(8) {
            let deep = compile_deep(&m).unwrap();
            let shallow = compile_shallow(&m).unwrap();
            let dsys = deep.nncs();
            let ssys = shallow.nncs();
            let dtraj = nncs_trajectory(&dsys, &deep.x0, 8).unwrap();
            let straj = nncs_trajectory(&ssys, &shallow.x0, 56).unwrap();
            for t in 0..=8 {
                assert_eq!(
                    &straj[7 * t][..3],
                    &dtraj[t][..],
                    "{name}: main-track mismatch at deep step {t}"
                );
            }
        }
    }

    #[test]
    fn shallow_target_only_in_phase() {
        // A machine halting in one step: the shallow loop must hit the
        // target exactly at iteration 7, never off-phase.
        let m = parse_machine("INC 0\nSTOP").unwrap();
        let inst = compile_shallow(&m).unwrap();
        let sys = inst.nncs();
        let traj = nncs_trajectory(&sys, &inst.x0, 28).unwrap();
        for (t, state) in traj.iter().enumerate() {
            let inside = inst.target.contains(state).unwrap();
            if t % 7 != 0 {
                assert!(!inside, "off-phase hit at {t}");
            } else {
                assert_eq!(inside, t >= 7, "phase hit mismatch at {t}");
            }
        }
    }

    #[test]
    fn compile_rejects_stop_only() {
        let m = parse_machine("STOP").unwrap();
        assert!(matches!(
            compile_deep(&m),
            Err(CompileError::TooShort(1))
        ));
        assert!(matches!(
            compile_shallow(&m),
            Err(CompileError::TooShort(1))
        ));
    }

    #[test]
    fn verify_oracle_reports_equivalence_and_divergence() {
        let m = parse_machine("INC 0\nINC 1\nSTOP").unwrap();
        assert_eq!(
            verify_against_interpreter(&m, Variant::Deep, 50).unwrap(),
            OracleReport::Equivalent { steps: 50 }
        );
        assert_eq!(
            verify_against_interpreter(&m, Variant::Shallow, 49).unwrap(),
            OracleReport::Equivalent { steps: 49 }
        );
        // Fault injection: a perturbed weight must be caught.
        let mut inst = compile_deep(&m).unwrap();
        let mut layers = inst.net.layers().to_vec();
        layers[6].weights[0][0] += Q::one();
        inst.net = Dnn::new(layers).unwrap();
        let sys = inst.nncs();
        let traj = nncs_trajectory(&sys, &inst.x0, 10).unwrap();
        let expected = expected_states(&m, 10);
        assert!(
            traj.iter().zip(&expected).any(|(got, want)| got != want),
            "fault injection must diverge"
        );
    }
}
