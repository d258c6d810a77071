//! Shared generators for the integration suites: seeded machines, nets,
//! constraints, and rational points. Everything is deterministic under a
//! fixed seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use reachnn::counter_machine::{CounterMachine, Instruction};
use reachnn::dnn::{Activation, Dnn, Layer};
use reachnn::geometry::{LinearConstraint, Rel};
use reachnn::rational::{q_int, q_ratio, Q};

/// A random valid machine with `2 <= k <= max_len` lines (last is STOP).
pub fn random_machine(rng: &mut ChaCha8Rng, max_len: usize) -> CounterMachine {
    let body = rng.gen_range(1..max_len);
    let k = body + 1;
    let mut instructions = Vec::with_capacity(k);
    for _ in 0..body {
        let counter = rng.gen_range(0..2);
        instructions.push(match rng.gen_range(0..3) {
            0 => Instruction::Inc(counter),
            1 => Instruction::Dec(counter),
            _ => Instruction::Jz(counter, rng.gen_range(0..k)),
        });
    }
    instructions.push(Instruction::Stop);
    CounterMachine::new(instructions).expect("generated machines are valid")
}

/// A random rational with numerator in `[-num_bound, num_bound]` and
/// denominator in `[1, den_bound]`.
pub fn random_rational(rng: &mut ChaCha8Rng, num_bound: i64, den_bound: i64) -> Q {
    q_ratio(
        rng.gen_range(-num_bound..=num_bound),
        rng.gen_range(1..=den_bound),
    )
}

/// A random linear constraint over `dim` variables with integer
/// coefficients in `[-8, 8]`.
pub fn random_constraint(rng: &mut ChaCha8Rng, dim: usize) -> (LinearConstraint, bool) {
    let a: Vec<Q> = (0..dim).map(|_| q_int(rng.gen_range(-8..=8))).collect();
    let b = q_int(rng.gen_range(-8..=8));
    // The third relation (equality) has no geometry counterpart as a single
    // constraint; report it separately.
    match rng.gen_range(0..3) {
        0 => (LinearConstraint { a, b, rel: Rel::Le }, false),
        1 => (LinearConstraint { a, b, rel: Rel::Lt }, false),
        _ => (LinearConstraint { a, b, rel: Rel::Le }, true),
    }
}

/// A random network with at most `max_layers` layers of at most
/// `max_width` neurons, weights and biases in `[-2, 2]` (halves allowed).
pub fn random_net(rng: &mut ChaCha8Rng, inputs: usize, max_layers: usize, max_width: usize) -> Dnn {
    let layers = rng.gen_range(1..=max_layers);
    let mut dims = vec![inputs];
    for _ in 0..layers {
        dims.push(rng.gen_range(1..=max_width));
    }
    let coeff = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.25) {
            q_ratio(rng.gen_range(-4..=4), 2)
        } else {
            q_int(rng.gen_range(-2..=2))
        }
    };
    let built: Vec<Layer> = (0..layers)
        .map(|l| {
            let m = dims[l];
            let n = dims[l + 1];
            let weights = (0..n)
                .map(|_| (0..m).map(|_| coeff(rng)).collect())
                .collect();
            let biases = (0..n).map(|_| coeff(rng)).collect();
            let act = if l + 1 == layers {
                Activation::Identity
            } else {
                Activation::ReLU
            };
            Layer::new(weights, biases, vec![act; n])
        })
        .collect();
    Dnn::new(built).expect("generated nets are well formed")
}
