//! Two-counter machines: text format, validation, and an exact interpreter.
//!
//! A machine is a list of instructions with implicit 0-based line numbers.
//! The last line is `STOP` and no other line is. `JZ i t` jumps to line `t`
//! when counter `i` is zero and falls through otherwise; `DEC` clamps at
//! zero. The interpreter is the ground truth the network compiler is tested
//! against, so it stays as small and literal as possible.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use std::fmt;
use thiserror::Error;

/// A single machine instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    /// Increment counter `i`, fall through.
    Inc(usize),
    /// Decrement counter `i` (clamped at zero), fall through.
    Dec(usize),
    /// Jump to `target` if counter `i` is zero, else fall through.
    Jz(usize, usize),
    /// Halt. Only legal as the last instruction.
    Stop,
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Inc(i) => write!(f, "INC {i}"),
            Instruction::Dec(i) => write!(f, "DEC {i}"),
            Instruction::Jz(i, t) => write!(f, "JZ {i} {t}"),
            Instruction::Stop => write!(f, "STOP"),
        }
    }
}

/// A validated two-counter machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterMachine {
    instructions: Vec<Instruction>,
}

/// A machine configuration: program counter plus the two counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub pc: usize,
    pub c0: BigUint,
    pub c1: BigUint,
}

impl Configuration {
    /// The initial configuration `(0, 0, 0)`.
    pub fn initial() -> Self {
        Configuration {
            pc: 0,
            c0: BigUint::zero(),
            c1: BigUint::zero(),
        }
    }

    pub fn new(pc: usize, c0: u64, c1: u64) -> Self {
        Configuration {
            pc,
            c0: BigUint::from(c0),
            c1: BigUint::from(c1),
        }
    }

    fn counter(&self, i: usize) -> &BigUint {
        if i == 0 {
            &self.c0
        } else {
            &self.c1
        }
    }

    fn counter_mut(&mut self, i: usize) -> &mut BigUint {
        if i == 0 {
            &mut self.c0
        } else {
            &mut self.c1
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.pc, self.c0, self.c1)
    }
}

/// Errors from parsing or validating a machine.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MachineError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: counter index {index} not in {{0, 1}}")]
    BadCounter { line: usize, index: String },
    #[error("line {line}: JZ target {target} out of range (program has {len} lines)")]
    JumpOutOfRange {
        line: usize,
        target: usize,
        len: usize,
    },
    #[error("program is empty")]
    Empty,
    #[error("line {line}: STOP may only appear as the last instruction")]
    MisplacedStop { line: usize },
    #[error("last instruction must be STOP, found {found:?}")]
    MissingStop { found: String },
}

impl CounterMachine {
    /// Validate and build a machine from raw instructions.
    pub fn new(instructions: Vec<Instruction>) -> Result<Self, MachineError> {
        if instructions.is_empty() {
            return Err(MachineError::Empty);
        }
        let len = instructions.len();
        for (line, instr) in instructions.iter().enumerate() {
            let counter = match instr {
                Instruction::Inc(i) | Instruction::Dec(i) | Instruction::Jz(i, _) => Some(*i),
                Instruction::Stop => None,
            };
            if let Some(i) = counter {
                if i > 1 {
                    return Err(MachineError::BadCounter {
                        line,
                        index: i.to_string(),
                    });
                }
            }
            if let Instruction::Jz(_, target) = instr {
                if *target >= len {
                    return Err(MachineError::JumpOutOfRange {
                        line,
                        target: *target,
                        len,
                    });
                }
            }
            match (instr, line == len - 1) {
                (Instruction::Stop, false) => {
                    return Err(MachineError::MisplacedStop { line });
                }
                (other, true) if *other != Instruction::Stop => {
                    return Err(MachineError::MissingStop {
                        found: other.to_string(),
                    });
                }
                _ => {}
            }
        }
        Ok(CounterMachine { instructions })
    }

    /// Number of lines, including the final `STOP`.
    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn instruction(&self, line: usize) -> &Instruction {
        &self.instructions[line]
    }

    /// The line number of the final `STOP`.
    pub fn stop_line(&self) -> usize {
        self.instructions.len() - 1
    }

    /// Render back to the one-instruction-per-line text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for instr in &self.instructions {
            out.push_str(&instr.to_string());
            out.push('\n');
        }
        out
    }
}

/// Parse the text format: one instruction per line, `#` comments, blank
/// lines ignored. Line numbers are implicit and 0-based.
pub fn parse_machine(text: &str) -> Result<CounterMachine, MachineError> {
    let mut instructions = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let line = instructions.len();
        let syntax = |reason: &str| MachineError::Syntax {
            line,
            reason: format!("{reason} (source line {})", line_no + 1),
        };
        let mut tokens = stripped.split_whitespace();
        let op = tokens.next().expect("nonempty line has a token");
        let parse_counter = |tok: Option<&str>| -> Result<usize, MachineError> {
            let tok = tok.ok_or_else(|| syntax("missing counter index"))?;
            match tok {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(MachineError::BadCounter {
                    line,
                    index: other.to_string(),
                }),
            }
        };
        let instr = match op {
            "INC" => Instruction::Inc(parse_counter(tokens.next())?),
            "DEC" => Instruction::Dec(parse_counter(tokens.next())?),
            "JZ" => {
                let i = parse_counter(tokens.next())?;
                let target = tokens
                    .next()
                    .ok_or_else(|| syntax("missing jump target"))?
                    .parse::<usize>()
                    .map_err(|_| syntax("jump target is not a number"))?;
                Instruction::Jz(i, target)
            }
            "STOP" => Instruction::Stop,
            other => return Err(syntax(&format!("unknown instruction {other:?}"))),
        };
        if tokens.next().is_some() {
            return Err(syntax("trailing tokens"));
        }
        instructions.push(instr);
    }
    CounterMachine::new(instructions)
}

/// One step of the machine. Returns `None` exactly when the current
/// instruction is `STOP`.
pub fn step(machine: &CounterMachine, config: &Configuration) -> Option<Configuration> {
    assert!(config.pc < machine.len(), "pc out of range");
    let mut next = config.clone();
    match machine.instruction(config.pc) {
        Instruction::Inc(i) => {
            *next.counter_mut(*i) += BigUint::one();
            next.pc += 1;
        }
        Instruction::Dec(i) => {
            let c = next.counter_mut(*i);
            if !c.is_zero() {
                *c -= BigUint::one();
            }
            next.pc += 1;
        }
        Instruction::Jz(i, target) => {
            if config.counter(*i).is_zero() {
                next.pc = *target;
            } else {
                next.pc += 1;
            }
        }
        Instruction::Stop => return None,
    }
    Some(next)
}

/// Run from the initial configuration `(0, 0, 0)` for at most `max_steps`
/// steps. Returns the trace (including the start) and whether `STOP` was
/// reached within the budget.
pub fn run(machine: &CounterMachine, max_steps: usize) -> (Vec<Configuration>, bool) {
    run_from(machine, Configuration::initial(), max_steps)
}

/// Run from an arbitrary configuration; used for differential testing of the
/// compiler on mid-run states.
pub fn run_from(
    machine: &CounterMachine,
    start: Configuration,
    max_steps: usize,
) -> (Vec<Configuration>, bool) {
    let mut trace = vec![start];
    for _ in 0..max_steps {
        match step(machine, trace.last().expect("trace nonempty")) {
            Some(next) => trace.push(next),
            None => return (trace, true),
        }
    }
    // The budget is spent; the machine halted iff the final configuration
    // sits on STOP.
    let halted = matches!(
        machine.instruction(trace.last().expect("trace nonempty").pc),
        Instruction::Stop
    );
    (trace, halted)
}

/// A small fixed corpus of machines used across the test suite: named,
/// hand-checked programs covering every instruction, clamping, backward
/// jumps, and both halting and diverging behavior.
pub mod corpus {
    use super::{parse_machine, CounterMachine};

    /// All corpus machines as `(name, machine)`, every one with at least two
    /// lines so it is compilable.
    pub fn machines() -> Vec<(&'static str, CounterMachine)> {
        SOURCES
            .iter()
            .map(|(name, text)| {
                let machine = parse_machine(text)
                    .unwrap_or_else(|e| panic!("corpus machine {name} invalid: {e}"));
                (*name, machine)
            })
            .collect()
    }

    /// Sources for the corpus. Kept as plain text so the parser is exercised
    /// on every use.
    pub const SOURCES: &[(&str, &str)] = &[
        ("inc0", "INC 0\nSTOP\n"),
        ("inc1", "INC 1\nSTOP\n"),
        ("dec0_clamp", "DEC 0\nSTOP\n"),
        ("dec1_clamp", "DEC 1\nSTOP\n"),
        ("jz0_self", "JZ 0 0\nSTOP\n"),
        ("jz1_self", "JZ 1 0\nSTOP\n"),
        ("jz0_fall", "JZ 0 1\nSTOP\n"),
        ("jz1_to_stop", "JZ 1 1\nSTOP\n"),
        ("inc_chain", "INC 0\nINC 0\nINC 1\nINC 0\nSTOP\n"),
        ("dec_after_inc", "INC 0\nDEC 0\nDEC 0\nSTOP\n"),
        ("jump_to_stop", "JZ 0 4\nINC 0\nINC 1\nINC 0\nSTOP\n"),
        ("jump_not_taken", "INC 0\nJZ 0 0\nINC 1\nSTOP\n"),
        // Drains c0 into c1; the clamped DEC keeps c0 at zero so the
        // backward JZ fires forever once the transfer is done.
        (
            "copy_pump",
            "INC 0\nINC 0\nDEC 0\nINC 1\nJZ 0 2\nDEC 0\nINC 1\nJZ 0 2\nSTOP\n",
        ),
        // Pumps c1 by two per cycle via a backward jump on the untouched c0.
        ("double_pump", "INC 1\nINC 1\nJZ 0 0\nSTOP\n"),
        // Branching dance over both counters; halts after eight steps.
        (
            "collatzish",
            "INC 0\nINC 0\nINC 0\nJZ 0 8\nDEC 0\nINC 1\nJZ 1 3\nJZ 0 3\nSTOP\n",
        ),
        ("both_counters", "INC 0\nINC 1\nINC 1\nDEC 0\nJZ 0 6\nINC 0\nSTOP\n"),
        ("zigzag", "JZ 1 2\nINC 0\nINC 1\nJZ 0 5\nDEC 1\nSTOP\n"),
        ("dec_loop", "INC 1\nDEC 1\nJZ 1 5\nINC 0\nINC 0\nSTOP\n"),
        ("spin_late", "INC 0\nINC 1\nDEC 0\nJZ 0 2\nSTOP\n"),
        ("stop_quick", "JZ 0 2\nINC 0\nSTOP\n"),
        ("never_zero", "INC 0\nJZ 1 0\nSTOP\n"),
        ("wide_jumps", "JZ 0 3\nINC 0\nJZ 1 0\nINC 1\nJZ 0 7\nDEC 0\nJZ 1 3\nSTOP\n"),
    ];
}
