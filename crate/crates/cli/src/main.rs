//! Command-line front end: interpret counter machines, compile them to
//! network control loops, run trajectories, check reachability, and
//! cross-verify compiled networks against the interpreter.
//!
//! Exit codes form a stable contract:
//!   0  success (halted / compiled / ran / reached / equivalent)
//!   1  malformed input (parse or load failure)
//!   2  interpreter budget exhausted
//!   3  reachability unknown within the bound
//!   4  witness replay failure (an internal inconsistency, reported loudly)
//!   5  oracle divergence (compiled network disagrees with the interpreter)
//!
//! Verbosity is controlled by the NNCS_REACH_LOG environment variable
//! (off|info|debug).

use clap::{Parser, Subcommand};
use reachnn::bundle::Bundle;
use reachnn::compiler::{
    compile_deep, compile_shallow, verify_against_interpreter,
    verify_instance_against_interpreter, OracleReport, Variant,
};
use reachnn::counter_machine::{parse_machine, run};
use reachnn::plant::nncs_trajectory;
use reachnn::rational::format_q;
use reachnn::semidecider::{semi_decide, ReachError, ReachResult};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "reachnn", version, about = "Exact reachability for network control loops")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum VariantArg {
    Deep,
    Shallow,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Deep => Variant::Deep,
            VariantArg::Shallow => Variant::Shallow,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a counter machine and print its trace, one "pc c0 c1" per line.
    Interpret {
        machine_file: PathBuf,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
    },
    /// Compile a counter machine into an instance bundle.
    Compile {
        machine_file: PathBuf,
        #[arg(long, value_enum, default_value = "deep")]
        variant: VariantArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a bundle's control loop from its start vector.
    Run {
        bundle_path: PathBuf,
        #[arg(long)]
        steps: usize,
    },
    /// Semi-decide reachability for a bundle; prints the result as JSON.
    Check {
        bundle_path: PathBuf,
        #[arg(long)]
        max_k: usize,
    },
    /// Run the interpreter and the compiled loop side by side.
    VerifyOracle {
        machine_file: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum, default_value = "deep")]
        variant: VariantArg,
        /// Perturb one compiled weight before comparing; exercises the
        /// divergence reporting path.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("NNCS_REACH_LOG", "off"),
    )
    .format_timestamp(None)
    .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Interpret {
            machine_file,
            max_steps,
        } => interpret(&machine_file, max_steps),
        Command::Compile {
            machine_file,
            variant,
            out,
        } => compile(&machine_file, variant.into(), &out),
        Command::Run { bundle_path, steps } => run_bundle(&bundle_path, steps),
        Command::Check { bundle_path, max_k } => check(&bundle_path, max_k),
        Command::VerifyOracle {
            machine_file,
            steps,
            variant,
            inject_fault,
        } => verify_oracle(&machine_file, steps, variant.into(), inject_fault),
    }
}

fn fail(message: String) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(1)
}

fn load_machine(path: &Path) -> Result<reachnn::counter_machine::CounterMachine, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_machine(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_bundle(path: &Path) -> Result<Bundle, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Bundle::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn interpret(machine_file: &Path, max_steps: usize) -> ExitCode {
    let machine = match load_machine(machine_file) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let (trace, halted) = run(&machine, max_steps);
    for config in &trace {
        println!("{config}");
    }
    if halted {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn compile(machine_file: &Path, variant: Variant, out: &Path) -> ExitCode {
    let machine = match load_machine(machine_file) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let compiled = match variant {
        Variant::Deep => compile_deep(&machine),
        Variant::Shallow => compile_shallow(&machine),
    };
    let compiled = match compiled {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let bundle = Bundle::from_compiled(&compiled);
    if let Err(e) = std::fs::write(out, bundle.to_json()) {
        return fail(format!("{}: {e}", out.display()));
    }
    println!(
        "compiled {} ({:?}): {} inputs, {} hidden layers, wrote {}",
        machine_file.display(),
        compiled.variant,
        compiled.net.input_dim(),
        compiled.net.hidden_layers(),
        out.display()
    );
    ExitCode::SUCCESS
}

fn run_bundle(bundle_path: &Path, steps: usize) -> ExitCode {
    let bundle = match load_bundle(bundle_path) {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    let instance = match bundle.instance() {
        Ok(i) => i,
        Err(e) => return fail(e.to_string()),
    };
    let x0 = match bundle.start_vector() {
        Ok(x) => x,
        Err(e) => return fail(e.to_string()),
    };
    let trajectory = match nncs_trajectory(&instance.nncs(), &x0, steps) {
        Ok(t) => t,
        Err(e) => return fail(e.to_string()),
    };
    for (k, state) in trajectory.iter().enumerate() {
        let rendered: Vec<String> = state.iter().map(format_q).collect();
        let inside = match instance.target.contains(state) {
            Ok(b) => b,
            Err(e) => return fail(e.to_string()),
        };
        let marker = if inside { "  <- target" } else { "" };
        println!("{k}: ({}){marker}", rendered.join(", "));
    }
    ExitCode::SUCCESS
}

fn check(bundle_path: &Path, max_k: usize) -> ExitCode {
    let bundle = match load_bundle(bundle_path) {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    let instance = match bundle.instance() {
        Ok(i) => i,
        Err(e) => return fail(e.to_string()),
    };
    match semi_decide(&instance, max_k) {
        Ok(result) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&result).expect("results serialize")
            );
            match result {
                ReachResult::Reached { .. } => ExitCode::SUCCESS,
                ReachResult::Unknown { .. } => ExitCode::from(3),
            }
        }
        Err(e @ ReachError::WitnessReplay { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(4)
        }
        Err(e) => fail(e.to_string()),
    }
}

fn verify_oracle(machine_file: &Path, steps: usize, variant: Variant, inject_fault: bool) -> ExitCode {
    let machine = match load_machine(machine_file) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let report = if inject_fault {
        let compiled = match variant {
            Variant::Deep => compile_deep(&machine),
            Variant::Shallow => compile_shallow(&machine),
        };
        let mut compiled = match compiled {
            Ok(c) => c,
            Err(e) => return fail(e.to_string()),
        };
        let mut layers = compiled.net.layers().to_vec();
        let last = layers.len() - 1;
        layers[last].biases[0] += reachnn::rational::q_int(1);
        compiled.net = match reachnn::dnn::Dnn::new(layers) {
            Ok(net) => net,
            Err(e) => return fail(e.to_string()),
        };
        verify_instance_against_interpreter(&machine, &compiled, steps)
    } else {
        verify_against_interpreter(&machine, variant, steps)
    };
    match report {
        Ok(OracleReport::Equivalent { steps }) => {
            println!("equivalent for {steps} steps");
            ExitCode::SUCCESS
        }
        Ok(OracleReport::Diverged {
            step,
            expected,
            got,
        }) => {
            let expected: Vec<String> = expected.iter().map(format_q).collect();
            let got: Vec<String> = got.iter().map(format_q).collect();
            println!(
                "divergence at step {step}: interpreter ({}) vs network ({})",
                expected.join(", "),
                got.join(", ")
            );
            ExitCode::from(5)
        }
        Err(e) => fail(e.to_string()),
    }
}
