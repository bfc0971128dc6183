// SPDX-License-Identifier: Apache-2.0

//! `hwsem`: run, check and format hw/comb/seq/sv designs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hwsem::dialect::sv::Termination;
use hwsem::mlir::{parse, print, state::preprocess};
use hwsem::sim::{run, Stimulus};
use hwsem::{Error, SimConfig, Simulator};

#[derive(Parser)]
#[command(name = "hwsem", version, about = "Cycle-level simulator for hw/comb/seq/sv MLIR")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a design under a JSON stimulus and write a VCD trace.
    Run {
        design: PathBuf,
        #[arg(long)]
        top: String,
        #[arg(long)]
        stim: PathBuf,
        #[arg(long)]
        vcd: PathBuf,
        /// Per-cycle evaluation budget.
        #[arg(long)]
        max_eval_steps: Option<u64>,
        /// Trace every value, not just ports and named state.
        #[arg(long)]
        trace_all: bool,
        /// Randomize the evaluation order with this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write sv task output here instead of standard output.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Parse and preprocess, then print the symbol table.
    Check { design: PathBuf },
    /// Print the design in generic form.
    Fmt { design: PathBuf },
}

const EXIT_PARSE: u8 = 1;
const EXIT_RUNTIME: u8 = 3;
const EXIT_ASSERT: u8 = 4;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn read(path: &Path) -> Result<String, ExitCode> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_PARSE)
    })
}

fn load(path: &Path) -> Result<hwsem::mlir::state::MlirState, ExitCode> {
    let text = read(path)?;
    let file = parse(&text).map_err(|e| fail(&e.into()))?;
    preprocess(file).map_err(|e| fail(&e.into()))
}

fn check(design: &Path) -> ExitCode {
    match load(design) {
        Ok(st) => {
            for sym in st.table.keys() {
                println!("{sym}");
            }
            ExitCode::SUCCESS
        }
        Err(code) => code,
    }
}

fn fmt(design: &Path) -> ExitCode {
    let text = match read(design) {
        Ok(t) => t,
        Err(code) => return code,
    };
    match parse(&text) {
        Ok(file) => {
            print!("{}", print(&file));
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e.into()),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_cmd(
    design: &Path,
    top: &str,
    stim: &Path,
    vcd: &Path,
    max_eval_steps: Option<u64>,
    trace_all: bool,
    seed: Option<u64>,
    log: Option<&Path>,
) -> ExitCode {
    let mlir = match load(design) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let stim_text = match fs::read_to_string(stim) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", stim.display());
            return ExitCode::from(EXIT_PARSE);
        }
    };
    let mut stimulus = match Stimulus::from_json(&stim_text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", stim.display());
            return ExitCode::from(EXIT_PARSE);
        }
    };
    if max_eval_steps.is_some() {
        stimulus.max_eval_steps = max_eval_steps;
    }
    let mut config = SimConfig {
        seed,
        ..SimConfig::default()
    };
    if let Some(n) = stimulus.max_eval_steps {
        config.max_eval_steps = n;
    }
    let mut sim = match Simulator::new(mlir, top, config) {
        Ok(s) => s,
        Err(e) => return fail(&e.into()),
    };
    let outcome = match run(&mut sim, &stimulus, trace_all) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {}: {e}", stim.display());
            return ExitCode::from(EXIT_PARSE);
        }
    };

    let written = fs::File::create(vcd)
        .map_err(hwsem::sim::VcdError::from)
        .and_then(|mut f| {
            outcome.trace.write(&mut f)?;
            f.flush()?;
            Ok(())
        });
    if let Err(e) = written {
        eprintln!("error: {}: {e}", vcd.display());
        return ExitCode::from(EXIT_RUNTIME);
    }

    let text: String = sim.sv.output.iter().map(|(_, t)| t.as_str()).collect();
    match log {
        Some(path) => {
            if let Err(e) = fs::write(path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_RUNTIME);
            }
        }
        None => print!("{text}"),
    }
    for d in &sim.diagnostics {
        eprintln!("warning: cycle {} {}: {}: {}", d.cycle, d.path, d.op, d.message);
    }
    for l in &sim.sv.log {
        eprintln!("{:?}: cycle {} {}: {}", l.severity, l.cycle, l.path, l.message);
    }
    for f in &sim.sv.failures {
        let what = f.label.as_deref().or(f.message.as_deref()).unwrap_or("");
        eprintln!("{} failed: cycle {} {}: {what}", f.kind, f.cycle, f.path);
    }
    eprintln!(
        "cycles run: {}, assertion failures: {}, diagnostics: {}",
        outcome.cycles_run,
        sim.sv.failures.len(),
        sim.diagnostics.len()
    );
    if let Some(e) = outcome.error {
        eprintln!("error: cycle {}: {e}", outcome.cycles_run);
        return ExitCode::from(Error::from(e).exit_code() as u8);
    }
    if !sim.sv.failures.is_empty() || sim.sv.terminate == Some(Termination::Fatal) {
        return ExitCode::from(EXIT_ASSERT);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run {
            design,
            top,
            stim,
            vcd,
            max_eval_steps,
            trace_all,
            seed,
            log,
        } => run_cmd(
            &design,
            &top,
            &stim,
            &vcd,
            max_eval_steps,
            trace_all,
            seed,
            log.as_deref(),
        ),
        Cmd::Check { design } => check(&design),
        Cmd::Fmt { design } => fmt(&design),
    }
}
