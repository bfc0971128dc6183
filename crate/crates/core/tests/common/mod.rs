// SPDX-License-Identifier: Apache-2.0

//! Corpus loading and execution shared by the integration tests.
//!
//! Each `tests/corpus/*.mlir` file carries its own directives in leading
//! comments:
//!
//! ```text
//! // top: Counter
//! // expect: ok                  (or the name of the first error variant)
//! // stim: {"cycles": [...]}     (optional; three idle cycles otherwise)
//! // out count: 0 0 1 x b1x      (optional expected outputs per cycle)
//! ```

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hwsem::error::Error;
use hwsem::mlir::{parse, state::preprocess};
use hwsem::sim::{run, Stimulus};
use hwsem::{SimConfig, SimError, Simulator, TypedValue};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

#[derive(Clone, Debug)]
pub struct Case {
    pub name: String,
    pub path: PathBuf,
    pub src: String,
    pub top: String,
    /// `ok` or an error variant name.
    pub expect: String,
    pub stim: Stimulus,
    pub outs: Vec<(String, Vec<String>)>,
}

fn directive<'a>(src: &'a str, key: &str) -> Vec<&'a str> {
    src.lines()
        .filter_map(|l| l.trim().strip_prefix("//"))
        .filter_map(|l| l.trim().strip_prefix(key))
        .map(str::trim)
        .collect()
}

pub fn load_case(path: &Path) -> Case {
    let src = fs::read_to_string(path).unwrap();
    let name = path.file_stem().unwrap().to_string_lossy().into_owned();
    let top = directive(&src, "top:")
        .first()
        .map(|s| s.to_string())
        .unwrap_or_default();
    let expect = directive(&src, "expect:")
        .first()
        .map(|s| s.to_string())
        .unwrap_or_else(|| "ok".into());
    let stim = match directive(&src, "stim:").first() {
        Some(j) => Stimulus::from_json(j).unwrap_or_else(|e| panic!("{name}: {e}")),
        None => Stimulus::idle(3),
    };
    let outs = directive(&src, "out ")
        .into_iter()
        .map(|l| {
            let (port, vals) = l.split_once(':').unwrap_or_else(|| panic!("{name}: bad out line"));
            (
                port.trim().to_string(),
                vals.split_whitespace().map(str::to_string).collect(),
            )
        })
        .collect();
    Case {
        name,
        path: path.to_path_buf(),
        src,
        top,
        expect,
        stim,
        outs,
    }
}

/// All corpus files in name order.
pub fn load_corpus() -> Vec<Case> {
    let mut paths: Vec<PathBuf> = fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "mlir"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_case(p)).collect()
}

/// Variant name of an error, e.g. `Deadlock` or `DuplicateSymbol`.
pub fn variant(e: &Error) -> String {
    let dbg = match e {
        Error::Parse(_) => return "Parse".into(),
        Error::Static(s) => format!("{s:?}"),
        Error::Sim(SimError::Static(s)) => format!("{s:?}"),
        Error::Sim(s) => format!("{s:?}"),
    };
    dbg.split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or("")
        .to_string()
}

#[derive(Debug, Default)]
pub struct CaseRun {
    /// `ok` or the variant of the first error.
    pub result: String,
    pub coverage: BTreeMap<&'static str, u64>,
    pub outputs: Vec<indexmap::IndexMap<String, TypedValue>>,
    pub vcd: String,
    pub recorded: BTreeMap<String, Vec<String>>,
}

pub fn run_case(case: &Case, seed: Option<u64>) -> CaseRun {
    let mut out = CaseRun::default();
    let staged = parse(&case.src)
        .map_err(Error::from)
        .and_then(|f| preprocess(f).map_err(Error::from))
        .and_then(|m| {
            Simulator::new(
                m,
                &case.top,
                SimConfig {
                    seed,
                    ..SimConfig::default()
                },
            )
            .map_err(Error::from)
        });
    let mut sim = match staged {
        Ok(s) => s,
        Err(e) => {
            out.result = variant(&e);
            return out;
        }
    };
    let outcome = run(&mut sim, &case.stim, false).unwrap_or_else(|e| panic!("{}: {e}", case.name));
    out.coverage = sim.coverage().clone();
    out.outputs = outcome.outputs;
    out.vcd = outcome.trace.to_text();
    out.recorded = outcome.trace.expand();
    out.result = match outcome.error {
        Some(e) => variant(&Error::from(e)),
        None => "ok".into(),
    };
    out
}

/// Renders an output value the way `// out` lines spell it: decimal when
/// fully known, `x` when fully unknown, otherwise `b` and the bits.
pub fn spell(v: &TypedValue) -> String {
    let Some(bits) = v.flatten() else {
        return "?".into();
    };
    if let Some(n) = bits.to_biguint() {
        return n.to_string();
    }
    let s = bits.to_msb_string();
    if s.chars().all(|c| c == 'x') {
        "x".into()
    } else {
        format!("b{s}")
    }
}

/// Checks `// out` expectations; returns a description of the first mismatch.
pub fn check_outputs(case: &Case, run: &CaseRun) -> Result<(), String> {
    for (port, want) in &case.outs {
        let got: Vec<String> = run
            .outputs
            .iter()
            .map(|o| o.get(port).map(spell).unwrap_or_else(|| "missing".into()))
            .collect();
        if &got != want {
            return Err(format!("{}: port {port}: expected {want:?}, got {got:?}", case.name));
        }
    }
    Ok(())
}
