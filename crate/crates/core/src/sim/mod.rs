// SPDX-License-Identifier: Apache-2.0

//! Stimulus-driven runs: input files, per-cycle sampling and trace output.

pub mod trace;
pub mod vcd;

use indexmap::IndexMap;
use num_bigint::BigUint;
use num_traits::Num;
use serde::Deserialize;
use thiserror::Error;

use crate::bits::BitVec4;
use crate::error::SimError;
use crate::hwcore::Simulator;
use crate::value::{bit_width, TypedValue};

pub use trace::{sample, Sample};
pub use vcd::{parse_vcd, ParsedVcd, VcdError, VcdTrace};

#[derive(Debug, Error)]
pub enum StimulusError {
    #[error("stimulus is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cycle {cycle}: `{port}` is not an input of the top module")]
    UnknownPort { cycle: usize, port: String },
    #[error("cycle {cycle}: cannot use `{value}` for `{port}`")]
    BadValue { cycle: usize, port: String, value: String },
    #[error("stimulus names top `{found}` but the design was elaborated from `{expected}`")]
    TopMismatch { expected: String, found: String },
}

/// A scalar literal in a stimulus file.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Int(u64),
    Text(String),
}

impl std::fmt::Display for Literal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Literal::Int(n) => write!(f, "{n}"),
            Literal::Text(s) => f.write_str(s),
        }
    }
}

/// Input vectors for a run, one map per cycle.
#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Stimulus {
    #[serde(default)]
    pub top: Option<String>,
    pub cycles: Vec<IndexMap<String, Literal>>,
    /// Signals to trace; all default signals when absent.
    #[serde(default)]
    pub record: Option<Vec<String>>,
    #[serde(default)]
    pub max_eval_steps: Option<u64>,
}

impl Stimulus {
    pub fn from_json(text: &str) -> Result<Self, StimulusError> {
        Ok(serde_json::from_str(text)?)
    }

    /// `cycles` empty cycles, for designs without inputs.
    pub fn idle(cycles: usize) -> Self {
        Stimulus {
            cycles: vec![IndexMap::new(); cycles],
            ..Stimulus::default()
        }
    }
}

/// Converts a literal into a value of `width` bits: `0`/`1`, decimal,
/// `0x` hex, `0b` binary (with `x`/`z` digits), or a lone `x`/`z`.
pub fn literal_bits(lit: &Literal, width: usize) -> Option<BitVec4> {
    let big = match lit {
        Literal::Int(n) => BigUint::from(*n),
        Literal::Text(s) => {
            let s = s.trim().replace('_', "");
            match s.as_str() {
                "x" | "X" => return Some(BitVec4::all_x(width)),
                "z" | "Z" => return Some(BitVec4::all_z(width)),
                _ => {}
            }
            if let Some(b) = s.strip_prefix("0b") {
                let v = BitVec4::parse_msb(b)?;
                if v.width() == width {
                    return Some(v);
                }
                return (v.width() < width).then(|| {
                    let pad = BitVec4::zeros(width - v.width());
                    BitVec4::concat([&pad, &v])
                });
            }
            match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
                Some(h) => BigUint::from_str_radix(h, 16).ok()?,
                None => BigUint::from_str_radix(&s, 10).ok()?,
            }
        }
    };
    (big.bits() as usize <= width).then(|| BitVec4::from_biguint(width, &big))
}

/// Everything observed during a run.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub cycles_run: usize,
    pub outputs: Vec<IndexMap<String, TypedValue>>,
    pub trace: VcdTrace,
    /// Runtime failure that stopped the run early, if any.
    pub error: Option<SimError>,
}

/// Drives `sim` with `stim`. Inputs omitted from a cycle keep their previous
/// value; inputs never given are X. The run stops after a cycle that requests
/// termination.
pub fn run(sim: &mut Simulator, stim: &Stimulus, trace_all: bool) -> Result<RunOutcome, StimulusError> {
    if let Some(top) = &stim.top {
        let top = top.strip_prefix('@').unwrap_or(top);
        if top != sim.top {
            return Err(StimulusError::TopMismatch {
                expected: sim.top.clone(),
                found: top.to_string(),
            });
        }
    }
    if let Some(n) = stim.max_eval_steps {
        sim.config.max_eval_steps = n;
    }
    let ports = sim.input_ports().to_vec();
    let mut held: Vec<TypedValue> = ports
        .iter()
        .map(|p| TypedValue::all_x(&p.ty).expect("input ports have bit types"))
        .collect();
    // Validate the whole file before simulating anything.
    let mut vectors = Vec::with_capacity(stim.cycles.len());
    for (cycle, map) in stim.cycles.iter().enumerate() {
        for (name, lit) in map {
            let Some(i) = ports.iter().position(|p| &p.name == name) else {
                return Err(StimulusError::UnknownPort {
                    cycle,
                    port: name.clone(),
                });
            };
            let bad = || StimulusError::BadValue {
                cycle,
                port: name.clone(),
                value: lit.to_string(),
            };
            let width = bit_width(&ports[i].ty).ok_or_else(bad)?;
            let bits = literal_bits(lit, width).ok_or_else(bad)?;
            held[i] = TypedValue::unflatten(&ports[i].ty, &bits).ok_or_else(bad)?;
        }
        vectors.push(held.clone());
    }
    let record = stim.record.as_deref();
    let mut out = RunOutcome::default();
    for (t, inputs) in vectors.into_iter().enumerate() {
        let trace = &mut out.trace;
        match sim.run_cycle_observed(inputs, |s| trace.record(t as u64, &sample(s, record, trace_all))) {
            Ok(o) => out.outputs.push(o),
            Err(e) => {
                out.error = Some(e);
                break;
            }
        }
        out.cycles_run += 1;
        if sim.sv.terminate.is_some() {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hwcore::SimConfig;

    const COUNTER: &str = r#"
hw.module @Counter(in %clk : i1, in %rst : i1, out count : i4) {
  %c0 = hw.constant 0 : i4
  %c1 = hw.constant 1 : i4
  %q = seq.firreg %n clock %clk reset sync %rst, %c0 preset 0 : i4
  %n = comb.add %q, %c1 : i4
  hw.output %q : i4
}
"#;

    #[test]
    fn literals() {
        let t = |s: &str| Literal::Text(s.into());
        assert_eq!(literal_bits(&t("0x1f"), 8).unwrap().to_u64(), Some(31));
        assert_eq!(literal_bits(&t("12"), 4).unwrap().to_u64(), Some(12));
        assert_eq!(literal_bits(&Literal::Int(1), 1).unwrap().to_u64(), Some(1));
        assert_eq!(literal_bits(&t("0b1x"), 3).unwrap().to_msb_string(), "01x");
        assert_eq!(literal_bits(&t("x"), 2).unwrap().to_msb_string(), "xx");
        assert!(literal_bits(&t("16"), 4).is_none());
        assert!(literal_bits(&t("abc"), 4).is_none());
    }

    #[test]
    fn stimulus_rejects_unknown_fields_and_ports() {
        assert!(Stimulus::from_json(r#"{"cycles": [], "bogus": 1}"#).is_err());
        let mut sim = Simulator::from_source(COUNTER, "Counter", SimConfig::default()).unwrap();
        let stim = Stimulus::from_json(r#"{"cycles": [{"nope": "1"}]}"#).unwrap();
        assert!(matches!(
            run(&mut sim, &stim, false),
            Err(StimulusError::UnknownPort { .. })
        ));
    }

    #[test]
    fn held_inputs_and_trace() {
        let mut sim = Simulator::from_source(COUNTER, "Counter", SimConfig::default()).unwrap();
        let stim = Stimulus::from_json(
            r#"{"top": "Counter", "cycles": [{"clk": "0", "rst": "1"}, {"clk": "1"}, {"rst": "0", "clk": "0"}, {"clk": "1"}, {"clk": 0}]}"#,
        )
        .unwrap();
        let out = run(&mut sim, &stim, false).unwrap();
        assert!(out.error.is_none());
        let counts: Vec<u64> = out
            .outputs
            .iter()
            .map(|o| o["count"].as_bits().unwrap().to_u64().unwrap())
            .collect();
        assert_eq!(counts, vec![0, 0, 0, 1, 1]);
        let parsed = parse_vcd(&out.trace.to_text()).unwrap();
        assert_eq!(parsed.values, out.trace.expand());
        assert_eq!(
            parsed.values["Counter.count"],
            vec!["0000", "0000", "0000", "0001", "0001"]
        );
    }
}
