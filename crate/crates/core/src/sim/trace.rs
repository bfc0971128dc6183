// SPDX-License-Identifier: Apache-2.0

//! Sampling of observable signals at the end of a cycle.

use crate::bits::BitVec4;
use crate::dialect::sv::read_cell;
use crate::hwcore::Simulator;
use crate::mlir::ast::TypeExpr;
use crate::value::{TypedValue, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    /// Instance path, top module first.
    pub scope: Vec<String>,
    pub name: String,
    pub value: BitVec4,
}

/// Bits of a value as seen by an observer; storage references are followed.
pub fn observe(sim: &Simulator, v: &TypedValue) -> Option<BitVec4> {
    match (&v.val, &v.ty) {
        (Value::Ref(r), TypeExpr::InOut(inner)) => read_cell(sim, r, inner).ok()?.flatten(),
        (Value::Mem(_), _) | (Value::Ref(_), _) => None,
        _ => v.flatten(),
    }
}

fn selected(record: Option<&[String]>, scope: &[String], name: &str) -> bool {
    let Some(list) = record else { return true };
    let rel: Vec<&str> = scope.iter().skip(1).map(String::as_str).chain([name]).collect();
    let dotted = rel.join(".");
    list.iter()
        .any(|r| *r == dotted || *r == format!("{}.{dotted}", scope[0]))
}

/// Signals of the cycle in progress: top-level ports and registered
/// register/wire symbols, or every value when `trace_all` is set.
/// `record` restricts the result to the named signals (dotted below the top).
pub fn sample(sim: &Simulator, record: Option<&[String]>, trace_all: bool) -> Vec<Sample> {
    let mut out = Vec::new();
    let mut push = |scope: &[String], name: String, v: Option<BitVec4>| {
        if let Some(value) = v {
            if selected(record, scope, &name) {
                out.push(Sample {
                    scope: scope.to_vec(),
                    name,
                    value,
                });
            }
        }
    };
    for (i, st) in sim.instances.iter().enumerate() {
        let Some(plan) = st.plan() else { continue };
        let scope = &st.cid;
        let mut named: std::collections::BTreeSet<&str> = Default::default();
        if i == 0 || trace_all {
            for (port, (id, _)) in plan.inputs.iter().zip(&plan.args) {
                push(scope, port.name.clone(), st.curr.get(id).and_then(|v| observe(sim, v)));
                named.insert(id);
            }
            for (port, id) in plan.outputs.iter().zip(&plan.output_ids) {
                push(scope, port.name.clone(), st.curr.get(id).and_then(|v| observe(sim, v)));
            }
        }
        for (sym, id) in st.reg.iter().chain(&st.wire) {
            push(scope, sym.clone(), st.curr.get(id).and_then(|v| observe(sim, v)));
            named.insert(id);
        }
        if trace_all {
            let mut ids: Vec<&String> = st.curr.keys().filter(|k| !named.contains(k.as_str())).collect();
            ids.sort();
            for id in ids {
                push(scope, format!("%{id}"), observe(sim, &st.curr[id]));
            }
        }
    }
    out
}
