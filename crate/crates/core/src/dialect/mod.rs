// SPDX-License-Identifier: Apache-2.0

//! Operation evaluators for the supported dialects and the registry that
//! dispatches to them.

pub mod comb;
pub mod hw;
pub mod seq;
pub mod sv;

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::SimError;
use crate::hwcore::{Ctx, Simulator};
use crate::mlir::ast::AttrExpr;
use crate::mlir::state::CanonOp;
use crate::value::TypedValue;

/// Evaluates one operation and returns its results in order.
pub type EvalFn = fn(&mut Ctx<'_>, &CanonOp) -> Result<Vec<TypedValue>, SimError>;
/// Handles a top-level operation before the first cycle.
pub type PreFn = fn(&mut Simulator, &CanonOp) -> Result<(), SimError>;

pub struct OpDef {
    pub name: &'static str,
    pub eval: Option<EvalFn>,
    pub pre: Option<PreFn>,
    /// Attributes kept by canonicalization; `None` keeps all of them.
    pub attrs: Option<&'static [&'static str]>,
    /// Whether the op may appear inside a procedural region.
    pub procedural: bool,
}

const COMB_ATTRS: &[&str] = &["twoState", "predicate", "lowBit", "lookupTable"];

const fn comb(name: &'static str) -> OpDef {
    OpDef {
        name,
        eval: Some(comb::eval),
        pre: None,
        attrs: Some(COMB_ATTRS),
        procedural: true,
    }
}

const fn expr(name: &'static str, eval: EvalFn) -> OpDef {
    OpDef {
        name,
        eval: Some(eval),
        pre: None,
        attrs: None,
        procedural: true,
    }
}

const fn graph(name: &'static str, eval: EvalFn) -> OpDef {
    OpDef {
        name,
        eval: Some(eval),
        pre: None,
        attrs: None,
        procedural: false,
    }
}

const fn pre(name: &'static str, pre: PreFn) -> OpDef {
    OpDef {
        name,
        eval: Some(no_op),
        pre: Some(pre),
        attrs: None,
        procedural: false,
    }
}

const fn structural(name: &'static str) -> OpDef {
    OpDef {
        name,
        eval: None,
        pre: None,
        attrs: None,
        procedural: false,
    }
}

fn no_op(_: &mut Ctx<'_>, _: &CanonOp) -> Result<Vec<TypedValue>, SimError> {
    Ok(Vec::new())
}

pub static REGISTRY: &[OpDef] = &[
    comb("comb.add"),
    comb("comb.and"),
    comb("comb.concat"),
    comb("comb.divs"),
    comb("comb.divu"),
    comb("comb.extract"),
    comb("comb.icmp"),
    comb("comb.mods"),
    comb("comb.modu"),
    comb("comb.mul"),
    comb("comb.mux"),
    comb("comb.or"),
    comb("comb.parity"),
    comb("comb.replicate"),
    comb("comb.shl"),
    comb("comb.shrs"),
    comb("comb.shru"),
    comb("comb.sub"),
    comb("comb.truth_table"),
    comb("comb.xor"),
    structural("hw.module"),
    structural("hw.instance"),
    graph("hw.output", hw::output),
    expr("hw.constant", hw::constant),
    expr("hw.aggregate_constant", hw::aggregate_constant),
    expr("hw.enum.constant", hw::enum_constant),
    expr("hw.enum.cmp", hw::enum_cmp),
    expr("hw.bitcast", hw::bitcast),
    expr("hw.wire", hw::wire),
    expr("hw.array_create", hw::array_create),
    expr("hw.array_get", hw::array_get),
    expr("hw.array_slice", hw::array_slice),
    expr("hw.array_concat", hw::array_concat),
    expr("hw.struct_create", hw::struct_create),
    expr("hw.struct_extract", hw::struct_extract),
    expr("hw.struct_inject", hw::struct_inject),
    expr("hw.struct_explode", hw::struct_explode),
    expr("hw.union_create", hw::union_create),
    expr("hw.union_extract", hw::union_extract),
    pre("hw.hierpath", hw::hierpath),
    graph("seq.firreg", seq::firreg),
    graph("seq.firmem", seq::firmem),
    graph("seq.firmem.read_port", seq::read_port),
    graph("seq.firmem.write_port", seq::write_port),
    graph("seq.firmem.read_write_port", seq::read_write_port),
    expr("sv.reg", sv::decl),
    expr("sv.logic", sv::decl),
    expr("sv.wire", sv::decl),
    expr("sv.read_inout", sv::read_inout),
    expr("sv.array_index_inout", sv::array_index_inout),
    expr("sv.assign", sv::assign),
    expr("sv.bpassign", sv::assign),
    expr("sv.passign", sv::assign),
    expr("sv.force", sv::force),
    expr("sv.release", sv::release),
    expr("sv.constantX", sv::constant_x),
    expr("sv.constantZ", sv::constant_z),
    graph("sv.initial", sv::block),
    graph("sv.always", sv::block),
    graph("sv.alwayscomb", sv::block),
    graph("sv.alwaysff", sv::block),
    expr("sv.if", sv::control),
    expr("sv.case", sv::control),
    expr("sv.for", sv::control),
    expr("sv.ifdef", sv::control),
    expr("sv.ifdef.procedural", sv::control),
    expr("sv.assert", sv::assert_like),
    expr("sv.assume", sv::assert_like),
    expr("sv.cover", sv::assert_like),
    expr("sv.error", sv::task),
    expr("sv.warning", sv::task),
    expr("sv.info", sv::task),
    expr("sv.fatal", sv::task),
    expr("sv.finish", sv::task),
    expr("sv.stop", sv::task),
    expr("sv.exit", sv::task),
    expr("sv.fwrite", sv::task),
    pre("sv.macro.decl", sv::macro_decl),
    pre("sv.macro.def", sv::macro_def),
    expr("sv.macro.ref", sv::macro_ref),
    expr("sv.macro.ref.se", sv::macro_ref),
];

/// Registry entry for an operation name.
pub fn lookup(name: &str) -> Option<&'static OpDef> {
    static INDEX: OnceLock<HashMap<&'static str, &'static OpDef>> = OnceLock::new();
    INDEX
        .get_or_init(|| REGISTRY.iter().map(|d| (d.name, d)).collect())
        .get(name)
        .copied()
}

/// Names of every supported operation.
pub fn supported_ops() -> impl Iterator<Item = &'static str> {
    REGISTRY.iter().map(|d| d.name)
}

/// The `inner_sym` of a declaration, accepting a plain string, a symbol
/// reference, or an `#hw<innerSym@name>` attribute.
pub fn inner_sym(op: &CanonOp) -> Option<String> {
    match op.attr("inner_sym")? {
        AttrExpr::Str(s) => Some(s.clone()),
        AttrExpr::SymbolRef(p) => p.last().cloned(),
        AttrExpr::Dialect { body: Some(b), .. } => {
            let at = b.find('@')?;
            let rest = &b[at + 1..];
            let end = rest
                .find(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$' || c == '.'))
                .unwrap_or(rest.len());
            Some(rest[..end].to_string())
        }
        _ => None,
    }
}

pub(crate) fn malformed(op: &CanonOp, attr: &str) -> SimError {
    SimError::MalformedAttribute {
        op: op.name.clone(),
        attr: attr.to_string(),
    }
}
