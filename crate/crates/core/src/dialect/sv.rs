// SPDX-License-Identifier: Apache-2.0

//! `sv` dialect: storage cells, procedural blocks, control flow,
//! force/release, assertions, system tasks and macros.
//!
//! Procedural bodies run sequentially in a local frame. Edge-triggered
//! blocks observe values from before the edge; `initial`, `always_comb` and
//! graph-level control flow observe the settled current cycle.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::Num;

use crate::bits::{Bit4, BitVec4};
use crate::error::SimError;
use crate::hwcore::{Ctx, Edge, Frame, Simulator};
use crate::mlir::ast::{AttrExpr, TypeExpr};
use crate::mlir::state::CanonOp;
use crate::mlir::type_str;
use crate::value::{bit_width, StorageRef, TypedValue, Value};

use super::{inner_sym, lookup, malformed};

type Results = Result<Vec<TypedValue>, SimError>;

/// Conventional descriptor for the captured output stream.
pub const STDERR_FD: u32 = 0x8000_0002;
/// Iteration cap for `sv.for`.
pub const MAX_LOOP_ITERATIONS: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Info,
    Warning,
    Error,
    Fatal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEntry {
    pub cycle: u64,
    pub path: String,
    pub severity: Severity,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssertionFailure {
    pub cycle: u64,
    pub path: String,
    /// `assert` or `assume`.
    pub kind: &'static str,
    pub label: Option<String>,
    pub message: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Finish,
    Stop,
    Exit,
    Fatal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct PendingNba {
    origin: usize,
    target: StorageRef,
    value: TypedValue,
}

#[derive(Clone, Debug, Default)]
pub struct SvState {
    /// Storage cells by owning instance and declaring value id.
    pub cells: HashMap<(usize, String), TypedValue>,
    /// Active overrides by instance, cell and element path.
    pub force: BTreeMap<(usize, String, Vec<usize>), TypedValue>,
    pub declared: BTreeSet<String>,
    /// Defined macros and their bodies.
    pub macros: BTreeMap<String, String>,
    /// Instances whose initial blocks have run.
    pub inited: BTreeSet<usize>,
    /// Descriptor to sink name; unlisted descriptors go to `stdout`.
    pub fd: BTreeMap<u32, String>,
    /// `fwrite` output as (sink, text), in emission order.
    pub output: Vec<(String, String)>,
    pub log: Vec<LogEntry>,
    pub failures: Vec<AssertionFailure>,
    pub covers: BTreeMap<String, u64>,
    pub terminate: Option<Termination>,
    nba: Vec<PendingNba>,
}

// ---- storage ---------------------------------------------------------------

fn inner_type<'t>(op: &CanonOp, ty: &'t TypeExpr) -> Result<&'t TypeExpr, SimError> {
    match ty {
        TypeExpr::InOut(t) => Ok(t),
        _ => Err(SimError::TypeMismatch {
            op: op.name.clone(),
            expected: "!hw.inout".into(),
            found: type_str(ty),
        }),
    }
}

fn get_path<'v>(v: &'v Value, elems: &[usize]) -> Option<&'v Value> {
    match elems.split_first() {
        None => Some(v),
        Some((i, rest)) => match v {
            Value::Agg(xs) => get_path(xs.get(*i)?, rest),
            _ => None,
        },
    }
}

fn set_path(v: &mut Value, elems: &[usize], new: Value) -> bool {
    match elems.split_first() {
        None => {
            *v = new;
            true
        }
        Some((i, rest)) => match v {
            Value::Agg(xs) => xs.get_mut(*i).is_some_and(|x| set_path(x, rest, new)),
            _ => false,
        },
    }
}

/// Current visible value of a cell (or element), overrides applied.
pub fn read_cell(sim: &Simulator, r: &StorageRef, ty: &TypeExpr) -> Result<TypedValue, SimError> {
    if r.poisoned {
        return TypedValue::all_x(ty).ok_or_else(|| SimError::DanglingRef(r.slot.clone()));
    }
    let base = sim
        .sv
        .cells
        .get(&(r.inst, r.slot.clone()))
        .ok_or_else(|| SimError::DanglingRef(r.slot.clone()))?;
    let mut whole = base.val.clone();
    let from = (r.inst, r.slot.clone(), Vec::new());
    for ((i, s, e), v) in sim.sv.force.range(from..) {
        if *i != r.inst || *s != r.slot {
            break;
        }
        set_path(&mut whole, e, v.val.clone());
    }
    let val = get_path(&whole, &r.elems)
        .cloned()
        .ok_or_else(|| SimError::DanglingRef(r.slot.clone()))?;
    Ok(TypedValue { ty: ty.clone(), val })
}

fn write_cell(sim: &mut Simulator, r: &StorageRef, v: TypedValue) -> Result<(), SimError> {
    let cell = sim
        .sv
        .cells
        .get_mut(&(r.inst, r.slot.clone()))
        .ok_or_else(|| SimError::DanglingRef(r.slot.clone()))?;
    if set_path(&mut cell.val, &r.elems, v.val) {
        Ok(())
    } else {
        Err(SimError::DanglingRef(r.slot.clone()))
    }
}

/// Applies queued nonblocking assignments in FIFO order: those issued by
/// instance `inst`, or all of them.
pub fn flush(sim: &mut Simulator, inst: Option<usize>) -> Result<(), SimError> {
    let (now, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut sim.sv.nba)
        .into_iter()
        .partition(|n| inst.is_none_or(|i| n.origin == i));
    sim.sv.nba = keep;
    for n in now {
        write_cell(sim, &n.target, n.value)?;
    }
    Ok(())
}

fn ref_operand(ctx: &Ctx<'_>, op: &CanonOp, i: usize) -> Result<(StorageRef, TypeExpr), SimError> {
    let v = ctx.operand(op, i)?;
    let inner = inner_type(op, &v.ty)?.clone();
    match v.val {
        Value::Ref(r) => Ok((r, inner)),
        _ => Err(SimError::TypeMismatch {
            op: op.name.clone(),
            expected: "a storage reference".into(),
            found: type_str(&v.ty),
        }),
    }
}

fn check_value(op: &CanonOp, expected: &TypeExpr, v: &TypedValue) -> Result<(), SimError> {
    if v.ty == *expected {
        return Ok(());
    }
    match (bit_width(expected), v.as_bits()) {
        (Some(e), Some(b)) if matches!(expected, TypeExpr::Int(_)) && matches!(v.ty, TypeExpr::Int(_)) => {
            Err(SimError::WidthMismatch {
                op: op.name.clone(),
                expected: e,
                found: b.width(),
            })
        }
        _ => Err(SimError::TypeMismatch {
            op: op.name.clone(),
            expected: type_str(expected),
            found: type_str(&v.ty),
        }),
    }
}

pub fn decl(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let ty = ctx.single_result_type(op)?;
    let inner = inner_type(op, &ty)?;
    let init = TypedValue::all_x(inner).ok_or_else(|| SimError::TypeMismatch {
        op: op.name.clone(),
        expected: "an integer or array type".into(),
        found: type_str(inner),
    })?;
    let id = op.result_ids.first().cloned().unwrap_or_default();
    ctx.sim.sv.cells.entry((ctx.inst, id.clone())).or_insert(init);
    if let Some(sym) = inner_sym(op) {
        if op.name == "sv.reg" {
            ctx.sim.write_reg(ctx.inst, &sym, &id)?;
        } else {
            ctx.sim.write_wire(ctx.inst, &sym, &id)?;
        }
    }
    let r = StorageRef {
        inst: ctx.inst,
        slot: id,
        elems: Vec::new(),
        poisoned: false,
    };
    Ok(vec![TypedValue { ty, val: Value::Ref(r) }])
}

pub fn read_inout(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let (r, inner) = ref_operand(ctx, op, 0)?;
    Ok(vec![read_cell(ctx.sim, &r, &inner)?])
}

pub fn array_index_inout(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let (mut r, inner) = ref_operand(ctx, op, 0)?;
    let TypeExpr::Array(n, e) = &inner else {
        return Err(SimError::TypeMismatch {
            op: op.name.clone(),
            expected: "!hw.inout of an array".into(),
            found: type_str(&inner),
        });
    };
    let idx = ctx.operand(op, 1)?;
    match ctx.bits_of(op, &idx)?.to_index() {
        Some(i) if (i as u64) < *n => r.elems.push(i),
        Some(i) => {
            return Err(SimError::OutOfRange {
                op: op.name.clone(),
                detail: format!("index {i} into {}", type_str(&inner)),
            })
        }
        None => {
            ctx.diagnostic(op, "unknown index; reads give X and writes are dropped");
            r.poisoned = true;
        }
    }
    Ok(vec![TypedValue {
        ty: TypeExpr::inout((**e).clone()),
        val: Value::Ref(r),
    }])
}

pub fn assign(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let (r, inner) = ref_operand(ctx, op, 0)?;
    let v = ctx.operand(op, 1)?;
    check_value(op, &inner, &v)?;
    if r.poisoned {
        ctx.diagnostic(op, "write through an unknown index dropped");
        return Ok(Vec::new());
    }
    if op.name == "sv.passign" {
        ctx.sim.sv.nba.push(PendingNba {
            origin: ctx.inst,
            target: r,
            value: v,
        });
    } else {
        write_cell(ctx.sim, &r, v)?;
    }
    Ok(Vec::new())
}

pub fn force(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let (r, inner) = ref_operand(ctx, op, 0)?;
    let v = ctx.operand(op, 1)?;
    check_value(op, &inner, &v)?;
    if r.poisoned {
        ctx.diagnostic(op, "force through an unknown index dropped");
        return Ok(Vec::new());
    }
    ctx.sim.sv.force.insert((r.inst, r.slot, r.elems), v);
    Ok(Vec::new())
}

pub fn release(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let (r, _) = ref_operand(ctx, op, 0)?;
    if ctx.sim.sv.force.remove(&(r.inst, r.slot, r.elems)).is_none() {
        ctx.diagnostic(op, "release without a matching force");
    }
    Ok(Vec::new())
}

fn constant_fill(ctx: &mut Ctx<'_>, op: &CanonOp, fill: fn(usize) -> BitVec4) -> Results {
    let ty = ctx.single_result_type(op)?;
    let w = ctx.result_width(op)?;
    Ok(vec![TypedValue::unflatten(&ty, &fill(w)).expect("width")])
}

pub fn constant_x(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    constant_fill(ctx, op, BitVec4::all_x)
}

pub fn constant_z(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    constant_fill(ctx, op, BitVec4::all_z)
}

// ---- procedural execution -------------------------------------------------

/// Runs `ops` in order within the current frame.
pub fn exec_ops(ctx: &mut Ctx<'_>, ops: &[CanonOp]) -> Result<(), SimError> {
    for op in ops {
        let def = lookup(&op.name)
            .filter(|d| d.procedural)
            .ok_or_else(|| SimError::UnknownOperation(format!("{} (in a procedural region)", op.name)))?;
        let eval = def.eval.ok_or_else(|| SimError::UnknownOperation(op.name.clone()))?;
        ctx.sim.cover(def.name);
        let vals = eval(ctx, op)?;
        if vals.len() != op.result_ids.len() {
            return Err(SimError::ArityMismatch {
                op: op.name.clone(),
                expected: op.result_ids.len(),
                found: vals.len(),
            });
        }
        let frame = ctx.frame.as_mut().expect("procedural frame");
        for (id, v) in op.result_ids.iter().zip(vals) {
            frame.env.insert(id.clone(), v);
        }
    }
    Ok(())
}

fn exec_region(ctx: &mut Ctx<'_>, op: &CanonOp, region: usize, bind: Option<TypedValue>) -> Result<(), SimError> {
    let ops = ctx.sim.split_region(op, region)?;
    if let (Some(v), Some(block)) = (bind, op.regions.get(region).and_then(|r| r.blocks.first())) {
        if let Some((arg, _)) = block.args.first() {
            ctx.frame.as_mut().expect("procedural frame").env.insert(arg.clone(), v);
        }
    }
    exec_ops(ctx, ops)
}

/// Runs `f` inside a procedural frame, creating one if needed.
fn in_frame(
    ctx: &mut Ctx<'_>,
    outside_from_last: bool,
    f: impl FnOnce(&mut Ctx<'_>) -> Result<(), SimError>,
) -> Result<(), SimError> {
    if ctx.frame.is_some() {
        return f(ctx);
    }
    ctx.frame = Some(Frame {
        env: HashMap::new(),
        outside_from_last,
    });
    let r = f(ctx);
    ctx.frame = None;
    r
}

fn edge_attr(op: &CanonOp, a: Option<&AttrExpr>) -> Result<Option<Edge>, SimError> {
    let Some(a) = a else { return Ok(None) };
    let e = match a {
        AttrExpr::Str(s) => Edge::parse(s),
        AttrExpr::Int { value, .. } => match i64::try_from(value).ok() {
            Some(0) => Some(Edge::Pos),
            Some(1) => Some(Edge::Neg),
            Some(2) => Some(Edge::Any),
            _ => None,
        },
        AttrExpr::Dialect { body: Some(b), .. } => Edge::parse(b.trim()),
        _ => None,
    };
    e.map(Some).ok_or_else(|| malformed(op, "event"))
}

fn bit_level(v: &TypedValue) -> Option<Bit4> {
    let b = v.as_bits()?;
    (b.width() == 1).then(|| b.bit(0))
}

#[derive(PartialEq)]
enum ResetStyle {
    None,
    Sync,
    Async,
}

fn reset_style(op: &CanonOp) -> Result<ResetStyle, SimError> {
    Ok(match op.attr("resetStyle") {
        None => ResetStyle::None,
        Some(AttrExpr::Str(s)) | Some(AttrExpr::Dialect { body: Some(s), .. }) => match s.trim() {
            "sync" | "syncreset" => ResetStyle::Sync,
            "async" | "asyncreset" => ResetStyle::Async,
            "none" | "noreset" => ResetStyle::None,
            _ => return Err(malformed(op, "resetStyle")),
        },
        Some(AttrExpr::Int { value, .. }) => match i64::try_from(value).ok() {
            Some(0) => ResetStyle::None,
            Some(1) => ResetStyle::Sync,
            Some(2) => ResetStyle::Async,
            _ => return Err(malformed(op, "resetStyle")),
        },
        _ => return Err(malformed(op, "resetStyle")),
    })
}

/// `sv.initial`, `sv.always`, `sv.alwayscomb`, `sv.alwaysff`.
pub fn block(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    match op.name.as_str() {
        "sv.initial" => {
            if ctx.sim.sv.inited.insert(ctx.inst) {
                in_frame(ctx, false, |c| exec_region(c, op, 0, None))?;
            }
        }
        "sv.alwayscomb" => in_frame(ctx, false, |c| exec_region(c, op, 0, None))?,
        "sv.always" => {
            let events = match op.attr("events") {
                Some(AttrExpr::Array(xs)) => xs.clone(),
                None => Vec::new(),
                Some(_) => return Err(malformed(op, "events")),
            };
            if events.len() != op.operands.len() || events.is_empty() {
                return Err(SimError::MissingEvent(op.name.clone()));
            }
            let mut fire = false;
            for (i, e) in events.iter().enumerate() {
                let edge = edge_attr(op, Some(e))?.expect("present");
                fire |= ctx.edge(op, i, edge)?;
            }
            if fire {
                in_frame(ctx, true, |c| exec_region(c, op, 0, None))?;
            }
        }
        "sv.alwaysff" => {
            if op.operands.is_empty() {
                return Err(SimError::MissingEvent(op.name.clone()));
            }
            let clock = edge_attr(op, op.attr("clockEdge"))?.unwrap_or(Edge::Pos);
            let style = reset_style(op)?;
            let reset_edge = edge_attr(op, op.attr("resetEdge"))?.unwrap_or(Edge::Pos);
            if style != ResetStyle::None && op.operands.len() < 2 {
                return Err(SimError::MissingEvent(op.name.clone()));
            }
            let clk_fire = ctx.edge(op, 0, clock)?;
            let region = match style {
                ResetStyle::None => clk_fire.then_some(0),
                ResetStyle::Sync => {
                    if clk_fire {
                        let rst = ctx.operand_last(op, 1)?;
                        match bit_level(&rst) {
                            Some(b) if b == reset_edge.active_level() => Some(1),
                            Some(Bit4::B0) | Some(Bit4::B1) => Some(0),
                            _ => {
                                ctx.diagnostic(op, "unknown reset level; block skipped");
                                None
                            }
                        }
                    } else {
                        None
                    }
                }
                ResetStyle::Async => {
                    let rst_fire = ctx.edge(op, 1, reset_edge)?;
                    let active = bit_level(&ctx.operand(op, 1)?) == Some(reset_edge.active_level());
                    if rst_fire || (clk_fire && active) {
                        Some(1)
                    } else {
                        clk_fire.then_some(0)
                    }
                }
            };
            if let Some(r) = region {
                if r < op.regions.len() {
                    in_frame(ctx, true, |c| exec_region(c, op, r, None))?;
                }
            }
        }
        _ => return Err(SimError::UnknownOperation(op.name.clone())),
    }
    Ok(Vec::new())
}

/// Matches a case label against a defined scrutinee. String labels may use
/// `x`, `z` or `?` as wildcards.
fn label_matches(label: &AttrExpr, v: &BitVec4) -> Option<bool> {
    match label {
        AttrExpr::Int { value, .. } => Some(BitVec4::from_bigint(v.width(), value) == *v),
        AttrExpr::Str(s) if s != "default" => {
            let chars: Vec<char> = s.chars().filter(|c| *c != '_').collect();
            if chars.len() != v.width() {
                return Some(false);
            }
            Some(chars.iter().rev().enumerate().all(|(i, c)| match c {
                '0' => v.bit(i) == Bit4::B0,
                '1' => v.bit(i) == Bit4::B1,
                _ => true,
            }))
        }
        _ => None,
    }
}

fn is_default(label: &AttrExpr) -> bool {
    matches!(label, AttrExpr::Unit)
        || matches!(label, AttrExpr::Str(s) if s == "default")
        || matches!(label, AttrExpr::Dialect { name, .. } if name.contains("default"))
}

/// `sv.if`, `sv.case`, `sv.for`, `sv.ifdef`, `sv.ifdef.procedural`.
pub fn control(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    in_frame(ctx, false, |ctx| match op.name.as_str() {
        "sv.if" => {
            let c = ctx.operand(op, 0)?;
            match bit_level(&c) {
                Some(Bit4::B1) => exec_region(ctx, op, 0, None),
                Some(Bit4::B0) => exec_region(ctx, op, 1, None),
                Some(_) => {
                    ctx.diagnostic(op, "unknown condition; neither branch taken");
                    Ok(())
                }
                None => Err(SimError::WidthMismatch {
                    op: op.name.clone(),
                    expected: 1,
                    found: c.as_bits().map_or(0, |b| b.width()),
                }),
            }
        }
        "sv.case" => {
            let s = ctx.operand(op, 0)?;
            let v = ctx.bits_of(op, &s)?;
            let labels = match op.attr("patterns").or_else(|| op.attr("casePatterns")) {
                Some(AttrExpr::Array(xs)) => xs.clone(),
                _ => return Err(malformed(op, "patterns")),
            };
            if labels.len() != op.regions.len() {
                return Err(malformed(op, "patterns"));
            }
            let default = labels.iter().position(is_default);
            let chosen = if v.has_unknown() {
                ctx.diagnostic(op, "unknown case scrutinee; default taken");
                default
            } else {
                let mut hit = None;
                for (i, l) in labels.iter().enumerate() {
                    match label_matches(l, &v) {
                        Some(true) => {
                            hit = Some(i);
                            break;
                        }
                        Some(false) => {}
                        None if is_default(l) => {}
                        None => return Err(malformed(op, "patterns")),
                    }
                }
                hit.or(default)
            };
            match chosen {
                Some(r) => exec_region(ctx, op, r, None),
                None => Ok(()),
            }
        }
        "sv.for" => {
            let vals = ctx.operands(op)?;
            ctx.expect_arity(op, &vals, 3)?;
            let ty = vals[0].ty.clone();
            let w = bit_width(&ty).unwrap_or(0);
            if w > 64 {
                return Err(SimError::OutOfRange {
                    op: op.name.clone(),
                    detail: "induction variables wider than 64 bits".into(),
                });
            }
            let get = |v: &TypedValue| v.as_bits().and_then(|b| b.to_u64());
            let (Some(lb), Some(ub), Some(step)) = (get(&vals[0]), get(&vals[1]), get(&vals[2])) else {
                ctx.diagnostic(op, "unknown loop bound; loop skipped");
                return Ok(());
            };
            let mask = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
            let mut i = lb;
            let mut n = 0u64;
            while i < ub {
                n += 1;
                if n > MAX_LOOP_ITERATIONS {
                    return Err(SimError::LoopBound(op.name.clone()));
                }
                exec_region(ctx, op, 0, Some(TypedValue::bits(ty.clone(), BitVec4::from_u64(w, i))))?;
                i = i.wrapping_add(step) & mask;
            }
            Ok(())
        }
        "sv.ifdef" | "sv.ifdef.procedural" => {
            let r = if ifdef_taken(ctx.sim, op)? { 0 } else { 1 };
            exec_region(ctx, op, r, None)
        }
        _ => Err(SimError::UnknownOperation(op.name.clone())),
    })?;
    Ok(Vec::new())
}

// ---- assertions and tasks ---------------------------------------------------

pub fn assert_like(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let c = ctx.operand(op, 0)?;
    let holds = bit_level(&c) == Some(Bit4::B1);
    let label = op.attr_str("label").map(str::to_string);
    if op.name == "sv.cover" {
        if holds {
            let key = label.unwrap_or_else(|| ctx.path());
            *ctx.sim.sv.covers.entry(key).or_insert(0) += 1;
        }
    } else if !holds {
        let args = ctx.operands(op)?[1..].to_vec();
        let message = match op.attr_str("message").or_else(|| op.attr_str("format_string")) {
            Some(f) => Some(format(f, &args)?),
            None => None,
        };
        let kind = if op.name == "sv.assume" { "assume" } else { "assert" };
        let failure = AssertionFailure {
            cycle: ctx.sim.cycle,
            path: ctx.path(),
            kind,
            label,
            message,
        };
        ctx.sim.sv.failures.push(failure);
    }
    Ok(Vec::new())
}

pub fn task(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let name = op.name.strip_prefix("sv.").unwrap_or(&op.name);
    let severity = match name {
        "info" => Some(Severity::Info),
        "warning" => Some(Severity::Warning),
        "error" => Some(Severity::Error),
        "fatal" => Some(Severity::Fatal),
        _ => None,
    };
    if let Some(severity) = severity {
        let args = ctx.operands(op)?;
        let message = match op.attr_str("message").or_else(|| op.attr_str("format_string")) {
            Some(f) => format(f, &args)?,
            None => String::new(),
        };
        let entry = LogEntry {
            cycle: ctx.sim.cycle,
            path: ctx.path(),
            severity,
            message,
        };
        ctx.sim.sv.log.push(entry);
    }
    let term = match name {
        "fatal" => Some(Termination::Fatal),
        "finish" => Some(Termination::Finish),
        "stop" => Some(Termination::Stop),
        "exit" => Some(Termination::Exit),
        _ => None,
    };
    if let Some(t) = term {
        let sv = &mut ctx.sim.sv;
        if sv.terminate != Some(Termination::Fatal) {
            sv.terminate = Some(t);
        }
    }
    if name == "fwrite" {
        let vals = ctx.operands(op)?;
        let fd = vals
            .first()
            .and_then(|v| v.as_bits())
            .and_then(|b| b.to_u64())
            .ok_or_else(|| SimError::BadFormat("unknown file descriptor".into()))?;
        let f = op
            .attr_str("format_string")
            .ok_or_else(|| malformed(op, "format_string"))?;
        let text = format(f, &vals[1..])?;
        let sink = ctx
            .sim
            .sv
            .fd
            .get(&(fd as u32))
            .cloned()
            .unwrap_or_else(|| "stdout".to_string());
        ctx.sim.sv.output.push((sink, text));
    }
    Ok(Vec::new())
}

fn hex_digits(b: &BitVec4) -> String {
    let w = b.width();
    let n = w.div_ceil(4);
    let mut s = String::with_capacity(n);
    for d in (0..n).rev() {
        let lo = d * 4;
        let bits: Vec<Bit4> = (lo..(lo + 4).min(w)).map(|i| b.bit(i)).collect();
        let c = if bits.iter().all(|x| *x == Bit4::BZ) {
            'z'
        } else if bits.iter().any(|x| !x.is_known()) {
            'x'
        } else {
            let v = bits
                .iter()
                .enumerate()
                .fold(0u32, |acc, (i, x)| acc | (u32::from(*x == Bit4::B1) << i));
            char::from_digit(v, 16).expect("nibble")
        };
        s.push(c);
    }
    s
}

/// Renders a format string with `%d`, `%x`/`%h`, `%b` and `%%`. An optional
/// width between `%` and the conversion is accepted and ignored.
pub fn format(f: &str, args: &[TypedValue]) -> Result<String, SimError> {
    let mut out = String::new();
    let mut it = f.chars().peekable();
    let mut next = args.iter();
    while let Some(c) = it.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        while it.peek().is_some_and(|d| d.is_ascii_digit()) {
            it.next();
        }
        let conv = it
            .next()
            .ok_or_else(|| SimError::BadFormat(format!("`{f}` ends inside a conversion")))?;
        if conv == '%' {
            out.push('%');
            continue;
        }
        let v = next
            .next()
            .ok_or_else(|| SimError::BadFormat(format!("`{f}` needs more arguments")))?;
        let b = v
            .flatten()
            .ok_or_else(|| SimError::BadFormat(format!("cannot format a {}", type_str(&v.ty))))?;
        match conv {
            'd' | 'D' => match b.to_biguint() {
                Some(n) => write!(out, "{n}").expect("string write"),
                None if b.iter().all(|x| x == Bit4::BZ) => out.push('z'),
                None => out.push('x'),
            },
            'x' | 'X' | 'h' | 'H' => out.push_str(&hex_digits(&b)),
            'b' | 'B' => out.push_str(&b.to_msb_string().to_lowercase()),
            other => return Err(SimError::BadFormat(format!("unsupported conversion `%{other}`"))),
        }
    }
    if next.next().is_some() {
        return Err(SimError::BadFormat(format!("`{f}` has unused arguments")));
    }
    Ok(out)
}

// ---- macros -----------------------------------------------------------------

pub fn macro_decl(sim: &mut Simulator, op: &CanonOp) -> Result<(), SimError> {
    let name = op.sym_name().ok_or_else(|| malformed(op, "sym_name"))?;
    sim.sv.declared.insert(name.to_string());
    Ok(())
}

pub fn macro_def(sim: &mut Simulator, op: &CanonOp) -> Result<(), SimError> {
    let name = op
        .attr_sym("macroName")
        .ok_or_else(|| malformed(op, "macroName"))?
        .to_string();
    let body = op.attr_str("format_string").unwrap_or("").to_string();
    sim.sv.macros.insert(name, body);
    Ok(())
}

/// Whether an `ifdef` selects its first region: the macro has a definition.
pub fn ifdef_taken(sim: &Simulator, op: &CanonOp) -> Result<bool, SimError> {
    let name = op
        .attr_sym("cond")
        .or_else(|| op.attr_sym("macroName"))
        .ok_or_else(|| malformed(op, "cond"))?;
    Ok(sim.sv.macros.contains_key(name))
}

/// Integer value of a macro body: decimal, `0x` hex, or a sized or unsized
/// Verilog literal such as `8'hff`.
pub fn macro_int(text: &str) -> Option<BigInt> {
    let t: String = text.trim().chars().filter(|c| *c != '_').collect();
    if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        return BigInt::from_str_radix(h, 16).ok();
    }
    if let Some(q) = t.find('\'') {
        let rest = t[q + 1..].trim_start_matches(['s', 'S']);
        let (radix, digits) = match rest.chars().next()? {
            'd' | 'D' => (10, &rest[1..]),
            'h' | 'H' => (16, &rest[1..]),
            'b' | 'B' => (2, &rest[1..]),
            'o' | 'O' => (8, &rest[1..]),
            _ => return None,
        };
        return BigInt::from_str_radix(digits, radix).ok();
    }
    t.parse().ok()
}

pub fn macro_ref(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let name = op.attr_sym("macroName").ok_or_else(|| malformed(op, "macroName"))?;
    let body = ctx
        .sim
        .sv
        .macros
        .get(name)
        .ok_or_else(|| SimError::UndefinedMacro(name.to_string()))?;
    let v = macro_int(body).ok_or_else(|| malformed(op, "macroName"))?;
    let ty = ctx.single_result_type(op)?;
    let w = ctx.result_width(op)?;
    Ok(vec![TypedValue::bits(ty, BitVec4::from_bigint(w, &v))])
}
