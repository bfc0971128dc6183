// SPDX-License-Identifier: Apache-2.0

//! `seq` dialect: FIRRTL-style registers and memories.
//!
//! A register's value in a cycle is what it holds after that cycle's clock
//! edge: on a rising edge it takes the previous cycle's next-state (or reset)
//! value, otherwise it keeps its previous value.

use std::collections::HashMap;

use num_bigint::BigInt;

use crate::bits::BitVec4;
use crate::error::SimError;
use crate::hwcore::{Ctx, Edge};
use crate::mlir::ast::TypeExpr;
use crate::mlir::state::CanonOp;
use crate::mlir::type_str;
use crate::value::{bit_width, MemRef, TypedValue, Value};

use super::{inner_sym, malformed};

type Results = Result<Vec<TypedValue>, SimError>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Memory {
    pub depth: u64,
    pub width: usize,
    pub read_latency: u64,
    /// Written words; unwritten addresses read as X.
    pub words: HashMap<u64, BitVec4>,
}

impl Memory {
    pub fn read(&self, addr: u64) -> BitVec4 {
        self.words
            .get(&addr)
            .cloned()
            .unwrap_or_else(|| BitVec4::all_x(self.width))
    }
}

#[derive(Clone, Debug, Default)]
pub struct SeqState {
    /// Memories by owning instance and declaring value id.
    pub mems: HashMap<(usize, String), Memory>,
}

fn x_of(op: &CanonOp, ty: &TypeExpr) -> Result<TypedValue, SimError> {
    TypedValue::all_x(ty).ok_or_else(|| SimError::TypeMismatch {
        op: op.name.clone(),
        expected: "a type with a bit width".into(),
        found: type_str(ty),
    })
}

/// 1 for asserted, 0 for deasserted, `None` for unknown.
fn level(v: &TypedValue) -> Option<bool> {
    let b = v.as_bits()?;
    (!b.has_unknown()).then(|| !b.is_zero())
}

pub fn firreg(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    if op.operands.len() < 2 {
        return Err(SimError::MissingClock(op.name.clone()));
    }
    let ty = ctx.single_result_type(op)?;
    let id = op.result_ids.first().cloned().unwrap_or_default();
    if let Some(name) = inner_sym(op).or_else(|| op.attr_str("name").map(str::to_string)) {
        if !name.is_empty() {
            ctx.sim.write_reg(ctx.inst, &name, &id)?;
        }
    }
    let has_reset = op.operands.len() >= 4;
    let is_async = has_reset && op.has_attr("isAsync");

    if is_async {
        match level(&ctx.operand(op, 2)?) {
            Some(true) => return Ok(vec![ctx.operand(op, 3)?]),
            Some(false) => {}
            None => {
                ctx.diagnostic(op, "unknown asynchronous reset level");
                return Ok(vec![x_of(op, &ty)?]);
            }
        }
    }
    let v = if ctx.edge(op, 1, Edge::Pos)? {
        let reset = if has_reset && !is_async {
            level(&ctx.operand_last(op, 2)?)
        } else {
            Some(false)
        };
        match reset {
            Some(true) => ctx.operand_last(op, 3)?,
            Some(false) => ctx.operand_last(op, 0)?,
            None => x_of(op, &ty)?,
        }
    } else if let Some(prev) = ctx.state().last.get(&id) {
        prev.clone()
    } else if let Some(p) = op.attr_int("preset") {
        preset(op, &ty, p)?
    } else {
        x_of(op, &ty)?
    };
    Ok(vec![TypedValue { ty, val: v.val }])
}

fn preset(op: &CanonOp, ty: &TypeExpr, p: &BigInt) -> Result<TypedValue, SimError> {
    let w = bit_width(ty).ok_or_else(|| malformed(op, "preset"))?;
    TypedValue::unflatten(ty, &BitVec4::from_bigint(w, p)).ok_or_else(|| malformed(op, "preset"))
}

pub fn firmem(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let ty = ctx.single_result_type(op)?;
    let TypeExpr::FirMem { depth, width, .. } = ty else {
        return Err(SimError::TypeMismatch {
            op: op.name.clone(),
            expected: "!seq.firmem".into(),
            found: type_str(&ty),
        });
    };
    let read_latency = op.attr_u64("readLatency").unwrap_or(0);
    let write_latency = op.attr_u64("writeLatency").unwrap_or(1);
    if read_latency > 1 || write_latency != 1 {
        return Err(SimError::OutOfRange {
            op: op.name.clone(),
            detail: format!("read latency {read_latency} and write latency {write_latency} (supported: 0 or 1, and 1)"),
        });
    }
    let id = op.result_ids.first().cloned().unwrap_or_default();
    ctx.sim
        .seq
        .mems
        .entry((ctx.inst, id.clone()))
        .or_insert_with(|| Memory {
            depth,
            width: width as usize,
            read_latency,
            words: HashMap::new(),
        });
    Ok(vec![TypedValue {
        ty,
        val: Value::Mem(MemRef { inst: ctx.inst, id }),
    }])
}

fn mem_key(ctx: &Ctx<'_>, op: &CanonOp) -> Result<(usize, String), SimError> {
    let v = ctx.operand(op, 0)?;
    match v.val {
        Value::Mem(m) if ctx.sim.seq.mems.contains_key(&(m.inst, m.id.clone())) => Ok((m.inst, m.id)),
        _ => Err(SimError::TypeMismatch {
            op: op.name.clone(),
            expected: "a memory handle".into(),
            found: type_str(&v.ty),
        }),
    }
}

fn mem<'s>(ctx: &'s Ctx<'_>, key: &(usize, String)) -> &'s Memory {
    &ctx.sim.seq.mems[key]
}

/// Defined, in-range address or `None` (with a diagnostic when unusable).
fn address(ctx: &mut Ctx<'_>, op: &CanonOp, v: &TypedValue, depth: u64, what: &str) -> Option<u64> {
    match v.as_bits().and_then(|b| b.to_u64()) {
        Some(a) if a < depth => Some(a),
        Some(a) => {
            ctx.diagnostic(op, format!("{what} address {a} out of range (depth {depth})"));
            None
        }
        None => {
            if what == "write" {
                ctx.diagnostic(op, "write to unknown address dropped");
            }
            None
        }
    }
}

/// Enable level: absent operand means always enabled.
fn enable(ctx: &Ctx<'_>, op: &CanonOp, i: usize, last: bool) -> Result<Option<bool>, SimError> {
    if op.operands.len() <= i {
        return Ok(Some(true));
    }
    let v = if last {
        ctx.operand_last(op, i)?
    } else {
        ctx.operand(op, i)?
    };
    Ok(level(&v))
}

fn result_x(ctx: &Ctx<'_>, op: &CanonOp) -> Result<TypedValue, SimError> {
    x_of(op, &ctx.single_result_type(op)?)
}

fn held(ctx: &Ctx<'_>, op: &CanonOp) -> Result<TypedValue, SimError> {
    match op.result_ids.first().and_then(|id| ctx.state().last.get(id)) {
        Some(v) => Ok(v.clone()),
        None => result_x(ctx, op),
    }
}

fn word(ctx: &Ctx<'_>, op: &CanonOp, w: BitVec4) -> Result<TypedValue, SimError> {
    Ok(TypedValue::bits(ctx.single_result_type(op)?, w))
}

fn write(ctx: &mut Ctx<'_>, op: &CanonOp, key: &(usize, String), addr: usize, data: usize) -> Result<(), SimError> {
    let depth = mem(ctx, key).depth;
    let width = mem(ctx, key).width;
    let a = ctx.operand_last(op, addr)?;
    let d = ctx.operand_last(op, data)?;
    let Some(a) = address(ctx, op, &a, depth, "write") else {
        return Ok(());
    };
    let d = d.as_bits().cloned().ok_or_else(|| SimError::TypeMismatch {
        op: op.name.clone(),
        expected: format!("i{width}"),
        found: type_str(&d.ty),
    })?;
    if d.width() != width {
        return Err(SimError::WidthMismatch {
            op: op.name.clone(),
            expected: width,
            found: d.width(),
        });
    }
    ctx.sim.seq.mems.get_mut(key).expect("memory").words.insert(a, d);
    Ok(())
}

/// `(mem, addr, clk[, en])`
pub fn read_port(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let key = mem_key(ctx, op)?;
    let (depth, latency) = (mem(ctx, &key).depth, mem(ctx, &key).read_latency);
    let v = if latency == 0 {
        match enable(ctx, op, 3, false)? {
            Some(true) => {
                let a = ctx.operand(op, 1)?;
                match address(ctx, op, &a, depth, "read") {
                    Some(a) => word(ctx, op, mem(ctx, &key).read(a))?,
                    None => result_x(ctx, op)?,
                }
            }
            _ => result_x(ctx, op)?,
        }
    } else if ctx.edge(op, 2, Edge::Pos)? {
        match enable(ctx, op, 3, true)? {
            Some(true) => {
                let a = ctx.operand_last(op, 1)?;
                match address(ctx, op, &a, depth, "read") {
                    Some(a) => word(ctx, op, mem(ctx, &key).read(a))?,
                    None => result_x(ctx, op)?,
                }
            }
            _ => result_x(ctx, op)?,
        }
    } else {
        held(ctx, op)?
    };
    Ok(vec![v])
}

/// `(mem, addr, data, clk[, en])`
pub fn write_port(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let key = mem_key(ctx, op)?;
    if op.operands.len() < 4 {
        return Err(SimError::MissingClock(op.name.clone()));
    }
    if ctx.edge(op, 3, Edge::Pos)? {
        match enable(ctx, op, 4, true)? {
            Some(true) => write(ctx, op, &key, 1, 2)?,
            Some(false) => {}
            None => ctx.diagnostic(op, "write with unknown enable dropped"),
        }
    }
    Ok(Vec::new())
}

/// `(mem, addr, wdata, mode, clk[, en])`; mode 1 writes, mode 0 reads.
pub fn read_write_port(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let key = mem_key(ctx, op)?;
    if op.operands.len() < 5 {
        return Err(SimError::MissingClock(op.name.clone()));
    }
    let (depth, latency) = (mem(ctx, &key).depth, mem(ctx, &key).read_latency);
    let posedge = ctx.edge(op, 4, Edge::Pos)?;
    let mut out = None;
    if posedge {
        let en = enable(ctx, op, 5, true)?;
        let mode = level(&ctx.operand_last(op, 3)?);
        if latency == 1 {
            out = Some(match (en, mode) {
                (Some(true), Some(false)) => {
                    let a = ctx.operand_last(op, 1)?;
                    match address(ctx, op, &a, depth, "read") {
                        Some(a) => word(ctx, op, mem(ctx, &key).read(a))?,
                        None => result_x(ctx, op)?,
                    }
                }
                _ => result_x(ctx, op)?,
            });
        }
        match (en, mode) {
            (Some(true), Some(true)) => write(ctx, op, &key, 1, 2)?,
            (Some(true), None) => ctx.diagnostic(op, "unknown port mode; write dropped"),
            (None, _) => ctx.diagnostic(op, "write with unknown enable dropped"),
            _ => {}
        }
    }
    let v = match out {
        Some(v) => v,
        None if latency == 1 => held(ctx, op)?,
        None => {
            let en = enable(ctx, op, 5, false)?;
            let mode = level(&ctx.operand(op, 3)?);
            match (en, mode) {
                (Some(true), Some(false)) => {
                    let a = ctx.operand(op, 1)?;
                    match address(ctx, op, &a, depth, "read") {
                        Some(a) => word(ctx, op, mem(ctx, &key).read(a))?,
                        None => result_x(ctx, op)?,
                    }
                }
                (Some(true), None) => {
                    ctx.diagnostic(op, "unknown port mode; read yields X");
                    result_x(ctx, op)?
                }
                _ => result_x(ctx, op)?,
            }
        }
    };
    Ok(vec![v])
}

#[cfg(test)]
mod tests {
    use crate::bits::BitVec4;
    use crate::hwcore::{SimConfig, Simulator};
    use crate::mlir::ast::TypeExpr;
    use crate::value::TypedValue;

    fn clk(v: bool) -> TypedValue {
        TypedValue::bits(TypeExpr::Clock, BitVec4::from_bool(v))
    }

    fn val(v: &TypedValue) -> Option<u64> {
        v.as_bits().unwrap().to_u64()
    }

    #[test]
    fn firreg_run_cycle_example() {
        let src = r#"
hw.module @T(in %clk : !seq.clock, in %rst : i1, out q : i8) {
  %c0 = hw.constant 0 : i8
  %c1 = hw.constant 1 : i8
  %n = comb.add %r, %c1 : i8
  %r = seq.firreg %n clock %clk reset sync %rst, %c0 preset 0 : i8
  hw.output %r : i8
}
"#;
        let mut sim = Simulator::from_source(src, "T", SimConfig::default()).unwrap();
        let mut got = Vec::new();
        for (c, r) in [(1, 1), (0, 0), (1, 0), (0, 0), (1, 0)] {
            let o = sim.run_cycle(vec![clk(c == 1), TypedValue::bool(r == 1)]).unwrap();
            got.push(val(&o["q"]));
        }
        assert_eq!(got, vec![Some(0), Some(0), Some(1), Some(1), Some(2)]);
    }

    #[test]
    fn async_reset_dominates() {
        let src = r#"
hw.module @T(in %clk : !seq.clock, in %rst : i1, in %d : i4, out q : i4) {
  %c5 = hw.constant 5 : i4
  %r = seq.firreg %d clock %clk reset async %rst, %c5 : i4
  hw.output %r : i4
}
"#;
        let mut sim = Simulator::from_source(src, "T", SimConfig::default()).unwrap();
        for c in 0..6 {
            let o = sim
                .run_cycle(vec![clk(c % 2 == 1), TypedValue::bool(true), TypedValue::int(4, 9)])
                .unwrap();
            assert_eq!(val(&o["q"]), Some(5));
        }
    }

    #[test]
    fn memory_write_then_read() {
        let src = r#"
hw.module @T(in %clk : !seq.clock, in %wa : i2, in %wd : i8, in %we : i1, in %ra : i2, out q : i8) {
  %m = seq.firmem 0, 1, undefined, port_order : <4 x 8>
  seq.firmem.write_port %m[%wa] = %wd, clock %clk enable %we : <4 x 8>
  %q = seq.firmem.read_port %m[%ra], clock %clk : <4 x 8>
  hw.output %q : i8
}
"#;
        let mut sim = Simulator::from_source(src, "T", SimConfig::default()).unwrap();
        let step = |sim: &mut Simulator, c: bool, we: bool, wa: u64, wd: u64, ra: u64| {
            let o = sim
                .run_cycle(vec![
                    clk(c),
                    TypedValue::int(2, wa),
                    TypedValue::int(8, wd),
                    TypedValue::bool(we),
                    TypedValue::int(2, ra),
                ])
                .unwrap();
            val(&o["q"])
        };
        assert_eq!(step(&mut sim, false, true, 2, 77, 2), None);
        assert_eq!(step(&mut sim, true, false, 0, 0, 2), Some(77));
        assert_eq!(step(&mut sim, false, false, 0, 0, 1), None);
    }
}
