// SPDX-License-Identifier: Apache-2.0

//! Combinational operations.
//!
//! Every operation except `concat` and `extract` is pessimistic: an X or Z
//! bit anywhere in any operand makes the whole result X. `concat` and
//! `extract` move bits, so unknowns stay in their positions.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::bits::{Bit4, BitVec4};
use crate::error::SimError;
use crate::hwcore::Ctx;
use crate::mlir::ast::AttrExpr;
use crate::mlir::state::CanonOp;
use crate::mlir::ICMP_PREDICATES;
use crate::value::TypedValue;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IcmpPredicate {
    Eq,
    Ne,
    Slt,
    Sle,
    Sgt,
    Sge,
    Ult,
    Ule,
    Ugt,
    Uge,
}

impl IcmpPredicate {
    pub const ALL: [IcmpPredicate; 10] = [
        IcmpPredicate::Eq,
        IcmpPredicate::Ne,
        IcmpPredicate::Slt,
        IcmpPredicate::Sle,
        IcmpPredicate::Sgt,
        IcmpPredicate::Sge,
        IcmpPredicate::Ult,
        IcmpPredicate::Ule,
        IcmpPredicate::Ugt,
        IcmpPredicate::Uge,
    ];

    /// Integer encoding used in the `predicate` attribute.
    pub fn from_code(code: u64) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ICMP_PREDICATES.iter().position(|p| *p == name).map(|i| Self::ALL[i])
    }

    pub fn name(self) -> &'static str {
        ICMP_PREDICATES[self as usize]
    }

    fn is_signed(self) -> bool {
        use IcmpPredicate::*;
        matches!(self, Slt | Sle | Sgt | Sge)
    }
}

/// Lookup table for `comb.truth_table`; row `i` is the output for the input
/// combination whose binary index is `i`, first input most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthTable {
    arity: usize,
    rows: Vec<bool>,
}

impl TruthTable {
    pub fn new(arity: usize, rows: Vec<bool>) -> Option<Self> {
        ((1..32).contains(&arity) && rows.len() == 1usize << arity).then_some(TruthTable { arity, rows })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }
}

fn width_mismatch(op: &str, expected: usize, found: usize) -> SimError {
    SimError::WidthMismatch {
        op: op.to_string(),
        expected,
        found,
    }
}

fn any_unknown<'a>(vs: impl IntoIterator<Item = &'a BitVec4>) -> bool {
    vs.into_iter().any(BitVec4::has_unknown)
}

fn uint(v: &BitVec4) -> BigUint {
    v.to_biguint().expect("caller checked for unknown bits")
}

fn sint(v: &BitVec4) -> BigInt {
    v.to_bigint().expect("caller checked for unknown bits")
}

/// `add`, `mul`, `and`, `or`, `xor` and `concat` over a list of operands.
pub fn eval_variadic(name: &str, ops: &[BitVec4], width: usize) -> Result<BitVec4, SimError> {
    if ops.is_empty() {
        return Err(SimError::EmptyOperandList(format!("comb.{name}")));
    }
    if name == "concat" {
        let total: usize = ops.iter().map(BitVec4::width).sum();
        if total != width {
            return Err(width_mismatch("comb.concat", width, total));
        }
        return Ok(BitVec4::concat(ops));
    }
    if let Some(bad) = ops.iter().find(|o| o.width() != width) {
        return Err(width_mismatch(&format!("comb.{name}"), width, bad.width()));
    }
    if any_unknown(ops) {
        return Ok(BitVec4::all_x(width));
    }
    let vals = ops.iter().map(uint);
    let r = match name {
        "add" => vals.fold(BigUint::zero(), |a, b| a + b),
        "mul" => vals.fold(BigUint::one(), |a, b| a * b),
        "and" => vals.reduce(|a, b| a & b).unwrap(),
        "or" => vals.reduce(|a, b| a | b).unwrap(),
        "xor" => vals.reduce(|a, b| a ^ b).unwrap(),
        _ => return Err(SimError::UnknownOperation(format!("comb.{name}"))),
    };
    Ok(BitVec4::from_biguint(width, &r))
}

/// True when a division-like op would divide by a defined zero.
pub fn divides_by_zero(name: &str, a: &BitVec4, b: &BitVec4) -> bool {
    matches!(name, "divs" | "divu" | "mods" | "modu") && !a.has_unknown() && b.is_zero()
}

/// `sub`, the four divisions and the three shifts.
pub fn eval_binary(name: &str, a: &BitVec4, b: &BitVec4) -> Result<BitVec4, SimError> {
    let w = a.width();
    if b.width() != w {
        return Err(width_mismatch(&format!("comb.{name}"), w, b.width()));
    }
    if a.has_unknown() || b.has_unknown() {
        return Ok(BitVec4::all_x(w));
    }
    let shift = || b.to_index().filter(|s| *s < w);
    Ok(match name {
        "sub" => BitVec4::from_bigint(w, &(BigInt::from(uint(a)) - BigInt::from(uint(b)))),
        "divu" | "modu" => {
            let (x, y) = (uint(a), uint(b));
            if y.is_zero() {
                return Ok(BitVec4::all_x(w));
            }
            let r = if name == "divu" { x / y } else { x % y };
            BitVec4::from_biguint(w, &r)
        }
        "divs" | "mods" => {
            let (x, y) = (sint(a), sint(b));
            if y.is_zero() {
                return Ok(BitVec4::all_x(w));
            }
            let r = if name == "divs" { x / y } else { x % y };
            BitVec4::from_bigint(w, &r)
        }
        "shl" => match shift() {
            Some(s) => BitVec4::from_biguint(w, &(uint(a) << s)),
            None => BitVec4::zeros(w),
        },
        "shru" => match shift() {
            Some(s) => BitVec4::from_biguint(w, &(uint(a) >> s)),
            None => BitVec4::zeros(w),
        },
        "shrs" => {
            let sign = a.bit(w - 1);
            match shift() {
                Some(s) => {
                    let bits: Vec<Bit4> = (0..w).map(|i| if i + s < w { a.bit(i + s) } else { sign }).collect();
                    BitVec4::from_bits(&bits)
                }
                None => BitVec4::from_bits(&vec![sign; w]),
            }
        }
        _ => return Err(SimError::UnknownOperation(format!("comb.{name}"))),
    })
}

pub fn eval_icmp(pred: IcmpPredicate, a: &BitVec4, b: &BitVec4) -> Result<BitVec4, SimError> {
    if a.width() != b.width() {
        return Err(width_mismatch("comb.icmp", a.width(), b.width()));
    }
    if a.has_unknown() || b.has_unknown() {
        return Ok(BitVec4::all_x(1));
    }
    let ord = if pred.is_signed() {
        sint(a).cmp(&sint(b))
    } else {
        uint(a).cmp(&uint(b))
    };
    use std::cmp::Ordering::*;
    use IcmpPredicate::*;
    let r = match pred {
        Eq => ord == Equal,
        Ne => ord != Equal,
        Slt | Ult => ord == Less,
        Sle | Ule => ord != Greater,
        Sgt | Ugt => ord == Greater,
        Sge | Uge => ord != Less,
    };
    Ok(BitVec4::from_bool(r))
}

pub fn eval_extract(v: &BitVec4, low: usize, width: usize) -> Result<BitVec4, SimError> {
    if width == 0 || low.checked_add(width).is_none_or(|hi| hi > v.width()) {
        return Err(SimError::OutOfRange {
            op: "comb.extract".into(),
            detail: format!("bits [{low}, {low}+{width}) of a {}-bit value", v.width()),
        });
    }
    Ok(v.slice(low, width))
}

pub fn eval_replicate(v: &BitVec4, count: usize) -> BitVec4 {
    let w = v.width() * count;
    if v.has_unknown() {
        return BitVec4::all_x(w);
    }
    BitVec4::concat(std::iter::repeat_n(v, count))
}

pub fn eval_parity(v: &BitVec4) -> BitVec4 {
    if v.has_unknown() {
        return BitVec4::all_x(1);
    }
    let ones = v.iter().filter(|b| *b == Bit4::B1).count();
    BitVec4::from_bool(ones % 2 == 1)
}

pub fn eval_mux(sel: &BitVec4, a: &BitVec4, b: &BitVec4) -> Result<BitVec4, SimError> {
    if sel.width() != 1 {
        return Err(width_mismatch("comb.mux", 1, sel.width()));
    }
    if a.width() != b.width() {
        return Err(width_mismatch("comb.mux", a.width(), b.width()));
    }
    if any_unknown([sel, a, b]) {
        return Ok(BitVec4::all_x(a.width()));
    }
    Ok(if sel.is_one() { a.clone() } else { b.clone() })
}

pub fn eval_truth_table(inputs: &[BitVec4], table: &TruthTable) -> Result<BitVec4, SimError> {
    if inputs.len() != table.arity {
        return Err(SimError::ArityMismatch {
            op: "comb.truth_table".into(),
            expected: table.arity,
            found: inputs.len(),
        });
    }
    if let Some(bad) = inputs.iter().find(|i| i.width() != 1) {
        return Err(width_mismatch("comb.truth_table", 1, bad.width()));
    }
    if any_unknown(inputs) {
        return Ok(BitVec4::all_x(1));
    }
    let idx = inputs.iter().fold(0usize, |acc, i| (acc << 1) | i.is_one() as usize);
    Ok(BitVec4::from_bool(table.rows[idx]))
}

fn malformed(op: &CanonOp, attr: &str) -> SimError {
    SimError::MalformedAttribute {
        op: op.name.clone(),
        attr: attr.into(),
    }
}

fn icmp_predicate(op: &CanonOp) -> Result<IcmpPredicate, SimError> {
    match op.attr("predicate") {
        Some(AttrExpr::Int { value, .. }) => u64::try_from(value).ok().and_then(IcmpPredicate::from_code),
        Some(AttrExpr::Str(s)) => IcmpPredicate::from_name(s),
        _ => None,
    }
    .ok_or_else(|| malformed(op, "predicate"))
}

fn truth_table(op: &CanonOp, arity: usize) -> Result<TruthTable, SimError> {
    let Some(AttrExpr::Array(items)) = op.attr("lookupTable") else {
        return Err(malformed(op, "lookupTable"));
    };
    let rows = items
        .iter()
        .map(|i| match i {
            AttrExpr::Bool(b) => Some(*b),
            AttrExpr::Int { value, .. } if value.is_zero() => Some(false),
            AttrExpr::Int { value, .. } if value.is_one() => Some(true),
            _ => None,
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| malformed(op, "lookupTable"))?;
    if rows.len() != 1usize << arity.min(31) {
        return Err(malformed(op, "lookupTable"));
    }
    TruthTable::new(arity, rows).ok_or_else(|| malformed(op, "lookupTable"))
}

/// Evaluator for every `comb.*` operation.
pub fn eval(ctx: &mut Ctx<'_>, op: &CanonOp) -> Result<Vec<TypedValue>, SimError> {
    let kind = op.name.strip_prefix("comb.").unwrap_or(&op.name);
    let args = ctx.operand_bits(op)?;
    let rty = ctx.single_result_type(op)?;
    let w = ctx.result_width(op)?;
    let r = match kind {
        "add" | "mul" | "and" | "or" | "xor" | "concat" => eval_variadic(kind, &args, w)?,
        "sub" | "divs" | "divu" | "mods" | "modu" | "shl" | "shrs" | "shru" => {
            ctx.expect_arity(op, &args, 2)?;
            if divides_by_zero(kind, &args[0], &args[1]) {
                ctx.diagnostic(op, "division by zero yields X");
            }
            let r = eval_binary(kind, &args[0], &args[1])?;
            if r.width() != w {
                return Err(width_mismatch(&op.name, w, r.width()));
            }
            r
        }
        "icmp" => {
            ctx.expect_arity(op, &args, 2)?;
            if w != 1 {
                return Err(width_mismatch(&op.name, 1, w));
            }
            eval_icmp(icmp_predicate(op)?, &args[0], &args[1])?
        }
        "extract" => {
            ctx.expect_arity(op, &args, 1)?;
            let low = op.attr_u64("lowBit").ok_or_else(|| malformed(op, "lowBit"))?;
            eval_extract(&args[0], low as usize, w)?
        }
        "replicate" => {
            ctx.expect_arity(op, &args, 1)?;
            let iw = args[0].width();
            if w % iw != 0 {
                return Err(width_mismatch(&op.name, w - w % iw, w));
            }
            eval_replicate(&args[0], w / iw)
        }
        "parity" => {
            ctx.expect_arity(op, &args, 1)?;
            if w != 1 {
                return Err(width_mismatch(&op.name, 1, w));
            }
            eval_parity(&args[0])
        }
        "mux" => {
            ctx.expect_arity(op, &args, 3)?;
            let r = eval_mux(&args[0], &args[1], &args[2])?;
            if r.width() != w {
                return Err(width_mismatch(&op.name, w, r.width()));
            }
            r
        }
        "truth_table" => {
            let table = truth_table(op, args.len())?;
            eval_truth_table(&args, &table)?
        }
        _ => return Err(SimError::UnknownOperation(op.name.clone())),
    };
    Ok(vec![TypedValue::bits(rty, r)])
}
