// SPDX-License-Identifier: Apache-2.0

//! `hw` dialect: constants, aggregates, wires, module outputs and instances.

use crate::bits::BitVec4;
use crate::error::SimError;
use crate::hwcore::{Ctx, InstanceState, Simulator, MAX_DEPTH};
use crate::mlir::ast::{AttrExpr, TypeExpr};
use crate::mlir::firmem_addr_width;
use crate::mlir::state::CanonOp;
use crate::mlir::type_str;
use crate::value::{bit_width, TypedValue, Value};

use super::{inner_sym, malformed};

type Results = Result<Vec<TypedValue>, SimError>;

fn type_mismatch(op: &CanonOp, expected: &str, found: &TypeExpr) -> SimError {
    SimError::TypeMismatch {
        op: op.name.clone(),
        expected: expected.to_string(),
        found: type_str(found),
    }
}

fn width_of(op: &CanonOp, ty: &TypeExpr) -> Result<usize, SimError> {
    bit_width(ty).ok_or_else(|| type_mismatch(op, "a type with a bit width", ty))
}

/// Element values of an array or struct operand.
fn items<'v>(op: &CanonOp, v: &'v TypedValue) -> Result<&'v [Value], SimError> {
    match &v.val {
        Value::Agg(items) => Ok(items),
        _ => Err(type_mismatch(op, "an aggregate", &v.ty)),
    }
}

fn fields<'t>(op: &CanonOp, ty: &'t TypeExpr) -> Result<&'t [(String, TypeExpr)], SimError> {
    match ty {
        TypeExpr::Struct(fs) | TypeExpr::Union(fs) => Ok(fs),
        _ => Err(type_mismatch(op, "a struct or union", ty)),
    }
}

/// Position of the field named by the `field` (or `fieldIndex`) attribute.
fn field_index(op: &CanonOp, fs: &[(String, TypeExpr)]) -> Result<usize, SimError> {
    if let Some(name) = op.attr_str("field") {
        return fs
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| SimError::UnknownField {
                op: op.name.clone(),
                field: name.to_string(),
            });
    }
    match op.attr_u64("fieldIndex") {
        Some(i) if (i as usize) < fs.len() => Ok(i as usize),
        Some(i) => Err(SimError::UnknownField {
            op: op.name.clone(),
            field: i.to_string(),
        }),
        None => Err(malformed(op, "field")),
    }
}

fn array_parts<'t>(op: &CanonOp, ty: &'t TypeExpr) -> Result<(usize, &'t TypeExpr), SimError> {
    match ty {
        TypeExpr::Array(n, e) => Ok((*n as usize, e)),
        _ => Err(type_mismatch(op, "an array", ty)),
    }
}

fn index_value(op: &CanonOp, idx: &BitVec4, size: usize) -> Result<Option<usize>, SimError> {
    let expected = firmem_addr_width(size as u64) as usize;
    if idx.width() != expected {
        return Err(SimError::WidthMismatch {
            op: op.name.clone(),
            expected,
            found: idx.width(),
        });
    }
    Ok(idx.to_index())
}

pub fn constant(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let ty = ctx.single_result_type(op)?;
    let w = ctx.result_width(op)?;
    let v = match op.attr("value") {
        Some(AttrExpr::Int { value, .. }) => BitVec4::from_bigint(w, value),
        Some(AttrExpr::Bool(b)) if w == 1 => BitVec4::from_bool(*b),
        _ => return Err(malformed(op, "value")),
    };
    Ok(vec![TypedValue::bits(ty, v)])
}

fn aggregate(op: &CanonOp, ty: &TypeExpr, attr: &AttrExpr) -> Result<Value, SimError> {
    match (ty, attr) {
        // Listed elements run from the highest index down, as in array_create.
        (TypeExpr::Array(n, e), AttrExpr::Array(xs)) if xs.len() == *n as usize => Ok(Value::Agg(
            xs.iter().rev().map(|x| aggregate(op, e, x)).collect::<Result<_, _>>()?,
        )),
        (TypeExpr::Struct(fs), AttrExpr::Array(xs)) if xs.len() == fs.len() => Ok(Value::Agg(
            fs.iter()
                .zip(xs)
                .map(|((_, t), x)| aggregate(op, t, x))
                .collect::<Result<_, _>>()?,
        )),
        (_, AttrExpr::Int { value, .. }) => Ok(Value::Bits(BitVec4::from_bigint(width_of(op, ty)?, value))),
        (_, AttrExpr::Bool(b)) if bit_width(ty) == Some(1) => Ok(Value::Bits(BitVec4::from_bool(*b))),
        (TypeExpr::Enum(names), _) => Ok(Value::Bits(enum_code(op, names, attr)?)),
        _ => Err(malformed(op, "fields")),
    }
}

pub fn aggregate_constant(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let ty = ctx.single_result_type(op)?;
    let attr = op.attr("fields").ok_or_else(|| malformed(op, "fields"))?;
    let val = aggregate(op, &ty, attr)?;
    Ok(vec![TypedValue { ty, val }])
}

fn enum_code(op: &CanonOp, names: &[String], attr: &AttrExpr) -> Result<BitVec4, SimError> {
    let name = match attr {
        AttrExpr::Str(s) => s.trim().to_string(),
        AttrExpr::Dialect { body: Some(b), .. } => b.split(',').next().unwrap_or("").trim().to_string(),
        _ => return Err(malformed(op, "field")),
    };
    let i = names
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| SimError::UnknownField {
            op: op.name.clone(),
            field: name,
        })?;
    Ok(BitVec4::from_u64(crate::value::enum_width(names.len()), i as u64))
}

pub fn enum_constant(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let ty = ctx.single_result_type(op)?;
    let TypeExpr::Enum(names) = &ty else {
        return Err(type_mismatch(op, "an enum", &ty));
    };
    let attr = op.attr("field").ok_or_else(|| malformed(op, "field"))?;
    let code = enum_code(op, names, attr)?;
    Ok(vec![TypedValue::bits(ty, code)])
}

pub fn enum_cmp(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let args = ctx.operand_bits(op)?;
    ctx.expect_arity(op, &args, 2)?;
    if op.operand_types[0] != op.operand_types[1] {
        return Err(type_mismatch(op, &type_str(&op.operand_types[0]), &op.operand_types[1]));
    }
    let r = if args[0].has_unknown() || args[1].has_unknown() {
        BitVec4::all_x(1)
    } else {
        BitVec4::from_bool(args[0] == args[1])
    };
    Ok(vec![TypedValue::bits(TypeExpr::Int(1), r)])
}

pub fn bitcast(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let v = ctx.operand(op, 0)?;
    let ty = ctx.single_result_type(op)?;
    let from = v
        .flatten()
        .ok_or_else(|| type_mismatch(op, "a type with a bit width", &v.ty))?;
    let to = width_of(op, &ty)?;
    if from.width() != to {
        return Err(SimError::WidthMismatch {
            op: op.name.clone(),
            expected: to,
            found: from.width(),
        });
    }
    Ok(vec![TypedValue::unflatten(&ty, &from).expect("width checked")])
}

pub fn wire(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let v = ctx.operand(op, 0)?;
    let ty = ctx.single_result_type(op)?;
    if let (Some(sym), Some(id)) = (inner_sym(op), op.result_ids.first()) {
        ctx.sim.write_wire(ctx.inst, &sym, id)?;
    }
    Ok(vec![TypedValue { ty, val: v.val }])
}

pub fn array_create(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let ty = ctx.single_result_type(op)?;
    let (n, e) = array_parts(op, &ty)?;
    let vals = ctx.operands(op)?;
    ctx.expect_arity(op, &vals, n)?;
    if let Some(bad) = vals.iter().find(|v| v.ty != *e) {
        return Err(type_mismatch(op, &type_str(e), &bad.ty));
    }
    let val = Value::Agg(vals.into_iter().rev().map(|v| v.val).collect());
    Ok(vec![TypedValue { ty, val }])
}

pub fn array_get(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let arr = ctx.operand(op, 0)?;
    let idx = ctx.operand(op, 1)?;
    let (n, e) = array_parts(op, &arr.ty)?;
    let ity = idx.ty.clone();
    let i = index_value(op, &ctx.bits_of(op, &idx)?, n)?;
    let ty = ctx.single_result_type(op)?;
    if ty != *e {
        return Err(type_mismatch(op, &type_str(e), &ty));
    }
    let xs = items(op, &arr)?;
    let val = match i {
        Some(i) if i < n => xs[i].clone(),
        Some(i) => {
            ctx.diagnostic(op, format!("index {i} out of range for {}", type_str(&arr.ty)));
            TypedValue::all_x(e).expect("element width").val
        }
        None => {
            let _ = ity;
            TypedValue::all_x(e).expect("element width").val
        }
    };
    Ok(vec![TypedValue { ty, val }])
}

pub fn array_slice(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let arr = ctx.operand(op, 0)?;
    let idx = ctx.operand(op, 1)?;
    let (n, e) = array_parts(op, &arr.ty)?;
    let low = index_value(op, &ctx.bits_of(op, &idx)?, n)?;
    let ty = ctx.single_result_type(op)?;
    let (m, re) = array_parts(op, &ty)?;
    if re != e {
        return Err(type_mismatch(op, &type_str(e), re));
    }
    let xs = items(op, &arr)?;
    let val = match low {
        Some(l) if l + m <= n => Value::Agg(xs[l..l + m].to_vec()),
        _ => TypedValue::all_x(&ty).expect("array width").val,
    };
    Ok(vec![TypedValue { ty, val }])
}

pub fn array_concat(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let ty = ctx.single_result_type(op)?;
    let (n, e) = array_parts(op, &ty)?;
    let vals = ctx.operands(op)?;
    let mut out = Vec::with_capacity(n);
    for v in vals.iter().rev() {
        let (_, ve) = array_parts(op, &v.ty)?;
        if ve != e {
            return Err(type_mismatch(op, &type_str(e), ve));
        }
        out.extend(items(op, v)?.iter().cloned());
    }
    if out.len() != n {
        return Err(SimError::WidthMismatch {
            op: op.name.clone(),
            expected: n,
            found: out.len(),
        });
    }
    Ok(vec![TypedValue {
        ty,
        val: Value::Agg(out),
    }])
}

pub fn struct_create(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let ty = ctx.single_result_type(op)?;
    let fs = fields(op, &ty)?;
    let vals = ctx.operands(op)?;
    ctx.expect_arity(op, &vals, fs.len())?;
    for ((_, t), v) in fs.iter().zip(&vals) {
        if v.ty != *t {
            return Err(type_mismatch(op, &type_str(t), &v.ty));
        }
    }
    let val = Value::Agg(vals.into_iter().map(|v| v.val).collect());
    Ok(vec![TypedValue { ty, val }])
}

pub fn struct_extract(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let s = ctx.operand(op, 0)?;
    let fs = fields(op, &s.ty)?;
    let i = field_index(op, fs)?;
    let val = items(op, &s)?[i].clone();
    Ok(vec![TypedValue {
        ty: fs[i].1.clone(),
        val,
    }])
}

pub fn struct_inject(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let s = ctx.operand(op, 0)?;
    let nv = ctx.operand(op, 1)?;
    let fs = fields(op, &s.ty)?;
    let i = field_index(op, fs)?;
    if nv.ty != fs[i].1 {
        return Err(type_mismatch(op, &type_str(&fs[i].1), &nv.ty));
    }
    let mut xs = items(op, &s)?.to_vec();
    xs[i] = nv.val;
    Ok(vec![TypedValue {
        ty: s.ty.clone(),
        val: Value::Agg(xs),
    }])
}

pub fn struct_explode(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let s = ctx.operand(op, 0)?;
    let fs = fields(op, &s.ty)?;
    Ok(fs
        .iter()
        .zip(items(op, &s)?)
        .map(|((_, t), v)| TypedValue {
            ty: t.clone(),
            val: v.clone(),
        })
        .collect())
}

pub fn union_create(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let ty = ctx.single_result_type(op)?;
    let fs = fields(op, &ty)?;
    let i = field_index(op, fs)?;
    let v = ctx.operand(op, 0)?;
    if v.ty != fs[i].1 {
        return Err(type_mismatch(op, &type_str(&fs[i].1), &v.ty));
    }
    let bits = v
        .flatten()
        .ok_or_else(|| type_mismatch(op, "a type with a bit width", &v.ty))?;
    let w = width_of(op, &ty)?;
    let padded = BitVec4::concat(
        [&BitVec4::zeros(w - bits.width()), &bits]
            .into_iter()
            .filter(|b| b.width() > 0),
    );
    Ok(vec![TypedValue::bits(ty, padded)])
}

pub fn union_extract(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let u = ctx.operand(op, 0)?;
    let fs = fields(op, &u.ty)?;
    let i = field_index(op, fs)?;
    let mty = &fs[i].1;
    let bits = u.flatten().ok_or_else(|| type_mismatch(op, "a union", &u.ty))?;
    let w = width_of(op, mty)?;
    Ok(vec![
        TypedValue::unflatten(mty, &bits.slice(0, w)).expect("member width")
    ])
}

pub fn output(ctx: &mut Ctx<'_>, op: &CanonOp) -> Results {
    let plan = ctx.state().plan.clone().expect("module plan");
    if op.operands.len() != plan.outputs.len() {
        return Err(SimError::ArityMismatch {
            op: op.name.clone(),
            expected: plan.outputs.len(),
            found: op.operands.len(),
        });
    }
    for ((port, id), ty) in plan.outputs.iter().zip(&op.operands).zip(&op.operand_types) {
        if *ty != port.ty {
            return Err(type_mismatch(op, &type_str(&port.ty), ty));
        }
        ctx.sim.write_out(ctx.inst, &port.name, id)?;
    }
    Ok(Vec::new())
}

/// Creates the child instance on first use and schedules its body for this
/// cycle. Port values flow through the plan's argument and result tasks.
pub fn instantiate(sim: &mut Simulator, parent: usize, op: &CanonOp) -> Result<(), SimError> {
    sim.cover("hw.instance");
    let name = op
        .attr_str("instanceName")
        .ok_or_else(|| malformed(op, "instanceName"))?
        .to_string();
    let module = op
        .attr_sym("moduleName")
        .ok_or_else(|| malformed(op, "moduleName"))?
        .to_string();
    let child = match sim.instances[parent].children.get(&name) {
        Some(&c) => c,
        None => {
            let mut cid = sim.instances[parent].cid.clone();
            cid.push(name.clone());
            if cid.len() > MAX_DEPTH {
                return Err(SimError::RecursionLimit(module));
            }
            let idx = sim.instances.len();
            sim.hw.h2inst.insert(cid.join("."), idx);
            sim.instances.push(InstanceState {
                cid,
                pa: Some(parent),
                module: module.clone(),
                ..InstanceState::default()
            });
            sim.instances[parent].children.insert(name, idx);
            idx
        }
    };
    sim.eval_module(child, &module, None)?;
    let plan = sim.instances[child].plan.clone().expect("child plan");
    if op.operands.len() != plan.inputs.len() {
        return Err(SimError::PortMismatch {
            module,
            detail: format!(
                "instance passes {} inputs, module has {}",
                op.operands.len(),
                plan.inputs.len()
            ),
        });
    }
    if op.result_types.len() != plan.outputs.len() {
        return Err(SimError::PortMismatch {
            module,
            detail: format!(
                "instance expects {} outputs, module has {}",
                op.result_types.len(),
                plan.outputs.len()
            ),
        });
    }
    if let Some((port, ty)) = plan.outputs.iter().zip(&op.result_types).find(|(p, t)| p.ty != **t) {
        return Err(SimError::PortMismatch {
            module,
            detail: format!(
                "output `{}` has type {}, instance expects {}",
                port.name,
                type_str(&port.ty),
                type_str(ty)
            ),
        });
    }
    Ok(())
}

/// Records a hierarchical path: `namepath` lists instance names.
pub fn hierpath(sim: &mut Simulator, op: &CanonOp) -> Result<(), SimError> {
    let sym = op.sym_name().ok_or_else(|| malformed(op, "sym_name"))?.to_string();
    let path = match op.attr("namepath") {
        Some(AttrExpr::Array(xs)) => xs
            .iter()
            .map(|x| match x {
                AttrExpr::Str(s) => s.clone(),
                AttrExpr::SymbolRef(p) => p.join("::"),
                AttrExpr::Dialect { body: Some(b), .. } => b.clone(),
                other => format!("{other:?}"),
            })
            .collect(),
        _ => Vec::new(),
    };
    sim.hw.hier.insert(sym, path);
    Ok(())
}

#[cfg(test)]
mod tests {
    use crate::hwcore::{SimConfig, Simulator};
    use crate::value::TypedValue;

    fn run(src: &str, inputs: Vec<TypedValue>) -> indexmap::IndexMap<String, TypedValue> {
        let mut sim = Simulator::from_source(src, "T", SimConfig::default()).unwrap();
        sim.run_cycle(inputs).unwrap()
    }

    fn u(v: &TypedValue) -> u64 {
        v.flatten().unwrap().to_u64().unwrap()
    }

    #[test]
    fn array_create_and_get() {
        let src = r#"
hw.module @T(in %i : i2, out o : i8) {
  %a = hw.constant 10 : i8
  %b = hw.constant 20 : i8
  %c = hw.constant 30 : i8
  %d = hw.constant 40 : i8
  %arr = hw.array_create %a, %b, %c, %d : i8
  %e = hw.array_get %arr[%i] : !hw.array<4xi8>, i2
  hw.output %e : i8
}
"#;
        let o = run(src, vec![TypedValue::int(2, 0)]);
        assert_eq!(u(&o["o"]), 40);
        let o = run(src, vec![TypedValue::int(2, 3)]);
        assert_eq!(u(&o["o"]), 10);
    }

    #[test]
    fn struct_round_trip() {
        let src = r#"
hw.module @T(in %x : i4, in %y : i4, out o : i4, out p : i8) {
  %s = hw.struct_create (%x, %y) : !hw.struct<a: i4, b: i4>
  %b = hw.struct_extract %s["b"] : !hw.struct<a: i4, b: i4>
  %f = hw.bitcast %s : (!hw.struct<a: i4, b: i4>) -> i8
  hw.output %b, %f : i4, i8
}
"#;
        let o = run(src, vec![TypedValue::int(4, 0xA), TypedValue::int(4, 0x3)]);
        assert_eq!(u(&o["o"]), 3);
        assert_eq!(u(&o["p"]), 0xA3);
    }

    #[test]
    fn instance_passes_values_through() {
        let src = r#"
hw.module @Inc(in %a : i8, out b : i8) {
  %one = hw.constant 1 : i8
  %s = comb.add %a, %one : i8
  hw.output %s : i8
}
hw.module @T(in %x : i8, out y : i8) {
  %r0 = hw.instance "u0" @Inc(a: %x: i8) -> (b: i8)
  %r1 = hw.instance "u1" @Inc(a: %r0: i8) -> (b: i8)
  hw.output %r1 : i8
}
"#;
        let o = run(src, vec![TypedValue::int(8, 5)]);
        assert_eq!(u(&o["y"]), 7);
    }

    #[test]
    fn self_instantiation_hits_the_depth_limit() {
        let src = r#"
hw.module @T(in %x : i8, out y : i8) {
  %r = hw.instance "again" @T(x: %x: i8) -> (y: i8)
  hw.output %r : i8
}
"#;
        let mut sim = Simulator::from_source(src, "T", SimConfig::default()).unwrap();
        let e = sim.run_cycle(vec![TypedValue::int(8, 1)]).unwrap_err();
        assert!(matches!(e, crate::error::SimError::RecursionLimit(_)), "{e:?}");
    }
}
