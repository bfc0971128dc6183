// SPDX-License-Identifier: Apache-2.0

//! Typed runtime values.

use crate::bits::{BitVec4, MAX_WIDTH};
use crate::error::SimError;
use crate::mlir::ast::TypeExpr;
use crate::mlir::type_str;

/// Handle to a persistent storage cell (or an element inside one).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StorageRef {
    /// Index of the owning instance.
    pub inst: usize,
    /// Result id of the declaring operation.
    pub slot: String,
    /// Array element path below the cell root, outermost first.
    pub elems: Vec<usize>,
    /// Set when an index was unknown or out of range; reads give X and
    /// writes are dropped.
    pub poisoned: bool,
}

/// Handle to a memory declared by `seq.firmem`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MemRef {
    pub inst: usize,
    pub id: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Bits(BitVec4),
    /// Array elements (index 0 first) or struct fields (declaration order).
    Agg(Vec<Value>),
    Ref(StorageRef),
    Mem(MemRef),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedValue {
    pub ty: TypeExpr,
    pub val: Value,
}

/// Encoding width of an enum with `n` variants.
pub fn enum_width(n: usize) -> usize {
    let mut w = 0;
    while (1usize << w) < n {
        w += 1;
    }
    w.max(1)
}

/// Width of the flat bit string for a type, if it has one.
pub fn bit_width(ty: &TypeExpr) -> Option<usize> {
    let w = match ty {
        TypeExpr::Int(w) => *w as usize,
        TypeExpr::Clock => 1,
        TypeExpr::Array(n, e) => (*n as usize).checked_mul(bit_width(e)?)?,
        TypeExpr::Struct(fs) => fs.iter().map(|(_, t)| bit_width(t)).sum::<Option<usize>>()?,
        TypeExpr::Union(fs) => fs
            .iter()
            .map(|(_, t)| bit_width(t))
            .collect::<Option<Vec<_>>>()?
            .into_iter()
            .max()?,
        TypeExpr::Enum(names) => enum_width(names.len()),
        _ => return None,
    };
    (1..=MAX_WIDTH).contains(&w).then_some(w)
}

impl TypedValue {
    pub fn bits(ty: TypeExpr, v: BitVec4) -> Self {
        TypedValue {
            ty,
            val: Value::Bits(v),
        }
    }

    pub fn int(width: usize, v: u64) -> Self {
        TypedValue::bits(TypeExpr::Int(width as u32), BitVec4::from_u64(width, v))
    }

    pub fn bool(b: bool) -> Self {
        TypedValue::bits(TypeExpr::Int(1), BitVec4::from_bool(b))
    }

    /// All-X value of a type; `None` for handle types.
    pub fn all_x(ty: &TypeExpr) -> Option<Self> {
        Some(TypedValue {
            ty: ty.clone(),
            val: x_value(ty)?,
        })
    }

    pub fn as_bits(&self) -> Option<&BitVec4> {
        match &self.val {
            Value::Bits(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_ref(&self) -> Option<&StorageRef> {
        match &self.val {
            Value::Ref(r) => Some(r),
            _ => None,
        }
    }

    pub fn has_unknown(&self) -> bool {
        value_has_unknown(&self.val)
    }

    /// Flattens to one bit vector: struct field 0 and the highest array
    /// element are most significant.
    pub fn flatten(&self) -> Option<BitVec4> {
        flatten(&self.ty, &self.val)
    }

    pub fn unflatten(ty: &TypeExpr, bits: &BitVec4) -> Option<Self> {
        if bit_width(ty)? != bits.width() {
            return None;
        }
        Some(TypedValue {
            ty: ty.clone(),
            val: unflatten(ty, bits),
        })
    }
}

fn x_value(ty: &TypeExpr) -> Option<Value> {
    Some(match ty {
        TypeExpr::Array(n, e) => Value::Agg(vec![x_value(e)?; *n as usize]),
        TypeExpr::Struct(fs) => Value::Agg(fs.iter().map(|(_, t)| x_value(t)).collect::<Option<_>>()?),
        _ => Value::Bits(BitVec4::all_x(bit_width(ty)?)),
    })
}

fn value_has_unknown(v: &Value) -> bool {
    match v {
        Value::Bits(b) => b.has_unknown(),
        Value::Agg(items) => items.iter().any(value_has_unknown),
        Value::Ref(r) => r.poisoned,
        Value::Mem(_) => false,
    }
}

fn flatten(ty: &TypeExpr, v: &Value) -> Option<BitVec4> {
    match (ty, v) {
        (TypeExpr::Array(_, e), Value::Agg(items)) => {
            let parts = items.iter().rev().map(|i| flatten(e, i)).collect::<Option<Vec<_>>>()?;
            Some(BitVec4::concat(&parts))
        }
        (TypeExpr::Struct(fs), Value::Agg(items)) => {
            let parts = fs
                .iter()
                .zip(items)
                .map(|((_, t), i)| flatten(t, i))
                .collect::<Option<Vec<_>>>()?;
            Some(BitVec4::concat(&parts))
        }
        (_, Value::Bits(b)) => Some(b.clone()),
        _ => None,
    }
}

fn unflatten(ty: &TypeExpr, bits: &BitVec4) -> Value {
    match ty {
        TypeExpr::Array(n, e) => {
            let w = bit_width(e).unwrap_or(0);
            Value::Agg((0..*n as usize).map(|i| unflatten(e, &bits.slice(i * w, w))).collect())
        }
        TypeExpr::Struct(fs) => {
            let mut hi = bits.width();
            let mut out = Vec::with_capacity(fs.len());
            for (_, t) in fs {
                let w = bit_width(t).unwrap_or(0);
                hi -= w;
                out.push(unflatten(t, &bits.slice(hi, w)));
            }
            Value::Agg(out)
        }
        _ => Value::Bits(bits.clone()),
    }
}

/// Unwraps integer-like values, checking each against its expected width.
pub fn bits(vals: &[TypedValue], widths: &[usize]) -> Result<Vec<BitVec4>, SimError> {
    if vals.len() != widths.len() {
        return Err(SimError::ArityMismatch {
            op: "bits".into(),
            expected: widths.len(),
            found: vals.len(),
        });
    }
    vals.iter()
        .zip(widths)
        .map(|(v, w)| match v.as_bits() {
            Some(b) if b.width() == *w => Ok(b.clone()),
            Some(b) => Err(SimError::WidthMismatch {
                op: "bits".into(),
                expected: *w,
                found: b.width(),
            }),
            None => Err(SimError::TypeMismatch {
                op: "bits".into(),
                expected: format!("i{w}"),
                found: type_str(&v.ty),
            }),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(bit_width(&TypeExpr::Int(8)), Some(8));
        assert_eq!(bit_width(&TypeExpr::array(2, TypeExpr::Int(4))), Some(8));
        let s = TypeExpr::Struct(vec![("a".into(), TypeExpr::Int(3)), ("b".into(), TypeExpr::Int(5))]);
        assert_eq!(bit_width(&s), Some(8));
        let u = TypeExpr::Union(vec![("a".into(), TypeExpr::Int(3)), ("b".into(), TypeExpr::Int(5))]);
        assert_eq!(bit_width(&u), Some(5));
        assert_eq!(bit_width(&TypeExpr::Enum(vec!["A".into()])), Some(1));
        assert_eq!(
            bit_width(&TypeExpr::Enum(vec!["A".into(), "B".into(), "C".into()])),
            Some(2)
        );
        assert_eq!(bit_width(&TypeExpr::array(0, TypeExpr::Int(4))), None);
        assert_eq!(bit_width(&TypeExpr::inout(TypeExpr::Int(4))), None);
    }

    #[test]
    fn array_flattening_puts_index_zero_low() {
        let ty = TypeExpr::array(2, TypeExpr::Int(4));
        let v = TypedValue::unflatten(&ty, &BitVec4::parse_msb("10110010").unwrap()).unwrap();
        assert_eq!(
            v.val,
            Value::Agg(vec![
                Value::Bits(BitVec4::parse_msb("0010").unwrap()),
                Value::Bits(BitVec4::parse_msb("1011").unwrap()),
            ])
        );
        assert_eq!(v.flatten().unwrap().to_msb_string(), "10110010");
    }

    #[test]
    fn struct_flattening_puts_first_field_high() {
        let ty = TypeExpr::Struct(vec![("a".into(), TypeExpr::Int(2)), ("b".into(), TypeExpr::Int(1))]);
        let v = TypedValue::unflatten(&ty, &BitVec4::parse_msb("101").unwrap()).unwrap();
        assert_eq!(
            v.val,
            Value::Agg(vec![
                Value::Bits(BitVec4::parse_msb("10").unwrap()),
                Value::Bits(BitVec4::parse_msb("1").unwrap()),
            ])
        );
    }

    #[test]
    fn bits_contract() {
        let v = TypedValue::int(8, 5);
        assert_eq!(bits(std::slice::from_ref(&v), &[8]).unwrap()[0].to_u64(), Some(5));
        let x = TypedValue::all_x(&TypeExpr::Int(1)).unwrap();
        assert!(bits(&[x], &[1]).unwrap()[0].has_unknown());
        assert!(matches!(bits(&[v], &[4]), Err(SimError::WidthMismatch { .. })));
    }
}
