// SPDX-License-Identifier: Apache-2.0

//! Syntax tree for generic MLIR text.

use num_bigint::BigInt;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceFile {
    pub items: Vec<TopItem>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TopItem {
    Op(Operation),
    /// `!name = type`; the name is stored without the `!` sigil.
    TypeAlias {
        name: String,
        ty: TypeExpr,
    },
    /// `#name = attr`; the name is stored without the `#` sigil.
    AttrAlias {
        name: String,
        value: AttrExpr,
    },
}

/// `%id` or `%id:N` on the left of an operation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpResult {
    pub name: String,
    pub count: Option<u32>,
}

/// `%id` or `%id#N` as an operand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueUse {
    pub name: String,
    pub index: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Successor {
    pub label: String,
    pub args: Vec<BlockArg>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockArg {
    pub name: String,
    pub ty: TypeExpr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttrEntry {
    pub key: String,
    pub value: AttrExpr,
}

impl AttrEntry {
    pub fn new(key: impl Into<String>, value: AttrExpr) -> Self {
        AttrEntry { key: key.into(), value }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FunctionType {
    pub inputs: Vec<TypeExpr>,
    pub results: Vec<TypeExpr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operation {
    pub results: Vec<OpResult>,
    pub name: String,
    pub operands: Vec<ValueUse>,
    pub successors: Vec<Successor>,
    pub properties: Option<Vec<AttrEntry>>,
    pub regions: Vec<Region>,
    pub attributes: Option<Vec<AttrEntry>>,
    pub func_type: FunctionType,
    /// Raw text between the parentheses of `loc(...)`.
    pub loc: Option<String>,
}

impl Operation {
    pub fn new(name: impl Into<String>) -> Self {
        Operation {
            results: Vec::new(),
            name: name.into(),
            operands: Vec::new(),
            successors: Vec::new(),
            properties: None,
            regions: Vec::new(),
            attributes: None,
            func_type: FunctionType::default(),
            loc: None,
        }
    }

    pub fn attr(&self, key: &str) -> Option<&AttrExpr> {
        self.properties
            .iter()
            .chain(self.attributes.iter())
            .flatten()
            .find(|e| e.key == key)
            .map(|e| &e.value)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Region {
    pub blocks: Vec<Block>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Block {
    pub label: Option<String>,
    pub args: Vec<BlockArg>,
    pub ops: Vec<Operation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PortDir {
    Input,
    Output,
    InOut,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModPort {
    pub dir: PortDir,
    pub name: String,
    pub ty: TypeExpr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeExpr {
    /// `!name`, stored without the sigil.
    Alias(String),
    Int(u32),
    Index,
    None,
    /// Builtin floating-point type such as `f32` or `bf16`.
    Float(String),
    Function(FunctionType),
    /// `!seq.clock`
    Clock,
    /// `!hw.array<NxT>`
    Array(u64, Box<TypeExpr>),
    /// `!hw.inout<T>`
    InOut(Box<TypeExpr>),
    /// `!hw.struct<a: T, ...>`
    Struct(Vec<(String, TypeExpr)>),
    /// `!hw.union<a: T, ...>`
    Union(Vec<(String, TypeExpr)>),
    /// `!hw.enum<A, B, ...>`
    Enum(Vec<String>),
    /// `!hw.modty<input a : T, output b : T>`
    ModTy(Vec<ModPort>),
    /// `!seq.firmem<D x W>` with an optional mask width.
    FirMem {
        depth: u64,
        width: u32,
        mask: Option<u32>,
    },
    /// Any other dialect type, kept as its name plus raw `<...>` body.
    Opaque {
        name: String,
        body: Option<String>,
    },
}

impl TypeExpr {
    pub fn array(n: u64, elem: TypeExpr) -> Self {
        TypeExpr::Array(n, Box::new(elem))
    }

    pub fn inout(inner: TypeExpr) -> Self {
        TypeExpr::InOut(Box::new(inner))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttrExpr {
    /// `#name`, stored without the sigil.
    Alias(String),
    Int {
        value: BigInt,
        ty: Option<TypeExpr>,
    },
    Bool(bool),
    Str(String),
    Array(Vec<AttrExpr>),
    Dict(Vec<AttrEntry>),
    /// `@a::@b`, stored without sigils.
    SymbolRef(Vec<String>),
    Type(TypeExpr),
    Unit,
    /// `#dialect<...>` or `#dialect.attr<...>` kept as name plus raw body.
    Dialect {
        name: String,
        body: Option<String>,
    },
    /// `loc(...)` raw body.
    Loc(String),
    /// Floating-point literal, kept as written.
    Float {
        text: String,
        ty: Option<TypeExpr>,
    },
    /// Builtin attribute with an opaque body, e.g. `array<i32: 1, 2>` or
    /// `dense<0>`.
    Builtin {
        name: String,
        body: String,
    },
}

impl AttrExpr {
    pub fn int(value: impl Into<BigInt>, ty: Option<TypeExpr>) -> Self {
        AttrExpr::Int {
            value: value.into(),
            ty,
        }
    }

    pub fn str(s: impl Into<String>) -> Self {
        AttrExpr::Str(s.into())
    }

    pub fn sym(s: impl Into<String>) -> Self {
        AttrExpr::SymbolRef(vec![s.into()])
    }
}
