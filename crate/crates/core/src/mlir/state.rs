// SPDX-License-Identifier: Apache-2.0

//! Static semantics: alias assignment, operation normalization, and the
//! symbol table, plus the lookup functions used by the simulation layer.

use std::collections::{BTreeMap, HashMap, HashSet};

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_traits::ToPrimitive;

use super::ast::*;
use crate::bits::MAX_WIDTH;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StaticError {
    #[error("alias `{0}` is defined more than once")]
    DuplicateAlias(String),
    #[error("symbol `{0}` is defined more than once")]
    DuplicateSymbol(String),
    #[error("alias `{0}` is used but never defined")]
    UnresolvedAlias(String),
    #[error("unknown alias `{0}`")]
    UnknownAlias(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("alias `{0}` refers to itself")]
    AliasCycle(String),
    #[error("`{op}`: key `{key}` appears in both properties and attributes")]
    DuplicateKey { op: String, key: String },
    #[error("`{op}`: {declared} result ids but {types} result types")]
    ResultArity { op: String, declared: usize, types: usize },
    #[error("integer width {0} outside 1..={max}", max = MAX_WIDTH)]
    WidthLimit(u64),
    #[error("lookup requires the simulation phase")]
    WrongPhase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Preprocess,
    Simulation,
    Debug,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CanonRegion {
    pub blocks: Vec<CanonBlock>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CanonBlock {
    pub args: Vec<(String, TypeExpr)>,
    pub ops: Vec<CanonOp>,
}

/// Normalized operation: one attribute dictionary, value ids as plain
/// strings (`r` or `r#i` for multi-result ops), aliases resolved, no
/// locations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonOp {
    pub name: String,
    pub operands: Vec<String>,
    pub attrs: BTreeMap<String, AttrExpr>,
    pub regions: Vec<CanonRegion>,
    pub result_ids: Vec<String>,
    pub operand_types: Vec<TypeExpr>,
    pub result_types: Vec<TypeExpr>,
}

impl CanonOp {
    pub fn new(name: impl Into<String>) -> Self {
        CanonOp {
            name: name.into(),
            operands: Vec::new(),
            attrs: BTreeMap::new(),
            regions: Vec::new(),
            result_ids: Vec::new(),
            operand_types: Vec::new(),
            result_types: Vec::new(),
        }
    }

    pub fn attr(&self, key: &str) -> Option<&AttrExpr> {
        self.attrs.get(key)
    }

    pub fn has_attr(&self, key: &str) -> bool {
        self.attrs.contains_key(key)
    }

    pub fn attr_int(&self, key: &str) -> Option<&BigInt> {
        match self.attrs.get(key)? {
            AttrExpr::Int { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn attr_u64(&self, key: &str) -> Option<u64> {
        self.attr_int(key)?.to_u64()
    }

    pub fn attr_str(&self, key: &str) -> Option<&str> {
        match self.attrs.get(key)? {
            AttrExpr::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Leaf name of a symbol reference, or a plain string.
    pub fn attr_sym(&self, key: &str) -> Option<&str> {
        match self.attrs.get(key)? {
            AttrExpr::SymbolRef(path) => path.last().map(String::as_str),
            AttrExpr::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn sym_name(&self) -> Option<&str> {
        self.attr_sym("sym_name")
    }

    /// Every op nested in this op's regions, depth first.
    pub fn walk(&self, f: &mut impl FnMut(&CanonOp)) {
        for r in &self.regions {
            for b in &r.blocks {
                for op in &b.ops {
                    f(op);
                    op.walk(f);
                }
            }
        }
    }

    /// Resolves aliases in place. Applying it to an already-canonical op is
    /// the identity.
    pub fn canonicalize(&self, aliases: &Aliases) -> Result<CanonOp, StaticError> {
        let mut op = self.clone();
        op.resolve(aliases)?;
        Ok(op)
    }

    fn resolve(&mut self, al: &Aliases) -> Result<(), StaticError> {
        for t in self.operand_types.iter_mut().chain(self.result_types.iter_mut()) {
            *t = al.resolve_type(t)?;
        }
        for v in self.attrs.values_mut() {
            *v = al.resolve_attr(v)?;
        }
        for r in &mut self.regions {
            for b in &mut r.blocks {
                for (_, t) in &mut b.args {
                    *t = al.resolve_type(t)?;
                }
                for op in &mut b.ops {
                    op.resolve(al)?;
                }
            }
        }
        Ok(())
    }
}

/// Fully resolved alias maps. Keys carry their sigil (`!word`, `#zero`).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Aliases {
    pub types: IndexMap<String, TypeExpr>,
    pub attrs: IndexMap<String, AttrExpr>,
}

fn check_width(w: u64) -> Result<(), StaticError> {
    if w == 0 || w > MAX_WIDTH as u64 {
        Err(StaticError::WidthLimit(w))
    } else {
        Ok(())
    }
}

impl Aliases {
    pub fn resolve_type(&self, t: &TypeExpr) -> Result<TypeExpr, StaticError> {
        Ok(match t {
            TypeExpr::Alias(n) => self
                .types
                .get(&format!("!{n}"))
                .cloned()
                .ok_or_else(|| StaticError::UnresolvedAlias(format!("!{n}")))?,
            TypeExpr::Int(w) => {
                check_width(*w as u64)?;
                t.clone()
            }
            TypeExpr::Function(f) => TypeExpr::Function(self.resolve_fn(f)?),
            TypeExpr::Array(n, e) => TypeExpr::Array(*n, Box::new(self.resolve_type(e)?)),
            TypeExpr::InOut(e) => TypeExpr::InOut(Box::new(self.resolve_type(e)?)),
            TypeExpr::Struct(fs) => TypeExpr::Struct(self.resolve_fields(fs)?),
            TypeExpr::Union(fs) => TypeExpr::Union(self.resolve_fields(fs)?),
            TypeExpr::ModTy(ps) => TypeExpr::ModTy(
                ps.iter()
                    .map(|p| {
                        Ok(ModPort {
                            dir: p.dir,
                            name: p.name.clone(),
                            ty: self.resolve_type(&p.ty)?,
                        })
                    })
                    .collect::<Result<_, StaticError>>()?,
            ),
            TypeExpr::FirMem { width, .. } => {
                check_width(*width as u64)?;
                t.clone()
            }
            TypeExpr::Index
            | TypeExpr::None
            | TypeExpr::Float(_)
            | TypeExpr::Clock
            | TypeExpr::Enum(_)
            | TypeExpr::Opaque { .. } => t.clone(),
        })
    }

    fn resolve_fields(&self, fs: &[(String, TypeExpr)]) -> Result<Vec<(String, TypeExpr)>, StaticError> {
        fs.iter().map(|(n, t)| Ok((n.clone(), self.resolve_type(t)?))).collect()
    }

    fn resolve_fn(&self, f: &FunctionType) -> Result<FunctionType, StaticError> {
        Ok(FunctionType {
            inputs: f
                .inputs
                .iter()
                .map(|t| self.resolve_type(t))
                .collect::<Result<_, _>>()?,
            results: f
                .results
                .iter()
                .map(|t| self.resolve_type(t))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn resolve_attr(&self, a: &AttrExpr) -> Result<AttrExpr, StaticError> {
        Ok(match a {
            AttrExpr::Alias(n) => self
                .attrs
                .get(&format!("#{n}"))
                .cloned()
                .ok_or_else(|| StaticError::UnresolvedAlias(format!("#{n}")))?,
            AttrExpr::Int { value, ty } => AttrExpr::Int {
                value: value.clone(),
                ty: ty.as_ref().map(|t| self.resolve_type(t)).transpose()?,
            },
            AttrExpr::Array(items) => {
                AttrExpr::Array(items.iter().map(|i| self.resolve_attr(i)).collect::<Result<_, _>>()?)
            }
            AttrExpr::Dict(entries) => AttrExpr::Dict(
                entries
                    .iter()
                    .map(|e| Ok(AttrEntry::new(e.key.clone(), self.resolve_attr(&e.value)?)))
                    .collect::<Result<_, StaticError>>()?,
            ),
            AttrExpr::Type(t) => AttrExpr::Type(self.resolve_type(t)?),
            other => other.clone(),
        })
    }
}

/// Builds resolved alias maps from raw definitions, following chains and
/// rejecting cycles.
fn build_aliases(
    raw_types: &IndexMap<String, TypeExpr>,
    raw_attrs: &IndexMap<String, AttrExpr>,
) -> Result<Aliases, StaticError> {
    let mut out = Aliases::default();
    let mut visiting = HashSet::new();
    for k in raw_types.keys() {
        resolve_type_alias(k, raw_types, &mut out, &mut visiting)?;
    }
    let mut visiting = HashSet::new();
    for k in raw_attrs.keys() {
        resolve_attr_alias(k, raw_attrs, &mut out, &mut visiting)?;
    }
    Ok(out)
}

fn type_aliases_in(t: &TypeExpr, acc: &mut Vec<String>) {
    match t {
        TypeExpr::Alias(n) => acc.push(format!("!{n}")),
        TypeExpr::Function(f) => {
            for t in f.inputs.iter().chain(&f.results) {
                type_aliases_in(t, acc);
            }
        }
        TypeExpr::Array(_, e) | TypeExpr::InOut(e) => type_aliases_in(e, acc),
        TypeExpr::Struct(fs) | TypeExpr::Union(fs) => {
            for (_, t) in fs {
                type_aliases_in(t, acc);
            }
        }
        TypeExpr::ModTy(ps) => {
            for p in ps {
                type_aliases_in(&p.ty, acc);
            }
        }
        _ => {}
    }
}

fn attr_aliases_in(a: &AttrExpr, types: &mut Vec<String>, attrs: &mut Vec<String>) {
    match a {
        AttrExpr::Alias(n) => attrs.push(format!("#{n}")),
        AttrExpr::Int { ty: Some(t), .. } | AttrExpr::Type(t) => type_aliases_in(t, types),
        AttrExpr::Array(items) => {
            for i in items {
                attr_aliases_in(i, types, attrs);
            }
        }
        AttrExpr::Dict(es) => {
            for e in es {
                attr_aliases_in(&e.value, types, attrs);
            }
        }
        _ => {}
    }
}

fn resolve_type_alias(
    key: &str,
    raw: &IndexMap<String, TypeExpr>,
    out: &mut Aliases,
    visiting: &mut HashSet<String>,
) -> Result<(), StaticError> {
    if out.types.contains_key(key) {
        return Ok(());
    }
    let Some(body) = raw.get(key) else {
        return Err(StaticError::UnresolvedAlias(key.to_string()));
    };
    if !visiting.insert(key.to_string()) {
        return Err(StaticError::AliasCycle(key.to_string()));
    }
    let mut deps = Vec::new();
    type_aliases_in(body, &mut deps);
    for d in deps {
        resolve_type_alias(&d, raw, out, visiting)?;
    }
    let resolved = out.resolve_type(body)?;
    visiting.remove(key);
    out.types.insert(key.to_string(), resolved);
    Ok(())
}

fn resolve_attr_alias(
    key: &str,
    raw: &IndexMap<String, AttrExpr>,
    out: &mut Aliases,
    visiting: &mut HashSet<String>,
) -> Result<(), StaticError> {
    if out.attrs.contains_key(key) {
        return Ok(());
    }
    let Some(body) = raw.get(key) else {
        return Err(StaticError::UnresolvedAlias(key.to_string()));
    };
    if !visiting.insert(key.to_string()) {
        return Err(StaticError::AliasCycle(key.to_string()));
    }
    let (mut tdeps, mut adeps) = (Vec::new(), Vec::new());
    attr_aliases_in(body, &mut tdeps, &mut adeps);
    for d in adeps {
        resolve_attr_alias(&d, raw, out, visiting)?;
    }
    let resolved = out.resolve_attr(body)?;
    visiting.remove(key);
    out.attrs.insert(key.to_string(), resolved);
    Ok(())
}

/// Structural normalization of a parsed operation (aliases not yet
/// resolved).
fn normalize(op: &Operation, counts: &HashMap<String, u32>) -> Result<CanonOp, StaticError> {
    let mut c = CanonOp::new(op.name.clone());
    for u in &op.operands {
        c.operands.push(value_id(u, counts));
    }
    for e in op.properties.iter().flatten() {
        c.attrs.insert(e.key.clone(), e.value.clone());
    }
    for e in op.attributes.iter().flatten() {
        if matches!(e.value, AttrExpr::Loc(_)) {
            continue;
        }
        if c.attrs.insert(e.key.clone(), e.value.clone()).is_some() {
            return Err(StaticError::DuplicateKey {
                op: op.name.clone(),
                key: e.key.clone(),
            });
        }
    }
    for r in &op.results {
        match r.count {
            None => c.result_ids.push(r.name.clone()),
            Some(1) => c.result_ids.push(r.name.clone()),
            Some(n) => {
                for i in 0..n {
                    c.result_ids.push(format!("{}#{i}", r.name));
                }
            }
        }
    }
    c.operand_types = op.func_type.inputs.clone();
    c.result_types = op.func_type.results.clone();
    if c.result_ids.len() != c.result_types.len() {
        return Err(StaticError::ResultArity {
            op: op.name.clone(),
            declared: c.result_ids.len(),
            types: c.result_types.len(),
        });
    }
    for r in &op.regions {
        let mut cr = CanonRegion::default();
        for b in &r.blocks {
            let mut cb = CanonBlock::default();
            for a in &b.args {
                cb.args.push((a.name.clone(), a.ty.clone()));
            }
            for inner in &b.ops {
                cb.ops.push(normalize(inner, counts)?);
            }
            cr.blocks.push(cb);
        }
        c.regions.push(cr);
    }
    Ok(c)
}

fn value_id(u: &ValueUse, counts: &HashMap<String, u32>) -> String {
    let multi = counts.get(&u.name).is_some_and(|n| *n > 1);
    match (u.index, multi) {
        (Some(i), true) => format!("{}#{i}", u.name),
        (None, true) => format!("{}#0", u.name),
        (_, false) => u.name.clone(),
    }
}

fn collect_counts(op: &Operation, counts: &mut HashMap<String, u32>) {
    for r in &op.results {
        counts.insert(r.name.clone(), r.count.unwrap_or(1));
    }
    for r in &op.regions {
        for b in &r.blocks {
            for inner in &b.ops {
                collect_counts(inner, counts);
            }
        }
    }
}

/// Canonical form of one parsed operation under the given aliases.
pub fn canonicalize_op(op: &Operation, aliases: &Aliases) -> Result<CanonOp, StaticError> {
    let mut counts = HashMap::new();
    collect_counts(op, &mut counts);
    let mut c = normalize(op, &counts)?;
    c.resolve(aliases)?;
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlirState {
    pub prog: Vec<TopItem>,
    pub phase: Phase,
    pub aliases: Aliases,
    pub table: BTreeMap<String, CanonOp>,
    /// Unsymboled top-level operations, in source order, waiting to be
    /// moved onto the command queue.
    pub unsymboled: Vec<CanonOp>,
    pub debug_message: Option<String>,
}

fn with_sigil(s: &str, sigil: char) -> String {
    if s.starts_with(sigil) {
        s.to_string()
    } else {
        format!("{sigil}{s}")
    }
}

impl MlirState {
    pub fn new(file: SourceFile) -> Self {
        MlirState {
            prog: file.items,
            phase: Phase::Preprocess,
            aliases: Aliases::default(),
            table: BTreeMap::new(),
            unsymboled: Vec::new(),
            debug_message: None,
        }
    }

    pub fn types(&self) -> &IndexMap<String, TypeExpr> {
        &self.aliases.types
    }

    pub fn attrs(&self) -> &IndexMap<String, AttrExpr> {
        &self.aliases.attrs
    }

    fn check_phase(&self) -> Result<(), StaticError> {
        if self.phase == Phase::Simulation {
            Ok(())
        } else {
            Err(StaticError::WrongPhase)
        }
    }

    /// Looks up a type alias (with or without its `!`).
    pub fn rta(&self, alias: &str) -> Result<&TypeExpr, StaticError> {
        self.check_phase()?;
        let k = with_sigil(alias, '!');
        self.aliases.types.get(&k).ok_or(StaticError::UnknownAlias(k))
    }

    /// Looks up an attribute alias (with or without its `#`).
    pub fn raa(&self, alias: &str) -> Result<&AttrExpr, StaticError> {
        self.check_phase()?;
        let k = with_sigil(alias, '#');
        self.aliases.attrs.get(&k).ok_or(StaticError::UnknownAlias(k))
    }

    /// Looks up a symboled operation (with or without its `@`).
    pub fn rop(&self, symbol: &str) -> Result<&CanonOp, StaticError> {
        self.check_phase()?;
        let k = symbol.strip_prefix('@').unwrap_or(symbol);
        self.table
            .get(k)
            .ok_or_else(|| StaticError::UnknownSymbol(k.to_string()))
    }

    pub fn enter_debug(&mut self, message: impl Into<String>) {
        self.phase = Phase::Debug;
        self.debug_message = Some(message.into());
    }
}

fn op_sym(op: &Operation) -> Option<String> {
    match op.attr("sym_name")? {
        AttrExpr::Str(s) => Some(s.clone()),
        AttrExpr::SymbolRef(p) => p.last().cloned(),
        _ => None,
    }
}

/// Runs the three preprocessing phases: alias assignment, normalization,
/// and symbol table construction.
pub fn preprocess(file: SourceFile) -> Result<MlirState, StaticError> {
    let mut st = MlirState::new(file);
    let mut raw_types = IndexMap::new();
    let mut raw_attrs = IndexMap::new();
    let mut ops = Vec::new();
    for item in std::mem::take(&mut st.prog) {
        match item {
            TopItem::TypeAlias { name, ty } => {
                let k = format!("!{name}");
                if raw_types.insert(k.clone(), ty).is_some() {
                    return Err(StaticError::DuplicateAlias(k));
                }
            }
            TopItem::AttrAlias { name, value } => {
                let k = format!("#{name}");
                if raw_attrs.insert(k.clone(), value).is_some() {
                    return Err(StaticError::DuplicateAlias(k));
                }
            }
            TopItem::Op(op) => ops.push(op),
        }
    }
    st.aliases = build_aliases(&raw_types, &raw_attrs)?;
    for op in &ops {
        collect_symbols(op, &mut st)?;
    }
    st.phase = Phase::Simulation;
    Ok(st)
}

fn collect_symbols(op: &Operation, st: &mut MlirState) -> Result<(), StaticError> {
    if let Some(sym) = op_sym(op) {
        let canon = canonicalize_op(op, &st.aliases)?;
        if st.table.insert(sym.clone(), canon).is_some() {
            return Err(StaticError::DuplicateSymbol(sym));
        }
        return Ok(());
    }
    let container = op.name == "builtin.module";
    if !container {
        st.unsymboled.push(canonicalize_op(op, &st.aliases)?);
    }
    for r in &op.regions {
        for b in &r.blocks {
            for inner in &b.ops {
                if container {
                    collect_symbols(inner, st)?;
                } else {
                    collect_nested_symbols(inner, st)?;
                }
            }
        }
    }
    Ok(())
}

fn collect_nested_symbols(op: &Operation, st: &mut MlirState) -> Result<(), StaticError> {
    if let Some(sym) = op_sym(op) {
        let canon = canonicalize_op(op, &st.aliases)?;
        if st.table.insert(sym.clone(), canon).is_some() {
            return Err(StaticError::DuplicateSymbol(sym));
        }
        return Ok(());
    }
    for r in &op.regions {
        for b in &r.blocks {
            for inner in &b.ops {
                collect_nested_symbols(inner, st)?;
            }
        }
    }
    Ok(())
}
