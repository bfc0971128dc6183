// SPDX-License-Identifier: Apache-2.0

//! Custom assembly forms for the in-scope operations.
//!
//! Each form lowers to exactly the [`Operation`] a generic spelling would
//! give, so the printer only needs the generic syntax. Attribute names follow
//! the generic spellings accepted by the dialect evaluators.

use num_bigint::BigInt;

use super::ast::*;
use super::parser::{PResult, Parser};

const COMB_VARIADIC: &[&str] = &["add", "mul", "and", "or", "xor"];
const COMB_BINARY: &[&str] = &["sub", "divs", "divu", "mods", "modu", "shl", "shrs", "shru"];

/// Predicate spellings in `comb.icmp`, indexed by their integer encoding.
pub const ICMP_PREDICATES: [&str; 10] = ["eq", "ne", "slt", "sle", "sgt", "sge", "ult", "ule", "ugt", "uge"];

fn int_attr(v: impl Into<BigInt>, width: u32) -> AttrExpr {
    AttrExpr::int(v, Some(TypeExpr::Int(width)))
}

fn fn_type(inputs: Vec<TypeExpr>, results: Vec<TypeExpr>) -> FunctionType {
    FunctionType { inputs, results }
}

/// Address width used by firmem ports: `max(1, ceil(log2(depth)))`.
pub fn firmem_addr_width(depth: u64) -> u32 {
    let bits = 64 - depth.saturating_sub(1).leading_zeros();
    bits.max(1)
}

struct Builder {
    op: Operation,
    attrs: Vec<AttrEntry>,
}

impl Builder {
    fn new(name: &str, results: Vec<OpResult>) -> Self {
        let mut op = Operation::new(name);
        op.results = results;
        Builder { op, attrs: Vec::new() }
    }

    fn attr(&mut self, key: &str, value: AttrExpr) {
        if !self.attrs.iter().any(|e| e.key == key) {
            self.attrs.push(AttrEntry::new(key, value));
        }
    }

    fn finish(mut self, inputs: Vec<TypeExpr>, results: Vec<TypeExpr>) -> Operation {
        if !self.attrs.is_empty() {
            self.op.attributes = Some(self.attrs);
        }
        self.op.func_type = fn_type(inputs, results);
        self.op
    }
}

fn ssa_name_attr(results: &[OpResult]) -> Option<AttrExpr> {
    let r = results.first()?;
    if r.name.starts_with(|c: char| c.is_ascii_digit()) {
        None
    } else {
        Some(AttrExpr::str(r.name.clone()))
    }
}

impl Parser<'_> {
    fn ty_of(&self, v: &ValueUse, fallback: TypeExpr) -> TypeExpr {
        let key = match v.index {
            Some(i) => format!("{}#{i}", v.name),
            None => v.name.clone(),
        };
        self.value_types.get(&key).cloned().unwrap_or(fallback)
    }

    /// Optional trailing `{...}` attribute dictionary, merged into `b`.
    fn opt_attr_dict(&mut self, b: &mut Builder) -> PResult<()> {
        if self.at('{') {
            for e in self.dict()? {
                b.attr(&e.key, e.value);
            }
        }
        Ok(())
    }

    fn opt_sym(&mut self, b: &mut Builder) -> PResult<()> {
        if self.eat_kw("sym") {
            let s = self.symbol()?;
            b.attr("inner_sym", AttrExpr::sym(s));
        }
        Ok(())
    }

    fn opt_bin(&mut self, b: &mut Builder) {
        if self.eat_kw("bin") {
            b.attr("twoState", AttrExpr::Unit);
        }
    }

    pub(super) fn parse_custom_op(&mut self, results: Vec<OpResult>, name: &str) -> PResult<Operation> {
        let mut op = self.custom_body(results, name)?;
        op.loc = self.opt_loc()?;
        Ok(op)
    }

    fn custom_body(&mut self, results: Vec<OpResult>, name: &str) -> PResult<Operation> {
        let mut b = Builder::new(name, results);
        if let Some(kind) = name.strip_prefix("comb.") {
            return self.comb_op(b, kind);
        }
        match name {
            "module" | "builtin.module" => {
                b.op.name = "builtin.module".into();
                if self.at('@') {
                    let s = self.symbol()?;
                    b.attr("sym_name", AttrExpr::str(s));
                }
                if self.eat_kw("attributes") {
                    self.opt_attr_dict(&mut b)?;
                }
                let saved = self.value_types.clone();
                let region = self.region()?;
                self.value_types = saved;
                b.op.regions.push(region);
                Ok(b.finish(vec![], vec![]))
            }
            "hw.module" => self.hw_module(b),
            "hw.output" => {
                let mut inputs = Vec::new();
                if self.at('%') {
                    b.op.operands = self.value_uses()?;
                    self.expect(':')?;
                    inputs = self.type_list()?;
                }
                Ok(b.finish(inputs, vec![]))
            }
            "hw.constant" => {
                let (value, ty) = if self.eat_kw("true") {
                    (BigInt::from(1), TypeExpr::Int(1))
                } else if self.eat_kw("false") {
                    (BigInt::from(0), TypeExpr::Int(1))
                } else {
                    let v = self.integer()?;
                    self.expect(':')?;
                    (v, self.parse_type()?)
                };
                b.attr("value", AttrExpr::int(value, Some(ty.clone())));
                self.opt_attr_dict(&mut b)?;
                Ok(b.finish(vec![], vec![ty]))
            }
            "hw.instance" => self.hw_instance(b),
            "hw.wire" => {
                let v = self.value_use()?;
                b.op.operands.push(v);
                if let Some(n) = ssa_name_attr(&b.op.results) {
                    b.attr("name", n);
                }
                self.opt_sym(&mut b)?;
                self.opt_attr_dict(&mut b)?;
                self.expect(':')?;
                let ty = self.parse_type()?;
                Ok(b.finish(vec![ty.clone()], vec![ty]))
            }
            "hw.bitcast" => {
                b.op.operands.push(self.value_use()?);
                self.expect(':')?;
                let ft = self.func_type()?;
                Ok(b.finish(ft.inputs, ft.results))
            }
            "hw.array_create" => {
                b.op.operands = self.value_uses()?;
                self.expect(':')?;
                let elem = self.parse_type()?;
                let n = b.op.operands.len();
                let inputs = vec![elem.clone(); n];
                Ok(b.finish(inputs, vec![TypeExpr::array(n as u64, elem)]))
            }
            "hw.array_get" => {
                let arr = self.value_use()?;
                self.expect('[')?;
                let idx = self.value_use()?;
                self.expect(']')?;
                self.expect(':')?;
                let arr_ty = self.parse_type()?;
                self.expect(',')?;
                let idx_ty = self.parse_type()?;
                let elem = match &self.resolved(&arr_ty) {
                    TypeExpr::Array(_, e) => (**e).clone(),
                    _ => return self.error(&["`!hw.array` type"]),
                };
                b.op.operands = vec![arr, idx];
                Ok(b.finish(vec![arr_ty, idx_ty], vec![elem]))
            }
            "hw.struct_extract" => {
                let s = self.value_use()?;
                self.expect('[')?;
                let field = self.string()?;
                self.expect(']')?;
                self.opt_attr_dict(&mut b)?;
                self.expect(':')?;
                let sty = self.parse_type()?;
                let fty = match &self.resolved(&sty) {
                    TypeExpr::Struct(fields) => fields.iter().find(|(n, _)| *n == field).map(|(_, t)| t.clone()),
                    _ => None,
                };
                let Some(fty) = fty else {
                    return self.error(&["struct type containing the field"]);
                };
                b.attr("field", AttrExpr::str(field));
                b.op.operands.push(s);
                Ok(b.finish(vec![sty], vec![fty]))
            }
            "hw.struct_create" => {
                self.expect('(')?;
                if !self.at(')') {
                    b.op.operands = self.value_uses()?;
                }
                self.expect(')')?;
                self.expect(':')?;
                let sty = self.parse_type()?;
                let inputs = match &self.resolved(&sty) {
                    TypeExpr::Struct(fields) => fields.iter().map(|(_, t)| t.clone()).collect(),
                    _ => return self.error(&["`!hw.struct` type"]),
                };
                Ok(b.finish(inputs, vec![sty]))
            }
            "seq.firreg" => self.firreg(b),
            "seq.firmem" => {
                let rl = self.small_int()?;
                self.expect(',')?;
                let wl = self.small_int()?;
                self.expect(',')?;
                let ruw = self.bare_ident()?;
                self.expect(',')?;
                let wuw = self.bare_ident()?;
                b.attr("readLatency", int_attr(rl, 32));
                b.attr("writeLatency", int_attr(wl, 32));
                b.attr("ruw", AttrExpr::str(ruw));
                b.attr("wuw", AttrExpr::str(wuw));
                if let Some(n) = ssa_name_attr(&b.op.results) {
                    b.attr("name", n);
                }
                self.opt_attr_dict(&mut b)?;
                self.expect(':')?;
                let ty = self.firmem_body()?;
                Ok(b.finish(vec![], vec![ty]))
            }
            "seq.firmem.read_port" | "seq.firmem.write_port" | "seq.firmem.read_write_port" => {
                self.firmem_port(b, name)
            }
            "sv.reg" | "sv.logic" | "sv.wire" => {
                if let Some(n) = ssa_name_attr(&b.op.results) {
                    b.attr("name", n);
                }
                self.opt_sym(&mut b)?;
                self.opt_attr_dict(&mut b)?;
                self.expect(':')?;
                let ty = self.parse_type()?;
                Ok(b.finish(vec![], vec![ty]))
            }
            "sv.read_inout" => {
                let r = self.value_use()?;
                self.expect(':')?;
                let ty = self.parse_type()?;
                let inner = match &self.resolved(&ty) {
                    TypeExpr::InOut(t) => (**t).clone(),
                    _ => return self.error(&["`!hw.inout` type"]),
                };
                b.op.operands.push(r);
                Ok(b.finish(vec![ty], vec![inner]))
            }
            "sv.assign" | "sv.bpassign" | "sv.passign" | "sv.force" => {
                let r = self.value_use()?;
                self.expect(',')?;
                let v = self.value_use()?;
                self.opt_attr_dict(&mut b)?;
                self.expect(':')?;
                let ty = self.parse_type()?;
                b.op.operands = vec![r, v];
                Ok(b.finish(vec![TypeExpr::inout(ty.clone()), ty], vec![]))
            }
            "sv.release" => {
                let r = self.value_use()?;
                self.expect(':')?;
                let ty = self.parse_type()?;
                b.op.operands.push(r);
                Ok(b.finish(vec![ty], vec![]))
            }
            "sv.array_index_inout" => {
                let r = self.value_use()?;
                self.expect('[')?;
                let i = self.value_use()?;
                self.expect(']')?;
                self.expect(':')?;
                let rty = self.parse_type()?;
                self.expect(',')?;
                let ity = self.parse_type()?;
                let elem = match &self.resolved(&rty) {
                    TypeExpr::InOut(inner) => match &self.resolved(inner) {
                        TypeExpr::Array(_, e) => (**e).clone(),
                        _ => return self.error(&["`!hw.inout` of an array"]),
                    },
                    _ => return self.error(&["`!hw.inout` of an array"]),
                };
                b.op.operands = vec![r, i];
                Ok(b.finish(vec![rty, ity], vec![TypeExpr::inout(elem)]))
            }
            "sv.constantX" | "sv.constantZ" => {
                self.expect(':')?;
                let ty = self.parse_type()?;
                Ok(b.finish(vec![], vec![ty]))
            }
            "sv.alwaysff" => self.alwaysff(b),
            "sv.always" => {
                let mut events = Vec::new();
                let mut inputs = Vec::new();
                loop {
                    let edge = self.bare_ident()?;
                    if !matches!(edge.as_str(), "posedge" | "negedge" | "edge") {
                        return self.error(&["`posedge`", "`negedge`", "`edge`"]);
                    }
                    let v = self.value_use()?;
                    inputs.push(self.ty_of(&v, TypeExpr::Int(1)));
                    b.op.operands.push(v);
                    events.push(AttrExpr::str(edge));
                    if !self.eat(',') {
                        break;
                    }
                }
                b.attr("events", AttrExpr::Array(events));
                b.op.regions.push(self.region()?);
                Ok(b.finish(inputs, vec![]))
            }
            "sv.initial" | "sv.alwayscomb" => {
                b.op.regions.push(self.region()?);
                Ok(b.finish(vec![], vec![]))
            }
            "sv.if" => {
                let c = self.value_use()?;
                let ty = self.ty_of(&c, TypeExpr::Int(1));
                b.op.operands.push(c);
                b.op.regions.push(self.region()?);
                if self.eat_kw("else") {
                    b.op.regions.push(self.region()?);
                }
                Ok(b.finish(vec![ty], vec![]))
            }
            "sv.ifdef" | "sv.ifdef.procedural" => {
                let m = self.symbol()?;
                b.attr("cond", AttrExpr::sym(m));
                b.op.regions.push(self.region()?);
                if self.eat_kw("else") {
                    b.op.regions.push(self.region()?);
                }
                Ok(b.finish(vec![], vec![]))
            }
            "sv.macro.decl" => {
                let m = self.symbol()?;
                b.attr("sym_name", AttrExpr::str(m));
                self.opt_attr_dict(&mut b)?;
                Ok(b.finish(vec![], vec![]))
            }
            "sv.macro.def" => {
                let m = self.symbol()?;
                b.attr("macroName", AttrExpr::sym(m));
                let text = if self.at('"') { self.string()? } else { String::new() };
                b.attr("format_string", AttrExpr::str(text));
                Ok(b.finish(vec![], vec![]))
            }
            "sv.macro.ref" | "sv.macro.ref.se" => {
                let m = self.symbol()?;
                b.attr("macroName", AttrExpr::sym(m));
                self.expect(':')?;
                let ty = self.parse_type()?;
                Ok(b.finish(vec![], vec![ty]))
            }
            _ => self.error(&["generic operation (`\"dialect.op\"`)"]),
        }
    }

    fn comb_op(&mut self, mut b: Builder, kind: &str) -> PResult<Operation> {
        if COMB_VARIADIC.contains(&kind) || COMB_BINARY.contains(&kind) {
            self.opt_bin(&mut b);
            b.op.operands = self.value_uses()?;
            self.opt_attr_dict(&mut b)?;
            self.expect(':')?;
            let ty = self.parse_type()?;
            let n = b.op.operands.len();
            return Ok(b.finish(vec![ty.clone(); n], vec![ty]));
        }
        match kind {
            "icmp" => {
                self.opt_bin(&mut b);
                let pred = self.bare_ident()?;
                let Some(code) = ICMP_PREDICATES.iter().position(|p| *p == pred) else {
                    return self.error(&["icmp predicate"]);
                };
                b.attr("predicate", int_attr(code, 64));
                b.op.operands = self.value_uses()?;
                self.opt_attr_dict(&mut b)?;
                self.expect(':')?;
                let ty = self.parse_type()?;
                Ok(b.finish(vec![ty.clone(), ty], vec![TypeExpr::Int(1)]))
            }
            "extract" => {
                b.op.operands.push(self.value_use()?);
                self.expect_kw("from")?;
                let low = self.small_int()?;
                b.attr("lowBit", int_attr(low, 32));
                self.expect(':')?;
                let ft = self.func_type()?;
                Ok(b.finish(ft.inputs, ft.results))
            }
            "concat" => {
                b.op.operands = self.value_uses()?;
                self.expect(':')?;
                let tys = self.type_list()?;
                let total = tys
                    .iter()
                    .map(|t| match t {
                        TypeExpr::Int(w) => Some(*w),
                        _ => None,
                    })
                    .sum::<Option<u32>>();
                let Some(total) = total else {
                    return self.error(&["integer operand types"]);
                };
                Ok(b.finish(tys, vec![TypeExpr::Int(total)]))
            }
            "replicate" => {
                b.op.operands.push(self.value_use()?);
                self.expect(':')?;
                let ft = self.func_type()?;
                Ok(b.finish(ft.inputs, ft.results))
            }
            "parity" => {
                self.opt_bin(&mut b);
                b.op.operands.push(self.value_use()?);
                self.expect(':')?;
                let ty = self.parse_type()?;
                Ok(b.finish(vec![ty], vec![TypeExpr::Int(1)]))
            }
            "mux" => {
                self.opt_bin(&mut b);
                b.op.operands = self.value_uses()?;
                self.expect(':')?;
                let ty = self.parse_type()?;
                Ok(b.finish(vec![TypeExpr::Int(1), ty.clone(), ty.clone()], vec![ty]))
            }
            "truth_table" => {
                b.op.operands = self.value_uses()?;
                self.expect_str("->")?;
                self.expect('[')?;
                let mut rows = Vec::new();
                loop {
                    if self.eat_kw("true") {
                        rows.push(AttrExpr::Bool(true));
                    } else if self.eat_kw("false") {
                        rows.push(AttrExpr::Bool(false));
                    } else {
                        return self.error(&["`true`", "`false`"]);
                    }
                    if !self.eat(',') {
                        break;
                    }
                }
                self.expect(']')?;
                b.attr("lookupTable", AttrExpr::Array(rows));
                let n = b.op.operands.len();
                Ok(b.finish(vec![TypeExpr::Int(1); n], vec![TypeExpr::Int(1)]))
            }
            _ => self.error(&["comb operation"]),
        }
    }

    fn hw_module(&mut self, mut b: Builder) -> PResult<Operation> {
        if self.eat_kw("private") {
            b.attr("sym_visibility", AttrExpr::str("private"));
        }
        let sym = self.symbol()?;
        let saved = self.value_types.clone();
        self.expect('(')?;
        let mut ports = Vec::new();
        let mut args = Vec::new();
        if !self.at(')') {
            loop {
                let dir = if self.eat_kw("in") {
                    PortDir::Input
                } else if self.eat_kw("out") {
                    PortDir::Output
                } else if self.eat_kw("inout") {
                    PortDir::InOut
                } else {
                    return self.error(&["`in`", "`out`", "`inout`"]);
                };
                let (arg, pname) = if dir == PortDir::Output {
                    (None, self.field_name()?)
                } else {
                    let a = self.sigil_suffix('%')?;
                    let n = if self.at('"') { self.string()? } else { a.clone() };
                    (Some(a), n)
                };
                self.expect(':')?;
                let ty = self.parse_type()?;
                if let Some(a) = arg {
                    let aty = if dir == PortDir::InOut {
                        TypeExpr::inout(ty.clone())
                    } else {
                        ty.clone()
                    };
                    self.value_types.insert(a.clone(), aty.clone());
                    args.push(BlockArg { name: a, ty: aty });
                }
                ports.push(ModPort { dir, name: pname, ty });
                if !self.eat(',') {
                    break;
                }
            }
        }
        self.expect(')')?;
        b.attr("module_type", AttrExpr::Type(TypeExpr::ModTy(ports)));
        b.attr("sym_name", AttrExpr::str(sym));
        if self.eat_kw("attributes") {
            self.opt_attr_dict(&mut b)?;
        }
        let mut region = self.region()?;
        self.value_types = saved;
        if region.blocks.is_empty() {
            region.blocks.push(Block::default());
        }
        let entry = &mut region.blocks[0];
        if entry.label.is_none() {
            entry.label = Some("bb0".into());
        }
        if !args.is_empty() && entry.args.is_empty() {
            entry.args = args;
        }
        b.op.regions.push(region);
        Ok(b.finish(vec![], vec![]))
    }

    fn hw_instance(&mut self, mut b: Builder) -> PResult<Operation> {
        let inst_name = self.string()?;
        b.attr("instanceName", AttrExpr::str(inst_name));
        self.opt_sym(&mut b)?;
        let module = self.symbol()?;
        self.expect('(')?;
        let mut arg_names = Vec::new();
        let mut inputs = Vec::new();
        if !self.at(')') {
            loop {
                arg_names.push(AttrExpr::str(self.field_name()?));
                self.expect(':')?;
                b.op.operands.push(self.value_use()?);
                self.expect(':')?;
                inputs.push(self.parse_type()?);
                if !self.eat(',') {
                    break;
                }
            }
        }
        self.expect(')')?;
        self.expect_str("->")?;
        self.expect('(')?;
        let mut res_names = Vec::new();
        let mut results = Vec::new();
        if !self.at(')') {
            loop {
                res_names.push(AttrExpr::str(self.field_name()?));
                self.expect(':')?;
                results.push(self.parse_type()?);
                if !self.eat(',') {
                    break;
                }
            }
        }
        self.expect(')')?;
        b.attr("moduleName", AttrExpr::sym(module));
        b.attr("argNames", AttrExpr::Array(arg_names));
        b.attr("resultNames", AttrExpr::Array(res_names));
        self.opt_attr_dict(&mut b)?;
        Ok(b.finish(inputs, results))
    }

    fn firreg(&mut self, mut b: Builder) -> PResult<Operation> {
        let next = self.value_use()?;
        self.expect_kw("clock")?;
        let clk = self.value_use()?;
        if let Some(n) = ssa_name_attr(&b.op.results) {
            b.attr("name", n);
        }
        self.opt_sym(&mut b)?;
        let mut reset = None;
        if self.eat_kw("reset") {
            let is_async = if self.eat_kw("async") {
                true
            } else {
                self.expect_kw("sync")?;
                false
            };
            let rst = self.value_use()?;
            self.expect(',')?;
            let rv = self.value_use()?;
            if is_async {
                b.attr("isAsync", AttrExpr::Unit);
            }
            reset = Some((rst, rv));
        }
        let preset = if self.eat_kw("preset") {
            Some(self.integer()?)
        } else {
            None
        };
        self.opt_attr_dict(&mut b)?;
        self.expect(':')?;
        let ty = self.parse_type()?;
        if let Some(p) = preset {
            b.attr("preset", AttrExpr::int(p, Some(ty.clone())));
        }
        let mut inputs = vec![ty.clone(), self.ty_of(&clk, TypeExpr::Clock)];
        b.op.operands = vec![next, clk];
        if let Some((rst, rv)) = reset {
            inputs.push(self.ty_of(&rst, TypeExpr::Int(1)));
            inputs.push(ty.clone());
            b.op.operands.push(rst);
            b.op.operands.push(rv);
        }
        Ok(b.finish(inputs, vec![ty]))
    }

    fn firmem_port(&mut self, mut b: Builder, name: &str) -> PResult<Operation> {
        let mem = self.value_use()?;
        self.expect('[')?;
        let addr = self.value_use()?;
        self.expect(']')?;
        let mut ops = vec![mem.clone(), addr.clone()];
        let mut data_mode = Vec::new();
        if name != "seq.firmem.read_port" {
            self.expect('=')?;
            let d = self.value_use()?;
            data_mode.push(d.clone());
            ops.push(d);
            if name == "seq.firmem.read_write_port" {
                self.expect_kw("if")?;
                let m = self.value_use()?;
                data_mode.push(m.clone());
                ops.push(m);
            }
        }
        self.expect(',')?;
        self.expect_kw("clock")?;
        let clk = self.value_use()?;
        ops.push(clk.clone());
        let en = if self.eat_kw("enable") {
            Some(self.value_use()?)
        } else {
            None
        };
        let mask = if name == "seq.firmem.write_port" && self.eat_kw("mask") {
            Some(self.value_use()?)
        } else {
            None
        };
        self.opt_attr_dict(&mut b)?;
        self.expect(':')?;
        let mty = self.firmem_body()?;
        let (depth, width) = match &mty {
            TypeExpr::FirMem { depth, width, .. } => (*depth, *width),
            _ => unreachable!(),
        };
        let aw = firmem_addr_width(depth);
        let mut inputs = vec![mty, self.ty_of(&addr, TypeExpr::Int(aw))];
        if !data_mode.is_empty() {
            inputs.push(TypeExpr::Int(width));
        }
        if data_mode.len() == 2 {
            inputs.push(TypeExpr::Int(1));
        }
        inputs.push(self.ty_of(&clk, TypeExpr::Clock));
        if let Some(e) = en {
            inputs.push(TypeExpr::Int(1));
            ops.push(e);
        }
        if let Some(m) = mask {
            let mty = if self.eat(',') {
                self.parse_type()?
            } else {
                self.ty_of(&m, TypeExpr::Int(1))
            };
            inputs.push(mty);
            ops.push(m);
        }
        b.op.operands = ops;
        let results = if name == "seq.firmem.write_port" {
            vec![]
        } else {
            vec![TypeExpr::Int(width)]
        };
        Ok(b.finish(inputs, results))
    }

    fn alwaysff(&mut self, mut b: Builder) -> PResult<Operation> {
        self.expect('(')?;
        let edge = self.bare_ident()?;
        let clk = self.value_use()?;
        self.expect(')')?;
        b.attr("clockEdge", AttrExpr::str(edge));
        let mut inputs = vec![self.ty_of(&clk, TypeExpr::Int(1))];
        b.op.operands.push(clk);
        b.op.regions.push(self.region()?);
        if self.at('(') {
            self.expect('(')?;
            let style = self.bare_ident()?;
            let style = match style.as_str() {
                "syncreset" => "sync",
                "asyncreset" => "async",
                _ => return self.error(&["`syncreset`", "`asyncreset`"]),
            };
            self.expect(':')?;
            let redge = self.bare_ident()?;
            let rst = self.value_use()?;
            self.expect(')')?;
            b.attr("resetStyle", AttrExpr::str(style));
            b.attr("resetEdge", AttrExpr::str(redge));
            inputs.push(self.ty_of(&rst, TypeExpr::Int(1)));
            b.op.operands.push(rst);
            b.op.regions.push(self.region()?);
        }
        Ok(b.finish(inputs, vec![]))
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    fn only_op(src: &str) -> Operation {
        match parse(src).unwrap().items.remove(0) {
            TopItem::Op(op) => op,
            other => panic!("expected op, got {other:?}"),
        }
    }

    #[test]
    fn addr_width() {
        assert_eq!(firmem_addr_width(1), 1);
        assert_eq!(firmem_addr_width(2), 1);
        assert_eq!(firmem_addr_width(4), 2);
        assert_eq!(firmem_addr_width(5), 3);
        assert_eq!(firmem_addr_width(256), 8);
    }

    #[test]
    fn custom_matches_generic() {
        let pairs = [
            (
                "%r = comb.add %a, %b : i8",
                r#"%r = "comb.add"(%a, %b) : (i8, i8) -> i8"#,
            ),
            (
                "%r = comb.icmp bin ult %a, %b : i4",
                r#"%r = "comb.icmp"(%a, %b) {twoState, predicate = 6 : i64} : (i4, i4) -> i1"#,
            ),
            (
                "%r = comb.extract %a from 4 : (i8) -> i4",
                r#"%r = "comb.extract"(%a) {lowBit = 4 : i32} : (i8) -> i4"#,
            ),
            (
                "%r = comb.concat %a, %b : i2, i1",
                r#"%r = "comb.concat"(%a, %b) : (i2, i1) -> i3"#,
            ),
            (
                "%c = hw.constant 1 : i8",
                r#"%c = "hw.constant"() {value = 1 : i8} : () -> i8"#,
            ),
            (
                "%t = hw.constant true",
                r#"%t = "hw.constant"() {value = 1 : i1} : () -> i1"#,
            ),
        ];
        for (custom, generic) in pairs {
            assert_eq!(only_op(custom), only_op(generic), "{custom}");
        }
    }

    #[test]
    fn module_with_ports() {
        let op = only_op(
            "hw.module @Counter(in %clk : !seq.clock, in %rst : i1, out out : i8) {
               %c0_i8 = hw.constant 0 : i8
               hw.output %c0_i8 : i8
             }",
        );
        assert_eq!(op.name, "hw.module");
        assert_eq!(op.attr("sym_name"), Some(&AttrExpr::str("Counter")));
        let entry = &op.regions[0].blocks[0];
        assert_eq!(entry.args.len(), 2);
        assert_eq!(entry.args[0].ty, TypeExpr::Clock);
        assert_eq!(entry.ops.len(), 2);
    }

    #[test]
    fn firreg_infers_types() {
        let op = only_op(
            "hw.module @M(in %clk : !seq.clock, in %rst : i1, in %d : i8, out q : i8) {
               %c0 = hw.constant 0 : i8
               %count = seq.firreg %d clock %clk reset async %rst, %c0 preset 3 : i8
               hw.output %count : i8
             }",
        );
        let reg = &op.regions[0].blocks[0].ops[1];
        assert_eq!(reg.operands.len(), 4);
        assert_eq!(
            reg.func_type.inputs,
            vec![TypeExpr::Int(8), TypeExpr::Clock, TypeExpr::Int(1), TypeExpr::Int(8)]
        );
        assert_eq!(reg.attr("isAsync"), Some(&AttrExpr::Unit));
        assert_eq!(reg.attr("name"), Some(&AttrExpr::str("count")));
        assert_eq!(reg.attr("preset"), Some(&AttrExpr::int(3, Some(TypeExpr::Int(8)))));
    }

    #[test]
    fn unknown_custom_op_is_error() {
        assert!(parse("%x = foo.bar %a : i1").is_err());
    }
}
