// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser for generic MLIR text.
//!
//! The grammar follows the generic operation form (`"dialect.op"(...)`). A
//! fixed set of custom assembly forms is also accepted; those live in
//! [`super::custom`] and lower to the same [`Operation`] shape a generic
//! spelling would produce.
//!
//! Extensions beyond the core operation grammar, taken from upstream MLIR:
//! regions may be empty (`{}`) and may start with a labelled entry block;
//! dictionary entries without `=` are unit attributes; properties use the
//! `<{...}>` spelling; successors may carry `(%a : T)` arguments.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::Num;

use super::ast::*;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: expected ", self.line, self.column)?;
        match self.expected.as_slice() {
            [one] => write!(f, "{one}")?,
            many => write!(f, "one of {}", many.join(", "))?,
        }
        write!(f, ", found {}", self.found)
    }
}

pub(super) type PResult<T> = Result<T, ParseError>;

/// Parses MLIR source text into a [`SourceFile`].
pub fn parse(text: &str) -> Result<SourceFile, ParseError> {
    let mut p = Parser::new(text);
    let mut items = Vec::new();
    loop {
        p.ws();
        match p.peek() {
            None => break,
            Some('!') => {
                let name = p.sigil_ident('!')?;
                p.expect('=')?;
                let ty = p.parse_type()?;
                p.type_aliases.insert(name.clone(), ty.clone());
                items.push(TopItem::TypeAlias { name, ty });
            }
            Some('#') => {
                let name = p.sigil_ident('#')?;
                p.expect('=')?;
                let value = p.parse_attr()?;
                items.push(TopItem::AttrAlias { name, value });
            }
            Some(_) => items.push(TopItem::Op(p.parse_operation()?)),
        }
    }
    Ok(SourceFile { items })
}

pub(super) struct Parser<'a> {
    src: &'a str,
    pub(super) pos: usize,
    /// SSA value types seen so far, used by custom forms that elide types.
    pub(super) value_types: HashMap<String, TypeExpr>,
    /// Type aliases seen so far, for custom forms that inspect a type.
    type_aliases: HashMap<String, TypeExpr>,
}

fn is_bare_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_bare_cont(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '.')
}

fn is_suffix_cont(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '.' | '-')
}

impl<'a> Parser<'a> {
    pub(super) fn new(src: &'a str) -> Self {
        Parser {
            src,
            pos: 0,
            value_types: HashMap::new(),
            type_aliases: HashMap::new(),
        }
    }

    /// Consumes a decimal floating-point literal (`1.5`, `-2e3`) if one
    /// starts here. Integers are left alone.
    fn float_literal(&mut self) -> Option<String> {
        let r = self.rest();
        let b = r.as_bytes();
        let mut i = usize::from(b.first() == Some(&b'-'));
        let digits = |i: &mut usize| {
            let s = *i;
            while *i < b.len() && b[*i].is_ascii_digit() {
                *i += 1;
            }
            *i > s
        };
        if !digits(&mut i) {
            return None;
        }
        let mut is_float = false;
        if b.get(i) == Some(&b'.') && b.get(i + 1).is_some_and(u8::is_ascii_digit) {
            i += 1;
            digits(&mut i);
            is_float = true;
        }
        if matches!(b.get(i), Some(b'e' | b'E')) {
            let mut j = i + 1;
            if matches!(b.get(j), Some(b'+' | b'-')) {
                j += 1;
            }
            if digits(&mut j) {
                i = j;
                is_float = true;
            }
        }
        if !is_float {
            return None;
        }
        self.pos += i;
        Some(r[..i].to_string())
    }

    /// Follows type aliases declared earlier in the file.
    pub(super) fn resolved(&self, ty: &TypeExpr) -> TypeExpr {
        let mut t = ty.clone();
        for _ in 0..64 {
            match &t {
                TypeExpr::Alias(n) => match self.type_aliases.get(n) {
                    Some(next) => t = next.clone(),
                    None => break,
                },
                _ => break,
            }
        }
        t
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub(super) fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    /// Skips whitespace and `//` comments.
    pub(super) fn ws(&mut self) {
        loop {
            let r = self.rest();
            let trimmed = r.trim_start();
            self.pos += r.len() - trimmed.len();
            if trimmed.starts_with("//") {
                let end = trimmed.find('\n').unwrap_or(trimmed.len());
                self.pos += end;
            } else {
                break;
            }
        }
    }

    fn line_col(&self, pos: usize) -> (usize, usize) {
        let before = &self.src[..pos];
        let line = before.matches('\n').count() + 1;
        let col = before.rfind('\n').map_or(pos, |i| pos - i - 1) + 1;
        (line, col)
    }

    pub(super) fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        let (line, column) = self.line_col(self.pos);
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(_) => {
                let tok: String = self
                    .rest()
                    .chars()
                    .take_while(|c| !c.is_whitespace())
                    .take(16)
                    .collect();
                format!("`{tok}`")
            }
        };
        Err(ParseError {
            line,
            column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        })
    }

    pub(super) fn at(&mut self, c: char) -> bool {
        self.ws();
        self.peek() == Some(c)
    }

    pub(super) fn eat(&mut self, c: char) -> bool {
        if self.at(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(super) fn eat_str(&mut self, s: &str) -> bool {
        self.ws();
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    /// Consumes `kw` only when it is a whole bare identifier.
    pub(super) fn eat_kw(&mut self, kw: &str) -> bool {
        self.ws();
        let r = self.rest();
        if r.starts_with(kw) && !r[kw.len()..].starts_with(is_bare_cont) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    pub(super) fn expect(&mut self, c: char) -> PResult<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.error(&[&format!("`{c}`")])
        }
    }

    pub(super) fn expect_str(&mut self, s: &str) -> PResult<()> {
        if self.eat_str(s) {
            Ok(())
        } else {
            self.error(&[&format!("`{s}`")])
        }
    }

    pub(super) fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(&[&format!("`{kw}`")])
        }
    }

    pub(super) fn bare_ident(&mut self) -> PResult<String> {
        self.ws();
        match self.peek() {
            Some(c) if is_bare_start(c) => {
                let start = self.pos;
                while self.peek().is_some_and(is_bare_cont) {
                    self.bump();
                }
                Ok(self.src[start..self.pos].to_string())
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn peek_bare_ident(&mut self) -> Option<String> {
        let save = self.pos;
        let r = self.bare_ident().ok();
        self.pos = save;
        r
    }

    fn suffix_id(&mut self) -> PResult<String> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            }
            Some(c) if is_bare_start(c) || matches!(c, '$' | '.' | '-') => {
                while self.peek().is_some_and(is_suffix_cont) {
                    self.bump();
                }
            }
            _ => return self.error(&["identifier"]),
        }
        Ok(self.src[start..self.pos].to_string())
    }

    /// `%id`, `^id`: sigil followed by a suffix id.
    pub(super) fn sigil_suffix(&mut self, sigil: char) -> PResult<String> {
        self.ws();
        if self.peek() != Some(sigil) {
            return self.error(&[&format!("`{sigil}` identifier")]);
        }
        self.bump();
        self.suffix_id()
    }

    /// `!id`, `#id`: sigil followed by a bare id (dots allowed).
    fn sigil_ident(&mut self, sigil: char) -> PResult<String> {
        self.ws();
        if self.peek() != Some(sigil) {
            return self.error(&[&format!("`{sigil}` identifier")]);
        }
        self.bump();
        let start = self.pos;
        while self.peek().is_some_and(|c| is_suffix_cont(c) && c != '-') {
            self.bump();
        }
        if self.pos == start {
            return self.error(&["identifier"]);
        }
        Ok(self.src[start..self.pos].to_string())
    }

    pub(super) fn symbol(&mut self) -> PResult<String> {
        self.ws();
        if self.peek() != Some('@') {
            return self.error(&["`@` symbol"]);
        }
        self.bump();
        if self.peek() == Some('"') {
            self.string()
        } else {
            self.suffix_id()
        }
    }

    pub(super) fn string(&mut self) -> PResult<String> {
        self.ws();
        if self.peek() != Some('"') {
            return self.error(&["string literal"]);
        }
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return self.error(&["closing `\"`"]),
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some(h1) if h1.is_ascii_hexdigit() => match self.bump() {
                        Some(h2) if h2.is_ascii_hexdigit() => {
                            let byte = u8::from_str_radix(&format!("{h1}{h2}"), 16).unwrap();
                            out.push(byte as char);
                        }
                        _ => return self.error(&["hex escape"]),
                    },
                    _ => return self.error(&["escape sequence"]),
                },
                Some(c) => out.push(c),
            }
        }
        Ok(out)
    }

    pub(super) fn integer(&mut self) -> PResult<BigInt> {
        self.ws();
        let neg = self.peek() == Some('-');
        if neg {
            self.bump();
        }
        let r = self.rest();
        let v = if r.starts_with("0x") && r[2..].starts_with(|c: char| c.is_ascii_hexdigit()) {
            self.pos += 2;
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_hexdigit()) {
                self.bump();
            }
            BigInt::from_str_radix(&self.src[start..self.pos], 16).unwrap()
        } else if r.starts_with(|c: char| c.is_ascii_digit()) {
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
            self.src[start..self.pos].parse::<BigInt>().unwrap()
        } else {
            return self.error(&["integer"]);
        };
        Ok(if neg { -v } else { v })
    }

    pub(super) fn small_int(&mut self) -> PResult<u64> {
        let save = self.pos;
        let v = self.integer()?;
        match u64::try_from(&v) {
            Ok(n) => Ok(n),
            Err(_) => {
                self.pos = save;
                self.error(&["non-negative integer"])
            }
        }
    }

    /// Raw text of a balanced `open ... close` group; the opening char must
    /// be next. Returns the inner text trimmed.
    fn balanced(&mut self, open: char, close: char) -> PResult<String> {
        self.ws();
        if self.peek() != Some(open) {
            return self.error(&[&format!("`{open}`")]);
        }
        self.bump();
        let start = self.pos;
        let mut depth = 1usize;
        loop {
            if open == '<' && self.rest().starts_with("->") {
                self.pos += 2;
                continue;
            }
            match self.bump() {
                None => return self.error(&[&format!("`{close}`")]),
                Some('"') => {
                    self.pos -= 1;
                    self.string()?;
                }
                Some(c) if c == open => depth += 1,
                Some(c) if c == close => {
                    depth -= 1;
                    if depth == 0 {
                        let inner = &self.src[start..self.pos - close.len_utf8()];
                        return Ok(inner.trim().to_string());
                    }
                }
                Some(_) => {}
            }
        }
    }

    // ---- operations -------------------------------------------------------

    pub(super) fn parse_operation(&mut self) -> PResult<Operation> {
        self.ws();
        let mut results = Vec::new();
        if self.peek() == Some('%') {
            loop {
                let name = self.sigil_suffix('%')?;
                let save = self.pos;
                let count = if self.eat(':') {
                    self.ws();
                    if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        Some(self.small_int()? as u32)
                    } else {
                        self.pos = save;
                        None
                    }
                } else {
                    None
                };
                results.push(OpResult { name, count });
                if !self.eat(',') {
                    break;
                }
            }
            self.expect('=')?;
        }
        self.ws();
        let op = if self.peek() == Some('"') {
            self.parse_generic_op(results)?
        } else if self.peek().is_some_and(is_bare_start) {
            let name = self.bare_ident()?;
            self.parse_custom_op(results, &name)?
        } else {
            return self.error(&["operation name"]);
        };
        self.record_result_types(&op);
        Ok(op)
    }

    pub(super) fn record_result_types(&mut self, op: &Operation) {
        let mut tys = op.func_type.results.iter();
        for r in &op.results {
            match r.count {
                None => {
                    if let Some(t) = tys.next() {
                        self.value_types.insert(r.name.clone(), t.clone());
                    }
                }
                Some(n) => {
                    for i in 0..n {
                        if let Some(t) = tys.next() {
                            self.value_types.insert(format!("{}#{i}", r.name), t.clone());
                        }
                    }
                }
            }
        }
    }

    fn parse_generic_op(&mut self, results: Vec<OpResult>) -> PResult<Operation> {
        let name = self.string()?;
        if name.is_empty() {
            return self.error(&["non-empty operation name"]);
        }
        let mut op = Operation::new(name);
        op.results = results;
        self.expect('(')?;
        if !self.at(')') {
            op.operands = self.value_uses()?;
        }
        self.expect(')')?;
        if self.eat('[') {
            loop {
                op.successors.push(self.successor()?);
                if !self.eat(',') {
                    break;
                }
            }
            self.expect(']')?;
        }
        if self.eat('<') {
            op.properties = Some(self.dict()?);
            self.expect('>')?;
        }
        if self.at('(') {
            self.bump();
            loop {
                op.regions.push(self.region()?);
                if !self.eat(',') {
                    break;
                }
            }
            self.expect(')')?;
        }
        if self.at('{') {
            op.attributes = Some(self.dict()?);
        }
        self.expect(':')?;
        op.func_type = self.func_type()?;
        op.loc = self.opt_loc()?;
        Ok(op)
    }

    pub(super) fn opt_loc(&mut self) -> PResult<Option<String>> {
        if self.eat_kw("loc") {
            Ok(Some(self.balanced('(', ')')?))
        } else {
            Ok(None)
        }
    }

    pub(super) fn value_use(&mut self) -> PResult<ValueUse> {
        let name = self.sigil_suffix('%')?;
        let index = if self.peek() == Some('#') {
            self.bump();
            Some(self.small_int()? as u32)
        } else {
            None
        };
        Ok(ValueUse { name, index })
    }

    pub(super) fn value_uses(&mut self) -> PResult<Vec<ValueUse>> {
        let mut v = vec![self.value_use()?];
        while self.eat(',') {
            v.push(self.value_use()?);
        }
        Ok(v)
    }

    fn successor(&mut self) -> PResult<Successor> {
        let label = self.sigil_suffix('^')?;
        let mut args = Vec::new();
        let save = self.pos;
        let colon = self.eat(':');
        if self.eat('(') {
            args = self.block_args()?;
            self.expect(')')?;
        } else if colon {
            self.pos = save;
        }
        Ok(Successor { label, args })
    }

    fn block_args(&mut self) -> PResult<Vec<BlockArg>> {
        let mut args = Vec::new();
        if self.at(')') {
            return Ok(args);
        }
        loop {
            let name = self.sigil_suffix('%')?;
            self.expect(':')?;
            let ty = self.parse_type()?;
            self.opt_loc()?;
            self.value_types.insert(name.clone(), ty.clone());
            args.push(BlockArg { name, ty });
            if !self.eat(',') {
                break;
            }
        }
        Ok(args)
    }

    pub(super) fn region(&mut self) -> PResult<Region> {
        self.expect('{')?;
        let mut region = Region::default();
        if self.eat('}') {
            return Ok(region);
        }
        if !self.at('^') {
            let ops = self.block_ops()?;
            region.blocks.push(Block {
                label: None,
                args: Vec::new(),
                ops,
            });
        }
        while self.at('^') {
            let label = self.sigil_suffix('^')?;
            let args = if self.eat('(') {
                let a = self.block_args()?;
                self.expect(')')?;
                a
            } else {
                Vec::new()
            };
            self.expect(':')?;
            let ops = self.block_ops()?;
            region.blocks.push(Block {
                label: Some(label),
                args,
                ops,
            });
        }
        self.expect('}')?;
        Ok(region)
    }

    fn block_ops(&mut self) -> PResult<Vec<Operation>> {
        let mut ops = Vec::new();
        loop {
            self.ws();
            match self.peek() {
                Some('}') | Some('^') | None => break,
                _ => ops.push(self.parse_operation()?),
            }
        }
        Ok(ops)
    }

    // ---- attributes -------------------------------------------------------

    pub(super) fn dict(&mut self) -> PResult<Vec<AttrEntry>> {
        self.expect('{')?;
        let mut entries: Vec<AttrEntry> = Vec::new();
        if self.eat('}') {
            return Ok(entries);
        }
        loop {
            self.ws();
            let key_pos = self.pos;
            let key = if self.peek() == Some('"') {
                self.string()?
            } else {
                self.bare_ident()?
            };
            if entries.iter().any(|e| e.key == key) {
                self.pos = key_pos;
                return self.error(&["unique attribute name"]);
            }
            let value = if self.eat('=') {
                self.parse_attr()?
            } else {
                AttrExpr::Unit
            };
            entries.push(AttrEntry { key, value });
            if !self.eat(',') {
                break;
            }
        }
        self.expect('}')?;
        Ok(entries)
    }

    pub(super) fn parse_attr(&mut self) -> PResult<AttrExpr> {
        self.ws();
        match self.peek() {
            Some('#') => {
                let name = self.sigil_ident('#')?;
                if self.peek() == Some('<') {
                    let body = self.balanced('<', '>')?;
                    Ok(AttrExpr::Dialect { name, body: Some(body) })
                } else if name.contains('.') {
                    Ok(AttrExpr::Dialect { name, body: None })
                } else {
                    Ok(AttrExpr::Alias(name))
                }
            }
            Some('"') => Ok(AttrExpr::Str(self.string()?)),
            Some('[') => {
                self.bump();
                let mut items = Vec::new();
                if !self.at(']') {
                    loop {
                        items.push(self.parse_attr()?);
                        if !self.eat(',') {
                            break;
                        }
                    }
                }
                self.expect(']')?;
                Ok(AttrExpr::Array(items))
            }
            Some('{') => Ok(AttrExpr::Dict(self.dict()?)),
            Some('@') => {
                let mut path = vec![self.symbol()?];
                while self.eat_str("::") {
                    path.push(self.symbol()?);
                }
                Ok(AttrExpr::SymbolRef(path))
            }
            Some(c) if c == '-' || c.is_ascii_digit() => {
                if let Some(text) = self.float_literal() {
                    let ty = if self.eat(':') { Some(self.parse_type()?) } else { None };
                    return Ok(AttrExpr::Float { text, ty });
                }
                let value = self.integer()?;
                let ty = if self.eat(':') { Some(self.parse_type()?) } else { None };
                Ok(AttrExpr::Int { value, ty })
            }
            Some('!') | Some('(') => Ok(AttrExpr::Type(self.parse_type()?)),
            Some(c) if is_bare_start(c) => {
                let id = self.peek_bare_ident().unwrap_or_default();
                match id.as_str() {
                    "true" | "false" => {
                        self.bare_ident()?;
                        Ok(AttrExpr::Bool(id == "true"))
                    }
                    "unit" => {
                        self.bare_ident()?;
                        Ok(AttrExpr::Unit)
                    }
                    "loc" => {
                        self.bare_ident()?;
                        Ok(AttrExpr::Loc(self.balanced('(', ')')?))
                    }
                    "array" | "dense" | "dense_resource" | "sparse" | "affine_map" | "affine_set" | "strided" => {
                        self.bare_ident()?;
                        let body = self.balanced('<', '>')?;
                        Ok(AttrExpr::Builtin { name: id, body })
                    }
                    _ => Ok(AttrExpr::Type(self.parse_type()?)),
                }
            }
            _ => self.error(&["attribute value"]),
        }
    }

    // ---- types ------------------------------------------------------------

    pub(super) fn func_type(&mut self) -> PResult<FunctionType> {
        let inputs = if self.at('(') {
            self.paren_types()?
        } else {
            vec![self.parse_type()?]
        };
        self.expect_str("->")?;
        let results = if self.at('(') {
            self.paren_types()?
        } else {
            vec![self.parse_type()?]
        };
        Ok(FunctionType { inputs, results })
    }

    fn paren_types(&mut self) -> PResult<Vec<TypeExpr>> {
        self.expect('(')?;
        let mut v = Vec::new();
        if !self.at(')') {
            v = self.type_list()?;
        }
        self.expect(')')?;
        Ok(v)
    }

    pub(super) fn type_list(&mut self) -> PResult<Vec<TypeExpr>> {
        let mut v = vec![self.parse_type()?];
        while self.eat(',') {
            v.push(self.parse_type()?);
        }
        Ok(v)
    }

    pub(super) fn parse_type(&mut self) -> PResult<TypeExpr> {
        self.ws();
        match self.peek() {
            Some('!') => self.bang_type(),
            Some('(') => Ok(TypeExpr::Function(self.func_type()?)),
            Some(c) if is_bare_start(c) => {
                let save = self.pos;
                let id = self.bare_ident()?;
                if id == "index" {
                    return Ok(TypeExpr::Index);
                }
                if id == "none" {
                    return Ok(TypeExpr::None);
                }
                if matches!(id.as_str(), "f16" | "bf16" | "f32" | "f64" | "f80" | "f128" | "tf32") {
                    return Ok(TypeExpr::Float(id));
                }
                if let Some(digits) = id.strip_prefix('i') {
                    if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
                        if let Ok(w) = digits.parse::<u32>() {
                            return Ok(TypeExpr::Int(w));
                        }
                    }
                }
                self.pos = save;
                self.error(&["type"])
            }
            _ => self.error(&["type"]),
        }
    }

    fn bang_type(&mut self) -> PResult<TypeExpr> {
        let name = self.sigil_ident('!')?;
        match name.as_str() {
            "seq.clock" => Ok(TypeExpr::Clock),
            "hw.array" => {
                self.expect('<')?;
                let n = self.small_int()?;
                self.expect('x')?;
                let elem = self.parse_type()?;
                self.expect('>')?;
                Ok(TypeExpr::array(n, elem))
            }
            "hw.inout" => {
                self.expect('<')?;
                let t = self.parse_type()?;
                self.expect('>')?;
                Ok(TypeExpr::inout(t))
            }
            "hw.struct" => Ok(TypeExpr::Struct(self.field_list()?)),
            "hw.union" => Ok(TypeExpr::Union(self.field_list()?)),
            "hw.enum" => {
                self.expect('<')?;
                let mut names = Vec::new();
                if !self.at('>') {
                    loop {
                        names.push(self.field_name()?);
                        if !self.eat(',') {
                            break;
                        }
                    }
                }
                self.expect('>')?;
                Ok(TypeExpr::Enum(names))
            }
            "hw.modty" => {
                self.expect('<')?;
                let mut ports = Vec::new();
                if !self.at('>') {
                    loop {
                        let dir = if self.eat_kw("input") {
                            PortDir::Input
                        } else if self.eat_kw("output") {
                            PortDir::Output
                        } else if self.eat_kw("inout") {
                            PortDir::InOut
                        } else {
                            return self.error(&["`input`", "`output`", "`inout`"]);
                        };
                        let name = self.field_name()?;
                        self.expect(':')?;
                        let ty = self.parse_type()?;
                        ports.push(ModPort { dir, name, ty });
                        if !self.eat(',') {
                            break;
                        }
                    }
                }
                self.expect('>')?;
                Ok(TypeExpr::ModTy(ports))
            }
            "seq.firmem" => self.firmem_body(),
            _ if self.peek() == Some('<') => {
                let body = self.balanced('<', '>')?;
                Ok(TypeExpr::Opaque { name, body: Some(body) })
            }
            _ if name.contains('.') => Ok(TypeExpr::Opaque { name, body: None }),
            _ => Ok(TypeExpr::Alias(name)),
        }
    }

    /// `<D x W>` or `<D x W, mask M>`.
    pub(super) fn firmem_body(&mut self) -> PResult<TypeExpr> {
        self.expect('<')?;
        let depth = self.small_int()?;
        self.expect('x')?;
        let width = self.small_int()? as u32;
        let mask = if self.eat(',') {
            self.expect_kw("mask")?;
            Some(self.small_int()? as u32)
        } else {
            None
        };
        self.expect('>')?;
        Ok(TypeExpr::FirMem { depth, width, mask })
    }

    pub(super) fn field_name(&mut self) -> PResult<String> {
        self.ws();
        if self.peek() == Some('"') {
            self.string()
        } else {
            self.bare_ident()
        }
    }

    fn field_list(&mut self) -> PResult<Vec<(String, TypeExpr)>> {
        self.expect('<')?;
        let mut fields = Vec::new();
        if !self.at('>') {
            loop {
                let name = self.field_name()?;
                self.expect(':')?;
                let ty = self.parse_type()?;
                fields.push((name, ty));
                if !self.eat(',') {
                    break;
                }
            }
        }
        self.expect('>')?;
        Ok(fields)
    }
}
