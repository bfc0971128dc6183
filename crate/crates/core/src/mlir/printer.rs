// SPDX-License-Identifier: Apache-2.0

//! Generic-form printer. Output reparses to a structurally equal tree.

use std::fmt::Write;

use super::ast::*;

pub fn print(file: &SourceFile) -> String {
    let mut out = String::new();
    for item in &file.items {
        match item {
            TopItem::Op(op) => print_op(&mut out, op, 0),
            TopItem::TypeAlias { name, ty } => {
                let _ = write!(out, "!{name} = {}", type_str(ty));
            }
            TopItem::AttrAlias { name, value } => {
                let _ = write!(out, "#{name} = {}", attr_str(value));
            }
        }
        out.push('\n');
    }
    out
}

pub fn print_operation(op: &Operation) -> String {
    let mut out = String::new();
    print_op(&mut out, op, 0);
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn print_op(out: &mut String, op: &Operation, depth: usize) {
    if !op.results.is_empty() {
        let rs: Vec<String> = op
            .results
            .iter()
            .map(|r| match r.count {
                Some(n) => format!("%{}:{n}", r.name),
                None => format!("%{}", r.name),
            })
            .collect();
        let _ = write!(out, "{} = ", rs.join(", "));
    }
    let _ = write!(out, "{}(", quote(&op.name));
    let uses: Vec<String> = op.operands.iter().map(value_use_str).collect();
    out.push_str(&uses.join(", "));
    out.push(')');
    if !op.successors.is_empty() {
        let ss: Vec<String> = op
            .successors
            .iter()
            .map(|s| {
                if s.args.is_empty() {
                    format!("^{}", s.label)
                } else {
                    format!("^{}({})", s.label, block_args_str(&s.args))
                }
            })
            .collect();
        let _ = write!(out, " [{}]", ss.join(", "));
    }
    if let Some(p) = &op.properties {
        let _ = write!(out, " <{}>", dict_str(p));
    }
    if !op.regions.is_empty() {
        out.push_str(" (");
        for (i, r) in op.regions.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            print_region(out, r, depth);
        }
        out.push(')');
    }
    if let Some(a) = &op.attributes {
        let _ = write!(out, " {}", dict_str(a));
    }
    let _ = write!(out, " : {}", func_type_str(&op.func_type));
    if let Some(l) = &op.loc {
        let _ = write!(out, " loc({l})");
    }
}

fn print_region(out: &mut String, r: &Region, depth: usize) {
    if r.blocks.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    for b in &r.blocks {
        if let Some(label) = &b.label {
            indent(out, depth);
            let _ = write!(out, "^{label}");
            if !b.args.is_empty() {
                let _ = write!(out, "({})", block_args_str(&b.args));
            }
            out.push_str(":\n");
        }
        for op in &b.ops {
            indent(out, depth + 1);
            print_op(out, op, depth + 1);
            out.push('\n');
        }
    }
    indent(out, depth);
    out.push('}');
}

fn block_args_str(args: &[BlockArg]) -> String {
    args.iter()
        .map(|a| format!("%{}: {}", a.name, type_str(&a.ty)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn value_use_str(v: &ValueUse) -> String {
    match v.index {
        Some(i) => format!("%{}#{i}", v.name),
        None => format!("%{}", v.name),
    }
}

/// MLIR string literal with escapes.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                let _ = write!(out, "\\{:02X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn is_bare_id(s: &str) -> bool {
    let mut cs = s.chars();
    cs.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '.'))
}

fn is_suffix_id(s: &str) -> bool {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_digit()) {
        return true;
    }
    let mut cs = s.chars();
    cs.next()
        .is_some_and(|c| c.is_ascii_alphabetic() || matches!(c, '_' | '$' | '.' | '-'))
        && cs.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '.' | '-'))
}

fn key_str(k: &str) -> String {
    if is_bare_id(k) {
        k.to_string()
    } else {
        quote(k)
    }
}

fn symbol_str(s: &str) -> String {
    if is_suffix_id(s) {
        format!("@{s}")
    } else {
        format!("@{}", quote(s))
    }
}

pub fn dict_str(entries: &[AttrEntry]) -> String {
    let parts: Vec<String> = entries
        .iter()
        .map(|e| match &e.value {
            AttrExpr::Unit => key_str(&e.key),
            v => format!("{} = {}", key_str(&e.key), attr_str(v)),
        })
        .collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn attr_str(a: &AttrExpr) -> String {
    match a {
        AttrExpr::Alias(n) => format!("#{n}"),
        AttrExpr::Int { value, ty: None } => value.to_string(),
        AttrExpr::Int { value, ty: Some(t) } => format!("{value} : {}", type_str(t)),
        AttrExpr::Bool(b) => b.to_string(),
        AttrExpr::Str(s) => quote(s),
        AttrExpr::Array(items) => {
            let parts: Vec<String> = items.iter().map(attr_str).collect();
            format!("[{}]", parts.join(", "))
        }
        AttrExpr::Dict(entries) => dict_str(entries),
        AttrExpr::SymbolRef(path) => path.iter().map(|s| symbol_str(s)).collect::<Vec<_>>().join("::"),
        AttrExpr::Type(t) => type_str(t),
        AttrExpr::Unit => "unit".to_string(),
        AttrExpr::Dialect { name, body: None } => format!("#{name}"),
        AttrExpr::Dialect { name, body: Some(b) } => format!("#{name}<{b}>"),
        AttrExpr::Loc(l) => format!("loc({l})"),
        AttrExpr::Float { text, ty: None } => text.clone(),
        AttrExpr::Float { text, ty: Some(t) } => format!("{text} : {}", type_str(t)),
        AttrExpr::Builtin { name, body } => format!("{name}<{body}>"),
    }
}

fn func_type_str(f: &FunctionType) -> String {
    let ins: Vec<String> = f.inputs.iter().map(type_str).collect();
    let outs = match f.results.as_slice() {
        [single] if !matches!(single, TypeExpr::Function(_)) => type_str(single),
        many => format!("({})", many.iter().map(type_str).collect::<Vec<_>>().join(", ")),
    };
    format!("({}) -> {outs}", ins.join(", "))
}

fn fields_str(fields: &[(String, TypeExpr)]) -> String {
    fields
        .iter()
        .map(|(n, t)| format!("{}: {}", key_str(n), type_str(t)))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn type_str(t: &TypeExpr) -> String {
    match t {
        TypeExpr::Alias(n) => format!("!{n}"),
        TypeExpr::Int(w) => format!("i{w}"),
        TypeExpr::Index => "index".into(),
        TypeExpr::None => "none".into(),
        TypeExpr::Float(n) => n.clone(),
        TypeExpr::Function(f) => func_type_str(f),
        TypeExpr::Clock => "!seq.clock".into(),
        TypeExpr::Array(n, e) => format!("!hw.array<{n}x{}>", type_str(e)),
        TypeExpr::InOut(e) => format!("!hw.inout<{}>", type_str(e)),
        TypeExpr::Struct(f) => format!("!hw.struct<{}>", fields_str(f)),
        TypeExpr::Union(f) => format!("!hw.union<{}>", fields_str(f)),
        TypeExpr::Enum(names) => format!(
            "!hw.enum<{}>",
            names.iter().map(|n| key_str(n)).collect::<Vec<_>>().join(", ")
        ),
        TypeExpr::ModTy(ports) => {
            let ps: Vec<String> = ports
                .iter()
                .map(|p| {
                    let dir = match p.dir {
                        PortDir::Input => "input",
                        PortDir::Output => "output",
                        PortDir::InOut => "inout",
                    };
                    format!("{dir} {} : {}", key_str(&p.name), type_str(&p.ty))
                })
                .collect();
            format!("!hw.modty<{}>", ps.join(", "))
        }
        TypeExpr::FirMem { depth, width, mask } => match mask {
            Some(m) => format!("!seq.firmem<{depth} x {width}, mask {m}>"),
            None => format!("!seq.firmem<{depth} x {width}>"),
        },
        TypeExpr::Opaque { name, body: None } => format!("!{name}"),
        TypeExpr::Opaque { name, body: Some(b) } => format!("!{name}<{b}>"),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    #[test]
    fn empty_prints_empty() {
        assert_eq!(print(&SourceFile::default()), "");
    }

    #[test]
    fn round_trip_small() {
        let src = r#"
          !w = i8
          #z = 0 : i8
          "hw.module"() ({
          ^bb0(%a: i8, %b: !w):
            %0 = "comb.add"(%a, %b) {twoState, "odd key" = [1, "s\n", @X::@y]} : (i8, !w) -> i8 loc(unknown)
            "hw.output"(%0) : (i8) -> ()
          }) {sym_name = "M", module_type = !hw.modty<input a : i8, input b : i8, output o : i8>} : () -> ()
        "#;
        let f = parse(src).unwrap();
        let text = print(&f);
        assert_eq!(parse(&text).unwrap(), f, "{text}");
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("a\"b\\c\u{1}"), "\"a\\\"b\\\\c\\01\"");
        assert_eq!(symbol_str("has space"), "@\"has space\"");
        assert_eq!(key_str("x.y"), "x.y");
    }
}
