// SPDX-License-Identifier: Apache-2.0

//! Value change dump writer and a structural checker that reads the emitted
//! subset back.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use thiserror::Error;

use crate::bits::BitVec4;

use super::trace::Sample;

#[derive(Debug, Error)]
pub enum VcdError {
    #[error("cannot write trace: {0}")]
    Sink(#[from] io::Error),
    #[error("malformed trace at token {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VcdVar {
    /// Scope names from the top module down.
    pub scope: Vec<String>,
    pub name: String,
    pub width: usize,
    pub code: String,
}

/// A recorded trace: one timestamp per cycle, changes only.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VcdTrace {
    pub vars: Vec<VcdVar>,
    /// Per timestamp, the vars that changed and their new values.
    pub changes: Vec<(u64, Vec<(usize, BitVec4)>)>,
    index: HashMap<(Vec<String>, String), usize>,
    current: Vec<Option<BitVec4>>,
}

/// Short identifier for the `n`th variable, drawn from printable ASCII.
pub fn id_code(mut n: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'!' + (n % 94) as u8) as char);
        n /= 94;
        if n == 0 {
            break;
        }
        n -= 1;
    }
    s
}

fn value_str(v: &BitVec4, code: &str) -> String {
    let bits = v.to_msb_string();
    if v.width() == 1 {
        format!("{bits}{code}")
    } else {
        format!("b{bits} {code}")
    }
}

impl VcdTrace {
    pub fn new() -> Self {
        VcdTrace::default()
    }

    /// Adds the values observed at time `t`. Signals seen for the first
    /// time are declared on the fly.
    pub fn record(&mut self, t: u64, samples: &[Sample]) {
        let mut changed = Vec::new();
        for s in samples {
            let key = (s.scope.clone(), s.name.clone());
            let idx = match self.index.get(&key) {
                Some(&i) => i,
                None => {
                    let i = self.vars.len();
                    self.vars.push(VcdVar {
                        scope: s.scope.clone(),
                        name: s.name.clone(),
                        width: s.value.width(),
                        code: id_code(i),
                    });
                    self.current.push(None);
                    self.index.insert(key, i);
                    i
                }
            };
            if self.current[idx].as_ref() != Some(&s.value) {
                self.current[idx] = Some(s.value.clone());
                changed.push((idx, s.value.clone()));
            }
        }
        self.changes.push((t, changed));
    }

    pub fn write(&self, out: &mut impl Write) -> Result<(), VcdError> {
        writeln!(out, "$version hwsem $end")?;
        writeln!(out, "$timescale 1ns $end")?;
        // Variables grouped into a scope tree, in declaration order.
        let mut order: Vec<usize> = (0..self.vars.len()).collect();
        order.sort_by(|&a, &b| self.vars[a].scope.cmp(&self.vars[b].scope).then(a.cmp(&b)));
        let mut open: Vec<String> = Vec::new();
        for &i in &order {
            let v = &self.vars[i];
            let common = open.iter().zip(&v.scope).take_while(|(a, b)| a == b).count();
            while open.len() > common {
                open.pop();
                writeln!(out, "$upscope $end")?;
            }
            for s in &v.scope[common..] {
                writeln!(out, "$scope module {s} $end")?;
                open.push(s.clone());
            }
            writeln!(out, "$var wire {} {} {} $end", v.width, v.code, v.name)?;
        }
        for _ in open {
            writeln!(out, "$upscope $end")?;
        }
        writeln!(out, "$enddefinitions $end")?;
        for (k, (t, changes)) in self.changes.iter().enumerate() {
            writeln!(out, "#{t}")?;
            if k == 0 {
                writeln!(out, "$dumpvars")?;
                let first: HashMap<usize, &BitVec4> = changes.iter().map(|(i, v)| (*i, v)).collect();
                for (i, var) in self.vars.iter().enumerate() {
                    let v = first
                        .get(&i)
                        .map(|v| (*v).clone())
                        .unwrap_or_else(|| BitVec4::all_x(var.width));
                    writeln!(out, "{}", value_str(&v, &var.code))?;
                }
                writeln!(out, "$end")?;
            } else {
                for (i, v) in changes {
                    writeln!(out, "{}", value_str(v, &self.vars[*i].code))?;
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Per-cycle values of every variable, for comparison with a parsed
    /// trace. Values before a variable's first sample are X.
    pub fn expand(&self) -> BTreeMap<String, Vec<String>> {
        let mut cur: Vec<String> = self.vars.iter().map(|v| "x".repeat(v.width)).collect();
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (_, changes) in &self.changes {
            for (i, v) in changes {
                cur[*i] = v.to_msb_string();
            }
            for (i, var) in self.vars.iter().enumerate() {
                out.entry(full_name(&var.scope, &var.name))
                    .or_default()
                    .push(cur[i].clone());
            }
        }
        out
    }
}

fn full_name(scope: &[String], name: &str) -> String {
    let mut s = scope.join(".");
    if !s.is_empty() {
        s.push('.');
    }
    s.push_str(name);
    s
}

/// Result of checking a VCD document.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedVcd {
    pub timescale: String,
    pub vars: Vec<VcdVar>,
    pub times: Vec<u64>,
    /// Dotted name to its value at each timestamp.
    pub values: BTreeMap<String, Vec<String>>,
}

/// Checks the structure of a VCD document (balanced scopes, declared ids,
/// increasing timestamps, value widths) and reconstructs every variable's
/// value at each timestamp.
pub fn parse_vcd(text: &str) -> Result<ParsedVcd, VcdError> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    let err = |pos: usize, msg: &str| VcdError::Syntax {
        pos,
        msg: msg.to_string(),
    };
    let mut p = 0;
    let mut out = ParsedVcd::default();
    let mut scope: Vec<String> = Vec::new();
    let mut codes: HashMap<String, usize> = HashMap::new();
    let section_end = |p: &mut usize| -> Result<Vec<&str>, VcdError> {
        let start = *p;
        while *p < toks.len() && toks[*p] != "$end" {
            *p += 1;
        }
        if *p == toks.len() {
            return Err(err(start, "unterminated section"));
        }
        let body = toks[start..*p].to_vec();
        *p += 1;
        Ok(body)
    };
    loop {
        let Some(&t) = toks.get(p) else {
            return Err(err(p, "missing $enddefinitions"));
        };
        p += 1;
        match t {
            "$timescale" => out.timescale = section_end(&mut p)?.join(" "),
            "$scope" => {
                let body = section_end(&mut p)?;
                if body.len() != 2 {
                    return Err(err(p, "bad $scope"));
                }
                scope.push(body[1].to_string());
            }
            "$upscope" => {
                section_end(&mut p)?;
                if scope.pop().is_none() {
                    return Err(err(p, "unbalanced $upscope"));
                }
            }
            "$var" => {
                let body = section_end(&mut p)?;
                if body.len() < 4 {
                    return Err(err(p, "bad $var"));
                }
                let width: usize = body[1].parse().map_err(|_| err(p, "bad $var width"))?;
                if width == 0 {
                    return Err(err(p, "zero-width $var"));
                }
                let code = body[2].to_string();
                if codes.insert(code.clone(), out.vars.len()).is_some() {
                    return Err(err(p, "duplicate identifier code"));
                }
                out.vars.push(VcdVar {
                    scope: scope.clone(),
                    name: body[3].to_string(),
                    width,
                    code,
                });
            }
            "$enddefinitions" => {
                section_end(&mut p)?;
                break;
            }
            s if s.starts_with('$') => {
                section_end(&mut p)?;
            }
            _ => return Err(err(p - 1, "unexpected token in header")),
        }
    }
    if !scope.is_empty() {
        return Err(err(p, "unclosed $scope"));
    }
    let mut cur: Vec<Option<String>> = vec![None; out.vars.len()];
    let mut started = false;
    let snapshot = |out: &mut ParsedVcd, cur: &[Option<String>]| -> Result<(), VcdError> {
        for (v, c) in out.vars.iter().zip(cur) {
            let val = c.clone().ok_or_else(|| VcdError::Syntax {
                pos: 0,
                msg: format!("`{}` has no value at the first timestamp", v.name),
            })?;
            out.values.entry(full_name(&v.scope, &v.name)).or_default().push(val);
        }
        Ok(())
    };
    let widths: Vec<usize> = out.vars.iter().map(|v| v.width).collect();
    let set = |cur: &mut Vec<Option<String>>, pos: usize, code: &str, val: String| -> Result<(), VcdError> {
        let &i = codes.get(code).ok_or_else(|| err(pos, "undeclared identifier code"))?;
        if val.len() != widths[i] {
            return Err(err(pos, "value width differs from declaration"));
        }
        if !val.chars().all(|c| matches!(c, '0' | '1' | 'x' | 'z')) {
            return Err(err(pos, "bad value character"));
        }
        cur[i] = Some(val);
        Ok(())
    };
    while p < toks.len() {
        let t = toks[p];
        p += 1;
        if let Some(ts) = t.strip_prefix('#') {
            let ts: u64 = ts.parse().map_err(|_| err(p, "bad timestamp"))?;
            if started {
                snapshot(&mut out, &cur)?;
            }
            if out.times.last().is_some_and(|&l| ts <= l) {
                return Err(err(p, "timestamps must increase"));
            }
            out.times.push(ts);
            started = true;
        } else if !started {
            return Err(err(p, "value change before the first timestamp"));
        } else if t == "$dumpvars" || t == "$end" {
            // Section markers around the initial dump.
        } else if let Some(bits) = t.strip_prefix('b') {
            let code = toks.get(p).ok_or_else(|| err(p, "vector value without identifier"))?;
            p += 1;
            set(&mut cur, p, code, bits.to_string())?;
        } else {
            let mut cs = t.chars();
            let v = cs.next().expect("nonempty token");
            set(&mut cur, p, cs.as_str(), v.to_string())?;
        }
    }
    if started {
        snapshot(&mut out, &cur)?;
    }
    Ok(out)
}
