// SPDX-License-Identifier: Apache-2.0

//! Acceptance checks. Runs without the libtest harness so that every check
//! prints one pass/fail line; the process fails if any check fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hwsem::bits::{Bit4, BitVec4};
use hwsem::dialect::comb::{self, IcmpPredicate, TruthTable};
use hwsem::dialect::supported_ops;
use hwsem::mlir::ast::{SourceFile, TypeExpr};
use hwsem::mlir::state::{preprocess, MlirState, StaticError};
use hwsem::mlir::{parse, print};
use hwsem::sim::{parse_vcd, run, Stimulus};
use hwsem::value::StorageRef;
use hwsem::{Error, SimConfig, SimError, Simulator, TypedValue};

use common::{load_corpus, run_case, spell, variant};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn bits(w: usize, n: u64) -> TypedValue {
    TypedValue::bits(TypeExpr::Int(w as u32), BitVec4::from_u64(w, n))
}

/// `Some(n)` for a fully known value, `None` for all X.
fn level(v: &TypedValue) -> Result<Option<u64>, String> {
    let b = v.flatten().ok_or("value without bits")?;
    if let Some(n) = b.to_u64() {
        return Ok(Some(n));
    }
    if b.iter().all(|x| x == Bit4::BX) {
        return Ok(None);
    }
    Err(format!("partially unknown value {}", b.to_msb_string()))
}

fn sim(src: &str, top: &str, seed: Option<u64>) -> Result<Simulator, String> {
    Simulator::from_source(
        src,
        top,
        SimConfig {
            seed,
            ..SimConfig::default()
        },
    )
    .map_err(|e| e.to_string())
}

/// Runs `cycles` (input values in port order) and returns output `port` per cycle.
fn trace(sim: &mut Simulator, cycles: &[Vec<TypedValue>], port: &str) -> Result<Vec<Option<u64>>, String> {
    cycles
        .iter()
        .map(|c| {
            let out = sim.run_cycle(c.clone()).map_err(|e| e.to_string())?;
            level(out.get(port).ok_or_else(|| format!("no output {port}"))?)
        })
        .collect()
}

fn expect_trace(what: &str, got: &[Option<u64>], want: &[Option<u64>]) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: expected {want:?}, got {got:?}"))
    }
}

// ---- 1: counter -------------------------------------------------------------

const COUNTER: &str = r#"
hw.module @Counter(in %clk : !seq.clock, in %rst : i1, out out : i8) {
  %c0_i8 = hw.constant 0 : i8
  %c1_i8 = hw.constant 1 : i8
  %count = seq.firreg %0 clock %clk reset sync %rst, %c0_i8 preset 0 : i8
  %0 = comb.add %count, %c1_i8 : i8
  hw.output %count : i8
}
"#;

/// Clock toggling from 0, reset held through the first rising edge.
fn counter_inputs(n: usize) -> Vec<Vec<TypedValue>> {
    (0..n)
        .map(|t| vec![bits(1, (t % 2) as u64), bits(1, (t < 2) as u64)])
        .collect()
}

fn counter() -> Check {
    let start = Instant::now();
    let mut s = sim(COUNTER, "Counter", None)?;
    let got = trace(&mut s, &counter_inputs(12), "out")?;
    let took = start.elapsed();
    let want: Vec<Option<u64>> = [0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5].into_iter().map(Some).collect();
    expect_trace("out", &got, &want)?;
    if took >= Duration::from_secs(1) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("12 cycles match in {took:?}"))
}

// ---- 2: comb oracle ---------------------------------------------------------

const TT_ROWS: [bool; 8] = [true, false, false, true, false, true, true, true];

fn comb_design() -> String {
    let rows: Vec<&str> = TT_ROWS.iter().map(|r| if *r { "true" } else { "false" }).collect();
    let mut body = String::new();
    let mut outs: Vec<(String, usize)> = Vec::new();
    let mut add = |line: String, name: &str, w: usize| {
        body.push_str("  ");
        body.push_str(&line);
        body.push('\n');
        outs.push((name.to_string(), w));
    };
    for op in ["add", "mul", "and", "or", "xor"] {
        add(format!("%{op}2 = comb.{op} %a, %b : i4"), &format!("{op}2"), 4);
        add(format!("%{op}3 = comb.{op} %a, %b, %c : i4"), &format!("{op}3"), 4);
    }
    for op in ["sub", "divu", "divs", "modu", "mods", "shl", "shru", "shrs"] {
        add(format!("%{op} = comb.{op} %a, %b : i4"), op, 4);
    }
    add("%concat = comb.concat %a, %b, %c : i4, i4, i4".into(), "concat", 12);
    add("%extract = comb.extract %a from 1 : (i4) -> i2".into(), "extract", 2);
    add("%replicate = comb.replicate %a : (i4) -> i12".into(), "replicate", 12);
    add("%parity = comb.parity %a : i4".into(), "parity", 1);
    add("%sel = comb.extract %c from 0 : (i4) -> i1".into(), "sel", 1);
    add("%mux = comb.mux %sel, %a, %b : i4".into(), "mux", 4);
    for i in 0..3 {
        add(
            format!("%t{i} = comb.extract %a from {i} : (i4) -> i1"),
            &format!("t{i}"),
            1,
        );
    }
    add(
        format!("%tt = comb.truth_table %t2, %t1, %t0 -> [{}]", rows.join(", ")),
        "tt",
        1,
    );
    for p in IcmpPredicate::ALL {
        let n = p.name();
        add(
            format!("%icmp_{n} = comb.icmp {n} %a, %b : i4"),
            &format!("icmp_{n}"),
            1,
        );
    }
    let ports: Vec<String> = outs.iter().map(|(n, w)| format!("out {n} : i{w}")).collect();
    let names: Vec<String> = outs.iter().map(|(n, _)| format!("%{n}")).collect();
    let tys: Vec<String> = outs.iter().map(|(_, w)| format!("i{w}")).collect();
    format!(
        "hw.module @Ops(in %a : i4, in %b : i4, in %c : i4, {}) {{\n{body}  hw.output {} : {}\n}}\n",
        ports.join(", "),
        names.join(", "),
        tys.join(", ")
    )
}

fn wrap(v: BigInt, w: u32) -> BigUint {
    let m = BigInt::from(1u64 << w);
    (((v % &m) + &m) % &m).to_biguint().unwrap()
}

fn signed4(x: u64) -> i64 {
    if x >= 8 {
        x as i64 - 16
    } else {
        x as i64
    }
}

/// Reference result for output `name`; `None` means all X.
fn oracle(name: &str, a: u64, b: u64, c: u64) -> Option<BigUint> {
    let (ba, bb, bc) = (BigInt::from(a), BigInt::from(b), BigInt::from(c));
    let (sa, sb) = (BigInt::from(signed4(a)), BigInt::from(signed4(b)));
    let w4 = |v: BigInt| Some(wrap(v, 4));
    let flag = |f: bool| Some(BigUint::from(f as u8));
    match name {
        "add2" => w4(&ba + &bb),
        "add3" => w4(&ba + &bb + &bc),
        "mul2" => w4(&ba * &bb),
        "mul3" => w4(&ba * &bb * &bc),
        "and2" => w4(&ba & &bb),
        "and3" => w4(&ba & &bb & &bc),
        "or2" => w4(&ba | &bb),
        "or3" => w4(&ba | &bb | &bc),
        "xor2" => w4(&ba ^ &bb),
        "xor3" => w4(&ba ^ &bb ^ &bc),
        "sub" => w4(&ba - &bb),
        "divu" => (b != 0).then(|| wrap(&ba / &bb, 4)),
        "modu" => (b != 0).then(|| wrap(&ba % &bb, 4)),
        "divs" => (b != 0).then(|| wrap(&sa / &sb, 4)),
        "mods" => (b != 0).then(|| wrap(&sa % &sb, 4)),
        "shl" => w4(if b >= 4 { BigInt::from(0) } else { &ba << b }),
        "shru" => w4(if b >= 4 { BigInt::from(0) } else { &ba >> b }),
        "shrs" => w4(BigInt::from(signed4(a) >> b.min(3))),
        "concat" => Some(wrap((&ba << 8) + (&bb << 4) + &bc, 12)),
        "extract" => Some(wrap(&ba >> 1u32, 2)),
        "replicate" => Some(wrap(&ba * 273, 12)),
        "parity" => flag(a.count_ones() % 2 == 1),
        "sel" => flag(c & 1 == 1),
        "mux" => w4(if c & 1 == 1 { ba } else { bb }),
        "t0" | "t1" | "t2" => flag((a >> (name.as_bytes()[1] - b'0')) & 1 == 1),
        "tt" => flag(TT_ROWS[(a & 7) as usize]),
        "icmp_eq" => flag(a == b),
        "icmp_ne" => flag(a != b),
        "icmp_ult" => flag(a < b),
        "icmp_ule" => flag(a <= b),
        "icmp_ugt" => flag(a > b),
        "icmp_uge" => flag(a >= b),
        "icmp_slt" => flag(sa < sb),
        "icmp_sle" => flag(sa <= sb),
        "icmp_sgt" => flag(sa > sb),
        "icmp_sge" => flag(sa >= sb),
        other => panic!("no oracle for {other}"),
    }
}

fn comb_oracle() -> Check {
    let start = Instant::now();
    let mut s = sim(&comb_design(), "Ops", None)?;
    let mut checked = 0u64;
    for a in 0..16 {
        for b in 0..16 {
            for c in 0..16 {
                let out = s
                    .run_cycle(vec![bits(4, a), bits(4, b), bits(4, c)])
                    .map_err(|e| e.to_string())?;
                for (name, v) in &out {
                    let bv = v.flatten().ok_or("no bits")?;
                    let got = if bv.iter().all(|x| x == Bit4::BX) {
                        None
                    } else {
                        Some(bv.to_biguint().ok_or_else(|| format!("{name}: partial X"))?)
                    };
                    let want = oracle(name, a, b, c);
                    if got != want {
                        return Err(format!("{name}({a}, {b}, {c}): expected {want:?}, got {got:?}"));
                    }
                    checked += 1;
                }
            }
        }
    }
    let covered: BTreeSet<&str> = s
        .coverage()
        .keys()
        .filter(|k| k.starts_with("comb."))
        .copied()
        .collect();
    let all: BTreeSet<&str> = supported_ops().filter(|k| k.starts_with("comb.")).collect();
    if covered != all || all.len() != 20 {
        return Err(format!("comb ops exercised {covered:?} of {all:?}"));
    }
    let took = start.elapsed();
    if took >= Duration::from_secs(30) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("{checked} results over 20 ops and 10 predicates in {took:?}"))
}

// ---- 3: X pessimism ---------------------------------------------------------

fn random_bits(rng: &mut ChaCha8Rng, w: usize) -> BitVec4 {
    let v: Vec<Bit4> = (0..w).map(|_| Bit4::from_bool(rng.gen())).collect();
    BitVec4::from_bits(&v)
}

/// Sets one random bit of one random operand to X; returns (operand, bit).
fn poison(rng: &mut ChaCha8Rng, ops: &mut [BitVec4]) -> (usize, usize) {
    let i = rng.gen_range(0..ops.len());
    let b = rng.gen_range(0..ops[i].width());
    ops[i].set(b, Bit4::BX);
    (i, b)
}

fn all_x(v: &BitVec4) -> bool {
    v.iter().all(|b| b == Bit4::BX)
}

fn x_case(rng: &mut ChaCha8Rng, op: &str) -> Result<(), String> {
    let w = rng.gen_range(1..=16);
    let fail = |what: String| Err(format!("{op}: {what}"));
    match op {
        "add" | "mul" | "and" | "or" | "xor" => {
            let n = rng.gen_range(1..=4);
            let mut ops: Vec<BitVec4> = (0..n).map(|_| random_bits(rng, w)).collect();
            poison(rng, &mut ops);
            let r = comb::eval_variadic(op, &ops, w).map_err(|e| e.to_string())?;
            if !all_x(&r) {
                return fail(format!("{} from {ops:?}", r.to_msb_string()));
            }
        }
        "sub" | "divu" | "divs" | "modu" | "mods" | "shl" | "shru" | "shrs" => {
            let mut ops = vec![random_bits(rng, w), random_bits(rng, w)];
            poison(rng, &mut ops);
            let r = comb::eval_binary(op, &ops[0], &ops[1]).map_err(|e| e.to_string())?;
            if !all_x(&r) || r.width() != w {
                return fail(r.to_msb_string());
            }
        }
        "icmp" => {
            let p = IcmpPredicate::ALL[rng.gen_range(0..10)];
            let mut ops = vec![random_bits(rng, w), random_bits(rng, w)];
            poison(rng, &mut ops);
            let r = comb::eval_icmp(p, &ops[0], &ops[1]).map_err(|e| e.to_string())?;
            if !all_x(&r) {
                return fail(format!("{} gave {}", p.name(), r.to_msb_string()));
            }
        }
        "parity" | "replicate" => {
            let mut ops = vec![random_bits(rng, w)];
            poison(rng, &mut ops);
            let r = if op == "parity" {
                comb::eval_parity(&ops[0])
            } else {
                comb::eval_replicate(&ops[0], rng.gen_range(1..=4))
            };
            if !all_x(&r) {
                return fail(r.to_msb_string());
            }
        }
        "mux" => {
            let mut ops = vec![random_bits(rng, 1), random_bits(rng, w), random_bits(rng, w)];
            poison(rng, &mut ops);
            let r = comb::eval_mux(&ops[0], &ops[1], &ops[2]).map_err(|e| e.to_string())?;
            if !all_x(&r) {
                return fail(r.to_msb_string());
            }
        }
        "truth_table" => {
            let n = rng.gen_range(1..=4);
            let rows: Vec<bool> = (0..1usize << n).map(|_| rng.gen()).collect();
            let table = TruthTable::new(n, rows).unwrap();
            let mut ops: Vec<BitVec4> = (0..n).map(|_| random_bits(rng, 1)).collect();
            poison(rng, &mut ops);
            let r = comb::eval_truth_table(&ops, &table).map_err(|e| e.to_string())?;
            if !all_x(&r) {
                return fail(r.to_msb_string());
            }
        }
        "concat" => {
            let n = rng.gen_range(1..=4);
            let mut ops: Vec<BitVec4> = (0..n)
                .map(|_| {
                    let w = rng.gen_range(1..=8);
                    random_bits(rng, w)
                })
                .collect();
            let clean = ops.clone();
            let (i, b) = poison(rng, &mut ops);
            let total: usize = ops.iter().map(BitVec4::width).sum();
            let r = comb::eval_variadic("concat", &ops, total).map_err(|e| e.to_string())?;
            // Operand 0 is most significant.
            let below: usize = ops[i + 1..].iter().map(BitVec4::width).sum();
            let pos = below + b;
            let expect_clean = BitVec4::concat(&clean);
            for k in 0..total {
                let want = if k == pos { Bit4::BX } else { expect_clean.bit(k) };
                if r.bit(k) != want {
                    return fail(format!("bit {k} of {}", r.to_msb_string()));
                }
            }
        }
        "extract" => {
            let mut ops = vec![random_bits(rng, w)];
            let clean = ops[0].clone();
            let (_, b) = poison(rng, &mut ops);
            let low = rng.gen_range(0..w);
            let width = rng.gen_range(1..=w - low);
            let r = comb::eval_extract(&ops[0], low, width).map_err(|e| e.to_string())?;
            for k in 0..width {
                let want = if low + k == b { Bit4::BX } else { clean.bit(low + k) };
                if r.bit(k) != want {
                    return fail(format!("bit {k} of {}", r.to_msb_string()));
                }
            }
        }
        other => return fail(format!("no generator for {other}")),
    }
    Ok(())
}

fn x_pessimism() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let ops: Vec<&str> = supported_ops().filter_map(|o| o.strip_prefix("comb.")).collect();
    let mut cases = 0;
    for op in &ops {
        for _ in 0..1000 {
            x_case(&mut rng, op)?;
            cases += 1;
        }
    }
    Ok(format!("{cases} cases over {} ops, no violations", ops.len()))
}

// ---- 4: confluence ----------------------------------------------------------

fn random_dag(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = ["add", "sub", "mul", "and", "or", "xor", "shl", "shru", "mux"];
    let mut vals: Vec<String> = vec!["%a".into(), "%b".into(), "%c".into()];
    let mut lines = Vec::new();
    for i in 0..10 {
        let pick = |rng: &mut ChaCha8Rng| vals[rng.gen_range(0..vals.len())].clone();
        let (x, y) = (pick(&mut rng), pick(&mut rng));
        let k = kinds[rng.gen_range(0..kinds.len())];
        let line = if k == "mux" {
            let s = pick(&mut rng);
            format!("  %s{i} = comb.extract {s} from 0 : (i8) -> i1\n  %v{i} = comb.mux %s{i}, {x}, {y} : i8")
        } else {
            format!("  %v{i} = comb.{k} {x}, {y} : i8")
        };
        lines.push(line);
        vals.push(format!("%v{i}"));
    }
    // Reverse textual order so that evaluation must follow data, not text.
    lines.reverse();
    format!(
        "hw.module @Dag(in %clk : i1, in %a : i8, in %b : i8, in %c : i8, out x : i8, out y : i8) {{\n\
         {}\n  %r = seq.firreg %v9 clock %clk preset 1 : i8\n  %q = comb.xor %r, %v8 : i8\n  hw.output %v9, %q : i8, i8\n}}\n",
        lines.join("\n")
    )
}

/// End-of-run state in a form independent of hash-map iteration order.
fn snapshot(s: &Simulator) -> Vec<String> {
    let mut out = Vec::new();
    for st in &s.instances {
        let mut last: Vec<String> = st
            .last
            .iter()
            .map(|(k, v)| format!("{}:{k}={v:?}", st.path()))
            .collect();
        last.sort();
        out.extend(last);
    }
    let mut cells: Vec<String> = s.sv.cells.iter().map(|(k, v)| format!("{k:?}={v:?}")).collect();
    cells.sort();
    out.extend(cells);
    let mut mems: Vec<String> = s
        .seq
        .mems
        .iter()
        .flat_map(|(k, m)| {
            m.words
                .iter()
                .map(move |(a, w)| format!("{k:?}[{a}]={}", w.to_msb_string()))
        })
        .collect();
    mems.sort();
    out.extend(mems);
    out
}

fn seeded_run(src: &str, top: &str, stim: &Stimulus, seed: Option<u64>) -> Result<(Vec<String>, String), String> {
    let mut s = sim(src, top, seed)?;
    let outcome = run(&mut s, stim, true).map_err(|e| e.to_string())?;
    if let Some(e) = outcome.error {
        return Err(e.to_string());
    }
    Ok((snapshot(&s), outcome.trace.to_text()))
}

fn confluence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let counter_stim = Stimulus::from_json(&serde_json_cycles(
        (0..12).map(|t| vec![("clk", (t % 2).to_string()), ("rst", ((t < 2) as u8).to_string())]),
    ))
    .map_err(|e| e.to_string())?;
    let dag_stim = Stimulus::from_json(&serde_json_cycles((0..16).map(|t| {
        vec![
            ("clk", (t % 2).to_string()),
            ("a", rng.gen::<u8>().to_string()),
            ("b", rng.gen::<u8>().to_string()),
            ("c", rng.gen::<u8>().to_string()),
        ]
    })))
    .map_err(|e| e.to_string())?;
    let dag = random_dag(11);
    for (name, src, top, stim) in [
        ("counter", COUNTER, "Counter", &counter_stim),
        ("dag", dag.as_str(), "Dag", &dag_stim),
    ] {
        let reference = seeded_run(src, top, stim, None)?;
        for seed in 0..20 {
            let got = seeded_run(src, top, stim, Some(seed))?;
            if got.0 != reference.0 {
                return Err(format!("{name}: state differs under seed {seed}"));
            }
            if got.1 != reference.1 {
                return Err(format!("{name}: trace differs under seed {seed}"));
            }
        }
    }
    Ok("20 seeds on counter and a 10-op DAG agree on state and trace".into())
}

/// Stimulus JSON from per-cycle (port, decimal) pairs.
fn serde_json_cycles<'a>(cycles: impl Iterator<Item = Vec<(&'a str, String)>>) -> String {
    let cycles: Vec<String> = cycles
        .map(|c| {
            let kv: Vec<String> = c.iter().map(|(k, v)| format!("\"{k}\": \"{v}\"")).collect();
            format!("{{{}}}", kv.join(", "))
        })
        .collect();
    format!("{{\"cycles\": [{}]}}", cycles.join(", "))
}

// ---- 5: register and memory tables ------------------------------------------

fn reg_table(decl: &str, ports: &str, cycles: &[Vec<TypedValue>], want: &[Option<u64>]) -> Result<(), String> {
    let src =
        format!("hw.module @R({ports}, out q : i8) {{\n  %rv = hw.constant 9 : i8\n{decl}\n  hw.output %q : i8\n}}\n");
    let mut s = sim(&src, "R", None)?;
    expect_trace(decl.trim(), &trace(&mut s, cycles, "q")?, want)
}

fn columns(cols: &[&[u64]], widths: &[usize]) -> Vec<Vec<TypedValue>> {
    (0..cols[0].len())
        .map(|t| cols.iter().zip(widths).map(|(c, w)| bits(*w, c[t])).collect())
        .collect()
}

fn registers_and_memories() -> Check {
    let x = None;
    let k = Some;
    let ports = "in %clk : i1, in %rst : i1, in %d : i8";
    let clk = [0, 1, 0, 1, 0, 1, 0, 1];
    let rst = [0, 0, 1, 0, 0, 0, 1, 0];
    let d = [1, 2, 3, 4, 5, 6, 7, 8];
    let stim = columns(&[&clk, &rst, &d], &[1, 1, 8]);
    reg_table(
        "  %q = seq.firreg %d clock %clk reset async %rst, %rv : i8",
        ports,
        &stim,
        &[x, k(1), k(9), k(3), k(3), k(5), k(9), k(7)],
    )?;
    reg_table(
        "  %q = seq.firreg %d clock %clk reset sync %rst, %rv : i8",
        ports,
        &stim,
        &[x, k(1), k(1), k(9), k(9), k(5), k(5), k(9)],
    )?;
    reg_table(
        "  %q = seq.firreg %d clock %clk preset 7 : i8",
        "in %clk : i1, in %d : i8",
        &columns(&[&[0, 0, 1, 1, 0, 1, 0, 1], &[3, 4, 5, 6, 7, 8, 9, 10]], &[1, 8]),
        &[k(7), k(7), k(4), k(4), k(4), k(7), k(7), k(9)],
    )?;
    reg_table(
        "  %d = comb.mux %en, %in, %q : i8\n  %q = seq.firreg %d clock %clk preset 0 : i8",
        "in %clk : i1, in %en : i1, in %in : i8",
        &columns(
            &[&clk, &[1, 0, 1, 0, 0, 1, 1, 0], &[5, 6, 7, 8, 9, 10, 11, 12]],
            &[1, 1, 8],
        ),
        &[k(0), k(5), k(5), k(7), k(7), k(7), k(7), k(11)],
    )?;

    // Memory: write then read, disabled write, disabled read, out of range.
    let mem = r#"
hw.module @M(in %clk : i1, in %we : i1, in %wa : i2, in %wd : i8, in %ren : i1, in %ra : i2, out q : i8) {
  %m = seq.firmem 0, 1, undefined, port_order : <3 x 8>
  seq.firmem.write_port %m[%wa] = %wd, clock %clk enable %we : <3 x 8>
  %q = seq.firmem.read_port %m[%ra], clock %clk enable %ren : <3 x 8>
  hw.output %q : i8
}
"#;
    let mut s = sim(mem, "M", None)?;
    let cycles = columns(
        &[
            &[0, 1, 0, 1, 0, 1, 0, 1],
            &[1, 0, 0, 0, 1, 1, 0, 0],
            &[2, 2, 2, 2, 3, 3, 0, 0],
            &[42, 42, 99, 99, 7, 7, 0, 0],
            &[1, 1, 1, 1, 0, 1, 1, 1],
            &[2, 2, 2, 2, 2, 3, 2, 2],
        ],
        &[1, 1, 2, 8, 1, 2],
    );
    expect_trace(
        "firmem",
        &trace(&mut s, &cycles, "q")?,
        &[x, k(42), k(42), k(42), x, x, k(42), k(42)],
    )?;
    let ranges = s
        .diagnostics
        .iter()
        .filter(|d| d.message.contains("out of range"))
        .count();
    if ranges != 2 {
        return Err(format!("expected 2 out-of-range diagnostics, got {:?}", s.diagnostics));
    }
    Ok("4 register tables and the memory scenario match".into())
}

// ---- 6: sv scheduling -------------------------------------------------------

fn swap_design(assign: &str) -> String {
    format!(
        r#"
hw.module @T(in %clk : i1, out a : i8, out b : i8) {{
  %one = hw.constant 1 : i8
  %two = hw.constant 2 : i8
  %ra = sv.reg : !hw.inout<i8>
  %rb = sv.reg : !hw.inout<i8>
  sv.initial {{
    sv.bpassign %ra, %one : i8
    sv.bpassign %rb, %two : i8
  }}
  sv.alwaysff(posedge %clk) {{
    %vb = sv.read_inout %rb : !hw.inout<i8>
    sv.{assign} %ra, %vb : i8
    %va = sv.read_inout %ra : !hw.inout<i8>
    sv.{assign} %rb, %va : i8
  }}
  %oa = sv.read_inout %ra : !hw.inout<i8>
  %ob = sv.read_inout %rb : !hw.inout<i8>
  hw.output %oa, %ob : i8, i8
}}
"#
    )
}

const FORCE: &str = r#"
hw.module @T(in %f : i1, in %rel : i1, in %d : i8, out q : i8) {
  %three = hw.constant 3 : i8
  %r = sv.reg : !hw.inout<i8>
  sv.alwayscomb {
    sv.bpassign %r, %d : i8
    sv.if %f {
      sv.force %r, %three : i8
    }
    sv.if %rel {
      sv.release %r : !hw.inout<i8>
    }
  }
  %q = sv.read_inout %r : !hw.inout<i8>
  hw.output %q : i8
}
"#;

fn sv_scheduling() -> Check {
    let clk = columns(&[&[0, 1, 0, 1, 0, 1]], &[1]);
    let k = Some;
    for (assign, a, b) in [
        ("passign", [1, 2, 2, 1, 1, 2], [2, 1, 1, 2, 2, 1]),
        ("bpassign", [1, 2, 2, 2, 2, 2], [2, 2, 2, 2, 2, 2]),
    ] {
        let src = swap_design(assign);
        let mut s = sim(&src, "T", None)?;
        let mut s2 = sim(&src, "T", None)?;
        expect_trace(&format!("{assign} a"), &trace(&mut s, &clk, "a")?, &a.map(k))?;
        expect_trace(&format!("{assign} b"), &trace(&mut s2, &clk, "b")?, &b.map(k))?;
    }
    let mut s = sim(FORCE, "T", None)?;
    let cycles = columns(
        &[&[0, 1, 0, 0, 0, 0], &[0, 0, 0, 0, 1, 0], &[9, 8, 7, 6, 5, 4]],
        &[1, 1, 8],
    );
    expect_trace("force", &trace(&mut s, &cycles, "q")?, &[9, 3, 3, 3, 5, 4].map(k))?;
    Ok("nonblocking swap, blocking duplicate and a 3-cycle force window match".into())
}

// ---- 7: coverage ------------------------------------------------------------

const SIM_ERRORS: [&str; 27] = [
    "Debug",
    "Deadlock",
    "UnknownOperation",
    "StepLimit",
    "ArityMismatch",
    "TypeMismatch",
    "WidthMismatch",
    "DoubleWrite",
    "NotReady",
    "UnknownName",
    "DuplicateName",
    "PrematureFinish",
    "MultiBlockRegion",
    "PortMismatch",
    "RecursionLimit",
    "EmptyOperandList",
    "OutOfRange",
    "MalformedAttribute",
    "UnknownField",
    "MissingClock",
    "MissingEvent",
    "DanglingRef",
    "LoopBound",
    "UndefinedMacro",
    "BadFormat",
    "DuplicateDriver",
    "MaskUnsupported",
];

/// Exhaustive so that a new variant cannot be missed by the list above.
fn sim_error_name(e: &SimError) -> &'static str {
    use SimError::*;
    match e {
        Static(_) => "Static",
        Debug(_) => "Debug",
        Deadlock { .. } => "Deadlock",
        UnknownOperation(_) => "UnknownOperation",
        StepLimit(_) => "StepLimit",
        ArityMismatch { .. } => "ArityMismatch",
        TypeMismatch { .. } => "TypeMismatch",
        WidthMismatch { .. } => "WidthMismatch",
        DoubleWrite(_) => "DoubleWrite",
        NotReady(_) => "NotReady",
        UnknownName(_) => "UnknownName",
        DuplicateName(_) => "DuplicateName",
        PrematureFinish(_) => "PrematureFinish",
        MultiBlockRegion(_) => "MultiBlockRegion",
        PortMismatch { .. } => "PortMismatch",
        RecursionLimit(_) => "RecursionLimit",
        EmptyOperandList(_) => "EmptyOperandList",
        OutOfRange { .. } => "OutOfRange",
        MalformedAttribute { .. } => "MalformedAttribute",
        UnknownField { .. } => "UnknownField",
        MissingClock(_) => "MissingClock",
        MissingEvent(_) => "MissingEvent",
        DanglingRef(_) => "DanglingRef",
        LoopBound(_) => "LoopBound",
        UndefinedMacro(_) => "UndefinedMacro",
        BadFormat(_) => "BadFormat",
        DuplicateDriver(_) => "DuplicateDriver",
        MaskUnsupported(_) => "MaskUnsupported",
    }
}

const STATIC_ERRORS: [&str; 10] = [
    "DuplicateAlias",
    "DuplicateSymbol",
    "UnresolvedAlias",
    "UnknownAlias",
    "UnknownSymbol",
    "AliasCycle",
    "DuplicateKey",
    "ResultArity",
    "WidthLimit",
    "WrongPhase",
];

fn static_error_name(e: &StaticError) -> &'static str {
    use StaticError::*;
    match e {
        DuplicateAlias(_) => "DuplicateAlias",
        DuplicateSymbol(_) => "DuplicateSymbol",
        UnresolvedAlias(_) => "UnresolvedAlias",
        UnknownAlias(_) => "UnknownAlias",
        UnknownSymbol(_) => "UnknownSymbol",
        AliasCycle(_) => "AliasCycle",
        DuplicateKey { .. } => "DuplicateKey",
        ResultArity { .. } => "ResultArity",
        WidthLimit(_) => "WidthLimit",
        WrongPhase => "WrongPhase",
    }
}

/// Errors that only library callers can provoke.
fn api_errors() -> Vec<String> {
    let mut seen = Vec::new();
    let mut note_sim = |r: Result<(), SimError>| {
        if let Err(e) = r {
            seen.push(sim_error_name(&e).to_string());
        }
    };
    let src = "hw.module @T(in %a : i8, out o : i8) {\n  hw.output %a : i8\n}\n";
    let mut s = Simulator::from_source(src, "T", SimConfig::default()).expect("tiny design");
    note_sim(s.read_curr(0, "nope").map(drop));
    note_sim(
        s.write_curr(0, "w", bits(8, 1))
            .and_then(|_| s.write_curr(0, "w", bits(8, 2))),
    );
    note_sim(s.read_reg(0, "nope").map(drop));
    let mut s = Simulator::from_source(src, "T", SimConfig::default()).expect("tiny design");
    note_sim(s.stimulate(vec![bits(8, 1)]).and_then(|_| s.finish()));
    let r = StorageRef {
        inst: 0,
        slot: "ghost".into(),
        elems: vec![],
        poisoned: false,
    };
    note_sim(hwsem::dialect::sv::read_cell(&s, &r, &TypeExpr::Int(8)).map(drop));
    let mut note_static = |r: Result<(), StaticError>| {
        if let Err(e) = r {
            seen.push(static_error_name(&e).to_string());
        }
    };
    let fresh = MlirState::new(SourceFile::default());
    note_static(fresh.rop("T").map(drop));
    let st = preprocess(parse(src).expect("tiny design")).expect("tiny design");
    note_static(st.rta("!nope").map(drop));
    note_static(st.rop("Nope").map(drop));
    seen
}

fn coverage() -> Check {
    let mut hits: BTreeMap<&'static str, u64> = supported_ops().map(|o| (o, 0)).collect();
    let mut errors: BTreeSet<String> = BTreeSet::new();
    for case in load_corpus() {
        let r = run_case(&case, None);
        for (op, n) in r.coverage {
            *hits.entry(op).or_default() += n;
        }
        errors.insert(r.result);
    }
    let reject = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/reject");
    for entry in std::fs::read_dir(reject).map_err(|e| e.to_string())? {
        let src = std::fs::read_to_string(entry.map_err(|e| e.to_string())?.path()).map_err(|e| e.to_string())?;
        if let Err(e) = parse(&src) {
            errors.insert(variant(&Error::from(e)));
        }
    }
    errors.extend(api_errors());
    let missed_ops: Vec<&str> = hits.iter().filter(|(_, n)| **n == 0).map(|(o, _)| *o).collect();
    let wanted: Vec<&str> = SIM_ERRORS
        .iter()
        .chain(&STATIC_ERRORS)
        .chain(&["Parse"])
        .copied()
        .collect();
    let missed_errors: Vec<&str> = wanted.iter().filter(|e| !errors.contains(**e)).copied().collect();
    let covered = hits.len() - missed_ops.len();
    let pct = 100.0 * covered as f64 / hits.len() as f64;
    let report = format!(
        "ops {covered}/{} ({pct:.1}%), error paths {}/{}",
        hits.len(),
        wanted.len() - missed_errors.len(),
        wanted.len()
    );
    if missed_ops.is_empty() && missed_errors.is_empty() {
        Ok(report)
    } else {
        Err(format!(
            "{report}; unexercised ops {missed_ops:?}, error paths {missed_errors:?}"
        ))
    }
}

// ---- 8: round trip ----------------------------------------------------------

fn round_trip() -> Check {
    let corpus = load_corpus();
    if corpus.len() < 60 {
        return Err(format!("only {} corpus files", corpus.len()));
    }
    for case in &corpus {
        let first = parse(&case.src).map_err(|e| format!("{}: {e}", case.name))?;
        let printed = print(&first);
        let second = parse(&printed).map_err(|e| format!("{}: reparse: {e}", case.name))?;
        if first != second {
            return Err(format!("{}: reparsed tree differs", case.name));
        }
    }
    Ok(format!("{} files", corpus.len()))
}

// ---- 9: VCD -----------------------------------------------------------------

fn vcd_validity() -> Check {
    let mut traces = 0;
    for case in load_corpus() {
        let r = run_case(&case, None);
        if r.vcd.is_empty() {
            continue;
        }
        let parsed = parse_vcd(&r.vcd).map_err(|e| format!("{}: {e}", case.name))?;
        if parsed.values != r.recorded {
            return Err(format!("{}: reconstruction differs from the recorded trace", case.name));
        }
        // Top-level outputs in the trace agree with the values returned per cycle.
        for (t, outs) in r.outputs.iter().enumerate() {
            for (port, v) in outs {
                let Some(b) = v.flatten() else { continue };
                let key = format!("{}.{port}", case.top);
                let got = parsed.values.get(&key).and_then(|vs| vs.get(t));
                if got != Some(&b.to_msb_string()) {
                    return Err(format!(
                        "{}: {key} at {t}: trace {got:?}, output {}",
                        case.name,
                        spell(v)
                    ));
                }
            }
        }
        traces += 1;
    }
    Ok(format!("{traces} traces parse and reconstruct"))
}

// ---- 10: pipeline -----------------------------------------------------------

const PIPELINE: &str = r#"
hw.module @Fetch(in %clk : i1, in %rst : i1, in %we : i1, in %wa : i4, in %wd : i8, out instr : i8) {
  %c0 = hw.constant 0 : i4
  %c1 = hw.constant 1 : i4
  %pc = seq.firreg %next clock %clk reset sync %rst, %c0 preset 0 : i4
  %next = comb.add %pc, %c1 : i4
  %m = seq.firmem 0, 1, undefined, port_order : <16 x 8>
  seq.firmem.write_port %m[%wa] = %wd, clock %clk enable %we : <16 x 8>
  %i = seq.firmem.read_port %m[%pc], clock %clk : <16 x 8>
  hw.output %i : i8
}
hw.module @Add(in %clk : i1, in %x : i8, out s : i8) {
  %mask = hw.constant 90 : i8
  %k = hw.constant 3 : i8
  %y = comb.xor %x, %mask : i8
  %z = comb.add %y, %k : i8
  %s = seq.firreg %z clock %clk : i8
  hw.output %s : i8
}
hw.module @Acc(in %clk : i1, in %rst : i1, in %x : i8, out acc : i8) {
  %zero = hw.constant 0 : i8
  %r = sv.reg : !hw.inout<i8>
  sv.alwaysff(posedge %clk) {
    %cur = sv.read_inout %r : !hw.inout<i8>
    %n = comb.add %cur, %x : i8
    sv.passign %r, %n : i8
  }(syncreset : posedge %rst) {
    sv.passign %r, %zero : i8
  }
  %v = sv.read_inout %r : !hw.inout<i8>
  hw.output %v : i8
}
hw.module @Pipe(in %clk : i1, in %rst : i1, in %we : i1, in %wa : i4, in %wd : i8, out instr : i8, out sum : i8, out acc : i8) {
  %i = hw.instance "fetch" @Fetch(clk: %clk: i1, rst: %rst: i1, we: %we: i1, wa: %wa: i4, wd: %wd: i8) -> (instr: i8)
  %s = hw.instance "add" @Add(clk: %clk: i1, x: %i: i8) -> (s: i8)
  %a = hw.instance "acc" @Acc(clk: %clk: i1, rst: %rst: i1, x: %s: i8) -> (acc: i8)
  hw.output %i, %s, %a : i8, i8, i8
}
"#;

#[derive(Clone, Copy, Default)]
struct In {
    clk: bool,
    rst: bool,
    we: bool,
    wa: u8,
    wd: u8,
}

/// Inputs change only while the clock is low.
fn pipeline_inputs(n: usize) -> Vec<In> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut cur = In::default();
    (0..n)
        .map(|t| {
            if t % 2 == 0 {
                let loading = t < 40;
                cur = In {
                    clk: false,
                    rst: loading || (70..74).contains(&t),
                    we: loading || rng.gen_bool(0.3),
                    wa: if loading {
                        ((t / 2) % 16) as u8
                    } else {
                        rng.gen_range(0..16)
                    },
                    wd: rng.gen(),
                };
            } else {
                cur.clk = true;
            }
            cur
        })
        .collect()
}

/// Cycle model: registered state changes on rising edges using values from
/// the cycle before the edge; the memory read is combinational and sees
/// writes made at the same edge.
fn pipeline_model(inputs: &[In]) -> Vec<[Option<u8>; 3]> {
    let mut mem = [None::<u8>; 16];
    let mut pc = 0u8;
    let (mut sum, mut acc) = (None::<u8>, None::<u8>);
    let mut prev: Option<(In, Option<u8>, Option<u8>)> = None;
    let mut out = Vec::new();
    for inp in inputs {
        if let Some((p, p_instr, p_sum)) = prev {
            if !p.clk && inp.clk {
                if p.we {
                    mem[p.wa as usize] = Some(p.wd);
                }
                pc = if p.rst { 0 } else { (pc + 1) % 16 };
                sum = p_instr.map(|i| (i ^ 90).wrapping_add(3));
                acc = if p.rst {
                    Some(0)
                } else {
                    acc.zip(p_sum).map(|(a, s)| a.wrapping_add(s))
                };
            }
        }
        let instr = mem[pc as usize];
        out.push([instr, sum, acc]);
        prev = Some((*inp, instr, sum));
    }
    out
}

fn pipeline() -> Check {
    let start = Instant::now();
    let inputs = pipeline_inputs(100);
    let want = pipeline_model(&inputs);
    let mut s = sim(PIPELINE, "Pipe", None)?;
    for (t, (i, w)) in inputs.iter().zip(&want).enumerate() {
        let out = s
            .run_cycle(vec![
                bits(1, i.clk as u64),
                bits(1, i.rst as u64),
                bits(1, i.we as u64),
                bits(4, i.wa as u64),
                bits(8, i.wd as u64),
            ])
            .map_err(|e| format!("cycle {t}: {e}"))?;
        for (k, port) in ["instr", "sum", "acc"].iter().enumerate() {
            let got = level(&out[*port])?;
            let exp = w[k].map(u64::from);
            if got != exp {
                return Err(format!("cycle {t}: {port} expected {exp:?}, got {got:?}"));
            }
        }
    }
    let took = start.elapsed();
    if took >= Duration::from_secs(5) {
        return Err(format!("took {took:?}"));
    }
    let defined = want.iter().filter(|w| w[2].is_some()).count();
    Ok(format!(
        "100 cycles match the reference model ({defined} with a known accumulator) in {took:?}"
    ))
}

fn main() {
    let checks: [Criterion; 10] = [
        ("counter end-to-end", counter),
        ("comb oracle equivalence", comb_oracle),
        ("X pessimism", x_pessimism),
        ("scheduler confluence", confluence),
        ("register and memory tables", registers_and_memories),
        ("sv scheduling", sv_scheduling),
        ("evaluator and error coverage", coverage),
        ("parser round trip", round_trip),
        ("VCD validity", vcd_validity),
        ("pipeline against reference model", pipeline),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
