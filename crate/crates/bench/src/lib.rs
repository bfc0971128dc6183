// SPDX-License-Identifier: Apache-2.0

//! Designs and input vectors shared by the benchmarks.

use hwsem::{TypedValue, Value};

pub const COUNTER: &str = r#"
hw.module @Counter(in %clk : !seq.clock, in %rst : i1, out out : i8) {
  %c0_i8 = hw.constant 0 : i8
  %c1_i8 = hw.constant 1 : i8
  %count = seq.firreg %0 clock %clk reset sync %rst, %c0_i8 preset 0 : i8
  %0 = comb.add %count, %c1_i8 : i8
  hw.output %count : i8
}
"#;

/// Clock toggling from 0 with reset held through the first rising edge.
pub fn counter_inputs(cycles: usize) -> Vec<Vec<TypedValue>> {
    (0..cycles)
        .map(|t| vec![TypedValue::int(1, (t % 2) as u64), TypedValue::int(1, (t < 2) as u64)])
        .collect()
}

/// A module computing a chain of `n` mixed comb ops over two `width`-bit inputs.
pub fn comb_chain(n: usize, width: u32) -> String {
    let ops = ["add", "xor", "mul", "sub", "or", "and"];
    let mut body = String::new();
    let mut prev = "%a".to_string();
    for i in 0..n {
        body.push_str(&format!(
            "  %v{i} = comb.{} {prev}, %b : i{width}\n",
            ops[i % ops.len()]
        ));
        prev = format!("%v{i}");
    }
    format!("hw.module @Chain(in %a : i{width}, in %b : i{width}, out o : i{width}) {{\n{body}  hw.output {prev} : i{width}\n}}\n")
}

/// Input pairs for [`comb_chain`].
pub fn chain_inputs(cycles: usize, width: usize) -> Vec<Vec<TypedValue>> {
    (0..cycles as u64)
        .map(|t| {
            vec![
                TypedValue::int(width, t.wrapping_mul(0x9e37_79b9) & mask(width)),
                TypedValue::int(width, (t + 1) & mask(width)),
            ]
        })
        .collect()
}

fn mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1 << width) - 1
    }
}

/// True when a value carries no unknown bits.
pub fn is_known(v: &TypedValue) -> bool {
    matches!(&v.val, Value::Bits(b) if !b.has_unknown())
}
