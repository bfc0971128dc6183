// SPDX-License-Identifier: Apache-2.0

//! Property tests for bit vectors, comb evaluation, aggregates, the text
//! format and scheduling.

use num_bigint::BigUint;
use proptest::prelude::*;

use hwsem::bits::{Bit4, BitVec4};
use hwsem::dialect::comb::{self, IcmpPredicate};
use hwsem::mlir::ast::TypeExpr;
use hwsem::mlir::{parse, print};
use hwsem::{SimConfig, Simulator, TypedValue};

fn bit() -> impl Strategy<Value = Bit4> {
    prop_oneof![Just(Bit4::B0), Just(Bit4::B1), Just(Bit4::BX), Just(Bit4::BZ)]
}

fn known(w: usize) -> impl Strategy<Value = BitVec4> {
    proptest::collection::vec(any::<bool>(), w).prop_map(|v| {
        let bits: Vec<Bit4> = v.into_iter().map(Bit4::from_bool).collect();
        BitVec4::from_bits(&bits)
    })
}

fn known_pair() -> impl Strategy<Value = (BitVec4, BitVec4)> {
    (1usize..=70).prop_flat_map(|w| (known(w), known(w)))
}

fn four_state(w: usize) -> impl Strategy<Value = BitVec4> {
    proptest::collection::vec(bit(), w).prop_map(|v| BitVec4::from_bits(&v))
}

fn var(op: &str, xs: &[BitVec4]) -> BitVec4 {
    comb::eval_variadic(op, xs, xs[0].width()).unwrap()
}

fn bin(op: &str, a: &BitVec4, b: &BitVec4) -> BitVec4 {
    comb::eval_binary(op, a, b).unwrap()
}

fn icmp(p: IcmpPredicate, a: &BitVec4, b: &BitVec4) -> bool {
    comb::eval_icmp(p, a, b).unwrap().is_one()
}

/// Scalar, array and struct types up to a few levels deep.
fn aggregate_type() -> impl Strategy<Value = TypeExpr> {
    let leaf = (1u32..=9).prop_map(TypeExpr::Int);
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            (1u64..=4, inner.clone()).prop_map(|(n, t)| TypeExpr::array(n, t)),
            proptest::collection::vec(inner, 1..=3).prop_map(|ts| {
                TypeExpr::Struct(ts.into_iter().enumerate().map(|(i, t)| (format!("f{i}"), t)).collect())
            }),
        ]
    })
}

proptest! {
    #[test]
    fn msb_text_round_trips(v in (1usize..=80).prop_flat_map(four_state)) {
        prop_assert_eq!(BitVec4::parse_msb(&v.to_msb_string()), Some(v));
    }

    #[test]
    fn unsigned_round_trips(w in 1usize..=130, n in any::<u128>()) {
        let n = BigUint::from(n) % (BigUint::from(1u8) << w);
        prop_assert_eq!(BitVec4::from_biguint(w, &n).to_biguint(), Some(n));
    }

    #[test]
    fn add_and_mul_commute_and_associate((a, b) in known_pair(), seed in any::<u64>()) {
        let c = BitVec4::from_u64(a.width(), seed);
        for op in ["add", "mul", "and", "or", "xor"] {
            prop_assert_eq!(var(op, &[a.clone(), b.clone()]), var(op, &[b.clone(), a.clone()]));
            let left = var(op, &[var(op, &[a.clone(), b.clone()]), c.clone()]);
            prop_assert_eq!(&left, &var(op, &[a.clone(), var(op, &[b.clone(), c.clone()])]));
            prop_assert_eq!(left, var(op, &[a.clone(), b.clone(), c.clone()]));
        }
    }

    #[test]
    fn sub_inverts_add((a, b) in known_pair()) {
        prop_assert_eq!(bin("sub", &var("add", &[a.clone(), b.clone()]), &b), a.clone());
        prop_assert!(bin("sub", &a, &a).is_zero());
        prop_assert!(var("xor", &[a.clone(), a.clone()]).is_zero());
    }

    #[test]
    fn division_identities((a, b) in known_pair()) {
        prop_assume!(!b.is_zero());
        for (div, rem) in [("divu", "modu"), ("divs", "mods")] {
            let q = bin(div, &a, &b);
            let r = bin(rem, &a, &b);
            prop_assert_eq!(var("add", &[var("mul", &[q, b.clone()]), r]), a.clone());
        }
    }

    #[test]
    fn shifts_scale_by_powers_of_two(a in (1usize..=40).prop_flat_map(known), s in 0u64..45) {
        let w = a.width();
        prop_assume!(s < 1u64 << w.min(63));
        let amt = BitVec4::from_u64(w, s);
        let n = a.to_biguint().unwrap();
        let m = BigUint::from(1u8) << w;
        let (l, r) = if (s as usize) < w { ((&n << s) % &m, &n >> s) } else { (BigUint::from(0u8), BigUint::from(0u8)) };
        prop_assert_eq!(bin("shl", &a, &amt).to_biguint(), Some(l));
        prop_assert_eq!(bin("shru", &a, &amt).to_biguint(), Some(r));
    }

    #[test]
    fn unknown_inputs_give_all_x((a, b) in known_pair(), i in any::<prop::sample::Index>(), z in any::<bool>()) {
        let mut xa = a.clone();
        xa.set(i.index(a.width()), if z { Bit4::BZ } else { Bit4::BX });
        let all_x = |v: &BitVec4| v.iter().all(|b| b == Bit4::BX);
        for op in ["add", "mul", "and", "or", "xor"] {
            prop_assert!(all_x(&var(op, &[xa.clone(), b.clone()])));
        }
        for op in ["sub", "divu", "divs", "modu", "mods", "shl", "shru", "shrs"] {
            prop_assert!(all_x(&bin(op, &b, &xa)));
        }
        for p in IcmpPredicate::ALL {
            prop_assert!(all_x(&comb::eval_icmp(p, &xa, &b).unwrap()));
        }
        prop_assert!(all_x(&comb::eval_parity(&xa)));
        prop_assert!(all_x(&comb::eval_mux(&BitVec4::from_bool(true), &b, &xa).unwrap()));
    }

    #[test]
    fn extract_undoes_concat(a in (1usize..=40).prop_flat_map(four_state), b in (1usize..=40).prop_flat_map(four_state)) {
        let (wa, wb) = (a.width(), b.width());
        let c = comb::eval_variadic("concat", &[a.clone(), b.clone()], wa + wb).unwrap();
        prop_assert_eq!(comb::eval_extract(&c, 0, wb).unwrap(), b);
        prop_assert_eq!(comb::eval_extract(&c, wb, wa).unwrap(), a);
    }

    #[test]
    fn icmp_predicates_are_consistent((a, b) in known_pair()) {
        use IcmpPredicate::*;
        prop_assert_ne!(icmp(Eq, &a, &b), icmp(Ne, &a, &b));
        prop_assert_eq!(icmp(Ult, &a, &b), icmp(Ugt, &b, &a));
        prop_assert_eq!(icmp(Slt, &a, &b), icmp(Sgt, &b, &a));
        prop_assert_eq!(icmp(Ule, &a, &b), !icmp(Ugt, &a, &b));
        prop_assert_eq!(icmp(Sle, &a, &b), !icmp(Sgt, &a, &b));
        prop_assert_eq!(icmp(Uge, &a, &b), !icmp(Ult, &a, &b));
        prop_assert_eq!(icmp(Sge, &a, &b), !icmp(Slt, &a, &b));
        prop_assert_eq!(icmp(Eq, &a, &b), a == b);
    }

    #[test]
    fn flatten_inverts_unflatten(ty in aggregate_type(), seed in any::<u64>()) {
        let w = hwsem::value::bit_width(&ty).unwrap();
        let bits: Vec<Bit4> = (0..w).map(|i| Bit4::from_bool(seed.rotate_left(i as u32) & 1 == 1)).collect();
        let bits = BitVec4::from_bits(&bits);
        let v = TypedValue::unflatten(&ty, &bits).unwrap();
        prop_assert_eq!(v.flatten(), Some(bits));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bitcast_round_trip_is_identity(n in 0u64..4096) {
        let src = r#"
hw.module @B(in %a : i12, out o : i12, out s : i12) {
  %arr = hw.bitcast %a : (i12) -> !hw.array<3xi4>
  %st = hw.bitcast %arr : (!hw.array<3xi4>) -> !hw.struct<x: i8, y: i4>
  %back = hw.bitcast %st : (!hw.struct<x: i8, y: i4>) -> i12
  %y = hw.struct_extract %st["y"] : !hw.struct<x: i8, y: i4>
  %lo = comb.extract %a from 0 : (i12) -> i4
  %d = comb.sub %y, %lo : i4
  %s = comb.concat %d, %d, %d : i4, i4, i4
  hw.output %back, %s : i12, i12
}
"#;
        let mut sim = Simulator::from_source(src, "B", SimConfig::default()).unwrap();
        let out = sim.run_cycle(vec![TypedValue::int(12, n)]).unwrap();
        prop_assert_eq!(out["o"].as_bits().unwrap().to_u64(), Some(n));
        // The last struct field holds the low bits.
        prop_assert_eq!(out["s"].as_bits().unwrap().to_u64(), Some(0));
    }

    #[test]
    fn generated_modules_print_and_reparse(ops in proptest::collection::vec((0usize..6, any::<prop::sample::Index>(), any::<prop::sample::Index>()), 1..12)) {
        let names = ["add", "sub", "xor", "and", "or", "mul"];
        let mut vals = vec!["%a".to_string(), "%b".to_string()];
        let mut body = String::new();
        for (k, (op, x, y)) in ops.iter().enumerate() {
            let (x, y) = (x.get(&vals).clone(), y.get(&vals).clone());
            body.push_str(&format!("  %v{k} = comb.{} {x}, {y} : i8\n", names[*op]));
            vals.push(format!("%v{k}"));
        }
        let src = format!(
            "hw.module @G(in %a : i8, in %b : i8, out o : i8) {{\n{body}  hw.output {} : i8\n}}\n",
            vals.last().unwrap()
        );
        let first = parse(&src).unwrap();
        let printed = print(&first);
        let second = parse(&printed).unwrap();
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(print(&second), printed);
    }

    #[test]
    fn random_orders_agree(seed in any::<u64>(), inputs in proptest::collection::vec((any::<u8>(), any::<u8>()), 1..8)) {
        let src = r#"
hw.module @D(in %clk : i1, in %a : i8, in %b : i8, out o : i8, out p : i8) {
  %3 = comb.xor %2, %r : i8
  %2 = comb.mul %1, %b : i8
  %1 = comb.add %0, %a : i8
  %0 = comb.sub %a, %b : i8
  %r = seq.firreg %3 clock %clk preset 5 : i8
  %w = hw.wire %3 sym @w : i8
  hw.output %w, %r : i8, i8
}
"#;
        let run = |seed: Option<u64>| {
            let mut sim = Simulator::from_source(src, "D", SimConfig { seed, ..SimConfig::default() }).unwrap();
            inputs
                .iter()
                .enumerate()
                .map(|(t, (a, b))| {
                    sim.run_cycle(vec![
                        TypedValue::int(1, (t % 2) as u64),
                        TypedValue::int(8, *a as u64),
                        TypedValue::int(8, *b as u64),
                    ])
                    .unwrap()
                })
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(None), run(Some(seed)));
    }
}
