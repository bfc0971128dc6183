// SPDX-License-Identifier: Apache-2.0

//! Rejected inputs and error paths reachable only through the library API.

use std::fs;
use std::path::Path;

use hwsem::bits::BitVec4;
use hwsem::dialect::sv::read_cell;
use hwsem::mlir::ast::{SourceFile, TypeExpr};
use hwsem::mlir::parse;
use hwsem::mlir::state::{MlirState, StaticError};
use hwsem::value::StorageRef;
use hwsem::{Error, SimConfig, SimError, Simulator, TypedValue};

const ADDER: &str = r#"
hw.module @Add(in %a : i8, in %b : i8, out s : i8) {
  %0 = comb.add %a, %b : i8
  %w = hw.wire %0 sym @sum : i8
  hw.output %w : i8
}
"#;

fn adder() -> Simulator {
    Simulator::from_source(ADDER, "Add", SimConfig::default()).unwrap()
}

fn byte(n: u64) -> TypedValue {
    TypedValue::bits(TypeExpr::Int(8), BitVec4::from_u64(8, n))
}

#[test]
fn malformed_files_are_parse_errors() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/reject");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let src = fs::read_to_string(&path).unwrap();
        let err = parse(&src).expect_err(&path.display().to_string());
        assert!(err.line >= 1 && err.column >= 1, "{}: {err}", path.display());
        assert_eq!(Error::from(err).exit_code(), 1, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 8);
}

#[test]
fn reads_of_unwritten_values_are_not_ready() {
    let sim = adder();
    assert!(matches!(sim.read_curr(0, "nope"), Err(SimError::NotReady(_))));
}

#[test]
fn second_write_in_a_cycle_is_rejected() {
    let mut sim = adder();
    sim.write_curr(0, "t", byte(1)).unwrap();
    assert_eq!(sim.write_curr(0, "t", byte(2)), Err(SimError::DoubleWrite("t".into())));
}

#[test]
fn unknown_register_and_wire_names() {
    let mut sim = adder();
    sim.run_cycle(vec![byte(1), byte(2)]).unwrap();
    assert_eq!(sim.read_reg(0, "sum"), Err(SimError::UnknownName("sum".into())));
    assert!(matches!(sim.read_wire(0, "nope"), Err(SimError::UnknownName(_))));
}

#[test]
fn finishing_an_unsettled_cycle_is_premature() {
    let mut sim = adder();
    sim.stimulate(vec![byte(1), byte(2)]).unwrap();
    assert!(matches!(sim.finish(), Err(SimError::PrematureFinish(_))));
    sim.settle().unwrap();
    sim.finish().unwrap();
}

#[test]
fn references_to_missing_storage_dangle() {
    let sim = adder();
    let r = StorageRef {
        inst: 0,
        slot: "ghost".into(),
        elems: vec![],
        poisoned: false,
    };
    assert_eq!(
        read_cell(&sim, &r, &TypeExpr::Int(8)),
        Err(SimError::DanglingRef("ghost".into()))
    );
}

#[test]
fn lookups_before_preprocessing_are_in_the_wrong_phase() {
    let st = MlirState::new(SourceFile::default());
    assert_eq!(st.rop("Add"), Err(StaticError::WrongPhase));
    assert_eq!(st.rta("!t"), Err(StaticError::WrongPhase));
}

#[test]
fn unknown_aliases_and_symbols_after_preprocessing() {
    let st = hwsem::mlir::state::preprocess(parse(ADDER).unwrap()).unwrap();
    assert_eq!(st.rta("!t"), Err(StaticError::UnknownAlias("!t".into())));
    assert_eq!(st.raa("#a"), Err(StaticError::UnknownAlias("#a".into())));
    assert_eq!(st.rop("Sub"), Err(StaticError::UnknownSymbol("Sub".into())));
}

#[test]
fn wrong_input_count_is_an_arity_mismatch() {
    let mut sim = adder();
    assert!(matches!(
        sim.run_cycle(vec![byte(1)]),
        Err(SimError::ArityMismatch {
            expected: 2,
            found: 1,
            ..
        })
    ));
}

#[test]
fn exit_codes_by_stage() {
    let parse_err = Simulator::from_source("hw.module", "T", SimConfig::default())
        .err()
        .unwrap();
    assert_eq!(parse_err.exit_code(), 1);
    let static_err = Simulator::from_source("!a = i1\n!a = i2\n", "T", SimConfig::default())
        .err()
        .unwrap();
    assert_eq!(static_err.exit_code(), 2);
    assert_eq!(Error::from(SimError::MaskUnsupported("m".into())).exit_code(), 2);
    assert_eq!(Error::from(SimError::StepLimit(1)).exit_code(), 3);
}
