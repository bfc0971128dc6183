// SPDX-License-Identifier: Apache-2.0

//! Runs every corpus design and checks its declared outcome and outputs.

mod common;

use common::{check_outputs, load_corpus, run_case};
use hwsem::mlir::{parse, print};

#[test]
fn every_case_meets_its_expectation() {
    let mut failures = Vec::new();
    for case in load_corpus() {
        let run = run_case(&case, None);
        if run.result != case.expect {
            failures.push(format!("{}: expected {}, got {}", case.name, case.expect, run.result));
        } else if let Err(e) = check_outputs(&case, &run) {
            failures.push(e);
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn printing_is_idempotent() {
    for case in load_corpus() {
        let once = print(&parse(&case.src).unwrap());
        let twice = print(&parse(&once).unwrap());
        assert_eq!(once, twice, "{}", case.name);
    }
}
