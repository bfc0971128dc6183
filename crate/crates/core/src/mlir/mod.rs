// SPDX-License-Identifier: Apache-2.0

//! MLIR front end: syntax tree, parser, printer, and static semantics.

pub mod ast;
mod custom;
mod parser;
mod printer;
pub mod state;

pub use custom::{firmem_addr_width, ICMP_PREDICATES};
pub use parser::{parse, ParseError};
pub use printer::{attr_str, dict_str, print, print_operation, quote, type_str};
