// SPDX-License-Identifier: Apache-2.0

//! Executable cycle-level semantics for the `hw`, `comb`, `seq` and `sv`
//! hardware dialects expressed as MLIR text.

pub mod bits;
pub mod dialect;
pub mod error;
pub mod hwcore;
pub mod mlir;
pub mod sim;
pub mod value;

pub use bits::{Bit4, BitVec4};
pub use error::{Error, SimError};
pub use hwcore::{SimConfig, Simulator};
pub use value::{TypedValue, Value};
