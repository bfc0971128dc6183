// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::mlir::state::StaticError;
use crate::mlir::ParseError;

/// Errors raised while elaborating or simulating a design.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Static(#[from] StaticError),
    #[error("simulation halted: {0}")]
    Debug(String),
    #[error("deadlock in `{path}`: stuck ops [{}], missing values [{}]", stuck.join(", "), missing.join(", "))]
    Deadlock {
        path: String,
        stuck: Vec<String>,
        missing: Vec<String>,
    },
    #[error("no evaluator registered for `{0}`")]
    UnknownOperation(String),
    #[error("cycle exceeded {0} evaluation steps")]
    StepLimit(u64),
    #[error("`{op}`: expected {expected} values, found {found}")]
    ArityMismatch { op: String, expected: usize, found: usize },
    #[error("`{op}`: expected type {expected}, found {found}")]
    TypeMismatch {
        op: String,
        expected: String,
        found: String,
    },
    #[error("`{op}`: expected width {expected}, found {found}")]
    WidthMismatch { op: String, expected: usize, found: usize },
    #[error("value `%{0}` written twice in one cycle")]
    DoubleWrite(String),
    #[error("value `%{0}` read before it was computed")]
    NotReady(String),
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("name `{0}` registered twice")]
    DuplicateName(String),
    #[error("finish requested while `{0}` still has pending evaluations")]
    PrematureFinish(String),
    #[error("`{0}`: regions with more than one block are not supported")]
    MultiBlockRegion(String),
    #[error("module `{module}`: {detail}")]
    PortMismatch { module: String, detail: String },
    #[error("instantiation of `{0}` exceeds the hierarchy depth limit")]
    RecursionLimit(String),
    #[error("`{0}` needs at least one operand")]
    EmptyOperandList(String),
    #[error("`{op}`: {detail}")]
    OutOfRange { op: String, detail: String },
    #[error("`{op}`: missing or malformed attribute `{attr}`")]
    MalformedAttribute { op: String, attr: String },
    #[error("`{op}`: no field named `{field}`")]
    UnknownField { op: String, field: String },
    #[error("`{0}` has no clock operand")]
    MissingClock(String),
    #[error("`{0}` is missing an event operand")]
    MissingEvent(String),
    #[error("reference to storage `%{0}` that does not exist")]
    DanglingRef(String),
    #[error("`{0}` exceeded the loop iteration limit")]
    LoopBound(String),
    #[error("macro `{0}` is not defined")]
    UndefinedMacro(String),
    #[error("bad format string: {0}")]
    BadFormat(String),
    #[error("storage `%{0}` has more than one continuous driver")]
    DuplicateDriver(String),
    #[error("`{0}`: write masks are not supported")]
    MaskUnsupported(String),
}

impl SimError {
    /// True for errors detected while preparing a design rather than while
    /// running it.
    pub fn is_static(&self) -> bool {
        matches!(
            self,
            SimError::Static(_)
                | SimError::MaskUnsupported(_)
                | SimError::RecursionLimit(_)
                | SimError::DuplicateDriver(_)
                | SimError::MultiBlockRegion(_)
        )
    }
}

/// Any failure of the end-to-end pipeline.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("static error: {0}")]
    Static(#[from] StaticError),
    #[error("runtime error: {0}")]
    Sim(SimError),
}

impl From<SimError> for Error {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Static(s) => Error::Static(s),
            other => Error::Sim(other),
        }
    }
}

impl Error {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 1,
            Error::Static(_) => 2,
            Error::Sim(e) if e.is_static() => 2,
            Error::Sim(_) => 3,
        }
    }
}
