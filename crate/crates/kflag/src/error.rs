//! Crate-wide error type and the process exit-code mapping used by the CLI.

use std::fmt;

/// Everything that can go wrong across the crate, flattened into one enum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KflagError {
    /// Coefficient-mode mismatch between operands (integer mode vs rational mode).
    Mode(String),
    /// A substitution image or negative power required a unit (single monomial, coefficient +-1).
    Unit(String),
    /// A parameter was out of range for the operation.
    Argument(String),
    /// A point evaluation was missing a variable or assigned zero.
    Evaluation(String),
    /// Expression syntax error with position and the set of tokens that would have been accepted.
    Parse {
        line: usize,
        col: usize,
        expected: Vec<String>,
        found: String,
    },
    /// Expression semantic error: unknown variables, bad indices, kind misuse.
    Binding(String),
    /// A tower description violates a structural constraint.
    Validation(String),
    /// The operation is not defined for this stage family or shape.
    Unsupported(String),
    /// File-system or JSON trouble while loading input.
    Io(String),
    /// A configured size cap was exceeded.
    Size(String),
    /// A Groebner resource cap was hit; carries the progress made so far.
    Resource {
        pairs_done: usize,
        basis_len: usize,
        detail: String,
    },
    /// Internal consistency check failed; indicates a bug, never expected.
    Internal(String),
    /// A verification run produced a mismatch.
    Verification(String),
}

pub type Result<T> = std::result::Result<T, KflagError>;

impl KflagError {
    /// Process exit code: 0 is success, 1 input/validation, 2 computation/resource,
    /// 3 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            KflagError::Mode(_)
            | KflagError::Unit(_)
            | KflagError::Argument(_)
            | KflagError::Evaluation(_)
            | KflagError::Parse { .. }
            | KflagError::Binding(_)
            | KflagError::Validation(_)
            | KflagError::Unsupported(_)
            | KflagError::Io(_) => 1,
            KflagError::Size(_) | KflagError::Resource { .. } | KflagError::Internal(_) => 2,
            KflagError::Verification(_) => 3,
        }
    }

    /// Coarse machine-readable class used in JSON error payloads.
    pub fn class(&self) -> &'static str {
        match self.exit_code() {
            1 => "input",
            2 => "computation",
            _ => "verification",
        }
    }
}

impl fmt::Display for KflagError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KflagError::Mode(m) => write!(f, "coefficient mode error: {m}"),
            KflagError::Unit(m) => write!(f, "unit error: {m}"),
            KflagError::Argument(m) => write!(f, "argument error: {m}"),
            KflagError::Evaluation(m) => write!(f, "evaluation error: {m}"),
            KflagError::Parse {
                line,
                col,
                expected,
                found,
            } => {
                write!(
                    f,
                    "parse error at {line}:{col}: expected {}; found {found}",
                    expected.join(" | ")
                )
            }
            KflagError::Binding(m) => write!(f, "binding error: {m}"),
            KflagError::Validation(m) => write!(f, "validation error: {m}"),
            KflagError::Unsupported(m) => write!(f, "unsupported: {m}"),
            KflagError::Io(m) => write!(f, "io error: {m}"),
            KflagError::Size(m) => write!(f, "size error: {m}"),
            KflagError::Resource {
                pairs_done,
                basis_len,
                detail,
            } => write!(
                f,
                "resource cap exceeded: {detail} (pairs processed: {pairs_done}, basis size: {basis_len})"
            ),
            KflagError::Internal(m) => write!(f, "internal consistency error: {m}"),
            KflagError::Verification(m) => write!(f, "verification failure: {m}"),
        }
    }
}

impl std::error::Error for KflagError {}
