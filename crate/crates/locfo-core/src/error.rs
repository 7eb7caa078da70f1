use alloc::string::String;
use core::fmt;

/// Byte span of a token in parsed text, with 1-based line and column of `start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Error {
    /// Unknown element id, index out of range, malformed structure.
    Structural(String),
    /// Caller passed an argument outside the operation's domain.
    Argument(String),
    /// Formula does not type-check against a signature.
    Typing(String),
    /// Formula is outside the required fragment.
    Fragment(String),
    Syntax { msg: String, span: SourceSpan },
    /// Structure or domino file rejected.
    Format(String),
    /// A checked pre- or postcondition failed.
    Contract(String),
    UnboundVariable(String),
    /// A variable other than the centre points outside an r-view.
    UnboundInView(String),
    /// Relation symbol used that the signature's Γ does not admit.
    GammaViolation { i: usize, j: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Structural(m) => write!(f, "structural error: {m}"),
            Error::Argument(m) => write!(f, "argument error: {m}"),
            Error::Typing(m) => write!(f, "typing error: {m}"),
            Error::Fragment(m) => write!(f, "fragment error: {m}"),
            Error::Syntax { msg, span } => {
                write!(f, "syntax error at {}:{}: {msg}", span.line, span.column)
            }
            Error::Format(m) => write!(f, "format error: {m}"),
            Error::Contract(m) => write!(f, "contract violation: {m}"),
            Error::UnboundVariable(v) => write!(f, "unbound variable `{v}`"),
            Error::UnboundInView(v) => {
                write!(f, "variable `{v}` is bound outside the current view")
            }
            Error::GammaViolation { i, j } => {
                write!(f, "relation ~{i}:{j} is not admitted by gamma")
            }
        }
    }
}

impl core::error::Error for Error {}
