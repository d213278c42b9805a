use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("rational overflow")]
    Overflow,
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("{0} lies outside the unit interval")]
    OutOfRange(String),
    #[error("({x}, {y}) is not on the boundary of the unit square")]
    NotOnBoundary { x: String, y: String },
    #[error("index (1,1) is not allowed in an M word")]
    ForbiddenIndex,
    #[error("parse error at column {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("requested level {requested} exceeds the configured maximum {max}")]
    LevelTooDeep { requested: u32, max: u32 },
    #[error("resource guard: {0}")]
    TooLarge(String),
    #[error("variant mismatch: {0}")]
    VariantMismatch(String),
    #[error("{0} is not a ternary rational")]
    NotTernary(String),
    #[error("tip {0} is not a corner at the requested level")]
    NotCorner(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("empty cell set")]
    EmptySet,
    #[error("invalid coalgebra: {0}")]
    Coalgebra(String),
    #[error("certification failed: {0}")]
    Certification(String),
}

impl Error {
    pub(crate) fn parse(pos: usize, msg: impl Into<String>) -> Error {
        Error::Parse { pos, msg: msg.into() }
    }

    pub(crate) fn line(line: usize, msg: impl Into<String>) -> Error {
        Error::Line { line, msg: msg.into() }
    }

    /// Whether the error comes from a size or depth guard rather than bad input.
    pub fn is_resource_guard(&self) -> bool {
        matches!(self, Error::LevelTooDeep { .. } | Error::TooLarge(_))
    }
}
