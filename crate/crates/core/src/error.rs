use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |H - H^dagger| = {max_asymmetry:e} at ({row}, {col})")]
    NotHermitian {
        max_asymmetry: f64,
        row: usize,
        col: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {requested} exceeds the configured cap of {cap}")]
    DimensionCap { requested: usize, cap: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("eigen-solver did not converge for a {dim}x{dim} matrix")]
    EigenSolver { dim: usize },

    #[error("vector is not normalized: norm = {norm}")]
    NotNormalized { norm: f64 },

    #[error("{what} budget exceeded: {requested} > {budget}{hint}")]
    Budget {
        what: &'static str,
        requested: u128,
        budget: u128,
        hint: &'static str,
    },

    #[error("index {index} out of range for {what} (size {size})")]
    IndexOutOfRange {
        what: String,
        index: usize,
        size: usize,
    },

    #[error("non-increasing time: {next} does not follow {previous}")]
    NonIncreasingTime { previous: f64, next: f64 },

    #[error("invalid scenario:\n{0}")]
    Validation(Diagnostics),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error in `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("post-selection overlap {overlap:e} is below tolerance {tolerance:e}")]
    PostSelection { overlap: f64, tolerance: f64 },

    #[error("distribution is not normalized: total = {total}")]
    Unnormalized { total: f64 },

    #[error("unknown {kind} `{name}`; available: {}", available.join(", "))]
    Unknown {
        kind: &'static str,
        name: String,
        available: Vec<String>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

/// One problem found while validating a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub field: String,
    pub index: Option<usize>,
    pub rule: String,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            // 1-based in messages
            Some(i) => {
                let noun = match self.field.as_str() {
                    "measurements" => "event",
                    "hamiltonian" => "segment",
                    "preparation.weights" => "weight",
                    _ => "vector",
                };
                write!(f, "{} at {} {} ({}): {}", self.rule, noun, i + 1, self.field, self.detail)
            }
            None => write!(f, "{} ({}): {}", self.rule, self.field, self.detail),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn push(
        &mut self,
        field: impl Into<String>,
        index: Option<usize>,
        rule: impl Into<String>,
        detail: impl Into<String>,
    ) {
        self.0.push(Diagnostic {
            field: field.into(),
            index,
            rule: rule.into(),
            detail: detail.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, d) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {d}")?;
        }
        Ok(())
    }
}
