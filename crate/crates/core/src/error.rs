use thiserror::Error;

pub type Result<T> = std::result::Result<T, SparkError>;

#[derive(Debug, Error)]
pub enum SparkError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value in {op}: {detail}")]
    Numeric { op: &'static str, detail: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("CFL bound violated: dt = {dt} exceeds limit {limit}; use dt <= {suggested}")]
    Cfl { dt: f64, limit: f64, suggested: f64 },

    #[error("incompatible artifacts: {0}")]
    Incompatible(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("file truncated while reading {0}")]
    Truncated(&'static str),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SparkError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        SparkError::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn numeric(op: &'static str, detail: impl Into<String>) -> Self {
        SparkError::Numeric {
            op,
            detail: detail.into(),
        }
    }

    /// Process exit status for command-line use: 2 configuration, 3 numeric
    /// failure, 4 incompatible or unreadable artifacts, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            SparkError::Config(_) | SparkError::Cfl { .. } => 2,
            SparkError::Numeric { .. } | SparkError::Diverged { .. } => 3,
            SparkError::Incompatible(_)
            | SparkError::Format(_)
            | SparkError::Version { .. }
            | SparkError::Truncated(_)
            | SparkError::Checksum { .. } => 4,
            SparkError::Shape { .. } | SparkError::Contract(_) | SparkError::Io(_) => 1,
        }
    }
}
