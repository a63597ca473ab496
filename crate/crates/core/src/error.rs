use thiserror::Error;

/// Errors produced by the solver pipeline.
///
/// Variants are grouped by the stage that raises them so that front ends can
/// map them onto exit codes without string matching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("orientation error: cell {cell} is listed clockwise")]
    Orientation { cell: usize },

    #[error("degenerate cell {cell}: {msg}")]
    DegenerateCell { cell: usize, msg: String },

    #[error(
        "unisolvence violated on the patch of cell {cell}: design matrix rank {rank} < {needed}; \
         increase the patch depth"
    )]
    RankDeficient {
        cell: usize,
        rank: usize,
        needed: usize,
    },

    #[error("mesh too coarse for order {m}: the patch of cell {cell} exhausts the mesh at {available} cells (need {needed})")]
    MeshTooCoarse {
        m: usize,
        cell: usize,
        available: usize,
        needed: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("factorization breakdown at pivot {pivot} (cell {cell}), pivot value {value:e}")]
    Factorization { pivot: usize, cell: usize, value: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error comes from a numerical stage rather than from input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::MeshTooCoarse { .. }
                | Error::Factorization { .. }
                | Error::Singular(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
