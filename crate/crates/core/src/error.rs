use std::path::PathBuf;

/// Errors raised anywhere in the reconstruction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to access {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("input contains no points")]
    EmptyInput,

    #[error("mixed dimensionality: line {line} has {found} coordinates, expected {expected}")]
    MixedDimension {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("point cloud has no normals; estimate them first")]
    MissingNormals,

    #[error("degenerate neighborhood around point {index} (co-located duplicate points?)")]
    DegenerateNeighborhood { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("points {first} and {second} coincide")]
    DuplicatePoints { first: usize, second: usize },

    #[error("points are not unisolvent for polynomial degree {degree}")]
    NotUnisolvent { degree: usize },

    #[error("saddle-point system is singular")]
    SingularSystem,

    #[error("patch {patch} could not be fitted: {source}")]
    DegeneratePatch {
        patch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported dimension {0}; only 2 and 3 are supported")]
    UnsupportedDimension(usize),

    #[error("point lies outside every patch")]
    Uncovered,

    #[error("{uncovered} of {total} evaluation points are outside the patch cover")]
    ExcessUncovered { uncovered: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
