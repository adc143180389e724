//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors raised by mesh ingestion, annotation I/O, and the matching pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed geometry or annotation file. `line` is 1-based.
    #[error("parse error in {path:?} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A vertex ended up without UV coordinates after loading.
    #[error("vertex {vertex} has no UV coordinates")]
    UvMismatch { vertex: usize },

    /// Geometry with no vertices or no faces.
    #[error("mesh {id:?} is empty")]
    EmptyMesh { id: String },

    /// Nearest-neighbour query against an index built over zero points.
    #[error("spatial index contains no points")]
    EmptyIndex,

    /// Annotation table is missing a mapped column or key.
    #[error("annotation schema error in {path:?}: {message}")]
    Schema { path: PathBuf, message: String },

    /// A bounding box violates its invariants against the owning image.
    #[error("box {index} of image {image:?} out of range: {message}")]
    Range {
        image: String,
        index: usize,
        message: String,
    },

    /// An operation that needs confidence scores got a box without one.
    #[error("missing confidence score on {context}")]
    MissingConfidence { context: String },

    /// Source vertex index outside the mesh.
    #[error("vertex {vertex} is out of range for mesh {id:?} with {vertices} vertices")]
    InvalidVertex {
        id: String,
        vertex: usize,
        vertices: usize,
    },

    /// Lesion vertices fall into different connected components of the mesh.
    /// Each inner list holds the lesion indices of one component.
    #[error("lesions split across {} connected components: {components:?}", components.len())]
    DisconnectedLesions { components: Vec<Vec<usize>> },

    /// Reconstructed-vertex arrays of a scan pair disagree on template size.
    #[error("reconstructed arrays disagree on template size: {source_len} vs {target_len}")]
    TemplateSizeMismatch { source_len: usize, target_len: usize },

    /// A lesion set or correspondence map was applied to the wrong mesh.
    #[error("mesh mismatch: expected {expected:?}, got {actual:?}")]
    MeshMismatch { expected: String, actual: String },

    /// Geodesic unary costs require an anatomical correspondence map.
    #[error("geodesic node distance requires a correspondence map")]
    MissingCorrespondence,

    /// An assignment does not cover every real lesion exactly once.
    #[error("infeasible assignment: {message}")]
    InfeasibleAssignment { message: String },

    /// Tracking evaluation against an empty ground-truth pair set.
    #[error("tracking ground truth contains no lesion pairs")]
    EmptyGroundTruth,

    /// Not enough subjects (or per-sex subjects) to fill the partition quotas.
    #[error("insufficient subjects: {message}")]
    InsufficientSubjects { message: String },

    /// Invalid configuration value.
    #[error("invalid configuration: {message}")]
    Config { message: String },

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path:?}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error on {path:?}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code convention: 1 for validation errors, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Image { .. } | Error::Json { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
