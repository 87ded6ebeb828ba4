use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid mesh: {0}")]
    Validation(String),

    #[error("non-manifold edges (more than two incident faces): {}", format_edges(.0))]
    NonManifold(Vec<(usize, usize)>),

    #[error("face {0} has zero area")]
    DegenerateFace(usize),

    #[error("empty feature selection")]
    EmptySelection,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("backward called before forward: {0}")]
    StateMissing(&'static str),

    #[error("vertex {0} belongs to no face")]
    IsolatedVertex(usize),

    #[error("label {label} out of range [0, {count})")]
    LabelOutOfRange { label: i64, count: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("non-finite loss at epoch {0}")]
    NonFiniteLoss(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("decimation stopped at {reached} faces, target {target}")]
    TargetUnreachable { reached: usize, target: usize },

    #[error("mesh is disconnected; unreachable vertices: {0:?}")]
    Disconnected(Vec<usize>),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupt checkpoint: {0}")]
    Corruption(String),

    #[error("feature mismatch: model trained with [{trained}], requested [{requested}]")]
    FeatureMismatch { trained: String, requested: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_edges(edges: &[(usize, usize)]) -> String {
    const SHOWN: usize = 16;
    let mut s = edges
        .iter()
        .take(SHOWN)
        .map(|(a, b)| format!("({a},{b})"))
        .collect::<Vec<_>>()
        .join(" ");
    if edges.len() > SHOWN {
        s.push_str(&format!(" ... and {} more", edges.len() - SHOWN));
    }
    s
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
