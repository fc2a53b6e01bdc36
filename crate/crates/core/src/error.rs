use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the core library can report.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("point {index} lies outside the mesh ({distance:.6} mm from the nearest element)")]
    Binding { index: usize, distance: f64 },
    #[error("invariant `{name}` violated: {detail}")]
    Invariant { name: &'static str, detail: String },
    #[error("optimization aborted: {0}")]
    Optimization(String),
    #[error("direction undefined for a point at the hilum")]
    AtHilum,
    #[error("regression is rank deficient: all reference distances are equal")]
    RankDeficient,
    #[error("strain report has no valid branches")]
    EmptyReport,
    #[error("invalid phantom spec: {0}")]
    Spec(String),
}

impl Error {
    pub(crate) fn invariant(name: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant { name, detail: detail.into() }
    }
}
