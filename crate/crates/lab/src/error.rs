use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] kpi_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        LabError::Io { context: context.into(), source }
    }

    /// Process exit status: 2 for anything the configuration can fix, 3 for
    /// failed numerical consistency checks, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use kpi_core::Error as E;
        match self {
            LabError::Config(_) => 2,
            LabError::Core(e) => match e {
                E::Dimension(_)
                | E::Parameter(_)
                | E::Domain(_)
                | E::MeanZero { .. }
                | E::Truncation(_)
                | E::ZeroDatum => 2,
                E::Numerical(_) | E::InfiniteConstant(_) | E::NonConvergence { .. } => 3,
                E::Format(_) | E::Io(_) => 1,
            },
            LabError::Io { .. } | LabError::Json(_) => 1,
        }
    }
}
