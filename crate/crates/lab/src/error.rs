use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] ple_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl LabError {
    pub fn usage(msg: impl Into<String>) -> Self {
        LabError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input, 3 for an infeasible or diverged fit, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use ple_core::Error as E;
        match self {
            LabError::Usage(_) => 2,
            LabError::Core(E::Infeasible(_) | E::Divergence { .. }) => 3,
            LabError::Core(
                E::UnknownEstimator(_)
                | E::Config(_)
                | E::ParamDomain { .. }
                | E::ParamCount { .. }
                | E::FamilyMismatch { .. }
                | E::InsufficientData { .. }
                | E::InvalidMap(_)
                | E::Resolution { .. },
            ) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(LabError::usage("x").exit_code(), 2);
        assert_eq!(LabError::from(ple_core::Error::Infeasible("x".into())).exit_code(), 3);
        let div = ple_core::Error::Divergence {
            step: 1,
            detail: "nan".into(),
        };
        assert_eq!(LabError::from(div).exit_code(), 3);
        assert_eq!(LabError::from(ple_core::Error::UnknownEstimator("x".into())).exit_code(), 2);
        assert_eq!(LabError::from(ple_core::Error::NonFiniteData).exit_code(), 1);
        let io = LabError::io("/x", std::io::Error::other("boom"));
        assert_eq!(io.exit_code(), 1);
    }
}
