use thiserror::Error;

use crate::scenario::AgentId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("agent {agent_id} has a gap before frame {gap_frame}")]
    NonContiguousTrack { agent_id: AgentId, gap_frame: i64 },
    #[error("non-finite or unparsable value in data row {0}")]
    NonFinite(usize),
    #[error("duplicate agent {agent_id} in frame {frame}")]
    DuplicateAgent { agent_id: AgentId, frame: i64 },
    #[error("ego agent absent from frame {0}")]
    EgoAbsent(i64),
    #[error("frame {0} not present in scenario")]
    EmptyFrame(i64),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("Doppler ratio denominator vanishes")]
    DegenerateDenominator,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is not symmetric positive semidefinite: {0}")]
    NotPsd(String),
    #[error("degenerate covariance at step {0}")]
    DegenerateCovariance(usize),
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error("model manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical breakdowns as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteLoss { .. } | Error::DegenerateCovariance(_) | Error::NotPsd(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
