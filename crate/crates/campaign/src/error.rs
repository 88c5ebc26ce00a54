use thiserror::Error;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CampaignError {
    /// Process exit code: 1 for input problems, 2 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CampaignError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<lipfrag_core::Error> for CampaignError {
    fn from(e: lipfrag_core::Error) -> Self {
        match e {
            lipfrag_core::Error::InvalidConfig(m) => CampaignError::Validation(m),
            other => CampaignError::Numerical(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CampaignError>;
