use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular point: {0}")]
    Singular(String),
    #[error("quadrature did not converge on [{lo}, {hi}]: achieved {achieved:e}, wanted {wanted:e}")]
    Quadrature { lo: f64, hi: f64, achieved: f64, wanted: f64 },
    #[error("root not bracketed: {0}")]
    Bracket(String),
    #[error("{0}")]
    NoAdmissibleA(String),
    #[error("threshold violated: {0}")]
    Threshold(String),
    #[error("manifold construction failed: {0}")]
    Manifold(String),
    #[error("volume overflows at r_hi; largest feasible r_hi is {max_r:e}")]
    Overflow { max_r: f64 },
    #[error("{stage}: {msg}")]
    Construction { stage: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn stage(stage: &str, msg: impl Into<String>) -> Self {
        Error::Construction { stage: stage.to_string(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
