use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A state left the finite region `|x| <= 1e12` during integration.
    #[error("integration diverged at t = {time} (step {step})")]
    Diverged { time: f64, step: usize },

    #[error("invalid design: condition `{condition}` violated ({detail})")]
    InvalidDesign { condition: String, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
