use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("sampler did not converge within the restart schedule")]
    NotConverged,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::NotConverged => 3,
        }
    }
}

pub fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

pub fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}
