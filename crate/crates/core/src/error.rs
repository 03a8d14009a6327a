use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} is not finite at x = {x}")]
    Evaluation { what: &'static str, x: f64 },

    #[error("quadrature missed its tolerance: best estimate {estimate:e}, error bound {error:e}")]
    Accuracy { estimate: f64, error: f64 },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("inconsistent boundary profile: {0}")]
    Inconsistent(String),

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Config(String),
}
