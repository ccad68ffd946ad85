use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid group spec: {0}")]
    Spec(String),
    #[error("word error: {0}")]
    Word(String),
    #[error("Markov structure: {0}")]
    Markov(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("outside summability region: {0}")]
    Summability(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("rejected experiment: {0}")]
    Experiment(String),
}

pub type Result<T> = std::result::Result<T, Error>;
