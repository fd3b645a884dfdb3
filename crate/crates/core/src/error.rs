use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("probability {value} outside [0, 1] in {context}")]
    Probability { value: f64, context: &'static str },

    #[error("refused: {0}")]
    Guard(String),

    #[error("no retrievability table for group {0}")]
    MissingTable(usize),

    #[error("optimization found no feasible candidate (best shortfall {shortfall:.6})")]
    NoFeasible { shortfall: f64 },

    #[error("table file: {0}")]
    TableFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
