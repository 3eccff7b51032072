use thiserror::Error;

/// Errors raised by estimators, controllers, the simulator and the bench runner.
#[derive(Debug, Error)]
pub enum StabError {
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("decay condition fails on sample: w = {value:e} at x = {witness:?}")]
    DecayViolation { witness: Vec<f64>, value: f64 },

    #[error("integration blow-up at substep {step}")]
    BlowUp { step: usize },

    #[error("bound infeasible: {0}")]
    BoundInfeasible(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl StabError {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, StabError::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, StabError>;
