use etdf::EtdfError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("uncontrollable at Hopf point (p = 0): {0}")]
    HopfPoint(EtdfError),

    #[error(transparent)]
    Core(#[from] EtdfError),

    #[error("output error: {0}")]
    Io(String),

    #[error("{0} acceptance criteria failed")]
    Verify(usize),
}

impl CliError {
    /// 2 for bad input or an uncontrollable pair, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::HopfPoint(_) => 2,
            CliError::Core(e) => match e {
                EtdfError::InvalidDesign(_)
                | EtdfError::DimensionMismatch(_)
                | EtdfError::Expression(_)
                | EtdfError::NoPeriodicOrbit(_)
                | EtdfError::AssignmentImpossible { .. }
                | EtdfError::DeterminantObstruction(_) => 2,
                _ => 3,
            },
            CliError::Io(_) | CliError::Verify(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
