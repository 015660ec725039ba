use thiserror::Error;

/// Errors raised by the simulator, planner and command-line front end.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no channel passband contains {0} nm")]
    NoChannel(f64),
    #[error("channel plan does not contain exactly one quantum channel")]
    NoQuantumChannel,
    #[error("value {value} outside domain of {what}")]
    Domain { what: &'static str, value: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("signal gain is zero, QBER undefined")]
    DegenerateChannel,
    #[error("decoy bound collapsed: no single-photon contribution provable")]
    BoundCollapse,
    #[error("secret key rate is not positive anywhere in the mean photon number range")]
    NoPositiveRate,
    #[error("splitting ratio 1:{0} exceeds the supported 1:4 without override")]
    SplitTooLarge(u32),
    #[error("no optical path between {0} and {1}")]
    NoPath(String, String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("missing required section [{0}]")]
    MissingSection(String),
    #[error("calibration residual {residual:.4e} exceeds 25x the best grid residual {grid_best:.4e}")]
    NoImprovement { residual: f64, grid_best: f64 },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Usage and parse problems, as opposed to domain failures.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::UnknownKey { .. } | Error::MissingSection(_) | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
