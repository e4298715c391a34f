use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<qmgp::Error> for CliError {
    fn from(e: qmgp::Error) -> Self {
        use qmgp::Error::*;
        let msg = e.to_string();
        match e {
            Factorization { .. } => CliError::Numerical(msg),
            Config(_) | InvalidParams(_) | Unsupported(_) | IndexOutOfRange { .. } => CliError::Usage(msg),
            Domain(_) | DimensionMismatch(_) | Empty(_) => CliError::Data(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        let at = e
            .position()
            .map(|p| format!(" (line {})", p.line()))
            .unwrap_or_default();
        CliError::Data(format!("{e}{at}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        let num: CliError = qmgp::Error::Factorization {
            what: "x".into(),
            size: 3,
        }
        .into();
        assert_eq!(num.exit_code(), 3);
        let cfg: CliError = qmgp::Error::Config("bad".into()).into();
        assert_eq!(cfg.exit_code(), 1);
        let data: CliError = qmgp::Error::Domain("nan".into()).into();
        assert_eq!(data.exit_code(), 2);
    }
}
