use std::fmt;

/// Error carrying its process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

impl CliError {
    pub fn validation(message: String) -> Self {
        Self { code: EXIT_VALIDATION, message }
    }

    pub fn numerical(message: String) -> Self {
        Self { code: EXIT_NUMERICAL, message }
    }

    pub fn io(message: String) -> Self {
        Self { code: EXIT_IO, message }
    }

    fn prefixed(self, module: &str) -> Self {
        Self {
            message: format!("{module}: {}", self.message),
            ..self
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn core_code(e: &gpstate_core::Error) -> i32 {
    use gpstate_core::Error as E;
    match e {
        E::NonFinite { .. } | E::DegenerateField { .. } => EXIT_NUMERICAL,
        E::RecordFailed { source, .. } => core_code(source),
        E::Format(_) | E::SizeMismatch { .. } | E::Checksum { .. } | E::HeaderChecksum | E::Io(_) => EXIT_IO,
        E::InvalidGrid(_) | E::GridMismatch(_) | E::InvalidConfig(_) | E::EmptyPlan | E::TooSmall(_) => EXIT_VALIDATION,
    }
}

fn nn_code(e: &gpstate_nn::Error) -> i32 {
    use gpstate_nn::Error as E;
    match e {
        E::NonFinite(_) | E::NonFiniteLoss { .. } => EXIT_NUMERICAL,
        E::Checkpoint(_) | E::Checksum | E::Io(_) => EXIT_IO,
        E::Data(inner) => core_code(inner),
        E::Shape(_) | E::Config(_) | E::Uninitialized | E::Empty(_) => EXIT_VALIDATION,
    }
}

impl From<gpstate_core::Error> for CliError {
    fn from(e: gpstate_core::Error) -> Self {
        Self { code: core_code(&e), message: e.to_string() }.prefixed("solver")
    }
}

impl From<gpstate_nn::Error> for CliError {
    fn from(e: gpstate_nn::Error) -> Self {
        Self { code: nn_code(&e), message: e.to_string() }.prefixed("network")
    }
}

impl From<gpstate_eval::Error> for CliError {
    fn from(e: gpstate_eval::Error) -> Self {
        use gpstate_eval::Error as E;
        match e {
            E::Core(inner) => inner.into(),
            E::Net(inner) => inner.into(),
            E::Io(inner) => Self::io(inner.to_string()).prefixed("evaluator"),
            other => Self::validation(other.to_string()).prefixed("evaluator"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_the_failure_kind() {
        let nan: CliError = gpstate_core::Error::NonFinite { iteration: 3 }.into();
        assert_eq!(nan.code, EXIT_NUMERICAL);
        let crc: CliError = gpstate_core::Error::Checksum { index: 7 }.into();
        assert_eq!(crc.code, EXIT_IO);
        assert!(crc.message.contains('7'));
        let cfg: CliError = gpstate_nn::Error::Config("x".into()).into();
        assert_eq!(cfg.code, EXIT_VALIDATION);
        let loss: CliError = gpstate_eval::Error::Net(gpstate_nn::Error::NonFiniteLoss { epoch: 1, batch: 0 }).into();
        assert_eq!(loss.code, EXIT_NUMERICAL);
        let failed: CliError = gpstate_core::Error::RecordFailed {
            index: 2,
            completed: vec![0, 1],
            source: Box::new(gpstate_core::Error::NonFinite { iteration: 9 }),
        }
        .into();
        assert_eq!(failed.code, EXIT_NUMERICAL);
    }
}
