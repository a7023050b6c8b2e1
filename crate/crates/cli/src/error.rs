use wasslab_core::Error;

pub const INPUT: u8 = 2;
pub const NO_PREDICTION: u8 = 3;
pub const NUMERICAL: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoPrediction(_) => NO_PREDICTION,
            Error::Divergent(_)
            | Error::NonConvergent { .. }
            | Error::KernelTooNoisy { .. }
            | Error::TooFewExceedances { .. } => NUMERICAL,
            _ => INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}
