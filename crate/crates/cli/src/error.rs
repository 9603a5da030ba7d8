use awe_core::audit::AuditError;
use awe_core::data::DataError;
use awe_core::encoders::EncoderError;
use awe_core::eval::EvalError;
use awe_core::losses::LossError;
use awe_core::math::MathError;
use awe_core::train::TrainError;
use std::process::ExitCode;

/// Exit status classes. Clap's own usage errors also exit with 2.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io(_) => EXIT_IO,
        })
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn math(e: &MathError) -> fn(String) -> CliError {
    match e {
        MathError::NonFinite(_) | MathError::ZeroNorm { .. } => CliError::Numeric,
        _ => CliError::Usage,
    }
}

impl From<EncoderError> for CliError {
    fn from(e: EncoderError) -> Self {
        let kind = match &e {
            EncoderError::Io(_) | EncoderError::Format(_) => CliError::Io,
            EncoderError::NonFinite(_) => CliError::Numeric,
            _ => CliError::Usage,
        };
        kind(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Encoder(inner) => inner.into(),
            DataError::Io(_) | DataError::Format(_) => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        let kind = match &e {
            LossError::Math(m) => math(m),
            _ => CliError::Usage,
        };
        kind(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let kind = match &e {
            EvalError::Io(_) | EvalError::Csv(_) => CliError::Io,
            EvalError::NonFinite => CliError::Numeric,
            EvalError::Math(m) => math(m),
            _ => CliError::Usage,
        };
        kind(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged(_) => CliError::Numeric(e.to_string()),
            TrainError::Loss(inner) => inner.into(),
            TrainError::Encoder(inner) => inner.into(),
            TrainError::Data(inner) => inner.into(),
            TrainError::Eval(inner) => inner.into(),
            TrainError::Json(_) | TrainError::Io(_) => CliError::Io(e.to_string()),
            TrainError::InvalidConfig(_) | TrainError::ShapeMismatch(_) => {
                CliError::Usage(e.to_string())
            }
        }
    }
}

impl From<AuditError> for CliError {
    fn from(e: AuditError) -> Self {
        match e {
            AuditError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            AuditError::Loss(inner) => inner.into(),
            AuditError::Encoder(inner) => inner.into(),
        }
    }
}
