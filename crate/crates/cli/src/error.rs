use lstgrid::calibration::CalibrationError;
use lstgrid::classifier::ClassifierError;
use lstgrid::engine::EngineError;
use lstgrid::indices::IndexError;
use lstgrid::io::FormatError;
use lstgrid::lst::LstError;
use lstgrid::raster::RasterError;
use lstgrid::scene::SceneError;
use lstgrid::validation::ValidationError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag combination or value.
    #[error("{0}")]
    Usage(String),
    /// Inputs that cannot be read or do not make sense together.
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Engine(EngineError),
    #[error("{path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Engine(_) => 4,
            CliError::Output { .. } => 1,
        }
    }

    pub fn output(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            // Shape and band-count problems are the caller's inputs.
            EngineError::Input(m) => CliError::Input(m),
            EngineError::InvalidWorker(_) => CliError::Usage(e.to_string()),
            other => CliError::Engine(other),
        }
    }
}

macro_rules! input_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        }
    )*};
}

input_errors!(
    FormatError,
    SceneError,
    RasterError,
    CalibrationError,
    IndexError,
    LstError,
    ClassifierError,
    ValidationError
);
