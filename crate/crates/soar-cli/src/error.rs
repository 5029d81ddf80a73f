use soar_data::DataError;
use soar_eval::EvalError;
use soar_model::ModelError;
use soar_occlude::OccludeError;
use soar_train::TrainError;

/// Process-level error classes; the variant decides the exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration files. Exit 1.
    Usage(String),
    /// Unreadable, malformed or inconsistent data. Exit 2.
    Data(String),
    /// Numeric failure at run time (divergence, degenerate geometry). Exit 3.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Config(_) | DataError::Split(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<OccludeError> for CliError {
    fn from(e: OccludeError) -> Self {
        match e {
            OccludeError::Config(_) => CliError::Usage(e.to_string()),
            OccludeError::Io(_) | OccludeError::OccluderFile(_) => CliError::Data(e.to_string()),
            // Placement, calibration and projection failures are runtime
            // numeric conditions.
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            TrainError::Data(_) => CliError::Data(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::State(_) | TrainError::NonFinite { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(_) => CliError::Usage(e.to_string()),
            EvalError::Data(_) => CliError::Data(e.to_string()),
            EvalError::Model(m) => m.into(),
            EvalError::Occlude(o) => o.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("json error: {e}"))
    }
}
