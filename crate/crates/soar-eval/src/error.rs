use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("eval config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Model(#[from] soar_model::ModelError),
    #[error(transparent)]
    Occlude(#[from] soar_occlude::OccludeError),
}
