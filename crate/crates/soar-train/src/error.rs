use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("train config error: {0}")]
    Config(String),
    #[error("train state error: {0}")]
    State(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("non-finite loss at epoch {epoch} batch {batch}: tpl={tpl} cls={cls} lsc={lsc}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        tpl: f64,
        cls: f64,
        lsc: f64,
    },
    #[error(transparent)]
    Model(#[from] soar_model::ModelError),
}
